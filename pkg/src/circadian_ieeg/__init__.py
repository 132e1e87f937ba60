"""Detection of circadian-dependent epileptic biomarkers in intracranial EEG.

Interictal spikes, ripple-band HFOs, spike propagation sequences and
pathological HFOs are detected per channel. Sleep and wake are classified from
the alpha/delta power ratio, and biomarker rates are summarised by time of day
and by distance to the seizure onset zone.
"""

from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, FormatError, NumericalError
from .events import EventRecord, SequenceConfig, classify_phfo, detect_sequences
from .hfo import HfoConfig, HfoEvent, detect_hfos
from .model import (AnnotationSet, Block, ChannelMeta, Recording, load_annotations,
                    load_recording, save_annotations, save_recording, slice_blocks)
from .pipeline import EventStore, run_detect, run_report
from .sleep import SleepConfig, classify_sleep, compute_adr, roc_auc
from .spikes import SpikeConfig, SpikeEvent, detect_spikes, spike_band
from .synth import SynthConfig, TruthManifest, generate_recording, score_detections

__version__ = "0.1.0"

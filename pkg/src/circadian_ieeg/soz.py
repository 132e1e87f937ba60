"""Rate comparisons between channel groups and states, and distance to the SOZ."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .model import ChannelMeta

__all__ = [
    "RateRow",
    "RateTable",
    "per_channel_counts",
    "event_rates_by_group",
    "WilcoxonResult",
    "wilcoxon_signed_rank",
    "AnovaResult",
    "anova_oneway",
    "DistanceRecord",
    "min_distance_to_soz",
    "summarize",
]


@dataclass(frozen=True)
class RateRow:
    group: str
    rate: float
    exposure_min: float
    event_count: int
    n_channels: int
    mean: float
    sd: float
    channel_rates: Mapping[str, float] = field(default_factory=dict, compare=False)


@dataclass
class RateTable:
    rows: list[RateRow]

    def __getitem__(self, group: str) -> RateRow:
        for r in self.rows:
            if r.group == group:
                return r
        raise KeyError(group)

    @property
    def total_events(self) -> int:
        return sum(r.event_count for r in self.rows)


def summarize(values) -> tuple[float, float]:
    """Mean and sample SD (0 for fewer than two values)."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return 0.0, 0.0
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def per_channel_counts(events: Iterable, channel_names: Sequence[str]) -> dict[str, int]:
    counts = dict.fromkeys(channel_names, 0)
    for e in events:
        if e.channel in counts:
            counts[e.channel] += 1
    return counts


def _row(group: str, names: Sequence[str], counts: Mapping[str, int], exposure: float) -> RateRow:
    if exposure <= 0:
        raise ValueError(f"zero exposure for group {group!r}")
    per = {c: counts.get(c, 0) / exposure for c in names}
    total = sum(counts.get(c, 0) for c in names)
    rate = total / (exposure * len(names)) if names else 0.0
    mean, sd = summarize(per.values())
    return RateRow(group, rate, float(exposure), int(total), len(names), mean, sd, per)


def event_rates_by_group(events: Sequence, channels: Sequence[ChannelMeta], grouping: str = "soz",
                         exposure_min: float | Mapping[str, float] = 1.0,
                         state_of: Callable[[float], str | None] | None = None) -> RateTable:
    """Events per channel per minute, grouped by SOZ membership, state or kind.

    ``exposure_min`` is a scalar for ``soz`` and ``kind`` groupings and a
    ``{state: minutes}`` mapping for ``sleep-state``, where ``state_of`` maps
    an event time to its state. Bad channels are ignored.
    """
    good = [c for c in channels if not c.is_bad]
    names = [c.name for c in good]
    events = [e for e in events if e.channel in set(names)]

    if grouping == "soz":
        soz = [c.name for c in good if c.is_soz]
        non = [c.name for c in good if not c.is_soz]
        counts = per_channel_counts(events, names)
        rows = [_row(g, members, counts, float(exposure_min))
                for g, members in (("soz", soz), ("non-soz", non)) if members]
    elif grouping == "sleep-state":
        if state_of is None or not isinstance(exposure_min, Mapping):
            raise ValueError("sleep-state grouping needs state_of and per-state exposure")
        rows = []
        for state in sorted(exposure_min):
            sel = [e for e in events if state_of(e.t_peak) == state]
            rows.append(_row(state, names, per_channel_counts(sel, names), exposure_min[state]))
    elif grouping == "kind":
        rows = []
        for kind in sorted({e.kind for e in events}):
            sel = [e for e in events if e.kind == kind]
            rows.append(_row(kind, names, per_channel_counts(sel, names), float(exposure_min)))
    else:
        raise ValueError(f"unknown grouping {grouping!r}")
    return RateTable(rows)


@dataclass(frozen=True)
class WilcoxonResult:
    W: float
    w_plus: float
    w_minus: float
    n: int
    p: float
    exact: bool


def _exact_cdf_doubled(ranks2: np.ndarray, w2: int) -> float:
    """P(W+ <= w2/2) under the null, with ranks given doubled as integers."""
    counts = np.zeros(int(ranks2.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r] if r else counts
        counts = counts + shifted
    return counts[: w2 + 1].sum() / float(2 ** len(ranks2))


def _normal_p(w: float, n: int, ties: np.ndarray) -> float:
    mu = n * (n + 1) / 4
    var = n * (n + 1) * (2 * n + 1) / 24 - np.sum(ties ** 3 - ties) / 48
    if var <= 0:
        return 1.0
    z = max(abs(w - mu) - 0.5, 0.0) / np.sqrt(var)
    return float(min(1.0, special.erfc(z / np.sqrt(2))))


def wilcoxon_signed_rank(a, b=None, exact_max_n: int = 12, min_n: int = 5) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on pairs ``(a_i, b_i)``.

    Zero differences are dropped. Exact null distribution for
    ``n <= exact_max_n``, normal approximation with continuity and tie
    corrections above.
    """
    if b is None:
        pairs = np.asarray(a, dtype=float)
        a, b = pairs[:, 0], pairs[:, 1]
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    if d.size == 0:
        raise ValueError("all differences zero")
    n = d.size
    if n < min_n:
        raise ValueError(f"need at least {min_n} non-zero differences, got {n}")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= exact_max_n:
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        p = min(1.0, 2 * _exact_cdf_doubled(ranks2, int(round(2 * w))))
        exact = True
    else:
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        p = _normal_p(w, n, tie_counts.astype(float))
        exact = False
    return WilcoxonResult(w, w_plus, w_minus, n, float(p), exact)


@dataclass(frozen=True)
class AnovaResult:
    F: float
    df1: int
    df2: int
    p: float

    @property
    def infinite(self) -> bool:
        return np.isinf(self.F)


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way ANOVA F test; F is +inf (p = 0) when all within-group variance vanishes."""
    gs = [np.asarray(g, dtype=float) for g in groups]
    if len(gs) < 2 or any(g.size < 2 for g in gs):
        raise ValueError("ANOVA needs at least 2 groups of at least 2 samples")
    allv = np.concatenate(gs)
    k, n = len(gs), allv.size
    grand = allv.mean()
    ssb = sum(g.size * (g.mean() - grand) ** 2 for g in gs)
    ssw = sum(((g - g.mean()) ** 2).sum() for g in gs)
    df1, df2 = k - 1, n - k
    scale = max(np.abs(allv).max(), 1.0) ** 2 * n
    if ssw <= 1e-15 * scale:
        if ssb <= 1e-15 * scale:
            raise ValueError("total variance is zero")
        return AnovaResult(float("inf"), df1, df2, 0.0)
    f = (ssb / df1) / (ssw / df2)
    return AnovaResult(float(f), df1, df2, float(special.fdtrc(df1, df2, f)))


@dataclass(frozen=True)
class DistanceRecord:
    event: object
    channel: str
    min_euclid_mm: float


def min_distance_to_soz(events: Sequence, channels: Sequence[ChannelMeta]) -> list[DistanceRecord]:
    """Euclidean distance from each event's channel to the nearest SOZ channel."""
    soz = np.array([c.coord_mm for c in channels if c.is_soz], dtype=float)
    if soz.size == 0:
        raise ValueError("no SOZ channels defined")
    coords = {c.name: np.asarray(c.coord_mm, dtype=float) for c in channels}
    soz_names = {c.name for c in channels if c.is_soz}
    nearest = {}
    for name, xyz in coords.items():
        nearest[name] = 0.0 if name in soz_names else float(
            np.sqrt(((soz - xyz) ** 2).sum(axis=1)).min())
    return [DistanceRecord(e, e.channel, nearest[e.channel]) for e in events]

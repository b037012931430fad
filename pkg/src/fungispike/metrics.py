"""Entropy, diversity and complexity measures of signals and spike trains.

All logarithms are base 2. Entropies of spike events are taken over the
histogram of inter-spike intervals; see :func:`isi_distribution`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import DomainError, SizeError
from .lz import DEFAULT_SHUFFLES, normalized_lz, pcipk

DEFAULT_BINS = 256
DEFAULT_Q = 2.0


@dataclass
class Distribution:
    """Discrete probability distribution; ``labels`` name the outcomes."""

    probabilities: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float).ravel()
        if p.size == 0:
            raise SizeError("empty distribution")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise DomainError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
        self.probabilities = p

    @classmethod
    def from_counts(cls, counts, labels=None) -> "Distribution":
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise SizeError("no observations")
        p = counts / total
        # absorb the last-ulp rounding so the sum check is exact
        p = p / p.sum()
        return cls(p, labels)


def shannon(d: Distribution) -> float:
    p = d.probabilities[d.probabilities > 0]
    return float(-(p * np.log2(p)).sum()) + 0.0


def tsallis(d: Distribution, q: float = DEFAULT_Q, k: float = 1.0) -> float:
    if q == 1:
        raise DomainError("Tsallis entropy is not defined at q = 1")
    p = d.probabilities[d.probabilities > 0]
    return float(k / (q - 1.0) * (1.0 - np.sum(p**q)))


def renyi(d: Distribution, q: float = DEFAULT_Q) -> float:
    if q == 1:
        raise DomainError("Renyi entropy is not defined at q = 1")
    if q < 0:
        raise DomainError("Renyi order must be non-negative")
    p = d.probabilities[d.probabilities > 0]
    return float(np.log2(np.sum(p**q)) / (1.0 - q)) + 0.0


def simpson(d: Distribution) -> float:
    """Sum of squared probabilities."""
    return float(np.sum(d.probabilities**2))


def space_filling(train) -> float:
    """Fraction of time bins holding a spike."""
    train = np.asarray(train)
    if train.size == 0:
        raise SizeError("empty spike train")
    return float(np.count_nonzero(train)) / train.size


def expressiveness(h_spike: float, delta: float) -> float | None:
    """Spike entropy per unit of space-filling; ``None`` when there are no
    spikes to divide by."""
    if delta <= 0:
        return None
    return h_spike / delta


def spike_train(peak_indices, length: int) -> np.ndarray:
    """Binary train of ``length`` bins with a 1 at every peak index."""
    bits = np.zeros(length, dtype=np.int8)
    idx = np.asarray(peak_indices, dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= length:
            raise SizeError("peak index outside the train")
        bits[idx] = 1
    return bits


def histogram_distribution(values, bins: int) -> Distribution:
    """Equal-width histogram of ``values`` over their own range."""
    values = np.asarray(values, dtype=float)
    if bins < 2:
        raise DomainError("at least 2 bins are needed")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return Distribution(np.array([1.0]))
    counts, _ = np.histogram(values, bins=bins, range=(lo, hi))
    return Distribution.from_counts(counts[counts > 0])


def signal_entropy(x, bins: int = DEFAULT_BINS) -> float:
    """Shannon entropy of the amplitude histogram of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise SizeError("entropy of an empty signal")
    return shannon(histogram_distribution(x, bins))


def _peak_times(events) -> np.ndarray:
    return np.array([getattr(e, "peak_time_s", e) for e in events], dtype=float)


def isi_distribution(events, bins: int = DEFAULT_BINS) -> Distribution | None:
    """Histogram of inter-spike intervals, or ``None`` for fewer than two
    events. ``events`` are :class:`~fungispike.spikes.SpikeEvent` objects or
    plain peak times in seconds."""
    times = _peak_times(events)
    if times.size < 2:
        return None
    return histogram_distribution(np.diff(np.sort(times)), bins)


def spike_entropy(events, bins: int = DEFAULT_BINS) -> float:
    """Event count times the Shannon entropy of the inter-spike-interval
    histogram. Zero for fewer than two events."""
    d = isi_distribution(events, bins)
    if d is None:
        return 0.0
    return len(events) * shannon(d)


@dataclass
class MetricsRow:
    channel: int
    spike_count: int
    mean_length_s: float
    mean_amplitude_mv: float
    h_signal: float
    h_spike: float
    simpson: float
    space_filling: float
    expressiveness: float | None
    kolmogorov: float
    pcipk: float
    tsallis: float
    renyi: float

    @classmethod
    def column_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list:
        return [getattr(self, name) for name in self.column_names()]


def metrics_row(
    channel: int,
    x,
    events,
    *,
    bins: int = DEFAULT_BINS,
    q: float = DEFAULT_Q,
    k: float = 1.0,
    shuffles: int = DEFAULT_SHUFFLES,
    seed: int = 0,
) -> MetricsRow:
    """Every complexity measure for one channel of one chunk.

    ``events`` are the chunk's spikes with ``peak_index`` relative to the
    start of ``x``. Distribution-based measures that need at least two
    spikes are NaN when fewer were detected.
    """
    x = np.asarray(x, dtype=float)
    train = spike_train([e.peak_index for e in events], x.size)
    delta = space_filling(train)
    h_spike = spike_entropy(events, bins)
    d = isi_distribution(events, bins)
    nan = math.nan
    return MetricsRow(
        channel=channel,
        spike_count=len(events),
        mean_length_s=float(np.mean([e.duration_s for e in events])) if events else nan,
        mean_amplitude_mv=float(np.mean([e.amplitude for e in events])) if events else nan,
        h_signal=signal_entropy(x, bins),
        h_spike=h_spike,
        simpson=simpson(d) if d is not None else nan,
        space_filling=delta,
        expressiveness=expressiveness(h_spike, delta),
        kolmogorov=normalized_lz(train),
        pcipk=pcipk([train], shuffles, seed),
        tsallis=tsallis(d, q, k) if d is not None else nan,
        renyi=renyi(d, q) if d is not None else nan,
    )

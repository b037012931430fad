"""Envelope-residual spike detection and per-spike characterisation.

The raw signal is clamped into its envelopes; samples that poke outside
leave a non-negative residual, and spikes are the residual's peaks whose
topographic prominence clears a threshold derived from the residual's own
statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .envelope import DEFAULT_WINDOW, EnvelopePair, compute_envelopes
from .errors import ConfigurationError, SizeError

Z_STAR_99 = 2.576
DEFAULT_MIN_DIST = 120
ONSET_FRACTION = 0.10


@dataclass
class SpikeEvent:
    peak_index: int
    peak_time_s: float
    prominence: float
    amplitude: float
    onset_index: int
    offset_index: int
    duration_s: float
    depol_rate_uV_per_s: float
    repol_rate_uV_per_s: float
    refractory_s: float | None = None
    truncated: bool = False


@dataclass
class DetectorParams:
    """Tunable parameters of :func:`detect_spikes`.

    ``threshold_mode="ci"`` uses the confidence bound on the mean,
    ``mean + z*.sd/sqrt(N)``; ``"sd"`` drops the ``sqrt(N)`` and gives the
    much stricter ``mean + z*.sd``.
    """

    z_star: float = Z_STAR_99
    min_dist: int = DEFAULT_MIN_DIST
    window: int = DEFAULT_WINDOW
    preprocess: bool = True
    threshold_mode: str = "ci"
    edge_mode: str = "reflect"
    onset_fraction: float = ONSET_FRACTION


@dataclass
class Detection:
    """Everything :func:`detect_spikes` computed for one chunk."""

    events: list[SpikeEvent]
    envelopes: EnvelopePair
    clamped: np.ndarray
    residual: np.ndarray
    gamma: float
    params: DetectorParams = field(default_factory=DetectorParams)


def _check_same_length(*arrays):
    n = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != n:
            raise SizeError(f"length mismatch: {n} vs {a.shape}")


def clamp_to_envelope(x, env: EnvelopePair) -> np.ndarray:
    """Replace samples at or beyond an envelope with the envelope value."""
    x = np.asarray(x, dtype=float)
    _check_same_length(x, env.upper, env.lower)
    out = x.copy()
    below = x <= env.lower
    above = x >= env.upper
    out[below] = env.lower[below]
    out[above] = env.upper[above]
    return out


def residual(x, clamped) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    clamped = np.asarray(clamped, dtype=float)
    _check_same_length(x, clamped)
    return np.abs(x - clamped)


def prominence_threshold(phi, z_star: float = Z_STAR_99, mode: str = "ci") -> float:
    """Minimum prominence ``gamma`` for a residual ``phi``.

    Uses the population standard deviation. ``mode="ci"`` divides it by
    ``sqrt(N)``; ``mode="sd"`` does not.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.size == 0:
        raise SizeError("threshold of an empty residual")
    sigma = phi.std()
    if mode == "ci":
        sigma = sigma / np.sqrt(phi.size)
    elif mode != "sd":
        raise ConfigurationError(f"unknown threshold mode {mode!r}")
    return float(phi.mean() + z_star * sigma)


def local_maxima(x) -> np.ndarray:
    """Indices of strict local maxima; a flat top reports its middle sample
    (left of centre for even widths). Samples at the borders never qualify."""
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        return np.empty(0, dtype=np.int64)
    change = np.flatnonzero(np.diff(x) != 0) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change - 1, [x.size - 1]))
    vals = x[starts]
    sel = np.flatnonzero((vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])) + 1
    return ((starts[sel] + ends[sel]) // 2).astype(np.int64)


@numba.njit(cache=True)
def _prominences(x, peaks):
    n = x.shape[0]
    out = np.empty(peaks.shape[0])
    for k in range(peaks.shape[0]):
        p = peaks[k]
        h = x[p]
        left_min = h
        i = p - 1
        while i >= 0 and x[i] <= h:
            if x[i] < left_min:
                left_min = x[i]
            i -= 1
        right_min = h
        i = p + 1
        while i < n and x[i] <= h:
            if x[i] < right_min:
                right_min = x[i]
            i += 1
        out[k] = h - max(left_min, right_min)
    return out


def peak_prominences(x, peaks) -> np.ndarray:
    """Topographic prominence of each peak: its height above the higher of
    the lowest points reached before meeting a strictly higher sample (or
    the border) on either side."""
    x = np.ascontiguousarray(x, dtype=float)
    peaks = np.ascontiguousarray(peaks, dtype=np.int64)
    if peaks.size == 0:
        return np.empty(0)
    return _prominences(x, peaks)


@numba.njit(cache=True)
def _thin_by_distance(peaks, heights, order, min_dist):
    keep = np.ones(peaks.shape[0], dtype=np.bool_)
    for j in range(order.shape[0]):
        k = order[j]
        if not keep[k]:
            continue
        i = k - 1
        while i >= 0 and peaks[k] - peaks[i] < min_dist:
            keep[i] = False
            i -= 1
        i = k + 1
        while i < peaks.shape[0] and peaks[i] - peaks[k] < min_dist:
            keep[i] = False
            i += 1
    return keep


def thin_by_distance(peaks, heights, min_dist: int) -> np.ndarray:
    """Keep the higher of any two peaks closer than ``min_dist`` samples,
    the earlier one on equal heights. ``peaks`` must be increasing."""
    peaks = np.asarray(peaks, dtype=np.int64)
    if peaks.size == 0 or min_dist <= 1:
        return peaks
    heights = np.asarray(heights, dtype=float)
    # stable sort on -height keeps earlier indices first among ties
    order = np.argsort(-heights, kind="stable")
    keep = _thin_by_distance(peaks, heights, order, int(min_dist))
    return peaks[keep]


def find_spikes(phi, gamma: float, w_min_dist: int = DEFAULT_MIN_DIST) -> np.ndarray:
    """Peaks of ``phi`` with prominence at least ``gamma`` that survive
    thinning to ``w_min_dist`` samples.

    Local maxima are thinned by height before the prominence test, as in
    :func:`scipy.signal.find_peaks`.
    """
    if w_min_dist < 1:
        raise ValueError("w_min_dist must be at least 1")
    phi = np.ascontiguousarray(phi, dtype=float)
    peaks = local_maxima(phi)
    if peaks.size == 0:
        return peaks
    # thinning first keeps the surviving set independent of gamma, so a
    # higher threshold can only remove peaks
    peaks = thin_by_distance(peaks, phi[peaks], w_min_dist)
    return peaks[peak_prominences(phi, peaks) >= gamma]


@numba.njit(cache=True)
def _excursion_bounds(dev, peaks, frac):
    n = dev.shape[0]
    m = peaks.shape[0]
    onset = np.empty(m, dtype=np.int64)
    offset = np.empty(m, dtype=np.int64)
    truncated = np.zeros(m, dtype=np.bool_)
    for k in range(m):
        p = peaks[k]
        thr = frac * dev[p]
        i = p - 1
        while i >= 0 and not dev[i] < thr:
            i -= 1
        if i < 0:
            i = 0
            truncated[k] = True
        onset[k] = i
        i = p + 1
        while i < n and not dev[i] < thr:
            i += 1
        if i >= n:
            i = n - 1
            truncated[k] = True
        offset[k] = i
    return onset, offset, truncated


def _events_from_bounds(x, centerline, peaks, onset, offset, truncated, prominence, fs, t0):
    events = []
    for k, p in enumerate(peaks):
        on = int(onset[k])
        off = int(offset[k])
        rise = (p - on) / fs
        fall = (off - p) / fs
        depol = abs(x[p] - x[on]) / rise * 1e3 if rise > 0 else 0.0
        repol = abs(x[p] - x[off]) / fall * 1e3 if fall > 0 else 0.0
        events.append(
            SpikeEvent(
                peak_index=int(p),
                peak_time_s=t0 + p / fs,
                prominence=float(prominence[k]),
                amplitude=float(x[p] - centerline[p]),
                onset_index=on,
                offset_index=off,
                duration_s=(off - on) / fs,
                depol_rate_uV_per_s=float(depol),
                repol_rate_uV_per_s=float(repol),
                truncated=bool(truncated[k]),
            )
        )
    return events


def characterize_spike(
    x,
    env: EnvelopePair,
    peak_index: int,
    next_onset: int | None = None,
    *,
    sampling_rate_hz: float = 1.0,
    onset_fraction: float = ONSET_FRACTION,
    prominence: float = float("nan"),
    t0: float = 0.0,
) -> SpikeEvent:
    """Describe the spike peaking at ``peak_index``.

    Onset and offset are the nearest samples on either side of the peak
    where the deviation from the centreline drops below ``onset_fraction``
    of the peak's own deviation. Rates are in uV/s (input in mV). If a
    search reaches the chunk border the event is flagged ``truncated`` and
    the border sample is used.
    """
    x = np.asarray(x, dtype=float)
    dev = np.ascontiguousarray(np.abs(x - env.centerline))
    peaks = np.array([peak_index], dtype=np.int64)
    onset, offset, truncated = _excursion_bounds(dev, peaks, onset_fraction)
    event = _events_from_bounds(
        x, env.centerline, peaks, onset, offset, truncated, [prominence], sampling_rate_hz, t0
    )[0]
    if next_onset is not None:
        event.refractory_s = (next_onset - event.offset_index) / sampling_rate_hz
    return event


def detect_spikes(
    x,
    sampling_rate_hz: float = 1.0,
    params: DetectorParams | None = None,
    *,
    t0: float = 0.0,
) -> Detection:
    """Run envelope construction, clamping, thresholding, peak finding and
    characterisation on one chunk. ``t0`` offsets the reported peak times."""
    params = params or DetectorParams()
    x = np.ascontiguousarray(x, dtype=float)
    env = compute_envelopes(x, params.preprocess, params.window, params.edge_mode)
    clamped = clamp_to_envelope(x, env)
    phi = residual(x, clamped)
    gamma = prominence_threshold(phi, params.z_star, params.threshold_mode)

    peaks = local_maxima(phi)
    peaks = thin_by_distance(peaks, phi[peaks], params.min_dist)
    prom = peak_prominences(phi, peaks)
    strong = prom >= gamma
    peaks, prom = peaks[strong], prom[strong]

    dev = np.ascontiguousarray(np.abs(x - env.centerline))
    onset, offset, truncated = _excursion_bounds(dev, peaks, params.onset_fraction)
    events = _events_from_bounds(
        x, env.centerline, peaks, onset, offset, truncated, prom, sampling_rate_hz, t0
    )
    for cur, nxt in zip(events, events[1:]):
        cur.refractory_s = (nxt.onset_index - cur.offset_index) / sampling_rate_hz
    return Detection(events, env, clamped, phi, gamma, params)

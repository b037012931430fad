"""Synthetic multi-channel recordings with known spike positions.

Each spike is a piecewise-linear template (linear rise to the peak, linear
fall back to baseline) added to Gaussian white noise and a slow sinusoidal
drift. Channels draw from independent child seeds of one master seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .config import parse_floats, read_kv
from .errors import SpecError
from .ingest import Recording


@dataclass
class SynthSpec:
    """Parameters of a synthetic recording.

    Spike positions come from exactly one of ``spike_times`` (explicit peak
    times per channel, seconds), ``spike_count`` (that many spikes per
    channel at uniformly random positions) or ``spike_rate_hz`` (Poisson
    arrivals with a dead time). ``refractory_s`` is the minimum quiet time
    between one spike's end and the next one's start, and also kept clear at
    both ends of the recording for generated positions.
    """

    channel_count: int = 7
    duration_s: float = 57600.0
    sampling_rate_hz: float = 1.0
    drift_amplitude_mv: float = 0.0
    drift_period_s: float = 21600.0
    noise_sd_mv: float = 0.0
    rise_s: float = 1000.0
    fall_s: float = 1250.0
    amplitude_mv: float = 2.0
    spike_times: list[list[float]] | None = None
    spike_count: int | None = None
    spike_rate_hz: float | None = None
    refractory_s: float = 0.0
    trigger_s: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.channel_count < 1:
            raise SpecError("channel_count must be at least 1")
        for name in ("duration_s", "sampling_rate_hz", "rise_s", "fall_s", "drift_period_s"):
            if not getattr(self, name) > 0:
                raise SpecError(f"{name} must be positive")
        if self.noise_sd_mv < 0 or self.refractory_s < 0:
            raise SpecError("noise_sd_mv and refractory_s must be non-negative")
        sources = [self.spike_times is not None, self.spike_count is not None,
                   self.spike_rate_hz is not None]
        if sum(sources) > 1:
            raise SpecError("give only one of spike_times, spike_count, spike_rate_hz")
        if self.spike_times is not None and len(self.spike_times) != self.channel_count:
            raise SpecError("spike_times needs one list per channel")


@dataclass(frozen=True)
class GroundTruthSpike:
    channel: int
    onset_index: int
    peak_index: int
    offset_index: int
    peak_time_s: float


def load_spec(path) -> SynthSpec:
    """Read a :class:`SynthSpec` from a ``key = value`` file.

    ``spike_times`` lists comma-separated peak times with channels separated
    by ``;``.
    """
    raw = read_kv(path)
    known = {f.name: f for f in fields(SynthSpec)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise SpecError(f"{path}: unknown key {key!r}")
        if key == "spike_times":
            kwargs[key] = [parse_floats(part) for part in value.split(";")]
        elif key in ("channel_count", "spike_count", "seed"):
            kwargs[key] = int(value)
        elif key == "trigger_s" and value.lower() in ("", "none"):
            kwargs[key] = None
        else:
            kwargs[key] = float(value)
    return SynthSpec(**kwargs)


def spec_to_kv(spec: SynthSpec) -> dict:
    out = {}
    for key, value in asdict(spec).items():
        if value is None:
            continue
        if key == "spike_times":
            value = ";".join(",".join(repr(float(t)) for t in ch) for ch in value)
        out[key] = value
    return out


def _onsets_for_count(rng, spec: SynthSpec, count: int) -> np.ndarray:
    width = spec.rise_s + spec.fall_s
    slack = spec.duration_s - count * width - (count + 1) * spec.refractory_s
    if slack < 0:
        raise SpecError(
            f"{count} spikes of {width:g} s with {spec.refractory_s:g} s refractory "
            f"floor do not fit in {spec.duration_s:g} s"
        )
    u = np.sort(rng.uniform(0.0, slack, size=count))
    return spec.refractory_s + u + np.arange(count) * (width + spec.refractory_s)


def _onsets_for_rate(rng, spec: SynthSpec) -> np.ndarray:
    width = spec.rise_s + spec.fall_s
    onsets = []
    t = 0.0
    while True:
        t += spec.refractory_s + rng.exponential(1.0 / spec.spike_rate_hz)
        if t + width + spec.refractory_s > spec.duration_s:
            break
        onsets.append(t)
        t += width
    return np.array(onsets)


def _check_spacing(onsets: np.ndarray, spec: SynthSpec, channel: int):
    width = spec.rise_s + spec.fall_s
    if onsets.size and (onsets[0] < 0 or onsets[-1] + width > spec.duration_s):
        raise SpecError(f"channel {channel}: spike extends past the recording")
    quiet = np.diff(onsets) - width
    if np.any(quiet < spec.refractory_s - 1e-9):
        raise SpecError(
            f"channel {channel}: spikes overlap or violate the "
            f"{spec.refractory_s:g} s refractory floor"
        )


def spike_template(t, onset_s: float, rise_s: float, fall_s: float, amplitude: float):
    """Piecewise-linear spike evaluated at times ``t`` (zero outside)."""
    t = np.asarray(t, dtype=float)
    rel = t - onset_s
    up = amplitude * rel / rise_s
    down = amplitude * (rise_s + fall_s - rel) / fall_s
    return np.where(rel < 0, 0.0, np.where(rel <= rise_s, up, np.where(rel <= rise_s + fall_s, down, 0.0)))


def synthesize(spec: SynthSpec) -> tuple[Recording, list[GroundTruthSpike]]:
    """Generate a recording and the exact positions of every injected spike."""
    fs = spec.sampling_rate_hz
    n = int(round(spec.duration_s * fs))
    t = np.arange(n) / fs
    children = np.random.SeedSequence(spec.seed).spawn(spec.channel_count)
    samples = np.zeros((spec.channel_count, n))
    truth = []
    for ch, child in enumerate(children):
        rng = np.random.default_rng(child)
        if spec.spike_times is not None:
            onsets = np.sort(np.asarray(spec.spike_times[ch], dtype=float)) - spec.rise_s
        elif spec.spike_count is not None:
            onsets = _onsets_for_count(rng, spec, spec.spike_count)
        elif spec.spike_rate_hz is not None:
            onsets = _onsets_for_rate(rng, spec)
        else:
            onsets = np.empty(0)
        _check_spacing(onsets, spec, ch)

        phase = rng.uniform(0.0, 2 * np.pi)
        noise = rng.normal(0.0, spec.noise_sd_mv, size=n) if spec.noise_sd_mv > 0 else 0.0
        x = spec.drift_amplitude_mv * np.sin(2 * np.pi * t / spec.drift_period_s + phase) + noise
        for on in onsets:
            lo = int(np.ceil(on * fs))
            hi = min(n, int(np.floor((on + spec.rise_s + spec.fall_s) * fs)) + 1)
            x[lo:hi] += spike_template(t[lo:hi], on, spec.rise_s, spec.fall_s, spec.amplitude_mv)
            peak_s = on + spec.rise_s
            truth.append(
                GroundTruthSpike(
                    channel=ch,
                    onset_index=lo,
                    peak_index=int(round(peak_s * fs)),
                    offset_index=hi - 1,
                    peak_time_s=float(peak_s),
                )
            )
        samples[ch] = x
    rec = Recording(
        samples=samples,
        sampling_rate_hz=fs,
        channel_names=[f"Ch{i + 1}" for i in range(spec.channel_count)],
        trigger_time=spec.trigger_s,
    )
    return rec, truth

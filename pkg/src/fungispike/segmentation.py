"""Trigger-anchored segmentation of recordings into m-hour chunks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .ingest import Recording

CHUNK_HOURS = (1, 2, 4, 8, 16)
PARTIAL_KEEP_FRACTION = 0.75


@dataclass
class Segment:
    """All channels of a recording on one side of the trigger.

    ``start_s`` is measured from the first sample of the recording.
    """

    samples: np.ndarray
    sampling_rate_hz: float
    start_s: float
    side: str
    channel_names: list[str] = field(default_factory=list)

    @property
    def sample_count(self) -> int:
        return self.samples.shape[1]

    @property
    def end_s(self) -> float:
        return self.start_s + self.sample_count / self.sampling_rate_hz

    @property
    def duration_s(self) -> float:
        return self.sample_count / self.sampling_rate_hz


@dataclass
class Chunk:
    channel_index: int
    window_start_s: float
    window_end_s: float
    samples: np.ndarray
    side: str
    m_hours: float
    sampling_rate_hz: float
    rank: int = 0  # 0 for the window touching the trigger, 1 for the next one out, ...

    @property
    def duration_s(self) -> float:
        return self.window_end_s - self.window_start_s


def trigger_index(rec: Recording) -> int:
    if rec.trigger_time is None:
        raise ConfigurationError("recording has no trigger time")
    return int(round(rec.trigger_time * rec.sampling_rate_hz))


def split_at_trigger(rec: Recording) -> tuple[Segment, Segment]:
    """Split ``rec`` into the pre-trigger ``[0, trigger)`` and post-trigger
    ``[trigger, duration]`` segments."""
    k = trigger_index(rec)
    fs = rec.sampling_rate_hz
    pre = Segment(rec.samples[:, :k], fs, 0.0, "pre", list(rec.channel_names))
    post = Segment(rec.samples[:, k:], fs, k / fs, "post", list(rec.channel_names))
    return pre, post


def window_bounds(n: int, length: int, side: str) -> list[tuple[int, int, int]]:
    """Sample bounds ``(start, stop, rank)`` of the windows of one segment.

    Post-side windows grow forward from index 0 (the trigger) and pre-side
    windows grow backward from index ``n``. A trailing partial window is
    kept when it holds at least 75% of ``length`` samples. The result is in
    chronological order.
    """
    if length < 1:
        raise ValueError("window length must be at least one sample")
    full, rest = divmod(n, length)
    keep_partial = rest > 0 and rest >= PARTIAL_KEEP_FRACTION * length
    bounds = []
    if side == "post":
        for r in range(full):
            bounds.append((r * length, (r + 1) * length, r))
        if keep_partial:
            bounds.append((full * length, n, full))
    elif side == "pre":
        if keep_partial:
            bounds.append((0, rest, full))
        for r in range(full - 1, -1, -1):
            bounds.append((n - (r + 1) * length, n - r * length, r))
    else:
        raise ValueError(f"side must be 'pre' or 'post', got {side!r}")
    return bounds


def chunk_segment(segment: Segment, m_hours: float) -> list[Chunk]:
    """Cut ``segment`` into trigger-anchored ``m_hours`` windows, one
    :class:`Chunk` per channel and window."""
    fs = segment.sampling_rate_hz
    length = int(round(m_hours * 3600.0 * fs))
    chunks = []
    for start, stop, rank in window_bounds(segment.sample_count, length, segment.side):
        for ch in range(segment.samples.shape[0]):
            chunks.append(
                Chunk(
                    channel_index=ch,
                    window_start_s=segment.start_s + start / fs,
                    window_end_s=segment.start_s + stop / fs,
                    samples=segment.samples[ch, start:stop],
                    side=segment.side,
                    m_hours=m_hours,
                    sampling_rate_hz=fs,
                    rank=rank,
                )
            )
    return chunks


def trigger_chunks(rec: Recording, m_hours: float = 1) -> list[Chunk]:
    """Windows of ``m_hours`` centred on the trigger, clipped to the recording.

    These straddle both segments and carry ``side="trigger"``.
    """
    k = trigger_index(rec)
    fs = rec.sampling_rate_hz
    half = int(round(m_hours * 3600.0 * fs / 2))
    start = max(0, k - half)
    stop = min(rec.sample_count, k + half)
    if stop - start < 1:
        return []
    return [
        Chunk(ch, start / fs, stop / fs, rec.samples[ch, start:stop], "trigger", m_hours, fs)
        for ch in range(rec.channel_count)
    ]

"""Readers and writers for data-logger CSV exports and grayscale images.

A recording CSV has a header row; one column carries time (seconds or ISO-8601
timestamps, detected automatically) and the others carry channel voltages.
A unit suffix in the header, e.g. ``Ch1 (V)`` or ``Ch2 [uV]``, is honoured and
converted to millivolts; columns without a suffix are taken to be in mV.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    GapError,
    JitterWarning,
    OrderingError,
    ParseError,
    RangeWarning,
    SchemaError,
)

ACQUISITION_RANGE_MV = 156.0
DEFAULT_RATE_HZ = 1.0
JITTER_TOLERANCE = 0.10
MAX_GAP_PERIODS = 1.5

_UNIT_SCALE = {"v": 1e3, "mv": 1.0, "uv": 1e-3, "µv": 1e-3, "μv": 1e-3}
_UNIT_RE = re.compile(r"^\s*(?P<name>.*?)\s*[\(\[](?P<unit>[^\)\]]+)[\)\]]\s*$")


@dataclass
class Recording:
    """Multi-channel voltage recording on a uniform time grid.

    ``samples`` has shape ``(channel_count, sample_count)`` and is in mV.
    ``start_time`` and ``trigger_time`` are seconds; the trigger is measured
    from the first sample.
    """

    samples: np.ndarray
    sampling_rate_hz: float
    channel_names: list[str] = field(default_factory=list)
    start_time: float = 0.0
    trigger_time: float | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError("samples must be a (channels, n) array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        if not self.sampling_rate_hz > 0:
            raise ValueError("sampling_rate_hz must be positive")
        self.samples = samples
        if not self.channel_names:
            self.channel_names = [f"Ch{i + 1}" for i in range(samples.shape[0])]
        if len(self.channel_names) != samples.shape[0]:
            raise ValueError("one channel name per row of samples is required")
        if self.trigger_time is not None:
            if not 0.0 <= self.trigger_time <= self.duration_s:
                raise ValueError(
                    f"trigger_time {self.trigger_time} s outside [0, {self.duration_s}] s"
                )

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_count(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.sample_count / self.sampling_rate_hz


@dataclass
class Schema:
    """Column map for :func:`load_recording`.

    ``time_column=None`` means the first column; ``channels=None`` means every
    other column in file order.
    """

    time_column: str | None = None
    channels: list[str] | None = None
    sampling_rate_hz: float | None = None


@dataclass
class GrayImage:
    """Grayscale raster with pixel values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=float)
        if pixels.ndim != 2 or pixels.shape[0] < 2 or pixels.shape[1] < 2:
            raise ValueError(f"image must be at least 2x2, got shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("image contains NaN or Inf")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        self.pixels = pixels

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]


def _split_unit(header: str) -> tuple[str, float]:
    m = _UNIT_RE.match(header)
    if m is None:
        return header.strip(), 1.0
    unit = m.group("unit").strip().lower()
    if unit not in _UNIT_SCALE:
        return header.strip(), 1.0
    return m.group("name"), _UNIT_SCALE[unit]


def _parse_time(text: str) -> float | datetime:
    try:
        value = float(text)
    except ValueError:
        return datetime.fromisoformat(text.strip())
    return value


def load_recording(path, schema: Schema | None = None, *, trigger_time=None) -> Recording:
    """Parse a logger CSV export into a :class:`Recording`.

    Timestamps may jitter by up to 10% of the sampling period; each sample is
    assigned to the nearest point of the uniform grid. Holes wider than 1.5
    periods raise :class:`GapError`. Values beyond the +/-156 mV acquisition
    range are kept but reported with a :class:`RangeWarning`.
    """
    path = Path(path)
    schema = schema or Schema()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, header row expected", path, 1) from None
        header = [h.strip() for h in header]
        names = []
        scales = []
        for h in header:
            name, scale = _split_unit(h)
            names.append(name)
            scales.append(scale)

        def column_of(wanted):
            for i, (raw, name) in enumerate(zip(header, names)):
                if wanted in (raw, name):
                    return i
            raise SchemaError(f"column {wanted!r} not found in header {header}", path, 1)

        time_idx = 0 if schema.time_column is None else column_of(schema.time_column)
        if schema.channels is None:
            chan_idx = [i for i in range(len(header)) if i != time_idx]
        else:
            chan_idx = [column_of(c) for c in schema.channels]
        if not chan_idx:
            raise SchemaError("no channel columns", path, 1)

        times = []
        rows = []
        iso = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(row)}", path, lineno
                )
            try:
                t = _parse_time(row[time_idx])
                values = [float(row[i]) * scales[i] for i in chan_idx]
            except ValueError as exc:
                raise ParseError(f"malformed value ({exc})", path, lineno) from None
            is_dt = isinstance(t, datetime)
            if iso is None:
                iso = is_dt
            elif iso != is_dt:
                raise ParseError("mixed numeric and ISO timestamps", path, lineno)
            if not all(math.isfinite(v) for v in values) or (not is_dt and not math.isfinite(t)):
                raise ParseError("non-finite value", path, lineno)
            times.append((t, lineno))
            rows.append(values)

    if not rows:
        raise ParseError("no data rows", path, 2)

    if iso:
        t0 = times[0][0]
        t_sec = np.array([(t - t0).total_seconds() for t, _ in times])
        start_time = 0.0
    else:
        t_sec = np.array([t for t, _ in times], dtype=float)
        start_time = float(t_sec[0])
    lines = [ln for _, ln in times]

    diffs = np.diff(t_sec)
    bad = np.flatnonzero(diffs <= 0)
    if bad.size:
        raise OrderingError("timestamps not strictly increasing", path, lines[bad[0] + 1])

    fs = schema.sampling_rate_hz
    if fs is None:
        fs = 1.0 / float(np.median(diffs)) if diffs.size else DEFAULT_RATE_HZ
    period = 1.0 / fs
    wide = np.flatnonzero(diffs > MAX_GAP_PERIODS * period)
    if wide.size:
        k = wide[0]
        raise GapError(
            f"gap of {diffs[k]:g} s exceeds {MAX_GAP_PERIODS} sampling periods",
            path,
            lines[k + 1],
        )
    rel = (t_sec - t_sec[0]) * fs
    grid = np.rint(rel).astype(np.int64)
    mismatch = np.flatnonzero(grid != np.arange(grid.size))
    if mismatch.size:
        k = mismatch[0]
        raise GapError("timestamps do not map onto a uniform grid", path, lines[k])
    drift = np.abs(rel - grid)
    if drift.max() > JITTER_TOLERANCE + 1e-9:
        k = int(np.argmax(drift))
        warnings.warn(
            f"{path}:{lines[k]}: timestamp jitter {drift[k]:.2f} periods exceeds "
            f"{JITTER_TOLERANCE:.0%}; snapped to nearest grid point",
            JitterWarning,
            stacklevel=2,
        )

    samples = np.array(rows, dtype=float).T
    over = np.abs(samples) > ACQUISITION_RANGE_MV
    if over.any():
        warnings.warn(
            f"{path}: {int(over.sum())} samples outside +/-{ACQUISITION_RANGE_MV:g} mV",
            RangeWarning,
            stacklevel=2,
        )
    channel_names = [names[i] for i in chan_idx]
    return Recording(
        samples=samples,
        sampling_rate_hz=float(fs),
        channel_names=channel_names,
        start_time=start_time,
        trigger_time=trigger_time,
    )


def write_recording(rec: Recording, path) -> None:
    """Write ``rec`` as canonical CSV (time to 1 ms, voltages to 1 nV)."""
    path = Path(path)
    times = rec.start_time + np.arange(rec.sample_count) / rec.sampling_rate_hz
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["time_s", *rec.channel_names]) + "\n")
        data = rec.samples.T
        for t, row in zip(times, data):
            fh.write(f"{t:.3f}," + ",".join(f"{v:.6f}" for v in row) + "\n")


def _read_pgm(raw: bytes, path) -> np.ndarray:
    tokens = []
    pos = 0
    # magic, width, height, maxval
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header", path)
        tokens.append(raw[start:pos])
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("malformed PGM header", path) from None
    if not 0 < maxval < 65536:
        raise FormatError(f"unsupported PGM maxval {maxval}", path)
    if magic == b"P5":
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        count = width * height
        body = raw[pos : pos + count * dtype.itemsize]
        if len(body) < count * dtype.itemsize:
            raise FormatError("truncated PGM pixel data", path)
        values = np.frombuffer(body, dtype=dtype).astype(float)
    elif magic == b"P2":
        try:
            values = np.array(raw[pos:].split(), dtype=float)
        except ValueError:
            raise FormatError("malformed PGM pixel data", path) from None
        if values.size < width * height:
            raise FormatError("truncated PGM pixel data", path)
        values = values[: width * height]
    else:
        raise FormatError(f"not a grayscale PGM (magic {magic!r})", path)
    return values.reshape(height, width) / maxval


def load_image(path, *, convert_gray: bool = False) -> GrayImage:
    """Load an 8- or 16-bit grayscale PGM or PNG, rescaled to [0, 1].

    Colour images are rejected unless ``convert_gray`` is set, in which case
    they are converted with the ITU-R 601 luma weights.
    """
    path = Path(path)
    raw = path.read_bytes()
    if not raw:
        raise FormatError("empty file", path)
    if raw[:2] in (b"P2", b"P5"):
        pixels = _read_pgm(raw, path)
    else:
        from PIL import Image, UnidentifiedImageError

        try:
            img = Image.open(path)
            img.load()
        except (UnidentifiedImageError, OSError) as exc:
            raise FormatError(f"unreadable image ({exc})", path) from None
        mode = img.mode
        if mode in ("L", "1"):
            pixels = np.asarray(img.convert("L"), dtype=float) / 255.0
        elif mode in ("I;16", "I;16B", "I;16L", "I"):
            pixels = np.asarray(img, dtype=float) / 65535.0
        elif convert_gray:
            pixels = np.asarray(img.convert("L"), dtype=float) / 255.0
        else:
            raise FormatError(f"colour image (mode {mode}); pass convert_gray=True", path)
    try:
        return GrayImage(pixels)
    except ValueError as exc:
        raise FormatError(str(exc), path) from None


def save_pgm(pixels: np.ndarray, path, maxval: int = 255, comment: str | None = None) -> None:
    """Write a 2D array in [0, 1] as a binary PGM, with optional header
    comment lines."""
    pixels = np.clip(np.asarray(pixels, dtype=float), 0.0, 1.0)
    height, width = pixels.shape
    scaled = np.rint(pixels * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    notes = "".join(f"# {line}\n" for line in (comment or "").splitlines() if line)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{notes}{width} {height}\n{maxval}\n".encode("ascii"))
        fh.write(scaled.astype(dtype).tobytes())

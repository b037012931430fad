"""End-to-end pipeline and report emission.

Every output carries a provenance header (tool version, input hash, the
parameters and their hash). Output bytes depend only on the input file and
the configuration, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .config import parse_bool, parse_floats, read_kv
from .dct import (
    BandConfig,
    band_raster,
    band_summary,
    compare_regions,
    crop_roi,
    dct2,
    quarter,
)
from .errors import ClassificationError, ConfigurationError, FungiSpikeError
from .ingest import Recording, Schema, load_image, load_recording, save_pgm
from .lz import pcipk
from .metrics import MetricsRow, metrics_row, spike_train
from .segmentation import (
    CHUNK_HOURS,
    Chunk,
    chunk_segment,
    split_at_trigger,
    trigger_chunks,
)
from .spikes import DetectorParams, SpikeEvent, detect_spikes

log = logging.getLogger(__name__)

PCIPK_BANDS = ("light-blue", "green", "orange", "red")
METRIC_LABELS = {
    "spike_count": "Spike#",
    "mean_length_s": "Length (s)",
    "mean_amplitude_mv": "Amplitude (mV)",
    "h_signal": "H(signal)",
    "h_spike": "H(spike)",
    "simpson": "Simpson",
    "space_filling": "Space-filling",
    "expressiveness": "Expressiveness",
    "kolmogorov": "Kolmogorov",
    "pcipk": "PCIpK",
    "tsallis": "Tsallis",
    "renyi": "Renyi",
}
SPIKE_COLUMNS = [
    "channel",
    "peak_time_s",
    "amplitude_mV",
    "duration_s",
    "depol_uVs",
    "repol_uVs",
    "refractory_s",
    "truncated_flag",
]


def classify_pcipk(v: float) -> str:
    """Colour band of a PCIpK value; boundary values go to the upper band."""
    if v is None or not math.isfinite(v):
        raise ClassificationError(f"cannot classify {v!r}")
    if v < -0.5:
        return "light-blue"
    if v < 0.0:
        return "green"
    if v < 0.5:
        return "orange"
    return "red"


@dataclass
class PipelineConfig:
    input: str = ""
    trigger_s: float | None = None
    chunks: tuple[float, ...] = CHUNK_HOURS
    z_star: float = 2.576
    min_dist: int = 120
    bins: int = 256
    shuffles: int = 20
    seed: int = 0
    out: str = "run"
    window: int = 601
    preprocess: bool = True
    threshold_mode: str = "ci"
    q: float = 2.0
    tsallis_k: float = 1.0
    channels: tuple[str, ...] | None = None
    image: str | None = None
    rois: tuple[tuple[int, int, int, int], ...] | None = None
    convert_gray: bool = False
    band_method: str = "quantile"
    hi_q: float = 0.90
    lo_q: float = 0.50

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        """Build from string values such as a parsed ``key = value`` file."""
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key == "zstar":
                key = "z_star"
            if key not in known:
                raise ConfigurationError(f"unknown configuration key {key!r}")
            if raw is None:
                continue
            if not isinstance(raw, str):
                kwargs[key] = raw
                continue
            kwargs[key] = _convert(key, raw)
        return cls(**kwargs)

    def detector(self) -> DetectorParams:
        return DetectorParams(
            z_star=self.z_star,
            min_dist=self.min_dist,
            window=self.window,
            preprocess=self.preprocess,
            threshold_mode=self.threshold_mode,
        )

    def band_config(self) -> BandConfig:
        return BandConfig(method=self.band_method, hi_q=self.hi_q, lo_q=self.lo_q)

    def canonical(self) -> dict:
        """Parameters that determine the outputs, in a stable form."""
        d = asdict(self)
        d.pop("out")
        for key in ("input", "image"):
            if d[key]:
                d[key] = Path(d[key]).name
        return d

    def validate(self):
        if not self.input:
            raise ConfigurationError("no input file given")
        if self.trigger_s is None:
            raise ConfigurationError("trigger time is required")
        if not self.chunks:
            raise ConfigurationError("no chunk sizes given")
        bad = [m for m in self.chunks if m not in CHUNK_HOURS]
        if bad:
            raise ConfigurationError(f"chunk sizes must be among {CHUNK_HOURS}, got {bad}")
        if self.threshold_mode not in ("ci", "sd"):
            raise ConfigurationError(f"threshold mode must be 'ci' or 'sd', not {self.threshold_mode!r}")
        if self.min_dist < 1 or self.bins < 2 or self.shuffles < 1:
            raise ConfigurationError("min_dist >= 1, bins >= 2 and shuffles >= 1 are required")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigurationError("window must be a positive odd number of samples")


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key in ("input", "out", "image", "threshold_mode", "band_method"):
        return raw or None
    if key == "trigger_s":
        return None if raw.lower() in ("", "none") else float(raw)
    if key == "chunks":
        return tuple(int(v) if float(v).is_integer() else v for v in parse_floats(raw))
    if key == "channels":
        return tuple(c.strip() for c in raw.split(",") if c.strip())
    if key == "rois":
        return tuple(tuple(int(v) for v in part.split(",")) for part in raw.split(";") if part.strip())
    if key in ("preprocess", "convert_gray"):
        return parse_bool(raw)
    if key in ("min_dist", "bins", "shuffles", "seed", "window"):
        return int(raw)
    return float(raw)


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Read a ``key = value`` file; entries of ``overrides`` that are not
    ``None`` take precedence."""
    values = read_kv(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key.replace("-", "_")] = value
    return PipelineConfig.from_mapping(values)


@dataclass
class ChunkRow:
    """A metrics row together with the window it describes."""

    side: str
    m_hours: float
    rank: int
    window_start_s: float
    window_end_s: float
    metrics: MetricsRow


@dataclass
class TrialReport:
    rows: list[ChunkRow] = field(default_factory=list)
    spikes: dict[int, list[tuple[Chunk, SpikeEvent]]] = field(default_factory=dict)
    window_pcipk: list[dict] = field(default_factory=list)
    bands: dict = field(default_factory=dict)
    panels: dict[str, list[MetricsRow]] = field(default_factory=dict)
    dct: dict | None = None
    dct_spectra: list = field(default_factory=list)
    channel_count: int = 0
    provenance: dict = field(default_factory=dict)
    files: list[Path] = field(default_factory=list)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def provenance_for(config: PipelineConfig) -> dict:
    canonical = config.canonical()
    blob = json.dumps(canonical, sort_keys=True, default=list).encode()
    prov = {
        "tool": "fungispike",
        "version": __version__,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "seed": config.seed,
        "parameters": canonical,
    }
    if config.input:
        prov["input_sha256"] = file_sha256(config.input)
    if config.image:
        prov["image_sha256"] = file_sha256(config.image)
    return prov


def _provenance_lines(prov: dict | None) -> str:
    if not prov:
        return ""
    hashes = " ".join(f"{k}={prov[k]}" for k in ("input_sha256", "image_sha256") if k in prov)
    return (
        f"# {prov['tool']} {prov['version']} {hashes} "
        f"config_sha256={prov['config_sha256']} seed={prov['seed']}\n"
        f"# parameters={json.dumps(prov['parameters'], sort_keys=True, default=list)}\n"
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        return ""
    return f"{v:.10g}"


def _derive_seed(seed: int, *parts) -> int:
    return int(np.random.SeedSequence([int(seed), *parts]).generate_state(1)[0])


def _side_code(side: str) -> int:
    return {"pre": 0, "post": 1, "trigger": 2}[side]


def _analyse_window(chunks: list[Chunk], config: PipelineConfig, report: TrialReport, with_metrics=True):
    """Detection, and unless disabled metrics, for all channels of one window."""
    params = config.detector()
    trains = []
    rows = []
    for chunk in chunks:
        fs = chunk.sampling_rate_hz
        det = detect_spikes(chunk.samples, fs, params, t0=chunk.window_start_s)
        if chunk.side != "trigger":
            report.spikes.setdefault(chunk.channel_index, []).extend((chunk, e) for e in det.events)
        if not with_metrics:
            continue
        seed = _derive_seed(
            config.seed, int(chunk.m_hours * 1000), _side_code(chunk.side), chunk.rank, chunk.channel_index
        )
        row = metrics_row(
            chunk.channel_index + 1,
            chunk.samples,
            det.events,
            bins=config.bins,
            q=config.q,
            k=config.tsallis_k,
            shuffles=config.shuffles,
            seed=seed,
        )
        rows.append(row)
        trains.append(spike_train([e.peak_index for e in det.events], chunk.samples.size))
    if not with_metrics:
        return rows, None
    first = chunks[0]
    combined = pcipk(
        trains,
        config.shuffles,
        _derive_seed(config.seed, int(first.m_hours * 1000), _side_code(first.side), first.rank, 10_000),
    )
    return rows, combined


def _group_windows(chunks: list[Chunk]) -> list[list[Chunk]]:
    groups: dict[tuple, list[Chunk]] = {}
    for c in chunks:
        groups.setdefault((c.window_start_s, c.window_end_s), []).append(c)
    return [groups[k] for k in sorted(groups)]


def _load_checked(config: PipelineConfig) -> Recording:
    config.validate()
    schema = Schema(channels=list(config.channels) if config.channels else None)
    rec = load_recording(config.input, schema)
    if not 0.0 <= config.trigger_s <= rec.duration_s:
        raise ConfigurationError(
            f"trigger at {config.trigger_s} s lies outside the recording (0 to {rec.duration_s} s)"
        )
    rec.trigger_time = config.trigger_s
    return rec


def analyse(config: PipelineConfig, with_metrics: bool = True) -> TrialReport:
    """Compute everything the report needs without writing files."""
    rec = _load_checked(config)
    if config.image:
        # fail on a bad image before the long computation
        load_image(config.image, convert_gray=config.convert_gray)
    report = TrialReport(provenance=provenance_for(config), channel_count=rec.channel_count)
    pre_seg, post_seg = split_at_trigger(rec)
    adjacent: dict[tuple[str, float], list[MetricsRow]] = {}
    for m in sorted(config.chunks):
        for seg in (pre_seg, post_seg):
            if seg.sample_count == 0:
                continue
            for window in _group_windows(chunk_segment(seg, m)):
                try:
                    rows, combined = _analyse_window(window, config, report, with_metrics)
                except FungiSpikeError as exc:
                    raise type(exc)(f"{seg.side} m={m} h window at {window[0].window_start_s} s: {exc}") from exc
                c = window[0]
                for row in rows:
                    report.rows.append(ChunkRow(c.side, m, c.rank, c.window_start_s, c.window_end_s, row))
                if not with_metrics:
                    continue
                report.window_pcipk.append(
                    {
                        "side": c.side,
                        "m_hours": m,
                        "rank": c.rank,
                        "window_start_s": c.window_start_s,
                        "window_end_s": c.window_end_s,
                        "pcipk": combined,
                    }
                )
                if c.rank == 0:
                    adjacent[(c.side, m)] = rows
            log.info("m=%s h %s-trigger done", m, seg.side)
    if not with_metrics:
        return report

    trig = trigger_chunks(rec, min(config.chunks))
    if trig:
        trig_rows, _ = _analyse_window(trig, config, report)
    else:
        trig_rows = []
    pre_m = max((m for (side, m) in adjacent if side == "pre"), default=None)
    post_m = min((m for (side, m) in adjacent if side == "post"), default=None)
    report.panels = {
        "pre": adjacent.get(("pre", pre_m), []),
        "trigger": trig_rows,
        "post": adjacent.get(("post", post_m), []),
    }
    report.bands = pcipk_bands(report.panels["pre"], report.panels["post"], pre_m, post_m)
    report.bands["windows"] = report.window_pcipk
    if config.image:
        report.dct, report.dct_spectra = dct_report(config)
    return report


def pcipk_bands(pre_rows, post_rows, pre_m, post_m) -> dict:
    """Colour band per channel of the relative PCIpK change from the
    pre-trigger panel to the post-trigger panel."""
    pre = {r.channel: r.pcipk for r in pre_rows}
    post = {r.channel: r.pcipk for r in post_rows}
    channels = []
    for ch in sorted(set(pre) & set(post)):
        change = (post[ch] - pre[ch]) / pre[ch] if pre[ch] else math.nan
        band = classify_pcipk(change) if math.isfinite(change) else None
        channels.append(
            {"channel": ch, "pcipk_pre": pre[ch], "pcipk_post": post[ch], "relative_change": change, "band": band}
        )
    return {"pre_m_hours": pre_m, "post_m_hours": post_m, "channels": channels}


def dct_report(config: PipelineConfig) -> tuple[dict, list]:
    img = load_image(config.image, convert_gray=config.convert_gray)
    regions = [crop_roi(img, r) for r in config.rois] if config.rois else quarter(img)
    bands = config.band_config()
    spectra = [dct2(r, bands) for r in regions]
    out = {
        "image": Path(config.image).name,
        "band_config": asdict(bands),
        "regions": [
            {"index": i, "shape": list(s.coefficients.shape), "bands": band_summary(s)}
            for i, s in enumerate(spectra)
        ],
        "comparisons": [],
    }
    for i in range(len(spectra)):
        for j in range(i + 1, len(spectra)):
            cmp = compare_regions(spectra[i], spectra[j])
            out["comparisons"].append({"a": i, "b": j, "ratio": cmp["ratio"], "wasserstein": cmp["wasserstein"]})
    return out, spectra


def _write_text(path: Path, text: str, report: TrialReport):
    path.write_text(text, encoding="utf-8", newline="\n")
    report.files.append(path)


def _csv_text(header: list[str], rows: list[list], prov: dict) -> str:
    buf = io.StringIO()
    buf.write(_provenance_lines(prov))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(payload: dict) -> str:
    def clean(o):
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (float, np.floating)):
            return float(o) if math.isfinite(o) else None
        return o

    return json.dumps(clean(payload), indent=2, sort_keys=True) + "\n"


def write_metrics_csv(report: TrialReport, path: Path):
    header = ["side", "m_hours", "rank", "window_start_s", "window_end_s"] + MetricsRow.column_names()
    rows = [
        [r.side, r.m_hours, r.rank, r.window_start_s, r.window_end_s, *r.metrics.values()] for r in report.rows
    ]
    _write_text(path, _csv_text(header, rows, report.provenance), report)


def write_spike_csvs(report: TrialReport, out: Path, channel_count: int):
    header = SPIKE_COLUMNS + ["m_hours", "side", "window_start_s"]
    for ch in range(channel_count):
        rows = []
        for chunk, e in report.spikes.get(ch, []):
            rows.append(
                [
                    ch + 1,
                    e.peak_time_s,
                    e.amplitude,
                    e.duration_s,
                    e.depol_rate_uV_per_s,
                    e.repol_rate_uV_per_s,
                    e.refractory_s,
                    e.truncated,
                    chunk.m_hours,
                    chunk.side,
                    chunk.window_start_s,
                ]
            )
        _write_text(out / f"spikes_ch{ch + 1}.csv", _csv_text(header, rows, report.provenance), report)


def emit_multicurve(groups: dict[str, list[MetricsRow]], out: Path, provenance: dict | None = None) -> dict:
    """Plot one panel per segment with one min-max normalised curve per
    metric across channels, and write the plotted values to CSV.

    Returns the y-values actually drawn, keyed by ``(segment, metric)``.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not groups:
        raise ConfigurationError("no segments to plot")
    out = Path(out)
    metrics = list(METRIC_LABELS)
    plotted = {}
    csv_rows = []
    with matplotlib.rc_context({"svg.hashsalt": "fungispike", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(1, len(groups), figsize=(4.5 * len(groups), 4), sharey=True, squeeze=False)
        colours = plt.get_cmap("tab20").colors
        for ax, (segment, rows) in zip(axes[0], groups.items()):
            channels = [r.channel for r in rows]
            for i, name in enumerate(metrics):
                raw = np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in rows], dtype=float)
                finite = raw[np.isfinite(raw)]
                if finite.size and finite.max() > finite.min():
                    norm = (raw - finite.min()) / (finite.max() - finite.min())
                else:
                    norm = np.where(np.isfinite(raw), 0.5, np.nan)
                (line,) = ax.plot(channels, norm, marker="o", color=colours[i % len(colours)], label=METRIC_LABELS[name])
                plotted[(segment, name)] = np.asarray(line.get_ydata(), dtype=float)
                for ch, r_v, n_v in zip(channels, raw, norm):
                    csv_rows.append([segment, name, ch, r_v, n_v])
            ax.set_title(segment)
            ax.set_xlabel("channel")
            if channels:
                ax.set_xticks(channels)
        axes[0][0].set_ylabel("normalised value")
        axes[0][-1].legend(fontsize=7, loc="center left", bbox_to_anchor=(1.0, 0.5))
        fig.tight_layout()
        meta = {"Date": None}
        if provenance:
            meta["Description"] = _provenance_lines(provenance).replace("# ", "").strip()
        svg_path = out / "multicurve.svg"
        fig.savefig(svg_path, format="svg", metadata=meta)
        plt.close(fig)
    csv_path = out / "multicurve.csv"
    text = _csv_text(["segment", "metric", "channel", "value", "normalized"], csv_rows, provenance)
    csv_path.write_text(text, encoding="utf-8", newline="\n")
    return {"svg": svg_path, "csv": csv_path, "plotted": plotted}


def write_outputs(report: TrialReport, config: PipelineConfig, with_metrics: bool = True):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_spike_csvs(report, out, report.channel_count)
    if not with_metrics:
        return
    write_metrics_csv(report, out / "metrics.csv")
    bands = dict(report.bands)
    bands["provenance"] = report.provenance
    _write_text(out / "pcipk_bands.json", json_text(bands), report)
    mc = emit_multicurve(report.panels, out, report.provenance)
    report.files.extend([mc["svg"], mc["csv"]])
    if report.dct is not None:
        write_dct_outputs(report, out)


def write_dct_outputs(report: TrialReport, out: Path):
    """Band rasters, ``dct_report.json`` and ``dct_report.csv``."""
    note = _provenance_lines(report.provenance).replace("# ", "")
    for i, s in enumerate(report.dct_spectra):
        path = out / f"dct_bands_region{i}.pgm"
        save_pgm(band_raster(s), path, comment=note)
        report.files.append(path)
    payload = dict(report.dct)
    payload["provenance"] = report.provenance
    _write_text(out / "dct_report.json", json_text(payload), report)
    rows = []
    for cmp in report.dct["comparisons"]:
        for band in ("high", "medium", "low"):
            r = cmp["ratio"][band]
            rows.append(
                [cmp["a"], cmp["b"], band, r["count"], r["mean_abs"], r["energy"], r["energy_share"], cmp["wasserstein"][band]]
            )
    header = [
        "region_a", "region_b", "band", "count_ratio", "mean_abs_ratio", "energy_ratio", "energy_share_ratio", "wasserstein",
    ]
    _write_text(out / "dct_report.csv", _csv_text(header, rows, report.provenance), report)


def run_dct(config: PipelineConfig) -> TrialReport:
    """Image-only analysis: DCT bands and region comparisons of ``config.image``."""
    if not config.image:
        raise ConfigurationError("no image given")
    report = TrialReport(provenance=provenance_for(config))
    report.dct, report.dct_spectra = dct_report(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dct_outputs(report, out)
    return report


def run_pipeline(config: PipelineConfig, with_metrics: bool = True) -> TrialReport:
    """Run every stage and write all outputs under ``config.out``."""
    report = analyse(config, with_metrics)
    write_outputs(report, config, with_metrics)
    return report

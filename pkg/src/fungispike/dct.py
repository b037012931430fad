"""Orthonormal 2D DCT-II of image regions and energy-band comparison.

Coefficients are split into high, medium and low energy bands either by
magnitude rank (default) or by zig-zag position, and each band is summarised
by a histogram of magnitudes on log-spaced bins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import wasserstein_distance

from .errors import ConfigurationError, DomainError, RangeError, SizeError
from .ingest import GrayImage

BANDS = ("high", "medium", "low")
HIST_BINS = 64
HIST_FLOOR = 1e-8


def dct_matrix(n: int) -> np.ndarray:
    """``n x n`` orthonormal DCT-II basis; row ``p`` holds
    ``alpha_p * cos(pi * (2r + 1) * p / (2n))`` for ``r = 0..n-1``."""
    r = np.arange(n)
    p = r[:, np.newaxis]
    basis = np.cos(np.pi * (2 * r + 1) * p / (2 * n))
    alpha = np.full((n, 1), np.sqrt(2.0 / n))
    alpha[0, 0] = np.sqrt(1.0 / n)
    return alpha * basis


@dataclass
class BandConfig:
    method: str = "quantile"
    hi_q: float = 0.90
    lo_q: float = 0.50
    bins: int = HIST_BINS

    def __post_init__(self):
        if self.method not in ("quantile", "zigzag"):
            raise ConfigurationError(f"unknown band method {self.method!r}")
        if not 0 < self.lo_q < self.hi_q < 1:
            raise DomainError("band quantiles need 0 < lo_q < hi_q < 1")


@dataclass
class EnergyBands:
    """Per-coefficient band labels (0 high, 1 medium, 2 low) and the
    magnitude histogram of each band."""

    labels: np.ndarray
    histograms: dict[str, np.ndarray]
    edges: np.ndarray
    config: BandConfig

    def mask(self, band: str) -> np.ndarray:
        return self.labels == BANDS.index(band)


@dataclass
class DctSpectrum:
    coefficients: np.ndarray
    bands: EnergyBands | None = field(default=None, repr=False)


def dct2(img: GrayImage | np.ndarray, config: BandConfig | None = None) -> DctSpectrum:
    """Orthonormal 2D DCT-II of an image, with its energy bands."""
    pixels = img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=float)
    if pixels.ndim != 2 or min(pixels.shape) < 2:
        raise SizeError(f"DCT needs at least a 2x2 image, got shape {pixels.shape}")
    rows, cols = pixels.shape
    coeffs = dct_matrix(rows) @ pixels @ dct_matrix(cols).T
    spectrum = DctSpectrum(coeffs)
    spectrum.bands = energy_bands(spectrum, config=config or BandConfig())
    return spectrum


def idct2(coefficients) -> np.ndarray:
    c = np.asarray(coefficients, dtype=float)
    rows, cols = c.shape
    return dct_matrix(rows).T @ c @ dct_matrix(cols)


def crop_roi(img: GrayImage, rect: tuple[int, int, int, int]) -> GrayImage:
    """Copy of the ``(row, col, height, width)`` rectangle of ``img``."""
    row, col, height, width = (int(v) for v in rect)
    if row < 0 or col < 0 or height < 1 or width < 1:
        raise RangeError(f"invalid region {rect}")
    if row + height > img.rows or col + width > img.cols:
        raise RangeError(f"region {rect} exceeds image of {img.rows}x{img.cols}")
    return GrayImage(img.pixels[row : row + height, col : col + width].copy())


def quarter(img: GrayImage) -> list[GrayImage]:
    """Four regions tiling ``img``: top-left, top-right, bottom-left,
    bottom-right. Odd sizes give the extra row/column to the lower/right."""
    h, w = img.rows // 2, img.cols // 2
    return [
        crop_roi(img, (0, 0, h, w)),
        crop_roi(img, (0, w, h, img.cols - w)),
        crop_roi(img, (h, 0, img.rows - h, w)),
        crop_roi(img, (h, w, img.rows - h, img.cols - w)),
    ]


def zigzag_order(rows: int, cols: int) -> np.ndarray:
    """Row-major flat indices in JPEG zig-zag order."""
    r, c = np.indices((rows, cols))
    diag = (r + c).ravel()
    # alternate direction along each anti-diagonal
    along = np.where(diag % 2 == 0, -r.ravel(), r.ravel())
    return np.lexsort((along, diag))


def _labels(coeffs: np.ndarray, config: BandConfig) -> np.ndarray:
    n = coeffs.size
    labels = np.empty(n, dtype=np.int8)
    if config.method == "quantile":
        # stable sort keeps row-major order among equal magnitudes
        order = np.argsort(-np.abs(coeffs).ravel(), kind="stable")
        n_high = int(round((1.0 - config.hi_q) * n))
        n_low = int(round(config.lo_q * n))
        n_high = max(1, min(n_high, n))
        n_low = min(n_low, n - n_high)
    else:
        order = zigzag_order(*coeffs.shape)
        n_high = n // 3
        n_low = n // 3
    labels[order[:n_high]] = 0
    labels[order[n_high : n - n_low]] = 1
    labels[order[n - n_low :]] = 2
    # negligible coefficients carry no energy, whatever their rank
    labels[np.abs(coeffs).ravel() < HIST_FLOOR] = 2
    return labels.reshape(coeffs.shape)


def _edges(coeffs: np.ndarray, bins: int) -> np.ndarray:
    top = max(float(np.abs(coeffs).max()), HIST_FLOOR * 10)
    return np.logspace(np.log10(HIST_FLOOR), np.log10(top), bins + 1)


def energy_bands(
    spectrum: DctSpectrum,
    hi_q: float | None = None,
    lo_q: float | None = None,
    config: BandConfig | None = None,
) -> EnergyBands:
    """Partition coefficients into energy bands.

    With the quantile method the top ``1 - hi_q`` fraction of magnitudes is
    ``high``, the bottom ``lo_q`` fraction ``low`` and the rest ``medium``;
    ties in magnitude resolve in row-major order. Coefficients below
    ``1e-8`` in magnitude always go to ``low``.
    """
    if config is None:
        config = BandConfig(hi_q=0.90 if hi_q is None else hi_q, lo_q=0.50 if lo_q is None else lo_q)
    coeffs = spectrum.coefficients
    labels = _labels(coeffs, config)
    edges = _edges(coeffs, config.bins)
    mags = np.clip(np.abs(coeffs), edges[0], edges[-1])
    histograms = {
        band: np.histogram(mags[labels == i], bins=edges)[0] for i, band in enumerate(BANDS)
    }
    return EnergyBands(labels, histograms, edges, config)


def _log_centres(edges: np.ndarray) -> np.ndarray:
    return 0.5 * (np.log10(edges[:-1]) + np.log10(edges[1:]))


def histogram_w1(counts_a, edges_a, counts_b, edges_b) -> float:
    """Wasserstein-1 distance between two magnitude histograms, measured in
    decades (log10 units) between bin centres."""
    counts_a = np.asarray(counts_a, dtype=float)
    counts_b = np.asarray(counts_b, dtype=float)
    if counts_a.sum() == 0 and counts_b.sum() == 0:
        return 0.0
    if counts_a.sum() == 0 or counts_b.sum() == 0:
        return float("nan")
    return float(
        wasserstein_distance(_log_centres(edges_a), _log_centres(edges_b), counts_a, counts_b)
    )


def band_summary(spectrum: DctSpectrum) -> dict[str, dict[str, float]]:
    coeffs = spectrum.coefficients
    energy = coeffs**2
    total = float(energy.sum())
    out = {}
    for band in BANDS:
        sel = spectrum.bands.mask(band)
        count = int(sel.sum())
        band_energy = float(energy[sel].sum())
        out[band] = {
            "count": count,
            "mean_abs": float(np.abs(coeffs[sel]).mean()) if count else 0.0,
            "energy": band_energy,
            "energy_share": band_energy / total if total > 0 else 0.0,
        }
    return out


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 1.0 if a == 0 else float("inf")
    return a / b


def compare_regions(a: DctSpectrum, b: DctSpectrum) -> dict:
    """Per-band summaries of two regions, their ratios ``a / b`` and the
    Wasserstein-1 distance between matching band histograms."""
    if a.bands.config != b.bands.config:
        raise ConfigurationError("regions were banded with different settings")
    sa, sb = band_summary(a), band_summary(b)
    ratios = {
        band: {key: _ratio(sa[band][key], sb[band][key]) for key in ("count", "mean_abs", "energy", "energy_share")}
        for band in BANDS
    }
    distances = {
        band: histogram_w1(
            a.bands.histograms[band], a.bands.edges, b.bands.histograms[band], b.bands.edges
        )
        for band in BANDS
    }
    return {"a": sa, "b": sb, "ratio": ratios, "wasserstein": distances}


def band_raster(spectrum: DctSpectrum) -> np.ndarray:
    """Band labels as an image: high 1.0, medium 0.5, low 0.0."""
    return 1.0 - spectrum.bands.labels.astype(float) / 2.0

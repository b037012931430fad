import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fungispike.dct import (
    BANDS,
    HIST_FLOOR,
    BandConfig,
    DctSpectrum,
    band_raster,
    compare_regions,
    crop_roi,
    dct2,
    energy_bands,
    histogram_w1,
    idct2,
    quarter,
    zigzag_order,
)
from fungispike.errors import ConfigurationError, RangeError, SizeError
from fungispike.ingest import GrayImage


def brute_dct2(img):
    """Direct double sum over pixels for every (p, q)."""
    rows, cols = img.shape
    out = np.zeros((rows, cols))
    for p in range(rows):
        ap = math.sqrt((1 if p == 0 else 2) / rows)
        for q in range(cols):
            aq = math.sqrt((1 if q == 0 else 2) / cols)
            s = 0.0
            for r in range(rows):
                for c in range(cols):
                    s += img[r, c] * math.cos(math.pi * (2 * r + 1) * p / (2 * rows)) * math.cos(
                        math.pi * (2 * c + 1) * q / (2 * cols)
                    )
            out[p, q] = ap * aq * s
    return out


def sort_partition_oracle(coeffs, hi_q, lo_q, bins):
    """Band counts via Python's sort and a per-coefficient log-bin index."""
    flat = [abs(v) for v in coeffs.ravel()]
    order = sorted(range(len(flat)), key=lambda i: (-flat[i], i))
    n = len(flat)
    n_high = max(1, round((1 - hi_q) * n))
    n_low = min(round(lo_q * n), n - n_high)
    labels = [1] * n
    for i in order[:n_high]:
        labels[i] = 0
    for i in order[n - n_low :]:
        labels[i] = 2
    for i in range(n):
        if flat[i] < HIST_FLOOR:
            labels[i] = 2
    lo = math.log10(HIST_FLOOR)
    hi = math.log10(max(max(flat), HIST_FLOOR * 10))
    step = (hi - lo) / bins
    hist = np.zeros((3, bins), dtype=int)
    for i in range(n):
        v = min(max(flat[i], HIST_FLOOR), 10**hi)
        k = min(int((math.log10(v) - lo) / step), bins - 1)
        hist[labels[i], k] += 1
    return np.array(labels).reshape(coeffs.shape), hist


def cdf_w1(centres_a, w_a, centres_b, w_b):
    """W1 as the integral of |F_a - F_b| over the merged support."""
    pts = sorted(set(centres_a) | set(centres_b))
    wa = np.asarray(w_a, float) / np.sum(w_a)
    wb = np.asarray(w_b, float) / np.sum(w_b)
    total = 0.0
    for x0, x1 in zip(pts, pts[1:]):
        fa = sum(w for c, w in zip(centres_a, wa) if c <= x0)
        fb = sum(w for c, w in zip(centres_b, wb) if c <= x0)
        total += abs(fa - fb) * (x1 - x0)
    return total


def centres(edges):
    return list(0.5 * (np.log10(edges[:-1]) + np.log10(edges[1:])))


class TestDct2:
    def test_constant(self):
        s = dct2(np.full((6, 4), 0.3))
        assert s.coefficients[0, 0] == pytest.approx(0.3 * math.sqrt(24), rel=1e-12)
        rest = s.coefficients.copy()
        rest[0, 0] = 0
        assert np.abs(rest).max() < 1e-12

    def test_two_by_two(self):
        # every basis pair gives alpha_p alpha_q cos(pi p/4) cos(pi q/4) = 1/2
        s = dct2(np.array([[1.0, 0.0], [0.0, 0.0]]))
        np.testing.assert_allclose(s.coefficients, np.full((2, 2), 0.5), atol=1e-15)

    @pytest.mark.parametrize("shape", [(8, 8), (3, 5), (2, 7)])
    def test_brute_force(self, shape):
        img = np.random.default_rng(sum(shape)).random(shape)
        np.testing.assert_allclose(dct2(img).coefficients, brute_dct2(img), rtol=0, atol=1e-12)

    def test_degenerate(self):
        with pytest.raises(SizeError):
            dct2(np.zeros((1, 8)))

    def test_accepts_gray_image(self):
        img = GrayImage(np.eye(3))
        np.testing.assert_allclose(dct2(img).coefficients, dct2(np.eye(3)).coefficients)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, st.tuples(st.integers(2, 12), st.integers(2, 12)), elements=st.floats(0, 1)))
    def test_parseval_and_inverse(self, img):
        c = dct2(img).coefficients
        scale = max(np.sum(img**2), 1e-300)
        assert abs(np.sum(c**2) - np.sum(img**2)) <= 1e-9 * scale
        np.testing.assert_allclose(idct2(c), img, rtol=0, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(8)
        a, b = rng.random((9, 7)), rng.random((9, 7))
        lhs = dct2(0.3 * a + 1.7 * b).coefficients
        rhs = 0.3 * dct2(a).coefficients + 1.7 * dct2(b).coefficients
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-9 * np.abs(rhs).max())


class TestRoi:
    def test_full(self):
        img = GrayImage(np.random.default_rng(0).random((5, 6)))
        np.testing.assert_array_equal(crop_roi(img, (0, 0, 5, 6)).pixels, img.pixels)

    def test_one_over(self):
        img = GrayImage(np.zeros((5, 6)))
        with pytest.raises(RangeError):
            crop_roi(img, (0, 0, 6, 6))
        with pytest.raises(RangeError):
            crop_roi(img, (0, 1, 5, 6))

    def test_quarter_tiles(self):
        px = np.random.default_rng(1).random((100, 100))
        q = quarter(GrayImage(px))
        assert [r.pixels.shape for r in q] == [(50, 50)] * 4
        top = np.hstack([q[0].pixels, q[1].pixels])
        bottom = np.hstack([q[2].pixels, q[3].pixels])
        np.testing.assert_array_equal(np.vstack([top, bottom]), px)


class TestBands:
    def test_constant_image(self):
        bands = dct2(np.full((8, 8), 0.7)).bands
        assert bands.mask("high").sum() == 1 and bands.mask("high")[0, 0]
        assert bands.mask("medium").sum() == 0
        assert bands.mask("low").sum() == 63

    def test_sizes_ten_forty_fifty(self):
        c = np.arange(1, 101, dtype=float).reshape(10, 10)
        b = energy_bands(DctSpectrum(c))
        assert [int(b.mask(k).sum()) for k in BANDS] == [10, 40, 50]
        assert b.mask("high")[9].all()

    def test_partition(self):
        b = dct2(np.random.default_rng(2).random((7, 9))).bands
        total = sum(b.mask(k).astype(int) for k in BANDS)
        assert np.all(total == 1)
        assert sum(h.sum() for h in b.histograms.values()) == 63

    def test_against_sort_partition_oracle(self):
        img = np.random.default_rng(32).random((32, 32))
        s = dct2(img)
        labels, hist = sort_partition_oracle(s.coefficients, 0.9, 0.5, 64)
        np.testing.assert_array_equal(s.bands.labels, labels)
        for i, band in enumerate(BANDS):
            np.testing.assert_array_equal(s.bands.histograms[band], hist[i])

    def test_ties_row_major(self):
        c = np.ones((2, 5))
        b = energy_bands(DctSpectrum(c), 0.8, 0.4)
        np.testing.assert_array_equal(b.labels.ravel(), [0, 0, 1, 1, 1, 1, 2, 2, 2, 2])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 8), st.integers(2, 8))
    def test_permutation_equivariant(self, seed, rows, cols):
        rng = np.random.default_rng(seed)
        c = rng.permutation(rows * cols).astype(float) + 1.0
        perm = rng.permutation(rows * cols)
        a = energy_bands(DctSpectrum(c.reshape(rows, cols)))
        b = energy_bands(DctSpectrum(c[perm].reshape(rows, cols)))
        np.testing.assert_array_equal(b.labels.ravel(), a.labels.ravel()[perm])
        for band in BANDS:
            np.testing.assert_array_equal(a.histograms[band], b.histograms[band])

    def test_zigzag(self):
        order = zigzag_order(3, 3)
        np.testing.assert_array_equal(order, [0, 1, 3, 6, 4, 2, 5, 7, 8])
        b = dct2(np.random.default_rng(3).random((3, 3)), BandConfig(method="zigzag")).bands
        np.testing.assert_array_equal(b.labels.ravel()[order], [0, 0, 0, 1, 1, 1, 2, 2, 2])

    def test_bad_config(self):
        with pytest.raises(ConfigurationError):
            BandConfig(method="zones")

    def test_raster(self):
        r = band_raster(dct2(np.full((4, 4), 0.5)))
        assert r[0, 0] == 1.0 and r[3, 3] == 0.0


class TestCompare:
    def test_self(self):
        s = dct2(np.random.default_rng(4).random((10, 10)))
        cmp = compare_regions(s, s)
        for band in BANDS:
            assert all(v == 1.0 for v in cmp["ratio"][band].values())
            assert cmp["wasserstein"][band] == 0.0

    def test_scaling_quadruples_energy(self):
        b = np.random.default_rng(5).random((12, 12)) * 0.5
        cmp = compare_regions(dct2(2 * b), dct2(b))
        for band in BANDS:
            assert cmp["ratio"][band]["energy"] == pytest.approx(4.0, rel=1e-12)
            assert cmp["ratio"][band]["energy_share"] == pytest.approx(1.0, rel=1e-12)

    def test_distance_oracle(self):
        rng = np.random.default_rng(6)
        a, b = dct2(rng.random((16, 16))), dct2(rng.random((16, 16)) ** 3)
        cmp = compare_regions(a, b)
        for band in BANDS:
            ha, hb = a.bands.histograms[band], b.bands.histograms[band]
            expected = cdf_w1(centres(a.bands.edges), ha, centres(b.bands.edges), hb)
            assert cmp["wasserstein"][band] == pytest.approx(expected, abs=1e-9)
        assert any(cmp["wasserstein"][band] > 0 for band in BANDS)

    def test_empty_histograms(self):
        edges = np.logspace(-8, 0, 3)
        assert histogram_w1([0, 0], edges, [0, 0], edges) == 0.0
        assert math.isnan(histogram_w1([0, 0], edges, [1, 0], edges))

    def test_mismatched_config(self):
        img = np.random.default_rng(7).random((4, 4))
        with pytest.raises(ConfigurationError):
            compare_regions(dct2(img), dct2(img, BandConfig(hi_q=0.8)))

import numpy as np
import pytest
import scipy.signal
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fungispike.envelope import EnvelopePair, compute_envelopes
from fungispike.errors import SizeError
from fungispike.spikes import (
    DetectorParams,
    characterize_spike,
    clamp_to_envelope,
    detect_spikes,
    find_spikes,
    local_maxima,
    peak_prominences,
    prominence_threshold,
    residual,
    thin_by_distance,
)
from fungispike.synth import SynthSpec, synthesize


def brute_prominence(x, p):
    """Height above the higher of the two key cols, by exhaustive scan."""
    h = x[p]
    cols = []
    for direction in (-1, 1):
        lowest = h
        j = p + direction
        while 0 <= j < len(x):
            if x[j] > h:
                break
            lowest = min(lowest, x[j])
            j += direction
        cols.append(lowest)
    return h - max(cols)


def flat_env(n, centre=0.0, half=1.0):
    c = np.full(n, centre, dtype=float)
    return EnvelopePair(c + half, c - half, c, np.full(n, half))


def ramp(n, onset, rise, fall, amp):
    """Piecewise-linear spike sampled on the integer grid."""
    t = np.arange(n, dtype=float)
    up = (t - onset) / rise
    down = 1 - (t - onset - rise) / fall
    return amp * np.clip(np.minimum(up, down), 0, None)


class TestClampAndResidual:
    def test_inside_unchanged(self):
        x = np.array([0.1, -0.5, 0.9])
        np.testing.assert_array_equal(clamp_to_envelope(x, flat_env(3)), x)

    def test_upper_and_lower(self):
        env = EnvelopePair(np.array([3.0, 3.0]), np.array([-2.0, -2.0]), np.zeros(2), np.zeros(2))
        np.testing.assert_array_equal(clamp_to_envelope([5.0, -5.0], env), [3.0, -2.0])

    def test_residual_examples(self):
        np.testing.assert_array_equal(residual([1.0, 2.0], [1.0, 2.0]), [0, 0])
        np.testing.assert_array_equal(residual([5.0, -5.0], [3.0, -2.0]), [2.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(SizeError):
            residual([1.0, 2.0], [1.0])
        with pytest.raises(SizeError):
            clamp_to_envelope([1.0, 2.0], flat_env(3))


class TestThreshold:
    def test_constant(self):
        assert prominence_threshold(np.full(17, 2.0)) == 2.0

    def test_hand_value(self):
        # mean 1, population sd sqrt(3), N = 4
        assert prominence_threshold([0, 0, 0, 4], 2.576) == pytest.approx(1 + 2.576 * np.sqrt(3) / 2)
        assert prominence_threshold([0, 0, 0, 4], 2.576) == pytest.approx(3.2309, abs=1e-4)

    def test_zero_zstar(self):
        assert prominence_threshold([1.0, 2.0, 6.0], 0.0) == pytest.approx(3.0)

    def test_sd_mode(self):
        assert prominence_threshold([0, 0, 0, 4], 1.0, mode="sd") == pytest.approx(1 + np.sqrt(3))

    def test_empty(self):
        with pytest.raises(SizeError):
            prominence_threshold([])


class TestPeaks:
    def test_triangle(self):
        phi = np.concatenate([np.zeros(5), np.arange(11.0), np.arange(9.0, -1, -1), np.zeros(5)])
        np.testing.assert_array_equal(find_spikes(phi, 1.0, 3), [15])

    def test_equal_bumps_keep_earlier(self):
        phi = np.zeros(30)
        phi[10] = phi[15] = 4.0
        np.testing.assert_array_equal(find_spikes(phi, 1.0, 10), [10])

    def test_plateau_middle(self):
        assert list(local_maxima([0, 1, 1, 1, 0])) == [2]
        assert list(local_maxima([0, 1, 1, 0])) == [1]
        assert list(local_maxima([2, 1, 2])) == []

    def test_twenty_bumps_against_oracle(self):
        rng = np.random.default_rng(7)
        gamma = 1.0
        n = 20 * 60
        phi = np.zeros(n)
        heights = rng.uniform(0.5 * gamma, 2 * gamma, size=20)
        t = np.arange(n)
        for i, h in enumerate(heights):
            phi += h * np.exp(-0.5 * ((t - (30 + 60 * i)) / 4.0) ** 2)
        peaks = find_spikes(phi, gamma, 10)
        candidates = local_maxima(phi)
        expected = [p for p in candidates if brute_prominence(phi, p) >= gamma]
        np.testing.assert_array_equal(peaks, expected)
        assert len(expected) == int(np.sum(heights >= gamma))

    @settings(max_examples=150, deadline=None)
    @given(arrays(float, st.integers(3, 80), elements=st.integers(-20, 20).map(float)))
    def test_prominence_oracles(self, x):
        peaks = local_maxima(x)
        ours = peak_prominences(x, peaks)
        np.testing.assert_array_equal(ours, [brute_prominence(x, p) for p in peaks])
        if peaks.size:
            np.testing.assert_allclose(ours, scipy.signal.peak_prominences(x, peaks)[0])

    @settings(max_examples=150, deadline=None)
    @given(
        arrays(float, st.integers(3, 120), elements=st.floats(0, 10, allow_nan=False)),
        st.integers(1, 15),
    )
    def test_thinning_spacing_and_rule(self, phi, w):
        peaks = local_maxima(phi)
        kept = thin_by_distance(peaks, phi[peaks], w)
        assert np.all(np.diff(kept) >= w) if w > 1 else True
        # every discarded peak lies within w of a kept peak at least as high
        for p in set(peaks) - set(kept):
            near = [k for k in kept if abs(k - p) < w]
            assert any(phi[k] >= phi[p] for k in near)

    @settings(max_examples=100, deadline=None)
    @given(
        arrays(float, st.integers(3, 120), elements=st.floats(0, 10, allow_nan=False)),
        st.floats(0, 5),
        st.floats(0, 5),
        st.integers(1, 12),
    )
    def test_monotone_in_gamma(self, phi, g1, g2, w):
        lo, hi = sorted((g1, g2))
        assert set(find_spikes(phi, hi, w)) <= set(find_spikes(phi, lo, w))

    def test_returned_peaks_clear_gamma(self):
        rng = np.random.default_rng(1)
        phi = np.abs(rng.normal(size=500)).cumsum() % 7
        gamma = 2.0
        for p in find_spikes(phi, gamma, 5):
            assert brute_prominence(phi, p) >= gamma


class TestCharacterize:
    def test_closed_form_ramp(self):
        # continuous crossings at 0.1*rise and rise + 0.9*fall; both land on
        # grid points here, so allow one sample either way
        s, n = 500, 4000
        x = ramp(n, s, 1000, 1250, 100.0)
        ev = characterize_spike(x, flat_env(n), s + 1000)
        assert abs(ev.onset_index - (s + 100)) <= 1
        assert abs(ev.offset_index - (s + 1000 + 1125)) <= 1
        assert abs(ev.duration_s - 0.9 * 2250) <= 2
        assert ev.amplitude == 100.0
        assert ev.depol_rate_uV_per_s == pytest.approx(100.0, rel=1e-12)
        assert ev.repol_rate_uV_per_s == pytest.approx(80.0, rel=1e-12)
        assert ev.refractory_s is None
        assert not ev.truncated

    def test_closed_form_ramp_exact(self):
        # onset: last j < 100.5 -> 100; offset: first j > 1129.5 -> 1130
        s, n = 300, 4000
        x = ramp(n, s, 1005, 1255, 50.0)
        ev = characterize_spike(x, flat_env(n), s + 1005, next_onset=s + 3000)
        assert ev.onset_index == s + 100
        assert ev.offset_index == s + 1005 + 1130
        assert ev.duration_s == 905 + 1130
        assert ev.depol_rate_uV_per_s == pytest.approx(50e3 / 1005, rel=1e-12)
        assert ev.repol_rate_uV_per_s == pytest.approx(50e3 / 1255, rel=1e-12)
        assert ev.refractory_s == 3000 - 1005 - 1130

    def test_symmetric_equal_rates(self):
        n = 2000
        x = ramp(n, 400, 500, 500, 8.0)
        ev = characterize_spike(x, flat_env(n), 900)
        assert ev.depol_rate_uV_per_s == ev.repol_rate_uV_per_s

    def test_refractory_and_rate_units(self):
        n = 200
        x = ramp(n, 20, 40, 40, 2.0)
        ev = characterize_spike(x, flat_env(n), 60, next_onset=150, sampling_rate_hz=2.0)
        # 2 mV over 20 s at 2 Hz is 100 uV/s
        assert ev.depol_rate_uV_per_s == pytest.approx(100.0)
        assert ev.refractory_s == (150 - ev.offset_index) / 2.0

    def test_truncated(self):
        n = 100
        x = ramp(n, -30, 50, 50, 1.0)
        ev = characterize_spike(x, flat_env(n), 20)
        assert ev.truncated
        assert ev.onset_index == 0


def _synthetic(seed, n=57600):
    spec = SynthSpec(
        channel_count=1,
        duration_s=n,
        rise_s=36.46,
        fall_s=43.72,
        noise_sd_mv=0.1,
        drift_amplitude_mv=0.5,
        spike_count=max(1, n // 3000),
        refractory_s=300,
        seed=seed,
    )
    return synthesize(spec)[0].samples[0]


class TestDetectEquivariance:
    @pytest.mark.parametrize("seed", range(3))
    def test_shift(self, seed):
        x = _synthetic(seed, 14400)
        params = DetectorParams(threshold_mode="sd")
        a = detect_spikes(x, params=params)
        b = detect_spikes(x + 37.0, params=params)
        assert [e.peak_index for e in a.events] == [e.peak_index for e in b.events]

    @pytest.mark.parametrize("seed", range(3))
    def test_scale(self, seed):
        x = _synthetic(seed, 14400)
        a = detect_spikes(x, params=DetectorParams(threshold_mode="sd"))
        b = detect_spikes(4.0 * x, params=DetectorParams(threshold_mode="sd"))
        assert [e.peak_index for e in a.events] == [e.peak_index for e in b.events]
        assert b.gamma == 4.0 * a.gamma
        for ea, eb in zip(a.events, b.events):
            assert eb.amplitude == 4.0 * ea.amplitude

    def test_events_invariants(self):
        x = _synthetic(5)
        det = detect_spikes(x, params=DetectorParams(threshold_mode="sd"))
        assert det.events
        for e in det.events:
            assert e.prominence >= det.gamma
            assert e.prominence == brute_prominence(det.residual, e.peak_index)
            if not e.truncated:
                assert e.onset_index < e.peak_index < e.offset_index
                assert e.duration_s > 0
        assert det.events[-1].refractory_s is None
        assert all(e.refractory_s is not None for e in det.events[:-1])

    def test_deterministic(self):
        x = _synthetic(2, 7200)
        a = detect_spikes(x)
        b = detect_spikes(x.copy())
        assert a.events == b.events

    def test_without_preprocess_residual_vanishes(self):
        # the analytic magnitude bounds the detrended signal, so nothing is clamped
        x = _synthetic(4, 7200)
        det = detect_spikes(x, params=DetectorParams(preprocess=False))
        assert np.all(det.residual <= 1e-12 * np.abs(x).max())
        assert det.events == []

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, st.integers(8, 300), elements=st.floats(-100, 100, allow_nan=False)))
    def test_detrended_inside_analytic_magnitude(self, x):
        env = compute_envelopes(x, preprocess=False, window=7 if x.size >= 7 else 1)
        assert np.all(np.abs(x - env.centerline) <= env.magnitude + 1e-9 * (np.abs(x).max() + 1))

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from myograph.cv import CVConfig, CVEstimate, average_cv, estimate_cv, estimate_delay_mle
from myograph.errors import WindowTooShort
from myograph.preprocess import MontageSignal, bandpass, double_differential, single_differential
from myograph.synth import SynthSpec, generate

FS = 2048.0
CFG = CVConfig()


def _dd(x):
    x = np.asarray(x, dtype=float)
    return MontageSignal("double_differential", 2, x, np.arange(x.shape[1]) * 0.008, FS)


def _band_noise(n, seed):
    rng = np.random.default_rng(seed)
    X = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1 / FS)
    X *= np.exp(-0.5 * ((f - 120) / 40) ** 2)
    return np.fft.irfft(X, n)


def _frac_delay(x, d):
    n = len(x)
    f = np.fft.rfftfreq(n, 1 / FS)
    return np.fft.irfft(np.fft.rfft(x) * np.exp(-2j * np.pi * f * d), n)


def _generator_dd(cv=4.0, snr=20.0, seed=0, duration=1.0):
    rec = bandpass(generate(SynthSpec(cv=cv, snr_db=snr, seed=seed, duration=duration)))
    return double_differential(single_differential(rec, 2))


def test_integer_shift():
    s = _band_noise(1100, 1)
    x = np.column_stack([s[4:1028], s[:1024]])  # second = first delayed 4 samples
    theta, corr = estimate_delay_mle(_dd(x), [(0, 1)])
    assert abs(theta - 4 / FS) < 10e-6
    assert 4 / FS == pytest.approx(1.953125e-3)
    assert corr > 0.999


def test_fractional_shift():
    s = _band_noise(2048, 2)
    x = np.column_stack([s, _frac_delay(s, 4.5 / FS)])
    theta, corr = estimate_delay_mle(_dd(x), [(0, 1)])
    assert abs(theta - 4.5 / FS) < 20e-6
    assert corr > 0.999


def test_generator_delay():
    dd = _generator_dd()
    theta, _ = estimate_delay_mle(dd, [(8, 9)])
    assert abs(theta - 0.008 / 4.0) < 20e-6


def test_independent_noise_correlation():
    rng = np.random.default_rng(3)
    corrs = [estimate_delay_mle(_dd(rng.standard_normal((1024, 2))), [(0, 1)])[1]
             for _ in range(200)]
    assert np.mean(np.array(corrs) < 0.3) >= 0.95


def test_velocity_arithmetic():
    s = _band_noise(2048, 4)
    x = np.column_stack([s, _frac_delay(s, 0.002), _frac_delay(s, 0.004)])
    est = estimate_cv(_dd(x), [0, 1, 2])
    assert est.cv == pytest.approx(4.0, abs=0.01)
    assert est.cv == pytest.approx(0.008 / est.theta, rel=1e-12)
    assert est.accepted and est.channels_used == (0, 1, 2)


def test_generator_cv_three():
    est = estimate_cv(_generator_dd(cv=3.0, seed=7), [8, 9], (0.0, 0.5))
    assert abs(est.cv - 3.0) <= 0.1 and est.accepted


def test_noise_rejected():
    est = estimate_cv(_dd(np.random.default_rng(5).standard_normal((1024, 3))), [0, 1, 2])
    assert not est.accepted


def test_window_too_short():
    with pytest.raises(WindowTooShort):
        estimate_delay_mle(_dd(np.zeros((255, 2))), [(0, 1)])


def test_window_outside_signal():
    with pytest.raises(WindowTooShort):
        estimate_cv(_dd(np.zeros((1024, 2))), [0, 1], (0.4, 0.5))


def _est(cv, ok):
    return CVEstimate(0.008 / cv, cv, 0.9, ok, (0.0, 0.5), (0, 1))


def test_average_cv():
    assert average_cv([_est(4.0, True), _est(4.2, True), _est(9.0, False)]) == \
        pytest.approx((4.1, 2))
    assert average_cv([_est(4.0, False)]) == (None, 0)
    assert average_cv([_est(3.5, True)]) == (3.5, 1)


@given(st.integers(0, 2**31), st.floats(1.0, 12.0))
def test_time_reversal(seed, delay_samples):
    s = _band_noise(1024, seed)
    x = np.column_stack([s, _frac_delay(s, delay_samples / FS)])
    fwd, _ = estimate_delay_mle(_dd(x), [(0, 1)], direction="both")
    rev, _ = estimate_delay_mle(_dd(x[::-1].copy()), [(0, 1)], direction="both")
    assert abs(fwd + rev) < 2 * CFG.search_tolerance


@given(st.integers(0, 2**31))
def test_bracket_respect(seed):
    x = np.random.default_rng(seed).standard_normal((512, 3))
    est = estimate_cv(_dd(x), [0, 1, 2])
    assert CFG.cv_min - 1e-9 <= est.cv <= CFG.cv_max + 1e-9


def test_error_falls_with_snr():
    errs = []
    for snr in (0, 10, 20, 30):
        e = []
        for seed in range(50):
            dd = _generator_dd(cv=4.0, snr=snr, seed=seed, duration=1.0)
            e.append(abs(estimate_cv(dd, [8, 9], (0.0, 0.5)).cv - 4.0))
        errs.append(np.mean(e))
    assert all(a > b for a, b in zip(errs, errs[1:])), errs


def test_more_pairs_sum():
    s = _band_noise(2048, 8)
    x = np.column_stack([_frac_delay(s, k * 0.0025) for k in range(4)])
    est = estimate_cv(_dd(x), [0, 1, 2, 3])
    assert est.cv == pytest.approx(3.2, abs=0.01)
    assert math.isfinite(est.correlation)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from myograph import features
from myograph.errors import EmptySignal, SignalTooShort, ZeroPower
from myograph.features import PSDEstimate, mdf, mnf, psd, rms
from myograph.preprocess import BandSpec
from myograph.synth import SynthSpec, generate

FS = 2048.0
RES = FS / 256
BAND = BandSpec()


def _density(fn, step=1.0):
    f = np.arange(0, 1024 + step, step)
    return PSDEstimate(f, fn(f).astype(float), step, BAND)


def test_rms_constant():
    assert rms(np.full(17, 3.0)) == 3.0


def test_rms_two_values():
    assert rms([3.0, -4.0]) == pytest.approx(np.sqrt(12.5), rel=1e-15)
    assert rms([3.0, -4.0]) == pytest.approx(3.5355339, abs=1e-7)


def test_rms_sinusoid():
    t = np.arange(2048) / FS
    assert rms(np.sin(2 * np.pi * 64 * t)) == pytest.approx(1 / np.sqrt(2), abs=1e-6)


def test_rms_empty():
    with pytest.raises(EmptySignal):
        rms([])


@given(st.integers(0, 2**31), st.floats(-1e3, 1e3).filter(lambda k: abs(k) > 1e-3))
def test_scaling_invariance(seed, k):
    x = np.random.default_rng(seed).standard_normal(1024)
    assert rms(k * x) == pytest.approx(abs(k) * rms(x), rel=1e-12)
    a, b = psd(x, FS), psd(k * x, FS)
    assert abs(mnf(b) - mnf(a)) < 1e-9
    assert abs(mdf(b) - mdf(a)) < 1e-9


def test_flat_density():
    est = _density(lambda f: np.ones_like(f))
    assert mnf(est) == pytest.approx(210.0, abs=1e-9)
    assert mdf(est) == pytest.approx(210.0, abs=1e-9)


def test_point_mass_density():
    est = _density(lambda f: np.where(f == 100, 1.0, 0.0))
    assert mnf(est) == pytest.approx(100.0, abs=1e-9)
    assert mdf(est) == pytest.approx(100.0, abs=1.0)


def test_two_point_masses():
    est = _density(lambda f: np.where((f == 100) | (f == 300), 1.0, 0.0))
    assert mnf(est) == pytest.approx(200.0, abs=1e-9)


def test_quarter_below_hundred():
    # 25 % of the power uniformly on [20, 100], 75 % uniformly on [100, 400];
    # inverse CDF at 0.5: 100 + 0.25 / (0.75 / 300) = 200 Hz
    dens = lambda f: np.where(f < 100, 0.25 / 80, 0.75 / 300)
    assert mdf(_density(dens, step=0.25)) == pytest.approx(200.0, abs=0.1)
    assert mdf(_density(dens, step=RES)) == pytest.approx(200.0, abs=RES)


def test_zero_power():
    with pytest.raises(ZeroPower):
        mnf(_density(np.zeros_like))
    with pytest.raises(ZeroPower):
        mdf(_density(np.zeros_like))


def test_psd_needs_two_segments():
    with pytest.raises(SignalTooShort):
        psd(np.ones(511), FS)


def test_psd_grid_covers_band():
    est = psd(np.random.default_rng(0).standard_normal(2048), FS)
    assert est.resolution == RES
    assert est.freqs[0] <= 20 and est.freqs[-1] >= 400
    assert est.freqs[0] > 20 - RES and est.freqs[-1] < 400 + RES


def test_tone_peak():
    t = np.arange(4096) / FS
    est = psd(np.sin(2 * np.pi * 100 * t), FS)
    assert abs(est.freqs[np.argmax(est.power)] - 100) <= RES


def test_white_noise_parseval():
    sigma = 0.3
    x = sigma * np.random.default_rng(1).standard_normal(int(20 * FS))
    expected = np.var(x) * (400 - 20) / (FS / 2)
    assert psd(x, FS).band_power() == pytest.approx(expected, rel=0.05)


@given(st.integers(0, 2**31), st.sampled_from([512, 1000, 2048, 4097]))
def test_normalised_integrates_to_one(seed, n):
    x = np.random.default_rng(seed).standard_normal(n)
    assert psd(x, FS, normalize=True).band_power() == pytest.approx(1.0, abs=1e-9)


@given(st.integers(0, 2**31))
def test_ordering(seed):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.standard_normal(1024)) * rng.uniform(0.1, 10)
    est = psd(x, FS)
    assert 20 <= mdf(est) <= 400
    assert 20 <= mnf(est) <= 400


def test_symmetric_spectrum_mnf_equals_mdf():
    est = _density(lambda f: np.exp(-0.5 * ((f - 210) / 40) ** 2), step=RES)
    assert abs(mnf(est) - mdf(est)) < RES


@given(st.floats(10.0, 80.0))
def test_frequency_shift(df):
    def measure(center):
        rec = generate(SynthSpec(center_hz=center, width_hz=25, snr_db=None, duration=8.0,
                                 seed=5))
        est = psd(rec.channel(3, 2), FS)
        return mnf(est), mdf(est)
    m0, d0 = measure(150.0)
    m1, d1 = measure(150.0 + df)
    assert abs((m1 - m0) - df) <= RES
    assert abs((d1 - d0) - df) <= RES


def test_mean_psd_normalised():
    rng = np.random.default_rng(2)
    ests = [psd(rng.standard_normal(1024), FS) for _ in range(3)]
    out = features.mean_psd(ests)
    assert out.normalized and out.band_power() == pytest.approx(1.0, abs=1e-12)

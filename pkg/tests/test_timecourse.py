import numpy as np
import pytest
from hypothesis import given, strategies as st

from myograph.errors import DurationTooShort, TooFewPoints
from myograph.features import mnf
from myograph.preprocess import (MontageSignal, bandpass, double_differential,
                                 single_differential)
from myograph.synth import SynthSpec, generate, noise_recording
from myograph.timecourse import (EpochPlan, epoch_series, fit_slope, plan_epochs,
                                 psd_snapshots, trend_report)

FS = 2048.0
RES = FS / 256
SEL = [8, 9, 10]


def _montages(rec):
    sd = single_differential(bandpass(rec), 2)
    return sd, double_differential(sd)


def test_plan_ten_seconds():
    w = plan_epochs(10.0)
    assert [s for s, _ in w] == [float(k) for k in range(10)]
    assert all(length == 0.5 for _, length in w)


def test_plan_boundary():
    # starts 0.0 and 1.0; the second ends at 1.5 <= 1.6
    assert plan_epochs(1.6) == [(0.0, 0.5), (1.0, 0.5)]


def test_plan_too_short():
    with pytest.raises(DurationTooShort):
        plan_epochs(0.9)


@given(st.floats(1.5, 120.0), st.floats(0.1, 1.0), st.floats(0.0, 1.5))
def test_plan_windows_disjoint_and_inside(duration, length, extra):
    plan = EpochPlan(length, length + extra, max(length, 1.0))
    try:
        w = plan_epochs(duration, plan)
    except DurationTooShort:
        assert duration < plan.epoch_spacing + length
        return
    ends = [s + l for s, l in w]
    assert max(ends) <= duration + 1e-9
    assert all(e <= s2 + 1e-12 for e, (s2, _) in zip(ends, w[1:]))


def test_slope_constant():
    s, i = fit_slope(np.arange(10.0), np.full(10, 5.0))
    assert s == 0.0 and i == 5.0


def test_slope_exact_line():
    t = np.arange(10.0)
    s, i = fit_slope(t, 2 * t + 1)
    assert abs(s - 2) < 1e-12 and abs(i - 1) < 1e-12


def test_slope_three_point_parabola():
    # OLS through (0,0), (1,1), (2,4): slope 2, intercept 5/3 - 2 = -1/3
    s, i = fit_slope([0.0, 1.0, 2.0], [0.0, 1.0, 4.0])
    assert s == pytest.approx(2.0, abs=1e-12)
    assert i == pytest.approx(-1 / 3, abs=1e-12)


def test_slope_too_few():
    with pytest.raises(TooFewPoints):
        fit_slope([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(TooFewPoints):
        fit_slope([0.0, 1.0, 2.0], [1.0, np.nan, 2.0])


@given(st.floats(-10, 10), st.floats(-100, 100), st.floats(-1e3, 1e3),
       st.integers(3, 40))
def test_slope_affine_and_shift(a, b, t0, n):
    t = np.linspace(0, 30, n)
    s, i = fit_slope(t, a * t + b)
    assert s == pytest.approx(a, rel=1e-9, abs=1e-9)
    s2, _ = fit_slope(t + t0, a * t + b)
    assert s2 == pytest.approx(s, rel=1e-9, abs=1e-9)


def test_stationary_series_flat():
    sd, dd = _montages(generate(SynthSpec(duration=10.0, seed=11)))
    series = epoch_series(sd, dd, SEL)
    assert len(series) == 10
    assert abs(fit_slope(series.times, series.mnf)[0]) < 0.5
    assert series.cv_accepted.all()


def test_fatigue_series_decreasing():
    spec = SynthSpec(duration=10.0, compression=0.6, cv_slope=-0.1, seed=12)
    sd, dd = _montages(generate(spec))
    series = epoch_series(sd, dd, SEL)
    assert fit_slope(series.times, series.mnf)[0] < 0
    assert fit_slope(series.times, series.cv)[0] < 0


def test_noise_series_rejected():
    sd, dd = _montages(noise_recording(5.0, seed=3))
    series = epoch_series(sd, dd, SEL)
    assert not series.cv_accepted.any()
    rep = trend_report(series, psd_snapshots(sd, SEL))
    assert rep.cv_slope is None and rep.n_cv_epochs_used == 0


def test_snapshots_exact_windows():
    n = int(3 * FS)
    x = np.zeros((n, 3))
    rng = np.random.default_rng(0)
    seg = [rng.standard_normal(2048) * s for s in (1.0, 2.0, 3.0)]
    x[:, 0] = np.concatenate(seg)
    x[:, 1] = x[:, 0]
    x[:, 2] = x[:, 0]
    sd = MontageSignal("single_differential", 0, x, [0, 1, 2], FS)
    snaps = psd_snapshots(sd, [0, 1, 2])
    from myograph.features import psd
    for name, s in zip(("onset", "middle", "end"), seg):
        ref = psd(s, FS, normalize=True)
        np.testing.assert_allclose(snaps[name].power, ref.power, rtol=1e-10)


def test_snapshots_too_short():
    sd = MontageSignal("single_differential", 0, np.ones((int(2.5 * FS), 3)), [0, 1, 2], FS)
    with pytest.raises(DurationTooShort):
        psd_snapshots(sd, [0, 1, 2])


def test_snapshot_stationary():
    sd, _ = _montages(generate(SynthSpec(duration=6.0, seed=13)))
    m = {k: mnf(v) for k, v in psd_snapshots(sd, SEL).items()}
    assert abs(m["onset"] - m["end"]) <= 2 * RES


def test_snapshot_fatigue_order():
    sd, _ = _montages(generate(SynthSpec(duration=6.0, compression=0.6, seed=14)))
    m = {k: mnf(v) for k, v in psd_snapshots(sd, SEL).items()}
    assert m["onset"] > m["middle"] > m["end"]


def test_slope_signs_fatigue_vs_stationary():
    def report(spec):
        sd, dd = _montages(generate(spec))
        return trend_report(epoch_series(sd, dd, SEL), psd_snapshots(sd, SEL))
    fat = report(SynthSpec(duration=15.0, compression=0.7, cv_slope=-0.06,
                           amplitude_slope=0.02, seed=21))
    calm = report(SynthSpec(duration=40.0, seed=22))
    assert fat.mnf_slope < 0 and fat.cv_slope < 0 and fat.rms_slope > 0
    assert abs(calm.mnf_slope) < 0.1 * abs(fat.mnf_slope)
    assert abs(calm.cv_slope) < 0.1 * abs(fat.cv_slope)

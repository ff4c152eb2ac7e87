"""Indicator time courses over a sustained contraction and their trends."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import features
from .cv import CVConfig, CVEstimate, aligned_correlation, estimate_cv
from .errors import DurationTooShort, TooFewPoints
from .preprocess import BandSpec, MontageSignal, dd_channels_for

_EPS = 1e-9


@dataclass(frozen=True)
class EpochPlan:
    epoch_length: float = 0.5
    epoch_spacing: float = 1.0
    psd_window_length: float = 1.0

    def __post_init__(self):
        if not 0 < self.epoch_length <= self.epoch_spacing:
            raise ValueError("need 0 < epoch_length <= epoch_spacing")
        if not self.psd_window_length >= self.epoch_length:
            raise ValueError("psd_window_length must be >= epoch_length")


@dataclass(frozen=True, eq=False)
class EpochSeries:
    times: np.ndarray
    mnf: np.ndarray
    rms: np.ndarray
    cv: np.ndarray
    cv_accepted: np.ndarray
    cv_correlation: np.ndarray
    sd_correlation: np.ndarray
    estimates: tuple[CVEstimate, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True, eq=False)
class TrendReport:
    mnf_slope: float
    mnf_intercept: float
    rms_slope: float
    rms_intercept: float
    cv_slope: Optional[float]
    cv_intercept: Optional[float]
    n_epochs_used: int
    n_cv_epochs_used: int
    psd_snapshots: dict[str, features.PSDEstimate]

    @property
    def snapshot_mnf(self) -> dict[str, float]:
        return {k: features.mnf(v) for k, v in self.psd_snapshots.items()}


def plan_epochs(duration: float, plan: EpochPlan = EpochPlan()) -> list[tuple[float, float]]:
    """``(start, length)`` windows every ``epoch_spacing`` seconds from 0 that
    fit entirely inside ``duration``."""
    if duration + _EPS < plan.epoch_spacing + plan.epoch_length:
        raise DurationTooShort(
            f"{duration:g} s is shorter than one spacing plus one epoch "
            f"({plan.epoch_spacing + plan.epoch_length:g} s)")
    windows = []
    k = 0
    while k * plan.epoch_spacing + plan.epoch_length <= duration + _EPS:
        windows.append((k * plan.epoch_spacing, plan.epoch_length))
        k += 1
    return windows


def fit_slope(times, values) -> tuple[float, float]:
    """Ordinary least-squares line; returns ``(slope, intercept)``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-D and of equal length")
    if len(t) < 3:
        raise TooFewPoints(f"slope fit needs at least 3 points, got {len(t)}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise TooFewPoints("slope fit got non-finite points")
    tm, vm = t.mean(), v.mean()
    dt = t - tm
    sxx = float(np.dot(dt, dt))
    if sxx == 0:
        raise TooFewPoints("slope fit needs at least two distinct times")
    slope = float(np.dot(dt, v - vm)) / sxx
    return slope, float(vm - slope * tm)


def epoch_series(sd: MontageSignal, dd: MontageSignal, channels: Sequence[int],
                 plan: EpochPlan = EpochPlan(), cfg: CVConfig = CVConfig(),
                 band: BandSpec = BandSpec(), psd_segment: int = features.PSD_SEGMENT,
                 psd_overlap: float = features.PSD_OVERLAP) -> EpochSeries:
    """RMS and MNF averaged over the selected SD ``channels`` and gated CV from
    the DD channels between them, one value per epoch."""
    fs = sd.rate
    windows = plan_epochs(sd.n_samples / fs, plan)
    chans = list(channels)
    dd_chans = dd_channels_for(chans)
    sd_pairs = list(zip(range(len(chans) - 1), range(1, len(chans))))
    times, mnfs, rmss, ests, sd_corr = [], [], [], [], []
    for start, length in windows:
        a = int(round(start * fs))
        b = a + int(round(length * fs))
        x = sd.channels[a:b, chans]
        mnfs.append(np.mean([
            features.mnf(features.psd(x[:, i], fs, band, segment=psd_segment,
                                      overlap=psd_overlap))
            for i in range(x.shape[1])]))
        rmss.append(np.mean([features.rms(x[:, i]) for i in range(x.shape[1])]))
        est = estimate_cv(dd, dd_chans, (start, length), cfg)
        ests.append(est)
        sd_corr.append(aligned_correlation(x, sd_pairs, est.theta, fs))
        times.append(start + length / 2)
    return EpochSeries(
        times=np.array(times), mnf=np.array(mnfs), rms=np.array(rmss),
        cv=np.array([e.cv for e in ests]),
        cv_accepted=np.array([e.accepted for e in ests], dtype=bool),
        cv_correlation=np.array([e.correlation for e in ests]),
        sd_correlation=np.array(sd_corr), estimates=tuple(ests))


def psd_snapshots(sd: MontageSignal, channels: Sequence[int], plan: EpochPlan = EpochPlan(),
                  band: BandSpec = BandSpec(), psd_segment: int = features.PSD_SEGMENT,
                  psd_overlap: float = features.PSD_OVERLAP
                  ) -> dict[str, features.PSDEstimate]:
    """Normalised PSDs of the first, central and last ``psd_window_length``
    seconds, averaged over the selected channels."""
    fs = sd.rate
    n = sd.n_samples
    L = int(round(plan.psd_window_length * fs))
    if n < 3 * L:
        raise DurationTooShort(
            f"{n / fs:g} s is shorter than three {plan.psd_window_length:g} s PSD windows")
    starts = {"onset": 0, "middle": (n - L) // 2, "end": n - L}
    out = {}
    for name, a in starts.items():
        ests = [features.psd(sd.channels[a:a + L, c], fs, band, segment=psd_segment,
                             overlap=psd_overlap) for c in channels]
        out[name] = features.mean_psd(ests, normalize=True)
    return out


def trend_report(series: EpochSeries, snapshots: dict[str, features.PSDEstimate]
                 ) -> TrendReport:
    mnf_s, mnf_i = fit_slope(series.times, series.mnf)
    rms_s, rms_i = fit_slope(series.times, series.rms)
    ok = series.cv_accepted
    if ok.sum() >= 3:
        cv_s, cv_i = fit_slope(series.times[ok], series.cv[ok])
    else:
        cv_s = cv_i = None
    return TrendReport(mnf_slope=mnf_s, mnf_intercept=mnf_i, rms_slope=rms_s,
                       rms_intercept=rms_i, cv_slope=cv_s, cv_intercept=cv_i,
                       n_epochs_used=len(series), n_cv_epochs_used=int(ok.sum()),
                       psd_snapshots=snapshots)

"""Amplitude and spectral indicators: RMS, PSD, mean and median frequency."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal

from .errors import EmptySignal, SignalTooShort, ZeroPower
from .preprocess import BandSpec

PSD_SEGMENT = 256
PSD_OVERLAP = 0.5


@dataclass(frozen=True, eq=False)
class PSDEstimate:
    """One-sided PSD on a uniform grid that covers ``band``.

    The grid may extend up to one bin past each band edge; band integrals
    interpolate the power linearly at the edges.
    """

    freqs: np.ndarray
    power: np.ndarray
    resolution: float
    band: BandSpec
    normalized: bool = False

    def band_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Frequencies and power clipped to [band.low, band.high]."""
        f, p = self.freqs, self.power
        lo, hi = self.band.low, self.band.high
        inside = (f > lo) & (f < hi)
        fb = np.concatenate(([lo], f[inside], [hi]))
        pb = np.concatenate(([np.interp(lo, f, p)], p[inside], [np.interp(hi, f, p)]))
        return fb, pb

    def band_power(self) -> float:
        fb, pb = self.band_grid()
        return float(np.trapezoid(pb, fb))

    def normalize(self) -> "PSDEstimate":
        total = self.band_power()
        if not total > 0:
            raise ZeroPower("cannot normalise a spectrum with no band power")
        return PSDEstimate(self.freqs, self.power / total, self.resolution,
                           self.band, True)


@dataclass(frozen=True, eq=False)
class FeatureSet:
    rms: float
    mnf: float
    mdf: float
    psd: PSDEstimate
    window: tuple[float, float]


def rms(x) -> float:
    """Root mean square, sqrt(sum(x_n^2) / N)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise EmptySignal("rms of an empty signal")
    return float(np.sqrt(np.mean(x * x)))


def psd(x, rate: float, band: BandSpec = BandSpec(), normalize: bool = False,
        segment: int = PSD_SEGMENT, overlap: float = PSD_OVERLAP) -> PSDEstimate:
    """Welch estimate: mean-detrended Hann segments, restricted to the band."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("psd expects a single channel")
    if len(x) < 2 * segment:
        raise SignalTooShort(f"{len(x)} samples, need at least {2 * segment}")
    x = x - x.mean()
    f, p = signal.welch(x, fs=rate, window="hann", nperseg=segment,
                        noverlap=int(round(segment * overlap)), detrend="constant",
                        scaling="density")
    res = rate / segment
    i0 = max(int(np.floor(band.low / res + 1e-9)), 0)
    i1 = min(int(np.ceil(band.high / res - 1e-9)), len(f) - 1)
    est = PSDEstimate(f[i0:i1 + 1], p[i0:i1 + 1], res, band)
    return est.normalize() if normalize else est


def mean_psd(estimates: list[PSDEstimate], normalize: bool = True) -> PSDEstimate:
    first = estimates[0]
    power = np.mean([e.power for e in estimates], axis=0)
    out = PSDEstimate(first.freqs, power, first.resolution, first.band)
    return out.normalize() if normalize else out


def mnf(est: PSDEstimate) -> float:
    """Mean frequency: int f PS(f) df / int PS(f) df over the band."""
    f, p = est.band_grid()
    total = np.trapezoid(p, f)
    if not total > 0:
        raise ZeroPower("mean frequency of a spectrum with no band power")
    return float(np.trapezoid(f * p, f) / total)


def mdf(est: PSDEstimate) -> float:
    """Median frequency: splits band power into two equal halves.

    The cumulative trapezoid is inverted with linear interpolation inside the
    crossing interval.
    """
    f, p = est.band_grid()
    steps = 0.5 * (p[1:] + p[:-1]) * np.diff(f)
    cum = np.concatenate(([0.0], np.cumsum(steps)))
    total = cum[-1]
    if not total > 0:
        raise ZeroPower("median frequency of a spectrum with no band power")
    half = 0.5 * total
    k = int(np.searchsorted(cum, half, side="left"))
    k = min(max(k, 1), len(f) - 1)
    step = cum[k] - cum[k - 1]
    frac = 0.0 if step == 0 else (half - cum[k - 1]) / step
    return float(f[k - 1] + frac * (f[k] - f[k - 1]))


def feature_set(x, rate: float, band: BandSpec = BandSpec(), start: float = 0.0,
                segment: int = PSD_SEGMENT, overlap: float = PSD_OVERLAP,
                est: Optional[PSDEstimate] = None) -> FeatureSet:
    x = np.asarray(x, dtype=float)
    if est is None:
        est = psd(x, rate, band, normalize=False, segment=segment, overlap=overlap)
    return FeatureSet(rms=rms(x), mnf=mnf(est), mdf=mdf(est), psd=est,
                      window=(start, len(x) / rate))

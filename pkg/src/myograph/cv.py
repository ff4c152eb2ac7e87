"""Multi-channel maximum-likelihood delay and conduction-velocity estimation.

Adjacent double-differential channels are modelled as delayed copies of one
waveform in additive white noise. Under that model the likelihood is
maximised by the delay that minimises the summed squared misalignment

    E(theta) = sum_pairs sum_f |X_{k+1}(f) exp(j 2 pi f theta) - X_k(f)|^2,

which equals a constant minus twice the alignment score

    S(theta) = sum_f Re(P(f) exp(j 2 pi f theta)),  P = sum_pairs X_{k+1} X_k*.

Channels are Tukey-tapered before the transform. The search runs over the physiological bracket ``[ied/cv_max, ied/cv_min]``
with a sub-sample grid followed by golden-section refinement (see
:mod:`myograph.kernels`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal

from . import kernels
from .errors import SearchDidNotConverge, WindowTooShort
from .preprocess import MontageSignal

MIN_WINDOW = 256
GRID_STEP_SAMPLES = 0.25
# Tukey taper for the delay search; a window is never circular, and the
# untapered edges bias the delay by tens of microseconds
TAPER = 0.25


@dataclass(frozen=True)
class CVConfig:
    ied: float = 0.008
    cv_min: float = 2.0
    cv_max: float = 8.0
    corr_threshold: float = 0.75
    search_tolerance: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if not 0 < self.cv_min < self.cv_max:
            raise ValueError("need 0 < cv_min < cv_max")
        if not 0 < self.corr_threshold < 1:
            raise ValueError("corr_threshold must lie in (0, 1)")
        if not self.ied > 0:
            raise ValueError("ied must be positive")

    @property
    def delay_bracket(self) -> tuple[float, float]:
        return self.ied / self.cv_max, self.ied / self.cv_min


@dataclass(frozen=True)
class CVEstimate:
    theta: float
    cv: float
    correlation: float
    accepted: bool
    window: tuple[float, float]
    channels_used: tuple[int, ...]


def _spectra(x: np.ndarray, taper: float = 0.0) -> np.ndarray:
    x = x - x.mean(axis=0)
    if taper > 0:
        x = x * signal.windows.tukey(x.shape[0], taper)[:, None]
    return np.fft.rfft(x, axis=0)


def _cross_spectrum(X: np.ndarray, pairs: Sequence[tuple[int, int]], n: int, rate: float):
    k = np.arange(1, X.shape[0])
    w = np.full(k.shape, 2.0)
    if n % 2 == 0:
        w[-1] = 1.0
    cross = np.zeros(len(k), dtype=complex)
    for i, j in pairs:
        cross += w * X[1:, j] * np.conj(X[1:, i])
    omega = 2 * np.pi * k * rate / n
    return (np.ascontiguousarray(cross.real), np.ascontiguousarray(cross.imag),
            np.ascontiguousarray(omega))


def aligned_correlation(x: np.ndarray, pairs: Sequence[tuple[int, int]], theta: float,
                        rate: float) -> float:
    """Mean Pearson coefficient between channel ``i`` and channel ``j``
    advanced by ``theta`` (fractional shift in the frequency domain), over
    ``pairs``. Samples affected by circular wrap-around are excluded."""
    n = x.shape[0]
    X = _spectra(x)
    shift = np.exp(2j * np.pi * np.fft.rfftfreq(n, 1 / rate) * theta)
    guard = int(math.ceil(abs(theta) * rate)) + 1
    if n - 2 * guard < 2:
        return 0.0
    vals = []
    for i, j in pairs:
        a = np.fft.irfft(X[:, i], n)[guard:n - guard]
        b = np.fft.irfft(X[:, j] * shift, n)[guard:n - guard]
        a = a - a.mean()
        b = b - b.mean()
        den = math.sqrt(float(np.dot(a, a) * np.dot(b, b)))
        vals.append(0.0 if den == 0 else float(np.dot(a, b)) / den)
    return float(np.mean(vals))


def estimate_delay_mle(dd: MontageSignal, channels: Sequence[tuple[int, int]],
                       cfg: CVConfig = CVConfig(), direction: str = "forward"
                       ) -> tuple[float, float]:
    """Single delay (s) between each adjacent channel pair, and the mean
    aligned correlation of those pairs.

    ``direction="forward"`` searches the physiological bracket; ``"both"``
    searches ``[-ied/cv_min, ied/cv_min]`` so that propagation towards lower
    indices yields a negative delay.
    """
    pairs = [(int(i), int(j)) for i, j in channels]
    if not pairs:
        raise ValueError("need at least one channel pair")
    n = dd.n_samples
    if n < MIN_WINDOW:
        raise WindowTooShort(f"window has {n} samples, needs at least {MIN_WINDOW}")
    used = sorted({c for p in pairs for c in p})
    x = dd.channels[:, used]
    remap = {c: k for k, c in enumerate(used)}
    local = [(remap[i], remap[j]) for i, j in pairs]

    re, im, omega = _cross_spectrum(_spectra(x, TAPER), local, n, dd.rate)
    lo, hi = cfg.delay_bracket
    if direction == "both":
        lo = -hi
    elif direction != "forward":
        raise ValueError(f"unknown direction {direction!r}")
    theta, _, _, converged = kernels.search_delay(
        re, im, omega, lo, hi, GRID_STEP_SAMPLES / dd.rate,
        cfg.search_tolerance, cfg.max_iter)
    if not converged or not math.isfinite(theta):
        raise SearchDidNotConverge(
            f"delay bracket [{lo:.6g}, {hi:.6g}] s not resolved to "
            f"{cfg.search_tolerance:g} s within {cfg.max_iter} iterations")
    return theta, aligned_correlation(x, local, theta, dd.rate)


def estimate_cv(dd: MontageSignal, channels: Sequence[int],
                window: Optional[tuple[float, float]] = None,
                cfg: CVConfig = CVConfig()) -> CVEstimate:
    """Conduction velocity ``ied / theta`` over ``window`` = (start s, length s),
    gated on aligned correlation and the velocity bracket."""
    if window is None:
        window = (0.0, dd.n_samples / dd.rate)
    start = int(round(window[0] * dd.rate))
    stop = start + int(round(window[1] * dd.rate))
    if start < 0 or stop > dd.n_samples:
        raise WindowTooShort(
            f"window {window[0]:g}+{window[1]:g} s exceeds the {dd.n_samples / dd.rate:g} s signal")
    chans = [int(c) for c in channels]
    pairs = list(zip(chans[:-1], chans[1:]))
    theta, corr = estimate_delay_mle(dd.window(start, stop), pairs, cfg)
    cv = cfg.ied / theta if theta > 0 else math.nan
    accepted = bool(corr > cfg.corr_threshold and cfg.cv_min <= cv <= cfg.cv_max)
    return CVEstimate(theta=theta, cv=cv, correlation=corr, accepted=accepted,
                      window=(float(window[0]), float(window[1])),
                      channels_used=tuple(chans))


def average_cv(estimates: Sequence[CVEstimate]) -> tuple[Optional[float], int]:
    """Mean CV over accepted estimates; ``(None, 0)`` when none is accepted."""
    vals = [e.cv for e in estimates if e.accepted]
    if not vals:
        return None, 0
    return float(np.mean(vals)), len(vals)

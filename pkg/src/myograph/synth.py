"""Synthetic grid recordings with known conduction velocity, spectrum and
amplitude trajectories.

One grid column carries a band-limited Gaussian-noise source propagating in
both directions away from an innervation zone placed at the centre of an SD
channel. Electrode ``r`` sees the source delayed by ``|x_r - x_iz| / cv(t)``,
so SD channels reverse polarity across the zone. Spectral compression is
produced by time-warping the source: a local time scale falling linearly
from 1 to ``compression`` scales every frequency by the same factor. The
other columns carry attenuated copies; every present electrode receives
independent white noise at the requested SNR (defined on the SD channels
of the propagating column), scaled up by ``proximal_noise``
on the proximal side of the zone in the propagating column.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import IoFailure, SpecInvalid
from .signal_model import (
    GridGeometry,
    GridRecording,
    TrialMetadata,
    TrimPolicy,
    save_trial,
)

OVERSAMPLE = 8


@dataclass(frozen=True)
class SynthSpec:
    cv: float = 4.0                 # m/s at t = 0
    cv_slope: float = 0.0           # (m/s)/s
    center_hz: float = 100.0
    width_hz: float = 35.0
    compression: float = 1.0        # spectral scale at the end relative to the start
    amplitude_mv: float = 0.2
    amplitude_slope: float = 0.0    # mV/s
    iz_sd_index: int = 6
    snr_db: Optional[float] = 20.0  # None: noise-free
    duration: float = 5.0
    seed: int = 0
    column: int = 2
    proximal_noise: float = 2.0     # noise scale on the proximal side of the zone
    column_decay: float = 0.5
    ramp: float = 0.0               # s of linear on/off ramp at each end
    force_n: float = 100.0
    cv_min: float = 2.0
    cv_max: float = 8.0
    mvc_percent: int = 10
    condition: str = "before_fatigue"
    subject_id: str = "synthetic"

    def cv_at(self, t):
        return self.cv + self.cv_slope * np.asarray(t, dtype=float)

    def amplitude_at(self, t):
        return self.amplitude_mv + self.amplitude_slope * np.asarray(t, dtype=float)

    def scale_at(self, t):
        """Local spectral scale factor (1 at the start, ``compression`` at the end)."""
        return 1.0 + (self.compression - 1.0) * np.asarray(t, dtype=float) / self.duration

    @property
    def stationary(self) -> bool:
        return self.cv_slope == 0 and self.compression == 1

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        if not isinstance(d, dict):
            raise SpecInvalid("synth spec must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise SpecInvalid(f"unknown synth spec keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise SpecInvalid(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


def _check(spec: SynthSpec, geometry: GridGeometry, rate: float) -> None:
    def bad(msg):
        raise SpecInvalid(msg)

    nums = [spec.cv, spec.cv_slope, spec.center_hz, spec.width_hz, spec.compression,
            spec.amplitude_mv, spec.amplitude_slope, spec.duration, spec.ramp]
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in nums):
        bad("synth spec values must be finite numbers")
    if spec.duration <= 0:
        bad("duration must be positive")
    if spec.width_hz <= 0:
        bad("width_hz must be positive")
    if not 0 < spec.center_hz < rate / 2:
        bad("center_hz must lie inside (0, rate/2)")
    if spec.compression <= 0:
        bad("compression must be positive")
    ends = spec.cv_at([0.0, spec.duration])
    if ends.min() < spec.cv_min or ends.max() > spec.cv_max:
        bad(f"cv profile leaves [{spec.cv_min}, {spec.cv_max}] m/s")
    if spec.amplitude_at([0.0, spec.duration]).min() < 0:
        bad("amplitude profile goes negative")
    if not 0 <= spec.iz_sd_index <= geometry.rows - 2:
        bad(f"iz_sd_index must lie in 0..{geometry.rows - 2}")
    if not 0 <= spec.column < geometry.cols:
        bad(f"column must lie in 0..{geometry.cols - 1}")
    if spec.proximal_noise < 0 or spec.column_decay < 0:
        bad("proximal_noise and column_decay must be non-negative")
    if spec.snr_db is not None and not math.isfinite(spec.snr_db):
        bad("snr_db must be finite or null")
    if spec.ramp < 0 or 2 * spec.ramp > spec.duration:
        bad("ramp must lie in [0, duration/2]")


def _shaped_noise(rng: np.random.Generator, n: int, rate: float, center: float,
                  width: float) -> tuple[np.ndarray, np.ndarray]:
    """Spectrum (rfft layout) of unit-variance Gaussian noise with a Gaussian
    magnitude response around ``center``."""
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1 / rate)
    spec *= np.exp(-0.5 * ((f - center) / width) ** 2)
    spec[0] = 0.0
    x = np.fft.irfft(spec, n)
    spec /= max(np.std(x), 1e-300)
    return spec, f


def _envelope(spec: SynthSpec, t: np.ndarray) -> np.ndarray:
    env = spec.amplitude_at(t)
    if spec.ramp > 0:
        env = env * np.clip(t / spec.ramp, 0, 1) * np.clip((spec.duration - t) / spec.ramp, 0, 1)
    return env


def _column_signals(spec: SynthSpec, geometry: GridGeometry, rate: float,
                    rng: np.random.Generator, n: int) -> np.ndarray:
    """Noise-free monopolar signals of the propagating column, ``(n, rows)``."""
    ied = geometry.inter_electrode_distance
    x_iz = (spec.iz_sd_index + 0.5) * ied
    dist = np.abs(np.arange(geometry.rows) * ied - x_iz)
    t = np.arange(n) / rate
    out = np.empty((n, geometry.rows))

    if spec.stationary:
        S, f = _shaped_noise(rng, n, rate, spec.center_hz, spec.width_hz)
        for r in range(geometry.rows):
            out[:, r] = np.fft.irfft(S * np.exp(-2j * np.pi * f * dist[r] / spec.cv), n)
    else:
        # source time phi(t) = integral of the local scale; channel r reads the
        # source at phi(t - d_r / cv(t))
        D, k = spec.duration, spec.compression - 1.0

        def phi(s):
            return s + k * s * s / (2 * D)

        tau_max = dist.max() / min(spec.cv_at([0.0, D]))
        lo = phi(-tau_max - 1.0 / rate) - 0.05
        hi = phi(t[-1]) + 0.05
        fine_rate = rate * OVERSAMPLE
        m = int(math.ceil((hi - lo) * fine_rate)) + 1
        S, _ = _shaped_noise(rng, m, fine_rate, spec.center_hz, spec.width_hz)
        u = CubicSpline(lo + np.arange(m) / fine_rate, np.fft.irfft(S, m))
        cv_t = spec.cv_at(t)
        for r in range(geometry.rows):
            out[:, r] = u(phi(t - dist[r] / cv_t))
    return out * _envelope(spec, t)[:, None]


def generate(spec: SynthSpec, geometry: GridGeometry = GridGeometry(),
             rate: float = 2048.0, trim: TrimPolicy = TrimPolicy()) -> GridRecording:
    """Deterministic synthetic recording for ``spec`` (same seed, same output)."""
    _check(spec, geometry, rate)
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration * rate))
    column = _column_signals(spec, geometry, rate, rng, n)

    samples = np.zeros((n, geometry.n_positions))
    for c in range(geometry.cols):
        g = spec.column_decay ** abs(c - spec.column)
        samples[:, c * geometry.rows:(c + 1) * geometry.rows] = g * column
    present = np.ones(geometry.n_positions, dtype=bool)
    for r, c in geometry.missing_pads:
        present[geometry.index(r, c)] = False

    if spec.snr_db is not None:
        # SNR refers to the SD channels of the propagating column: clean SD
        # power over the power of the difference of two unit-scale noises
        ok = [r for r in range(geometry.rows - 1)
              if present[geometry.index(r, spec.column)]
              and present[geometry.index(r + 1, spec.column)]]
        sd = np.diff(column, axis=1)[:, ok]
        p_sig = float(np.mean(np.var(sd, axis=0)))
        sigma = np.full(geometry.n_positions,
                        math.sqrt(p_sig / (2 * 10 ** (spec.snr_db / 10))))
        proximal = [geometry.index(r, spec.column) for r in range(spec.iz_sd_index + 1)]
        sigma[proximal] *= spec.proximal_noise
        samples += sigma * rng.standard_normal(samples.shape)
    samples[:, ~present] = 0.0

    t = np.arange(n) / rate
    force = spec.force_n * _envelope(spec, t) / max(spec.amplitude_mv, 1e-12)
    meta = TrialMetadata(subject_id=spec.subject_id, mvc_percent=spec.mvc_percent,
                         condition=spec.condition, sampling_rate=rate, trim=trim)
    return GridRecording(geometry=geometry, meta=meta, samples=samples, force=force)


def noise_recording(duration: float, seed: int = 0, sigma_mv: float = 0.05,
                    geometry: GridGeometry = GridGeometry(), rate: float = 2048.0
                    ) -> GridRecording:
    """Independent white noise on every present electrode, no propagation."""
    rng = np.random.default_rng(seed)
    n = int(round(duration * rate))
    samples = sigma_mv * rng.standard_normal((n, geometry.n_positions))
    for r, c in geometry.missing_pads:
        samples[:, geometry.index(r, c)] = 0.0
    return GridRecording(geometry=geometry, meta=TrialMetadata(sampling_rate=rate),
                         samples=samples)


# --------------------------------------------------------------------------
# bundled protocol

# (name, spec overrides) in protocol order
PROTOCOL = (
    ("mvc10_before_fatigue", dict(
        mvc_percent=10, condition="before_fatigue", duration=20.0, seed=101,
        cv=4.60, cv_slope=-0.002, center_hz=120.0, compression=1.0,
        amplitude_mv=0.05, amplitude_slope=0.0)),
    ("mvc20_before_fatigue", dict(
        mvc_percent=20, condition="before_fatigue", duration=20.0, seed=102,
        cv=4.50, cv_slope=-0.012, center_hz=115.0, compression=0.93,
        amplitude_mv=0.09, amplitude_slope=0.001)),
    ("mvc40_before_fatigue", dict(
        mvc_percent=40, condition="before_fatigue", duration=18.0, seed=103,
        cv=4.40, cv_slope=-0.025, center_hz=110.0, compression=0.853,
        amplitude_mv=0.17, amplitude_slope=0.004)),
    ("mvc60_before_fatigue", dict(
        mvc_percent=60, condition="before_fatigue", duration=15.0, seed=104,
        cv=4.30, cv_slope=-0.040, center_hz=105.0, compression=0.786,
        amplitude_mv=0.26, amplitude_slope=0.009)),
    ("mvc90_before_fatigue", dict(
        mvc_percent=90, condition="before_fatigue", duration=12.0, seed=105,
        cv=4.20, cv_slope=-0.060, center_hz=100.0, compression=0.712,
        amplitude_mv=0.40, amplitude_slope=0.035)),
    ("mvc70_fatigue", dict(
        mvc_percent=70, condition="fatigue", duration=30.0, seed=106,
        cv=4.20, cv_slope=-0.050, center_hz=95.0, compression=0.60,
        amplitude_mv=0.30, amplitude_slope=0.020)),
    ("mvc10_after_fatigue", dict(
        mvc_percent=10, condition="after_fatigue", duration=60.0, seed=107,
        cv=5.00, cv_slope=0.006, center_hz=130.0, compression=1.0,
        amplitude_mv=0.05, amplitude_slope=0.0)),
)


def protocol_specs(base: SynthSpec = SynthSpec()) -> list[tuple[str, SynthSpec]]:
    return [(name, replace(base, **kw)) for name, kw in PROTOCOL]


def make_protocol_dataset(out_dir, geometry: GridGeometry = GridGeometry(),
                          rate: float = 2048.0, digits: int = 7) -> list[str]:
    """Write the seven-trial synthetic protocol as CSV + JSON pairs.

    Returns the written paths, CSV then JSON for each trial in protocol order.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for i, (name, spec) in enumerate(protocol_specs(), start=1):
            stem = os.path.join(out_dir, f"trial{i:02d}_{name}")
            rec = generate(spec, geometry, rate)
            save_trial(rec, stem + ".csv", stem + ".json", digits=digits)
            paths += [stem + ".csv", stem + ".json"]
    except OSError as exc:
        raise IoFailure(f"cannot write protocol dataset: {exc}") from exc
    return paths


def write_manifest(paths: list[str], manifest_path) -> None:
    """Session manifest listing the (signal, meta) pairs in ``paths``."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    csvs = [p for p in paths if p.endswith(".csv")]
    trials = [{"signal": os.path.relpath(p, base),
               "meta": os.path.relpath(p[:-4] + ".json", base)} for p in csvs]
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump({"trials": trials}, f, indent=2)
        f.write("\n")

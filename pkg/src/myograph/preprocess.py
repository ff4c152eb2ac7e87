"""Band-pass conditioning and spatial montages along one grid column."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import (
    BandInvalid,
    ColumnOutOfRange,
    NotEnoughCleanChannels,
    TooFewChannels,
    WrongMontageKind,
)
from .signal_model import GridRecording

MONOPOLAR = "monopolar"
SINGLE_DIFFERENTIAL = "single_differential"
DOUBLE_DIFFERENTIAL = "double_differential"


@dataclass(frozen=True)
class BandSpec:
    low: float = 20.0
    high: float = 400.0
    order: int = 4

    def check(self, rate: float) -> None:
        if not (0 < self.low < self.high < rate / 2):
            raise BandInvalid(
                f"band {self.low:g}-{self.high:g} Hz is not valid at {rate:g} Hz")
        if int(self.order) != self.order or self.order < 1:
            raise BandInvalid(f"filter order must be a positive integer, got {self.order}")


@dataclass(frozen=True, eq=False)
class MontageSignal:
    """Derived channels of one grid column.

    ``positions`` are channel centres along the fiber axis in meters and
    ``usable`` flags channels that do not touch a missing pad.
    """

    kind: str
    column: int
    channels: np.ndarray
    positions: np.ndarray
    rate: float
    usable: np.ndarray = field(default=None)
    t0: float = 0.0

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=float)
        if channels.ndim != 2:
            raise ValueError("channels must be (n_samples, n_channels)")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        usable = (np.ones(channels.shape[1], dtype=bool) if self.usable is None
                  else np.asarray(self.usable, dtype=bool))
        object.__setattr__(self, "usable", usable)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[1]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[0]

    @property
    def spacing(self) -> float:
        return float(self.positions[1] - self.positions[0])

    def window(self, start: int, stop: int) -> "MontageSignal":
        return MontageSignal(self.kind, self.column, self.channels[start:stop],
                             self.positions, self.rate, self.usable,
                             self.t0 + start / self.rate)


@dataclass(frozen=True)
class IZReport:
    column: int
    iz_index: int
    pair_scores: tuple[float, ...]
    channel_scores: tuple[float, ...]

    @property
    def polarity_flips(self) -> tuple[float, ...]:
        return self.pair_scores


def bandpass(rec: GridRecording, band: BandSpec = BandSpec()) -> GridRecording:
    """Zero-phase Butterworth band-pass (forward-backward) on every channel."""
    band.check(rec.rate)
    sos = signal.butter(int(band.order), [band.low, band.high], btype="bandpass",
                        fs=rec.rate, output="sos")
    filtered = signal.sosfiltfilt(sos, rec.samples, axis=0)
    g = rec.geometry
    for r, c in g.missing_pads:
        filtered[:, g.index(r, c)] = 0.0
    return rec.with_samples(filtered)


def monopolar(rec: GridRecording, column: int) -> MontageSignal:
    g = rec.geometry
    if not 0 <= column < g.cols:
        raise ColumnOutOfRange(f"column {column} outside 0..{g.cols - 1}")
    usable = [not g.is_missing(r, column) for r in range(g.rows)]
    positions = np.arange(g.rows) * g.inter_electrode_distance
    return MontageSignal(MONOPOLAR, column, np.array(rec.column(column)), positions,
                         rec.rate, usable, rec.t0)


def single_differential(rec: GridRecording, column: int) -> MontageSignal:
    """SD[i] = monopolar[i + 1] - monopolar[i] along the fiber axis."""
    mono = monopolar(rec, column)
    ied = rec.geometry.inter_electrode_distance
    sd = np.diff(mono.channels, axis=1)
    usable = mono.usable[1:] & mono.usable[:-1]
    positions = (np.arange(sd.shape[1]) + 0.5) * ied
    return MontageSignal(SINGLE_DIFFERENTIAL, column, sd, positions, rec.rate,
                         usable, rec.t0)


def double_differential(sd: MontageSignal) -> MontageSignal:
    """DD[i] = SD[i + 1] - SD[i]."""
    if sd.kind != SINGLE_DIFFERENTIAL:
        raise WrongMontageKind(f"double differential needs SD input, got {sd.kind}")
    dd = np.diff(sd.channels, axis=1)
    usable = sd.usable[1:] & sd.usable[:-1]
    positions = sd.positions[:-1] + sd.spacing / 2
    return MontageSignal(DOUBLE_DIFFERENTIAL, sd.column, dd, positions, sd.rate,
                         usable, sd.t0)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den == 0:
        return 0.0
    return float(np.dot(a, b) / den)


def max_lagged_correlation(a: np.ndarray, b: np.ndarray, max_lag: int) -> float:
    """Largest Pearson coefficient between ``a`` and ``b`` shifted by up to
    ``max_lag`` samples either way."""
    n = len(a)
    best = -1.0
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            r = _pearson(a[:n - lag], b[lag:])
        else:
            r = _pearson(a[-lag:], b[:n + lag])
        best = max(best, r)
    return best


def detect_innervation_zone(sd: MontageSignal, cv_min: float = 2.0) -> IZReport:
    """Locate the innervation zone as the SD channel that correlates worst with
    its neighbours.

    Each adjacent pair is scored with its maximum correlation over lags up to
    ``ied / cv_min``; a channel's score is the mean of the scores of the pairs
    it belongs to. Propagating channels correlate strongly with neighbours,
    while the channel straddling the zone (and the polarity reversal across it)
    does not.
    """
    if sd.n_channels < 4:
        raise TooFewChannels(f"need at least 4 SD channels, got {sd.n_channels}")
    x = sd.channels
    max_lag = max(1, int(np.ceil(sd.spacing / cv_min * sd.rate)))
    pairs = []
    for i in range(sd.n_channels - 1):
        if sd.usable[i] and sd.usable[i + 1]:
            pairs.append(max_lagged_correlation(x[:, i], x[:, i + 1], max_lag))
        else:
            pairs.append(np.nan)
    pairs = np.array(pairs)
    scores = np.full(sd.n_channels, np.nan)
    for i in range(sd.n_channels):
        if not sd.usable[i]:
            continue
        near = [pairs[j] for j in (i - 1, i) if 0 <= j < len(pairs) and np.isfinite(pairs[j])]
        if near:
            scores[i] = np.mean(near)
    if not np.any(np.isfinite(scores)):
        raise TooFewChannels("no usable SD channel pairs in this column")
    iz = int(np.nanargmin(scores))
    return IZReport(sd.column, iz, tuple(float(p) for p in pairs),
                    tuple(float(s) for s in scores))


def _side_runs(sd: MontageSignal, iz: int, k: int) -> dict[str, list[int]]:
    """Nearest k consecutive usable channels on each side of the zone, in
    propagation order (away from the zone)."""
    out = {}
    sides = {
        "distal": list(range(iz + 2, sd.n_channels)),
        "proximal": list(range(iz - 2, -1, -1)),
    }
    for name, idx in sides.items():
        run: list[int] = []
        for i in idx:
            if sd.usable[i]:
                run.append(i)
                if len(run) == k:
                    out[name] = run
                    break
            else:
                run = []
    return out


def select_channels(sd: MontageSignal, iz: IZReport, k: int = 3) -> list[int]:
    """Pick ``k`` consecutive SD channels on the better-propagating side of the
    innervation zone, skipping the zone channel and its immediate neighbour.

    Indices are returned in propagation order, i.e. moving away from the zone.
    """
    if k < 3:
        raise NotEnoughCleanChannels(f"need k >= 3 channels, got {k}")
    runs = _side_runs(sd, iz.iz_index, k)
    if not runs:
        raise NotEnoughCleanChannels(
            f"no run of {k} usable SD channels on either side of the zone at {iz.iz_index}")
    pairs = np.asarray(iz.pair_scores)

    def side_score(run: list[int]) -> float:
        vals = [pairs[min(a, b)] for a, b in zip(run[:-1], run[1:])]
        return float(np.nanmean(vals)) if np.any(np.isfinite(vals)) else -np.inf

    best = max(runs, key=lambda name: (side_score(runs[name]), name == "distal"))
    return runs[best]


def dd_channels_for(sd_channels: list[int]) -> list[int]:
    """DD indices between consecutive selected SD channels (same order)."""
    return [min(a, b) for a, b in zip(sd_channels[:-1], sd_channels[1:])]


def auto_column(rec: GridRecording) -> int:
    """Column with the highest mean RMS over its usable SD channels."""
    best, best_rms = 0, -1.0
    for c in range(rec.geometry.cols):
        sd = single_differential(rec, c)
        if not sd.usable.any():
            continue
        rms = float(np.mean(np.sqrt(np.mean(sd.channels[:, sd.usable] ** 2, axis=0))))
        if rms > best_rms:
            best, best_rms = c, rms
    return best

"""Grid recordings: data types, CSV/JSON ingestion and active-region trimming.

Monopolar samples are stored in a dense ``(n_samples, rows * cols)`` matrix
whose column index is ``col * rows + row`` (column-major along the fiber
axis). Pads listed in ``GridGeometry.missing_pads`` are held as zeros and
never written to disk.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    MalformedFile,
    MetadataMismatch,
    NonFiniteSample,
    RegionTooShort,
    UnsupportedRate,
)

MVC_LEVELS = (10, 20, 40, 60, 70, 90)
CONDITIONS = ("before_fatigue", "fatigue", "after_fatigue")
DEFAULT_BAND_HIGH = 400.0
MIN_LOAD_SECONDS = 2.0
MIN_REGION_SECONDS = 1.0

_ELECTRODE_RE = re.compile(r"^e_(\d+)_(\d+)$")


@dataclass(frozen=True)
class GridGeometry:
    rows: int = 13
    cols: int = 5
    inter_electrode_distance: float = 0.008
    missing_pads: tuple[tuple[int, int], ...] = ((0, 0),)
    fiber_axis: str = "along_columns"

    def __post_init__(self):
        object.__setattr__(
            self, "missing_pads",
            tuple(sorted((int(r), int(c)) for r, c in self.missing_pads)))
        if self.rows < 4:
            raise MetadataMismatch(f"grid needs at least 4 rows, got {self.rows}")
        if self.cols < 1:
            raise MetadataMismatch(f"grid needs at least 1 column, got {self.cols}")
        if not self.inter_electrode_distance > 0:
            raise MetadataMismatch("inter-electrode distance must be positive")
        if self.fiber_axis != "along_columns":
            raise MetadataMismatch(f"unsupported fiber axis {self.fiber_axis!r}")
        for r, c in self.missing_pads:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise MetadataMismatch(f"missing pad ({r}, {c}) outside the grid")

    @property
    def n_positions(self) -> int:
        return self.rows * self.cols

    @property
    def n_channels(self) -> int:
        """Number of electrodes actually present."""
        return self.n_positions - len(self.missing_pads)

    def index(self, row: int, col: int) -> int:
        return col * self.rows + row

    def is_missing(self, row: int, col: int) -> bool:
        return (row, col) in self.missing_pads

    def present_pads(self) -> list[tuple[int, int]]:
        """Present pads in storage (column-major) order."""
        return [(r, c) for c in range(self.cols) for r in range(self.rows)
                if not self.is_missing(r, c)]


@dataclass(frozen=True)
class TrimPolicy:
    mode: str = "fixed"
    fixed_trim: float = 0.5
    force_fraction: float = 0.5

    def __post_init__(self):
        if self.mode not in ("fixed", "force_threshold"):
            raise MetadataMismatch(f"unknown trim mode {self.mode!r}")
        if not self.fixed_trim >= 0:
            raise MetadataMismatch("fixed_trim must be >= 0")
        if not 0 < self.force_fraction < 1:
            raise MetadataMismatch("force_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class TrialMetadata:
    subject_id: str = "synthetic"
    mvc_percent: int = 10
    condition: str = "before_fatigue"
    sampling_rate: float = 2048.0
    target_force: Optional[float] = None
    trim: TrimPolicy = field(default_factory=TrimPolicy)

    def __post_init__(self):
        if self.mvc_percent not in MVC_LEVELS:
            raise MetadataMismatch(
                f"mvc_percent must be one of {MVC_LEVELS}, got {self.mvc_percent}")
        if self.condition not in CONDITIONS:
            raise MetadataMismatch(f"unknown condition {self.condition!r}")
        if self.mvc_percent == 70 and self.condition != "fatigue":
            raise MetadataMismatch("the 70 %MVC trial is the fatigue (exhaustion) test")
        if self.condition == "after_fatigue" and self.mvc_percent != 10:
            raise MetadataMismatch("the after-fatigue trial is performed at 10 %MVC")
        if not (math.isfinite(self.sampling_rate)
                and self.sampling_rate > 2 * DEFAULT_BAND_HIGH):
            raise UnsupportedRate(
                f"sampling rate {self.sampling_rate} Hz cannot carry a "
                f"{DEFAULT_BAND_HIGH:g} Hz band")


@dataclass(frozen=True, eq=False)
class GridRecording:
    """One monopolar grid trial. Arrays are made read-only on construction."""

    geometry: GridGeometry
    meta: TrialMetadata
    samples: np.ndarray
    force: Optional[np.ndarray] = None
    t0: float = 0.0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != self.geometry.n_positions:
            raise MetadataMismatch(
                f"samples must be (n, {self.geometry.n_positions}), got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise NonFiniteSample("recording contains NaN or Inf samples")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        if self.force is not None:
            force = np.array(self.force, dtype=float)
            if force.shape != (samples.shape[0],):
                raise MetadataMismatch("force channel length differs from EMG length")
            if not np.all(np.isfinite(force)):
                raise NonFiniteSample("force channel contains NaN or Inf samples")
            force.flags.writeable = False
            object.__setattr__(self, "force", force)

    @property
    def rate(self) -> float:
        return self.meta.sampling_rate

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples / self.rate

    def channel(self, row: int, col: int) -> np.ndarray:
        return self.samples[:, self.geometry.index(row, col)]

    def column(self, col: int) -> np.ndarray:
        """Monopolar samples of one grid column, ``(n_samples, rows)``."""
        r = self.geometry.rows
        return self.samples[:, col * r:(col + 1) * r]

    def slice(self, start: int, stop: int) -> "GridRecording":
        force = None if self.force is None else self.force[start:stop]
        return replace(self, samples=self.samples[start:stop], force=force,
                       t0=self.t0 + start / self.rate)

    def with_samples(self, samples: np.ndarray) -> "GridRecording":
        return replace(self, samples=samples)


# --------------------------------------------------------------------------
# metadata sidecar

def metadata_to_dict(geometry: GridGeometry, meta: TrialMetadata) -> dict:
    d = {
        "subject_id": meta.subject_id,
        "mvc_percent": meta.mvc_percent,
        "condition": meta.condition,
        "sampling_rate_hz": meta.sampling_rate,
        "rows": geometry.rows,
        "cols": geometry.cols,
        "ied_m": geometry.inter_electrode_distance,
        "missing_pads": [list(p) for p in geometry.missing_pads],
        "trim": {
            "mode": meta.trim.mode,
            "fixed_trim_s": meta.trim.fixed_trim,
            "force_fraction": meta.trim.force_fraction,
        },
    }
    if meta.target_force is not None:
        d["target_force_n"] = meta.target_force
    return d


def metadata_from_dict(d: dict) -> tuple[GridGeometry, TrialMetadata]:
    if not isinstance(d, dict):
        raise MalformedFile("metadata must be a JSON object")
    required = ("subject_id", "mvc_percent", "condition", "sampling_rate_hz",
                "rows", "cols", "ied_m")
    missing = [k for k in required if k not in d]
    if missing:
        raise MalformedFile(f"metadata lacks keys: {', '.join(missing)}")
    try:
        pads = d.get("missing_pads", [[0, 0]])
        geometry = GridGeometry(
            rows=int(d["rows"]), cols=int(d["cols"]),
            inter_electrode_distance=float(d["ied_m"]),
            missing_pads=tuple((int(p[0]), int(p[1])) for p in pads))
        t = d.get("trim", {}) or {}
        trim = TrimPolicy(mode=str(t.get("mode", "fixed")),
                          fixed_trim=float(t.get("fixed_trim_s", 0.5)),
                          force_fraction=float(t.get("force_fraction", 0.5)))
        target = d.get("target_force_n")
        meta = TrialMetadata(
            subject_id=str(d["subject_id"]),
            mvc_percent=int(d["mvc_percent"]),
            condition=str(d["condition"]),
            sampling_rate=float(d["sampling_rate_hz"]),
            target_force=None if target is None else float(target),
            trim=trim)
    except (TypeError, ValueError, IndexError, KeyError) as exc:
        raise MalformedFile(f"bad metadata value: {exc}") from exc
    return geometry, meta


# --------------------------------------------------------------------------
# CSV ingestion

def _parse_header(line: str, geometry: GridGeometry) -> tuple[list[int], bool]:
    names = [n.strip() for n in line.rstrip("\r\n").split(",")]
    if not names or names[0] != "t":
        raise MalformedFile("header must start with 't'")
    has_force = names[-1] == "force"
    electrodes = names[1:-1] if has_force else names[1:]
    n_declared = geometry.n_channels
    if len(electrodes) != n_declared:
        raise MetadataMismatch(
            f"metadata declares {n_declared} electrodes, file has {len(electrodes)}")
    idx = []
    for name in electrodes:
        m = _ELECTRODE_RE.match(name)
        if not m:
            raise MalformedFile(f"bad column name {name!r}")
        r, c = int(m.group(1)), int(m.group(2))
        if not (0 <= r < geometry.rows and 0 <= c < geometry.cols):
            raise MetadataMismatch(f"column {name} lies outside the declared grid")
        if geometry.is_missing(r, c):
            raise MetadataMismatch(f"column {name} is declared as a missing pad")
        idx.append(geometry.index(r, c))
    if len(set(idx)) != len(idx):
        raise MalformedFile("duplicate electrode columns")
    return idx, has_force


def load_trial(signal_path, meta_path) -> GridRecording:
    """Read a trial CSV and its JSON sidecar into a validated recording."""
    try:
        with open(meta_path, encoding="utf-8") as f:
            meta_dict = json.load(f)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"metadata is not valid JSON: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise MalformedFile(f"metadata is not UTF-8: {exc}") from exc
    except OSError as exc:
        raise MalformedFile(f"cannot read metadata: {exc}") from exc
    geometry, meta = metadata_from_dict(meta_dict)

    try:
        with open(signal_path, encoding="utf-8") as f:
            header = f.readline()
            columns, has_force = _parse_header(header, geometry)
            n_cols = 1 + len(columns) + int(has_force)
            with warnings.catch_warnings():
                # an empty body is reported below as MalformedFile
                warnings.simplefilter("ignore", UserWarning)
                data = np.loadtxt(f, delimiter=",", dtype=float, ndmin=2)
    except UnicodeDecodeError as exc:
        raise MalformedFile(f"signal file is not UTF-8: {exc}") from exc
    except ValueError as exc:
        raise MalformedFile(f"cannot parse signal file: {exc}") from exc
    except OSError as exc:
        raise MalformedFile(f"cannot read signal file: {exc}") from exc

    if data.size == 0:
        raise MalformedFile("signal file has no samples")
    if data.shape[1] != n_cols:
        raise MalformedFile(f"expected {n_cols} columns per row, got {data.shape[1]}")
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))[0]
        raise NonFiniteSample(f"non-finite value at data row {bad[0] + 1}, column {bad[1]}")
    if data.shape[0] > 1 and np.any(np.diff(data[:, 0]) <= 0):
        raise MalformedFile("time column is not strictly increasing")
    if data.shape[0] < MIN_LOAD_SECONDS * meta.sampling_rate:
        raise MalformedFile(
            f"recording has {data.shape[0]} samples, needs at least "
            f"{MIN_LOAD_SECONDS:g} s at {meta.sampling_rate:g} Hz")

    samples = np.zeros((data.shape[0], geometry.n_positions))
    samples[:, columns] = data[:, 1:1 + len(columns)]
    force = data[:, -1] if has_force else None
    return GridRecording(geometry=geometry, meta=meta, samples=samples,
                         force=force, t0=float(data[0, 0]))


def save_trial(rec: GridRecording, signal_path, meta_path, digits: int = 12) -> None:
    """Write ``rec`` as CSV + JSON sidecar (inverse of :func:`load_trial`)."""
    g = rec.geometry
    pads = g.present_pads()
    cols = [g.index(r, c) for r, c in pads]
    names = ["t"] + [f"e_{r}_{c}" for r, c in pads]
    t = rec.t0 + np.arange(rec.n_samples) / rec.rate
    blocks = [t[:, None], rec.samples[:, cols]]
    if rec.force is not None:
        names.append("force")
        blocks.append(rec.force[:, None])
    table = np.hstack(blocks)
    fmt = ["%.9f"] + [f"%.{digits}g"] * (table.shape[1] - 1)
    with open(signal_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(names) + "\n")
        np.savetxt(f, table, fmt=fmt, delimiter=",", newline="\n")
    with open(meta_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(metadata_to_dict(g, rec.meta), f, indent=2, sort_keys=True)
        f.write("\n")


# --------------------------------------------------------------------------
# trimming

def _longest_run(mask: np.ndarray) -> tuple[int, int]:
    """(start, stop) of the longest run of True; first one wins ties."""
    if not mask.any():
        return 0, 0
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    starts, stops = edges[::2], edges[1::2]
    k = int(np.argmax(stops - starts))
    return int(starts[k]), int(stops[k])


def _force_region(force: np.ndarray, fraction: float, max_iter: int = 50) -> tuple[int, int]:
    start, stop = 0, len(force)
    for _ in range(max_iter):
        f = force[start:stop]
        if f.size == 0:
            break
        upper = f[f >= np.percentile(f, 75)]
        threshold = fraction * np.median(upper)
        a, b = _longest_run(f >= threshold)
        if (a, b) == (0, len(f)):
            break
        start, stop = start + a, start + b
    return start, stop


def trim_active_region(rec: GridRecording) -> GridRecording:
    """Drop the unsteady ends of a contraction.

    ``fixed`` removes ``fixed_trim`` seconds from each end. ``force_threshold``
    keeps the longest run where force is at least ``force_fraction`` times the
    median of the force's upper quartile; the rule is re-applied to the kept
    region until it stops changing, so trimming twice is a no-op.
    """
    policy = rec.meta.trim
    fs = rec.rate
    if policy.mode == "fixed":
        k = int(round(policy.fixed_trim * fs))
        start, stop = k, rec.n_samples - k
    else:
        if rec.force is None:
            raise MetadataMismatch("force_threshold trimming needs a force channel")
        start, stop = _force_region(rec.force, policy.force_fraction)
    if stop - start < MIN_REGION_SECONDS * fs - 1e-9:
        raise RegionTooShort(
            f"active region is {(max(stop - start, 0)) / fs:.3f} s, "
            f"needs at least {MIN_REGION_SECONDS:g} s")
    return rec.slice(start, stop)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


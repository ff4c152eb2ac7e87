"""Analysis configuration.

Configuration files use one ``key = value`` pair per line; ``#`` starts a
comment and blank lines are ignored. Keys are the long CLI flag names without
the leading dashes (``-`` and ``_`` are interchangeable)::

    band = 20:400
    filter-order = 4
    iz-index = auto        # or an SD channel index
    select-k = 3
    column = auto          # or a grid column index
    psd-seg = 256
    psd-overlap = 0.5
    corr-threshold = 0.75
    cv-range = 2:8
    epoch-len = 0.5
    epoch-gap = 1.0
    psd-window = 1.0

Values given on the command line override the file, which overrides the
built-in defaults.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Optional

from .cv import CVConfig
from .errors import ConfigError
from .features import PSD_OVERLAP, PSD_SEGMENT
from .preprocess import BandSpec
from .timecourse import EpochPlan


@dataclass(frozen=True)
class AnalysisConfig:
    band: tuple[float, float] = (20.0, 400.0)
    filter_order: int = 4
    iz_index: Optional[int] = None
    select_k: int = 3
    column: Optional[int] = None
    psd_seg: int = PSD_SEGMENT
    psd_overlap: float = PSD_OVERLAP
    corr_threshold: float = 0.75
    cv_range: tuple[float, float] = (2.0, 8.0)
    epoch_len: float = 0.5
    epoch_gap: float = 1.0
    psd_window: float = 1.0

    def __post_init__(self):
        lo, hi = self.band
        if not 0 < lo < hi:
            raise ConfigError(f"band must satisfy 0 < low < high, got {lo}:{hi}")
        if self.filter_order < 1:
            raise ConfigError("filter-order must be >= 1")
        if self.select_k < 3:
            raise ConfigError("select-k must be >= 3")
        if self.psd_seg < 8:
            raise ConfigError("psd-seg must be >= 8 samples")
        if not 0 <= self.psd_overlap < 1:
            raise ConfigError("psd-overlap must lie in [0, 1)")
        if not 0 < self.corr_threshold < 1:
            raise ConfigError("corr-threshold must lie in (0, 1)")
        if not 0 < self.cv_range[0] < self.cv_range[1]:
            raise ConfigError("cv-range must satisfy 0 < min < max")
        try:
            self.epoch_plan()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def band_spec(self) -> BandSpec:
        return BandSpec(self.band[0], self.band[1], self.filter_order)

    def epoch_plan(self) -> EpochPlan:
        return EpochPlan(self.epoch_len, self.epoch_gap, self.psd_window)

    def cv_config(self, ied: float) -> CVConfig:
        return CVConfig(ied=ied, cv_min=self.cv_range[0], cv_max=self.cv_range[1],
                        corr_threshold=self.corr_threshold)

    def snapshot(self) -> dict:
        d = asdict(self)
        d["band"] = list(self.band)
        d["cv_range"] = list(self.cv_range)
        d["iz_index"] = "auto" if self.iz_index is None else self.iz_index
        d["column"] = "auto" if self.column is None else self.column
        return d

    @classmethod
    def from_snapshot(cls, d: dict) -> "AnalysisConfig":
        return cls().merged(d)

    def merged(self, raw: dict[str, Any]) -> "AnalysisConfig":
        """Copy with ``raw`` (flag name -> string or value) applied on top."""
        changes = {}
        for key, value in raw.items():
            name = _canonical(key)
            changes[name] = _PARSERS[name](value)
        try:
            return replace(self, **changes)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _canonical(key: str) -> str:
    name = key.strip().lstrip("-").replace("-", "_")
    if name not in _PARSERS:
        raise ConfigError(f"unknown configuration key {key!r}")
    return name


def _number(kind):
    def parse(v):
        try:
            x = kind(v) if not isinstance(v, str) else kind(v.strip())
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"expected {kind.__name__}, got {v!r}") from exc
        if isinstance(x, float) and not math.isfinite(x):
            raise ConfigError(f"expected a finite number, got {v!r}")
        return x
    return parse


def _range(v):
    if isinstance(v, (list, tuple)):
        parts = list(v)
    else:
        parts = str(v).split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected LOW:HIGH, got {v!r}")
    lo, hi = (_number(float)(p) for p in parts)
    return (lo, hi)


def _auto_int(v):
    if v is None or (isinstance(v, str) and v.strip().lower() == "auto"):
        return None
    return _number(int)(v)


_PARSERS = {
    "band": _range,
    "filter_order": _number(int),
    "iz_index": _auto_int,
    "select_k": _number(int),
    "column": _auto_int,
    "psd_seg": _number(int),
    "psd_overlap": _number(float),
    "corr_threshold": _number(float),
    "cv_range": _range,
    "epoch_len": _number(float),
    "epoch_gap": _number(float),
    "psd_window": _number(float),
}
assert set(_PARSERS) == {f.name for f in fields(AnalysisConfig)}


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        out[_canonical(key)] = value
    return out


def load_config(path=None, overrides: Optional[dict[str, Any]] = None) -> AnalysisConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (None values skipped)."""
    cfg = AnalysisConfig()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                text = f.read()
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        cfg = cfg.merged(parse_config_text(text))
    if overrides:
        cfg = cfg.merged({k: v for k, v in overrides.items() if v is not None})
    return cfg

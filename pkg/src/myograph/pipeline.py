"""End-to-end trial and session analysis.

Reports are plain JSON-ready dicts; every figure/table also has a flat CSV
rendering (see :func:`write_session`).
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__, features, kernels
from . import preprocess as pp
from . import timecourse as tc
from .config import AnalysisConfig
from .cv import average_cv
from .errors import ColumnOutOfRange, DuplicateTrialLevel, MalformedFile, MyographError
from .signal_model import (
    CONDITIONS,
    GridRecording,
    file_sha256,
    load_trial,
    metadata_from_dict,
    trim_active_region,
)

CONDITION_LABEL = {"before_fatigue": "", "fatigue": " fatigue", "after_fatigue": " after-fatigue"}


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except MyographError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def _f(x) -> Optional[float]:
    """JSON-safe float (non-finite -> None)."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _fl(xs) -> list:
    return [_f(x) for x in xs]


def trial_label(mvc_percent: int, condition: str) -> str:
    return f"{mvc_percent}%MVC{CONDITION_LABEL[condition]}"


def _sort_key(mvc_percent: int, condition: str):
    return (CONDITIONS.index(condition), mvc_percent)


def thread_count() -> int:
    env = os.environ.get("MYOGRAPH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


# --------------------------------------------------------------------------
# single trial

def analyze_recording(rec: GridRecording, config: AnalysisConfig = AnalysisConfig()) -> dict:
    """Full analysis of an in-memory recording (no provenance block)."""
    band = config.band_spec()
    plan = config.epoch_plan()
    seg, ovl = config.psd_seg, config.psd_overlap

    with stage("trim"):
        active = trim_active_region(rec)
    with stage("filter"):
        filtered = pp.bandpass(active, band)
    with stage("montage"):
        if config.column is None:
            column = pp.auto_column(filtered)
        else:
            column = config.column
            if not 0 <= column < rec.geometry.cols:
                raise ColumnOutOfRange(f"column {column} outside 0..{rec.geometry.cols - 1}")
        sd = pp.single_differential(filtered, column)
        dd = pp.double_differential(sd)
    cv_cfg = config.cv_config(rec.geometry.inter_electrode_distance)
    with stage("innervation_zone"):
        iz = pp.detect_innervation_zone(sd, cv_min=cv_cfg.cv_min)
        if config.iz_index is not None:
            if not 0 <= config.iz_index < sd.n_channels:
                raise ColumnOutOfRange(
                    f"iz-index {config.iz_index} outside 0..{sd.n_channels - 1}")
            iz = pp.IZReport(iz.column, config.iz_index, iz.pair_scores, iz.channel_scores)
        selected = pp.select_channels(sd, iz, config.select_k)
        dd_selected = pp.dd_channels_for(selected)

    fs = sd.rate
    with stage("features"):
        per_channel = [features.feature_set(sd.channels[:, c], fs, band, segment=seg,
                                            overlap=ovl) for c in selected]
        whole_psd = features.mean_psd([fset.psd for fset in per_channel], normalize=True)
    with stage("timecourse"):
        series = tc.epoch_series(sd, dd, selected, plan, cv_cfg, band, seg, ovl)
        snaps = tc.psd_snapshots(sd, selected, plan, band, seg, ovl)
        trend = tc.trend_report(series, snaps)
    cv_mean, n_acc = average_cv(series.estimates)

    return {
        "trial": {
            "subject_id": rec.meta.subject_id,
            "mvc_percent": rec.meta.mvc_percent,
            "condition": rec.meta.condition,
            "label": trial_label(rec.meta.mvc_percent, rec.meta.condition),
            "duration_s": _f(rec.duration),
            "active_region_s": [_f(active.t0 - rec.t0), _f(active.t0 - rec.t0 + active.duration)],
        },
        "decisions": {
            "column": column,
            "column_auto": config.column is None,
            "iz_index": iz.iz_index,
            "iz_auto": config.iz_index is None,
            "iz_pair_scores": _fl(iz.pair_scores),
            "selected_sd_channels": selected,
            "dd_channels": dd_selected,
            "rejected_cv_epochs": [int(i) for i in np.flatnonzero(~series.cv_accepted)],
        },
        "whole_signal": {
            "rms_mv": _f(np.mean([fs_.rms for fs_ in per_channel])),
            "mnf_hz": _f(np.mean([fs_.mnf for fs_ in per_channel])),
            "mdf_hz": _f(np.mean([fs_.mdf for fs_ in per_channel])),
            "per_channel": {
                "rms_mv": _fl(fs_.rms for fs_ in per_channel),
                "mnf_hz": _fl(fs_.mnf for fs_ in per_channel),
                "mdf_hz": _fl(fs_.mdf for fs_ in per_channel),
            },
            "epoch_mean": {
                "rms_mv": _f(np.mean(series.rms)),
                "mnf_hz": _f(np.mean(series.mnf)),
            },
            "cv_mean_mps": _f(cv_mean),
            "cv_n_accepted": n_acc,
            "cv_n_epochs": len(series),
            "psd": {"freqs_hz": _fl(whole_psd.freqs), "power": _fl(whole_psd.power),
                    "resolution_hz": _f(whole_psd.resolution)},
        },
        "epochs": {
            "times_s": _fl(series.times),
            "mnf_hz": _fl(series.mnf),
            "rms_mv": _fl(series.rms),
            "theta_s": _fl(e.theta for e in series.estimates),
            "cv_mps": _fl(series.cv),
            "cv_accepted": [bool(a) for a in series.cv_accepted],
            "dd_correlation": _fl(series.cv_correlation),
            "sd_correlation": _fl(series.sd_correlation),
        },
        "trend": {
            "mnf_slope_hz_per_s": _f(trend.mnf_slope),
            "mnf_intercept_hz": _f(trend.mnf_intercept),
            "rms_slope_mv_per_s": _f(trend.rms_slope),
            "rms_intercept_mv": _f(trend.rms_intercept),
            "cv_slope_mps_per_s": _f(trend.cv_slope),
            "cv_intercept_mps": _f(trend.cv_intercept),
            "n_epochs_used": trend.n_epochs_used,
            "n_cv_epochs_used": trend.n_cv_epochs_used,
            "snapshot_mnf_hz": {k: _f(v) for k, v in trend.snapshot_mnf.items()},
            "psd_snapshots": {
                "freqs_hz": _fl(snaps["onset"].freqs),
                **{k: _fl(v.power) for k, v in snaps.items()},
            },
        },
    }


def _provenance(config: AnalysisConfig, inputs: dict) -> dict:
    return {
        "tool": "myograph",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config": config.snapshot(),
        "inputs": inputs,
    }


def _input_hashes(signal_path, meta_path) -> dict:
    return {
        "signal": {"name": os.path.basename(signal_path), "sha256": file_sha256(signal_path)},
        "meta": {"name": os.path.basename(meta_path), "sha256": file_sha256(meta_path)},
    }


def analyze_trial(signal_path, meta_path, config: AnalysisConfig = AnalysisConfig()) -> dict:
    """Load, analyse and annotate one trial with provenance."""
    with stage("load"):
        rec = load_trial(signal_path, meta_path)
    report = analyze_recording(rec, config)
    report["provenance"] = _provenance(config, _input_hashes(signal_path, meta_path))
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# session

def read_manifest(path) -> list[tuple[str, str]]:
    """(signal, meta) path pairs from a session manifest, resolved relative to it."""
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"cannot read manifest: {exc}") from exc
    trials = doc.get("trials") if isinstance(doc, dict) else None
    if not isinstance(trials, list) or not trials:
        raise MalformedFile("manifest needs a non-empty 'trials' list")
    base = os.path.dirname(os.path.abspath(path))
    out = []
    for t in trials:
        if not (isinstance(t, dict) and isinstance(t.get("signal"), str)
                and isinstance(t.get("meta"), str)):
            raise MalformedFile("each manifest trial needs 'signal' and 'meta' paths")
        out.append((os.path.join(base, t["signal"]), os.path.join(base, t["meta"])))
    return out


def _trial_level(meta_path) -> tuple[int, str]:
    try:
        with open(meta_path, encoding="utf-8") as f:
            d = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"cannot read metadata {meta_path}: {exc}") from exc
    _, meta = metadata_from_dict(d)
    return meta.mvc_percent, meta.condition


def analyze_session(trials: Sequence[tuple[str, str]], config: AnalysisConfig = AnalysisConfig(),
                    threads: Optional[int] = None) -> dict:
    """Analyse every trial and assemble cross-trial tables ordered by
    condition (before, fatigue, after) then MVC level."""
    if not trials:
        raise MalformedFile("session has no trials")
    levels = {}
    with stage("load"):
        for sig, meta in trials:
            key = _trial_level(meta)
            if key in levels:
                raise DuplicateTrialLevel(
                    f"two trials at {key[0]} %MVC {key[1]}: {levels[key][1]} and {meta}")
            levels[key] = (sig, meta)
    ordered = sorted(levels.items(), key=lambda kv: _sort_key(*kv[0]))

    threads = threads or thread_count()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        reports = list(pool.map(lambda kv: analyze_trial(kv[1][0], kv[1][1], config), ordered))
    for r in reports:
        r.pop("provenance")

    inputs = [_input_hashes(sig, meta) for _, (sig, meta) in ordered]
    return {
        "trials": reports,
        "tables": {"levels": level_table(reports), "slopes": slope_table(reports)},
        "provenance": _provenance(config, inputs),
    }


def level_table(reports: Iterable[dict]) -> list[dict]:
    """Indicator value per MVC level (whole-signal and epoch-mean)."""
    rows = []
    for r in reports:
        w = r["whole_signal"]
        rows.append({
            "label": r["trial"]["label"],
            "mvc_percent": r["trial"]["mvc_percent"],
            "condition": r["trial"]["condition"],
            "rms_mv": w["rms_mv"],
            "mnf_hz": w["mnf_hz"],
            "mdf_hz": w["mdf_hz"],
            "rms_epoch_mean_mv": w["epoch_mean"]["rms_mv"],
            "mnf_epoch_mean_hz": w["epoch_mean"]["mnf_hz"],
            "cv_mean_mps": w["cv_mean_mps"],
            "cv_n_accepted": w["cv_n_accepted"],
        })
    return rows


def slope_table(reports: Iterable[dict]) -> list[dict]:
    """Per-second slopes of MNF, RMS and CV over contraction time."""
    rows = []
    for r in reports:
        t = r["trend"]
        rows.append({
            "label": r["trial"]["label"],
            "mvc_percent": r["trial"]["mvc_percent"],
            "condition": r["trial"]["condition"],
            "mnf_slope_hz_per_s": t["mnf_slope_hz_per_s"],
            "rms_slope_mv_per_s": t["rms_slope_mv_per_s"],
            "cv_slope_mps_per_s": t["cv_slope_mps_per_s"],
            "n_epochs_used": t["n_epochs_used"],
            "n_cv_epochs_used": t["n_cv_epochs_used"],
        })
    return rows


def _csv_text(header: list[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def session_csvs(session: dict) -> dict[str, str]:
    """Flat CSV renderings keyed by file name."""
    out = {}
    for name in ("levels", "slopes"):
        rows = session["tables"][name]
        header = list(rows[0].keys())
        out[f"{name}.csv"] = _csv_text(header, ([r[h] for h in header] for r in rows))

    trials = session["trials"]
    labels = [t["trial"]["label"] for t in trials]
    freqs = trials[0]["whole_signal"]["psd"]["freqs_hz"]
    cols = [t["whole_signal"]["psd"]["power"] for t in trials]
    out["psd_levels.csv"] = _csv_text(
        ["freq_hz"] + labels, ([f] + [c[i] for c in cols] for i, f in enumerate(freqs)))

    def snap_rows():
        for t in trials:
            s = t["trend"]["psd_snapshots"]
            for window in ("onset", "middle", "end"):
                for f, p in zip(s["freqs_hz"], s[window]):
                    yield [t["trial"]["label"], window, f, p]
    out["psd_snapshots.csv"] = _csv_text(["label", "window", "freq_hz", "power"], snap_rows())
    return out


def write_session(session: dict, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    files = {"session.json": dumps(session), **session_csvs(session)}
    paths = []
    for name, text in files.items():
        p = os.path.join(out_dir, name)
        with open(p, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        paths.append(p)
    return paths

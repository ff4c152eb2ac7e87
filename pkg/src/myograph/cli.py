"""Command-line interface.

    myograph analyze --meta m.json --signal s.csv [flags] --out report.json
    myograph session --manifest session.json --out dir/ [flags]
    myograph synth --spec spec.json --out dir/
    myograph synth --protocol --out dir/

Exit codes: 0 success, 2 input error, 3 analysis error (including a trial
whose CV epochs were all rejected), 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import load_config
from .errors import MyographError
from .errors import SpecInvalid


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("analysis settings (override --config)")
    g.add_argument("--config", help="key=value configuration file")
    g.add_argument("--band", help="band-pass corners LOW:HIGH in Hz (20:400)")
    g.add_argument("--filter-order", help="Butterworth order (4)")
    g.add_argument("--iz-index", help="innervation-zone SD index or 'auto'")
    g.add_argument("--select-k", help="number of SD channels for CV (3)")
    g.add_argument("--column", help="grid column or 'auto'")
    g.add_argument("--psd-seg", help="Welch segment length in samples (256)")
    g.add_argument("--psd-overlap", help="Welch segment overlap fraction (0.5)")
    g.add_argument("--corr-threshold", help="CV acceptance correlation (0.75)")
    g.add_argument("--cv-range", help="physiological CV bracket MIN:MAX in m/s (2:8)")
    g.add_argument("--epoch-len", help="epoch length in s (0.5)")
    g.add_argument("--epoch-gap", help="epoch spacing in s (1.0)")
    g.add_argument("--psd-window", help="onset/middle/end PSD window in s (1.0)")


_FLAG_KEYS = ("band", "filter_order", "iz_index", "select_k", "column", "psd_seg",
              "psd_overlap", "corr_threshold", "cv_range", "epoch_len", "epoch_gap",
              "psd_window")


def _config(args):
    return load_config(args.config, {k: getattr(args, k) for k in _FLAG_KEYS})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="myograph", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"myograph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyse one trial")
    a.add_argument("--meta", required=True, help="JSON metadata sidecar")
    a.add_argument("--signal", required=True, help="trial CSV")
    a.add_argument("--out", help="report path (default: stdout)")
    _add_analysis_flags(a)

    s = sub.add_parser("session", help="analyse a manifest of trials")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True, help="output directory")
    _add_analysis_flags(s)

    y = sub.add_parser("synth", help="write synthetic trials")
    src = y.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="synthetic spec JSON")
    src.add_argument("--protocol", action="store_true",
                     help="write the seven-trial protocol dataset and a manifest")
    y.add_argument("--out", required=True, help="output directory")
    y.add_argument("--name", default="synth", help="file stem for --spec output")
    return parser


def _cmd_analyze(args) -> int:
    from .pipeline import analyze_trial, dumps

    report = analyze_trial(args.signal, args.meta, _config(args))
    text = dumps(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if report["whole_signal"]["cv_n_accepted"] == 0:
        print("error: every CV epoch was rejected by the correlation gate", file=sys.stderr)
        return 3
    return 0


def _cmd_session(args) -> int:
    from .pipeline import analyze_session, read_manifest, write_session

    session = analyze_session(read_manifest(args.manifest), _config(args))
    for p in write_session(session, args.out):
        print(p)
    if all(t["whole_signal"]["cv_n_accepted"] == 0 for t in session["trials"]):
        print("error: every CV epoch of every trial was rejected", file=sys.stderr)
        return 3
    return 0


def _cmd_synth(args) -> int:
    from .signal_model import save_trial
    from .synth import SynthSpec, generate, make_protocol_dataset, write_manifest

    if args.protocol:
        paths = make_protocol_dataset(args.out)
        manifest = os.path.join(args.out, "manifest.json")
        write_manifest(paths, manifest)
        paths.append(manifest)
    else:
        try:
            with open(args.spec, encoding="utf-8") as f:
                spec = SynthSpec.from_dict(json.load(f))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SpecInvalid(f"cannot read synth spec: {exc}") from exc
        rec = generate(spec)
        os.makedirs(args.out, exist_ok=True)
        stem = os.path.join(args.out, args.name)
        save_trial(rec, stem + ".csv", stem + ".json")
        paths = [stem + ".csv", stem + ".json"]
    for p in paths:
        print(p)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"analyze": _cmd_analyze, "session": _cmd_session, "synth": _cmd_synth}
    try:
        return handler[args.command](args)
    except MyographError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # invariant violation somewhere below
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

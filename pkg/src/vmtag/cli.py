"""Command-line front end: ``vmtag analyze|annotate|synth|matrix``.

Exit codes: 0 clean, 1 input or parse error, 2 analysis finished with
diagnostics, 3 matrix does not match the expected pattern.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .annotator import MarkerCollision, MarkerSpec, annotate
from .cfg import module_to_dot
from .detector import VmEndMode, detect
from .ir import IrError, IrModule, parse_module, print_module
from .report import (Report, default_samples, evaluate, grid_json, is_clean,
                     load_corpus, render_grid)
from .synth import InvalidConfig, Mode, SynthConfig, generate, merge_transform

EXIT_OK, EXIT_ERROR, EXIT_DIAGNOSTICS, EXIT_MISMATCH = 0, 1, 2, 3


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # registered on the main parser and every subparser, so flags may come
    # before or after the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=("json", "text"), default=d(None))
    p.add_argument("--out", type=Path, default=d(None), help="write output here instead of stdout")
    p.add_argument("--dot", type=Path, default=d(None), help="also write the CFGs as DOT")
    p.add_argument("--vm-end-mode", choices=[m.value for m in VmEndMode],
                   default=d(VmEndMode.REACHABILITY.value))
    p.add_argument("--marker-prefix", default=d(None),
                   help="prefix for marker callee names (default __vmtag)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmtag", parents=[_global_flags(False)],
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"vmtag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    flags = _global_flags(True)

    p = sub.add_parser("analyze", parents=[flags], help="detect VM structures in an IR file")
    p.add_argument("path", type=Path)

    p = sub.add_parser("annotate", parents=[flags], help="insert marker calls")
    p.add_argument("path", type=Path)

    p = sub.add_parser("synth", parents=[flags], help="generate a synthetic virtualized module")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="switch")
    p.add_argument("--handlers", type=int, default=12)
    p.add_argument("--exits", type=int, default=1)
    p.add_argument("--body-blocks", type=int, default=1)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--plain", type=int, default=2)
    p.add_argument("--merge", action="store_true", help="apply the block-merging transform")
    p.add_argument("--no-funnel", action="store_true",
                   help="threaded handlers chain directly, without a shared dispatch block")

    p = sub.add_parser("matrix", parents=[flags], help="reproduce the detection matrix")
    p.add_argument("--modes", default="switch,direct,indirect",
                   help="comma-separated dispatch modes")
    p.add_argument("--corpus-dir", type=Path, default=None,
                   help="evaluate .vmir/.truth.json pairs instead of generating")
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _load(path: Path) -> IrModule:
    return parse_module(path.read_text(), str(path))


def _marker_spec(args) -> MarkerSpec:
    return MarkerSpec.with_prefix(args.marker_prefix) if args.marker_prefix else MarkerSpec()


def cmd_analyze(args) -> int:
    t0 = time.perf_counter()
    m = _load(args.path)
    results = detect(m, VmEndMode(args.vm_end_mode))
    report = Report(__version__, str(args.path), results,
                    (time.perf_counter() - t0) * 1000.0)
    _emit(report.to_text() if args.format == "text" else report.to_json() + "\n", args.out)
    if args.dot:
        args.dot.write_text(module_to_dot(m))
    return EXIT_OK if is_clean(results) else EXIT_DIAGNOSTICS


def cmd_annotate(args) -> int:
    m = _load(args.path)
    results = detect(m, VmEndMode(args.vm_end_mode))
    annotated = annotate(m, results, _marker_spec(args))
    _emit(print_module(annotated), args.out)
    if args.dot:
        args.dot.write_text(module_to_dot(m))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig(Mode(args.mode), args.handlers, args.exits, args.body_blocks,
                      args.seed, args.plain, funnel=not args.no_funnel)
    m, truth = generate(cfg)
    if args.merge:
        m = merge_transform(m)
    text = print_module(m)
    meta = {**truth.to_dict(), "mode": cfg.mode.value, "merged": args.merge,
            "funnel": cfg.funnel, "seed": cfg.seed}
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
        side = args.out.with_suffix(".truth.json")
        side.write_text(json.dumps(meta, indent=2) + "\n")
    if args.dot:
        args.dot.write_text(module_to_dot(m))
    return EXIT_OK


def cmd_matrix(args) -> int:
    if args.corpus_dir is not None:
        samples = load_corpus(args.corpus_dir)
        if not samples:
            raise OSError(f"no .vmir files in {args.corpus_dir}")
    else:
        modes = [s.strip() for s in args.modes.split(",") if s.strip()]
        samples = default_samples(modes)
    cells = [evaluate(s, VmEndMode(args.vm_end_mode)) for s in samples]
    _emit(grid_json(cells) + "\n" if args.format == "json" else render_grid(cells), args.out)
    return EXIT_OK if all(c.ok for c in cells) else EXIT_MISMATCH


COMMANDS = {"analyze": cmd_analyze, "annotate": cmd_annotate,
            "synth": cmd_synth, "matrix": cmd_matrix}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, IrError, MarkerCollision, InvalidConfig, ValueError, KeyError) as e:
        print(f"vmtag: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

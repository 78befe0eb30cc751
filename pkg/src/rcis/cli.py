"""Command-line entry point ``rcis``.

    rcis run <config.json> [--progress] [--out DIR] [--refine-level]
    rcis oracle <config.json> --resolution R [--out DIR]
    rcis export <report.json> --format {cells_csv,cells_json,hull_csv} [--output FILE]

Exit status: 0 on a completed run (an empty result included), 2 for
configuration or usage errors, 3 when the dynamics fail to evaluate.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from rcis.algorithms import run
from rcis.config import ConfigError, load_config
from rcis.dynamics import EvaluationError
from rcis.export import FORMATS, cells_csv, export_results, load_covering, write_report
from rcis.interval import IntervalError
from rcis.oracle import grid_discriminating_kernel, to_pgm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EVALUATION = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rcis", description="Robust control invariant sets via symbolic images.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the outer or inner subdivision algorithm")
    r.add_argument("config")
    r.add_argument("--progress", action="store_true", help="print one JSON object per iteration to stdout")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--refine-level", action="store_true", help="iterate the robust selection to a fixed point")

    o = sub.add_parser("oracle", help="grid discriminating-kernel reference")
    o.add_argument("config")
    o.add_argument("--resolution", type=int, required=True)
    o.add_argument("--out", help="directory for kernel.pgm and kernel.json")

    e = sub.add_parser("export", help="convert a run report into cells or hull files")
    e.add_argument("report")
    e.add_argument("--format", choices=FORMATS, required=True)
    e.add_argument("--output", help="file to write (default: stdout)")
    return p


def _fail(code: int, message: str) -> int:
    print(f"rcis: error: {message}", file=sys.stderr)
    return code


def _cmd_run(args) -> int:
    try:
        cfg_file = load_config(args.config)
        model = cfg_file.model()
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    cfg = cfg_file.run_config
    if args.refine_level:
        cfg = replace(cfg, refine_level=True)
    out_cfg = cfg_file["output"]
    out = Path(args.out or out_cfg["dir"])
    out.mkdir(parents=True, exist_ok=True)
    progress_path = out / out_cfg["progress"]
    with open(progress_path, "w") as log:

        def on_iteration(rec):
            line = json.dumps({"iteration": rec.iteration, "cells": rec.cells, "diameter": rec.diameter})
            log.write(line + "\n")
            log.flush()
            if args.progress:
                print(line, flush=True)

        try:
            report = run(model, cfg, on_iteration)
        except (EvaluationError, IntervalError, FloatingPointError) as exc:
            return _fail(EXIT_EVALUATION, f"evaluation failed: {exc}")
    (out / out_cfg["cells"]).write_text(cells_csv(report.covering))
    write_report(report, out / out_cfg["report"])
    summary = {
        "termination": report.termination,
        "iterations": report.iterations,
        "cells": len(report.covering),
        "volume": report.covering.volume,
        "out": str(out),
    }
    if not args.progress:
        print(json.dumps(summary))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    try:
        cfg_file = load_config(args.config)
        model = cfg_file.model()
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    if args.resolution < 2:
        return _fail(EXIT_CONFIG, "--resolution must be at least 2")
    try:
        kernel = grid_discriminating_kernel(model, args.resolution, cfg_file.run_config.sampler)
    except (EvaluationError, IntervalError) as exc:
        return _fail(EXIT_EVALUATION, f"evaluation failed: {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    summary = {
        "resolution": list(kernel.resolution),
        "iterations": kernel.iterations,
        "cells": int(kernel.members.sum()),
        "volume": kernel.volume,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "kernel.json").write_text(json.dumps(summary, indent=2) + "\n")
        if kernel.members.ndim <= 2:
            (out / "kernel.pgm").write_text(to_pgm(kernel))
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_export(args) -> int:
    try:
        covering = load_covering(args.report)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(EXIT_CONFIG, f"cannot read report: {exc}")
    try:
        text = export_results(covering, args.format)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "oracle": _cmd_oracle, "export": _cmd_export}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())

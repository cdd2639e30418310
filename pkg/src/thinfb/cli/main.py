"""Command-line entry point: ``thinfb run | verify | report``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3
SUITE_NAMES = ("exact", "energy", "solve", "analysis", "all")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _set_threads(n) -> None:
    # must run before numpy/scipy load their BLAS
    if n is not None:
        for v in THREAD_VARS:
            os.environ[v] = str(n)


def _global_flags(p: argparse.ArgumentParser, default) -> None:
    # accepted before or after the subcommand; the subparser copies never override
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction,
                   default=True if default is None else default,
                   help="single-threaded BLAS so records are bit-reproducible (default on)")
    p.add_argument("--threads", type=int, default=default, help="BLAS/OpenMP thread count")
    p.add_argument("--output-dir", default=default,
                   help="directory for run outputs and the ledger")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinfb", description="Thin one-phase free-boundary lab")
    _global_flags(p, None)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run an experiment config")
    r.add_argument("config")
    v = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    v.add_argument("suite")
    v.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="override the thin-term weight")
    v.add_argument("--json", default=None, help="write the results as JSON here")
    rp = sub.add_parser("report", parents=[common],
                        help="summarize a CSV ledger as markdown")
    rp.add_argument("ledger")
    rp.add_argument("-o", "--output", default=None, help="write the summary here (default stdout)")
    return p


def cmd_run(args) -> int:
    from ..energy import DefectSolverFailure, UnderResolvedError
    from ..exact import FootPointError
    from ..generators import GeneratorError
    from ..solve import FieldFormatError, InfeasibleConstraintError, SolverError
    from .config import ConfigError, load_config
    from .pipeline import PipelineError, run_experiment

    try:
        cfg = load_config(args.config)
        record = run_experiment(cfg, args.output_dir)
    except (ConfigError, GeneratorError, FieldFormatError, UnderResolvedError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, InfeasibleConstraintError, DefectSolverFailure, FootPointError,
            PipelineError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = Path(args.output_dir or cfg.output_dir) / cfg.experiment
    print(f"{cfg.experiment}: {len(record['diagnostics'])} diagnostics -> {out}")
    for rec in record["diagnostics"]:
        print(f"  {rec['diagnostic']}: {json.dumps(rec['outputs'], sort_keys=True)[:200]}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITE_NAMES:
        print(f"error: unknown suite {args.suite!r}; expected one of {SUITE_NAMES}",
              file=sys.stderr)
        return EXIT_INVALID
    from ..acceptance import run_suite
    from ..analysis.records import dumps, jsonable
    from ..energy import LAMBDA_DEFAULT

    lam = LAMBDA_DEFAULT if args.lam is None else args.lam
    print(f"{'criterion':<52} {'pass':<5} bound")

    def show(res):
        print(f"{res.id:>2} {res.name:<49} {'yes' if res.passed else 'NO':<5} {res.bound}")
        print(f"   measured: {json.dumps(jsonable(res.measured), sort_keys=True)[:300]}")
        sys.stdout.flush()

    results = run_suite(args.suite, lam, callback=show)
    failed = [r for r in results if not r.passed]
    if args.json:
        Path(args.json).write_text(dumps({"suite": args.suite, "lambda": lam,
                                          "results": [r.to_json() for r in results]}),
                                   encoding="utf-8")
    if failed:
        print("FAILED: " + ", ".join(f"{r.id} ({r.name})" for r in failed))
        return EXIT_FAIL
    print(f"all {len(results)} criteria passed")
    return EXIT_OK


def render_report(good: list, bad: list, base: Path) -> str:
    """Markdown summary: one section per (config hash, experiment) run."""
    runs = {}
    for row in good:
        runs.setdefault((row["experiment"], row["config_hash"]), []).append(row)
    out = []
    if runs or bad:
        out.append("# Experiment summary\n")
    for (exp, h), rows in runs.items():
        out.append(f"## {exp} (`{h[:12]}`)\n")
        out.append("| diagnostic | key | value | bound | passed |")
        out.append("|---|---|---|---|---|")
        for r in rows:
            out.append(f"| {r['diagnostic']} | {r['key']} | {r['value']} | {r['bound']} | "
                       f"{r['passed']} |")
        out.append("")
        rec_path = base / rows[0]["record"]
        if rec_path.is_file():
            try:
                files = json.loads(rec_path.read_text(encoding="utf-8")).get("files", [])
            except (OSError, json.JSONDecodeError):
                files = []
            for f in files:
                if f.endswith(".svg"):
                    out.append(f"![{f}]({Path(rows[0]['record']).parent / f})")
            out.append("")
    if bad:
        out.append("## Skipped rows\n")
        for line, why in bad:
            out.append(f"- line {line}: {why}")
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def cmd_report(args) -> int:
    from ..analysis.records import read_ledger

    path = Path(args.ledger)
    if not path.is_file():
        print(f"error: ledger {path} does not exist", file=sys.stderr)
        return EXIT_INVALID
    good, bad = read_ledger(path)
    text = render_report(good, bad, path.parent)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if bad:
        print(f"skipped {len(bad)} malformed row(s)", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INVALID
    _set_threads(args.threads if args.threads is not None else (1 if args.deterministic else None))
    return {"run": cmd_run, "verify": cmd_verify, "report": cmd_report}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

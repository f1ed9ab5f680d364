"""
Greedy approximation workbench — command-line interface.

Usage
-----
    python main.py [global options] <command> [options]

Commands
--------
    run CONFIG          run every experiment of a JSON config; writes trace CSVs
                        and report JSON under --out
    oracle              best m-term error σ_m of a signal over a dictionary
    lemmas LEMMA [k=v]  simulate a sequence lemma (N=<horizon> sets the length)
    recover             QOGA exact-recovery table over coherent dictionaries
    bilinear            rank-one greedy residuals against the singular-value tail

Examples
--------
    # Run a batch of experiments with a fixed seed
    python main.py --seed 7 --out results run configs/rate_bounds.json

    # σ_1 of (1, 0.5, 0.25) over the canonical basis of ℓ_2^3
    python main.py oracle --canonical 3 --values 1,0.5,0.25 --m 1

    # Lemma check as JSON
    python main.py --format json lemmas LeL1 C1=1 C2=1 N=100000

    # Recovery table at p = 2, n = 24, N = 32
    python main.py recover --dim 24 --size 32 --mixes 0.05,0.1 --trials 50

    # Rank-one greedy on a matrix file
    python main.py bilinear --matrix data/kernel.txt --m 4

Exit codes: 0 all hard checks pass, 2 a hard bound is violated, 1 error.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from greedy.bilinear import pga_rank_one, schmidt_expansion
from greedy.cache import ConstantCache
from greedy.config import ExperimentConfig, RunConfig, load_config
from greedy.dictionary import make_canonical
from greedy.errors import GreedyError
from greedy.fileio import (
    read_dictionary,
    read_matrix,
    read_signal,
    report_json,
    rows_to_csv,
    write_report_json,
    write_trace_csv,
)
from greedy.harness import ExperimentRunner, Report
from greedy.lemmas import RecursionSpec, simulate_recursion
from greedy.oracle import best_m_term, best_m_term_seminorm
from greedy.space import SpaceLp

logger = logging.getLogger("greedy.cli")

EXIT_OK        = 0
EXIT_ERROR     = 1
EXIT_VIOLATION = 2

_BILINEAR_TOL = 1e-8


# ---------------------------------------------------------------------------
# Logging setup
# ---------------------------------------------------------------------------

def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        format="%(asctime)s  %(levelname)-8s  %(message)s",
        datefmt="%H:%M:%S",
        level=level,
    )


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _emit(command: str, rows: List[dict], fmt: str, extra: Optional[dict] = None) -> None:
    if fmt == "json":
        payload = {"command": command, "rows": rows}
        payload.update(extra or {})
        print(report_json(payload))
    else:
        print(rows_to_csv(rows))


def _floats(text: str) -> List[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", label).strip("_")


def _write_report(report: Report, out_dir: Path) -> Path:
    exp_dir = out_dir / _slug(report.experiment)
    for index, label, trace in report.traces():
        write_trace_csv(trace, exp_dir / "traces" / f"{_slug(label)}-r{index:03d}.csv")
    return write_report_json(report.to_dict(), exp_dir / "report.json")


def _exit_code(reports: List[Report]) -> int:
    if any(r.errors for r in reports):
        return EXIT_ERROR
    if any(r.hard_violation for r in reports):
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_run(args: argparse.Namespace) -> int:
    config: RunConfig = load_config(Path(args.config))
    seed = args.seed if args.seed is not None else (config.seed or 0)
    out_dir = Path(args.out or config.out or "results")
    cache_path = args.cache or config.cache
    cache = ConstantCache(Path(cache_path)) if cache_path else None

    runner = ExperimentRunner(seed=seed, workers=args.workers, cache=cache)
    reports: List[Report] = []
    rows: List[dict] = []
    for exp in config.experiments:
        report = runner.run(exp)
        path = _write_report(report, out_dir)
        logger.info("Report written to %s", path)
        reports.append(report)
        rows.append({
            "experiment":    report.experiment,
            "kind":          report.kind,
            "replications":  report.summary["replications"],
            "errors":        report.errors,
            "hard_checks":   report.summary["hard_checks"],
            "hard_failures": report.summary["hard_failures"],
            "trend_failures": report.summary["trend_failures"],
            "passed":        report.passed,
        })
    write_report_json({"seed": seed, "experiments": rows}, out_dir / "summary.json")
    _emit("run", rows, args.format, {"seed": seed})
    return _exit_code(reports)


def cmd_oracle(args: argparse.Namespace) -> int:
    if args.dictionary:
        dictionary = read_dictionary(Path(args.dictionary))
    else:
        dictionary = make_canonical(SpaceLp(dim=args.canonical, p=args.p))
    f = read_signal(Path(args.signal)) if args.signal else np.array(_floats(args.values))
    if args.seminorm:
        result = best_m_term_seminorm(dictionary, f, args.m)
    else:
        result = best_m_term(dictionary.space, dictionary, f, args.m)
    row = {
        "m":       args.m,
        "sigma":   result.value,
        "exact":   result.exact,
        "support": " ".join(str(i) for i in result.support),
        "norm":    "seminorm" if args.seminorm else "norm",
    }
    _emit("oracle", [row], args.format, {"certificate": result.certificate})
    return EXIT_OK


def _lemma_params(pairs: List[str]) -> Dict[str, float]:
    params: Dict[str, float] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"expected NAME=VALUE, got {pair!r}")
        params[key.strip()] = float(value)
    return params


def cmd_lemmas(args: argparse.Namespace) -> int:
    params = _lemma_params(args.params)
    horizon = int(params.pop("N", args.horizon))
    spec = RecursionSpec(args.lemma, params, horizon, args.phi)
    rows = []
    for adversarial in (True, False):
        rep = simulate_recursion(spec, adversarial=adversarial, seed=args.seed,
                                 replications=1 if adversarial else args.replications)
        row = rep.to_dict()
        row.pop("extra")
        row["mode"] = "adversarial" if adversarial else "randomized"
        rows.append(row)
    _emit("lemmas", rows, args.format, {"spec": spec.to_dict()})
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_VIOLATION


def cmd_recover(args: argparse.Namespace) -> int:
    exp = ExperimentConfig.model_validate({
        "id":         "recover",
        "kind":       "recovery",
        "space":      {"dim": args.dim, "p": args.p},
        "dictionary": {"kind": "coherent", "size": args.size},
        "recovery":   {
            "mixes":      _floats(args.mixes),
            "weakness":   _floats(args.weakness),
            "sparsities": [int(s) for s in _floats(args.sparsities)],
            "trials":     args.trials,
            "lebesgue":   not args.no_lebesgue,
        },
    })
    runner = ExperimentRunner(seed=args.seed or 0, workers=args.workers)
    report = runner.recovery_table(exp)
    if args.out:
        _write_report(report, Path(args.out))
    _emit("recover", report.tables["recovery"], args.format, {"summary": report.summary})
    return _exit_code([report])


def cmd_bilinear(args: argparse.Namespace) -> int:
    if args.matrix:
        matrix = read_matrix(Path(args.matrix))
    else:
        matrix = np.diag(_floats(args.diag))
    m = args.m or min(matrix.shape)
    result = pga_rank_one(matrix, m, seed=args.seed or 0)
    s = np.array([term.c for term in schmidt_expansion(matrix)])
    norms = result.trace.residual_norms()
    rows = []
    for k in range(1, len(norms)):
        tail = float(np.sqrt(np.sum(s[k:] ** 2)))
        rows.append({"m": k, "residual": float(norms[k]), "tail": tail, "delta": abs(float(norms[k]) - tail)})
    _emit("bilinear", rows, args.format, {"shape": list(matrix.shape)})
    scale = max(float(np.linalg.norm(matrix)), 1.0)
    return EXIT_OK if all(r["delta"] <= _BILINEAR_TOL * scale for r in rows) else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Greedy approximation in ℓ_p: algorithms, rate bounds and oracles.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--seed", type=int, default=None, metavar="INT",
                        help="Root seed; overrides the config seed. (default: config or 0)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="Format of the summary printed on stdout. (default: csv)")
    parser.add_argument("--out", metavar="DIR",
                        help="Output directory for traces and reports. (default: config or ./results)")
    parser.add_argument("--cache", metavar="FILE",
                        help="SQLite cache of structural constants and σ_m values.")
    parser.add_argument("--workers", type=int, default=1, metavar="N",
                        help="Replications run on N threads. (default: 1)")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logs.")

    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run a JSON experiment config.")
    p_run.add_argument("config", help="Path to the config file.")
    p_run.set_defaults(func=cmd_run)

    p_oracle = sub.add_parser("oracle", help="Best m-term error of a signal.")
    src = p_oracle.add_mutually_exclusive_group(required=True)
    src.add_argument("--dictionary", metavar="FILE", help="GREEDYDICT v1 file.")
    src.add_argument("--canonical", type=int, metavar="N", help="Canonical basis of ℓ_p^N.")
    p_oracle.add_argument("--p", type=float, default=2.0, help="p for --canonical. (default: 2)")
    sig = p_oracle.add_mutually_exclusive_group(required=True)
    sig.add_argument("--signal", metavar="FILE", help="GREEDYSIG v1 file.")
    sig.add_argument("--values", metavar="LIST", help="Comma-separated coordinates.")
    p_oracle.add_argument("--m", type=int, required=True, help="Number of terms.")
    p_oracle.add_argument("--seminorm", action="store_true", help="Use the D-seminorm instead of the norm.")
    p_oracle.set_defaults(func=cmd_oracle)

    p_lem = sub.add_parser("lemmas", help="Simulate a sequence lemma.")
    p_lem.add_argument("lemma", help="Lemma id, e.g. LeL1.")
    p_lem.add_argument("params", nargs="*", metavar="NAME=VALUE", help="Lemma parameters; N sets the horizon.")
    p_lem.add_argument("--horizon", type=int, default=1000, help="Sequence length. (default: 1000)")
    p_lem.add_argument("--phi", default="power", help="φ family for LeL5 / LeL6. (default: power)")
    p_lem.add_argument("--replications", type=int, default=100, help="Random sequences. (default: 100)")
    p_lem.set_defaults(func=cmd_lemmas)

    p_rec = sub.add_parser("recover", help="QOGA exact-recovery table.")
    p_rec.add_argument("--dim", type=int, default=24)
    p_rec.add_argument("--p", type=float, default=2.0)
    p_rec.add_argument("--size", type=int, default=32, help="Dictionary size N.")
    p_rec.add_argument("--mixes", default="0.05,0.1,0.2", help="Coherence mixes. (default: 0.05,0.1,0.2)")
    p_rec.add_argument("--weakness", default="1,0.5", help="Weakness values t. (default: 1,0.5)")
    p_rec.add_argument("--sparsities", default="1,2,3,4", help="Sparsity levels S. (default: 1,2,3,4)")
    p_rec.add_argument("--trials", type=int, default=20)
    p_rec.add_argument("--no-lebesgue", action="store_true", help="Skip the D-seminorm constant check.")
    p_rec.set_defaults(func=cmd_recover)

    p_bil = sub.add_parser("bilinear", help="Rank-one greedy against the SVD tail.")
    mat = p_bil.add_mutually_exclusive_group(required=True)
    mat.add_argument("--matrix", metavar="FILE", help="GREEDYMAT v1 file.")
    mat.add_argument("--diag", metavar="LIST", help="Diagonal matrix from comma-separated values.")
    p_bil.add_argument("--m", type=int, default=None, help="Number of terms. (default: min(n1, n2))")
    p_bil.set_defaults(func=cmd_bilinear)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"Error: invalid config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (FileNotFoundError, ValueError, GreedyError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001
        print(f"Unexpected error: {exc}", file=sys.stderr)
        logging.exception("Traceback:")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: verify / bench / train / invert.

Exit codes are uniform across subcommands: 0 success, 1 numerical or
assertion failure, 2 usage error.  CSV output uses '.' decimals,
shortest-roundtrip float formatting (Python repr) and LF line endings so
files re-ingest losslessly; JSON reports carry a top-level schema version.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .experiments import (
    SUITE_CHECKS,
    SUITES,
    BenchSpec,
    TrainSpec,
    run_bench,
    run_training,
    run_verification,
)
from .householder import random_orthogonal
from .invertible import NewtonConfig, build_weights, newton_inverse
from .reflection import AuxReflection
from .rng import SeededRng


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("AUXREF_THREADS", "1")))
    except ValueError:
        return 1


def _parse_d_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}")
    if not values or any(d < 2 for d in values):
        raise argparse.ArgumentTypeError("dimensions must be integers >= 2")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auxref",
        description="Input-dependent reflection layers: verification, "
                    "benchmark, training demo and Newton inversion demo.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_verify = sub.add_parser("verify", help="run numerical invariant suites")
    p_verify.add_argument("--suite", choices=SUITES, default="all")
    p_verify.add_argument("--d", type=_parse_d_list, default=(2, 4, 8),
                          metavar="D1,D2,...")
    p_verify.add_argument("--trials", type=int, default=50)
    p_verify.add_argument("--seed", type=int, default=42)
    p_verify.add_argument("--tol", type=float, default=None,
                          help="override every check tolerance in the suite")
    p_verify.add_argument("--json", dest="json_path", default=None, metavar="PATH")

    p_bench = sub.add_parser("bench", help="time reflection chain vs single layer")
    p_bench.add_argument("--d", type=int, default=64)
    p_bench.add_argument("--k", type=int, default=None,
                         help="chain length (default: d)")
    p_bench.add_argument("--batch", type=int, default=256)
    p_bench.add_argument("--reps", type=int, default=10)
    p_bench.add_argument("--warmup", type=int, default=5)
    p_bench.add_argument("--threads", type=int, default=_default_threads())
    p_bench.add_argument("--seed", type=int, default=42)
    p_bench.add_argument("--out", default=None, metavar="CSV")

    p_train = sub.add_parser("train", help="fit a layer to a target orthogonal map")
    p_train.add_argument("--d", type=int, default=8)
    p_train.add_argument("--steps", type=int, default=3000)
    p_train.add_argument("--lr", type=float, default=0.1)
    p_train.add_argument("--batch", type=int, default=64)
    p_train.add_argument("--target-k", type=int, default=None,
                         help="reflections composing the target (default: d)")
    p_train.add_argument("--seed", type=int, default=42)
    p_train.add_argument("--out", default=None, metavar="CSV")

    p_invert = sub.add_parser("invert", help="invert one forward evaluation")
    p_invert.add_argument("--d", type=int, default=4)
    p_invert.add_argument("--seed", type=int, default=42)
    group = p_invert.add_mutually_exclusive_group()
    group.add_argument("--constrained", action="store_true", default=True,
                       help="spectrally normalized symmetric weights (default)")
    group.add_argument("--orthogonal", action="store_true",
                       help="weights representing a random orthogonal map")
    p_invert.add_argument("--tol", type=float, default=1e-10)
    p_invert.add_argument("--max-iters", type=int, default=50)
    return parser


def cmd_verify(args) -> int:
    overrides = None
    if args.tol is not None:
        overrides = {name: args.tol for name in SUITE_CHECKS["all"]}
    report = run_verification(args.suite, args.d, args.trials, args.seed,
                              overrides)
    width = max(len(c.name) for c in report.checks)
    print(f"suite={report.suite} d={','.join(map(str, report.d_list))} "
          f"trials={report.trials} seed={report.seed}")
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"  {c.name:<{width}}  {status}  max_error={c.max_error:.3e}  "
              f"tol={c.tol:.3e}")
    print("all checks passed" if report.passed else "CHECK FAILURE")
    if args.json_path is not None:
        try:
            with open(args.json_path, "w", newline="\n") as fh:
                json.dump(report.to_dict(), fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            print(f"error: cannot write {args.json_path}: {exc}", file=sys.stderr)
            return 1
    return 0 if report.passed else 1


def cmd_bench(args) -> int:
    spec = BenchSpec(d=args.d, k=args.k if args.k is not None else args.d,
                     batch=args.batch, reps=args.reps, warmup=args.warmup,
                     seed=args.seed)
    records = run_bench(spec, threads=args.threads)
    by_method = {r.method: r for r in records}
    speedup = by_method["chain"].mean_ms / by_method["auxiliary"].mean_ms
    for r in records:
        print(f"{r.method:<9}  mean={r.mean_ms:.3f} ms  std={r.std_ms:.3f} ms  "
              f"checksum={r.checksum!r}")
    print(f"speedup chain/auxiliary = {speedup:.3f}")
    if args.out is not None:
        header = ["method", "d", "k", "batch", "reps", "threads",
                  "mean_ms", "std_ms", "checksum"]
        rows = [(r.method, r.d, r.k, r.batch, r.reps, r.threads,
                 r.mean_ms, r.std_ms, r.checksum) for r in records]
        try:
            _write_csv(args.out, header, rows)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 1
    return 0


def cmd_train(args) -> int:
    spec = TrainSpec(d=args.d, steps=args.steps, lr=args.lr, batch=args.batch,
                     seed=args.seed, target_k=args.target_k)
    trace = run_training(spec)
    if args.out is not None:
        try:
            _write_csv(args.out, ["step", "loss", "grad_norm"], trace.rows)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 1
    if trace.resampled:
        print(f"resampled {trace.resampled} degenerate batch columns")
    for step, loss, gnorm in trace.rows:
        if not (math.isfinite(loss) and math.isfinite(gnorm)):
            print(f"error: non-finite loss at step {step}", file=sys.stderr)
            return 1
    print(f"final loss = {trace.rows[-1][1]!r}")
    return 0


def cmd_invert(args) -> int:
    rng = SeededRng(args.seed)
    if args.orthogonal:
        layer = AuxReflection.from_orthogonal(random_orthogonal(args.d, rng))
        kind = "orthogonal"
    else:
        layer = build_weights(rng.standard_normal((args.d, args.d))).reflection
        kind = "constrained"
    x_true = rng.standard_normal(args.d)
    y = layer.forward(x_true)
    print(f"{kind} weights, d={args.d}, seed={args.seed}")
    print(f"x = {x_true!r}")
    print(f"y = f(x) = {y!r}")
    cfg = NewtonConfig(max_iters=args.max_iters, tol=args.tol)

    def trace(i, x_i, residual):
        print(f"[{i:02d}/{cfg.max_iters:02d}] ||x_i|| = {np.linalg.norm(x_i):.12f}  "
              f"residual = {residual:.3e}")

    result = newton_inverse(layer, y, cfg, callback=trace)
    err = float(np.max(np.abs(result.x - x_true)))
    print(f"iterations = {result.iters_used}  final residual = {result.final_residual!r}")
    print(f"max abs reconstruction error = {err!r}")
    if err <= args.tol:
        return 0
    print(f"error: reconstruction error {err!r} exceeds tol {args.tol!r}",
          file=sys.stderr)
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "bench":
        if args.reps < 3:
            parser.error("--reps must be >= 3")
        if args.d < 2 or (args.k is not None and args.k < 1) or args.batch < 1:
            parser.error("--d must be >= 2, --k >= 1, --batch >= 1")
        if args.warmup < 0 or args.threads < 1:
            parser.error("--warmup must be >= 0, --threads >= 1")
    if args.subcommand == "train":
        if args.d < 2 or args.steps < 1 or args.batch < 1 or args.lr < 0:
            parser.error("--d must be >= 2, --steps >= 1, --batch >= 1, --lr >= 0")
    if args.subcommand == "verify" and args.trials < 1:
        parser.error("--trials must be >= 1")
    if args.subcommand == "invert":
        if args.d < 2 or args.max_iters < 1 or not args.tol > 0:
            parser.error("--d must be >= 2, --max-iters >= 1, --tol > 0")
    handlers = {"verify": cmd_verify, "bench": cmd_bench,
                "train": cmd_train, "invert": cmd_invert}
    return handlers[args.subcommand](args)


if __name__ == "__main__":
    sys.exit(main())

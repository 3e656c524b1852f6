"""Command line interface: ``shredmat <command> ...``.

Exit codes: 0 success, 1 usage error, 2 I/O or file format error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from pathlib import Path

from . import analytic, harness
from .core import FormatError, SampleParams, read_instance, read_matrix, sample_matrix, shred, write_instance, write_matrix
from .oracle import InconsistentInstance, oracle_classify
from .reconstruct import InvariantViolation, ReconstructConfig, Tag, reconstruct

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _cmd_shred(args) -> int:
    write_instance(shred(read_matrix(args.input)), args.out)
    return EXIT_OK


def _cmd_sample(args) -> int:
    write_matrix(sample_matrix(SampleParams(args.n, args.p, args.seed)), args.out)
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    inst = read_instance(args.input)
    result = reconstruct(inst, ReconstructConfig(max_depth=args.max_depth, residual_cap=args.residual_cap))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if result.tag is Tag.UNIQUE:
        write_matrix(result.matrix, out / "matrix.txt")
    elif result.tag is Tag.NONRECONSTRUCTIBLE:
        write_matrix(result.witness[0], out / "witness_a.txt")
        write_matrix(result.witness[1], out / "witness_b.txt")
    else:
        (out / "residual.txt").write_text(result.residual.to_text(inst))
    print(result.tag.value)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    inst = read_instance(args.input)
    try:
        verdict = oracle_classify(inst)
    except InconsistentInstance as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(verdict.to_json())
    return EXIT_OK


def _frange(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0:
        raise UsageError("--step must be positive")
    if hi < lo:
        raise UsageError("--c-max must be at least --c-min")
    count = int((hi - lo) / step + 1e-9) + 1
    return [lo + k * step for k in range(count)]


def _cmd_thresholds(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["c", "p_weak", "p_strong", "limit_weak", "limit_strong"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", analytic.ClampWarning)
        for c in _frange(args.c_min, args.c_max, args.step):
            w.writerow(
                [
                    f"{c:.6g}",
                    f"{analytic.p_weak(args.n, c):.8g}",
                    f"{analytic.p_strong(args.n, c):.8g}",
                    f"{analytic.limit_weak_reconstructible(c):.8g}",
                    f"{analytic.limit_strong_reconstructible(c):.8g}",
                ]
            )
    return EXIT_OK


def _cmd_experiment(args) -> int:
    try:
        config = harness.ExperimentConfig(
            regime=args.regime,
            n_values=args.n,
            c_values=args.c,
            trials=args.trials,
            master_seed=args.seed,
            jobs=args.jobs,
            out=Path(args.out),
            p_scale=args.p_scale,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = harness.run_experiment(config)
    for r in report.records:
        print(f"{r.regime} n={r.n} c={r.c:g} p={r.p:.6g}: observed {r.frac_observed:.4f} predicted {r.frac_predicted:.4f}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    try:
        rows = harness.bench_scaling(args.n, seeds=list(range(args.seeds)))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print("n,mean_s,ratio,flagged")
    for r in rows:
        print(f"{r.n},{r.mean_s:.6f},{'' if r.ratio is None else f'{r.ratio:.3f}'},{int(r.flagged)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shredmat", description="Reconstruct binary matrices from their row and column multisets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("shred", help="matrix file -> instance file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_shred)

    p = sub.add_parser("sample", help="write a random Bernoulli matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("reconstruct", help="instance file -> matrix, witness pair or residual report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--max-depth", type=int, choices=(1, 2, 3), default=2)
    p.add_argument("--residual-cap", type=int, default=ReconstructConfig.residual_cap)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("oracle", help="exhaustive classification of a small instance")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("thresholds", help="threshold densities and limiting probabilities as CSV")
    p.add_argument("--c-min", type=float, required=True)
    p.add_argument("--c-max", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.set_defaults(func=_cmd_thresholds)

    p = sub.add_parser("experiment", help="Monte Carlo experiment written as CSV")
    p.add_argument("--regime", choices=harness.REGIMES, required=True)
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--c", type=float, nargs="+", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--p-scale", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("bench", help="reconstruct time at doubling n, p = ln(n)/n")
    p.add_argument("--n", type=int, nargs="+", default=[1024, 2048, 4096])
    p.add_argument("--seeds", type=int, default=3)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits with 0; anything else is a usage error
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

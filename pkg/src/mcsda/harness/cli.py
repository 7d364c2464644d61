"""Command-line front end.

Five subcommands: ``gen-data`` writes a synthetic domain pair to CSV,
``train`` runs one experiment on such a file, ``theory-check`` runs the
brute-force verification suite, ``surface`` dumps a disagreement surface,
and ``pac-report`` assembles the finite-sample bound on a data file.

Exit codes: 0 on success, 2 when a theory check or bound fails, 3 when
training does not converge.  Argument defaults mirror the library
defaults; ``train`` can also read a JSON config file, with explicit
command-line flags taking precedence over file values.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..divergence import BoundViolation, SampleSet, ScorerGrid, linear_scorer, pac_bound_report
from ..synthdata import gen_gauss_blobs, gen_rotated_moons, make_openset, make_partial, read_csv, write_csv
from .config import METHODS, ExperimentConfig
from .surface import SURFACE_MEASURES, emit_surface_grid
from .theory import run_theory_checks
from .trainers import run_experiment

__all__ = ["main"]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _cmd_gen_data(args) -> int:
    if args.generator == "moons":
        pair = gen_rotated_moons(
            args.n_src, args.n_tgt, args.angle, noise_sd=args.noise, seed=args.seed
        )
    else:
        pair = gen_gauss_blobs(
            args.k,
            args.n_per_class,
            shift_vector=_float_list(args.shift),
            seed=args.seed,
            std=args.std,
            radius=args.radius,
        )
    if args.mode == "partial":
        if not args.kept:
            raise SystemExit("--kept is required for partial mode")
        pair = make_partial(pair, _int_list(args.kept))
    elif args.mode == "openset":
        if not (args.shared and args.src_extra and args.tgt_extra):
            raise SystemExit("--shared, --src-extra and --tgt-extra are required for openset mode")
        pair = make_openset(
            pair, _int_list(args.shared), _int_list(args.src_extra), _int_list(args.tgt_extra)
        )
    write_csv(pair, args.out)
    print(
        "wrote %s (%s, k=%d, k_shared=%d, %d source / %d target points)"
        % (args.out, pair.mode, pair.k, pair.k_shared, pair.source.n, pair.target.n)
    )
    return 0


_TRAIN_OVERRIDES = (
    "method",
    "rho",
    "epochs",
    "batch_size",
    "seed",
    "zeta",
    "xi",
    "nu",
    "aux_task_weight",
    "eval_head",
    "outdir",
)


def _cmd_train(args) -> int:
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    for name in _TRAIN_OVERRIDES:
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    if args.eta0 is not None:
        sched = dict(data.get("schedules", {}))
        sched["eta0"] = args.eta0
        data["schedules"] = sched
    if args.zeta_on_adversary:
        data["zeta_on_adversary"] = True
    data.setdefault("method", "source_only")
    cfg = ExperimentConfig.from_json(data)
    pair = read_csv(args.data)
    result = run_experiment(pair, cfg)
    line = "%s seed=%d converged=%s source_acc=%.4f target_acc=%.4f" % (
        result.method,
        result.seed,
        result.converged,
        result.final_source_acc,
        result.final_target_acc,
    )
    if result.os_all is not None:
        line += " os_all=%.4f os_shared=%.4f unknown=%.4f" % (
            result.os_all,
            result.os_shared,
            result.unknown_acc,
        )
    print(line)
    for note in result.notes:
        print("note: %s" % note)
    return 0 if result.converged else 3


def _cmd_theory_check(args) -> int:
    report = run_theory_checks(seed=args.seed, trials=args.trials, n_universes=args.universes)
    for check in report.checks:
        print("%-32s %s" % (check.name, "PASS" if check.passed else "FAIL"))
        if not check.passed:
            print("    %s" % json.dumps(check.details, sort_keys=True, default=str))
    if args.out:
        report.write(args.out)
        print("report written to %s" % args.out)
    print("all checks passed" if report.all_passed else "THEORY CHECKS FAILED")
    return 0 if report.all_passed else 2


def _cmd_surface(args) -> int:
    grid = emit_surface_grid(
        args.which,
        args.rho,
        resolution=args.resolution,
        span=args.span,
        fixed=tuple(_float_list(args.fixed)),
        direction=args.direction,
    )
    grid.write_csv(args.out)
    print(
        "wrote %s (%s, rho=%g, %dx%d values in [%g, %g])"
        % (
            args.out,
            args.which,
            args.rho,
            grid.values.shape[0],
            grid.values.shape[1],
            grid.values.min(),
            grid.values.max(),
        )
    )
    return 0


def _cmd_pac_report(args) -> int:
    pair = read_csv(args.data)
    tgt = SampleSet(pair.target.points, pair.eval_target_labels())
    rng = np.random.default_rng(args.seed)
    spread = max(float(pair.source.points.std()), 1e-6)
    scorers = [
        linear_scorer(
            rng.normal(0.0, 1.0 / spread, size=(pair.k, pair.source.points.shape[1])),
            rng.normal(0.0, 0.5, size=pair.k),
        )
        for _ in range(args.grid_size)
    ]
    grid = ScorerGrid(scorers, pair.k)
    try:
        report = pac_bound_report(
            pair.source,
            tgt,
            grid,
            rho=args.rho,
            delta=args.delta,
            sigma_draws=args.sigma_draws,
            seed=args.seed,
        )
    except BoundViolation as exc:
        print("BOUND VIOLATED: %s" % exc)
        return 2
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_json(), fh, indent=2)
            fh.write("\n")
        print("report written to %s" % args.out)
    print(
        "target_err=%.4f <= rhs=%.4f (divergence=%.4f, lambda=%.4f, holds=%s)"
        % (report.lhs_target_err, report.rhs_total, report.divergence, report.lambda_joint, report.holds)
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcsda",
        description="Margin-based scoring disagreement: data, training, checks, surfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic domain pair to CSV")
    g.add_argument("--out", required=True)
    g.add_argument("--generator", choices=("moons", "blobs"), default="moons")
    g.add_argument("--mode", choices=("closed", "partial", "openset"), default="closed")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-src", type=int, default=600, help="moons: source sample size")
    g.add_argument("--n-tgt", type=int, default=600, help="moons: target sample size")
    g.add_argument("--angle", type=float, default=30.0, help="moons: target rotation, degrees")
    g.add_argument("--noise", type=float, default=0.1, help="moons: coordinate noise sd")
    g.add_argument("--k", type=int, default=4, help="blobs: class count")
    g.add_argument("--n-per-class", type=int, default=150, help="blobs: points per class")
    g.add_argument("--shift", default="1.0,0.5", help="blobs: target mean shift, comma separated")
    g.add_argument("--std", type=float, default=1.0, help="blobs: per-class sd")
    g.add_argument("--radius", type=float, default=4.0, help="blobs: class-mean ring radius")
    g.add_argument("--kept", default=None, help="partial: classes the target keeps, e.g. 1,2")
    g.add_argument("--shared", default=None, help="openset: shared classes, e.g. 1,2,3")
    g.add_argument("--src-extra", default=None, help="openset: source-only classes")
    g.add_argument("--tgt-extra", default=None, help="openset: target-only (unknown) classes")
    g.set_defaults(func=_cmd_gen_data)

    t = sub.add_parser("train", help="run one experiment on a data CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--config", default=None, help="JSON config; flags below override it")
    t.add_argument("--method", choices=METHODS, default=None)
    t.add_argument("--rho", type=float, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--batch-size", type=int, dest="batch_size", default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--zeta", type=float, default=None)
    t.add_argument("--xi", type=float, default=None)
    t.add_argument("--nu", type=float, default=None)
    t.add_argument("--eta0", type=float, default=None, help="base learning rate")
    t.add_argument("--aux-task-weight", type=float, dest="aux_task_weight", default=None)
    t.add_argument("--eval-head", choices=("auto", "f", "fs", "ft"), dest="eval_head", default=None)
    t.add_argument("--zeta-on-adversary", action="store_true", dest="zeta_on_adversary")
    t.add_argument("--outdir", default=None)
    t.set_defaults(func=_cmd_train)

    c = sub.add_parser("theory-check", help="run the brute-force verification suite")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--trials", type=int, default=2000)
    c.add_argument("--universes", type=int, default=20)
    c.add_argument("--out", default=None, help="optional JSON report path")
    c.set_defaults(func=_cmd_theory_check)

    s = sub.add_parser("surface", help="dump one disagreement surface to CSV")
    s.add_argument("--out", required=True)
    s.add_argument("--which", choices=SURFACE_MEASURES, required=True)
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--resolution", type=int, default=121)
    s.add_argument("--span", type=float, default=15.0)
    s.add_argument("--fixed", default="10,-5,-5", help="pinned scores, comma separated")
    s.add_argument("--direction", choices=("fix_first", "fix_second"), default="fix_first")
    s.set_defaults(func=_cmd_surface)

    p = sub.add_parser("pac-report", help="finite-sample bound report on a data CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--grid-size", type=int, dest="grid_size", default=12)
    p.add_argument("--sigma-draws", type=int, dest="sigma_draws", default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=_cmd_pac_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

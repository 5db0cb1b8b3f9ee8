"""Command-line entry point: ``randsearch {run,sweep-batch,sweep-beta,verify,plan}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .datasets import DataError
from .diagnostics import run_all_checks, write_report
from .directions import DirectionDistribution, DirectionKind, estimate_mu
from .harness import CONVERTERS, ConfigError, build_objective, load_config, run_experiment, sweep_batch, sweep_beta
from .objectives import estimate_constants
from .rng import stream
from .search import NumericalAbort, PlanRegime, plan_parameters

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would collide with the data-error code
    def error(self, message):
        raise ConfigError(message)


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    for key, conv in CONVERTERS.items():
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, dest=key, type=conv, default=None, help=f"{key} (see README)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="randsearch", description="Sign-of-difference random search experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="multi-trial budgeted run of one method")
    _add_experiment_flags(p)

    p = sub.add_parser("sweep-batch", help="all methods across batch sizes at equal per-panel budget")
    _add_experiment_flags(p)
    p.add_argument("--methods", default="mi2p,rsgf,zocd")
    p.add_argument("--batch-sizes", default="1,5,10,25,50,100")

    p = sub.add_parser("sweep-beta", help="momentum variant across beta")
    _add_experiment_flags(p)
    p.add_argument("--variant", default="heavyball", choices=["heavyball", "mvr", "transport"])
    p.add_argument("--betas", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")

    p = sub.add_parser("verify", help="run the diagnostic checks, write report.csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results")
    p.add_argument("--full", action="store_true", help="include the slow VR and helper checks")

    p = sub.add_parser("plan", help="estimate constants and print the planned step size, iterations and batch")
    _add_experiment_flags(p)
    p.add_argument("--regime", default="sample-smooth", choices=[r.value for r in PlanRegime])
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--probe-points", type=int, default=200)
    return parser


def _config(args):
    overrides = {k: getattr(args, k) for k in CONVERTERS}
    return load_config(args.config, overrides)


def _csv_list(s, conv):
    try:
        return [conv(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad list {s!r}: {exc}") from None


def cmd_run(args) -> int:
    cfg = _config(args)
    curve = run_experiment(cfg)
    print(f"{cfg.method} b={cfg.b} eta={curve.eta!r} final f = {curve.final_mean:.6g} +- {curve.final_sd:.3g}")
    return EXIT_OK


def cmd_sweep_batch(args) -> int:
    cfg = _config(args)
    methods = _csv_list(args.methods, str)
    for m in methods:
        cfg.replace(method=m)  # validates the method name before any run starts
    curves = sweep_batch(cfg, methods, _csv_list(args.batch_sizes, int))
    for c in curves:
        print(f"b={c.b:<4d} {c.method:<20s} eta={c.eta:<10.4g} final f = {c.final_mean:.6g} +- {c.final_sd:.3g}")
    return EXIT_OK


def cmd_sweep_beta(args) -> int:
    cfg = _config(args)
    betas = _csv_list(args.betas, float)
    if any(not 0 < b <= 1 for b in betas):
        raise ConfigError("betas must lie in (0, 1]")
    for beta, mean, sd in sweep_beta(cfg, betas, args.variant):
        print(f"beta={beta:<5g} final f = {mean:.6g} +- {sd:.3g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    reports = run_all_checks(args.seed, full=args.full)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(reports, out / "report.csv")
    for r in reports:
        print(r.line())
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _config(args)
    obj, x0 = build_objective(cfg)
    rng = stream(cfg.seed, 0, "diagnostic")
    dist = DirectionDistribution(DirectionKind(cfg.direction), obj.dim)
    g = obj.full_gradient(x0)
    mu = estimate_mu(dist, g, 100_000, rng) if g.any() else None
    c = estimate_constants(obj, args.probe_points, rng, x0=x0, mu_D=mu)
    plan = plan_parameters(args.regime, c, args.epsilon, obj.n, obj.dim, delta=cfg.delta)
    lines = [f"regime = {args.regime}", f"epsilon = {args.epsilon!r}", f"n = {obj.n}", f"d = {obj.dim}"]
    for k in ("L0", "L1", "G", "sigma0", "sigma1", "F0", "mu_D"):
        lines.append(f"{k} = {getattr(c, k)!r}")
    lines.append("constants estimated from samples (lower bounds; heuristic)")
    text = "\n".join(lines) + "\n" + plan.describe()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "plan.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep-batch": cmd_sweep_batch, "sweep-beta": cmd_sweep_beta,
            "verify": cmd_verify, "plan": cmd_plan}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalAbort, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

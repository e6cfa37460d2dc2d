"""Command-line entry point: ``repeated-sales <subcommand> ...``.

Single solutions are printed as JSON, sweeps and tables as CSV; every float
carries 12 significant digits and every output embeds a run manifest.
Exit codes: 0 success, 1 unwritable output, 2 verification failure,
3 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from .distributions import Uniform, load_distribution
from .errors import UnsupportedDiscount
from .finite_horizon import solve_partial_power_law, solve_partial_uniform, table_residuals, threshold_pbe_exists
from .games import GAMES, build_game
from .infinite_horizon import LIMIT_RATIO, equilibrium
from .simulator import SimulationConfig, expected_revenue, geometric_equivalence_check, playout
from .two_round import solve_two_round
from .verifier import (
    PERTURBATIONS,
    check_belief_consistency,
    check_buyer_best_response,
    check_revenue_upper_bound,
    check_seller_best_response,
    perturb,
    revenue_benchmark,
)

EXIT_OK, EXIT_VERIFY_FAIL, EXIT_CONFIG = 0, 2, 3
SIG = 12


class ConfigError(ValueError):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def default_seed() -> int:
    raw = os.environ.get("REPEATED_SALES_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"REPEATED_SALES_SEED must be an integer, got {raw!r}") from exc


def _round(obj):
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if not math.isfinite(x) else float(f"{x:.{SIG}g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{SIG}g}"
    return str(x)


def manifest(args: argparse.Namespace) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func",) and v is not None}
    if isinstance(config.get("dist"), str):
        try:
            config["dist"] = load_distribution(config["dist"]).to_config()
        except Exception:
            pass
    return {
        "subcommand": args.command,
        "config": config,
        "tool_version": _version(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def emit_json(payload: dict, args, out=None) -> None:
    payload = {**payload, "manifest": manifest(args)}
    text = json.dumps(_round(payload), indent=2, sort_keys=False, default=str)
    print(text, file=out or sys.stdout)


def write_csv(path: str | None, header: list[str], rows, args) -> None:
    buf = io.StringIO()
    buf.write(f"# manifest: {json.dumps(_round(manifest(args)), default=str)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    if path is None or path == "-":
        sys.stdout.write(buf.getvalue())
        return
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _dist(args):
    if getattr(args, "dist", None) is None:
        return Uniform(0.0, 1.0)
    return load_distribution(args.dist)


def _parse_range(text: str, log: bool, integer: bool) -> np.ndarray:
    try:
        a, b, steps = text.split(":")
        a, b, steps = float(a), float(b), int(steps)
    except ValueError as exc:
        raise ConfigError(f"range must look like START:STOP:STEPS, got {text!r}") from exc
    if steps < 1:
        raise ConfigError("range needs a positive step count")
    if log:
        if a <= 0 or b <= 0:
            raise ConfigError("log-spaced ranges need positive endpoints")
        vals = np.geomspace(a, b, steps)
    else:
        vals = np.linspace(a, b, steps)
    if integer:
        vals = np.unique(np.round(vals).astype(int))
    return vals


# -- subcommands -----------------------------------------------------------------


def cmd_solve_two_round(args) -> int:
    eq = solve_two_round(_dist(args), grid=args.grid)
    emit_json(eq.as_dict(), args)
    return EXIT_OK


def cmd_solve_finite(args) -> int:
    if args.n < 1:
        raise ConfigError("--n must be at least 1")
    k = args.power_law or 0
    table = solve_partial_uniform(args.n) if k == 0 and args.method == "closed_form" else solve_partial_power_law(args.n, k, args.method)
    res = table_residuals(table)
    if args.csv:
        rows = ((m, table.p[m], table.t[m], table.R[m], table.u[m], res[m]) for m in range(1, table.n + 1))
        write_csv(args.csv, ["n", "p", "t", "R", "u", "residual"], rows, args)
    last = table.row(table.n)
    bench = float(table.benchmark[table.n])
    emit_json({"k": k, "n": last.n, "p": last.p, "t": last.t, "R": last.R, "u": last.u,
               "residual": None if math.isnan(res[-1]) else res[-1], "benchmark": bench},
              args, out=sys.stderr if args.csv in ("-",) else None)
    return EXIT_OK


def _infinite_row(d: float) -> list:
    e = equilibrium(d)
    return [d, e.t, e.p, e.R, e.benchmark, e.ratio]


def cmd_solve_infinite(args) -> int:
    if args.sweep:
        deltas = _parse_range(args.sweep, args.log, integer=False)
        write_csv(args.csv, ["delta", "t", "p", "R", "benchmark", "ratio"], (_infinite_row(float(d)) for d in deltas), args)
        return EXIT_OK
    if args.delta is None:
        raise ConfigError("solve-infinite needs --delta or --sweep")
    e = equilibrium(args.delta)
    emit_json({**e.as_dict(), "benchmark": e.benchmark, "limit_ratio": LIMIT_RATIO}, args)
    return EXIT_OK


def _game_from(args, **config):
    kw = {}
    if args.game == "two-round":
        kw["dist"] = _dist(args)
    elif args.game == "finite":
        if args.n is None:
            raise ConfigError("--game finite needs --n")
        kw.update(n=args.n, k=args.power_law or 0)
    else:
        if args.delta is None:
            raise ConfigError(f"--game {args.game} needs --delta")
        kw["delta"] = args.delta
    return build_game(args.game, **kw, **config)


def cmd_simulate(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    method = "monte_carlo" if args.method in ("mc", "monte_carlo") else "quadrature"
    game = _game_from(args, seed=seed, samples=args.samples)
    payload = {"game": args.game}
    if args.transcript is not None:
        key, _, val = args.transcript.partition("=")
        try:
            v = float(val)
        except ValueError:
            v = None
        if key.strip() != "v" or v is None:
            raise ConfigError(f"--transcript expects v=<value>, got {args.transcript!r}")
        tr = playout(game.seller, game.buyer, v, game.config, high=game.dist.high)
        payload["transcript"] = tr.to_dict()["rounds"]
        payload.update(value=v, realized_revenue=tr.revenue, realized_utility=tr.utility)
    config = game.config
    if args.geometric:
        if config.regime != "discounted":
            raise ConfigError("--geometric applies to the discounted games")
        rep = geometric_equivalence_check(game.seller, game.buyer, game.dist, config.delta, args.samples, seed)
        payload["geometric_equivalence"] = rep
        payload.update(revenue=rep["geometric_mc"], error=rep["standard_error"])
    else:
        value, err = expected_revenue(game.seller, game.buyer, game.dist, config, method)
        payload.update(revenue=value, error=err, method=method)
    if config.regime == "discounted":
        payload["truncation_rounds"] = config.rounds(game.dist.high)
    payload["config"] = config.as_dict()
    emit_json(payload, args)
    return EXIT_OK


def _run_checks(game, args) -> list:
    reports = [
        check_buyer_best_response(game, grid_size=args.value_grid, lookahead=args.lookahead, epsilon=args.epsilon),
        check_seller_best_response(game, grid_size=args.price_grid, deviation_depth=args.seller_depth, epsilon=args.epsilon),
        check_belief_consistency(game, trace_length=args.trace_length),
    ]
    value, _ = expected_revenue(game.seller, game.buyer, game.dist, game.config, "quadrature")
    reports.append(check_revenue_upper_bound(value, game.dist, game.config))
    return reports


def cmd_verify(args) -> int:
    game = _game_from(args)
    if args.perturb:
        game = perturb(game, args.perturb)
    reports = _run_checks(game, args)
    ok = all(r.passed for r in reports)
    emit_json({"game": game.name, "all_passed": ok, "reports": [r.as_dict() for r in reports]}, args)
    return EXIT_OK if ok else EXIT_VERIFY_FAIL


def cmd_sweep(args) -> int:
    if args.parameter == "delta":
        if args.game != "infinite-partial":
            raise ConfigError("a delta sweep needs --game infinite-partial")
        vals = _parse_range(args.range, args.log, integer=False)
        write_csv(args.out, ["delta", "t", "p", "R", "benchmark", "ratio"], (_infinite_row(float(d)) for d in vals), args)
        return EXIT_OK
    vals = _parse_range(args.range, args.log, integer=True)
    if vals[0] < 1:
        raise ConfigError("n must be at least 1")
    if args.game == "finite":
        k = args.power_law or 0
        table = solve_partial_uniform(int(vals[-1])) if k == 0 else solve_partial_power_law(int(vals[-1]), k)
        bench = table.benchmark
        rows = ([m, table.t[m], table.p[m], table.R[m], bench[m], table.R[m] / bench[m]] for m in vals)
        write_csv(args.out, ["n", "t", "p", "R", "benchmark", "ratio"], rows, args)
        return EXIT_OK
    if args.game == "existence":
        dist = _dist(args)
        eq = solve_two_round(dist)
        rows = []
        for m in vals:
            rep = threshold_pbe_exists(dist, int(m), eq)
            rows.append([int(m), rep.exists, rep.two_round_p1, rep.lower_support_in_argmax])
        write_csv(args.out, ["n", "exists", "two_round_p1", "lower_support_in_argmax"], rows, args)
        return EXIT_OK
    raise ConfigError("an n sweep needs --game finite or --game existence")


def cmd_report(args) -> int:
    lines = []
    payload: dict = {"game": args.game}
    if args.game == "two-round":
        dist = _dist(args)
        eq = solve_two_round(dist)
        payload.update(eq.as_dict())
        bench = revenue_benchmark(dist, SimulationConfig.fixed(2))
        payload.update(benchmark=bench, ratio=eq.revenue / bench)
        lines.append(f"two-round game on {dist.to_config()}: p1={eq.p1:.6g}, t1={eq.t1:.6g}, p21={eq.p21:.6g}, revenue={eq.revenue:.6g}")
    elif args.game == "infinite-partial":
        e = equilibrium(args.delta) if args.delta is not None else None
        if e is None:
            raise ConfigError("--delta is required")
        payload.update(e.as_dict(), benchmark=e.benchmark, limit_ratio=LIMIT_RATIO)
        lines.append(f"partial commitment, delta={e.delta:g}: t={e.t:.6g}, p={e.p:.6g}, R={e.R:.6g}, "
                     f"ratio={e.ratio:.4f} of the full-commitment benchmark (limit {LIMIT_RATIO:.6f})")
    elif args.game == "infinite-zero":
        if args.delta is None:
            raise ConfigError("--delta is required")
        game = build_game("infinite-zero", delta=args.delta)
        value, err = expected_revenue(game.seller, game.buyer, game.dist, game.config)
        payload.update(delta=args.delta, revenue=value, error=err, benchmark=1.0 / (4 * args.delta))
        lines.append(f"zero commitment, delta={args.delta:g}: revenue={value:.6g}")
    elif args.game == "finite":
        if args.n is None:
            raise ConfigError("--n is required")
        k = args.power_law or 0
        table = solve_partial_power_law(args.n, k)
        row = table.row(args.n)
        bench = float(table.benchmark[args.n])
        payload.update(n=args.n, k=k, p=row.p, t=row.t, R=row.R, u=row.u, benchmark=bench, ratio=row.R / bench)
        lines.append(f"{args.n}-round partial commitment, power law k={k}: p={row.p:.6g}, t={row.t:.6g}, R={row.R:.6g} (benchmark {bench:.6g})")
    status = EXIT_OK
    if args.verify:
        if args.game == "infinite-partial" or args.game == "infinite-zero":
            game = build_game(args.game, delta=args.delta)
        elif args.game == "finite":
            game = build_game("finite", n=args.n, k=args.power_law or 0)
        else:
            game = build_game("two-round", dist=_dist(args))
        args.value_grid, args.lookahead, args.price_grid = 1001, 3, 2001
        args.seller_depth, args.trace_length, args.epsilon = 1, 4, 1e-4
        reports = _run_checks(game, args)
        payload["verification"] = [r.as_dict() for r in reports]
        for r in reports:
            lines.append(f"  {r.role} {r.check}: {r.verdict} gain={r.gain:.3g} budget={r.budget:.3g}")
        if not all(r.passed for r in reports):
            status = EXIT_VERIFY_FAIL
    for line in lines:
        print(line, file=sys.stderr)
    emit_json(payload, args)
    return status


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repeated-sales", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-two-round", help="two-round no-commitment equilibrium")
    p.add_argument("--dist", help="distribution config: JSON file path or inline JSON (default U[0,1])")
    p.add_argument("--grid", type=int, default=4097)
    p.set_defaults(func=cmd_solve_two_round)

    p = sub.add_parser("solve-finite", help="finite-horizon partial-commitment recursion")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--power-law", type=int, metavar="K")
    p.add_argument("--method", choices=["closed_form", "golden"], default="closed_form")
    p.add_argument("--csv", metavar="PATH", help="write all rows as CSV ('-' for stdout)")
    p.set_defaults(func=cmd_solve_finite)

    p = sub.add_parser("solve-infinite", help="infinite-horizon partial-commitment equilibrium")
    p.add_argument("--delta", type=float)
    p.add_argument("--sweep", metavar="D1:D2:STEPS")
    p.add_argument("--log", action="store_true", help="log-spaced sweep")
    p.add_argument("--csv", metavar="PATH")
    p.set_defaults(func=cmd_solve_infinite)

    def game_args(p, with_k=True):
        p.add_argument("--game", choices=GAMES, required=True)
        p.add_argument("--dist")
        p.add_argument("--delta", type=float)
        p.add_argument("--n", type=int)
        if with_k:
            p.add_argument("--power-law", type=int, metavar="K")

    p = sub.add_parser("simulate", help="expected revenue and transcripts")
    game_args(p)
    p.add_argument("--method", choices=["quadrature", "mc", "monte_carlo"], default="quadrature")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--geometric", action="store_true", help="compare geometric stopping with discounting")
    p.add_argument("--transcript", metavar="v=VALUE")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="numerical equilibrium certificates")
    game_args(p)
    p.add_argument("--perturb", choices=PERTURBATIONS)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--value-grid", type=int, default=1001)
    p.add_argument("--lookahead", type=int, default=3)
    p.add_argument("--price-grid", type=int, default=2001)
    p.add_argument("--seller-depth", type=int, default=1)
    p.add_argument("--trace-length", type=int, default=4)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="parameter sweeps as CSV")
    p.add_argument("--parameter", choices=["delta", "n"], required=True)
    p.add_argument("--range", required=True, metavar="START:STOP:STEPS")
    p.add_argument("--log", action="store_true")
    p.add_argument("--game", choices=["infinite-partial", "finite", "existence"], required=True)
    p.add_argument("--power-law", type=int, metavar="K")
    p.add_argument("--dist")
    p.add_argument("--out", required=True, help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="human-readable summary plus JSON")
    p.add_argument("--game", choices=GAMES, required=True)
    p.add_argument("--dist")
    p.add_argument("--delta", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--power-law", type=int, metavar="K")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnsupportedDiscount, ValueError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

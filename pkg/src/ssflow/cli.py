"""Command-line entry point: ``ssflow <subcommand> ...``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import biharm, elastica
from . import flow_graph as fg
from . import flow_param as fp
from . import geometry as geo
from . import harness
from . import svg
from . import windows as win
from .geometry import GridField


def _rhs_values(spec: str, x: np.ndarray, length: float) -> np.ndarray:
    if spec in biharm.BUILTIN_RHS:
        return biharm.BUILTIN_RHS[spec](x, length)
    field = geo.read_field_csv(spec)
    return np.interp(x, field.grid - field.origin, field.values)


def cmd_biharm(args) -> int:
    x = np.linspace(0.0, args.length, args.nodes)
    rhs = GridField(_rhs_values(args.rhs, x, args.length), x[1] - x[0], 0.0)
    prob = biharm.BvpProblem(args.mu, args.length, rhs)
    if args.method == "green":
        phi = biharm.green_solve(prob)
    else:
        phi = biharm.solve_bvp_direct(prob)
    if args.method == "both":
        gap = np.max(np.abs(biharm.green_solve(prob).values - phi.values))
        print(f"max_gap={gap:.17g}")
    if args.out:
        np.savetxt(args.out, np.column_stack([x, phi.values]), delimiter=",", header="x,phi",
                   comments="", fmt="%.17g")
    return 0


BUILTIN_CURVES = {
    "perturbed_line": lambda n: harness.perturbed_line(n),
    "line": lambda n: harness.perturbed_line(n, eps=0.0),
    "shallow_arc": lambda n: harness.shallow_arc(n),
    "borderline": lambda n: elastica.borderline_curve(1.0, 0.0, 1, (-30.0, 30.0, n)),
    "loop": lambda n: win.build_window(win.loop_datum(0.9), win.WindowSpec(20.0, n)),
}


def _initial_curve(spec: str, nodes: int):
    if spec in BUILTIN_CURVES:
        return BUILTIN_CURVES[spec](nodes)
    curve = geo.read_curve_csv(spec)
    return geo.resample_arclength(curve, nodes)


def cmd_evolve(args) -> int:
    curve = _initial_curve(args.initial, args.nodes)
    cfg = fp.FlowConfig(dt=args.dt, t_final=args.t_final, nodes=args.nodes,
                        resample_every=args.resample_every if args.mode == "param" else 0)
    if args.mode == "graph":
        traj = fg.evolve(fg.GraphState.from_base(curve, args.lam), cfg)
    else:
        traj = fp.evolve(fp.ParamState(curve, args.lam, boundary=args.boundary), cfg)
    fp.write_trajectory(traj, args.out)
    last = traj.diagnostics[-1]
    print(f"status={traj.status} t={last.t:.6g} energy={last.energy:.10g} sup_rhs={last.sup_speed:.3g}")
    if traj.message:
        print(traj.message, file=sys.stderr)
    if args.svg:
        picks = [traj.states[0], traj.states[len(traj.states) // 2], traj.states[-1]]
        svg.overlay([fp._curve_of(s) for s in picks], args.svg,
                    [f"t={s.time:.4g}" for s in picks])
    return 0 if traj.status != "degenerate" else 2


def cmd_windowed(args) -> int:
    datum = win.datum_from_name(args.datum)
    radii = [float(r) for r in args.radii.split(",")]
    cfg = fp.FlowConfig(dt=args.dt, t_final=args.t_final, resample_every=0)
    report = win.run_ladder(datum, radii, args.compact_N, cfg, args.lam, args.h)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    win.write_ladder_csv(report, out / "ladder.csv")
    for r, traj in report.trajectories.items():
        fp.write_trajectory(traj, out / f"window_r{r:g}")
    for (a, b), g in zip(report.pairs, report.sup_gaps):
        print(f"r={a:g}->{b:g} sup_gap={g:.6g}")
    return 0


def cmd_elastica(args) -> int:
    if args.method == "closed":
        n = int(round(2 * args.s_max / args.h)) + 1
        prof = elastica.borderline_profile(args.lam, args.s0, args.sign, (args.s0 - args.s_max, args.s0 + args.s_max, n))
    else:
        base = elastica.integrate_form(args.lam, args.sign, args.h, args.s_max)
        prof = GridField(base.values, base.spacing, base.origin + args.s0)
    if args.out:
        geo.write_field_csv(prof, args.out, header="s,kappa")
    k = prof.values
    print(f"peak={k[np.argmax(np.abs(k))]:.12g} index={np.trapezoid(k, dx=prof.spacing):.10g}")
    if args.svg:
        svg.overlay([geo.build_from_curvature(prof)], args.svg, ["borderline elastica"])
    return 0


def cmd_check(args) -> int:
    config = harness.load_config(args.config) if args.config else {}
    bundle = harness.run_benchmarks(suite=args.suite, seed=args.seed, out_dir=args.out_dir,
                                    config=config, workers=args.workers)
    counts = {s: sum(r.status == s for r in bundle.reports) for s in ("pass", "fail", "inconclusive")}
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return 0 if counts["fail"] == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssflow", description="Shortening-straightening flow of open planar curves.")
    p.add_argument("--config", help="INI file; a section per subcommand supplies defaults")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("biharm", help="hinged phi'''' + mu phi = f on [0, L]")
    b.add_argument("--mu", type=float, default=1.0)
    b.add_argument("--length", type=float, default=1.0)
    b.add_argument("--nodes", type=int, default=201)
    b.add_argument("--rhs", default="sin1", help="builtin name or CSV (s,value)")
    b.add_argument("--method", choices=("green", "direct", "both"), default="both")
    b.add_argument("--out", help="CSV x,phi")
    b.set_defaults(func=cmd_biharm)

    e = sub.add_parser("evolve", help="evolve a pinned curve")
    e.add_argument("--mode", choices=("graph", "param"), default="param")
    e.add_argument("--lambda", dest="lam", type=float, default=1.0)
    e.add_argument("--dt", type=float, default=1e-3)
    e.add_argument("--t-final", type=float, default=0.1)
    e.add_argument("--nodes", type=int, default=161)
    e.add_argument("--initial", default="perturbed_line", help=f"CSV (param,x1,x2) or one of {sorted(BUILTIN_CURVES)}")
    e.add_argument("--boundary", choices=(fp.PINNED, fp.FREE), default=fp.PINNED)
    e.add_argument("--resample-every", type=int, default=10)
    e.add_argument("--out", default="trajectory")
    e.add_argument("--svg")
    e.set_defaults(func=cmd_evolve)

    w = sub.add_parser("windowed", help="window ladder for a whole-line datum")
    w.add_argument("--datum", default="bump", help="line, bump[:amp], loop[:lam0] or CSV")
    w.add_argument("--radii", default="8,12,16,24")
    w.add_argument("--compact-N", type=float, default=6.0)
    w.add_argument("--lambda", dest="lam", type=float, default=1.0)
    w.add_argument("--t-final", type=float, default=0.5)
    w.add_argument("--dt", type=float, default=1e-3)
    w.add_argument("--h", type=float, default=0.05)
    w.add_argument("--out", default="ladder")
    w.set_defaults(func=cmd_windowed)

    el = sub.add_parser("elastica", help="borderline elastica curvature profile")
    el.add_argument("--lambda", dest="lam", type=float, default=1.0)
    el.add_argument("--sign", type=int, choices=(-1, 1), default=1)
    el.add_argument("--s0", type=float, default=0.0)
    el.add_argument("--method", choices=("closed", "ode"), default="closed")
    el.add_argument("--h", type=float, default=1e-3)
    el.add_argument("--s-max", type=float, default=20.0)
    el.add_argument("--out", help="CSV s,kappa")
    el.add_argument("--svg")
    el.set_defaults(func=cmd_elastica)

    c = sub.add_parser("check", help="diagnostics suite")
    c.add_argument("--suite", choices=tuple(harness.SUITES), default="quick")
    c.add_argument("--seed", type=int, default=harness.SEED)
    c.add_argument("--out-dir", default="checks")
    c.add_argument("--workers", type=int, default=4)
    c.set_defaults(func=cmd_check)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        sections = harness.load_config(pre.config)
        section = sections.get(pre.command, {})
        sub = parser._subparsers._group_actions[0].choices[pre.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in section.items():
            dest = key.replace("-", "_")
            dest = "lam" if dest == "lambda" else dest
            if dest not in known:
                raise SystemExit(f"config [{pre.command}]: unknown key {key!r}")
            conv = known[dest].type or str
            defaults[dest] = conv(value)
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

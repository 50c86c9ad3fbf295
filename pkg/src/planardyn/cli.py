"""Command-line front end.

Every command takes a map selection (``--preset`` or ``--config`` plus
``--param key=value`` overrides), writes CSV/PGM artifacts under
``--out PREFIX``, and prints numbers with 17 significant digits.
Exit codes: 0 success, 1 domain/computation errors, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import basins, manifolds, normalform, orbits, unfolding
from .errors import ParameterError, PlanardynError
from .maps import GrhtMap, HenonMap, QuadFixtureMap, params_from_text
from .presets import get_preset, preset_names

FMT = "{:.17g}"


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    return FMT.format(float(x))


def _parse_range(text: str):
    """Inclusive integer range 'lo..hi' (or a single integer)."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ConfigError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _parse_window(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ConfigError(f"window needs 4 comma-separated numbers, got {text!r}")
    return tuple(parts)


def _parse_point(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"point needs 2 comma-separated numbers, got {text!r}")
    return np.array(parts)


def build_map(args):
    """Map object from --preset/--config plus --param overrides."""
    try:
        if args.config:
            text = Path(args.config).read_text()
            m = params_from_text(text)
        elif args.preset:
            m = get_preset(args.preset)
        else:
            raise ConfigError("give --preset or --config")
    except FileNotFoundError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except KeyError as exc:
        raise ConfigError(str(exc))
    overrides = {}
    alias = {"lambda": "lam"}
    for item in args.param or []:
        if "=" not in item:
            raise ConfigError(f"--param needs key=value, got {item!r}")
        key, val = item.split("=", 1)
        key = alias.get(key.strip(), key.strip())
        try:
            overrides[key] = float(val)
        except ValueError:
            raise ConfigError(f"non-numeric value in --param {item!r}")
    if overrides:
        try:
            m = replace(m, **overrides)
        except (TypeError, ParameterError) as exc:
            raise ConfigError(f"bad parameter override: {exc}")
    return m


def _write(args, suffix: str, data):
    path = Path(f"{args.out}{suffix}")
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)
    print(f"wrote {path}")


def cmd_eval(args):
    m = build_map(args)
    rows = ["x,y,fx,fy"]
    for text in args.at:
        z = _parse_point(text)
        w = m.eval(z)
        rows.append(",".join(_fmt(v) for v in (z[0], z[1], w[0], w[1])))
        print(rows[-1])
    _write(args, "eval.csv", "\n".join(rows) + "\n")
    return 0


def cmd_sr(args):
    m = build_map(args)
    if not isinstance(m, GrhtMap):
        raise ConfigError("sr requires the piecewise family")
    sols = []
    ks = _parse_range(args.k)

    def solve(k):
        out = []
        closed = None
        try:
            closed = orbits.sr_closed_form(m, k)
        except PlanardynError:
            closed = None
        if closed is None and args.method == "closed":
            return out
        if closed is not None:
            out.extend(closed)
        if args.method == "newton" or closed is None:
            pair = orbits.psi_pair(m, k)
            lamk = (m.lam + m.mu2) ** k
            for psi, branch in ((pair.psi_minus, "stable-candidate"),
                                (pair.psi_plus, "saddle-candidate")):
                guess = np.array([lamk * (1.0 + m.c2 * psi * lamk),
                                  1.0 + psi * lamk])
                try:
                    s = orbits.sr_newton(m, k, 1, guess)
                except PlanardynError:
                    continue
                s.branch = branch
                if closed is None:
                    out.append(s)
        return out

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            for chunk in pool.map(solve, ks):
                sols.extend(chunk)
    else:
        for k in ks:
            sols.extend(solve(k))
    sols.sort(key=lambda s: (s.k, s.branch))
    _write(args, "sr.csv", orbits.solutions_to_csv(sols))
    for s in sols:
        print(",".join(str(v) for v in s.csv_row()))
    return 0


def cmd_manifold(args):
    m = build_map(args)
    guess = _parse_point(args.fixed_point) if args.fixed_point else None
    if guess is None:
        guess = manifolds._default_saddle_guess(m)
    z = manifolds.find_fixed_point(m, guess)
    frame = manifolds.saddle_frame(m, z)
    box = _parse_window(args.box) if args.box else None
    if args.kind == "unstable":
        br = manifolds.grow_unstable(m, frame, seed_offset=args.offset,
                                     n_points=args.points,
                                     n_generations=args.generations,
                                     bounding_box=box, side=args.side)
        _write(args, "unstable.csv", br.to_csv())
    else:
        strands = manifolds.grow_stable(m, frame, seed_offset=args.offset,
                                        n_points=args.points,
                                        depth=args.generations,
                                        bounding_box=box, side=args.side)
        parts = [br.to_csv() for br in strands]
        body = parts[0]
        for extra in parts[1:]:
            body += "".join(extra.splitlines(keepends=True)[1:])
        _write(args, "stable.csv", body)
    return 0


def cmd_basin(args):
    m = build_map(args)
    nx, ny = (int(v) for v in args.grid.split("x"))
    grid = basins.compute_basin(m, _parse_window(args.window), nx, ny,
                                max_iter=args.max_iter,
                                period_tol=args.period_tol,
                                div_threshold=args.div_threshold,
                                max_period=args.max_period,
                                workers=args.threads)
    _write(args, "basin.csv", grid.to_csv())
    _write(args, "basin.pgm", grid.to_pgm())
    return 0


def cmd_critical(args):
    m = build_map(args)
    curve = basins.trace_implicit(m, _parse_window(args.window),
                                  resolution=args.resolution)
    _write(args, "critical.csv", curve.to_csv())
    target = curve
    if args.image:
        target = basins.curve_image(m, curve)
        _write(args, "critical_image.csv", target.to_csv())
    if args.cusp:
        pts = basins.cusp_locate(target)
        rows = ["x,y"] + [f"{_fmt(p[0])},{_fmt(p[1])}" for p in pts]
        _write(args, "cusps.csv", "\n".join(rows) + "\n")
        for p in pts:
            print("cusp:", _fmt(p[0]), _fmt(p[1]))
    return 0


def cmd_bif_scan(args):
    m = build_map(args)
    if not isinstance(m, GrhtMap):
        raise ConfigError("bif-scan requires the piecewise family")
    ray = unfolding.UnfoldingRay.axis(args.ray)
    lo, hi = (float(v) for v in args.bracket.split(","))
    events = []
    ks = _parse_range(args.k)

    def scan(k):
        scale = unfolding.ScalingModel.ALPHA_2K.evaluate(k, abs(m.lam)) \
            if args.auto_bracket else 1.0
        return unfolding.scan_ray(m, ray, k, (lo * scale, hi * scale))

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            for chunk in pool.map(scan, ks):
                events.extend(chunk)
    else:
        for k in ks:
            events.extend(scan(k))
    events.sort(key=lambda e: (e.k, e.kind.value))
    _write(args, "events.csv", unfolding.events_to_csv(events))
    for e in events:
        print(e.k, e.kind.value, _fmt(e.epsilon))
    return 0


def cmd_scaling(args):
    m = build_map(args)
    ray = unfolding.UnfoldingRay.axis(args.ray)
    model = unfolding.ScalingModel(args.model)
    alpha = abs(m.lam)
    ks = _parse_range(args.k)
    sn, pd = {}, {}
    for k in ks:
        scale = model.evaluate(k, alpha)
        events = unfolding.scan_ray(m, ray, k,
                                    (-8.0 * abs(scale), 8.0 * abs(scale)))
        for e in events:
            d = sn if e.kind is unfolding.BifurcationKind.SADDLE_NODE else pd
            d[e.k] = e.epsilon
    body = ""
    for name, data in (("SN", sn), ("PD", pd)):
        if len(data) >= 4:
            fit = unfolding.scaling_fit(data, model, alpha)
            body += fit.to_csv()
            print(f"{name}: last ratio {_fmt(fit.constant)} "
                  f"aitken {_fmt(fit.aitken)}")
    _write(args, "scaling.csv", body)
    return 0


def cmd_normalform(args):
    report = normalform.detect_resonances(args.lam, args.sigma,
                                          args.max_order, args.tol)
    rows = ["p,q"] + [f"{p},{q}" for p, q in report.pairs]
    _write(args, "resonances.csv", "\n".join(rows) + "\n")
    for p, q in report.pairs:
        print(f"resonance: lambda^{p} sigma^{q} = 1")
    return 0


def cmd_tangency(args):
    m = build_map(args)
    lo, hi = (float(v) for v in args.bracket.split(","))
    grow_kw = {
        "unstable": {"seed_offset": args.offset, "n_points": args.points,
                     "n_generations": args.generations,
                     "bounding_box": _parse_window(args.box) if args.box else None},
        "stable": {"seed_offset": args.offset, "n_points": args.points,
                   "depth": args.generations,
                   "bounding_box": _parse_window(args.box) if args.box else None},
    }
    value = manifolds.tangency_bisection(
        m, args.vary, (lo, hi), _parse_window(args.window),
        tol=args.tol, grow_kw=grow_kw)
    print("tangency at", args.vary, "=", _fmt(value))
    _write(args, "tangency.txt", f"{args.vary}={_fmt(value)}\n")
    return 0


def _add_map_args(sp):
    sp.add_argument("--preset", choices=preset_names())
    sp.add_argument("--config", help="flat key=value parameter file")
    sp.add_argument("--param", action="append", metavar="KEY=VALUE",
                    help="override one parameter (repeatable)")
    sp.add_argument("--out", default="out/planardyn_", metavar="PREFIX")
    sp.add_argument("--threads", type=int, default=1)


def make_parser():
    ap = argparse.ArgumentParser(
        prog="planardyn",
        description="dynamics of planar maps near homoclinic tangencies")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("eval", help="evaluate the map at points")
    _add_map_args(sp)
    sp.add_argument("--at", action="append", required=True,
                    metavar="X,Y", help="point to evaluate (repeatable)")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("sr", help="single-round periodic solutions")
    _add_map_args(sp)
    sp.add_argument("--k", required=True, help="k or lo..hi")
    sp.add_argument("--method", choices=["closed", "newton", "auto"],
                    default="auto")
    sp.set_defaults(fn=cmd_sr)

    sp = sub.add_parser("manifold", help="grow a manifold branch")
    _add_map_args(sp)
    sp.add_argument("--kind", choices=["stable", "unstable"], required=True)
    sp.add_argument("--fixed-point", metavar="X,Y")
    sp.add_argument("--offset", type=float, default=1e-4)
    sp.add_argument("--points", type=int, default=100)
    sp.add_argument("--generations", type=int, default=20)
    sp.add_argument("--side", type=int, choices=[1, -1], default=1)
    sp.add_argument("--box", metavar="X0,X1,Y0,Y1")
    sp.set_defaults(fn=cmd_manifold)

    sp = sub.add_parser("basin", help="basin-of-attraction raster")
    _add_map_args(sp)
    sp.add_argument("--grid", default="200x200", metavar="NXxNY")
    sp.add_argument("--window", default="-0.5,2,-0.5,2",
                    metavar="X0,X1,Y0,Y1")
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--period-tol", type=float, default=1e-13)
    sp.add_argument("--div-threshold", type=float, default=1e2)
    sp.add_argument("--max-period", type=int, default=64)
    sp.set_defaults(fn=cmd_basin)

    sp = sub.add_parser("critical", help="trace det Df = 0")
    _add_map_args(sp)
    sp.add_argument("--window", required=True, metavar="X0,X1,Y0,Y1")
    sp.add_argument("--resolution", type=int, default=300)
    sp.add_argument("--image", action="store_true",
                    help="also write the forward image of the curve")
    sp.add_argument("--cusp", action="store_true", help="report cusps")
    sp.set_defaults(fn=cmd_critical)

    sp = sub.add_parser("bif-scan", help="locate SN/PD bifurcations")
    _add_map_args(sp)
    sp.add_argument("--ray", choices=["mu1", "mu2", "mu3", "mu4"],
                    required=True)
    sp.add_argument("--k", required=True)
    sp.add_argument("--bracket", default="-0.02,0.02", metavar="LO,HI")
    sp.add_argument("--auto-bracket", action="store_true",
                    help="scale the bracket by alpha^2k per k")
    sp.set_defaults(fn=cmd_bif_scan)

    sp = sub.add_parser("scaling", help="fit bifurcation scaling laws")
    _add_map_args(sp)
    sp.add_argument("--ray", choices=["mu1", "mu2", "mu3", "mu4"],
                    required=True)
    sp.add_argument("--k", required=True)
    sp.add_argument("--model", required=True,
                    choices=[m.value for m in unfolding.ScalingModel])
    sp.set_defaults(fn=cmd_scaling)

    sp = sub.add_parser("normalform", help="eigenvalue resonance scan")
    sp.add_argument("--lam", "--lambda", dest="lam", type=float,
                    required=True)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--max-order", type=int, default=10)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--out", default="out/planardyn_", metavar="PREFIX")
    sp.set_defaults(fn=cmd_normalform)

    sp = sub.add_parser("tangency", help="bisect a manifold tangency")
    _add_map_args(sp)
    sp.add_argument("--vary", required=True, help="parameter to bisect on")
    sp.add_argument("--bracket", required=True, metavar="LO,HI")
    sp.add_argument("--window", required=True, metavar="X0,X1,Y0,Y1")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--offset", type=float, default=1e-3)
    sp.add_argument("--points", type=int, default=400)
    sp.add_argument("--generations", type=int, default=40)
    sp.add_argument("--box", metavar="X0,X1,Y0,Y1")
    sp.set_defaults(fn=cmd_tangency)

    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PlanardynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``bubblelab {family,stability,flow,bounds,embed}``.

Every run writes its CSV/JSON artifacts (and SVG figures unless
``--no-plots``) into ``--out``.  Failures print one line

    error: code=<reason-code> reason=<text>

to stderr and exit with 2 (invalid input) or 1 (numerical or I/O failure).
An optional ``--spec FILE`` holds ``key=value`` lines mirroring the flags;
flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, embed, family, flow, plotting, stability
from .errors import BubbleLabError, InvalidInputError
from .profile import WarpedGeometry, resolve_profile, ricci_bound_R0, validate_profile

SUBCOMMANDS = ("family", "stability", "flow", "bounds", "embed")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInputError(message)


def _positive(x):
    v = float(x)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {x}")
    return v


def _at_least(lo):
    def conv(x):
        v = int(x)
        if v < lo:
            raise argparse.ArgumentTypeError(f"expected an integer >= {lo}, got {x}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bubblelab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, profile=True):
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--spec", help="key=value file mirroring these flags")
        p.add_argument("--no-plots", action="store_true", help="skip SVG figures")
        if profile:
            p.add_argument("--profile", default="ex1", help="ex1, ex2 or an s,phi CSV path")
            p.add_argument("--eps", type=_positive, default=0.05,
                           help="builtin interval margin: I = (-(pi or 1) + eps, ...)")
            p.add_argument("--c", type=_positive, default=0.1, help="warp constant c")

    def member(p, many=False):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--s1", type=_positive, help="family parameter s1 in (0, s0)")
        g.add_argument("--v", type=_positive, help="enclosed volume (solved for s1)")
        if many:
            g.add_argument("--s1-range", nargs=3, metavar=("LO", "HI", "COUNT"),
                           help="COUNT evenly spaced s1 values in [LO, HI]")
        p.add_argument("--nodes", type=_at_least(family.MIN_NODES), default=family.DEFAULT_NODES)

    p = sub.add_parser("family", help="CMC tori S_s1: profile, V, area, H")
    common(p)
    member(p, many=True)

    p = sub.add_parser("stability", help="Jacobi sector spectra and verdict")
    common(p)
    member(p)
    p.add_argument("--k-max", type=_at_least(0), default=16)
    p.add_argument("--m", type=_at_least(1), default=6)
    p.add_argument("--tol", type=_positive, default=1e-7)
    p.add_argument("--literal-beta", action="store_true",
                   help="use the constant phi_s(s1) reading of beta")

    p = sub.add_parser("flow", help="volume-constrained descent on a flat torus")
    common(p, profile=False)
    p.add_argument("--k", type=int, choices=(1, 2), default=1, help="torus dimension")
    p.add_argument("--length", type=_positive, default=1.0, help="period of every axis")
    p.add_argument("--resolution", type=_at_least(16), default=64)
    p.add_argument("--n", type=_at_least(1), default=2, help="ball dimension")
    p.add_argument("--a", type=_positive, default=100.0, help="mean slice volume")
    p.add_argument("--amplitude", type=_positive, default=1.0, help="initial |tau|_inf")
    p.add_argument("--init", help="CSV grid with the initial sigma (overrides --a)")
    p.add_argument("--max-steps", type=_at_least(0), default=100_000)
    p.add_argument("--step", type=_positive, help="initial step (default: stiffness estimate)")
    p.add_argument("--check-fields", type=_at_least(0), default=0,
                   help="also test the positivity inequality on this many random fields")
    p.add_argument("--C", type=_positive, default=1.0, help="radius oscillation for the check")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bounds", help="inequality report for a family member or a cylinder")
    common(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--s1", type=_positive)
    g.add_argument("--cylinder-r", type=_positive, help="radius of X x S(r)")
    p.add_argument("--n", type=_at_least(1), default=2, help="ball dimension (cylinder)")
    p.add_argument("--k", type=_at_least(1), default=1, help="dim X (cylinder)")
    p.add_argument("--vol-x", type=_positive, default=1.0, help="|X| (cylinder)")
    p.add_argument("--nodes", type=_at_least(family.MIN_NODES), default=family.DEFAULT_NODES)

    p = sub.add_parser("embed", help="surface of revolution for Y and OBJ meshes")
    common(p)
    p.add_argument("--interval", nargs=2, type=float, metavar=("LO", "HI"), default=(-1.0, 1.0))
    p.add_argument("--samples", type=_at_least(5), default=2001)
    p.add_argument("--n-theta", type=_at_least(3), default=64)
    p.add_argument("--s1", type=_positive, help="also export the bubble S_s1")
    p.add_argument("--nodes", type=_at_least(family.MIN_NODES), default=400)
    return ap


def read_spec_file(path) -> list:
    """Turn ``key=value`` lines into flag tokens; blank lines and # comments skipped."""
    tokens = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{n}: expected key=value, got {line!r}")
        key, val = (x.strip() for x in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if val.lower() == "true":
            tokens.append(flag)
        elif val.lower() != "false":
            tokens += [flag, *val.split()]
    return tokens


def _expand_spec(argv: list) -> list:
    if "--spec" not in argv:
        return argv
    i = argv.index("--spec")
    if i + 1 >= len(argv):
        raise InvalidInputError("--spec needs a file path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    # spec tokens go right after the subcommand so explicit flags override them
    j = next((k for k, a in enumerate(rest) if a in SUBCOMMANDS), None)
    if j is None:
        raise InvalidInputError("a subcommand must precede --spec")
    return rest[: j + 1] + read_spec_file(path) + rest[j + 1:]


def _geometry(args) -> WarpedGeometry:
    p = resolve_profile(args.profile, args.eps)
    diags = validate_profile(p)
    if diags:
        raise InvalidInputError("; ".join(f"{d.code}: {d.detail}" for d in diags))
    return WarpedGeometry(p, args.c)


def _s1_values(args, g) -> list:
    if getattr(args, "s1_range", None):
        lo, hi, cnt = float(args.s1_range[0]), float(args.s1_range[1]), int(args.s1_range[2])
        if not (0 < lo <= hi) or cnt < 1:
            raise InvalidInputError("--s1-range needs 0 < LO <= HI and COUNT >= 1")
        return list(np.linspace(lo, hi, cnt))
    if args.v is not None:
        return [family.volume_to_s1(g, args.v)]
    return [args.s1]


def _member(args, g):
    s1 = _s1_values(args, g)[0]
    return family.solve_profile(g, s1, args.nodes)


def _written(paths):
    for p in paths:
        print(f"wrote {p}")


def cmd_family(args, out: Path) -> list:
    g = _geometry(args)
    s1s = _s1_values(args, g)
    rows = family.family_sweep(g, s1s, args.nodes)
    errs = [r for r in rows if not r.ok]
    if len(rows) == 1 and errs:
        # a single member re-raises with the full message
        family.solve_profile(g, s1s[0], args.nodes)
    paths = [out / "family.csv"]
    family.write_sweep_csv(rows, paths[0])
    if len(rows) == 1:
        bp = family.solve_profile(g, s1s[0], args.nodes)
        paths.append(out / "profile.csv")
        family.write_profile_csv(bp, paths[-1])
        if not args.no_plots:
            paths.append(out / "profile.svg")
            plotting.plot_profile(bp, paths[-1])
    elif not args.no_plots:
        paths.append(out / "sweep.svg")
        plotting.plot_sweep(rows, paths[-1])
    for r in errs:
        print(f"member s1={r.s1:.17g} failed: code={r.error}", file=sys.stderr)
    return paths


def cmd_stability(args, out: Path) -> list:
    g = _geometry(args)
    bp = _member(args, g)
    rep = stability.stability_verdict(bp, g, tol=args.tol, k_max=args.k_max, m=args.m,
                                      literal_beta=args.literal_beta)
    paths = [out / "stability.json"]
    paths[0].write_text(rep.to_json() + "\n")
    if not args.no_plots:
        paths.append(out / "spectra.svg")
        plotting.plot_spectra(rep, paths[-1])
    print(f"verdict={rep.verdict} ratio={rep.ratio:.6g} beta={rep.beta:.6g}")
    return paths


def cmd_flow(args, out: Path) -> list:
    rng = np.random.default_rng(args.seed)
    if args.init:
        grid = flow.read_grid_csv(args.init)
        dom = flow.TorusDomain(grid.ndim, (args.length,) * grid.ndim, grid.shape[0])
        field0 = flow.SigmaField(dom, grid, args.n)
    else:
        dom = flow.TorusDomain(args.k, (args.length,) * args.k, args.resolution)
        field0 = flow.random_field(dom, args.a, args.amplitude, args.n, rng)
    res = flow.constrained_descent(field0, max_steps=args.max_steps, step_size=args.step)
    paths = [out / "trajectory.csv", out / "flow_summary.json"]
    flow.write_trajectory_csv(res, paths[0])
    fin = res.field
    cprime = float(np.max(flow.discrete_slope(fin)))
    cdd = flow.c_doubleprime(fin.n, cprime)
    summary = {
        "converged": res.converged,
        "steps": res.steps,
        "final_tau_inf_over_a": float(res.tau_inf_over_a[-1]),
        "volume_drift": res.volume_drift,
        "a": fin.a,
        "lambda1": dom.lambda1,
        "c_doubleprime": cdd,
        "c_doubleprime_source": "proof-extracted witness",
        "threshold_margin": flow.positivity_threshold(fin.a, fin.n, dom.lambda1, cdd),
    }
    if args.check_fields:
        bad, worst = flow.positivity_random_check(dom, fin.a, fin.n, args.C, args.check_fields, rng)
        summary["inequality_fields"] = args.check_fields
        summary["inequality_violations"] = bad
        summary["inequality_min_margin"] = worst
    paths[1].write_text(json.dumps(summary, indent=2) + "\n")
    if not args.no_plots:
        paths.append(out / "trajectory.svg")
        plotting.plot_trajectory(res, paths[-1])
    print(f"converged={str(res.converged).lower()} steps={res.steps}")
    return paths


def cmd_bounds(args, out: Path) -> list:
    consts = {}
    if args.cylinder_r is not None:
        inp, area = bounds.cylinder_stats(args.n, args.k, args.vol_x, args.cylinder_r,
                                          isoperimetric=True)
        consts["isop_H_bound"] = bounds.isop_H_bound(args.n, args.vol_x, inp.v)
    else:
        g = _geometry(args)
        bp = family.solve_profile(g, args.s1, args.nodes)
        inp, area = bounds.bubble_stats(bp, g)
        r0 = ricci_bound_R0(g, (-bp.s1, bp.s1))
        h0 = bounds.H0_large_bubble(3, 1, r0)
        consts.update(R0=r0, H0=h0.H0, H0_ric_nonneg=h0.ric_nonneg,
                      H_floor=1.0 / float(g.profile.phi(g.profile.s0)) if g.profile.s0 else None)
        try:
            sc = bounds.slope_bound_constants(1, bp.H, bp.u_max, r0)
            consts.update(C1=sc.C1, log_C_prime=sc.log_C_prime)
        except BubbleLabError as exc:
            consts["slope_constants_error"] = exc.code
    results = bounds.check_area_H_volume(inp, area)
    paths = [out / "bounds.csv", out / "constants.json"]
    bounds.write_report_csv(results, paths[0])
    consts.update(v=inp.v, H=inp.H, area=area)
    paths[1].write_text(json.dumps(consts, indent=2) + "\n")
    failed = [r.name for r in results if r.passed is False]
    print("all applicable inequalities hold" if not failed else f"violated: {','.join(failed)}")
    return paths


def cmd_embed(args, out: Path) -> list:
    g = _geometry(args)
    curve = embed.embed_revolution(g, tuple(args.interval), args.samples)
    paths = [out / "curve.csv", out / "Y.obj"]
    np.savetxt(paths[0], np.column_stack([curve.s, curve.r, curve.x3]), delimiter=",",
               fmt="%.17g", header="s,r,x3", comments="")
    embed.export_mesh(curve, paths[1], args.n_theta)
    if args.s1 is not None:
        bp = family.solve_profile(g, args.s1, args.nodes)
        paths.append(out / "bubble.obj")
        embed.export_mesh(bp, paths[-1], args.n_theta, g=g)
        if not args.no_plots:
            paths.append(out / "profile.svg")
            plotting.plot_profile(bp, paths[-1])
    if not args.no_plots:
        paths.append(out / "meridian.svg")
        plotting.plot_embedding(curve, paths[-1])
    print(f"unit_speed_defect={curve.unit_speed_defect():.3g}")
    return paths


COMMANDS = {"family": cmd_family, "stability": cmd_stability, "flow": cmd_flow,
            "bounds": cmd_bounds, "embed": cmd_embed}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_expand_spec(argv))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _written(COMMANDS[args.subcommand](args, out))
        return 0
    except BubbleLabError as exc:
        code, status, msg = exc.code, exc.exit_status, str(exc)
    except OSError as exc:
        code, status, msg = "io-error", 1, str(exc)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    msg = " ".join(msg.split())
    print(f"error: code={code} reason={msg}", file=sys.stderr)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command line interface: solve single problems, run the studies, export
result tables (CSV/JSON) and dependency-light SVG plots.

Exit codes: 0 success, 1 numerical failure (with the failing run's context on
stderr), 2 flag/usage errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .assembly import LS, STANDARD, MethodParams
from .geometry import make_unit_circle_domain, make_unit_square_domain, points_in_polygon
from .harness import (
    CIRCLE_MESH_SIZES,
    SQUARE_MESH_SIZES,
    _atomic_write,
    default_problem,
    run_condition_study,
    run_convergence_cut_square,
    run_fixed_method_eigen_study,
    run_worst_case_circle,
    solve_circle_case,
    solve_square_case,
    study_filename,
)
from .linalg import FactorizationError
from .svgplot import heatmap_svg, line_plot_svg

__all__ = ["main", "run_cli"]


def _add_method_flags(p):
    p.add_argument("--variant", choices=[LS, STANDARD], default=LS, help="method variant")
    p.add_argument("--p", type=int, default=2, help="spline degree (>= 2)")
    p.add_argument("--beta", type=float, default=10.0, help="Nitsche penalty parameter")
    p.add_argument("--tau", type=float, default=0.1, help="least-squares weight")
    p.add_argument("--c", type=float, default=0.01, help="basis removal tolerance constant")


def _add_out_flags(p):
    p.add_argument(
        "--out",
        default=os.environ.get("CUTIGA_OUT", "out"),
        help="output directory (default: $CUTIGA_OUT or ./out)",
    )
    p.add_argument("--plot", action="store_true", help="also write SVG plots")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="cutiga",
        description="Least-squares stabilized Nitsche solver on cut B-spline grids",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one model problem and sample the solution")
    ps.add_argument("--geometry", choices=["square", "circle"], required=True)
    ps.add_argument("--n", type=int, default=15, help="square: elements per side")
    ps.add_argument("--delta-cut", type=float, default=None, help="square: cut fraction")
    ps.add_argument("--h", type=float, default=0.13, help="circle: element size")
    ps.add_argument("--t", type=float, default=None, help="circle: grid shift parameter")
    _add_method_flags(ps)
    _add_out_flags(ps)

    pc = sub.add_parser("convergence", help="manufactured-solution convergence study")
    pc.add_argument("--geometry", choices=["square", "circle"], required=True)
    pc.add_argument("--delta-cut", type=float, default=None, help="square: cut fraction")
    pc.add_argument("--ns", default=",".join(map(str, SQUARE_MESH_SIZES)),
                    help="square: comma list of elements per side")
    pc.add_argument("--hs", default=",".join(map(str, CIRCLE_MESH_SIZES)),
                    help="circle: comma list of mesh sizes")
    pc.add_argument("--shifts", type=int, default=100, help="circle: number of grid shifts")
    pc.add_argument("--quick", action="store_true", help="circle: 25-shift quick mode")
    pc.add_argument(
        "--small-tau",
        action="store_true",
        help="circle: sweep the extended small-tau set {1e-3, 1e-4, 1e-5} (locking study)",
    )
    pc.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    _add_method_flags(pc)
    _add_out_flags(pc)

    pk = sub.add_parser("condition", help="condition number study across grid shifts")
    pk.add_argument("--h", type=float, default=0.13)
    pk.add_argument("--shifts", type=int, default=100)
    _add_method_flags(pk)
    _add_out_flags(pk)

    pe = sub.add_parser("eigenstudy", help="fixed-method smallest-eigenvalue study")
    pe.add_argument("--base-n", type=int, default=10)
    pe.add_argument("--refinements", default="1,2,4,8")
    pe.add_argument("--delta-cuts", default="0,0.5,0.9")
    pe.add_argument("--taus", default="1,0.1")
    pe.add_argument("--beta", type=float, default=10.0)
    _add_out_flags(pe)

    pg = sub.add_parser("export-geometry", help="write element classification as text")
    pg.add_argument("--geometry", choices=["square", "circle"], required=True)
    pg.add_argument("--n", type=int, default=15)
    pg.add_argument("--delta-cut", type=float, default=None)
    pg.add_argument("--h", type=float, default=0.13)
    pg.add_argument("--t", type=float, default=None)
    _add_out_flags(pg)
    return ap


def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _params(args):
    return MethodParams(p=args.p, beta=args.beta, tau=args.tau, variant=args.variant,
                        removal_c=args.c)


def _validate(ap, args):
    """Per-command flag-combination checks (geometry-specific flags)."""
    geom = getattr(args, "geometry", None)
    if geom == "circle" and getattr(args, "delta_cut", None) is not None:
        ap.error("--delta-cut applies to the square geometry only")
    if geom == "square" and getattr(args, "t", None) is not None:
        ap.error("--t applies to the circle geometry only")
    if hasattr(args, "delta_cut") and args.delta_cut is None:
        args.delta_cut = 0.0
    if hasattr(args, "t") and args.t is None:
        args.t = 0.0


def _write_study(result, out_dir, variant, tau, beta):
    os.makedirs(out_dir, exist_ok=True)
    if tau is None:
        base = f"{result.study}_{variant}_beta{beta:g}"
    else:
        base = study_filename(result.study, variant, tau, beta, ext="")[:-1]
    csv_path = os.path.join(out_dir, base + ".csv")
    result.to_csv(csv_path)
    result.to_json(os.path.join(out_dir, base + ".json"))
    print(f"wrote {csv_path}")
    return base


def _cmd_solve(args):
    params = _params(args)
    problem = default_problem()
    if args.geometry == "square":
        rec, sol = solve_square_case(args.n, args.delta_cut, params, problem)
    else:
        rec, sol = solve_circle_case(args.h, args.t, params, problem, removal=args.c > 0)
    if sol is None:
        print(f"solve failed: {rec.failed} (geometry={args.geometry}, variant={rec.variant})",
              file=sys.stderr)
        return 1
    space, dom, x = sol
    print(f"solved: {rec.n_dofs} dofs ({rec.n_removed or 0} removed), "
          f"L2 error {rec.l2:.6e}, energy error {rec.energy:.6e}")
    os.makedirs(args.out, exist_ok=True)
    # raster sample of the solution over the domain's bounding box
    from .assembly import evaluate_solution_many

    nres = 120
    b = dom.boundary
    x0, x1 = b[:, 0].min(), b[:, 0].max()
    y0, y1 = b[:, 1].min(), b[:, 1].max()
    gx = np.linspace(x0, x1, nres)
    gy = np.linspace(y0, y1, nres)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = points_in_polygon(pts, dom.boundary)
    vals = np.full(pts.shape[0], np.nan)
    vals[inside], _ = evaluate_solution_many(space, x, pts[inside])
    lines = ["x,y,u"]
    for (px, py), v in zip(pts, vals):
        lines.append(f"{px:.17g},{py:.17g},{'' if math.isnan(v) else format(v, '.17g')}")
    raster_path = os.path.join(args.out, f"solution_{args.geometry}_{params.variant}.csv")
    _atomic_write(raster_path, "\n".join(lines) + "\n")
    print(f"wrote {raster_path}")
    if args.plot:
        svg = heatmap_svg(
            vals.reshape(nres, nres),
            (x0, x1, y0, y1),
            mask=np.isfinite(vals.reshape(nres, nres)),
            title=f"u_h ({args.geometry}, {params.variant})",
        )
        svg_path = raster_path[:-4] + ".svg"
        _atomic_write(svg_path, svg)
        print(f"wrote {svg_path}")
    return 0


def _print_rate_table(result, worst):
    pairs_l2 = result.worst_case("l2") if worst else result.series("l2")
    rates_l2 = result.rates("l2", worst=worst)
    rates_en = result.rates("energy", worst=worst)
    print(f"{'h':>12} {'L2 error':>14} {'rate':>6} {'energy error':>14} {'rate':>6}")
    pairs_en = result.worst_case("energy") if worst else result.series("energy")
    for i, ((h, e2), (_, ee)) in enumerate(zip(pairs_l2, pairs_en)):
        r2 = f"{rates_l2[i - 1]:6.2f}" if i > 0 else "     -"
        re = f"{rates_en[i - 1]:6.2f}" if i > 0 else "     -"
        print(f"{h:12.6g} {e2:14.6e} {r2} {ee:14.6e} {re}")


def _one_convergence_run(args, params):
    if args.geometry == "square":
        result = run_convergence_cut_square(params, _ints(args.ns), args.delta_cut)
        worst = False
    else:
        shifts = 25 if args.quick and args.shifts == 100 else args.shifts
        result = run_worst_case_circle(
            params, _floats(args.hs), n_shifts=shifts, jobs=args.jobs
        )
        worst = True
        failures = [r for r in result.records if r.failed]
        if failures:
            print(f"tau={params.tau:g}: {len(failures)} failed runs (first: "
                  f"h={failures[0].h} t={failures[0].t}: {failures[0].failed})",
                  file=sys.stderr)
    base = _write_study(result, args.out, params.variant, params.tau, params.beta)
    _print_rate_table(result, worst)
    if args.plot:
        pairs2 = result.worst_case("l2") if worst else result.series("l2")
        pairse = result.worst_case("energy") if worst else result.series("energy")
        svg = line_plot_svg(
            [
                ("L2", [h for h, _ in pairs2], [e for _, e in pairs2]),
                ("energy", [h for h, _ in pairse], [e for _, e in pairse]),
            ],
            xlabel="h",
            ylabel="error",
            title=f"{result.study} (tau={params.tau:g})",
            xlog=True,
            ylog=True,
            ref_slopes=(params.p, params.p + 1),
        )
        _atomic_write(os.path.join(args.out, base + ".svg"), svg)
    return int(any(r.failed for r in result.records))


def _cmd_convergence(args):
    from dataclasses import replace

    params = _params(args)
    if args.geometry == "square" and args.small_tau:
        build_parser().error("--small-tau applies to the circle geometry only")
    taus = (1e-3, 1e-4, 1e-5) if args.small_tau else (params.tau,)
    rc = 0
    for tau in taus:
        rc = max(rc, _one_convergence_run(args, replace(params, tau=tau)))
    return rc


def _cmd_condition(args):
    params = _params(args)
    result = run_condition_study(params, h=args.h, n_shifts=args.shifts)
    os.makedirs(args.out, exist_ok=True)
    for variant in (LS, STANDARD):
        sub = type(result)(
            study=result.study,
            metadata=dict(result.metadata, variant=variant),
            records=[r for r in result.records if r.variant == variant],
        )
        base = _write_study(sub, args.out, variant, params.tau, params.beta)
        if args.plot:
            ts = [r.t for r in sub.records]
            svg = line_plot_svg(
                [
                    ("kappa", ts, [min(r.kappa, 1e300) for r in sub.records]),
                    ("kappa BR", ts, [min(r.kappa_br, 1e300) for r in sub.records]),
                ],
                xlabel="t",
                ylabel="condition number",
                title=f"condition sweep ({variant})",
                ylog=True,
            )
            _atomic_write(os.path.join(args.out, base + ".svg"), svg)
    return 0


def _cmd_eigenstudy(args):
    result = run_fixed_method_eigen_study(
        base_n=args.base_n,
        refinements=_ints(args.refinements),
        delta_cuts=_floats(args.delta_cuts),
        taus=_floats(args.taus),
        beta=args.beta,
    )
    os.makedirs(args.out, exist_ok=True)
    for variant in (LS, STANDARD):
        sub = type(result)(
            study=result.study,
            metadata=dict(result.metadata, variant=variant),
            records=[r for r in result.records if r.variant == variant],
        )
        base = _write_study(sub, args.out, variant, None, args.beta)
        negs = [r for r in sub.records if r.lam_min is not None and r.lam_min < 0]
        print(f"  {variant}: {len(sub.records)} runs, {len(negs)} negative lambda_min")
        if args.plot:
            series = {}
            for r in sub.records:
                series.setdefault((r.delta_cut, r.tau), []).append(r)
            svg = line_plot_svg(
                [
                    (
                        f"dcut={k[0]:g} tau={k[1]:g}",
                        [r.refinement for r in v],
                        [abs(r.lam_min) for r in v],
                    )
                    for k, v in sorted(series.items())
                ],
                xlabel="refinement factor",
                ylabel="|lambda_min| (red = negative)",
                title=f"smallest eigenvalue, method fixed ({variant})",
                ylog=True,
                point_colors=[
                    ["#d62728" if r.lam_min < 0 else "#1f77b4" for r in v]
                    for _, v in sorted(series.items())
                ],
            )
            _atomic_write(os.path.join(args.out, base + ".svg"), svg)
    return 0


def _cmd_export_geometry(args):
    if args.geometry == "square":
        dom = make_unit_square_domain(args.n, args.delta_cut)
        name = f"geometry_square_n{args.n}_dcut{args.delta_cut:g}.txt"
    else:
        dom = make_unit_circle_domain(args.h, args.t)
        name = f"geometry_circle_h{args.h:g}_t{args.t:g}.txt"
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, name)
    _atomic_write(path, dom.export_text())
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "convergence": _cmd_convergence,
    "condition": _cmd_condition,
    "eigenstudy": _cmd_eigenstudy,
    "export-geometry": _cmd_export_geometry,
}


def run_cli(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    _validate(ap, args)
    try:
        return _COMMANDS[args.command](args)
    except FactorizationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None):
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())

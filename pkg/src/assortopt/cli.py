"""Command line entry point: ``assortopt <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .bb import SolveConfig, solve
from .bounds import build_bounds_table
from .generators import FAMILIES, GeneratorConfig, FULL_GRIDS, gen_tiny, generate
from .instance import Instance
from .model import FormulationKind, build, write_lp
from .oracle import brute_force_optimum


def _kappa(text: str):
    parts = [float(p) for p in text.split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w")


def _write(path, text: str) -> None:
    fh = _open_out(path)
    try:
        fh.write(text)
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_gen(args) -> int:
    if args.family == "tiny":
        inst = gen_tiny(args.n_products or 8, args.n_classes or 2, args.seed)
    else:
        grid = FULL_GRIDS.get(args.family, {})
        n = args.n_products or grid.get("n_products")
        m = args.n_classes or grid.get("n_classes")
        if n is None or m is None:
            raise SystemExit("custom family needs --n-products and --n-classes")
        if args.nu0 is None or args.kappa is None:
            raise SystemExit("--nu0 and --kappa are required")
        cfg = GeneratorConfig(args.family, n, m, args.nu0, _kappa(args.kappa), args.seed, args.rep,
                              symmetric=args.symmetric)
        inst = generate(cfg)
    _write(args.out, inst.to_json() + "\n")
    return 0


def cmd_bounds(args) -> int:
    inst = Instance.load(args.instance)
    _write(args.out, build_bounds_table(inst).to_tsv())
    return 0


def _solve_config(args, **extra) -> SolveConfig:
    return SolveConfig(time_limit=args.time_limit, rel_gap=args.gap, node_selection=args.node_selection,
                       branching=args.branching, lp_backend=args.lp_backend, **extra)


def cmd_solve(args) -> int:
    inst = Instance.load(args.instance)
    rep = solve(build(inst, args.model), _solve_config(args))
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(rep.to_dict(), fh, indent=1)
    print(f"{rep.formulation}\t{rep.status}\trevenue={rep.revenue:.10g}\tbound={rep.best_bound:.10g}\t"
          f"nodes={rep.nodes}\tcuts={rep.cuts}\tseconds={rep.seconds:.3f}\tassortment={rep.assortment}")
    return 0


def cmd_oracle(args) -> int:
    inst = Instance.load(args.instance)
    s, rev = brute_force_optimum(inst)
    print(json.dumps({"assortment": sorted(s), "revenue": rev}))
    return 0


def cmd_bench(args) -> int:
    grid = bench.scale_grid(args.family, args.scale)
    forms = [f.strip() for f in args.formulations.split(",") if f.strip()]
    cfg = SolveConfig(time_limit=args.time_limit, rel_gap=args.gap)

    def progress(recs):
        for r in recs:
            print(f"{r.family} nu0={r.nu0:g} kappa={bench._kappa_label(r.kappa)} rep={r.rep} "
                  f"{r.formulation}: {r.status} rgap={r.rgap:.3f}% egap={r.egap:.3f}% t={r.seconds:.2f}s",
                  file=sys.stderr)

    recs = bench.run_suite(args.family, grid, forms, cfg, jobs=args.jobs, out=args.out, resume=args.resume,
                           reps=args.reps, seed=args.seed, progress=None if args.quiet else progress)
    if recs:
        print(bench.emit_table(recs, "markdown"))
    return 0


def cmd_report(args) -> int:
    recs = bench.load_records(args.input)
    _write(args.out, bench.emit_table(recs, args.format))
    return 0


def cmd_export(args) -> int:
    inst = Instance.load(args.instance)
    model = build(inst, args.model)
    cuts = None
    if args.linearize_only and model.cone_a:
        rep = solve(model, SolveConfig(root_only=True, keep_cuts=True, time_limit=args.time_limit))
        cuts = rep.cut_pool
    _write(args.out, write_lp(model, linearize_only=args.linearize_only, cuts=cuts, cone_form=args.cone_form))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="assortopt", description="Capacitated assortment optimization under MMNL")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance as JSON")
    g.add_argument("--family", required=True, choices=list(FAMILIES) + ["tiny"])
    g.add_argument("--nu0", type=float)
    g.add_argument("--kappa", help="budget, or 'k0,kk' for general-capacity")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rep", type=int, default=0)
    g.add_argument("--n-products", type=int)
    g.add_argument("--n-classes", type=int)
    g.add_argument("--symmetric", action="store_true", help="symmetric consideration graph (hard-graph)")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bounds", help="print the bounds table as TSV")
    b.add_argument("--instance", required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--model", required=True, choices=[k.value for k in FormulationKind])
    s.add_argument("--instance", required=True)
    s.add_argument("--report")
    s.add_argument("--time-limit", type=float, default=600.0)
    s.add_argument("--gap", type=float, default=1e-4, help="relative optimality gap")
    s.add_argument("--node-selection", default="best-bound", choices=["best-bound", "depth-first"])
    s.add_argument("--branching", default="most-fractional", choices=["most-fractional", "max-revenue-weight"])
    s.add_argument("--lp-backend", default="simplex", choices=["simplex", "highs"])
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="brute-force optimum of a tiny instance")
    o.add_argument("--instance", required=True)
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("bench", help="run a benchmark grid")
    r.add_argument("--family", required=True, choices=list(bench.DESK_GRIDS))
    r.add_argument("--scale", default="desk", choices=["desk", "paper"])
    r.add_argument("--formulations", default=",".join(bench.ALL_FORMULATIONS))
    r.add_argument("--jobs", type=int, default=None, help=f"worker processes (default ${bench.JOBS_ENV} or 1)")
    r.add_argument("--time-limit", type=float, default=600.0)
    r.add_argument("--gap", type=float, default=1e-4)
    r.add_argument("--reps", type=int, default=5)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="JSON-lines results file (appended)")
    r.add_argument("--resume", action="store_true", help="skip cells already in --out")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_bench)

    t = sub.add_parser("report", help="tabulate a results file")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--format", default="markdown", choices=["tsv", "markdown", "json"])
    t.add_argument("--out")
    t.set_defaults(func=cmd_report)

    e = sub.add_parser("export", help="write a formulation in LP format")
    e.add_argument("--instance", required=True)
    e.add_argument("--model", required=True, choices=[k.value for k in FormulationKind])
    e.add_argument("--linearize-only", action="store_true", help="replace cone rows by the root cut pool")
    e.add_argument("--cone-form", default="rotated", choices=["rotated", "l2"])
    e.add_argument("--time-limit", type=float, default=60.0, help="budget for the root cut loop")
    e.add_argument("--out")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

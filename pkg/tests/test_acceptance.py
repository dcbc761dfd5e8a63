"""Acceptance criteria. Each test records one PASS/FAIL line, printed in the terminal summary."""
import itertools
import math
import time

import numpy as np
import pytest

from assortopt.bb import OPTIMAL, SolveConfig, compute_gaps, solve
from assortopt.bench import DESK_GRIDS
from assortopt.bounds import bnd_relaxation_value, build_bounds_table, closed_form_cardinality
from assortopt.generators import GeneratorConfig, gen_tiny, gen_tiny_general, generate
from assortopt.instance import is_feasible
from assortopt.model import FormulationKind, build, validate_formulation_equivalence
from assortopt.oracle import brute_force_bnd, brute_force_optimum
from conftest import ACCEPTANCE_LINES

KINDS = [k.value for k in FormulationKind]
EXACT = SolveConfig(rel_gap=1e-10, abs_gap=1e-12)


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def tiny_suite(count, offset=0):
    """Seeded tiny instances: 4..12 products, 1..4 classes, random single cardinality budget."""
    for seed in range(offset, offset + count):
        yield gen_tiny(4 + seed % 9, 1 + (seed // 9) % 4, seed)


def feasible_points(inst):
    for bits in itertools.product((0, 1), repeat=inst.n_products):
        x = np.array(bits, float)
        if is_feasible(inst, x):
            yield x


def desk_instance(nu0, kappa, rep, seed=100):
    g = DESK_GRIDS["uniform200"]
    return generate(GeneratorConfig("uniform200", g["n_products"], g["n_classes"], nu0, kappa, seed, rep))


# the tiny oracle runs are shared by criteria 1 and 3
_ORACLE: dict = {}


def oracle_runs():
    if not _ORACLE:
        for inst in tiny_suite(200):
            _, best = brute_force_optimum(inst)
            _ORACLE[inst.seed] = (inst, best, {k: solve(build(inst, k), EXACT) for k in KINDS})
    return _ORACLE


def test_criterion_1_oracle_equivalence():
    t0 = time.perf_counter()
    runs = oracle_runs()
    secs = time.perf_counter() - t0
    worst, bad = 0.0, []
    for seed, (inst, best, reps) in runs.items():
        for k, rep in reps.items():
            err = abs(rep.revenue - best)
            worst = max(worst, err)
            if err > 1e-6 or rep.status != OPTIMAL:
                bad.append((seed, k))
    ok = not bad and len(runs) == 200 and secs < 120
    record(1, ok, f"200 tiny instances x 4 formulations, max |revenue - oracle| = {worst:.2e}, "
                  f"mismatches {len(bad)}, {secs:.1f}s (limit 120s)")


def test_criterion_2_bound_validity():
    # bounds and y(x) are the same sums taken in different orders; 1e-14 relative is pure rounding
    rtol = 1e-14
    violations, exact_misses, checks = 0, 0, 0
    worst_sandwich = worst_exact = 0.0
    for inst in tiny_suite(100):
        t = build_bounds_table(inst)
        kappa = inst.constraints[0].kappa
        for x in feasible_points(inst):
            y = 1.0 / (inst.nu0 + inst.nu @ x)
            yc = y[:, None]
            on, off = x > 0.5, x < 0.5
            excess = np.concatenate([(t.y_lo - y) / y, (y - t.y_hi) / y,
                                     ((t.y_lo_x1[:, on] - yc) / yc).ravel(), ((yc - t.y_hi_x1[:, on]) / yc).ravel(),
                                     ((t.y_lo_x0[:, off] - yc) / yc).ravel()])
            worst_sandwich = max(worst_sandwich, float(excess.max()))
            violations += int(np.sum(excess > rtol))
            checks += 1
        for i in range(inst.n_classes):
            for fixing in [None] + [(j, xi) for j in range(inst.n_products) for xi in (0, 1)]:
                got = closed_form_cardinality(inst, i, kappa, fixing)
                want = brute_force_bnd(inst, i, fixing)
                if got is None or want is None:
                    exact_misses += (got is None) != (want is None)
                    continue
                err = abs(got - want) / max(1.0, abs(want))
                worst_exact = max(worst_exact, err)
                exact_misses += err > rtol
    record(2, violations == 0 and exact_misses == 0,
           f"100 tiny instances, {checks} feasible points enumerated, sandwich violations {violations} "
           f"(max relative excess {worst_sandwich:.1e}); closed-form vs exhaustive BND mismatches {exact_misses} "
           f"(max relative difference {worst_exact:.1e}, rounding tolerance {rtol:g})")


def test_criterion_3_valid_inequalities():
    runs = oracle_runs()
    drift = 0.0
    for seed, (inst, best, reps) in list(runs.items())[:100]:
        # MILP carries neither family, MILP+MC adds McCormick rows, CONIC carries the facet rows, CONIC+MC both
        vals = [reps[k].revenue for k in KINDS]
        drift = max(drift, max(vals) - min(vals), abs(reps["milp"].revenue - best))
    record(3, drift <= 1e-8, f"100 tiny instances, max optimal-value drift across facet/MC variants {drift:.2e}")


def test_criterion_4_relaxation_ordering():
    worst, failures = -math.inf, []
    for inst in tiny_suite(50, offset=300):
        try:
            rep = validate_formulation_equivalence(inst)
        except AssertionError as exc:
            failures.append(str(exc))
            continue
        z = rep.zroot
        worst = max(worst, z["milp"] - z["milp-mc"], z["milp-mc"] - z["conic-mc"])
    root = SolveConfig(root_only=True)
    cells = [(nu0, kappa) for nu0 in (5.0, 10.0) for kappa in (5, 10, 25, 50)]
    desk = 0
    for k in range(20):
        nu0, kappa = cells[k % len(cells)]
        inst = desk_instance(nu0, kappa, rep=k // len(cells), seed=400)
        bounds = build_bounds_table(inst)
        z = {f: solve(build(inst, f, bounds), root).zroot for f in ("milp", "milp-mc", "conic-mc")}
        step = max(z["milp"] - z["milp-mc"], z["milp-mc"] - z["conic-mc"])
        worst = max(worst, step)
        if step > 1e-6:
            failures.append(f"desk nu0={nu0} kappa={kappa} rep={k // len(cells)}: {z}")
        desk += 1
    record(4, not failures, f"50 tiny + {desk} desk (50x10) instances, worst ordering violation {worst:.2e} "
                            f"(tolerance 1e-6), failures {len(failures)}")


_DESK5: list = []


def desk_trend_runs():
    if not _DESK5:
        root = SolveConfig(root_only=True)
        for nu0 in (5.0, 10.0):
            for kappa in (5, 10):
                for rep in range(5):
                    inst = desk_instance(nu0, kappa, rep)
                    bounds = build_bounds_table(inst)
                    full = solve(build(inst, "conic-mc", bounds), SolveConfig(time_limit=600))
                    roots = {f: solve(build(inst, f, bounds), root) for f in ("milp", "milp-mc")}
                    _DESK5.append((inst, full, roots))
    return _DESK5


def test_criterion_5_root_gap_trend():
    t0 = time.perf_counter()
    runs = desk_trend_runs()
    secs = time.perf_counter() - t0
    gaps = {f: [] for f in ("milp", "milp-mc", "conic-mc")}
    exact = 0
    for inst, full, roots in runs:
        zopt = full.zinc
        exact += full.status == OPTIMAL
        gaps["conic-mc"].append(compute_gaps(full, zopt)[0])
        for f, r in roots.items():
            gaps[f].append(compute_gaps(r, zopt)[0])
    avg = {f: float(np.mean(v)) for f, v in gaps.items()}
    ok = (avg["conic-mc"] < avg["milp-mc"] < avg["milp"] and avg["conic-mc"] < 2.0 and exact == len(runs)
          and secs < 900)
    record(5, ok, f"{len(runs)} desk instances (kappa 5,10; nu0 5,10), average rgap CONIC+MC {avg['conic-mc']:.2f}% "
                  f"< MILP+MC {avg['milp-mc']:.2f}% < MILP {avg['milp']:.2f}%, zopt proven on {exact}, "
                  f"{secs:.0f}s (limit 900s)")


def test_criterion_6_outer_approximation():
    worst = 0.0
    solved = 0
    for inst, full, _ in desk_trend_runs():
        worst = max(worst, full.root_cone_violation)
        solved += 1
    for k, inst in enumerate(itertools.islice(tiny_suite(100, offset=600), 30)):
        rep = solve(build(inst, "conic" if k % 2 else "conic-mc"), SolveConfig(root_only=True))
        worst = max(worst, rep.root_cone_violation)
        solved += 1
    bad_cuts, cuts_checked = 0, 0
    for k, inst in enumerate(tiny_suite(20, offset=700)):
        model = build(inst, "conic-mc" if k % 2 else "conic")
        pool = solve(model, SolveConfig(keep_cuts=True)).cut_pool
        points = np.array([model.complete(inst, frozenset(np.flatnonzero(x))) for x in feasible_points(inst)])
        for cols, vals, sense, rhs in pool:
            act = points[:, list(cols)] @ np.asarray(vals)
            bad_cuts += int(np.any(act < rhs - 1e-9))
            cuts_checked += 1
    record(6, worst <= 1e-6 and bad_cuts == 0,
           f"root cone violation max {worst:.2e} over {solved} instances (limit 1e-6); "
           f"{cuts_checked} cuts checked against every integer completion, {bad_cuts} invalid")


@pytest.mark.stretch
def test_criterion_7_full_scale_stretch():
    lines, ok = [], True
    for nu0 in (5.0, 10.0):
        for kappa in (10, 20, 50, 100, 200):
            inst = generate(GeneratorConfig.full("uniform200", nu0, kappa, seed=7))
            rep = solve(build(inst, "conic-mc"), SolveConfig(time_limit=600))
            egap = 100 * abs(rep.zinc - rep.zbb) / abs(rep.zinc)
            lines.append(f"nu0={nu0:g} kappa={kappa}: {rep.status} egap {egap:.3f}% {rep.seconds:.0f}s")
            if kappa >= 100:
                ok &= egap <= 1.0
    record(7, ok, "200x20 CONIC+MC, 600s limit; " + "; ".join(lines))


def test_criterion_8_general_capacity_bounds():
    pairs = dominated = 0
    for seed in range(40):
        inst = gen_tiny_general(5 + seed % 8, 1 + seed % 3, seed)
        for i in range(inst.n_classes):
            for fixing in [None] + [(j, xi) for j in range(inst.n_products) for xi in (0, 1)]:
                exact = brute_force_bnd(inst, i, fixing)
                relax = bnd_relaxation_value(inst, i, fixing)
                pairs += 1
                if exact is None:
                    dominated += 1  # nothing to bound; relax may still be finite
                elif relax is not None and relax >= exact - 1e-12:
                    dominated += 1
    g = DESK_GRIDS["general-capacity"]
    bound_secs = solve_secs = 0.0
    for k, pair in enumerate(g["kappa"]):
        inst = generate(GeneratorConfig("general-capacity", g["n_products"], g["n_classes"], g["nu0"][k % 2],
                                        pair, seed=800))
        if k == 0:
            build_bounds_table(inst)  # load compiled kernels outside the timed region
        t0 = time.perf_counter()
        bounds = build_bounds_table(inst)
        bound_secs += time.perf_counter() - t0
        solve_secs += solve(build(inst, "conic-mc", bounds), SolveConfig(time_limit=600)).seconds
    ratio = bound_secs / solve_secs
    record(8, dominated == pairs and ratio < 0.01,
           f"{dominated}/{pairs} (class, fixing) pairs dominated; bound time {1000 * bound_secs:.1f} ms is "
           f"{100 * ratio:.3f}% of CONIC+MC solve time {solve_secs:.1f}s over {len(g['kappa'])} desk instances "
           f"(limit 1%)")

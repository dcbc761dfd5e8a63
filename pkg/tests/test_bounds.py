import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from assortopt.bounds import (BoundsTable, bnd_relaxation_value, build_bounds_table, closed_form_cardinality,
                              greedy_knapsack_values, subset_cardinality_values)
from assortopt.generators import gen_tiny, gen_tiny_general
from assortopt.instance import CapacityConstraint, Instance, is_feasible
from assortopt.oracle import brute_force_bnd
from conftest import make_toy


def test_toy_table():
    t = build_bounds_table(make_toy())
    assert t.y_lo[0] == pytest.approx(1 / 3)
    assert t.y_hi[0] == 1.0
    assert t.y_hi_x1[0, 0] == pytest.approx(1 / 2)
    assert t.y_lo_x1[0, 0] == pytest.approx(1 / 2)
    assert t.y_lo_x0[0, 1] == pytest.approx(1 / 2)
    assert t.y_lo_x0[0, 0] == pytest.approx(1 / 3)
    assert t.x1_ok.all()


def test_toy_relaxation_values():
    toy = make_toy()
    assert bnd_relaxation_value(toy, 0) == 2.0
    assert bnd_relaxation_value(toy, 0, (1, 1)) == 2.0
    assert bnd_relaxation_value(toy, 0, (0, 1)) == 1.0
    assert closed_form_cardinality(toy, 0, 1) == 2.0
    assert closed_form_cardinality(toy, 0, 1, (0, 1)) == 1.0  # kappa - 1 = 0 terms


def test_closed_form_slack_capacity():
    toy = make_toy(kappa=5)
    assert closed_form_cardinality(toy, 0, 5) == 3.0
    assert build_bounds_table(toy).y_lo[0] == pytest.approx(1 / 4)


def test_closed_form_errors():
    toy = make_toy(kappa=0)
    with pytest.raises(ValueError):
        closed_form_cardinality(toy, 0, -1)
    assert closed_form_cardinality(toy, 0, 0, (1, 1)) is None
    assert bnd_relaxation_value(toy, 0, (1, 1)) is None
    t = build_bounds_table(toy)
    assert not t.x1_ok.any()
    _, lo1, _, _ = t.mc_coefficients()
    assert np.allclose(lo1, t.y_lo[:, None])
    with pytest.raises(IndexError):
        bnd_relaxation_value(toy, 0, (2, 0))


def test_greedy_knapsack_example():
    c = CapacityConstraint.general([2.0, 1.0], 2.0)
    total, _, _ = greedy_knapsack_values(np.array([3.0, 2.0]), c)
    assert total == pytest.approx(3.5)


def test_greedy_zero_weight_items_first():
    c = CapacityConstraint.general([0.0, 1.0, 1.0], 1.0)
    total, _, f1 = greedy_knapsack_values(np.array([0.5, 2.0, 1.0]), c)
    assert total == pytest.approx(2.5)
    assert f1[2] == pytest.approx(1.5)


def test_overlapping_subsets_rejected_when_exact():
    cons = [CapacityConstraint.subset(3, [0, 1], 1), CapacityConstraint.subset(3, [1, 2], 1)]
    with pytest.raises(ValueError):
        subset_cardinality_values(np.ones(3), cons)


def test_zero_preferences():
    inst = Instance([1.0], [2.0], [[0.0, 0.0, 0.0]], [[1.0, 1.0, 1.0]], (CapacityConstraint.cardinality(3, 1),))
    t = build_bounds_table(inst)
    for arr in (t.y_lo, t.y_hi, t.y_lo_x0, t.y_lo_x1, t.y_hi_x1):
        assert np.allclose(arr, 0.5)


def _feasible_points(inst):
    n = inst.n_products
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits, float)
        if is_feasible(inst, x):
            yield x


def _check_sandwich(inst, t):
    tol = 1e-12
    for x in _feasible_points(inst):
        y = 1.0 / (inst.nu0 + inst.nu @ x)
        assert np.all(t.y_lo <= y + tol) and np.all(y <= t.y_hi + tol)
        for j in range(inst.n_products):
            if x[j]:
                assert t.x1_ok[:, j].all()
                assert np.all(t.y_lo_x1[:, j] <= y + tol) and np.all(y <= t.y_hi_x1[:, j] + tol)
            else:
                assert np.all(t.y_lo_x0[:, j] <= y + tol)


@pytest.mark.parametrize("seed", range(12))
def test_sandwich_cardinality(seed):
    inst = gen_tiny(3 + seed % 8, 1 + seed % 3, seed)
    _check_sandwich(inst, build_bounds_table(inst))


@pytest.mark.parametrize("seed", range(8))
def test_sandwich_general(seed):
    inst = gen_tiny_general(6 + seed % 5, 1 + seed % 3, seed)
    _check_sandwich(inst, build_bounds_table(inst))


@pytest.mark.parametrize("seed", range(10))
def test_table_invariants(seed):
    inst = gen_tiny(4 + seed % 8, 1 + seed % 4, seed)
    t = build_bounds_table(inst)
    assert np.all(t.y_lo > 0) and np.all(t.y_lo <= t.y_hi)
    assert np.allclose(t.y_hi, 1 / inst.nu0)
    assert np.allclose(t.y_hi_x1, 1 / (inst.nu0[:, None] + inst.nu))
    assert np.all(t.y_hi_x1 <= t.y_hi[:, None])
    assert np.all(t.y_hi_x1[inst.nu > 0] < np.repeat(t.y_hi[:, None], inst.n_products, 1)[inst.nu > 0])
    assert np.all(t.y_lo_x0 >= t.y_lo[:, None] - 1e-15)
    assert np.all(t.y_lo_x1[t.x1_ok] >= np.repeat(t.y_lo[:, None], inst.n_products, 1)[t.x1_ok] - 1e-15)


@given(seed=st.integers(0, 10_000), n=st.integers(1, 10), kappa=st.integers(0, 10))
def test_closed_form_is_exact(seed, n, kappa):
    rng = np.random.default_rng(seed)
    inst = Instance([1.0], [1.0], rng.uniform(0, 1, (1, n)), np.ones((1, n)),
                    (CapacityConstraint.cardinality(n, kappa),))
    assert closed_form_cardinality(inst, 0, kappa) == pytest.approx(brute_force_bnd(inst, 0), abs=1e-12)
    for j in range(n):
        for xi in (0, 1):
            got = closed_form_cardinality(inst, 0, kappa, (j, xi))
            want = brute_force_bnd(inst, 0, (j, xi))
            if want is None:
                assert got is None
            else:
                assert got == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("seed", range(15))
def test_general_dominates_exact(seed):
    inst = gen_tiny_general(5 + seed % 8, 2, seed)
    for i in range(inst.n_classes):
        assert bnd_relaxation_value(inst, i) >= brute_force_bnd(inst, i) - 1e-12
        for j in range(inst.n_products):
            for xi in (0, 1):
                exact = brute_force_bnd(inst, i, (j, xi))
                relax = bnd_relaxation_value(inst, i, (j, xi))
                if relax is None:
                    assert exact is None
                elif exact is not None:
                    assert relax >= exact - 1e-12


def test_trivial_table_shapes():
    toy = make_toy()
    t = BoundsTable.trivial(toy)
    assert t.y_lo.shape == (1,) and t.y_lo_x0.shape == (1, 2)
    assert np.all(t.y_hi_x1 == 1.0)


def test_tsv_output():
    text = build_bounds_table(make_toy(kappa=0)).to_tsv()
    lines = text.strip().split("\n")
    assert len(lines) == 3 and "NA" in lines[1]

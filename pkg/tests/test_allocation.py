import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from funq.allocation import (BlockAllocation, _criterion_logs, _leading, block_length,
                             brute_force_plan, objective, plan)
from funq.process_models import EigenModel, eigenvalue, tail_sum

INV_SQUARE = EigenModel.explicit([1.0], tail=2.0)
BROWNIAN = EigenModel.brownian()


def test_example_inverse_square():
    a = plan(INV_SQUARE, 10, l_override=1)
    assert (a.m, a.sizes) == (3, (3, 1, 1))
    crit = np.exp(_criterion_logs(10, _leading(INV_SQUARE, 1, 4), 1))
    assert np.allclose(crit, [10, 2.236, 1.305, 0.984], atol=1e-3)


def test_n_one():
    a = plan(BROWNIAN, 1)
    assert (a.l, a.m, a.sizes) == (1, 1, (1,))


def test_block_length():
    assert block_length(math.ceil(math.exp(9)), 0.5) == 3
    assert block_length(1, 0.5) == 1
    with pytest.raises(ValueError):
        block_length(10, 1.5)


def test_allocation_validation():
    with pytest.raises(ValueError):
        BlockAllocation(n=4, theta=None, l=1, m=2, sizes=(1, 2))
    with pytest.raises(ValueError):
        BlockAllocation(n=3, theta=None, l=1, m=2, sizes=(2, 2))


def test_objective_examples():
    C = {1: 2.0}
    a = BlockAllocation(n=2, theta=None, l=1, m=1, sizes=(2,))
    lam1 = 4 / math.pi ** 2
    assert objective(BROWNIAN, a, C) == pytest.approx(2.0 * lam1 / 4 + (0.5 - lam1), rel=1e-12)
    ones = BlockAllocation(n=5, theta=None, l=2, m=3, sizes=(1, 1, 1))
    lead = [eigenvalue(BROWNIAN, k) for k in (1, 3, 5)]
    assert objective(BROWNIAN, ones, {2: 3.0}) == pytest.approx(3.0 * sum(lead) + tail_sum(BROWNIAN, 6))


def test_objective_decreases_when_sizes_double():
    C = {1: 2.7}
    a = BlockAllocation(n=100, theta=None, l=1, m=2, sizes=(4, 2))
    b = BlockAllocation(n=100, theta=None, l=1, m=2, sizes=(8, 4))
    assert objective(BROWNIAN, b, C) < objective(BROWNIAN, a, C)


def test_brute_force_trivial_budget():
    b = brute_force_plan(INV_SQUARE, 1, 1, {1: 2.7})
    assert b.m == 0
    assert objective(INV_SQUARE, b, {1: 2.7}) == pytest.approx(math.pi ** 2 / 6)


def test_brute_force_matches_exhaustive_enumeration():
    # independent oracle: every non-increasing tuple of sizes with product <= n
    C = {1: 2.7}
    n = 60

    def tuples(budget, cap, depth):
        yield ()
        if depth == 0:
            return
        for s in range(2, min(cap, budget) + 1):
            for rest in tuples(budget // s, s, depth - 1):
                yield (s,) + rest

    best = min(objective(BROWNIAN, BlockAllocation(n, None, 1, len(t), t), C) for t in tuples(n, n, 6))
    b = brute_force_plan(BROWNIAN, n, 1, C)
    assert objective(BROWNIAN, b, C) == pytest.approx(best, rel=1e-14)


def test_brute_force_limit():
    with pytest.raises(ValueError):
        brute_force_plan(BROWNIAN, 10**5, 1, {1: 2.7})


@pytest.mark.xfail(strict=True, reason="with l_n growing like sqrt(log n) the block-count ratio "
                   "drifts from 0.87 to 0.72 over 1e3..1e12; convergence is far slower than desk scale")
def test_block_count_trend():
    # m(n, l_n) l_n / (2 log n / b) -> 1
    devs = []
    for n in (1e3, 1e6, 1e9, 1e12):
        a = plan(BROWNIAN, int(n))
        devs.append(abs(a.m * a.l / (2 * math.log(n) / BROWNIAN.b) - 1))
    assert all(a > b for a, b in zip(devs, devs[1:])), devs


def test_block_count_scalar_blocks():
    for n in (10**6, 10**12, 10**30):
        a = plan(BROWNIAN, n, l_override=1)
        assert a.m / (2 * math.log(n) / BROWNIAN.b) == pytest.approx(1.0, abs=0.02)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10**9), st.sampled_from([None, 1, 2, 3]), st.floats(0.2, 0.8),
       st.sampled_from([BROWNIAN, INV_SQUARE, EigenModel.riemann_liouville(1.2)]))
def test_plan_invariants(n, l, theta, model):
    a = plan(model, n, theta, l)
    assert a.product <= n
    assert all(s >= 1 for s in a.sizes)
    assert list(a.sizes) == sorted(a.sizes, reverse=True)
    crit = _criterion_logs(n, _leading(model, a.l, a.m + 1), a.l)
    if n > 1:
        assert crit[a.m - 1] >= -1e-9
        assert crit[a.m] < 1e-9

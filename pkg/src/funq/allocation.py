"""Bit allocation across Karhunen-Loeve coefficient blocks.

Given a budget of ``n`` codewords, the functional quantizer spends them on
``m`` blocks of ``l`` consecutive coefficients with per-block sizes
``n_1 >= ... >= n_m`` and ``prod n_j <= n``.  The surrogate objective is

    C(l) * sum_j lambda_{(j-1)l+1} * n_j**(-2/l) + sum_{i > m l} lambda_i

:func:`plan` evaluates the closed-form asymptotic choice; :func:`brute_force_plan`
searches the surrogate exactly for small budgets.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

import numpy as np

from .process_models import EigenModel, eigenvalues, tail_sum

log = logging.getLogger(__name__)

BRUTE_FORCE_MAX_N = 10_000
DEFAULT_THETA = 0.5


@dataclass(frozen=True)
class BlockAllocation:
    n: int
    theta: Optional[float]
    l: int
    m: int
    sizes: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.m != len(self.sizes):
            raise ValueError("m must equal the number of block sizes")
        if any(s < 1 for s in self.sizes):
            raise ValueError("block sizes must be >= 1")
        if any(self.sizes[i] < self.sizes[i + 1] for i in range(self.m - 1)):
            raise ValueError("block sizes must be non-increasing")
        if self.product > self.n:
            raise ValueError(f"product of block sizes {self.product} exceeds budget {self.n}")

    @property
    def product(self) -> int:
        return math.prod(self.sizes)

    @property
    def coefficients(self) -> int:
        """Number of quantized KL coefficients, ``m * l``."""
        return self.m * self.l

    def csv_row(self, objective_value: float):
        return [self.n, "" if self.theta is None else f"{self.theta:.17g}", self.l, self.m,
                " ".join(map(str, self.sizes)), f"{objective_value:.17g}"]


def block_length(n: int, theta: float) -> int:
    """``l_n = [max(1, log n)**theta]`` with the natural logarithm."""
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    return max(1, int(math.floor(max(1.0, math.log(n)) ** theta)))


def _leading(model: EigenModel, l: int, count: int) -> np.ndarray:
    """``lambda_{(j-1)l+1}`` for j = 1..count (the largest eigenvalue in each block)."""
    lam = eigenvalues(model, (count - 1) * l + 1)
    return lam[::l][:count]


def _k_max(model: EigenModel, n: int, l: int) -> int:
    if model.finite:
        return max(1, len(model.values) // l)
    return int(math.ceil(4.0 * math.log(max(n, 2)) / (model.b * l))) + 16


def _criterion_logs(n: int, lead: np.ndarray, l: int) -> np.ndarray:
    """log of ``n^(1/k) lambda_k^(l/2) (prod_{j<=k} lambda_j)^(-l/2k)`` for each k."""
    k = np.arange(1, lead.size + 1)
    logs = np.log(lead)
    return math.log(n) / k + 0.5 * l * (logs - np.cumsum(logs) / k)


def plan(model: EigenModel, n: int, theta: float = DEFAULT_THETA,
         l_override: Optional[int] = None) -> BlockAllocation:
    """Closed-form allocation: block length, block count, then block sizes."""
    if int(n) != n or n < 1:
        raise ValueError(f"budget n must be a positive integer, got {n}")
    n = int(n)
    if l_override is not None:
        if l_override < 1:
            raise ValueError("block length must be >= 1")
        l = int(l_override)
        block_length(n, theta)  # validates theta
    else:
        l = block_length(n, theta)
    lead = _leading(model, l, _k_max(model, n, l))
    crit = _criterion_logs(n, lead, l)
    # tiny slack so exact ties (e.g. n = 1) resolve to the true integer answer
    ok = np.nonzero(crit >= -1e-12)[0]
    m = int(ok[-1]) + 1
    if n == 1:
        m = 1
    lead = lead[:m]
    logs = np.log(lead)
    raw = np.exp(math.log(n) / m + 0.5 * l * (logs - logs.sum() / m))
    sizes = np.floor(raw * (1 + 1e-12)).astype(int)
    if math.prod(int(s) for s in sizes) > n:
        sizes = np.floor(raw).astype(int)
    if np.any(sizes < 1):
        log.warning("clamping floored block sizes %s to 1 (n=%d, l=%d)", sizes.tolist(), n, l)
        sizes = np.maximum(sizes, 1)
    return BlockAllocation(n=n, theta=theta, l=l, m=m, sizes=tuple(int(s) for s in sizes))


def _c_of(C_table: Mapping[int, float], l: int) -> float:
    try:
        return float(C_table[l])
    except KeyError:
        raise KeyError(f"C_table has no entry for block length {l}") from None


def objective(model: EigenModel, alloc: BlockAllocation, C_table: Mapping[int, float]) -> float:
    """Surrogate distortion bound for an allocation (see module docstring)."""
    tail = tail_sum(model, alloc.coefficients)
    if alloc.m == 0:
        return tail
    lead = _leading(model, alloc.l, alloc.m)
    sizes = np.asarray(alloc.sizes, dtype=float)
    head = _c_of(C_table, alloc.l) * float(np.sum(lead * sizes ** (-2.0 / alloc.l)))
    return head + tail


def brute_force_plan(model: EigenModel, n: int, l: int,
                     C_table: Mapping[int, float]) -> BlockAllocation:
    """Exact minimizer of the surrogate objective for a fixed block length.

    Blocks of size 1 never beat truncation when ``C(l) >= l`` and the sizes of
    an optimum can be taken non-increasing, so the search runs over
    non-increasing factor sequences ``n_1 >= n_2 >= ... >= 2`` with product at
    most ``n``.  Subtrees whose head term alone already exceeds the incumbent
    are pruned.
    """
    if n < 1:
        raise ValueError("budget n must be >= 1")
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute-force search limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    C = _c_of(C_table, l)
    depth = max(1, int(math.floor(math.log2(n)))) if n > 1 else 0
    if model.finite:
        depth = min(depth, len(model.values) // l)
    lead = _leading(model, l, depth) if depth else np.zeros(0)
    tails = [tail_sum(model, k * l) for k in range(depth + 1)]
    power = -2.0 / l

    best_value = tails[0]
    best_sizes: Tuple[int, ...] = ()

    def search(j, budget, cap, head, sizes):
        nonlocal best_value, best_sizes
        value = head + tails[j]
        if value < best_value:
            best_value, best_sizes = value, sizes
        if j >= depth:
            return
        for s in range(min(cap, budget), 1, -1):
            h = head + C * lead[j] * s ** power
            if h >= best_value:
                # larger j-terms only grow as s shrinks
                break
            search(j + 1, budget // s, s, h, sizes + (s,))

    search(0, n, n, 0.0, ())
    return BlockAllocation(n=n, theta=None, l=l, m=len(best_sizes), sizes=best_sizes)

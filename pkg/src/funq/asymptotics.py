"""High-resolution formulas for quantization and metric entropy of Gaussian processes.

Everything here is an *asymptotic prediction* (n -> infinity).  Comparisons
against constructed quantizers should be read as ratios to theory.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from scipy.optimize import bisect

from .process_models import EigenModel, tail_sum

CAVEAT = "asymptotic prediction"
Q1 = math.pi * math.sqrt(3.0) / 2.0  # lim k^2 e_k(N(0,1))^2


@dataclass(frozen=True)
class RatePrediction:
    n: float
    value: float
    theorem: str
    caveat: str = CAVEAT


def _require_n(n):
    if not n >= 3:
        raise ValueError(f"asymptotic formulas need n >= 3 (log n > 1), got {n}")


def _require_regvar(model: EigenModel):
    if model.b is None:
        raise ValueError(f"model {model.label()} has no regular-variation index")


def quantization_rate(model: EigenModel, n: float) -> RatePrediction:
    """``e_n(X) ~ ((b/2)^(b-1) b/(b-1))^(1/2) psi(log n)^(-1/2)`` for index ``b > 1``."""
    _require_n(n)
    _require_regvar(model)
    b = model.b
    if not b > 1:
        raise ValueError(f"quantization rate needs b > 1, got b = {b}")
    x = math.log(n)
    rv = model.regvar()
    const = ((b / 2.0) ** (b - 1.0) * b / (b - 1.0)) ** 0.5
    return RatePrediction(n, const * rv.psi(x) ** -0.5, "quantization")


def entropy_rate(model: EigenModel, n: float) -> RatePrediction:
    """Entropy numbers of the Strassen ball: ``(b/2)^(b/2) phi(log n)^(1/2)``."""
    _require_n(n)
    _require_regvar(model)
    b = model.b
    return RatePrediction(n, (b / 2.0) ** (b / 2.0) * model.regvar().phi(math.log(n)) ** 0.5,
                          "entropy")


def rl_quantization_rate(rho: float, n: float) -> float:
    """Closed form for the Riemann-Liouville process of index ``rho``."""
    _require_n(n)
    return (math.pi ** -(rho + 0.5) * (rho + 0.5) ** rho * ((2 * rho + 1) / (2 * rho)) ** 0.5
            * math.gamma(rho + 0.5) * math.log(n) ** -rho)


def ibm_quantization_rate(beta: float, n: float) -> float:
    """Closed form for fractionally integrated Brownian motion of order ``beta``."""
    _require_n(n)
    return (math.pi ** -(beta + 1) * (beta + 1) ** (beta + 0.5)
            * ((2 * beta + 2) / (2 * beta + 1)) ** 0.5 * math.log(n) ** -(beta + 0.5))


def rl_entropy_rate(rho: float, n: float) -> float:
    """Entropy numbers of the fractional Sobolev ball of the RL process."""
    _require_n(n)
    return ((rho + 0.5) / math.pi) ** (rho + 0.5) * math.gamma(rho + 0.5) * math.log(n) ** -(rho + 0.5)


def fbm_ratio(rho: float) -> float:
    """Limit of ``e_n(X^rho) / e_n(Z^rho)`` (RL process over fractional Brownian motion)."""
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    return math.gamma(rho + 0.5) / math.sqrt(math.gamma(2 * rho + 1) * math.sin(math.pi * rho))


def rho_star(lo: float = 0.6, hi: float = 0.95, xtol: float = 1e-10) -> float:
    """The second index (besides 1/2) at which the fBm ratio equals one."""
    f = lambda r: fbm_ratio(r) - 1.0
    if f(lo) * f(hi) >= 0:
        raise RuntimeError("fbm_ratio - 1 does not change sign on the bracket")
    return bisect(f, lo, hi, xtol=xtol)


def rl32_performance_constant(c1: float = Q1) -> float:
    """Upper constant ``(3 (12 C(1) + 1) / 4)^(1/2)`` of the scalar product
    quantizer for ``int_0^t W_s ds`` relative to ``e_n``."""
    return math.sqrt(3.0 * (12.0 * c1 + 1.0) / 4.0)


@dataclass(frozen=True)
class DimensionProfile:
    n: float
    c_n: int
    lower_bound: float

    @property
    def ratio(self) -> float:
        return self.c_n / self.lower_bound


def dimension_profile(model: EigenModel, n: float, k_limit: int = 10_000_000) -> DimensionProfile:
    """``c_n = min{k : sum_{j>k} lambda_j <= e_n^2}`` (with the predicted e_n) and
    the lower bound ``b^(-1/(b-1)) 2 log n / b``."""
    target = quantization_rate(model, n).value ** 2
    b = model.b
    # tail_sum is decreasing in k: bisect for the first k meeting the target
    lo, hi = 0, 1
    while tail_sum(model, hi) > target:
        lo, hi = hi, hi * 2
        if hi > k_limit:
            raise RuntimeError("c_n search exceeded k_limit")
    if tail_sum(model, lo) <= target:
        hi = lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_sum(model, mid) <= target:
            hi = mid
        else:
            lo = mid
    bound = b ** (-1.0 / (b - 1.0)) * 2.0 * math.log(n) / b
    return DimensionProfile(n=n, c_n=hi, lower_bound=bound)


@dataclass(frozen=True)
class CapacityReport:
    per_l: dict            # l -> {"C": .., "Q": .., "C/l": .., "Q/l": ..}
    q1_ok: bool
    c_over_l_ok: bool
    q_over_l_decreasing: bool
    scaling_ok: bool

    @property
    def ok(self) -> bool:
        return self.q1_ok and self.c_over_l_ok and self.q_over_l_decreasing and self.scaling_ok


def capacity_limit_check(C_table: Mapping[int, float], Q_table: Optional[Mapping[int, float]] = None,
                         tolerance: float = 0.02) -> CapacityReport:
    """Desk-scale checks of the block-length behaviour of ``C(l)`` and ``Q(l)``.

    ``inf_l C(l)/l = 1`` is only reached as ``l -> infinity``; here we check
    ``C(l)/l >= 1 - tolerance``, ``Q(1)`` against ``pi sqrt(3) / 2``, a
    decreasing ``Q(l)/l`` trend, and ``C(l) <= 4 l C(1) (1 + tolerance)``.
    """
    Q_table = Q_table or C_table
    ls = sorted(C_table)
    per_l = {l: {"C": C_table[l], "Q": Q_table.get(l, float("nan")),
                 "C/l": C_table[l] / l, "Q/l": Q_table.get(l, float("nan")) / l} for l in ls}
    q1_ok = 1 in Q_table and abs(Q_table[1] / Q1 - 1) <= tolerance
    c_ok = all(C_table[l] / l >= 1 - tolerance for l in ls)
    ql = [Q_table[l] / l for l in sorted(Q_table)]
    dec = all(a > b for a, b in zip(ql, ql[1:]))
    scaling = 1 not in C_table or all(C_table[l] <= 4.0 * l * C_table[1] * (1 + tolerance) for l in ls)
    return CapacityReport(per_l, q1_ok, c_ok, dec, scaling)


CSV_COLUMNS = ("theorem", "model", "n", "predicted", "achieved", "ratio")


def write_comparison_csv(path, rows: Iterable[tuple]):
    """Rows of ``(theorem, model, n, predicted, achieved, ratio)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for theorem, model, n, pred, ach, ratio in rows:
            w.writerow([theorem, model, n, f"{pred:.17g}", f"{ach:.17g}", f"{ratio:.17g}"])

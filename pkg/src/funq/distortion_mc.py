"""Monte-Carlo measurement of ``E min_a ||X - a||^2`` for a product quantizer.

Paths are simulated through their first J expansion coefficients; the
variance carried by coefficients past J is added analytically, so the
estimator has no truncation bias.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._random import normal_batches
from .asymptotics import quantization_rate
from .process_models import EigenModel, basis_functions, rl32_weight_tail, tail_sum
from .product_quantizer import DEFAULT_ENUM_LIMIT, ProductQuantizer, codeword_matrix
from .vector_quantizer import assign

MODES = ("product", "voronoi")
QUADRATURE_INTERVALS = 1 << 12
_BATCH = 1 << 15


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    samples: int
    truncation: int
    tail: float
    mode: str
    seed: int
    quadrature: Optional[str] = None

    def report(self) -> str:
        lines = [f"mode = {self.mode}", f"samples = {self.samples}", f"seed = {self.seed}",
                 f"truncation = {self.truncation}", f"tail = {self.tail:.17g}",
                 f"mean = {self.mean:.17g}", f"stderr = {self.stderr:.17g}"]
        if self.quadrature:
            lines.append(f"quadrature = {self.quadrature}")
        return "\n".join(lines) + "\n"


def default_truncation(pq: ProductQuantizer) -> int:
    return max(64, 4 * pq.alloc.coefficients)


def _gram(J: int) -> np.ndarray:
    """Trapezoidal Gram matrix of ``R_1 u_1..R_1 u_J`` on a uniform 2^12-interval grid."""
    t = np.linspace(0.0, 1.0, QUADRATURE_INTERVALS + 1)
    B = basis_functions(EigenModel.rl_three_halves(), J)(t)
    w = np.full(t.size, 1.0 / QUADRATURE_INTERVALS)
    w[0] = w[-1] = 0.5 / QUADRATURE_INTERVALS
    return (B * w) @ B.T


def _metric_root(pq: ProductQuantizer, J: int):
    """Return (diag, full): squared error is ``||diag * e||^2`` or ``||e @ full||^2``."""
    scales = pq.coefficient_scales(J)
    if pq.model.kind != "rl32":
        return scales, None
    M = scales[:, None] * _gram(J) * scales[None, :]
    vals, vecs = np.linalg.eigh(M)
    return None, vecs * np.sqrt(np.clip(vals, 0.0, None))


def _product_cell(pq: ProductQuantizer, Z: np.ndarray) -> np.ndarray:
    """Replace the first m l columns of Z by their block-wise quantizations."""
    Zq = np.zeros_like(Z)
    l = pq.l
    for j, b in enumerate(pq.blocks):
        cols = slice(j * l, (j + 1) * l)
        if l == 1:
            Zq[:, cols] = np.asarray(b.points)[b.quantize_index(Z[:, j])][:, None]
        else:
            Zq[:, cols] = b.points[b.quantize_index(Z[:, cols])]
    return Zq


def estimate(pq: ProductQuantizer, samples: int = 100_000, truncation: Optional[int] = None,
             seed: int = 0, mode: str = "product", enum_limit: int = DEFAULT_ENUM_LIMIT) -> MCEstimate:
    """Estimate the quadratic distortion of ``pq`` from ``samples`` simulated paths.

    ``mode="product"`` quantizes each block with its own codebook (the
    quantizer as built); ``mode="voronoi"`` maps each path to the nearest
    enumerated codeword in L^2, which can only lower the error.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if samples < 1000:
        raise ValueError("use at least 10^3 samples")
    ml = pq.alloc.coefficients
    J = truncation or default_truncation(pq)
    if J < ml:
        raise ValueError(f"truncation J={J} is below the {ml} quantized coefficients")
    diag, root = _metric_root(pq, J)
    if pq.model.kind == "rl32":
        tail = rl32_weight_tail(J)
        quad = f"trapezoid, {QUADRATURE_INTERVALS} uniform intervals on [0, 1]"
    else:
        tail = tail_sum(pq.model, J)
        quad = None

    if mode == "voronoi":
        codes, _ = codeword_matrix(pq, enum_limit)
        codes = np.concatenate([codes, np.zeros((codes.shape[0], J - ml))], axis=1)
        codes_t = codes * diag if root is None else codes @ root

    total = 0.0
    total_sq = 0.0
    for Z in normal_batches(seed, samples, J, batch=_BATCH):
        if mode == "product":
            E = Z - _product_cell(pq, Z)
            Et = E * diag if root is None else E @ root
            err = np.einsum("ij,ij->i", Et, Et)
        else:
            Zt = Z * diag if root is None else Z @ root
            _, err = assign(Zt, codes_t)
        total += float(np.sum(err))
        total_sq += float(np.sum(err * err))
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return MCEstimate(mean=mean + tail, stderr=math.sqrt(var / samples), samples=samples,
                      truncation=J, tail=tail, mode=mode, seed=seed, quadrature=quad)


@dataclass(frozen=True)
class TheoryComparison:
    n: int
    achieved: float
    achieved_stderr: float
    predicted: float
    ratio: float
    ratio_stderr: float

    def report(self) -> str:
        return "\n".join([
            f"n = {self.n}", f"achieved_error = {self.achieved:.17g}",
            f"achieved_stderr = {self.achieved_stderr:.17g}",
            f"predicted_error = {self.predicted:.17g} (asymptotic prediction)",
            f"ratio = {self.ratio:.17g}", f"ratio_stderr = {self.ratio_stderr:.17g}"]) + "\n"


def compare_to_theory(pq: ProductQuantizer, est: MCEstimate) -> TheoryComparison:
    """``sqrt(measured distortion) / predicted e_n`` with a delta-method error bar."""
    n = pq.alloc.n
    if n < 3:
        raise ValueError("the high-resolution prediction is undefined for n < 3")
    pred = quantization_rate(pq.model, n).value
    achieved = math.sqrt(est.mean)
    se = est.stderr / (2.0 * achieved)
    return TheoryComparison(n=n, achieved=achieved, achieved_stderr=se, predicted=pred,
                            ratio=achieved / pred, ratio_stderr=se / pred)


CSV_COLUMNS = ("model", "n", "mode", "samples", "mean", "stderr", "theory", "ratio")


def csv_row(pq: ProductQuantizer, est: MCEstimate, cmp: Optional[TheoryComparison] = None) -> list:
    theory = "" if cmp is None else f"{cmp.predicted:.17g}"
    ratio = "" if cmp is None else f"{cmp.ratio:.17g}"
    return [pq.model.label(), pq.alloc.n, est.mode, est.samples, f"{est.mean:.17g}",
            f"{est.stderr:.17g}", theory, ratio]

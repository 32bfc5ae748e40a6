"""Optimal quadratic quantization of the standard normal distribution.

The N(0, 1) density is log-concave, so for every n there is exactly one
stationary n-quantizer and it is the optimal one.  We find it with a damped
Newton-Raphson iteration on the stationarity system

    F_i(a) = a_i * P(Z in C_i) - E[Z; Z in C_i] = 0,

whose Jacobian is tridiagonal.  Distortion, cell weights and the gradient all
have closed forms in the normal cdf and density.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import ndtr, ndtri

log = logging.getLogger(__name__)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
MAX_ITER = 200
TOL = 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, n: int, residual: float):
        self.n = n
        self.residual = residual
        super().__init__(f"Newton-Raphson did not converge for n={n}; last residual {residual:.3e}")


def norm_pdf(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def _cell_mass(lo, hi):
    """P(lo < Z <= hi), computed on the side of zero that avoids cancellation."""
    right = lo > 0
    return np.where(right, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


@dataclass(frozen=True)
class Codebook1D:
    """Optimal n-point quantizer of N(0, 1)."""

    n: int
    points: np.ndarray
    probs: np.ndarray
    distortion: float

    @property
    def dim(self) -> int:
        return 1

    @property
    def error(self) -> float:
        return math.sqrt(self.distortion)

    def boundaries(self) -> np.ndarray:
        """Interior Voronoi boundaries (midpoints), length n - 1."""
        return 0.5 * (self.points[1:] + self.points[:-1])

    def quantize_index(self, z) -> np.ndarray:
        return np.searchsorted(self.boundaries(), z, side="left")


def _x_pdf(x):
    """``x * phi(x)`` with the limit 0 at +-inf."""
    fin = np.isfinite(x)
    out = np.zeros_like(x)
    out[fin] = x[fin] * norm_pdf(x[fin])
    return out


def _cells(points):
    mids = 0.5 * (points[1:] + points[:-1])
    lo = np.concatenate(([-np.inf], mids))
    hi = np.concatenate((mids, [np.inf]))
    return lo, hi


def _moments(points):
    """Cell masses p_i and first moments M_i = E[Z; Z in C_i]."""
    lo, hi = _cells(points)
    p = _cell_mass(lo, hi)
    M = norm_pdf(lo) - norm_pdf(hi)
    return lo, hi, p, M


def _validate(points) -> np.ndarray:
    a = np.asarray(points, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("codebook must contain at least one point")
    if not np.all(np.isfinite(a)):
        raise ValueError("codebook points must be finite")
    if np.any(np.diff(a) <= 0):
        raise ValueError("codebook points must be strictly increasing (no duplicates)")
    return a


def distortion_of(points) -> Tuple[float, np.ndarray]:
    """Exact distortion ``E min_i (Z - a_i)**2`` and cell probabilities.

    ``points`` need not be stationary, only strictly increasing.
    """
    a = _validate(points)
    lo, hi, p, M = _moments(a)
    # E[(Z - a)^2; cell] = p - [z phi(z)]_lo^hi - 2 a M + a^2 p
    lo_t = _x_pdf(lo)
    hi_t = _x_pdf(hi)
    per_cell = p + lo_t - hi_t - 2.0 * a * M + a * a * p
    return float(math.fsum(per_cell)), p


def distortion_gradient(points) -> np.ndarray:
    """Gradient of the distortion with respect to the points: ``2 (a_i p_i - M_i)``."""
    a = _validate(points)
    _, _, p, M = _moments(a)
    return 2.0 * (a * p - M)


def stationarity_residual(points) -> np.ndarray:
    """``a_i - E[Z | Z in C_i]`` for each cell."""
    a = _validate(points)
    _, _, p, M = _moments(a)
    return a - M / p


def _jacobian_bands(a, lo, hi, p):
    """Banded (1, 1) Jacobian of F(a) = a p - M."""
    n = a.size
    f_lo = np.where(np.isfinite(lo), norm_pdf(lo), 0.0)
    f_hi = np.where(np.isfinite(hi), norm_pdf(hi), 0.0)
    d_lo = a - np.where(np.isfinite(lo), lo, a)
    d_hi = a - np.where(np.isfinite(hi), hi, a)
    ab = np.zeros((3, n))
    ab[1] = p + 0.5 * (f_hi * d_hi - f_lo * d_lo)
    ab[0, 1:] = 0.5 * (f_hi * d_hi)[:-1]   # dF_i / da_{i+1}
    ab[2, :-1] = -0.5 * (f_lo * d_lo)[1:]  # dF_i / da_{i-1}
    return ab


def _lloyd_step(a):
    _, _, p, M = _moments(a)
    return M / p


def _initial_points(n: int) -> np.ndarray:
    i = np.arange(1, n + 1)
    return ndtri((2 * i - 1) / (2.0 * n))


def _symmetrize(a):
    return 0.5 * (a - a[::-1])


def _line_search(a, step, norm0):
    t = 1.0
    while t >= 1e-3:
        trial = a - t * step
        if np.all(np.diff(trial) > 0):
            _, _, p, M = _moments(trial)
            if np.max(np.abs(trial * p - M)) < norm0:
                return trial
        t *= 0.5
    return None


def _newton(n: int, start: np.ndarray) -> np.ndarray:
    a = _symmetrize(start.copy())
    res = np.inf
    for _ in range(MAX_ITER):
        lo, hi, p, M = _moments(a)
        F = a * p - M
        res = float(np.max(np.abs(F / p)))
        if res < TOL:
            return a
        step = solve_banded((1, 1), _jacobian_bands(a, lo, hi, p), F)
        trial = _line_search(a, step, float(np.max(np.abs(F))))
        if trial is None:
            # Newton left the ordered region: fall back on a few Lloyd sweeps.
            for _ in range(20):
                a = _lloyd_step(a)
        else:
            a = _symmetrize(trial)
    lo, hi, p, M = _moments(a)
    res = float(np.max(np.abs(a - M / p)))
    if res < 1e-10:
        log.warning("n=%d: stopped at residual %.2e after %d iterations", n, res, MAX_ITER)
        return a
    raise ConvergenceError(n, res)


_cache: Dict[int, Codebook1D] = {}
_cache_lock = threading.Lock()


def _make(n: int, points: np.ndarray) -> Codebook1D:
    dist, probs = distortion_of(points)
    points = points.copy()
    points.setflags(write=False)
    probs.setflags(write=False)
    return Codebook1D(n=n, points=points, probs=probs, distortion=dist)


def _solve(n: int) -> Codebook1D:
    if n == 1:
        return _make(1, np.zeros(1))
    return _make(n, _newton(n, _initial_points(n)))


def optimal_codebook(n: int) -> Codebook1D:
    """The unique optimal (stationary) n-quantizer of N(0, 1), cached by n."""
    if int(n) != n or n < 1:
        raise ValueError(f"codebook size must be a positive integer, got {n}")
    n = int(n)
    with _cache_lock:
        cb = _cache.get(n)
    if cb is not None:
        return cb
    cb = _load_from_disk(n)
    if cb is None:
        cb = _solve(n)
        _store_on_disk(cb)
    with _cache_lock:
        return _cache.setdefault(n, cb)


def error_table(max_n: int) -> List[float]:
    """``[e_1, ..., e_max_n]``, the optimal quantization errors of N(0, 1)."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    return [optimal_codebook(k).error for k in range(1, max_n + 1)]


# -- disk cache / CSV ------------------------------------------------------

CSV_COLUMNS = ("n", "i", "a_i", "p_i", "distortion")


def _cache_dir() -> Optional[Path]:
    d = os.environ.get("FUNQ_CACHE_DIR")
    return Path(d) if d else None


def _load_from_disk(n: int) -> Optional[Codebook1D]:
    d = _cache_dir()
    if d is None:
        return None
    path = d / f"scalar_{n}.csv"
    if not path.exists():
        return None
    try:
        table = read_csv(path)
    except (OSError, ValueError, KeyError):
        return None
    return table.get(n)


def _store_on_disk(cb: Codebook1D):
    d = _cache_dir()
    if d is None:
        return
    d.mkdir(parents=True, exist_ok=True)
    tmp = d / f".scalar_{cb.n}.{os.getpid()}.tmp"
    write_csv(tmp, [cb])
    os.replace(tmp, d / f"scalar_{cb.n}.csv")


def write_csv(path, codebooks):
    """Dump codebooks as rows ``n, i, a_i, p_i, distortion`` (i is 1-based)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for cb in codebooks:
            for i, (a, p) in enumerate(zip(cb.points, cb.probs), start=1):
                w.writerow([cb.n, i, f"{a:.17g}", f"{p:.17g}", f"{cb.distortion:.17g}"])


def read_csv(path) -> Dict[int, Codebook1D]:
    rows: Dict[int, list] = {}
    dist: Dict[int, float] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            n = int(row["n"])
            rows.setdefault(n, []).append((int(row["i"]), float(row["a_i"]), float(row["p_i"])))
            dist[n] = float(row["distortion"])
    out = {}
    for n, items in rows.items():
        items.sort()
        pts = np.array([a for _, a, _ in items])
        probs = np.array([p for _, _, p in items])
        if pts.size != n:
            raise ValueError(f"cached codebook n={n} has {pts.size} rows")
        pts.setflags(write=False)
        probs.setflags(write=False)
        out[n] = Codebook1D(n=n, points=pts, probs=probs, distortion=dist[n])
    return out

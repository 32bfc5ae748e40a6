"""Quantizers of the d-dimensional standard normal distribution.

Codebooks are trained with Competitive Learning Vector Quantization (CLVQ),
a stochastic gradient descent on the distortion, and then polished by Lloyd
iterations on a fixed Monte-Carlo sample.  The same machinery estimates the
constants ``C(l) = sup_k k^(2/l) e_k(N(0, I_l))^2`` and their limits ``Q(l)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import scalar_quantizer
from ._random import box_muller, generator

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

DEFAULT_EVAL_SIZE = 1_000_000
_CHUNK = 1 << 16


@dataclass(frozen=True)
class GainSchedule:
    """Step sizes ``gamma_t = A / (B + t)``, t = 1, 2, ...

    Any such schedule has a divergent sum and a summable square.  ``A <= B + 1``
    keeps every step in (0, 1], so the winner moves along the segment toward the
    sample.
    """

    A: float
    B: float

    def __post_init__(self):
        if not (self.A > 0 and self.B >= 0):
            raise ValueError("gain parameters must satisfy A > 0, B >= 0")
        if self.A > self.B + 1:
            raise ValueError("A must not exceed B + 1 (gains must stay <= 1)")

    @classmethod
    def default(cls, d: int, n: int) -> "GainSchedule":
        A = 4.0 * n ** (1.0 / d)
        return cls(A=A, B=max(1000.0, A))

    def gamma(self, t):
        return self.A / (self.B + np.asarray(t, dtype=float))


@dataclass(frozen=True)
class CodebookD:
    """An n-point quantizer of N(0, I_d) with Monte-Carlo distortion data."""

    d: int
    n: int
    points: np.ndarray
    distortion: float
    stderr: float = float("nan")
    probs: Optional[np.ndarray] = None
    coord_distortion: Optional[np.ndarray] = None
    meta: Dict[str, float] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.d

    def quantize_index(self, z: np.ndarray) -> np.ndarray:
        idx, _ = assign(np.ascontiguousarray(z, dtype=float).reshape(-1, self.d), self.points)
        return idx


def origin_codebook(d: int) -> CodebookD:
    """The optimal 1-point quantizer: the mean, with distortion exactly d."""
    return CodebookD(d=d, n=1, points=np.zeros((1, d)), distortion=float(d), stderr=0.0,
                     probs=np.ones(1), coord_distortion=np.ones(d), meta={"analytic": 1.0})


# -- kernels ---------------------------------------------------------------

@njit(cache=False)
def _clvq_kernel(points, samples, t0, A, B, history, winners):
    n, d = points.shape
    trace = history.shape[0] > 0
    for s in range(samples.shape[0]):
        g = A / (B + (t0 + s + 1))
        best = 0
        best_d = np.inf
        for i in range(n):
            acc = 0.0
            for k in range(d):
                diff = points[i, k] - samples[s, k]
                acc += diff * diff
            if acc < best_d:  # strict: lowest index wins ties
                best_d = acc
                best = i
        for k in range(d):
            points[best, k] = (1.0 - g) * points[best, k] + g * samples[s, k]
        if trace:
            winners[s] = best
            history[s, :, :] = points


@njit(cache=False)
def _assign_kernel(X, C, idx, d2):
    N, d = X.shape
    n = C.shape[0]
    for s in range(N):
        best = 0
        best_d = np.inf
        for i in range(n):
            acc = 0.0
            for k in range(d):
                diff = C[i, k] - X[s, k]
                acc += diff * diff
            if acc < best_d:
                best_d = acc
                best = i
        idx[s] = best
        d2[s] = best_d


def assign(X: np.ndarray, C: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest codepoint (lowest index on ties) and squared distance for each row of X."""
    X = np.ascontiguousarray(X, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    idx = np.empty(X.shape[0], dtype=np.int64)
    d2 = np.empty(X.shape[0])
    _assign_kernel(X, C, idx, d2)
    return idx, d2


# -- training --------------------------------------------------------------

def clvq_train(d: int, n: int, steps: int, gain: Optional[GainSchedule] = None,
               seed: int = 0, eval_size: int = DEFAULT_EVAL_SIZE, trace: bool = False):
    """Run exactly ``steps`` CLVQ iterations from an i.i.d. N(0, I_d) start.

    Each step draws ``zeta ~ N(0, I_d)``, picks the nearest codepoint (the
    competitive phase) and moves only that point:
    ``alpha_i <- (1 - gamma_t) alpha_i + gamma_t zeta`` (the learning phase).

    With ``trace=True`` returns ``(codebook, start, history, winners, samples)`` where
    ``history[t]`` holds the codebook after step t+1; this keeps every sample in
    memory, so use it only for short instrumented runs.
    """
    if d < 1 or n < 1 or steps < 1:
        raise ValueError("need d >= 1, n >= 1, steps >= 1")
    gain = gain or GainSchedule.default(d, n)
    points = box_muller(generator(seed, 0), (n, d))
    empty_hist = np.zeros((0, n, d))
    empty_win = np.zeros(0, dtype=np.int64)
    if trace:
        samples = box_muller(generator(seed, 1, 0), (steps, d))
        history = np.empty((steps, n, d))
        winners = np.empty(steps, dtype=np.int64)
        start = points.copy()
        _clvq_kernel(points, samples, 0, gain.A, gain.B, history, winners)
    else:
        done = 0
        chunk = 0
        while done < steps:
            rows = min(_CHUNK, steps - done)
            samples = box_muller(generator(seed, 1, chunk), (rows, d))
            _clvq_kernel(points, samples, done, gain.A, gain.B, empty_hist, empty_win)
            done += rows
            chunk += 1
    meta = {"steps": steps, "A": gain.A, "B": gain.B, "seed": seed}
    cb = _evaluated(points, eval_size, seed, meta)
    if trace:
        return cb, start, history, winners, samples
    return cb


def _stats(X, points, idx, d2):
    n, d = points.shape
    counts = np.bincount(idx, minlength=n)
    err = X - points[idx]
    coord = np.mean(err * err, axis=0)
    return counts / X.shape[0], coord


def _evaluated(points, eval_size, seed, meta, key=2) -> CodebookD:
    n, d = points.shape
    if eval_size <= 0:
        return CodebookD(d=d, n=n, points=points, distortion=float("nan"), meta=dict(meta))
    X = box_muller(generator(seed, key), (eval_size, d))
    idx, d2 = assign(X, points)
    probs, coord = _stats(X, points, idx, d2)
    return CodebookD(d=d, n=n, points=points, distortion=float(np.mean(d2)),
                     stderr=float(np.std(d2) / math.sqrt(eval_size)), probs=probs,
                     coord_distortion=coord, meta=dict(meta))


def _centroids(X, idx, d2, n):
    d = X.shape[1]
    counts = np.bincount(idx, minlength=n)
    sums = np.stack([np.bincount(idx, weights=X[:, k], minlength=n) for k in range(d)], axis=1)
    C = np.empty((n, d))
    full = counts > 0
    C[full] = sums[full] / counts[full, None]
    empty = np.nonzero(~full)[0]
    if empty.size:
        # re-seed empty cells at the samples farthest from their codepoint
        far = np.argsort(d2, kind="stable")[::-1][: empty.size]
        C[empty] = X[far]
    return C


def lloyd_refine(cb: CodebookD, sample_size: int = 1_000_000, rounds: int = 50,
                 seed: int = 0, history: Optional[List[float]] = None) -> CodebookD:
    """Lloyd iterations on a fixed N(0, I_d) sample.

    A round replaces each point by the mean of its cell (empty cells are
    re-seeded at the farthest sample) and is kept only if the empirical
    distortion does not increase, so the recorded distortions are
    non-increasing.  The returned distortion is measured on the same sample.
    """
    X = box_muller(generator(seed, 3), (sample_size, cb.d))
    C = np.array(cb.points, dtype=float)
    idx, d2 = assign(X, C)
    D = float(np.mean(d2))
    if history is not None:
        history.append(D)
    for _ in range(rounds):
        newC = _centroids(X, idx, d2, cb.n)
        nidx, nd2 = assign(X, newC)
        nD = float(np.mean(nd2))
        if nD > D:
            break
        changed = not np.array_equal(newC, C)
        C, idx, d2, D = newC, nidx, nd2, nD
        if history is not None:
            history.append(D)
        if not changed:
            break
    probs, coord = _stats(X, C, idx, d2)
    meta = dict(cb.meta)
    meta.update({"lloyd_rounds": rounds, "lloyd_sample": sample_size, "lloyd_seed": seed})
    return CodebookD(d=cb.d, n=cb.n, points=C, distortion=D,
                     stderr=float(np.std(d2) / math.sqrt(sample_size)), probs=probs,
                     coord_distortion=coord, meta=meta)


QUALITY = {
    # steps, restarts, sample_size, lloyd rounds
    "fast": (200_000, 1, 200_000, 30),
    "medium": (500_000, 3, 500_000, 50),
    "high": (1_000_000, 5, 1_000_000, 50),
}


def _preset(quality: str):
    try:
        return QUALITY[quality]
    except KeyError:
        raise ValueError(f"unknown quality {quality!r}; choose from {sorted(QUALITY)}") from None


def train_codebook(d: int, n: int, quality: str = "fast", seed: int = 0) -> CodebookD:
    """Best of several CLVQ + Lloyd runs, evaluated on an independent sample."""
    if n == 1:
        return origin_codebook(d)
    steps, restarts, sample_size, rounds = _preset(quality)
    best = None
    for r in range(restarts):
        s = seed * 1000 + r
        cb = clvq_train(d, n, steps, seed=s, eval_size=0)
        cb = lloyd_refine(cb, sample_size=sample_size, rounds=rounds, seed=s)
        if best is None or cb.distortion < best.distortion:
            best = cb
    # fresh sample: the Lloyd distortion is optimistically biased
    final = _evaluated(best.points, sample_size, seed, best.meta, key=4)
    return final


def estimate_error(d: int, n: int, quality: str = "fast", seed: int = 0) -> Tuple[float, float]:
    """Estimate ``e_n(N(0, I_d))**2`` and its Monte-Carlo standard error.

    The value is the distortion (squared error) of the best trained codebook,
    which is an upper-bound flavoured estimate of the optimum.
    """
    if n == 1:
        return float(d), 0.0
    cb = train_codebook(d, n, quality, seed)
    return cb.distortion, cb.stderr


@dataclass(frozen=True)
class CapacityEstimate:
    l: int
    ks: Tuple[int, ...]
    values: Tuple[float, ...]  # k^(2/l) e_k^2
    C: float                   # running sup over the computed ks
    Q: float                   # value at the largest k
    exact: bool


def capacity_constants(l: int, k_max: int, quality: str = "fast", seed: int = 0,
                       ks: Optional[Sequence[int]] = None) -> CapacityEstimate:
    """Estimate ``C(l)`` (sup of ``k^(2/l) e_k^2`` over ``k <= k_max``) and ``Q(l)``.

    ``l = 1`` uses exact scalar codebooks.  For ``l >= 2`` the trained
    distortions are upper estimates, so are the constants.
    """
    if l < 1 or k_max < 1:
        raise ValueError("need l >= 1 and k_max >= 1")
    ks = tuple(sorted(set(ks))) if ks is not None else tuple(range(1, k_max + 1))
    if ks[-1] != k_max:
        ks = ks + (k_max,)
    vals = []
    for k in ks:
        if l == 1:
            e2 = scalar_quantizer.optimal_codebook(k).distortion
        else:
            e2, _ = estimate_error(l, k, quality, seed)
        vals.append(k ** (2.0 / l) * e2)
    return CapacityEstimate(l=l, ks=ks, values=tuple(vals), C=max(vals), Q=vals[-1],
                            exact=(l == 1))


def write_csv(path, cb: CodebookD):
    """Codebook export: a header row ``d, n, seed, steps`` then one row per point."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "n", "seed", "steps"])
        w.writerow([cb.d, cb.n, cb.meta.get("seed", ""), cb.meta.get("steps", "")])
        w.writerow([f"x{k + 1}" for k in range(cb.d)])
        for row in cb.points:
            w.writerow([f"{x:.17g}" for x in row])


def read_csv(path) -> CodebookD:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    d, n = int(rows[1][0]), int(rows[1][1])
    meta = {}
    if rows[1][2]:
        meta["seed"] = int(rows[1][2])
    if rows[1][3]:
        meta["steps"] = int(rows[1][3])
    pts = np.array([[float(x) for x in r] for r in rows[3:]])
    if pts.shape != (n, d):
        raise ValueError(f"expected {n} points of dimension {d}, got {pts.shape}")
    return CodebookD(d=d, n=n, points=pts, distortion=float("nan"), meta=meta)


def distortion_report(cb: CodebookD) -> str:
    """Key-value text summary of a codebook's distortion."""
    lines = [f"d = {cb.d}", f"n = {cb.n}", f"distortion = {cb.distortion:.17g}",
             f"stderr = {cb.stderr:.17g}"]
    lines += [f"{k} = {v}" for k, v in sorted(cb.meta.items())]
    return "\n".join(lines) + "\n"

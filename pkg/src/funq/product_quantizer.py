"""Product functional quantizers built on the Karhunen-Loeve expansion.

The coefficients ``Z_j = <X, u_j> / sqrt(lambda_j)`` are i.i.d. N(0, 1).  They
are grouped into ``m`` blocks of length ``l``; block ``j`` is quantized by an
``n_j``-point quantizer of N(0, I_l), and the path codebook is the Cartesian
product of the block codebooks mapped back through
``sum_i sqrt(lambda_i) a_i u_i``.
"""
from __future__ import annotations

import configparser
import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .allocation import DEFAULT_THETA, BlockAllocation, brute_force_plan, plan
from .process_models import (EigenModel, basis_functions, brownian_eigenvalues, eigenvalues,
                             rl32_allocation_weights, rl32_weight_tail, rl32_weights, tail_sum)
from .scalar_quantizer import Codebook1D, optimal_codebook
from .vector_quantizer import CodebookD, origin_codebook, train_codebook

Block = Union[Codebook1D, CodebookD]

FORMAT_NAME = "funq-codebook"
FORMAT_VERSION = 1
DEFAULT_ENUM_LIMIT = 1_000_000
SCALAR_C_KMAX = 200


class EnumerationLimitError(ValueError):
    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"refusing to enumerate {count} paths (limit {limit})")


@dataclass(frozen=True)
class ProductQuantizer:
    model: EigenModel
    alloc: BlockAllocation
    blocks: Tuple[Block, ...]
    analytic_distortion: float
    exact_decomposition: Optional[float] = None
    config: Mapping[str, str] = field(default_factory=dict)

    @property
    def total_size(self) -> int:
        return math.prod(b.n for b in self.blocks)

    @property
    def l(self) -> int:
        return self.alloc.l

    @property
    def m(self) -> int:
        return self.alloc.m

    @property
    def is_exact(self) -> bool:
        """The analytic distortion is exact rather than a bound (scalar blocks)."""
        return self.alloc.l == 1

    def coefficient_scales(self, count: Optional[int] = None) -> np.ndarray:
        """``sqrt(lambda_i)`` multiplying ``Z_i`` in the expansion."""
        count = self.alloc.coefficients if count is None else count
        return np.sqrt(kl_variances(self.model, count))

    def distortion_weights(self, count: int) -> np.ndarray:
        """Per-coefficient weight of ``E|Z_i - hat Z_i|^2`` in the L^2 error."""
        if self.model.kind == "rl32":
            return rl32_weights(count)
        return eigenvalues(self.model, count)


@dataclass(frozen=True)
class QuantizedPath:
    index: Tuple[int, ...]
    weight: float
    coeffs: np.ndarray
    model: EigenModel
    samples: Optional[np.ndarray] = None


def kl_variances(model: EigenModel, count: int) -> np.ndarray:
    """Variances of the expansion coefficients; ``rl32`` reuses the Brownian ones."""
    if model.kind == "rl32":
        return brownian_eigenvalues(count)
    return eigenvalues(model, count)


def scalar_c1(k_max: int = SCALAR_C_KMAX) -> float:
    """Running sup of ``k^2 e_k(N(0,1))^2`` over ``k <= k_max`` (exact codebooks)."""
    return max(k * k * optimal_codebook(k).distortion for k in range(1, k_max + 1))


def _block_codebook(l: int, size: int, quality: str, seed: int, cache: dict) -> Block:
    key = (l, size)
    if key not in cache:
        if l == 1:
            cache[key] = optimal_codebook(size)
        elif size == 1:
            cache[key] = origin_codebook(l)
        else:
            cache[key] = train_codebook(l, size, quality, seed=seed * 7919 + size)
    return cache[key]


def _analytic(model: EigenModel, alloc: BlockAllocation, blocks: Sequence[Block]):
    """Block-max eigenvalue bound and, for vector blocks, the exact per-coordinate sum."""
    l, m = alloc.l, alloc.m
    if model.kind == "rl32":
        w = rl32_weights(m)
        head = sum(wj * b.distortion for wj, b in zip(w, blocks))
        return float(head + rl32_weight_tail(m)), None
    tail = tail_sum(model, m * l)
    if m == 0:
        return tail, None
    lam = eigenvalues(model, m * l).reshape(m, l)
    bound = float(sum(lam[j, 0] * b.distortion for j, b in enumerate(blocks))) + tail
    if l == 1:
        return bound, None
    exact = float(sum(np.dot(lam[j], b.coord_distortion) for j, b in enumerate(blocks))) + tail
    return bound, exact


def from_allocation(model: EigenModel, alloc: BlockAllocation, quality: str = "fast",
                    seed: int = 0, config: Optional[Mapping[str, str]] = None) -> ProductQuantizer:
    """Assemble codebooks and analytic distortion for a given allocation."""
    if model.kind == "rl32" and alloc.l != 1:
        raise ValueError("rl32 uses a non-orthogonal basis: only scalar blocks (l = 1) are supported")
    cache: dict = {}
    blocks = tuple(_block_codebook(alloc.l, s, quality, seed, cache) for s in alloc.sizes)
    bound, exact = _analytic(model, alloc, blocks)
    return ProductQuantizer(model=model, alloc=alloc, blocks=blocks, analytic_distortion=bound,
                            exact_decomposition=exact, config=dict(config or {}))


def build(model: EigenModel, n: int, theta: float = DEFAULT_THETA,
          l_override: Optional[int] = None, quality: str = "fast", seed: int = 0,
          allocator: str = "formula") -> ProductQuantizer:
    """Plan an allocation and assemble the product quantizer.

    ``allocator="formula"`` uses the closed-form block sizes;
    ``"brute"`` searches the surrogate objective exactly (``n <= 10^4``, scalar
    blocks unless ``l_override`` is given with a trained ``C(l)``).
    """
    if model.kind == "rl32":
        if l_override not in (None, 1):
            raise ValueError("rl32 supports only scalar blocks (l = 1)")
        return build_rl32(n, theta, allocator=allocator)
    if allocator == "formula":
        alloc = plan(model, n, theta, l_override)
    elif allocator == "brute":
        l = l_override or 1
        if l == 1:
            C = scalar_c1()
        else:
            C = max(k ** (2.0 / l) * train_codebook(l, k, quality, seed).distortion
                    for k in range(1, 33))
        alloc = brute_force_plan(model, n, l, {l: C})
    else:
        raise ValueError(f"unknown allocator {allocator!r}")
    config = {"model": model.to_record(), "n": str(n), "theta": f"{theta:.17g}",
              "l_override": "" if l_override is None else str(l_override),
              "quality": quality, "seed": str(seed), "allocator": allocator}
    return from_allocation(model, alloc, quality, seed, config)


def build_rl32(n: int, theta: float = DEFAULT_THETA, allocator: str = "formula") -> ProductQuantizer:
    """Scalar product quantizer of ``int_0^t W_s ds`` on the basis ``R_1 u_j``.

    Block sizes follow the closed-form rule with ``lambda_j`` replaced by the
    monotone weights ``nu_j = lambda_j^2 (3 + 4 sqrt(lambda_j))``; the
    distortion is the exact series
    ``sum_j lambda_j ||R_1 u_j||^2 e_{n_j}^2 + sum_{j>m} lambda_j ||R_1 u_j||^2``.
    """
    nu = EigenModel.explicit(rl32_allocation_weights(512), tail=4.0)
    if allocator == "formula":
        a = plan(nu, n, theta, l_override=1)
    elif allocator == "brute":
        a = brute_force_plan(nu, n, 1, {1: scalar_c1()})
    else:
        raise ValueError(f"unknown allocator {allocator!r}")
    config = {"model": "kind=rl32", "n": str(n), "theta": f"{theta:.17g}", "l_override": "1",
              "quality": "exact", "seed": "0", "allocator": allocator}
    return from_allocation(EigenModel.rl_three_halves(), a, "exact", 0, config)


# -- enumeration and synthesis ---------------------------------------------

def _block_probs(b: Block) -> np.ndarray:
    if b.probs is None:
        raise ValueError("block codebook carries no cell probabilities")
    return np.asarray(b.probs, dtype=float)


def _block_points(b: Block) -> np.ndarray:
    return np.asarray(b.points, dtype=float).reshape(b.n, -1)


def enumerate_paths(pq: ProductQuantizer, limit: Optional[int] = None) -> Iterator[QuantizedPath]:
    """Yield every codeword of the product codebook, row-major over blocks.

    The weight of a path is the product of its block cell probabilities
    (blocks are independent).
    """
    if limit is not None and pq.total_size > limit:
        raise EnumerationLimitError(pq.total_size, limit)
    scales = pq.coefficient_scales()
    points = [_block_points(b) for b in pq.blocks]
    probs = [_block_probs(b) for b in pq.blocks]
    for index in itertools.product(*(range(b.n) for b in pq.blocks)):
        w = 1.0
        z = np.empty(pq.alloc.coefficients)
        for j, i in enumerate(index):
            w *= probs[j][i]
            z[j * pq.l:(j + 1) * pq.l] = points[j][i]
        yield QuantizedPath(index=index, weight=w, coeffs=scales * z, model=pq.model)


def codeword_matrix(pq: ProductQuantizer, limit: int = DEFAULT_ENUM_LIMIT) -> Tuple[np.ndarray, np.ndarray]:
    """All codewords in ``Z``-coordinates (``total_size x m l``) and their weights."""
    if pq.total_size > limit:
        raise EnumerationLimitError(pq.total_size, limit)
    if pq.m == 0:
        return np.zeros((1, 0)), np.ones(1)
    pts = [_block_points(b) for b in pq.blocks]
    prb = [_block_probs(b) for b in pq.blocks]
    grids = np.meshgrid(*[np.arange(b.n) for b in pq.blocks], indexing="ij")
    idx = [g.ravel() for g in grids]
    Z = np.concatenate([pts[j][idx[j]] for j in range(pq.m)], axis=1)
    w = np.prod([prb[j][idx[j]] for j in range(pq.m)], axis=0)
    return Z, w


def synthesize(path: QuantizedPath, grid_points: int = 257) -> np.ndarray:
    """Values of ``sum_i coeff_i * basis_i(t)`` on ``t_k = k / (grid_points - 1)``."""
    if grid_points < 2:
        raise ValueError("need at least two grid points")
    t = np.linspace(0.0, 1.0, grid_points)
    basis = basis_functions(path.model, max(len(path.coeffs), 1))(t)
    if len(path.coeffs) == 0:
        return np.zeros(grid_points)
    return np.asarray(path.coeffs) @ basis


def write_paths_csv(pq: ProductQuantizer, fname, grid_points: int = 257,
                    limit: int = 10_000):
    """One row per grid point, one column per path (plus ``t`` and a weight row)."""
    paths = list(enumerate_paths(pq, limit))
    t = np.linspace(0.0, 1.0, grid_points)
    values = np.stack([synthesize(p, grid_points) for p in paths], axis=1)
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + ["path_" + "_".join(map(str, p.index)) for p in paths])
        w.writerow(["weight"] + [f"{p.weight:.17g}" for p in paths])
        for k in range(grid_points):
            w.writerow([f"{t[k]:.17g}"] + [f"{v:.17g}" for v in values[k]])


# -- codebook file -------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _fmt_list(xs) -> str:
    return " ".join(_fmt(float(x)) for x in np.ravel(xs))


def _parse_list(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split()]) if text.strip() else np.zeros(0)


def save(pq: ProductQuantizer, fname):
    """Write the self-describing UTF-8 codebook document."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["funq"] = {"format": FORMAT_NAME, "version": str(FORMAT_VERSION),
                  "software_version": __version__}
    cp["config"] = dict(pq.config)
    cp["model"] = {"record": pq.model.to_record()}
    a = pq.alloc
    cp["allocation"] = {"n": str(a.n), "theta": "" if a.theta is None else _fmt(a.theta),
                        "l": str(a.l), "m": str(a.m), "sizes": " ".join(map(str, a.sizes))}
    for j, b in enumerate(pq.blocks, start=1):
        sec = {"dim": str(b.dim), "size": str(b.n), "distortion": _fmt(b.distortion),
               "points": _fmt_list(b.points), "probs": _fmt_list(_block_probs(b))}
        if isinstance(b, CodebookD):
            sec["stderr"] = _fmt(b.stderr)
            if b.coord_distortion is not None:
                sec["coord_distortion"] = _fmt_list(b.coord_distortion)
            sec["meta"] = " ".join(f"{k}={v}" for k, v in sorted(b.meta.items()))
        cp[f"block.{j}"] = sec
    summary = {"total_size": str(pq.total_size), "analytic_distortion": _fmt(pq.analytic_distortion)}
    if pq.exact_decomposition is not None:
        summary["exact_decomposition"] = _fmt(pq.exact_decomposition)
    cp["summary"] = summary
    with open(fname, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {FORMAT_NAME} v{FORMAT_VERSION}\n")
        cp.write(fh)


def load(fname) -> ProductQuantizer:
    """Read a codebook document written by :func:`save`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    with open(fname, encoding="utf-8") as fh:
        cp.read_file(fh)
    if cp.get("funq", "format", fallback=None) != FORMAT_NAME:
        raise ValueError(f"{fname}: not a {FORMAT_NAME} document")
    if cp.getint("funq", "version") != FORMAT_VERSION:
        raise ValueError(f"{fname}: unsupported version {cp.get('funq', 'version')}")
    model = EigenModel.from_record(cp.get("model", "record"))
    sa = cp["allocation"]
    sizes = tuple(int(s) for s in sa["sizes"].split())
    alloc = BlockAllocation(n=int(sa["n"]), theta=float(sa["theta"]) if sa["theta"] else None,
                            l=int(sa["l"]), m=int(sa["m"]), sizes=sizes)
    blocks = []
    for j in range(1, alloc.m + 1):
        s = cp[f"block.{j}"]
        dim, size = int(s["dim"]), int(s["size"])
        pts = _parse_list(s["points"])
        probs = _parse_list(s["probs"])
        if dim == 1:
            pts.setflags(write=False)
            probs.setflags(write=False)
            blocks.append(Codebook1D(n=size, points=pts, probs=probs, distortion=float(s["distortion"])))
        else:
            meta = {}
            for tok in s.get("meta", "").split():
                k, _, v = tok.partition("=")
                meta[k] = float(v)
            coord = _parse_list(s["coord_distortion"]) if "coord_distortion" in s else None
            blocks.append(CodebookD(d=dim, n=size, points=pts.reshape(size, dim),
                                    distortion=float(s["distortion"]),
                                    stderr=float(s.get("stderr", "nan")), probs=probs,
                                    coord_distortion=coord, meta=meta))
    bound, exact = _analytic(model, alloc, blocks)
    stored = float(cp.get("summary", "analytic_distortion"))
    if bound != stored:
        raise ValueError(f"{fname}: stored distortion {stored!r} does not match recomputed {bound!r}")
    return ProductQuantizer(model=model, alloc=alloc, blocks=tuple(blocks),
                            analytic_distortion=stored, exact_decomposition=exact,
                            config=dict(cp["config"]))

"""Eigenvalue models for centered Gaussian processes on L^2([0, 1]).

Each model carries the Karhunen-Loeve spectrum of a process (exact where it
is known in closed form, otherwise the regularly varying asymptotic law
``lambda_j ~ scale * j**(-b)``) and, for Brownian motion and its primitive,
the explicit basis functions.

Supported kinds
---------------
``brownian``   standard Brownian motion, ``lambda_j = (pi (j - 1/2))**-2``
``rl``         Riemann-Liouville process of index ``rho`` (asymptotic law)
``ibm``        fractionally integrated Brownian motion of order ``beta``
``rl32``       Riemann-Liouville index 3/2, i.e. ``int_0^t W_s ds``, expanded on
               the images of the Brownian basis
``explicit``   a user supplied non-increasing list, optionally continued by a
               power-law tail of index ``tail``
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import polygamma, zeta

KINDS = ("brownian", "rl", "ibm", "rl32", "explicit")


class ModelSpecError(ValueError):
    """Raised for unparsable model spec strings; carries the offending position."""

    def __init__(self, message: str, text: str = "", position: int = 0):
        self.text = text
        self.position = position
        if text:
            message = f"{message} at position {position}: {text!r}"
        super().__init__(message)


class NoBasisError(ValueError):
    """The model has no explicit eigenbasis."""


@dataclass(frozen=True)
class EigenModel:
    """Immutable description of a Gaussian process spectrum.

    Use the constructors :meth:`brownian`, :meth:`riemann_liouville`,
    :meth:`integrated_bm`, :meth:`rl_three_halves` and :meth:`explicit`
    rather than building instances directly.
    """

    kind: str
    param: Optional[float] = None
    values: tuple = ()
    tail: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind in ("rl", "ibm"):
            if self.param is None or not self.param > 0:
                raise ValueError(f"{self.kind} needs a positive parameter, got {self.param}")
        if self.kind == "explicit":
            vals = self.values
            if len(vals) == 0:
                raise ValueError("explicit model needs at least one eigenvalue")
            if any(not v > 0 for v in vals):
                raise ValueError("explicit eigenvalues must be positive")
            if any(vals[i] < vals[i + 1] for i in range(len(vals) - 1)):
                raise ValueError("explicit eigenvalues must be non-increasing")
            if self.tail is not None and not self.tail > 1:
                raise ValueError("tail index must exceed 1 (summable spectrum)")

    # -- constructors ------------------------------------------------------
    @classmethod
    def brownian(cls) -> "EigenModel":
        return cls("brownian")

    @classmethod
    def riemann_liouville(cls, rho: float) -> "EigenModel":
        return cls("rl", param=float(rho))

    @classmethod
    def integrated_bm(cls, beta: float) -> "EigenModel":
        return cls("ibm", param=float(beta))

    @classmethod
    def rl_three_halves(cls) -> "EigenModel":
        return cls("rl32")

    @classmethod
    def explicit(cls, values: Sequence[float], tail: Optional[float] = None) -> "EigenModel":
        return cls("explicit", values=tuple(float(v) for v in values),
                   tail=None if tail is None else float(tail))

    # -- regular variation data -------------------------------------------
    @property
    def b(self) -> Optional[float]:
        """Regular-variation index of the spectrum (None for a finite list)."""
        if self.kind == "brownian":
            return 2.0
        if self.kind == "rl":
            return 2.0 * self.param + 1.0
        if self.kind == "ibm":
            return 2.0 * self.param + 2.0
        if self.kind == "rl32":
            return 4.0
        return self.tail

    @property
    def scale(self) -> Optional[float]:
        """Leading constant ``c`` in ``lambda_j ~ c * j**(-b)``."""
        if self.kind == "brownian":
            return math.pi ** -2
        if self.kind == "rl":
            rho = self.param
            return math.gamma(rho + 0.5) ** 2 * math.pi ** -(2 * rho + 1)
        if self.kind == "ibm":
            # Y^beta = X^(beta+1/2) / Gamma(1+beta): the Gamma factors cancel.
            return math.pi ** -(2 * self.param + 2)
        if self.kind == "rl32":
            return math.pi ** -4
        if self.tail is None:
            return None
        L = len(self.values)
        return self.values[-1] * L ** self.tail

    @property
    def finite(self) -> bool:
        return self.kind == "explicit" and self.tail is None

    @property
    def has_basis(self) -> bool:
        return self.kind in ("brownian", "rl32")

    def regvar(self) -> "RegVarFns":
        if self.b is None:
            raise ValueError("finite spectrum has no regular-variation index")
        return RegVarFns(self.scale, self.b)

    # -- text record ------------------------------------------------------
    def to_record(self) -> str:
        """Serialize as a one-line ``key=value`` record."""
        parts = [f"kind={self.kind}"]
        if self.kind == "rl":
            parts.append(f"rho={self.param:.17g}")
        elif self.kind == "ibm":
            parts.append(f"beta={self.param:.17g}")
        elif self.kind == "explicit":
            parts.append("values=" + ",".join(f"{v:.17g}" for v in self.values))
            if self.tail is not None:
                parts.append(f"tail={self.tail:.17g}")
        return " ".join(parts)

    @classmethod
    def from_record(cls, record: str) -> "EigenModel":
        fields = {}
        for token in record.split():
            key, sep, value = token.partition("=")
            if not sep:
                raise ValueError(f"malformed model record token {token!r}")
            fields[key] = value
        kind = fields.get("kind")
        if kind == "rl":
            return cls.riemann_liouville(float(fields["rho"]))
        if kind == "ibm":
            return cls.integrated_bm(float(fields["beta"]))
        if kind == "explicit":
            values = [float(v) for v in fields["values"].split(",")]
            tail = fields.get("tail")
            return cls.explicit(values, None if tail is None else float(tail))
        if kind in ("brownian", "rl32"):
            return cls(kind)
        raise ValueError(f"unknown model kind in record: {kind!r}")

    def label(self) -> str:
        if self.kind == "rl":
            return f"rl:{self.param:g}"
        if self.kind == "ibm":
            return f"ibm:{self.param:g}"
        if self.kind == "explicit":
            s = "explicit:" + ",".join(f"{v:g}" for v in self.values)
            return s + (f";tail={self.tail:g}" if self.tail is not None else "")
        return self.kind


@dataclass(frozen=True)
class RegVarFns:
    """The pair ``phi(x) = scale * x**-b`` and ``psi(x) = 1 / (x * phi(x))``."""

    scale: float
    b: float

    def phi(self, x):
        return self.scale * np.power(x, -self.b)

    def psi(self, x):
        return 1.0 / (x * self.phi(x))


def parse_model(spec: str) -> EigenModel:
    """Parse a CLI model string such as ``brownian``, ``rl:0.75``, ``ibm:1``,
    ``rl32`` or ``explicit:1,0.5,0.25;tail=2``."""
    text = spec.strip()
    name, sep, rest = text.partition(":")
    name = name.lower()
    if name in ("brownian", "bm", "w", "rl32"):
        if sep:
            raise ModelSpecError(f"model {name!r} takes no parameter", text, len(name))
        return EigenModel("rl32" if name == "rl32" else "brownian")
    if name in ("rl", "ibm"):
        if not sep or not rest:
            raise ModelSpecError(f"model {name!r} needs a parameter", text, len(text))
        try:
            value = float(rest)
        except ValueError:
            raise ModelSpecError("expected a number", text, len(name) + 1) from None
        if not value > 0:
            raise ModelSpecError("parameter must be positive", text, len(name) + 1)
        if name == "rl":
            return EigenModel.riemann_liouville(value)
        return EigenModel.integrated_bm(value)
    if name == "explicit":
        if not sep or not rest:
            raise ModelSpecError("explicit model needs a value list", text, len(text))
        body, _, options = rest.partition(";")
        pos = len(name) + 1
        values = []
        for item in body.split(","):
            try:
                values.append(float(item))
            except ValueError:
                raise ModelSpecError("expected a number", text, pos) from None
            pos += len(item) + 1
        tail = None
        if options:
            key, eq, val = options.partition("=")
            if key.strip() != "tail" or not eq:
                raise ModelSpecError("expected 'tail=<index>'", text, pos)
            try:
                tail = float(val)
            except ValueError:
                raise ModelSpecError("expected a number", text, pos + len(key) + 1) from None
        try:
            return EigenModel.explicit(values, tail)
        except ValueError as exc:
            raise ModelSpecError(str(exc), text, len(name) + 1) from None
    raise ModelSpecError(f"unknown model {name!r}", text, 0)


def _check_index(j: int, minimum: int = 1):
    if int(j) != j or j < minimum:
        raise ValueError(f"index must be an integer >= {minimum}, got {j}")


def eigenvalues(model: EigenModel, count: int, start: int = 1) -> np.ndarray:
    """Vector of ``lambda_j`` for ``j = start, ..., start + count - 1``.

    For the ``rl``, ``ibm`` and ``rl32`` kinds these are the asymptotic-law
    values ``scale * j**-b`` (the true spectrum is not known in closed form).
    Finite explicit models return zeros past the end of the list.
    """
    _check_index(start)
    j = np.arange(start, start + count, dtype=float)
    if model.kind == "brownian":
        return (math.pi * (j - 0.5)) ** -2
    if model.kind in ("rl", "ibm", "rl32"):
        return model.scale * j ** -model.b
    vals = np.asarray(model.values)
    L = len(vals)
    out = np.zeros(count)
    inside = j <= L
    out[inside] = vals[(j[inside] - 1).astype(int)]
    if model.tail is not None:
        out[~inside] = vals[-1] * (L / j[~inside]) ** model.tail
    return out


def eigenvalue(model: EigenModel, j: int) -> float:
    """Single eigenvalue ``lambda_j`` (``j >= 1``)."""
    _check_index(j)
    if model.finite and j > len(model.values):
        return 0.0
    return float(eigenvalues(model, 1, start=int(j))[0])


def basis_eval(model: EigenModel, j: int, t):
    """Evaluate the j-th basis function at time(s) ``t``.

    Brownian motion uses the orthonormal sine basis; ``rl32`` uses the
    (non-orthogonal) primitives ``R_1 u_j`` of the Brownian basis.
    """
    _check_index(j)
    if not model.has_basis:
        raise NoBasisError(f"model {model.label()} has no explicit eigenbasis")
    lam = (math.pi * (j - 0.5)) ** -2
    omega = math.pi * (j - 0.5)
    t = np.asarray(t, dtype=float)
    if model.kind == "brownian":
        out = math.sqrt(2.0) * np.sin(omega * t)
    else:
        out = math.sqrt(2.0 * lam) * (1.0 - np.cos(omega * t))
    return out if out.ndim else float(out)


def brownian_eigenvalues(count: int) -> np.ndarray:
    """The Brownian spectrum, which also weights the ``rl32`` expansion."""
    return eigenvalues(EigenModel.brownian(), count)


def tail_sum(model: EigenModel, k: int) -> float:
    """``sum_{j >= k+1} lambda_j``.

    Closed forms: trigamma for Brownian motion, Hurwitz zeta for the power
    laws; both are accurate to a few ulps.
    """
    _check_index(k, 0)
    k = int(k)
    if model.kind == "brownian":
        return float(polygamma(1, k + 0.5)) / math.pi ** 2
    if model.kind in ("rl", "ibm", "rl32"):
        return model.scale * float(zeta(model.b, k + 1))
    vals = model.values
    L = len(vals)
    head = math.fsum(vals[k:]) if k < L else 0.0
    if model.tail is None:
        return head
    # continuation lambda_j = vals[-1] * (L / j)**tail for j > L
    return head + vals[-1] * L ** model.tail * float(zeta(model.tail, max(L, k) + 1))


def total_variance(model: EigenModel) -> float:
    """``E ||X||^2``, the distortion of the one-point quantizer at the mean."""
    return tail_sum(model, 0)


def basis_functions(model: EigenModel, count: int) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``f(t) -> array (count, len(t))`` of the first ``count`` basis functions."""
    if not model.has_basis:
        raise NoBasisError(f"model {model.label()} has no explicit eigenbasis")
    omega = math.pi * (np.arange(1, count + 1) - 0.5)

    def evaluate(t):
        t = np.asarray(t, dtype=float)
        arg = np.outer(omega, t)
        if model.kind == "brownian":
            return math.sqrt(2.0) * np.sin(arg)
        return (math.sqrt(2.0) / omega)[:, None] * (1.0 - np.cos(arg))

    return evaluate


# -- int_0^t W_s ds on the images of the Brownian basis ----------------------

def rl32_norm_sq(j) -> np.ndarray:
    """``||R_1 u_j||^2 = lambda_j (3 - 4 (-1)^(j-1) sqrt(lambda_j))`` (Brownian lambda_j)."""
    j = np.asarray(j)
    lam = (math.pi * (j - 0.5)) ** -2
    sign = np.where(j % 2 == 1, 1.0, -1.0)
    return lam * (3.0 - 4.0 * sign * np.sqrt(lam))


def rl32_weights(count: int) -> np.ndarray:
    """Distortion weight of coefficient j: ``lambda_j ||R_1 u_j||^2``."""
    j = np.arange(1, count + 1)
    return brownian_eigenvalues(count) * rl32_norm_sq(j)


def rl32_weight_tail(m: int) -> float:
    """``sum_{j > m} lambda_j^2 (3 - 4 (-1)^(j-1) sqrt(lambda_j))`` in closed form.

    Uses ``sum_{j>m} (j - 1/2)^-4 = zeta(4, m + 1/2)`` and splits the
    alternating fifth-power sum into two Hurwitz zeta values.
    """
    _check_index(m, 0)
    even = float(zeta(4, m + 0.5)) / math.pi ** 4
    sign = -1.0 if m % 2 else 1.0
    alt = sign * 2.0 ** -5 * (float(zeta(5, (m + 0.5) / 2)) - float(zeta(5, (m + 1.5) / 2)))
    return 3.0 * even - 4.0 * alt / math.pi ** 5


def rl32_allocation_weights(count: int) -> np.ndarray:
    """``nu_j = lambda_j^2 (3 + 4 sqrt(lambda_j))``, the monotone surrogate used to allocate."""
    lam = brownian_eigenvalues(count)
    return lam ** 2 * (3.0 + 4.0 * np.sqrt(lam))

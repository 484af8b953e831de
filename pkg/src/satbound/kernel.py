"""Generating sums A[p, q], the potential Y = sum d ln A, and the first-moment rate ln F.

All evaluation happens in log-multiplier coordinates ``u = ln(x1, x2, y1, y2)``.
Each ``A[p, q]`` is a positive sum of monomials ``coef * exp(a . u)`` with
exponent vector ``a = (2i, j, l, 2m)``, so ``ln A`` is a log-sum-exp and its
gradient and Hessian in ``u`` are the mean and covariance of ``a`` under the
softmax weights.  Values in the ``x`` coordinates are obtained by the chain rule.

At a critical point of the rate function the primal quantities (clause-type
proportions beta, heavy occurrence split H_t, and the variable-type family pi)
follow in closed form from the multipliers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import mpmath
import numpy as np

from .distributions import DistributionSpec
from .errors import KernelOverflow, NotLight
from .schemes import Scheme, VarType, omega_mask

LN2 = math.log(2.0)
LN3 = math.log(3.0)
LN15 = math.log(1.5)


class Restriction(enum.Enum):
    FULL = "full"
    NO_TYPE2 = "no-type2"  # beta2 = 0: only types with j = m = 0
    NO_TYPE3 = "no-type3"  # beta3 = 0: only types with k = 0

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BetaFixed:
    """Clause-type proportions held fixed; beta3 = 1 - beta1 - beta2."""

    beta1: float
    beta2: float

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0 or self.beta1 + self.beta2 > 1 + 1e-12:
            raise ValueError(f"infeasible clause-type proportions ({self.beta1}, {self.beta2})")

    @property
    def beta3(self) -> float:
        return max(0.0, 1.0 - self.beta1 - self.beta2)


Mode = Union[Restriction, BetaFixed]

# coordinates each restriction actually uses
ACTIVE = {
    Restriction.FULL: (0, 1, 2, 3),
    Restriction.NO_TYPE2: (0, 2),
    Restriction.NO_TYPE3: (0, 1, 2, 3),
}


def active_coords(mode: Mode) -> tuple[int, ...]:
    return ACTIVE[mode] if isinstance(mode, Restriction) else (0, 1, 2, 3)


def base_restriction(mode: Mode) -> Restriction:
    return mode if isinstance(mode, Restriction) else Restriction.FULL


@dataclass(frozen=True)
class Multipliers:
    x1: float
    x2: float
    y1: float
    y2: float

    def __post_init__(self):
        if not all(v > 0 and math.isfinite(v) for v in self.as_tuple()):
            raise ValueError(f"multipliers must be positive and finite: {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.x2, self.y1, self.y2)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    def log(self) -> np.ndarray:
        return np.log(self.as_array())

    @classmethod
    def from_log(cls, u) -> "Multipliers":
        return cls(*(float(v) for v in np.exp(np.asarray(u, dtype=float))))


# ---------------------------------------------------------------------------
# type blocks

@lru_cache(maxsize=None)
def _compositions3(p: int) -> np.ndarray:
    return np.array([(i, j, p - i - j) for i in range(p + 1) for j in range(p - i + 1)], dtype=np.int64)


@lru_cache(maxsize=None)
def _log_multinomial(n: int, parts: tuple[int, ...]) -> float:
    value = 1
    rest = n
    for part in parts:
        value *= math.comb(rest, part)
        rest -= part
    return math.log(value)


def _block_half(p: int, q: int, v: int) -> np.ndarray:
    """Types ``(i, j, k, l, m, v)`` with ``i+j+k = p`` and ``l+m = q``."""
    ijk = _compositions3(p)
    lm = np.array([(l, q - l) for l in range(q + 1)], dtype=np.int64)  # noqa: E741
    left = np.repeat(ijk, len(lm), axis=0)
    right = np.tile(lm, (len(ijk), 1))
    return np.column_stack([left, right, np.full(len(left), v, dtype=np.int64)])


@lru_cache(maxsize=4096)
def type_block(scheme: Scheme, restriction: Restriction, p: int, q: int):
    """Weighted types contributing to ``A[p, q]``.

    Returns ``(types, exps, logcoef)``: the ``(n, 6)`` int array of types with
    nonzero weight, their exponent vectors ``(2i, j, l, 2m)`` and the log of
    ``multinomial(i+j+k; i, j, k) * binomial(l+m; l)``.
    """
    types = np.vstack([_block_half(p, q, 1), _block_half(q, p, 0)])
    keep = omega_mask(scheme, types)
    if restriction is Restriction.NO_TYPE2:
        keep &= (types[:, 1] == 0) & (types[:, 4] == 0)
    elif restriction is Restriction.NO_TYPE3:
        keep &= types[:, 2] == 0
    types = types[keep]
    i, j, k, l, m, _ = types.T  # noqa: E741
    exps = np.column_stack([2 * i, j, l, 2 * m]).astype(float)
    logcoef = np.array(
        [
            _log_multinomial(int(a + b + c), (int(a), int(b))) + _log_multinomial(int(d + e), (int(d),))
            for a, b, c, d, e in zip(i, j, k, l, m)
        ]
    )
    for arr in (types, exps, logcoef):
        arr.setflags(write=False)
    return types, exps, logcoef


# ---------------------------------------------------------------------------
# log-sum-exp helper for the small closed-form terms

def _lse(rows: np.ndarray, consts: np.ndarray, u: np.ndarray):
    s = consts + rows @ u
    top = s.max()
    w = np.exp(s - top)
    total = w.sum()
    value = top + math.log(total)
    prob = w / total
    mean = rows.T @ prob
    hess = (rows.T * prob) @ rows - np.outer(mean, mean)
    return value, mean, hess


# rows act on u = (ln x1, ln x2, ln y1, ln y2)
_HEAVY_ROWS = {
    Restriction.FULL: (np.array([[2, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0]], float), np.zeros(3)),
    Restriction.NO_TYPE2: (np.array([[2, 0, 0, 0], [0, 0, 0, 0]], float), np.zeros(2)),
    Restriction.NO_TYPE3: (np.array([[2, 0, 0, 0], [0, 1, 0, 0]], float), np.zeros(2)),
}
# ln(3b), with b = x1 y1/2 + x2 y2/2 + 1/3 (restricted variants drop a term)
_B_ROWS = {
    Restriction.FULL: (np.array([[1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 0, 0]], float), np.array([LN15, LN15, 0.0])),
    Restriction.NO_TYPE2: (np.array([[1, 0, 1, 0], [0, 0, 0, 0]], float), np.array([LN15, 0.0])),
    Restriction.NO_TYPE3: (np.array([[1, 0, 1, 0], [0, 1, 0, 1]], float), np.array([LN15, LN15])),
}


def _xlogx(x: float, scale: float = 1.0) -> float:
    return x * math.log(scale * x) if x > 0 else 0.0


# ---------------------------------------------------------------------------

class MomentKernel:
    """All weighted types of a (distribution, scheme, restriction) triple, packed for evaluation."""

    def __init__(self, spec: DistributionSpec, scheme: Scheme, restriction: Restriction = Restriction.FULL):
        self.spec = spec
        self.scheme = scheme
        self.restriction = restriction
        self.keys = spec.keys()
        self.index = {key: s for s, key in enumerate(self.keys)}
        self.d = np.array([spec.light[k] for k in self.keys])
        blocks = [type_block(scheme, restriction, p, q) for p, q in self.keys]
        sizes = np.array([len(b[0]) for b in blocks])
        if np.any(sizes == 0):
            empty = [k for k, n in zip(self.keys, sizes) if n == 0]
            raise ValueError(f"no admissible types for degree pairs {empty}")
        self.sizes = sizes
        self.offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        self.seg = np.repeat(np.arange(len(self.keys)), sizes)
        self.types = np.vstack([b[0] for b in blocks])
        self.exps = np.vstack([b[1] for b in blocks])
        self.logcoef = np.concatenate([b[2] for b in blocks])
        self._expT = np.ascontiguousarray(self.exps.T, dtype=float)  # (4, N) for fast products
        # degree pair (p, q) each type belongs to, as light-table index
        self.n_terms = len(self.logcoef)

    # -- core evaluations ---------------------------------------------------
    def _buffers(self):
        # scratch arrays reused across calls; fresh 10^6-element temporaries dominate the cost otherwise
        if not hasattr(self, "_buf"):
            n = self.n_terms
            self._buf = (np.empty(n), np.empty(n))
        return self._buf

    def _softmax(self, u: np.ndarray):
        """Per-term weights relative to each pair's largest term: ``(w, total, top)``; ``w`` is scratch."""
        s, tmp = self._buffers()
        np.dot(u, self._expT, out=s)
        s += self.logcoef
        top = np.maximum.reduceat(s, self.offsets)
        np.take(top, self.seg, out=tmp)
        s -= tmp
        np.exp(s, out=s)
        total = np.add.reduceat(s, self.offsets)
        return s, total, top

    def log_a(self, u) -> np.ndarray:
        """``ln A[p, q]`` for every light pair, in ``self.keys`` order."""
        _, total, top = self._softmax(np.asarray(u, dtype=float))
        return np.log(total) + top

    def y(self, u) -> float:
        return float(self.d @ self.log_a(u))

    def y_derivs(self, u, hessian: bool = True):
        """``(Y, dY/du, d2Y/du2)``; the Hessian is skipped when ``hessian`` is false."""
        u = np.asarray(u, dtype=float)
        w, total, top = self._softmax(u)
        y = float(self.d @ (np.log(total) + top))
        _, tmp = self._buffers()
        # w becomes the pi mass of each term: d[p, q] * w / total[p, q]
        np.take(self.d / total, self.seg, out=tmp)
        w *= tmp
        grad = self._expT @ w
        if not hessian:
            return y, grad, None
        second = np.empty((4, 4))
        pair_sums = np.empty((4, len(self.d)))  # d * E[a] per pair
        for i in range(4):
            np.multiply(self._expT[i], w, out=tmp)
            pair_sums[i] = np.add.reduceat(tmp, self.offsets)
            for j in range(i, 4):
                second[i, j] = second[j, i] = tmp @ self._expT[j]
        hess = second - (pair_sums / self.d) @ pair_sums.T
        return y, grad, hess

    def pi_values(self, u) -> np.ndarray:
        """pi for every weighted type: ``coef * r[p, q] * x1^{2i} x2^j y1^l y2^{2m}``."""
        w, total, _ = self._softmax(np.asarray(u, dtype=float))
        return self.d[self.seg] * w / total[self.seg]


@lru_cache(maxsize=6)
def kernel_for(spec: DistributionSpec, scheme: Scheme, restriction: Restriction) -> MomentKernel:
    return MomentKernel(spec, scheme, restriction)


# ---------------------------------------------------------------------------
# objective (rate function) and its derivatives in u

def objective(kernel: MomentKernel, c: float, u, mode: Mode, hessian: bool = True):
    """Rate ``ln F`` as a function of log-multipliers, with gradient and Hessian in ``u``.

    For a :class:`Restriction` the critical points of this function are the
    stationary points of the constrained maximisation.  For :class:`BetaFixed`
    it is the convex dual of the maximisation over the remaining variables, so
    its minimum is the fibre maximum.
    """
    u = np.asarray(u, dtype=float)
    spec = kernel.spec
    restriction = base_restriction(mode)
    y, g, h = kernel.y_derivs(u, hessian)
    value = spec.tau * LN2 + y
    grad = g.copy()
    hess = h.copy() if hessian else None
    if spec.bigH > 0:
        rows, consts = _HEAVY_ROWS[restriction]
        lv, lg, lh = _lse(rows, consts, u)
        value += spec.bigH * lv
        grad += spec.bigH * lg
        if hessian:
            hess += spec.bigH * lh
    if isinstance(mode, Restriction):
        rows, consts = _B_ROWS[restriction]
        lv, lg, lh = _lse(rows, consts, u)
        value -= 2 * c * lv
        grad -= 2 * c * lg
        if hessian:
            hess -= 2 * c * lh
    else:
        b1, b2, b3 = mode.beta1, mode.beta2, mode.beta3
        lin = np.array([b1, b2, b1, b2])
        value += 2 * c * (-(lin @ u) + _xlogx(b1, 2) + _xlogx(b2, 2) + _xlogx(b3, 3) - LN3)
        grad -= 2 * c * lin
    act = list(active_coords(mode))
    mask = np.zeros(4, dtype=bool)
    mask[act] = True
    grad[~mask] = 0.0
    if hessian:
        hess[~mask, :] = 0.0
        hess[:, ~mask] = 0.0
    return value, grad, hess


def _coerce(mult) -> np.ndarray:
    if isinstance(mult, Multipliers):
        return mult.log()
    return np.log(np.asarray(mult, dtype=float))


# ---------------------------------------------------------------------------
# public operations

def a_pq(spec: DistributionSpec, scheme: Scheme, mult: Multipliers, p: int, q: int,
         restriction: Restriction = Restriction.FULL) -> float:
    if (p, q) not in spec.light:
        raise NotLight(f"({p}, {q}) is not a light degree pair", "a_pq")
    types, exps, logcoef = type_block(scheme, restriction, p, q)
    s = logcoef + exps @ _coerce(mult)
    top = s.max()
    log_value = top + math.log(np.exp(s - top).sum())
    if log_value > 709.0:
        raise KernelOverflow(f"A[{p},{q}] = exp({log_value:.1f}) exceeds the float range", "a_pq")
    return math.exp(log_value)


def y_and_grad(spec: DistributionSpec, scheme: Scheme, mult: Multipliers,
               restriction: Restriction = Restriction.FULL) -> tuple[float, np.ndarray]:
    """``Y = sum d ln A`` and its gradient in ``(x1, x2, y1, y2)``; removed coordinates report 0."""
    kernel = kernel_for(spec, scheme, restriction)
    u = _coerce(mult)
    y, g, _ = kernel.y_derivs(u, hessian=False)
    grad = g / np.exp(u)
    grad[[i for i in range(4) if i not in ACTIVE[restriction]]] = 0.0
    return y, grad


def ln_f(spec: DistributionSpec, scheme: Scheme, c: float, mult: Multipliers,
         restriction: Restriction = Restriction.FULL) -> float:
    """Closed-form rate ``tau ln 2 + H ln(heavy base) + Y - 2c ln(3b)``."""
    value, _, _ = objective(kernel_for(spec, scheme, restriction), c, _coerce(mult), restriction, hessian=False)
    return value


def residuals(spec: DistributionSpec, scheme: Scheme, c: float, mult: Multipliers, mode: Mode) -> np.ndarray:
    """``lhs - rhs`` of the stationarity equations written in the ``x`` coordinates.

    Full/restricted modes: e.g. ``dY/dx1 + 2 H x1 / (x1^2 + x2 + 1) - y1 c / b``.
    BetaFixed: right-hand sides ``2 beta1 c / x1``, ``2 beta2 c / x2``, ``2 beta1 c / y1``, ``2 beta2 c / y2``.
    Only the active coordinates are returned (2 for NO_TYPE2, else 4).
    """
    kernel = kernel_for(spec, scheme, base_restriction(mode))
    u = _coerce(mult)
    _, g, _ = objective(kernel, c, u, mode, hessian=False)
    act = list(active_coords(mode))
    return (g / np.exp(u))[act]


class PiFamily:
    """Sparse map from :class:`VarType` to pi, backed by arrays."""

    def __init__(self, types: np.ndarray, values: np.ndarray):
        self.types = types
        self.values = values
        self._lookup = None

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, t) -> float:
        if self._lookup is None:
            self._lookup = {tuple(int(a) for a in row): i for i, row in enumerate(self.types)}
        idx = self._lookup.get(tuple(t))
        return 0.0 if idx is None else float(self.values[idx])

    def items(self):
        for row, value in zip(self.types, self.values):
            yield VarType(*(int(a) for a in row)), float(value)

    def moments(self) -> np.ndarray:
        """Totals ``(sum i pi, sum j pi, sum k pi, sum l pi, sum m pi)``."""
        return self.values @ self.types[:, :5]


@dataclass
class StationaryReport:
    mult: Multipliers
    mode: Mode
    c: float
    b: float
    h: float
    beta: tuple[float, float, float]
    heavy: tuple[float, float, float]
    lnF: float
    residual_norm: float
    pi: PiFamily = field(repr=False)
    pair_keys: list = field(repr=False, default_factory=list)
    pair_mass: np.ndarray = field(repr=False, default=None)
    iterations: int = 0

    def to_dict(self) -> dict:
        mode = str(self.mode) if isinstance(self.mode, Restriction) else {
            "beta1": self.mode.beta1, "beta2": self.mode.beta2}
        return {
            "mode": mode,
            "c": self.c,
            "multipliers": dict(zip(("x1", "x2", "y1", "y2"), self.mult.as_tuple())),
            "b": self.b,
            "h": self.h,
            "beta": list(self.beta),
            "heavy": list(self.heavy),
            "lnF": self.lnF,
            "residual_norm": self.residual_norm,
        }


def derive_stationary(spec: DistributionSpec, scheme: Scheme, c: float, mult: Multipliers,
                      restriction: Mode = Restriction.FULL) -> StationaryReport:
    """Closed-form primal quantities attached to a multiplier point."""
    mode = restriction
    base = base_restriction(mode)
    kernel = kernel_for(spec, scheme, base)
    u = _coerce(mult)
    x1, x2, y1, y2 = np.exp(u)
    if base is Restriction.NO_TYPE2:
        x2 = y2 = 0.0
    value, g, _ = objective(kernel, c, u, mode, hessian=False)
    res = (g / np.exp(u))[list(active_coords(mode))]

    if isinstance(mode, BetaFixed):
        beta = (mode.beta1, mode.beta2, mode.beta3)
        b = float("nan")
    else:
        third = 0.0 if base is Restriction.NO_TYPE3 else 1.0 / 3.0
        b = x1 * y1 / 2 + x2 * y2 / 2 + third
        beta = (x1 * y1 / (2 * b), x2 * y2 / (2 * b), third / b)
    heavy_base = x1 * x1 + x2 + (0.0 if base is Restriction.NO_TYPE3 else 1.0)
    h = spec.bigH / heavy_base
    heavy = (h * x1 * x1, h * x2, 0.0 if base is Restriction.NO_TYPE3 else h)

    values = kernel.pi_values(u)
    pair_mass = np.add.reduceat(values, kernel.offsets)
    return StationaryReport(
        mult=Multipliers(*(float(v) for v in np.exp(u))),
        mode=mode,
        c=float(c),
        b=float(b),
        h=float(h),
        beta=tuple(float(v) for v in beta),
        heavy=tuple(float(v) for v in heavy),
        lnF=float(value),
        residual_norm=float(np.max(np.abs(res))),
        pi=PiFamily(kernel.types, values),
        pair_keys=kernel.keys,
        pair_mass=pair_mass,
    )


def batir_margins(k: int) -> tuple[float, float]:
    """``(ln k! - lower, upper - ln k!)`` for the Batir bounds, evaluated with 50 significant digits."""
    if not 1 <= k <= 170:
        raise KernelOverflow(f"k={k} outside 1..170", "batir_check")
    with mpmath.workdps(50):
        kk = mpmath.mpf(k)
        ln_fact = mpmath.loggamma(kk + 1)
        core = kk * (mpmath.log(kk) - 1)
        two_pi = 2 * mpmath.pi
        lower = core + mpmath.log(two_pi * (kk + mpmath.mpf(1) / 6)) / 2
        upper = core + mpmath.log(two_pi * (kk + mpmath.e ** 2 / two_pi - 1)) / 2
        return float(ln_fact - lower), float(upper - ln_fact)


def batir_check(k: int) -> bool:
    """Batir's two-sided bound on ``k!``.

    The lower bound is strict.  The upper bound is attained at ``k = 1``
    (both sides equal 1), so it is tested as a non-strict inequality up to
    rounding at 50 digits.
    """
    below, above = batir_margins(k)
    return below > 0 and above > -1e-40

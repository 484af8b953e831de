"""Variable types and the binary weighting schemes that select solutions.

A variable of type ``(i, j, k, l, m, v)`` is assigned ``v`` and has ``i, j, k``
true occurrences in clauses with 1, 2, 3 true literals and ``l, m`` false
occurrences in clauses with 1, 2 true literals.  It is *free* when ``i == 0``.

Every scheme gives weight 1 to non-free variables.  On free variables the
orientation-bearing schemes evaluate a predicate ``obedient`` such that exactly
one of a type and its flip image is obedient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NoOrientation, NotFree


class VarType(NamedTuple):
    i: int
    j: int
    k: int
    l: int  # noqa: E741
    m: int
    v: int


@dataclass(frozen=True)
class Scheme:
    """One of ``all``, ``nps``, ``nps-imbalance`` or ``alpha`` (with ``a1, a3 > 0``)."""

    kind: str
    a1: float = 1.0
    a3: float = 1.0

    KINDS = ("all", "nps", "nps-imbalance", "alpha")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "alpha" and not (self.a1 > 0 and self.a3 > 0):
            raise ValueError(f"alpha scheme needs positive coefficients, got ({self.a1}, {self.a3})")

    @classmethod
    def all_solutions(cls) -> "Scheme":
        return cls("all")

    @classmethod
    def nps(cls) -> "Scheme":
        return cls("nps")

    @classmethod
    def nps_imbalance(cls) -> "Scheme":
        return cls("nps-imbalance")

    @classmethod
    def alpha(cls, a1: float, a3: float = 1.0) -> "Scheme":
        return cls("alpha", float(a1), float(a3))

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        """Parse ``all``, ``nps``, ``nps-imbalance`` or ``alpha:<a1>[,<a3>]``."""
        text = text.strip().lower()
        if text in ("all", "nps", "nps-imbalance"):
            return cls(text)
        if text.startswith("alpha:"):
            parts = text[len("alpha:"):].split(",")
            if len(parts) not in (1, 2):
                raise ValueError(f"bad alpha scheme {text!r}")
            a1 = float(parts[0])
            a3 = float(parts[1]) if len(parts) == 2 else 1.0
            return cls.alpha(a1, a3)
        raise ValueError(f"unknown scheme {text!r} (all, nps, nps-imbalance, alpha:<a1>[,<a3>])")

    @property
    def orients(self) -> bool:
        return self.kind != "all"

    def __str__(self) -> str:
        if self.kind == "alpha":
            return f"alpha:{self.a1:g},{self.a3:g}"
        return self.kind


def obedient(scheme: Scheme, j: int, k: int, l: int, m: int, v: int) -> int:  # noqa: E741
    if scheme.kind == "all":
        raise NoOrientation("the all-solutions scheme defines no orientation", "obedient")
    if scheme.kind == "nps":
        return int(v == 1)
    if scheme.kind == "nps-imbalance":
        expr = (j - l) + (k - m)
    else:
        expr = scheme.a1 * (j - l) + scheme.a3 * (k - m)
    return int(expr > 0 or (expr == 0 and v == 1))


def omega(scheme: Scheme, t: VarType) -> int:
    if t.i >= 1 or scheme.kind == "all":
        return 1
    return obedient(scheme, t.j, t.k, t.l, t.m, t.v)


def omega_mask(scheme: Scheme, types: np.ndarray) -> np.ndarray:
    """Vectorised :func:`omega` over an ``(n, 6)`` array of types; returns a bool array."""
    i, j, k, l, m, v = (types[:, col] for col in range(6))  # noqa: E741
    if scheme.kind == "all":
        return np.ones(len(types), dtype=bool)
    if scheme.kind == "nps":
        ok = v == 1
    else:
        if scheme.kind == "nps-imbalance":
            expr = (j - l) + (k - m)
        else:
            expr = scheme.a1 * (j - l) + scheme.a3 * (k - m)
        ok = (expr > 0) | ((expr == 0) & (v == 1))
    return (i >= 1) | ok


def flip_type(t: VarType) -> VarType:
    if t.i != 0:
        raise NotFree(f"variable of type {tuple(t)} is not free", "flip_type")
    return VarType(0, t.l, t.m, t.j, t.k, 1 - t.v)


def exclusion_audit(scheme: Scheme, bound: int = 21) -> bool:
    """True iff exactly one of each free type and its flip image has weight 1 (all counts <= bound)."""
    if not scheme.orients:
        raise NoOrientation("the all-solutions scheme defines no orientation", "exclusion_audit")
    r = np.arange(bound + 1)
    j, k, l, m, v = (a.ravel() for a in np.meshgrid(r, r, r, r, [0, 1], indexing="ij"))  # noqa: E741
    zero = np.zeros_like(j)
    here = omega_mask(scheme, np.column_stack([zero, j, k, l, m, v]))
    there = omega_mask(scheme, np.column_stack([zero, l, m, j, k, 1 - v]))
    return bool(np.all(here.astype(int) + there.astype(int) == 1))


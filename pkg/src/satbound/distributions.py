"""Degree distributions d[p, q] for the four random 3-SAT models.

``d[p, q]`` is the proportion of variables with ``p`` positive and ``q``
negative occurrences; the proportions sum to 1 and have mean ``p + q`` equal
to ``3c``.  Pairs with ``p > M`` or ``q > M`` are *heavy*: only their total
mass ``tau`` and total occurrence mass ``bigH`` are kept.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

from .errors import HeavyMassTooLarge, InvalidDensity, TruncationTooSmall

# below this a computed heavy aggregate is floating-point noise
_CLEAN = 1e-13


class ModelId(enum.Enum):
    STANDARD = "standard"
    BALANCED_SIGNS = "balanced-signs"
    BALANCED_OCCURRENCES = "balanced-occurrences"
    BALANCED_BOTH = "balanced-both"

    @classmethod
    def parse(cls, name: str) -> "ModelId":
        try:
            return cls(name.strip().lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown model {name!r} (expected one of {names})") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class DistributionSpec:
    model: ModelId
    c: float
    M: int
    light: Mapping[tuple[int, int], float] = field(repr=False)
    tau: float
    bigH: float

    def keys(self) -> list[tuple[int, int]]:
        return sorted(self.light)

    def __hash__(self) -> int:
        return hash((self.model, self.c, self.M, tuple(sorted(self.light.items()))))

    def to_csv(self) -> str:
        lines = ["p,q,d"]
        lines += [f"{p},{q},{self.light[p, q]!r}" for p, q in self.keys()]
        lines.append(f"# tau={self.tau!r}, H={self.bigH!r}")
        return "\n".join(lines) + "\n"


def _split(x: float) -> tuple[int, float]:
    """Integer part and remainder of ``x``, snapping remainders within 1e-12 of 0 or 1."""
    whole = math.floor(x)
    rem = x - whole
    if rem > 1.0 - 1e-12:
        whole, rem = whole + 1, 0.0
    elif rem < 1e-12:
        rem = 0.0
    return whole, rem


def _standard(c: float, M: int) -> dict:
    # C(p+q, p) e^{-3c} (3c/2)^{p+q} / (p+q)!  ==  e^{-3c} (3c/2)^{p+q} / (p! q!)
    lam = math.log(1.5 * c)
    return {
        (p, q): math.exp(-3 * c + (p + q) * lam - math.lgamma(p + 1) - math.lgamma(q + 1))
        for p in range(M + 1)
        for q in range(M + 1)
    }


def _balanced_signs(c: float, M: int) -> dict:
    lam = math.log(3 * c)
    out = {}
    for p in range(M + 1):
        out[p, p] = math.exp(-3 * c + 2 * p * lam - math.lgamma(2 * p + 1))
        if p + 1 <= M:
            half = 0.5 * math.exp(-3 * c + (2 * p + 1) * lam - math.lgamma(2 * p + 2))
            out[p + 1, p] = half
            out[p, p + 1] = half
    return out


def _balanced_occurrences(c: float, M: int) -> dict:
    t, r = _split(3 * c)
    if t + (1 if r > 0 else 0) > M:
        raise TruncationTooSmall(f"need M >= {t + (r > 0)} for c={c}", "build_distribution")
    out = {}
    if r < 1.0:
        for p in range(t + 1):
            out[p, t - p] = (1 - r) * math.comb(t, p) / 2**t
    if r > 0:
        for p in range(t + 2):
            out[p, t + 1 - p] = r * math.comb(t + 1, p) / 2 ** (t + 1)
    return out


def _balanced_both(c: float, M: int) -> dict:
    ps, r = _split(1.5 * c)
    if ps + (1 if r > 0 else 0) > M:
        raise TruncationTooSmall(f"need M >= {ps + (r > 0)} for c={c}", "build_distribution")
    out = {(ps, ps): 1 - r}
    if r > 0:
        out[ps + 1, ps + 1] = r
    return out


_BUILDERS = {
    ModelId.STANDARD: _standard,
    ModelId.BALANCED_SIGNS: _balanced_signs,
    ModelId.BALANCED_OCCURRENCES: _balanced_occurrences,
    ModelId.BALANCED_BOTH: _balanced_both,
}


def build_distribution(model: ModelId | str, c: float, M: int = 21) -> DistributionSpec:
    """Truncated degree table of ``model`` at clause density ``c``.

    Zero-mass pairs are dropped, so every key of ``light`` has ``d > 0``.
    """
    if isinstance(model, str):
        model = ModelId.parse(model)
    if not c > 0:
        raise InvalidDensity(f"clause density must be positive, got {c}", "build_distribution")
    if M < 1:
        raise TruncationTooSmall(f"M must be >= 1, got {M}", "build_distribution")

    light = {k: v for k, v in _BUILDERS[model](c, M).items() if v > 0.0}
    tau = 1.0 - math.fsum(light.values())
    bigH = 3 * c - math.fsum((p + q) * v for (p, q), v in light.items())
    tau = 0.0 if abs(tau) < _CLEAN else tau
    bigH = 0.0 if abs(bigH) < _CLEAN * max(1.0, 3 * c) else bigH
    return DistributionSpec(model, float(c), int(M), light, max(tau, 0.0), max(bigH, 0.0))


class DegreeSequence(NamedTuple):
    pairs: list[tuple[int, int]]
    slots: int


def largest_remainder(spec: DistributionSpec, n: int) -> dict[tuple[int, int], int]:
    """Integer counts summing to ``n`` proportional to the light masses.

    Leftover units go to the largest fractional parts; ties go to the
    lexicographically smallest ``(p, q)``.
    """
    keys = spec.keys()
    total = math.fsum(spec.light.values())
    quotas = {k: n * spec.light[k] / total for k in keys}
    counts = {k: math.floor(quotas[k]) for k in keys}
    short = n - sum(counts.values())
    by_remainder = sorted(keys, key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in by_remainder[:short]:
        counts[k] += 1
    return {k: v for k, v in counts.items() if v}


def finite_degree_sequence(
    spec: DistributionSpec, n: int, seed: int, tau_cap: float = 1e-3
) -> DegreeSequence:
    """Degree pairs for ``n`` variables; the multiset is fixed by rounding, ``seed`` orders it."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.tau > tau_cap:
        raise HeavyMassTooLarge(
            f"heavy mass tau={spec.tau:.3g} exceeds cap {tau_cap:g}; raise M",
            "finite_degree_sequence",
        )
    counts = largest_remainder(spec, n)
    pairs = [k for k in sorted(counts) for _ in range(counts[k])]
    random.Random(f"degrees/{seed}").shuffle(pairs)
    return DegreeSequence(pairs, sum(p + q for p, q in pairs))

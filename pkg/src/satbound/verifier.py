"""Exhaustive checks of the selection schemes on small concrete formulas.

Assignments are encoded as integers whose most significant of ``n`` bits is
variable 1, so increasing codes are lexicographic order on bit vectors.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Optional, Sequence

import numpy as np

from .distributions import DistributionSpec, finite_degree_sequence
from .errors import (
    ExclusionViolation,
    NoOrientation,
    NotASolution,
    ParseError,
    SlotMismatch,
    TooLarge,
    WrongWidth,
)
from .schemes import Scheme, VarType, obedient, omega_mask

MAX_ENUM = 24
_CHUNK = 1 << 18


@dataclass(frozen=True)
class Formula:
    """``n`` variables and 3-literal clauses of signed indices (``-v`` is the negation of ``v``)."""

    n: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(int(x) for x in cl) for cl in self.clauses))
        for cl in self.clauses:
            if len(cl) != 3:
                raise WrongWidth(f"clause {cl} has {len(cl)} literals", 0, "Formula")
            for lit in cl:
                if lit == 0 or abs(lit) > self.n:
                    raise ParseError(f"literal {lit} outside 1..{self.n}", 0, "Formula")

    @property
    def m(self) -> int:
        return len(self.clauses)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(var, neg)``: zero-based variable index and negation flag per slot, shape ``(m, 3)``."""
        lits = np.array(self.clauses, dtype=np.int64).reshape(-1, 3)
        return np.abs(lits) - 1, lits < 0

    def degrees(self) -> list[tuple[int, int]]:
        pos = [0] * self.n
        neg = [0] * self.n
        for cl in self.clauses:
            for lit in cl:
                (pos if lit > 0 else neg)[abs(lit) - 1] += 1
        return list(zip(pos, neg))

    def is_legal(self) -> bool:
        return all(len({abs(x) for x in cl}) == 3 for cl in self.clauses)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.n} {self.m}"]
        lines += [" ".join(str(x) for x in cl) + " 0" for cl in self.clauses]
        return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> Formula:
    n = None
    expected = None
    clauses = []
    pending: list[int] = []
    pending_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if n is not None:
                raise ParseError("duplicate problem line", lineno)
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"bad problem line {line!r}", lineno)
            try:
                n, expected = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"bad problem line {line!r}", lineno) from None
            continue
        if n is None:
            raise ParseError("clause before the problem line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"bad literal {tok!r}", lineno) from None
            if not pending:
                pending_line = lineno
            if lit == 0:
                if len(pending) != 3:
                    raise WrongWidth(f"clause of width {len(pending)}", pending_line)
                clauses.append(tuple(pending))
                pending = []
                continue
            if abs(lit) > n:
                raise ParseError(f"literal {lit} outside 1..{n}", lineno)
            pending.append(lit)
    if pending:
        raise ParseError("last clause is not terminated by 0", pending_line)
    if n is None:
        raise ParseError("missing problem line")
    if expected != len(clauses):
        raise ParseError(f"header announces {expected} clauses, found {len(clauses)}")
    return Formula(n, tuple(clauses))


# ---------------------------------------------------------------------------
# enumeration and typing

def _bits(codes: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(bool)


def solution_codes(f: Formula) -> np.ndarray:
    """Satisfying assignments as increasing integer codes."""
    if f.n > MAX_ENUM:
        raise TooLarge(f"n={f.n} exceeds the exhaustive limit {MAX_ENUM}", "enumerate_solutions")
    var, neg = f.arrays()
    out = []
    total = 1 << f.n
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        bits = _bits(codes, f.n)
        ok = np.ones(len(codes), dtype=bool)
        for a, s in zip(var, neg):
            ok &= (bits[:, a] != s).any(axis=1)
        out.append(codes[ok])
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def enumerate_solutions(f: Formula) -> list[tuple[int, ...]]:
    """All satisfying assignments, as 0/1 tuples, in lexicographic order."""
    codes = solution_codes(f)
    return [tuple(int(b) for b in row) for row in _bits(codes, f.n)]


def type_table(f: Formula, assignments: np.ndarray) -> np.ndarray:
    """Types of every variable under every assignment: shape ``(s, n, 6)``.

    Each occurrence is counted, so repeated literals in one clause count twice.
    """
    assignments = np.asarray(assignments, dtype=bool).reshape(-1, f.n)
    s = len(assignments)
    var, neg = f.arrays()
    truth = assignments[:, var] != neg  # (s, m, 3)
    tcount = truth.sum(axis=2)
    if s and (tcount == 0).any():
        bad = np.argwhere(tcount == 0)[0]
        raise NotASolution(f"clause {bad[1] + 1} has no true literal", "classify_variable")
    # slot category: true in type-t clause -> t-1 (i, j, k); false in type-t clause -> 2+t (l, m)
    cat = np.where(truth, tcount[:, :, None] - 1, tcount[:, :, None] + 2)
    counts = np.zeros((s, f.n, 5), dtype=np.int64)
    rows = np.broadcast_to(np.arange(s)[:, None, None], cat.shape)
    cols = np.broadcast_to(var[None], cat.shape)
    np.add.at(counts, (rows, cols, cat), 1)
    return np.concatenate([counts, assignments[:, :, None].astype(np.int64)], axis=2)


def classify_variable(f: Formula, assignment: Sequence[int], var: int) -> VarType:
    """Type of variable ``var`` (1-based) under a satisfying ``assignment``."""
    if not 1 <= var <= f.n:
        raise ValueError(f"variable {var} outside 1..{f.n}")
    row = type_table(f, np.array([assignment], dtype=bool))[0, var - 1]
    return VarType(*(int(x) for x in row))


def weighted_count(f: Formula, scheme: Scheme, codes: Optional[np.ndarray] = None) -> int:
    """Number of solutions all of whose variables have weight 1 under ``scheme``."""
    if codes is None:
        codes = solution_codes(f)
    if scheme.kind == "all" or len(codes) == 0:
        return int(len(codes))
    types = type_table(f, _bits(codes, f.n))
    ok = omega_mask(scheme, types.reshape(-1, 6)).reshape(len(codes), f.n)
    return int(ok.all(axis=1).sum())


# ---------------------------------------------------------------------------
# solution graph

@dataclass
class SolutionGraph:
    n: int
    solutions: list[tuple[int, ...]]
    edges: list[tuple[int, int, int]]  # (index a, index b, 1-based variable), a < b
    codes: np.ndarray = field(repr=False, default=None)


def build_solution_graph(f: Formula) -> SolutionGraph:
    codes = solution_codes(f)
    index = {int(c): i for i, c in enumerate(codes)}
    edges = []
    for a, code in enumerate(codes):
        for v in range(1, f.n + 1):
            other = int(code) ^ (1 << (f.n - v))
            b = index.get(other)
            if b is not None and b > a:
                edges.append((a, b, v))
    sols = [tuple(int(x) for x in row) for row in _bits(codes, f.n)]
    return SolutionGraph(f.n, sols, edges, codes)


@dataclass
class OrientationReport:
    scheme: Scheme
    arcs: list[tuple[int, int, int]]  # (from, to, variable): disobedient end -> obedient end
    is_acyclic: bool
    minimal: frozenset
    X: int

    def to_dict(self) -> dict:
        return {"scheme": str(self.scheme), "acyclic": self.is_acyclic, "X": self.X,
                "minimal": sorted(self.minimal), "arcs": len(self.arcs)}


def orient_graph(g: SolutionGraph, f: Formula, scheme: Scheme) -> OrientationReport:
    """Direct every edge towards the endpoint where its variable is obedient."""
    if not scheme.orients:
        raise NoOrientation("the all-solutions scheme defines no orientation", "orient_graph")
    types = type_table(f, np.array(g.solutions, dtype=bool).reshape(-1, f.n)) if g.solutions else None
    arcs = []
    for a, b, v in g.edges:
        ta, tb = types[a, v - 1], types[b, v - 1]
        if ta[0] or tb[0]:
            raise ExclusionViolation(
                f"variable {v} is not free at both ends of edge {a}-{b}", "orient_graph")
        oa = obedient(scheme, *(int(x) for x in ta[1:]))
        ob = obedient(scheme, *(int(x) for x in tb[1:]))
        if oa == ob:
            raise ExclusionViolation(
                f"variable {v} is {'obedient' if oa else 'disobedient'} at both ends of edge {a}-{b}",
                "orient_graph")
        arcs.append((b, a, v) if oa else (a, b, v))
    return _report(scheme, len(g.solutions), arcs)


def _report(scheme, count, arcs) -> OrientationReport:
    preds: dict[int, set] = {i: set() for i in range(count)}
    has_out = set()
    for src, dst, _ in arcs:
        preds[dst].add(src)
        has_out.add(src)
    try:
        tuple(TopologicalSorter(preds).static_order())
        acyclic = True
    except CycleError:
        acyclic = False
    minimal = frozenset(i for i in range(count) if i not in has_out)
    return OrientationReport(scheme, arcs, acyclic, minimal, len(minimal))


def potential(f: Formula, assignment: Sequence[int], scheme: Scheme) -> tuple[float, int]:
    """Lexicographic potential that increases along every arc of ``scheme``.

    ``(-a1 * #type-1 clauses + a3 * #type-3 clauses, number of ones)``, with
    ``a1 = a3 = 1`` for nps-imbalance and ``a1 = a3 = 0`` for nps.
    """
    var, neg = f.arrays()
    bits = np.asarray(assignment, dtype=bool)
    t = (bits[var] != neg).sum(axis=1)
    a1, a3 = {"nps": (0.0, 0.0), "nps-imbalance": (1.0, 1.0)}.get(scheme.kind, (scheme.a1, scheme.a3))
    return (-a1 * int((t == 1).sum()) + a3 * int((t == 3).sum()), int(bits.sum()))


def orient_by_potential(g: SolutionGraph, f: Formula, scheme: Scheme) -> OrientationReport:
    """Orientation of ``g`` from potential comparisons alone (independent of the obedience rule)."""
    pots = [potential(f, s, scheme) for s in g.solutions]
    arcs = []
    for a, b, v in g.edges:
        if pots[a] == pots[b]:
            raise ExclusionViolation(f"equal potentials across edge {a}-{b}", "orient_by_potential")
        arcs.append((a, b, v) if pots[a] < pots[b] else (b, a, v))
    return _report(scheme, len(g.solutions), arcs)


def clause_counts(f: Formula, assignment: Sequence[int]) -> tuple[int, int, int]:
    var, neg = f.arrays()
    t = (np.asarray(assignment, dtype=bool)[var] != neg).sum(axis=1)
    return int((t == 1).sum()), int((t == 2).sum()), int((t == 3).sum())


# ---------------------------------------------------------------------------
# random configurations

def _fix_divisibility(pairs: list, keys: list) -> list:
    """Replace one degree pair, scanning from the end, so the slot total is a multiple of 3."""
    need = sum(p + q for p, q in pairs) % 3
    if need == 0:
        return pairs
    for pos in range(len(pairs) - 1, -1, -1):
        p, q = pairs[pos]
        options = [k for k in keys if (sum(k) - (p + q)) % 3 == (-need) % 3]
        if options:
            best = min(options, key=lambda k: (abs(k[0] - p) + abs(k[1] - q), k))
            out = list(pairs)
            out[pos] = best
            return out
    raise SlotMismatch(f"no degree pair fixes the slot total modulo 3 (residue {need})", "sample_configuration")


def _make_legal(slots: list, rng: random.Random, attempts: int = 200) -> list:
    """Swap occurrences between clauses until no clause repeats a variable."""
    slots = list(slots)
    m = len(slots) // 3

    def distinct(ci):
        return len({abs(x) for x in slots[3 * ci:3 * ci + 3]})

    for ci in range(m):
        for _ in range(attempts):
            if distinct(ci) == 3:
                break
            seen = set()
            for s in range(3 * ci, 3 * ci + 3):
                if abs(slots[s]) in seen:
                    bad = s
                    break
                seen.add(abs(slots[s]))
            other = rng.randrange(len(slots))
            co = other // 3
            if co == ci:
                continue
            before = distinct(ci), distinct(co)
            slots[bad], slots[other] = slots[other], slots[bad]
            if distinct(ci) <= before[0] or distinct(co) < before[1]:
                slots[bad], slots[other] = slots[other], slots[bad]
        if distinct(ci) < 3:
            raise SlotMismatch(f"could not separate repeated variables in clause {ci + 1}", "sample_configuration")
    return slots


def sample_configuration(spec: DistributionSpec, n: int, seed, legal: bool = False) -> Formula:
    """Random configuration with degrees from ``finite_degree_sequence``.

    Literal occurrences are shuffled uniformly and cut into consecutive 3-slot
    clauses.  With ``legal`` the clauses are then repaired by occurrence swaps
    so each has three distinct variables; degrees are unchanged.
    """
    seq = finite_degree_sequence(spec, n, seed)
    pairs = _fix_divisibility(seq.pairs, spec.keys())
    occ = []
    for v, (p, q) in enumerate(pairs, start=1):
        occ += [v] * p + [-v] * q
    if len(occ) % 3:
        raise SlotMismatch(f"{len(occ)} occurrences do not fill whole clauses", "sample_configuration")
    rng = random.Random(f"configuration/{seed}")
    rng.shuffle(occ)
    if legal:
        occ = _make_legal(occ, rng)
    clauses = tuple(tuple(occ[i:i + 3]) for i in range(0, len(occ), 3))
    return Formula(n, clauses)


# ---------------------------------------------------------------------------
# Monte Carlo first moment

@dataclass
class MonteCarloResult:
    scheme: Scheme
    trials: int
    p_sat_hat: float
    ex_hat: float
    stderr: tuple[float, float]  # (p_sat, X)
    rows: list[tuple[int, int, int]]  # (trial, sat, X)
    sat_without_selected: int = 0

    @property
    def markov_margin(self) -> float:
        """``ex_hat + 3 * combined stderr - p_sat_hat``; negative values flag a violation."""
        return self.ex_hat + 3 * math.hypot(*self.stderr) - self.p_sat_hat

    def to_csv(self) -> str:
        return "trial,sat,X\n" + "".join(f"{t},{s},{x}\n" for t, s, x in self.rows)


def monte_carlo_table(spec: DistributionSpec, schemes: Iterable[Scheme], n: int, trials: int, seed,
                      legal: bool = False) -> dict:
    """Run :func:`monte_carlo_first_moment` for several schemes on the same sampled formulas."""
    if n > 16:
        raise TooLarge(f"n={n} exceeds the Monte Carlo limit 16", "monte_carlo_first_moment")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    schemes = list(schemes)
    rows = {s: [] for s in schemes}
    for t in range(trials):
        f = sample_configuration(spec, n, f"{seed}/{t}", legal=legal)
        codes = solution_codes(f)
        sat = int(len(codes) > 0)
        for s in schemes:
            rows[s].append((t, sat, weighted_count(f, s, codes)))
    out = {}
    for s in schemes:
        sats = np.array([r[1] for r in rows[s]], dtype=float)
        xs = np.array([r[2] for r in rows[s]], dtype=float)
        p = float(sats.mean())
        se_p = math.sqrt(p * (1 - p) / trials)
        se_x = float(xs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        zero = int(((sats == 1) & (xs == 0)).sum())
        out[s] = MonteCarloResult(s, trials, p, float(xs.mean()), (se_p, se_x), rows[s], zero)
    return out


def monte_carlo_first_moment(spec: DistributionSpec, scheme: Scheme, n: int, trials: int, seed,
                             legal: bool = False) -> MonteCarloResult:
    """Estimate ``Pr(sat)`` and ``E[X]`` over sampled configurations.

    ``X`` counts solutions whose free variables are all obedient (all
    solutions for the all-solutions scheme).  Trial ``t`` uses the seed
    ``f"{seed}/{t}"``.
    """
    return monte_carlo_table(spec, [scheme], n, trials, seed, legal)[scheme]


PHI = Formula(4, (
    (1, 2, 3), (1, 3, -4), (1, -3, -4), (1, -2, -4), (-2, 3, -4), (-1, -2, -4), (-1, 2, -3),
))

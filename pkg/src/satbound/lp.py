"""Linear-programming bounds on the share of type-1 clauses.

The counting constraints on clause and variable types are linear, so the
admissible ``beta1`` values form an interval.  Its ends are computed here by a
two-phase revised simplex.  Degree pairs above ``M_lp`` are folded into the
heavy aggregate.  Heavy occurrences may only sit in satisfied slots, so a
small ``M_lp`` narrows the interval from above; the ends settle as ``M_lp``
grows towards the table truncation.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy import sparse

from .distributions import DistributionSpec, build_distribution
from .errors import LPInfeasible, TruncationTooCoarse
from .kernel import Restriction, type_block
from .schemes import Scheme

_TOL = 1e-9


class Simplex:
    """``min cost @ x`` subject to ``A x = b, x >= 0`` by the revised simplex method.

    ``A`` may be dense or a scipy sparse matrix; only the basis inverse is kept
    dense, so wide problems with short columns stay cheap.  Pricing follows the
    most negative reduced cost and falls back to Bland's rule after a run of
    degenerate pivots, which rules out cycling.
    """

    def __init__(self, A, b, cost, max_pivots: int = 200_000, refactor: int = 100):
        A = sparse.csc_matrix(A, dtype=float)
        b = np.array(b, dtype=float)
        flip = np.where(b < 0, -1.0, 1.0)
        self.A = sparse.csc_matrix(sparse.diags(flip) @ A)
        self.b = b * flip
        self.cost = np.asarray(cost, dtype=float)
        self.max_pivots = max_pivots
        self.refactor = refactor
        self.pivots = 0

    def _column(self, e):
        m, n = self.A.shape
        if e >= n:
            col = np.zeros(m)
            col[e - n] = 1.0
            return col
        return self.A[:, e].toarray().ravel()

    def _factor(self, basis):
        B = np.column_stack([self._column(e) for e in basis])
        binv = np.linalg.inv(B)
        return binv, binv @ self.b

    def _run(self, basis, cost, phase1):
        m, n = self.A.shape
        binv, xb = self._factor(basis)
        degenerate = 0
        since = 0
        while True:
            if self.pivots >= self.max_pivots:
                raise LPInfeasible("pivot limit reached", "beta1_bounds")
            y = cost[basis] @ binv
            red = cost[:n] - self.A.T @ y
            if phase1:
                red = np.concatenate([red, cost[n:] - y])
            cand = np.where(red < -_TOL)[0]
            if cand.size == 0:
                return basis, binv, xb
            e = int(cand[0]) if degenerate > 50 else int(cand[np.argmin(red[cand])])
            d = binv @ self._column(e)
            artificial = basis >= n
            ratios = np.full(m, np.inf)
            pos = d > _TOL
            ratios[pos] = np.maximum(xb[pos], 0.0) / d[pos]
            if not phase1:
                # artificial variables left in the basis must stay at zero
                block = artificial & (np.abs(d) > _TOL)
                ratios[block] = 0.0
            best = ratios.min()
            if not np.isfinite(best):
                raise LPInfeasible("objective unbounded below", "beta1_bounds")
            ties = np.where(ratios <= best + 1e-12)[0]
            r = int(ties[np.argmin(basis[ties])])
            degenerate = degenerate + 1 if best <= 1e-12 else 0
            xb = xb - best * d
            xb[r] = best
            binv[r] /= d[r]
            dr = d.copy()
            dr[r] = 0.0
            binv -= np.outer(dr, binv[r])
            basis[r] = e
            self.pivots += 1
            since += 1
            if since >= self.refactor:
                binv, xb = self._factor(basis)
                since = 0

    def solve(self):
        """Return ``(value, x)`` at an optimal vertex."""
        m, n = self.A.shape
        basis = np.arange(n, n + m)
        cost1 = np.concatenate([np.zeros(n), np.ones(m)])
        basis, binv, xb = self._run(basis, cost1, phase1=True)
        residue = float(xb[basis >= n].sum())
        if residue > 1e-8 * max(1.0, self.b.max(initial=0.0)):
            raise LPInfeasible(f"constraints are infeasible (phase-1 residue {residue:.3g})", "beta1_bounds")
        cost2 = np.concatenate([self.cost, np.zeros(m)])
        basis, binv, xb = self._run(basis, cost2, phase1=False)
        x = np.zeros(n + m)
        x[basis] = xb
        x = x[:n]
        return float(self.cost @ x), x


def fold_heavy(spec: DistributionSpec, M_lp: int) -> DistributionSpec:
    """Copy of ``spec`` whose pairs with ``p > M_lp`` or ``q > M_lp`` join the heavy aggregate."""
    light = {k: v for k, v in spec.light.items() if max(k) <= M_lp}
    moved = [(k, v) for k, v in spec.light.items() if max(k) > M_lp]
    tau = spec.tau + math.fsum(v for _, v in moved)
    bigH = spec.bigH + math.fsum((p + q) * v for (p, q), v in moved)
    return replace(spec, M=M_lp, light=light, tau=tau, bigH=bigH)


def polytope(spec: DistributionSpec, scheme: Scheme):
    """Equality system ``A z = b`` of the clause/variable counting constraints.

    Column order: one column per distinct ``(p, q, i, j, k, l, m)`` with weight
    1, then ``H1, H2, H3``, then ``beta1, beta2, beta3``.  The ``k`` occurrence
    constraint is implied by the others and left out.
    """
    c = spec.c
    keys = spec.keys()
    cols, pair_of = [], []
    for idx, (p, q) in enumerate(keys):
        types, _, _ = type_block(scheme, Restriction.FULL, p, q)
        occ = np.unique(types[:, :5], axis=0)
        cols.append(occ)
        pair_of.append(np.full(len(occ), idx))
    occ = np.vstack(cols).astype(float)
    pair_of = np.concatenate(pair_of)
    n_pi = len(occ)
    npairs = len(keys)
    cols_pi = np.arange(n_pi)
    # row layout: 0 beta sum, 1..npairs degree rows, then H, i, j, l, m rows
    r_h, r_i, r_j, r_l, r_m = npairs + 1 + np.arange(5)
    entries = [
        (np.zeros(3, int), n_pi + 3 + np.arange(3), np.ones(3)),
        (1 + pair_of, cols_pi, np.ones(n_pi)),
        (np.full(3, r_h), n_pi + np.arange(3), np.ones(3)),
        (np.full(n_pi, r_i), cols_pi, occ[:, 0]),
        (np.full(n_pi, r_j), cols_pi, occ[:, 1]),
        (np.full(n_pi, r_l), cols_pi, occ[:, 3]),
        (np.full(n_pi, r_m), cols_pi, occ[:, 4]),
        # heavy shares and the beta terms
        (np.array([r_i, r_j]), np.array([n_pi, n_pi + 1]), np.ones(2)),
        (np.array([r_i, r_j, r_l, r_m]), np.array([n_pi + 3, n_pi + 4, n_pi + 3, n_pi + 4]),
         np.array([-c, -2 * c, -2 * c, -c])),
    ]
    rows = np.concatenate([e[0] for e in entries])
    cols_ = np.concatenate([e[1] for e in entries])
    vals = np.concatenate([e[2] for e in entries])
    A = sparse.csc_matrix((vals, (rows, cols_)), shape=(npairs + 6, n_pi + 6))
    A.eliminate_zeros()
    rhs = np.zeros(npairs + 6)
    rhs[0] = 1.0
    rhs[1:npairs + 1] = [spec.light[k] for k in keys]
    rhs[r_h] = spec.bigH
    return A, rhs, n_pi


def beta1_bounds(spec: DistributionSpec, scheme: Scheme, c: float | None = None, M_lp: int = 8
                 ) -> tuple[float, float]:
    """Smallest and largest ``beta1`` compatible with the linear constraints, truncated at ``M_lp``."""
    if M_lp > spec.M:
        raise ValueError(f"M_lp={M_lp} exceeds the table truncation M={spec.M}")
    if c is not None and c != spec.c:
        spec = build_distribution(spec.model, c, spec.M)
    small = fold_heavy(spec, M_lp)
    A, b, n_pi = polytope(small, scheme)
    cost = np.zeros(A.shape[1])
    cost[n_pi + 3] = 1.0
    lo, _ = Simplex(A, b, cost).solve()
    hi, _ = Simplex(A, b, -cost).solve()
    hi = -hi
    if not (lo > _TOL and hi < 1.0 - _TOL):
        raise TruncationTooCoarse(
            f"beta1 range [{lo:.4g}, {hi:.4g}] touches the ends of [0, 1] at M_lp={M_lp} "
            f"(heavy mass {small.tau:.3g}); raise M_lp", "beta1_bounds")
    return lo, hi

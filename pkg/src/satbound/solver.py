"""Stationary points of the rate function and the threshold bound built on them.

The stationarity systems are solved by damped Newton in log-multiplier
coordinates, which keeps every multiplier positive.  The Hessian is the exact
second derivative of the rate (a softmax covariance), not a difference quotient.

* Full / NO_TYPE2 / NO_TYPE3 points are saddle points of the rate, so the line
  search controls the gradient norm.
* BetaFixed points minimise a convex dual, so the line search controls the
  value and divergence of the multipliers signals an infeasible (beta1, beta2).

The NO_TYPE3 system is degenerate: the rate is constant along the direction
``(1/2, 1, 1, 1/2)`` in log coordinates, so its solutions form a curve.  Newton
takes minimum-norm steps, which leaves the component of ``ln(mult)`` along that
direction where the initial point put it; :func:`gauge_shift` moves along the
curve explicitly.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .distributions import DistributionSpec, ModelId, build_distribution
from .errors import BracketInvalid, CertificationFailure, NoConvergence, SingularJacobian
from .kernel import (
    BetaFixed,
    Mode,
    Multipliers,
    Restriction,
    StationaryReport,
    active_coords,
    base_restriction,
    derive_stationary,
    kernel_for,
    objective,
)
from .schemes import Scheme

log = logging.getLogger(__name__)

DEFAULT_INIT = Multipliers(1.0, 2.0, 2.0, 1.0)
# direction along which the NO_TYPE3 rate is constant (log coordinates)
NO_TYPE3_NULL = np.array([0.5, 1.0, 1.0, 0.5])
# trial points beyond _LOG_BOUND are rejected; accepted iterates beyond _DIVERGED mean an unbounded dual
_LOG_BOUND = 60.0
_DIVERGED = 25.0
_MAX_STEP = 4.0


@dataclass(frozen=True)
class SolveOptions:
    tol_residual: float = 1e-12
    max_iter: int = 200
    damping: float = 1.0
    init: Multipliers = DEFAULT_INIT

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


def _residual(g: np.ndarray, u: np.ndarray, act) -> float:
    return float(np.max(np.abs(g[act] / np.exp(u[act]))))


def _newton(spec, scheme, c, mode: Mode, u0: np.ndarray, opts: SolveOptions):
    kernel = kernel_for(spec, scheme, base_restriction(mode))
    convex = isinstance(mode, BetaFixed)
    act = list(active_coords(mode))
    u = np.array(u0, dtype=float)
    value, g, hess = objective(kernel, c, u, mode)
    res = _residual(g, u, act)
    merit = value if convex else float(g[act] @ g[act])
    for it in range(opts.max_iter):
        if res < opts.tol_residual:
            return u, it, res, value
        h = hess[np.ix_(act, act)]
        if not np.all(np.isfinite(h)):
            raise SingularJacobian("non-finite Hessian; try a perturbed init", "solve_stationary")
        step = np.linalg.lstsq(h, -g[act], rcond=1e-13)[0]
        if convex and step @ g[act] >= 0:
            # Hessian lost definiteness numerically; fall back to steepest descent
            step = -g[act]
        longest = np.max(np.abs(step))
        if longest > _MAX_STEP:
            step *= _MAX_STEP / longest
        lam = opts.damping
        while True:
            trial = u.copy()
            trial[act] += lam * step
            if np.max(np.abs(trial)) > _LOG_BOUND:
                ok = False
            else:
                t_value, t_g, t_hess = objective(kernel, c, trial, mode)
                t_merit = t_value if convex else float(t_g[act] @ t_g[act])
                ok = bool(np.isfinite(t_merit)) and (
                    t_merit <= merit + 1e-4 * lam * (step @ g[act]) if convex else t_merit < merit)
            if ok or lam < 1e-10:
                break
            lam *= 0.5
        if not ok:
            # no decrease possible: we sit at the noise floor of the merit function
            if res < 1e3 * opts.tol_residual:
                return u, it, res, value
            raise NoConvergence(f"line search stalled at residual {res:.3g}", "solve_stationary", res)
        if convex and merit - t_merit <= 1e-13 * (1.0 + abs(merit)) and lam < 1e-3:
            # creeping along a recession direction of the dual
            raise NoConvergence(f"dual stalled at residual {res:.3g} for mode {mode}", "solve_stationary", res)
        u, value, g, hess, merit = trial, t_value, t_g, t_hess, t_merit
        res = _residual(g, u, act)
        if np.max(np.abs(u)) > _DIVERGED:
            raise NoConvergence(f"multipliers diverge (|ln x| > {_DIVERGED}) for mode {mode}",
                                "solve_stationary", res)
    if res < opts.tol_residual:
        return u, opts.max_iter, res, value
    raise NoConvergence(f"no convergence after {opts.max_iter} iterations (residual {res:.3g})",
                        "solve_stationary", res)


def solve_stationary(spec: DistributionSpec, scheme: Scheme, c: float, mode: Mode = Restriction.FULL,
                     opts: SolveOptions = SolveOptions()) -> StationaryReport:
    """Stationary point of the rate for ``mode``, started from ``opts.init``."""
    if not c > 0:
        raise ValueError("c must be positive")
    u, iterations, _, _ = _newton(spec, scheme, c, mode, opts.init.log(), opts)
    report = derive_stationary(spec, scheme, c, Multipliers.from_log(u), mode)
    report.iterations = iterations
    return report


def gauge_shift(mult: Multipliers, *, x2: float) -> Multipliers:
    """Move a NO_TYPE3 solution along its solution curve to the point with the given ``x2``."""
    t = math.log(x2 / mult.x2)
    return Multipliers.from_log(mult.log() + t * NO_TYPE3_NULL)


def gauge_invariants(mult: Multipliers) -> tuple[float, float, float]:
    """Coordinates of a NO_TYPE3 solution curve: ``(x1^2/x2, y1/x2, y2^2/x2)``."""
    return (mult.x1 ** 2 / mult.x2, mult.y1 / mult.x2, mult.y2 ** 2 / mult.x2)


# ---------------------------------------------------------------------------
# continuation in c

def _solve_with_continuation(spec_at, scheme, c, mode, opts, anchor):
    """Solve at ``c``, walking in from the anchor ``(c0, mult0)`` when a direct start fails."""
    try:
        return solve_stationary(spec_at(c), scheme, c, mode, opts)
    except (NoConvergence, SingularJacobian):
        if anchor is None:
            raise
    c0, mult0 = anchor
    for pieces in (4, 16, 64):
        current = mult0
        try:
            for ci in np.linspace(c0, c, pieces + 1)[1:]:
                rep = solve_stationary(spec_at(ci), scheme, float(ci), mode, replace(opts, init=current))
                current = rep.mult
            return rep
        except (NoConvergence, SingularJacobian):
            continue
    raise NoConvergence(f"continuation from c={c0} to c={c} failed", "threshold_bound")


@dataclass
class BoundResult:
    model: ModelId
    scheme: Scheme
    M: int
    c_star: float
    bracket: tuple[float, float]
    reports: dict = field(repr=False)
    beta1_range: Optional[tuple[float, float]] = None
    certified: Optional[bool] = None
    certification: dict = field(default_factory=dict)
    tau: float = 0.0
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        full = self.reports["full"]
        no2 = self.reports.get("no-type2")
        no3 = self.reports.get("no-type3")
        return {
            "model": str(self.model),
            "scheme": str(self.scheme),
            "M": self.M,
            "tau": self.tau,
            "c_star": self.c_star,
            "bracket": list(self.bracket),
            "multipliers": dict(zip(("x1", "x2", "y1", "y2"), full.mult.as_tuple())),
            "beta": list(full.beta),
            "lnF": full.lnF,
            "lnF_boundary_notype2": None if no2 is None else no2.lnF,
            "lnF_boundary_notype3": None if no3 is None else no3.lnF,
            "beta1_range": None if self.beta1_range is None else list(self.beta1_range),
            "certified": self.certified,
            "certification": self.certification,
        }


def _spec_factory(model: ModelId, M: int):
    return lambda c: build_distribution(model, float(c), M)


def threshold_bound(model: ModelId | str, scheme: Scheme, M: int = 21, opts: SolveOptions = SolveOptions(),
                    c_bracket: tuple[float, float] = (3.0, 6.0), c_tol: float = 5e-4,
                    certify: bool = False, sweep_step: float = 0.05) -> BoundResult:
    """Bisect the clause density at which the stationary rate crosses zero.

    Returns the smallest tested density with ``ln F <= 0`` together with the
    final bracket.  The sign of ``ln F`` is checked at every evaluated point.
    With ``certify`` the boundary reports and a coarse beta sweep must also be
    dominated by the interior rate at ``c_star``.
    """
    model = ModelId.parse(model) if isinstance(model, str) else model
    spec_at = _spec_factory(model, M)
    lo, hi = map(float, c_bracket)
    if not lo < hi:
        raise BracketInvalid(f"empty bracket {c_bracket}", "threshold_bound")

    mid = 0.5 * (lo + hi)
    anchor_rep = solve_stationary(spec_at(mid), scheme, mid, Restriction.FULL, opts)
    anchor = (mid, anchor_rep.mult)
    history = [(mid, anchor_rep.lnF)]

    def at(c, near):
        rep = _solve_with_continuation(spec_at, scheme, c, Restriction.FULL, replace(opts, init=near[1]), near)
        history.append((c, rep.lnF))
        return rep

    rep_lo = at(lo, anchor)
    rep_hi = at(hi, anchor)
    if not (rep_lo.lnF > 0 and rep_hi.lnF <= 0):
        raise BracketInvalid(
            f"ln F does not change sign on [{lo}, {hi}]: {rep_lo.lnF:.4g}, {rep_hi.lnF:.4g}", "threshold_bound")
    if anchor_rep.lnF > 0:
        lo, rep_lo = mid, anchor_rep
    else:
        hi, rep_hi = mid, anchor_rep
    while hi - lo >= c_tol:
        mid = 0.5 * (lo + hi)
        near = (lo, rep_lo.mult) if mid - lo <= hi - mid else (hi, rep_hi.mult)
        rep = at(mid, near)
        if rep.lnF > 0:
            lo, rep_lo = mid, rep
        else:
            hi, rep_hi = mid, rep
        assert rep_lo.lnF > 0 >= rep_hi.lnF, "bracket sign invariant broken"

    spec_hi = spec_at(hi)
    result = BoundResult(model, scheme, M, hi, (lo, hi), {"full": rep_hi}, tau=spec_hi.tau, history=history)
    if certify:
        certify_bound(result, opts, sweep_step)
    return result


def certify_bound(result: BoundResult, opts: SolveOptions = SolveOptions(), sweep_step: float = 0.05) -> BoundResult:
    """Attach boundary reports and a coarse beta sweep; mark whether the interior point dominates."""
    c = result.c_star
    spec = build_distribution(result.model, c, result.M)
    full = result.reports["full"]
    no2, no3 = boundary_report(spec, result.scheme, c, opts)
    result.reports["no-type2"] = no2
    result.reports["no-type3"] = no3
    sweep = beta_sweep(spec, result.scheme, c, sweep_step, opts=opts, reference=full)
    grid_max = sweep.max_lnF
    checks = {
        "boundary_no_type2": no2.lnF < full.lnF,
        "boundary_no_type3": no3.lnF < full.lnF,
        "sweep_dominated": grid_max <= full.lnF + 1e-3,
    }
    result.certification = {**checks, "sweep_max_lnF": grid_max, "sweep_step": sweep_step}
    result.certified = all(checks.values())
    return result


# ---------------------------------------------------------------------------
# boundary cases

def boundary_report(spec: DistributionSpec, scheme: Scheme, c: float,
                    opts: SolveOptions = SolveOptions(), init_no_type3: Optional[Multipliers] = None):
    """Stationary points with no type-2 clauses and with no type-3 clauses."""
    no2 = _solve_boundary(spec, scheme, c, Restriction.NO_TYPE2, opts, opts.init)
    no3 = _solve_boundary(spec, scheme, c, Restriction.NO_TYPE3, opts,
                          init_no_type3 or Multipliers(0.5, 0.5, 0.5, 0.5))
    return no2, no3


def _solve_boundary(spec, scheme, c, mode, opts, init):
    starts = [init, Multipliers(1.0, 1.0, 1.0, 1.0), Multipliers(0.5, 0.5, 0.5, 0.5), DEFAULT_INIT]
    last = None
    for start in starts:
        try:
            return solve_stationary(spec, scheme, c, mode, replace(opts, init=start))
        except (NoConvergence, SingularJacobian) as exc:
            last = exc
    raise last


def check_boundary_dominance(full: StationaryReport, no2: StationaryReport, no3: StationaryReport) -> bool:
    return no2.lnF < full.lnF and no3.lnF < full.lnF


# ---------------------------------------------------------------------------
# sweeps

def _workers() -> int:
    env = os.environ.get("SATBOUND_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _alpha_cell(args):
    model, a, M, opts, c_bracket, c_tol = args
    return a, threshold_bound(model, Scheme.alpha(a, 1.0), M, opts, c_bracket, c_tol).c_star


def alpha_sweep(model: ModelId | str, alphas: Sequence[float], M: int = 21, opts: SolveOptions = SolveOptions(),
                c_bracket: tuple[float, float] = (3.0, 6.0), c_tol: float = 5e-4,
                workers: Optional[int] = None) -> list[tuple[float, float]]:
    """``(alpha, bound)`` for the scheme ``alpha * rho(j, l) + rho(k, m)``, sorted by alpha.

    With one worker each run is warm-started from the previous stationary
    point; with several, the runs are independent and start from ``opts.init``.
    """
    alphas = sorted(float(a) for a in alphas)
    for a in alphas:
        if not a > 0:
            raise ValueError(f"alpha must be positive, got {a}")
    workers = workers or _workers()
    if workers > 1 and len(alphas) > 1:
        tasks = [(model, a, M, opts, c_bracket, c_tol) for a in alphas]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_alpha_cell, tasks))
    out = []
    init = opts.init
    for a in alphas:
        res = threshold_bound(model, Scheme.alpha(a, 1.0), M, replace(opts, init=init), c_bracket, c_tol)
        init = res.reports["full"].mult
        out.append((a, res.c_star))
    return out


@dataclass
class BetaSweep:
    step: float
    cells: list  # (beta1, beta2, lnF or None)
    reference: Optional[StationaryReport] = None

    @property
    def solved(self):
        return [cell for cell in self.cells if cell[2] is not None]

    @property
    def argmax(self) -> tuple[float, float]:
        b1, b2, _ = max(self.solved, key=lambda cell: cell[2])
        return b1, b2

    @property
    def max_lnF(self) -> float:
        return max(cell[2] for cell in self.solved)

    @property
    def missing(self) -> int:
        return sum(1 for cell in self.cells if cell[2] is None)


def literal_band(spec: DistributionSpec) -> tuple[float, float]:
    """Range of ``2 beta1 + beta2`` allowed by the count of true literal occurrences.

    A light variable supplies ``p`` or ``q`` true occurrences depending on its
    value, heavy occurrences are all true, and clause types fix the true count
    at ``c (3 - 2 beta1 - beta2)``.
    """
    low = math.fsum(min(p, q) * d for (p, q), d in spec.light.items()) + spec.bigH
    high = math.fsum(max(p, q) * d for (p, q), d in spec.light.items()) + spec.bigH
    return 3.0 - high / spec.c, 3.0 - low / spec.c


def beta_grid(spec: DistributionSpec, step: float, beta1_range: Optional[tuple[float, float]] = None):
    """Grid rows ``[(beta1, [beta2, ...]), ...]`` over the open triangle, cut to the literal band.

    When the band is a single line (signs and occurrences both balanced) each
    row holds the one point of the line.
    """
    n = int(round(1.0 / step))
    lo1, hi1 = beta1_range if beta1_range else (0.0, 1.0)
    s_lo, s_hi = literal_band(spec)
    line = s_hi - s_lo < 1e-9
    rows = []
    for a in range(1, n):
        b1 = round(a * step, 12)
        if not lo1 <= b1 <= hi1:
            continue
        if line:
            cols = [round(s_lo - 2 * b1, 12)]
        else:
            cols = [round(b * step, 12) for b in range(1, n - a)]
            cols = [b2 for b2 in cols if s_lo - 1e-9 <= 2 * b1 + b2 <= s_hi + 1e-9]
        cols = [b2 for b2 in cols if 0 < b2 and b1 + b2 < 1]
        if cols:
            rows.append((b1, cols))
    return rows


@dataclass(frozen=True)
class _Cell:
    lnF: float
    mult: Multipliers


def _try_cell(spec, scheme, c, b1, b2, starts, opts):
    mode = BetaFixed(b1, b2)
    for init in dict.fromkeys(starts):
        try:
            u, _, _, value = _newton(spec, scheme, c, mode, init.log(), opts)
        except (NoConvergence, SingularJacobian):
            continue
        # at the dual minimiser the dual value is the largest rate on the fibre
        return _Cell(float(value), Multipliers.from_log(u))
    return None


def _scan_row(spec, scheme, c, b1, cols, start, init, fallback, opts):
    """Solve one grid row.

    The feasible part of a row is an interval (the feasible beta set is convex),
    so the scan finds one solvable cell nearest ``start`` and walks outwards
    until two consecutive cells fail.  Cells never reached stay missing.
    """
    found = {}
    order = sorted(range(len(cols)), key=lambda i: (abs(i - start), i))
    seed_idx = None
    for i in order:
        rep = _try_cell(spec, scheme, c, b1, cols[i], (init, fallback), opts)
        if rep is not None:
            found[i] = rep
            seed_idx = i
            break
    if seed_idx is None:
        return found
    for step in (1, -1):
        current = found[seed_idx].mult
        misses = 0
        i = seed_idx + step
        while 0 <= i < len(cols) and misses < 2:
            rep = _try_cell(spec, scheme, c, b1, cols[i], (current, fallback), opts)
            if rep is None:
                misses += 1
            else:
                found[i] = rep
                current = rep.mult
                misses = 0
            i += step
    return found


def beta_sweep(spec: DistributionSpec, scheme: Scheme, c: float, grid_step: float = 0.01,
               opts: SolveOptions = SolveOptions(), reference: Optional[StationaryReport] = None,
               beta1_range: Optional[tuple[float, float]] = None) -> BetaSweep:
    """Maximum of the rate on each cell of a (beta1, beta2) grid.

    Rows are visited outwards from the interior stationary point, each row
    warm-started from its neighbour and its first column predicted from the
    drift of the previous row maxima.  Cells whose dual diverges (clause-type
    proportions no formula can realise) are recorded as missing.
    """
    if reference is None:
        reference = solve_stationary(spec, scheme, c, Restriction.FULL, opts)
    opts = replace(opts, tol_residual=max(opts.tol_residual, 1e-10), max_iter=min(opts.max_iter, 80))
    rows = beta_grid(spec, grid_step, beta1_range)
    if not rows:
        return BetaSweep(grid_step, [], reference)
    ref_b1, ref_b2 = reference.beta[0], reference.beta[1]
    centre = min(range(len(rows)), key=lambda r: abs(rows[r][0] - ref_b1))
    results = {}
    for direction in (range(centre, len(rows)), range(centre - 1, -1, -1)):
        history = []  # (beta1, beta2 at the row maximum, multipliers there)
        for r in direction:
            b1, cols = rows[r]
            if not history:
                guess, init = ref_b2, reference.mult
            else:
                guess, init = history[-1][1], history[-1][2]
                if len(history) >= 2:
                    (a1, a2, _), (c1, c2, _) = history[-2], history[-1]
                    guess = c2 + (c2 - a2) * (b1 - c1) / (c1 - a1)
            start = min(range(len(cols)), key=lambda i: abs(cols[i] - guess))
            found = _scan_row(spec, scheme, c, b1, cols, start, init, reference.mult, opts)
            for i, b2 in enumerate(cols):
                results[b1, b2] = found[i].lnF if i in found else None
            if found:
                best = max(found, key=lambda i: found[i].lnF)
                history.append((b1, cols[best], found[best].mult))
    cells = [(b1, b2, results[b1, b2]) for b1, b2 in sorted(results)]
    return BetaSweep(grid_step, cells, reference)


__all__ = [
    "SolveOptions", "BoundResult", "BetaSweep", "solve_stationary", "threshold_bound", "alpha_sweep",
    "beta_sweep", "boundary_report", "certify_bound", "gauge_shift", "gauge_invariants",
    "CertificationFailure",
]

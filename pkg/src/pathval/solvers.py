"""Self-contained deterministic optimizers.

Three shapes cover every formulation in this package: a dense two-phase
simplex for inequality-form LPs with optional box bounds, a minimizer for a
single second-order-cone constraint driven by scalar dual root-finding, and
a one-dimensional ratio-test line search over a segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InfeasibleAnchorError,
    NumericalBreakdownError,
    OutOfRangeError,
    SingularCovarianceError,
    SizeMismatchError,
)
from .numerics import PsdFactor

__all__ = [
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "LpProblem",
    "LpSolution",
    "SocProblem",
    "SocSolution",
    "solve_lp",
    "solve_single_soc",
    "line_search_fast",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-12
_COST_TOL = 1e-9
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LpProblem:
    """min c'x  s.t.  A x <= b,  lo <= x <= hi (bounds default unbounded)."""

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        a = np.asarray(self.a, dtype=float)
        if a.size == 0:
            a = a.reshape(0, c.shape[0])
        b = np.atleast_1d(np.asarray(self.b, dtype=float)) if np.size(self.b) else np.zeros(0)
        d = c.shape[0]
        if a.ndim != 2 or a.shape[1] != d:
            raise SizeMismatchError(f"A shape {a.shape} incompatible with c of length {d}")
        if b.shape != (a.shape[0],):
            raise SizeMismatchError(f"b shape {b.shape} incompatible with {a.shape[0]} rows")
        lo = np.full(d, -np.inf) if self.lo is None else np.asarray(self.lo, dtype=float)
        hi = np.full(d, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float)
        if lo.shape != (d,) or hi.shape != (d,):
            raise SizeMismatchError("bound shapes do not match the number of variables")
        if np.any(lo > hi):
            raise OutOfRangeError("lower bound exceeds upper bound for some coordinate")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    at_bound: np.ndarray | None = None
    ray: np.ndarray | None = None


def solve_lp(prob: LpProblem, max_pivots: int = 50_000) -> LpSolution:
    """Two-phase dense simplex with Bland's rule (termination guaranteed).

    Optimal solutions are vertex-optimal basic feasible points; infeasibility
    is certified by a positive phase-one optimum, unboundedness by an
    improving ray returned on the solution.
    """
    d = prob.dim
    # Shift variables with a finite lower bound to y >= 0; split free ones
    # into a positive and a negative part. col_map[j] = (plus_col, minus_col).
    shift = np.where(np.isfinite(prob.lo), prob.lo, 0.0)
    col_map: list[tuple[int, int | None]] = []
    ncols = 0
    for j in range(d):
        if np.isfinite(prob.lo[j]):
            col_map.append((ncols, None))
            ncols += 1
        else:
            col_map.append((ncols, ncols + 1))
            ncols += 2

    def expand_rows(a_rows: np.ndarray) -> np.ndarray:
        out = np.zeros((a_rows.shape[0], ncols))
        for j in range(d):
            plus, minus = col_map[j]
            out[:, plus] = a_rows[:, j]
            if minus is not None:
                out[:, minus] = -a_rows[:, j]
        return out

    rows = [expand_rows(prob.a)]
    rhs = [prob.b - prob.a @ shift]
    for j in range(d):
        if np.isfinite(prob.hi[j]):
            e = np.zeros((1, d))
            e[0, j] = 1.0
            rows.append(expand_rows(e))
            rhs.append(np.array([prob.hi[j] - shift[j]]))
    a_std = np.vstack(rows)
    b_std = np.concatenate(rhs)
    c_std = expand_rows(prob.c.reshape(1, -1)).ravel()

    tableau, basis, n_free = _phase_one(a_std, b_std)
    if tableau is None:
        return LpSolution(status=INFEASIBLE)
    n_struct = a_std.shape[1]
    status, ray_std = _phase_two(tableau, basis, c_std, n_free, max_pivots)
    if status == UNBOUNDED:
        ray = _merge_columns(ray_std, col_map, d)
        return LpSolution(status=UNBOUNDED, ray=ray)

    y = np.zeros(tableau.shape[1] - 1)
    m = tableau.shape[0] - 1
    y[basis[:m]] = tableau[:m, -1]
    x = _merge_columns(y[:n_struct], col_map, d) + shift
    objective = float(prob.c @ x)
    _check_primal(prob, x)
    at_lo = np.isfinite(prob.lo) & (np.abs(x - prob.lo) <= 1e-7 * (1.0 + np.abs(prob.lo)))
    at_hi = np.isfinite(prob.hi) & (np.abs(x - prob.hi) <= 1e-7 * (1.0 + np.abs(prob.hi)))
    return LpSolution(status=OPTIMAL, x=x, objective=objective, at_bound=at_lo | at_hi)


def _merge_columns(y: np.ndarray, col_map, d: int) -> np.ndarray:
    x = np.zeros(d)
    for j in range(d):
        plus, minus = col_map[j]
        x[j] = y[plus] - (y[minus] if minus is not None else 0.0)
    return x


def _check_primal(prob: LpProblem, x: np.ndarray) -> None:
    slack_tol = 1e-8 * (1.0 + float(np.abs(prob.b).max(initial=0.0)))
    if prob.a.shape[0] and float((prob.a @ x - prob.b).max(initial=-np.inf)) > slack_tol:
        raise NumericalBreakdownError("simplex returned a primal-infeasible point")
    if np.any(x < prob.lo - slack_tol) or np.any(x > prob.hi + slack_tol):
        raise NumericalBreakdownError("simplex returned a point outside its bounds")


def _phase_one(a: np.ndarray, b: np.ndarray):
    """Build a feasible tableau for ``A y + s = b, y >= 0``.

    Returns ``(tableau, basis, n_free)`` where columns are laid out as
    [structural | slacks | artificials] and ``n_free`` marks the end of the
    non-artificial block; ``(None, None, 0)`` when phase one certifies
    infeasibility.
    """
    m, n = a.shape
    flip = b < 0
    a = np.where(flip[:, None], -a, a)
    b = np.where(flip, -b, b)
    slack_sign = np.where(flip, -1.0, 1.0)
    art_rows = np.flatnonzero(flip)
    n_art = art_rows.size
    n_free = n + m

    tableau = np.zeros((m + 1, n_free + n_art + 1))
    tableau[:m, :n] = a
    tableau[:m, n:n_free] = np.diag(slack_sign)
    basis = np.empty(m, dtype=int)
    basis[:] = n + np.arange(m)
    for k, i in enumerate(art_rows):
        tableau[i, n_free + k] = 1.0
        basis[i] = n_free + k
    tableau[:m, -1] = b

    if n_art:
        # Phase-one objective: minimize the sum of artificials.
        tableau[m, n_free:-1] = 1.0
        for i in art_rows:
            tableau[m, :] -= tableau[i, :]
        allowed = np.ones(n_free + n_art, dtype=bool)
        _run_simplex(tableau, basis, allowed, 50_000)
        if tableau[m, -1] < -_FEAS_TOL * (1.0 + float(np.abs(b).max(initial=0.0))):
            return None, None, 0
        tableau, basis = _drive_out_artificials(tableau, basis, n_free)
    return tableau, basis, n_free


def _drive_out_artificials(tableau, basis, n_free):
    """Pivot zero-valued basic artificials onto real columns; rows whose
    artificial cannot leave are redundant and get dropped."""
    m = tableau.shape[0] - 1
    drop = []
    for i in range(m):
        if basis[i] < n_free:
            continue
        row = tableau[i, :n_free]
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > _PIVOT_TOL:
            _pivot(tableau, i, j)
            basis[i] = j
        else:
            drop.append(i)
    if not drop:
        return tableau, basis
    keep = [i for i in range(m) if i not in drop]
    tableau = tableau[keep + [m], :]
    basis = basis[keep]
    return tableau, basis


def _phase_two(tableau, basis, c_std, n_free, max_pivots):
    m = tableau.shape[0] - 1
    ncols = tableau.shape[1] - 1
    allowed = np.zeros(ncols, dtype=bool)
    allowed[:n_free] = True  # artificial columns stay blocked

    tableau[m, :] = 0.0
    tableau[m, : c_std.shape[0]] = c_std
    for i in range(m):
        cb = tableau[m, basis[i]]
        if cb != 0.0:
            tableau[m, :] -= cb * tableau[i, :]
    entering = _run_simplex(tableau, basis, allowed, max_pivots)
    if entering is None:
        return OPTIMAL, None
    ray = np.zeros(ncols)
    ray[entering] = 1.0
    for i in range(m):
        if tableau[i, entering] < -_PIVOT_TOL:
            ray[basis[i]] = -tableau[i, entering]
    return UNBOUNDED, ray[: c_std.shape[0]]


def _run_simplex(tableau, basis, allowed, max_pivots):
    """Bland-rule simplex loop. Returns the entering column on unboundedness,
    None at optimality."""
    m = tableau.shape[0] - 1
    for _ in range(max_pivots):
        costs = tableau[m, :-1]
        candidates = np.flatnonzero(allowed & (costs < -_COST_TOL))
        if candidates.size == 0:
            return None
        e = int(candidates[0])  # Bland: smallest index
        col = tableau[:m, e]
        positive = col > _PIVOT_TOL
        if not positive.any():
            return e
        ratios = np.full(m, np.inf)
        ratios[positive] = tableau[:m, -1][positive] / col[positive]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + 1e-15 * (1.0 + abs(best)))
        leave = int(tied[np.argmin(basis[tied])])  # Bland: smallest basic index
        if abs(tableau[leave, e]) < _PIVOT_TOL:
            raise NumericalBreakdownError("pivot magnitude below tolerance")
        _pivot(tableau, leave, e)
        basis[leave] = e
    raise NumericalBreakdownError("simplex failed to terminate within the pivot budget")


def _pivot(tableau, row, col):
    piv = tableau[row, col]
    tableau[row, :] /= piv
    factor = tableau[:, col].copy()
    factor[row] = 0.0
    tableau -= np.outer(factor, tableau[row, :])


@dataclass(frozen=True)
class SocProblem:
    """min c'x  s.t.  mu'x + kappa * ||L'x||_2 <= b, with Sigma = L L'."""

    c: np.ndarray
    mu: np.ndarray
    kappa: float
    factor: PsdFactor
    b: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "mu", mu)
        d = self.factor.dim
        if c.shape != (d,) or mu.shape != (d,):
            raise SizeMismatchError("c / mu shapes do not match the covariance dimension")
        if not np.any(c):
            raise OutOfRangeError("objective vector c must be nonzero")
        if not self.b > 0:
            raise OutOfRangeError(f"right-hand side b must be positive, got {self.b}")
        if self.kappa < 0:
            raise OutOfRangeError(f"kappa must be nonnegative, got {self.kappa}")


@dataclass(frozen=True)
class SocSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    dual: float = math.nan
    ray: np.ndarray | None = None
    constraint_residual: float = math.nan
    stationarity_residual: float = math.nan
    cov_residual: float = 0.0


def solve_single_soc(prob: SocProblem) -> SocSolution:
    """Minimize a linear objective over one second-order-cone constraint.

    With Sigma positive definite the dual reduces to the scalar convex
    equation psi(lambda) = ||c + lambda*mu||_{Sigma^-1} - lambda*kappa on
    lambda >= 0: the optimum equals -lambda1 * b at the smallest root
    lambda1, located by golden-section (for psi's minimizer) plus bisection.
    Of the at-most-two roots, only the one with a positive implied scale
    r = b / (mu'w + kappa) is geometrically valid. When psi stays positive
    there is no dual point and the problem is unbounded; the returned ray
    u = -Sigma^+ (c + lambda*mu) at psi's minimizer satisfies c'u < 0 and
    mu'u + kappa*||L'u|| <= 0.
    """
    c, mu, kappa, b, factor = prob.c, prob.mu, prob.kappa, prob.b, prob.factor
    cov_residual = 0.0
    if factor.rank < factor.dim:
        cov_residual = max(factor.pinv_residual(c), factor.pinv_residual(mu))
        if cov_residual > 1e-8:
            raise SingularCovarianceError(
                "covariance is rank-deficient along the objective or mean direction "
                f"(relative residual {cov_residual:.3e})"
            )
    sc = factor.pinv_apply(c)
    sm = factor.pinv_apply(mu)
    a0 = float(c @ sc)
    a1 = float(mu @ sc)
    a2 = float(mu @ sm)
    if a0 <= 0.0:
        raise NumericalBreakdownError("objective has no component inside the covariance range")

    def q(lam: float) -> float:
        return max(a0 + 2.0 * a1 * lam + a2 * lam * lam, 0.0)

    def psi(lam: float) -> float:
        return math.sqrt(q(lam)) - lam * kappa

    def dpsi(lam: float) -> float:
        qq = q(lam)
        if qq <= 0.0:
            return math.inf
        return (a1 + a2 * lam) / math.sqrt(qq) - kappa

    lam_star = _psi_minimizer(psi, dpsi)
    if psi(lam_star) > 0.0:
        ray = -(sc + lam_star * sm)
        _check_certificate(prob, ray)
        return SocSolution(status=UNBOUNDED, ray=ray, cov_residual=cov_residual)

    lam1 = _left_root(psi, lam_star)
    w = -(sc + lam1 * sm) / (lam1 * kappa)
    denom = float(mu @ w) + kappa
    if denom <= 1e-10 * (1.0 + float(np.linalg.norm(mu)) + kappa):
        raise NumericalBreakdownError(
            "dual root is (near-)tangent; the constraint infimum is not attained"
        )
    r = b / denom
    x = r * w
    spread = float(np.linalg.norm(factor.lower.T @ x))
    constraint_residual = abs(float(mu @ x) + kappa * spread - b)
    if spread > 0.0:
        grad = c + lam1 * (mu + kappa * (factor.matrix @ x) / spread)
        stationarity_residual = float(np.linalg.norm(grad))
    else:  # pragma: no cover - r > 0 keeps the spread positive
        stationarity_residual = math.inf
    objective = float(c @ x)
    gap = abs(objective + lam1 * b)
    if gap > 1e-7 * (1.0 + abs(objective)):
        raise NumericalBreakdownError(f"duality gap {gap:.3e} exceeds tolerance")
    return SocSolution(
        status=OPTIMAL,
        x=x,
        objective=objective,
        dual=lam1,
        constraint_residual=constraint_residual,
        stationarity_residual=stationarity_residual,
        cov_residual=cov_residual,
    )


def _psi_minimizer(psi, dpsi, cap: float = 1e30) -> float:
    """Minimizer of the convex dual function on [0, cap].

    Golden-section narrows the bracket, then a bisection on the (monotone)
    derivative sign polishes the position: value-only search stalls at
    sqrt(eps) accuracy near a flat minimum, which is too coarse for the
    unbounded-certificate residuals downstream.
    """
    if dpsi(0.0) >= 0.0:
        return 0.0
    hi = 1.0
    while dpsi(hi) < 0.0:
        hi *= 2.0
        if hi > cap:
            return cap
    full = (0.0, hi)
    lo = 0.0
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = psi(x1), psi(x2)
    for _ in range(60):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = psi(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = psi(x2)
    if dpsi(lo) >= 0.0 or dpsi(hi) < 0.0:
        lo, hi = full  # value comparisons stalled; rebisect the sign change
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if dpsi(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _left_root(psi, lam_star: float) -> float:
    """Bisect for the smallest root on [0, lam_star]; psi(0) > 0 >= psi(lam_star)."""
    lo, hi = 0.0, lam_star
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if psi(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def _check_certificate(prob: SocProblem, ray: np.ndarray) -> None:
    descent = float(prob.c @ ray)
    recession = float(prob.mu @ ray) + prob.kappa * float(
        np.linalg.norm(prob.factor.lower.T @ ray)
    )
    scale = 1.0 + float(np.linalg.norm(ray))
    if descent >= 0.0 or recession > 1e-8 * scale:
        raise NumericalBreakdownError("unbounded certificate failed verification")


def line_search_fast(
    c: np.ndarray,
    x_o: np.ndarray,
    x_hat: np.ndarray,
    constraints: np.ndarray,
    b: float,
) -> tuple[float, np.ndarray]:
    """Largest objective-improving step from ``x_o`` toward ``x_hat`` that
    keeps every sampled constraint ``xi'x <= b`` satisfied.

    Returns ``(s, x)`` with ``x = x_o + s * (x_hat - x_o)`` and ``s`` in
    [0, 1]; ``s = 0`` when the segment does not improve the objective.
    """
    c = np.asarray(c, dtype=float)
    x_o = np.asarray(x_o, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    rows = np.asarray(constraints, dtype=float)
    if rows.size == 0:
        rows = rows.reshape(0, x_o.shape[0])
    anchor_vals = rows @ x_o
    slack_tol = 1e-10 * (1.0 + abs(b))
    if anchor_vals.size and float(anchor_vals.max()) > b + slack_tol:
        worst = int(np.argmax(anchor_vals))
        raise InfeasibleAnchorError(
            f"anchor violates constraint {worst}: {anchor_vals[worst]:.6g} > {b:.6g}"
        )
    direction = x_hat - x_o
    if float(c @ direction) >= 0.0:
        return 0.0, x_o.copy()
    gains = rows @ direction
    blocking = gains > 0.0
    s = 1.0
    if blocking.any():
        s = min(1.0, float(((b - anchor_vals[blocking]) / gains[blocking]).min()))
    return s, x_o + s * direction

"""Parameter grids and solution paths for the data-driven reformulations.

Each reformulation family maps a scalar conservativeness parameter ``s`` to
an optimization problem over the construction-phase data; sweeping ``s``
over a grid yields the ordered candidate path handed to the validators.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    EmptyInputError,
    OutOfRangeError,
    ParseError,
    SingularCovarianceError,
)
from .instances import GaussianLinearCcp
from .numerics import (
    PsdFactor,
    ceil_level_index,
    chi_square_quantile,
    cholesky_psd,
    empirical_quantile,
    mean_and_cov,
)
from .solvers import (
    OPTIMAL,
    LpProblem,
    SocProblem,
    solve_lp,
    solve_single_soc,
)

__all__ = [
    "EXCLUDED",
    "METHODS",
    "GridSpec",
    "Candidate",
    "SolutionPath",
    "ro_grid_from_distances",
    "dro_cone_width",
    "build_grid",
    "build_path",
    "solve_ro_point",
    "solve_dro_point",
    "solve_so_point",
    "fast_segment_points",
    "solve_sca_benchmark",
    "kl_worst_case_mean",
    "write_path_csv",
    "read_path_csv",
]

EXCLUDED = "excluded"
METHODS = ("ro", "dro", "so", "fast")

DEFAULT_BOX_BOUND = 1e3
_DEFAULT_GRID_SIZE = {"ro": 50, "dro": 50, "fast": 11}


@dataclass(frozen=True)
class GridSpec:
    """Grid rule for one method.

    ``ro``: s_j = (anchor + pad) * j / p where the anchor is the
    ceil((1-alpha) n1)-th order statistic of the construction data's
    Mahalanobis distances. ``dro``: s_j = inflation * chi2(d, 1-beta) * j/p.
    ``so``: s = 1..n1. ``fast``: p equispaced points on [0, 1].
    """

    method: str
    size: int | None = None
    pad: float = 20.0
    inflation: float = 1.5

    def __post_init__(self):
        if self.method not in METHODS:
            raise OutOfRangeError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.size is not None and self.size < 1:
            raise OutOfRangeError(f"grid size must be >= 1, got {self.size}")

    def resolved_size(self, n1: int) -> int:
        if self.method == "so":
            return n1 if self.size is None else min(self.size, n1)
        return self.size if self.size is not None else _DEFAULT_GRID_SIZE[self.method]


@dataclass(frozen=True)
class Candidate:
    """One path point: the parameter value, its solution, and solve status."""

    s: float
    x: np.ndarray | None
    status: str
    objective: float = math.nan
    at_bound: bool = False
    reason: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class SolutionPath:
    """Ordered candidates for one method, plus the construction-phase
    statistics the grid was anchored on."""

    method: str
    candidates: tuple[Candidate, ...]
    mu_hat: np.ndarray | None = None
    s_anchor: float = math.nan
    sigma_factor: PsdFactor | None = field(default=None, repr=False)

    def __post_init__(self):
        svals = [cand.s for cand in self.candidates]
        if any(b <= a for a, b in zip(svals, svals[1:])):
            raise OutOfRangeError("candidate parameter values must be strictly increasing")

    @property
    def grid(self) -> np.ndarray:
        return np.array([cand.s for cand in self.candidates])

    def optimal_indices(self) -> list[int]:
        return [j for j, cand in enumerate(self.candidates) if cand.is_optimal]

    def solutions(self) -> np.ndarray:
        """Stack of optimal-candidate solutions, in path order."""
        xs = [cand.x for cand in self.candidates if cand.is_optimal]
        if not xs:
            raise EmptyInputError("path has no optimal candidate")
        return np.vstack(xs)


def ro_grid_from_distances(distances, alpha: float, size: int, pad: float) -> np.ndarray:
    """RO grid rule: anchor at the ceil((1-alpha) n)-th smallest squared
    distance, stretch by ``pad``, and discretize into ``size`` equal steps."""
    distances = np.asarray(distances, dtype=float)
    anchor = empirical_quantile(distances, ceil_level_index(1.0 - alpha, distances.size))
    return (anchor + pad) * np.arange(1, size + 1) / size


def build_grid(spec: GridSpec, phase1: np.ndarray | None, alpha: float, beta: float) -> np.ndarray:
    """Parameter values for one method, derived from the construction data.

    The RO anchor needs the sample covariance to be invertible after
    repair; a rank-deficient one raises :class:`SingularCovarianceError`.
    """
    if spec.method == "fast":
        p = spec.resolved_size(0)
        if p == 1:
            return np.array([0.0])
        return np.linspace(0.0, 1.0, p)
    phase1 = np.asarray(phase1, dtype=float) if phase1 is not None else None
    if phase1 is None or phase1.size == 0:
        raise EmptyInputError("construction-phase data is required for this grid")
    n1, d = phase1.shape
    if spec.method == "so":
        return np.arange(1, spec.resolved_size(n1) + 1, dtype=float)
    p = spec.resolved_size(n1)
    if spec.method == "ro":
        mu_hat, sigma_hat = mean_and_cov(phase1)
        factor = cholesky_psd(sigma_hat, policy="force")
        if factor.rank < d:
            raise SingularCovarianceError(
                f"sample covariance rank {factor.rank} < {d}; the Mahalanobis anchor is undefined"
            )
        centered = phase1 - mu_hat
        solved = factor.pinv_apply(centered.T)
        distances = np.einsum("ij,ji->i", centered, solved)
        return ro_grid_from_distances(distances, alpha, p, spec.pad)
    # dro
    anchor = chi_square_quantile(d, 1.0 - beta)
    return spec.inflation * anchor * np.arange(1, p + 1) / p


def _candidate_from_soc(s: float, problem: SocProblem) -> Candidate:
    try:
        sol = solve_single_soc(problem)
    except (SingularCovarianceError, ArithmeticError) as exc:
        return Candidate(s=s, x=None, status=EXCLUDED, reason=str(exc))
    if sol.status != OPTIMAL:
        return Candidate(s=s, x=None, status=EXCLUDED, reason=sol.status)
    return Candidate(s=s, x=sol.x, status=OPTIMAL, objective=sol.objective)


def solve_ro_point(
    mu_hat: np.ndarray, factor: PsdFactor, s: float, c: np.ndarray, b: float
) -> Candidate:
    """Ellipsoidal-set robust counterpart at squared radius ``s``:
    one cone constraint with kappa = sqrt(s)."""
    if s <= 0:
        raise OutOfRangeError(f"RO radius parameter must be positive, got {s}")
    problem = SocProblem(c=c, mu=mu_hat, kappa=math.sqrt(s), factor=factor, b=b)
    return _candidate_from_soc(s, problem)


def dro_cone_width(s: float, n1: int, alpha: float) -> float:
    """kappa(s) for the separable mean/covariance uncertainty set: a mean
    ellipsoid of squared radius s/n1 plus a covariance cap (1 + s/sqrt(n1))
    folded through the worst-case-probability coefficient sqrt((1-a)/a)."""
    return math.sqrt(s / n1) + math.sqrt((1.0 - alpha) / alpha) * math.sqrt(
        1.0 + s / math.sqrt(n1)
    )


def solve_dro_point(
    mu_hat: np.ndarray,
    factor: PsdFactor,
    s: float,
    n1: int,
    alpha: float,
    c: np.ndarray,
    b: float,
) -> Candidate:
    """Moment-uncertainty robust counterpart at set size ``s``; collapses to
    a single cone constraint with width ``dro_cone_width(s, n1, alpha)``."""
    if s < 0:
        raise OutOfRangeError(f"DRO set size must be nonnegative, got {s}")
    kappa = dro_cone_width(s, n1, alpha)
    problem = SocProblem(c=c, mu=mu_hat, kappa=kappa, factor=factor, b=b)
    return _candidate_from_soc(s, problem)


def solve_so_point(
    phase1: np.ndarray,
    s: int,
    c: np.ndarray,
    b: float,
    box: float = DEFAULT_BOX_BOUND,
) -> Candidate:
    """Sampled-constraint program using the first ``s`` construction rows,
    inside the default box (solutions touching it are flagged)."""
    phase1 = np.asarray(phase1, dtype=float)
    n1 = phase1.shape[0]
    if not 1 <= s <= n1:
        raise OutOfRangeError(f"scenario count {s} outside 1..{n1}")
    d = phase1.shape[1]
    problem = LpProblem(
        c=c,
        a=phase1[:s],
        b=np.full(s, b),
        lo=np.full(d, -box),
        hi=np.full(d, box),
    )
    sol = solve_lp(problem)
    if sol.status != OPTIMAL:
        return Candidate(s=float(s), x=None, status=EXCLUDED, reason=sol.status)
    return Candidate(
        s=float(s),
        x=sol.x,
        status=OPTIMAL,
        objective=sol.objective,
        at_bound=bool(sol.at_bound.any()),
    )


def fast_segment_points(
    x_o: np.ndarray, x_hat: np.ndarray, grid: np.ndarray, c: np.ndarray
) -> SolutionPath:
    """Path of convex combinations (1-s) x_o + s x_hat over ``grid`` in [0, 1]."""
    x_o = np.asarray(x_o, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0.0) or np.any(grid > 1.0):
        raise OutOfRangeError("segment grid must lie within [0, 1]")
    c = np.asarray(c, dtype=float)
    candidates = []
    for s in grid:
        x = (1.0 - s) * x_o + s * x_hat
        candidates.append(Candidate(s=float(s), x=x, status=OPTIMAL, objective=float(c @ x)))
    return SolutionPath(method="fast", candidates=tuple(candidates))


def solve_sca_benchmark(inst: GaussianLinearCcp) -> Candidate:
    """Deterministic safe approximation granted the true moments:
    cone width sqrt(2 ln(1/alpha))."""
    kappa = math.sqrt(2.0 * math.log(1.0 / inst.alpha))
    problem = SocProblem(c=inst.c, mu=inst.mu, kappa=kappa, factor=inst.factor, b=inst.b)
    return _candidate_from_soc(kappa**2, problem)


def build_path(
    method: str,
    phase1: np.ndarray,
    c: np.ndarray,
    b: float,
    alpha: float,
    beta: float,
    spec: GridSpec | None = None,
    box: float = DEFAULT_BOX_BOUND,
) -> SolutionPath:
    """Construct the full candidate path for one method from the
    construction-phase rows."""
    if spec is None:
        spec = GridSpec(method=method)
    elif spec.method != method:
        spec = replace(spec, method=method)
    phase1 = np.asarray(phase1, dtype=float)
    grid = build_grid(spec, phase1, alpha, beta)
    n1 = phase1.shape[0]
    if method in ("ro", "dro"):
        mu_hat, sigma_hat = mean_and_cov(phase1)
        factor = cholesky_psd(sigma_hat, policy="force")
        if method == "ro":
            cands = [solve_ro_point(mu_hat, factor, s, c, b) for s in grid]
        else:
            cands = [solve_dro_point(mu_hat, factor, s, n1, alpha, c, b) for s in grid]
        return SolutionPath(
            method=method,
            candidates=tuple(cands),
            mu_hat=mu_hat,
            s_anchor=float(grid[-1]),
            sigma_factor=factor,
        )
    if method == "so":
        cands = [solve_so_point(phase1, int(s), c, b, box=box) for s in grid]
        return SolutionPath(method="so", candidates=tuple(cands))
    if method == "fast":
        full = solve_so_point(phase1, n1, c, b, box=box)
        if not full.is_optimal:
            raise EmptyInputError(f"segment endpoint solve failed: {full.reason}")
        x_o = np.zeros(phase1.shape[1])
        return fast_segment_points(x_o, full.x, grid, c)
    raise OutOfRangeError(f"unknown method {method!r}")


def kl_worst_case_mean(p_hat: float, s: float) -> float:
    """Smallest q <= p_hat whose binary relative entropy to p_hat is <= s.

    Diagnostic for divergence-ball robustness of an estimated satisfaction
    probability; uses the 0*ln(0) = 0 convention at the boundary.
    """
    if not 0.0 <= p_hat <= 1.0:
        raise OutOfRangeError(f"p_hat must lie in [0, 1], got {p_hat}")
    if s < 0.0:
        raise OutOfRangeError(f"radius must be nonnegative, got {s}")
    if s == 0.0 or p_hat == 0.0:
        return p_hat
    if p_hat == 1.0:
        return 1.0  # any q < 1 has infinite divergence to a point mass

    def divergence(q: float) -> float:
        t1 = 0.0 if q == 0.0 else q * math.log(q / p_hat)
        t2 = 0.0 if q == 1.0 else (1.0 - q) * math.log((1.0 - q) / (1.0 - p_hat))
        return t1 + t2

    if divergence(0.0) <= s:
        return 0.0
    lo, hi = 0.0, p_hat  # divergence decreases in q on [0, p_hat]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if divergence(mid) <= s:
            hi = mid
        else:
            lo = mid
    return hi


def write_path_csv(path: SolutionPath, file) -> None:
    """Persist candidates as rows ``s,status,objective,x_1..x_d``."""
    xs = [cand.x for cand in path.candidates if cand.x is not None]
    if not xs:
        raise EmptyInputError("cannot export a path with no solved candidate")
    d = xs[0].shape[0]
    file = Path(file)
    with file.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["s", "status", "objective"] + [f"x_{j + 1}" for j in range(d)])
        for cand in path.candidates:
            coords = ["" for _ in range(d)] if cand.x is None else [repr(float(v)) for v in cand.x]
            obj = "" if math.isnan(cand.objective) else repr(float(cand.objective))
            writer.writerow([repr(float(cand.s)), cand.status, obj] + coords)


def read_path_csv(file, method: str = "ro") -> SolutionPath:
    """Load an externally produced candidate path (inverse of
    :func:`write_path_csv`)."""
    file = Path(file)
    with file.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{file}: file is empty") from None
        if header[:3] != ["s", "status", "objective"]:
            raise ParseError(f"{file}: expected header s,status,objective,x_1..; got {header[:3]}")
        d = len(header) - 3
        if d < 1:
            raise ParseError(f"{file}: no coordinate columns in header")
        candidates = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{file}: line {lineno} has {len(row)} fields, expected {len(header)}")
            try:
                s = float(row[0])
                status = row[1]
                if status == OPTIMAL:
                    objective = float(row[2])
                    x = np.array([float(v) for v in row[3:]])
                    candidates.append(
                        Candidate(s=s, x=x, status=OPTIMAL, objective=objective)
                    )
                else:
                    candidates.append(Candidate(s=s, x=None, status=EXCLUDED, reason=status))
            except ValueError as exc:
                raise ParseError(f"{file}: line {lineno}: {exc}") from exc
    if not candidates:
        raise EmptyInputError(f"{file}: no candidate rows")
    return SolutionPath(method=method, candidates=tuple(candidates))

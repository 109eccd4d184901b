"""Second-phase statistical selection over a solution path.

Candidates are scored by the sample mean of the constraint indicator on
held-out data, then the least conservative candidate clearing a margin is
selected. Margins come in four flavors: simultaneous Gaussian-supremum
critical values (unnormalized or variance-normalized), a pointwise
univariate Gaussian critical value, and a zero-margin plain average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AllDegenerateError, EmptyPathError, OutOfRangeError
from .numerics import (
    RngStream,
    ceil_level_index,
    cholesky_psd,
    mean_and_cov,
    std_normal_quantile,
)
from .reformulations import SolutionPath

__all__ = [
    "UNNORM_GS",
    "NORM_GS",
    "UNIVARIATE",
    "PLAIN",
    "RULES",
    "HMatrix",
    "MarginRule",
    "CandidateCheck",
    "ValidationReport",
    "evaluate_h_matrix",
    "gaussian_sup_quantile",
    "select_candidate",
]

UNNORM_GS = "unnorm_gs"
NORM_GS = "norm_gs"
UNIVARIATE = "univariate"
PLAIN = "plain"
RULES = (UNNORM_GS, NORM_GS, UNIVARIATE, PLAIN)

_GS_RULES = (UNNORM_GS, NORM_GS)
_MIN_GS_BUDGET = 10_000
_MC_CHUNK = 131_072  # rows per Monte Carlo block; keeps peak memory flat


@dataclass(frozen=True)
class HMatrix:
    """Constraint-indicator values h(x_j, xi_i) for the usable candidates.

    ``values[j, i]`` is 1 when held-out row i satisfies candidate j's
    constraint; ``candidate_indices[j]`` maps row j back to its position in
    the originating path (excluded candidates produce no row).
    """

    values: np.ndarray
    candidate_indices: tuple[int, ...]

    @property
    def n_candidates(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MarginRule:
    """Margin recipe: which critical value to use and how to compute it.

    ``budget`` and ``rng`` only matter for the Gaussian-supremum rules,
    where the critical value is a Monte Carlo quantile.
    """

    rule: str
    beta: float
    budget: int = 200_000
    rng: RngStream | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.rule not in RULES:
            raise OutOfRangeError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if not 0.0 < self.beta < 0.5:
            raise OutOfRangeError(f"beta must lie in (0, 0.5), got {self.beta}")
        if self.rule in _GS_RULES and self.budget < _MIN_GS_BUDGET:
            raise OutOfRangeError(
                f"Monte Carlo budget {self.budget} below the minimum {_MIN_GS_BUDGET}"
            )


@dataclass(frozen=True)
class CandidateCheck:
    """Per-candidate validation outcome, in path order."""

    index: int
    s: float
    status: str
    h_mean: float = math.nan
    sigma: float = math.nan
    margin: float = math.nan
    passed: bool = False


@dataclass(frozen=True)
class ValidationReport:
    """Selection outcome: the chosen candidate (if any) and every check.

    ``selected_index`` refers to the position in the original path; it is
    None when no candidate clears its margin.
    """

    rule: str
    beta: float
    q: float | None
    selected_index: int | None
    s_star: float
    objective: float
    checks: tuple[CandidateCheck, ...]
    excluded_count: int

    @property
    def none_feasible(self) -> bool:
        return self.selected_index is None

    def passing_indices(self) -> list[int]:
        return [chk.index for chk in self.checks if chk.passed]

    def to_json_dict(self) -> dict:
        selected = None
        if self.selected_index is not None:
            selected = {
                "index": self.selected_index,
                "s": self.s_star,
                "objective": self.objective,
            }
        return {
            "rule": self.rule,
            "beta": self.beta,
            "q": self.q,
            "selected": selected,
            "candidates": [
                {
                    "s": chk.s,
                    "h_mean": None if math.isnan(chk.h_mean) else chk.h_mean,
                    "sigma": None if math.isnan(chk.sigma) else chk.sigma,
                    "margin": None if math.isnan(chk.margin) else chk.margin,
                    "pass": chk.passed,
                    "status": chk.status,
                }
                for chk in self.checks
            ],
        }


def evaluate_h_matrix(path: SolutionPath, phase2: np.ndarray, b: float) -> HMatrix:
    """Indicator values 1(xi'x_j <= b) for every optimal candidate against
    every held-out row (ties count as satisfied)."""
    phase2 = np.asarray(phase2, dtype=float)
    if phase2.ndim != 2 or phase2.shape[0] == 0:
        raise EmptyPathError("held-out data must be a nonempty 2-d array")
    indices = path.optimal_indices()
    if not indices:
        raise EmptyPathError("path has no optimal candidate to validate")
    solutions = np.vstack([path.candidates[j].x for j in indices])
    values = (solutions @ phase2.T <= b).astype(float)
    return HMatrix(values=values, candidate_indices=tuple(indices))


def gaussian_sup_quantile(
    cov: np.ndarray,
    sigmas: np.ndarray,
    beta: float,
    budget: int,
    rng: RngStream,
    normalized: bool,
) -> float:
    """(1-beta)-quantile of the max of a centered Gaussian vector.

    The statistic is ``max_j Z_j`` with Z ~ N(0, cov), or, when
    ``normalized``, ``max_j Z_j / sigma_j`` over the coordinates with
    positive variance. The empirical ceil((1-beta)*budget)-th order
    statistic is clamped from below by the exact single-coordinate value
    (z_{1-beta} * max_j sigma_j, or z_{1-beta} when normalized), which the
    maximum stochastically dominates; for a single coordinate the clamp is
    exact and no sampling happens.
    """
    cov = np.asarray(cov, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    p = sigmas.shape[0]
    if cov.shape != (p, p):
        raise OutOfRangeError(f"cov shape {cov.shape} does not match {p} sigmas")
    z = std_normal_quantile(1.0 - beta)
    if normalized:
        keep = np.flatnonzero(sigmas > 0.0)
        if keep.size == 0:
            raise AllDegenerateError("every candidate has zero sample variance")
        floor = z
    else:
        keep = np.arange(p)
        floor = z * float(sigmas.max(initial=0.0))
    if p == 1:
        return floor
    scale = sigmas[keep] if normalized else None
    factor = cholesky_psd(cov, policy="force")
    lower_t = factor.lower.T
    stats = np.empty(budget)
    done = 0
    while done < budget:
        block = min(_MC_CHUNK, budget - done)
        draws = rng.standard_normal((block, p)) @ lower_t
        draws = draws[:, keep]
        if normalized:
            draws = draws / scale
        stats[done : done + block] = draws.max(axis=1)
        done += block
    k = ceil_level_index(1.0 - beta, budget)
    q = float(np.partition(stats, k - 1)[k - 1])
    return max(q, floor)


def _margins(rule: MarginRule, hmat: HMatrix, sigmas: np.ndarray, cov: np.ndarray):
    """Margin value per usable candidate (before the 1/sqrt(n2) scaling),
    plus the critical value used (None when the rule needs none)."""
    if rule.rule == PLAIN:
        return np.zeros(hmat.n_candidates), None
    if rule.rule == UNIVARIATE:
        z = std_normal_quantile(1.0 - rule.beta)
        return z * sigmas, None
    if rule.rng is None:
        raise OutOfRangeError(f"rule {rule.rule!r} needs an RNG stream")
    if rule.rule == NORM_GS:
        if not np.any(sigmas > 0.0):
            # Degenerate sign-off: every margin is q * 0 regardless of q.
            return np.zeros(hmat.n_candidates), None
        q = gaussian_sup_quantile(cov, sigmas, rule.beta, rule.budget, rule.rng, normalized=True)
        return q * sigmas, q
    q = gaussian_sup_quantile(cov, sigmas, rule.beta, rule.budget, rule.rng, normalized=False)
    return np.full(hmat.n_candidates, q), q


def select_candidate(
    path: SolutionPath, hmat: HMatrix, gamma: float, rule: MarginRule
) -> ValidationReport:
    """Pick the best candidate whose held-out mean clears its margin.

    A candidate passes when ``h_mean >= gamma + margin / sqrt(n2)``. Among
    passers the objective is minimized; ties break toward smaller ``s``,
    then the smaller path index. No passer means a NoneFeasible report.
    """
    if not 0.0 < gamma < 1.0:
        raise OutOfRangeError(f"gamma must lie in (0, 1), got {gamma}")
    n2 = hmat.n_samples
    h_mean, cov = mean_and_cov(hmat.values.T)
    sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
    margins, q = _margins(rule, hmat, sigmas, cov)
    root_n2 = math.sqrt(n2)

    checks: list[CandidateCheck] = []
    excluded = 0
    by_index = {j: k for k, j in enumerate(hmat.candidate_indices)}
    best: tuple[float, float, int] | None = None
    for index, cand in enumerate(path.candidates):
        if index not in by_index:
            excluded += 1
            checks.append(CandidateCheck(index=index, s=cand.s, status=cand.status))
            continue
        k = by_index[index]
        margin = margins[k] / root_n2
        passed = bool(h_mean[k] >= gamma + margin)
        checks.append(
            CandidateCheck(
                index=index,
                s=cand.s,
                status=cand.status,
                h_mean=float(h_mean[k]),
                sigma=float(sigmas[k]),
                margin=float(margin),
                passed=passed,
            )
        )
        if passed:
            key = (cand.objective, cand.s, index)
            if best is None or key < best:
                best = key
    if best is None:
        return ValidationReport(
            rule=rule.rule,
            beta=rule.beta,
            q=q,
            selected_index=None,
            s_star=math.nan,
            objective=math.nan,
            checks=tuple(checks),
            excluded_count=excluded,
        )
    objective, s_star, index = best
    return ValidationReport(
        rule=rule.rule,
        beta=rule.beta,
        q=q,
        selected_index=index,
        s_star=s_star,
        objective=objective,
        checks=tuple(checks),
        excluded_count=excluded,
    )

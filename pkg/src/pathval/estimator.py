"""Scikit-learn style front end for the two-phase pipeline.

The estimator consumes a sample array of the constraint randomness, builds
the configured reformulation path on the construction split, validates on
the held-out split, and exposes the selected decision as fitted state. It
composes with the usual ecosystem tooling (``get_params`` / ``set_params``
/ ``clone``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_open_unit, check_samples, check_vector
from .errors import OutOfRangeError
from .numerics import RngStream
from .reformulations import DEFAULT_BOX_BOUND, GridSpec, build_path
from .validators import MarginRule, evaluate_h_matrix, select_candidate


class ChanceConstrainedPathSelector(BaseEstimator):
    """Select a decision for ``min c'x s.t. P(xi'x <= b) >= 1 - alpha`` from data.

    Parameters
    ----------
    c : array-like
        Objective vector; its length fixes the decision dimension.
    b : float, default 2.0
        Constraint right-hand side (must be positive).
    alpha : float, default 0.1
        Violation tolerance; the constraint must hold with prob. 1 - alpha.
    beta : float, default 0.05
        Confidence level 1 - beta for the feasibility selection.
    method : {"ro", "dro", "so", "fast"}, default "ro"
        Reformulation family that generates the candidate path.
    rule : {"unnorm_gs", "norm_gs", "univariate", "plain"}, default "univariate"
        Margin rule used to accept candidates on the held-out split.
    split : float, default 0.5
        Fraction of rows given to the held-out (validation) phase.
    grid_size : int, optional
        Number of path points (method default when None).
    grid_pad, grid_inflation : float
        Grid scaling knobs for "ro" / "dro" respectively.
    mc_budget : int, default 200_000
        Monte Carlo draws behind Gaussian-supremum critical values.
    box_bound : float, default 1e3
        Box half-width guarding the sampled-constraint programs.
    random_state : int, default 0
        Seed for the Monte Carlo critical values.

    Attributes
    ----------
    solution_ : ndarray or None
        Selected decision (None when no candidate passed validation).
    s_star_ : float
        Conservativeness parameter of the selected candidate.
    objective_ : float
        Objective value of the selected candidate.
    report_ : ValidationReport
        Full per-candidate margins and pass flags.
    path_ : SolutionPath
        The candidate path built on the construction split.
    """

    def __init__(
        self,
        c=None,
        b=2.0,
        alpha=0.1,
        beta=0.05,
        method="ro",
        rule="univariate",
        split=0.5,
        grid_size=None,
        grid_pad=20.0,
        grid_inflation=1.5,
        mc_budget=200_000,
        box_bound=DEFAULT_BOX_BOUND,
        random_state=0,
    ):
        self.c = c
        self.b = b
        self.alpha = alpha
        self.beta = beta
        self.method = method
        self.rule = rule
        self.split = split
        self.grid_size = grid_size
        self.grid_pad = grid_pad
        self.grid_inflation = grid_inflation
        self.mc_budget = mc_budget
        self.box_bound = box_bound
        self.random_state = random_state

    def fit(self, X, y=None):
        """Build the path on the construction rows and select a candidate.

        ``X`` holds i.i.d. observations of the constraint randomness, one
        per row; the first ``ceil(split * n)`` rows form the held-out
        validation block, mirroring the harness convention.
        """
        X = check_samples(X, min_rows=2)
        if self.c is None:
            raise OutOfRangeError("parameter c (objective vector) is required before fit")
        d = X.shape[1]
        c = check_vector(self.c, d, name="c")
        alpha = check_open_unit(self.alpha, "alpha", upper=0.5)
        beta = check_open_unit(self.beta, "beta", upper=0.5)
        split = check_open_unit(self.split, "split")
        n = X.shape[0]
        n2 = min(max(int(np.ceil(split * n)), 1), n - 1)
        phase2, phase1 = X[:n2], X[n2:]

        spec = GridSpec(
            method=self.method,
            size=self.grid_size,
            pad=self.grid_pad,
            inflation=self.grid_inflation,
        )
        path = build_path(
            self.method, phase1, c, float(self.b), alpha, beta, spec=spec, box=self.box_bound
        )
        hmat = evaluate_h_matrix(path, phase2, float(self.b))
        rng = RngStream(self.random_state, index=0)
        rule = MarginRule(rule=self.rule, beta=beta, budget=self.mc_budget, rng=rng)
        report = select_candidate(path, hmat, 1.0 - alpha, rule)

        self.n_features_in_ = d
        self.path_ = path
        self.report_ = report
        if report.none_feasible:
            self.solution_ = None
            self.s_star_ = float("nan")
            self.objective_ = float("nan")
        else:
            self.solution_ = path.candidates[report.selected_index].x.copy()
            self.s_star_ = report.s_star
            self.objective_ = report.objective
        return self

    def _fitted_solution(self) -> np.ndarray:
        if not hasattr(self, "report_"):
            raise OutOfRangeError("estimator is not fitted yet; call fit first")
        if self.solution_ is None:
            raise OutOfRangeError("no candidate passed validation; nothing to predict with")
        return self.solution_

    def predict(self, X) -> np.ndarray:
        """Indicator per row of whether the selected decision satisfies
        ``xi'x <= b`` at that realization."""
        x = self._fitted_solution()
        X = check_samples(X)
        check_vector(X[0], x.shape[0], name="row")
        return (X @ x <= float(self.b)).astype(np.uint8)

    def score(self, X, y=None) -> float:
        """Empirical satisfaction probability of the selected decision."""
        return float(self.predict(X).mean())

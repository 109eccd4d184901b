"""Ground-truth Gaussian linear chance-constrained instances.

An instance is the problem ``min c'x  s.t.  P(xi'x <= b) >= 1 - alpha`` with
``xi ~ N(mu, sigma)`` known exactly, which makes the satisfaction probability
of any candidate solution computable in closed form. Synthetic data, the
two-phase split, and CSV/JSON interchange live here too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, OutOfRangeError, ParseError, RaggedRowsError, SizeMismatchError
from .numerics import PsdFactor, RngStream, cholesky_psd, sample_mvn, std_normal_cdf

__all__ = [
    "GaussianLinearCcp",
    "SampleSet",
    "DataSplit",
    "gaussian_satisfaction_probability",
    "generate_canonical_instance",
    "draw_samples",
    "split_data",
    "read_samples",
    "write_samples",
    "read_instance",
    "write_instance",
]


@dataclass(frozen=True)
class GaussianLinearCcp:
    """Linear chance-constrained problem with a Gaussian ground truth.

    Fields are the objective vector ``c``, right-hand side ``b > 0`` (so the
    origin is strictly feasible), violation tolerance ``alpha`` in (0, 0.5),
    and the true moments ``mu``, ``sigma`` of the constraint randomness.
    """

    mu: np.ndarray
    sigma: np.ndarray
    c: np.ndarray
    b: float
    alpha: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float)
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "c", c)
        d = mu.shape[0]
        if sigma.shape != (d, d):
            raise SizeMismatchError(f"sigma shape {sigma.shape} does not match dimension {d}")
        if c.shape != (d,):
            raise SizeMismatchError(f"c shape {c.shape} does not match dimension {d}")
        if not np.any(c):
            raise OutOfRangeError("objective vector c must be nonzero")
        if not self.b > 0:
            raise OutOfRangeError(f"right-hand side b must be positive, got {self.b}")
        if not 0.0 < self.alpha < 0.5:
            raise OutOfRangeError(f"alpha must lie in (0, 0.5), got {self.alpha}")

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def gamma(self) -> float:
        """Required satisfaction probability 1 - alpha."""
        return 1.0 - self.alpha

    @cached_property
    def factor(self) -> PsdFactor:
        return cholesky_psd(self.sigma, policy="strict")

    def true_satisfaction_probability(self, x: np.ndarray) -> float:
        """Exact P(xi'x <= b) under the Gaussian ground truth."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise SizeMismatchError(f"x shape {x.shape} does not match dimension {self.dim}")
        return gaussian_satisfaction_probability(self.mu, self.factor, self.b, x)

    def is_feasible(self, x: np.ndarray) -> bool:
        return self.true_satisfaction_probability(x) >= self.gamma


@dataclass(frozen=True)
class SampleSet:
    """I.i.d. draws of the constraint randomness, one per row."""

    rows: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise EmptyInputError(f"samples must be a nonempty 2-d array, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise OutOfRangeError("samples contain non-finite entries")
        object.__setattr__(self, "rows", rows)

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class DataSplit:
    """Two-phase partition: validators consume ``phase2`` (the first n2 rows),
    reformulations consume ``phase1`` (the remaining n1 rows)."""

    phase2: np.ndarray
    phase1: np.ndarray

    @property
    def n1(self) -> int:
        return self.phase1.shape[0]

    @property
    def n2(self) -> int:
        return self.phase2.shape[0]


def gaussian_satisfaction_probability(
    mu: np.ndarray, factor: PsdFactor, b: float, x: np.ndarray
) -> float:
    """P(xi'x <= b) for xi ~ N(mu, L L'), i.e. Phi((b - mu'x) / ||L'x||).

    A degenerate direction (zero variance along ``x``) makes the constraint
    deterministic: probability one when mu'x <= b, zero otherwise.
    """
    spread = float(np.linalg.norm(factor.lower.T @ np.asarray(x, dtype=float)))
    slack = float(b) - float(np.asarray(mu, dtype=float) @ x)
    if spread == 0.0:
        return 1.0 if slack >= 0.0 else 0.0
    return std_normal_cdf(slack / spread)


def generate_canonical_instance(d: int, seed: int, alpha: float = 0.1) -> GaussianLinearCcp:
    """Reproducible synthetic instance family, fully determined by (d, seed).

    mu ~ U(-0.5, 0.5)^d, sigma = A A'/d + 0.1 I with standard normal A,
    c ~ U(-1, 0)^d normalized to unit length, b = 2 (keeps the origin
    strictly feasible).
    """
    if d < 1:
        raise OutOfRangeError(f"dimension must be >= 1, got {d}")
    rng = RngStream(seed, index=0)
    mu = rng.uniform(-0.5, 0.5, d)
    a = rng.standard_normal((d, d))
    sigma = a @ a.T / d + 0.1 * np.eye(d)
    c = rng.uniform(-1.0, 0.0, d)
    c = c / np.linalg.norm(c)
    return GaussianLinearCcp(mu=mu, sigma=sigma, c=c, b=2.0, alpha=alpha)


def draw_samples(inst: GaussianLinearCcp, n: int, rng: RngStream) -> SampleSet:
    """Draw ``n`` i.i.d. observations from the instance's ground truth."""
    if n < 1:
        raise OutOfRangeError(f"sample count must be >= 1, got {n}")
    rows = sample_mvn(inst.mu, inst.factor, n, rng)
    return SampleSet(rows=rows, provenance=f"generated(seed={rng.seed}, index={rng.index})")


def split_data(samples: SampleSet, n1: int, n2: int) -> DataSplit:
    """Partition samples into the validation block (first n2 rows) and the
    construction block (remaining n1 rows)."""
    n = samples.count
    if n1 + n2 != n:
        raise SizeMismatchError(f"n1 + n2 = {n1 + n2} does not match sample count {n}")
    if n1 < 1 or n2 < 1:
        raise SizeMismatchError(f"both phases need data, got n1={n1}, n2={n2}")
    return DataSplit(phase2=samples.rows[:n2], phase1=samples.rows[n2:])


def read_samples(path) -> SampleSet:
    """Read a sample CSV: header ``x1,...,xd`` then one float row per line."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.replace("\r\n", "\n").split("\n") if ln.strip() != ""]
    if not lines:
        raise ParseError(f"{path}: file is empty")
    header = [tok.strip() for tok in lines[0].split(",")]
    arity = len(header)
    if arity == 0:
        raise ParseError(f"{path}: empty header line")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = [tok.strip() for tok in line.split(",")]
        if len(tokens) != arity:
            raise RaggedRowsError(
                f"{path}: line {lineno} has {len(tokens)} fields, header has {arity}"
            )
        try:
            rows.append([float(tok) for tok in tokens])
        except ValueError as exc:
            bad = next(i for i, tok in enumerate(tokens) if not _is_float(tok))
            raise ParseError(f"{path}: line {lineno}, column {bad + 1}: {exc}") from exc
    if not rows:
        raise EmptyInputError(f"{path}: no data rows after the header")
    return SampleSet(rows=np.asarray(rows, dtype=float), provenance=str(path))


def _is_float(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def write_samples(samples: SampleSet, path) -> None:
    path = Path(path)
    d = samples.dim
    header = ",".join(f"x{j + 1}" for j in range(d))
    body = "\n".join(",".join(repr(float(v)) for v in row) for row in samples.rows)
    path.write_text(header + "\n" + body + "\n", encoding="utf-8")


def read_instance(path) -> GaussianLinearCcp:
    """Read an instance JSON with keys d, mu, sigma (row-major), c, b, alpha."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    required = {"d", "mu", "sigma", "c", "b", "alpha"}
    missing = required - set(doc)
    if missing:
        raise ParseError(f"{path}: missing keys {sorted(missing)}")
    d = int(doc["d"])
    sigma = np.asarray(doc["sigma"], dtype=float).reshape(d, d)
    return GaussianLinearCcp(
        mu=np.asarray(doc["mu"], dtype=float),
        sigma=sigma,
        c=np.asarray(doc["c"], dtype=float),
        b=float(doc["b"]),
        alpha=float(doc["alpha"]),
    )


def write_instance(inst: GaussianLinearCcp, path) -> None:
    doc = {
        "d": inst.dim,
        "mu": inst.mu.tolist(),
        "sigma": inst.sigma.ravel().tolist(),
        "c": inst.c.tolist(),
        "b": inst.b,
        "alpha": inst.alpha,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

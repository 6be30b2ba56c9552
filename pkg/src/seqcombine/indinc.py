"""Sequential linear combinations with exact independent increments.

Given time-ordered statistics X_1..X_K with covariance matrix V, the
combinations Y_j = b_j' Vj^- X_j (underline denoting zero-padded leading
subvectors, Vj^- the padded block inverse) have the independent increments
property for any coefficient vector b, regardless of the structure of V.
Choosing b proportional to the mean of X under a target alternative maximizes
the noncentrality of the standardized combination at every look.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matrix
from .errors import DegenerateDirection, DimensionMismatch, TrivialCombination

# Combined variance at or below this is treated as a degenerate direction
# (e.g. an all-zero targeted-mean estimate at an early look).
DEGENERATE_VARIANCE = 1e-14


@dataclass(frozen=True)
class StatPath:
    """Statistics observed through the current look, with their covariance.

    ``values`` holds X_1..X_j; ``cov`` holds the (at least) j x j estimated
    covariance, entries frozen per the one-look-one-value rule.
    """

    values: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        cov = matrix.check_symmetric(self.cov)
        if cov.shape[0] < values.shape[0]:
            raise DimensionMismatch(
                f"covariance dim {cov.shape[0]} below number of looks {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise DimensionMismatch("statistic values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cov", cov)

    @property
    def looks(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DirectionVector:
    """Coefficients selecting the targeted alternative (one entry per look)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(values)):
            raise DimensionMismatch("direction entries must be finite")
        object.__setattr__(self, "values", values)

    @property
    def looks(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CombinedStat:
    """A combined statistic with its variance and standardized value."""

    y: float
    variance: float
    z: float


@dataclass(frozen=True)
class TransformResult:
    """Full-path combination: values, their variances, and coefficient rows."""

    y: np.ndarray
    variances: np.ndarray
    coeffs: np.ndarray  # row j holds a_j (zero beyond entry j)


def combine(path: StatPath, direction: DirectionVector) -> CombinedStat:
    """Combine the statistics observed so far along the given direction.

    Returns y = b' Vj^{-1} X, its variance b' Vj^{-1} b, and z = y / sqrt(var).

    Raises:
        NotPositiveDefinite: the leading block of the covariance is not PD.
        DegenerateDirection: the combined variance is numerically zero.
    """
    j = path.looks
    if direction.looks != j:
        raise DimensionMismatch(
            f"direction has {direction.looks} entries for {j} looks"
        )
    b = direction.values
    a = matrix.spd_solve(path.cov[:j, :j], b)
    y = float(a @ path.values)
    variance = float(a @ b)
    if variance <= DEGENERATE_VARIANCE:
        raise DegenerateDirection(
            f"combined variance {variance:.3e} at look {j}; direction carries no signal"
        )
    return CombinedStat(y=y, variance=variance, z=y / np.sqrt(variance))


def transform_path(v: np.ndarray, b: np.ndarray, x: np.ndarray) -> TransformResult:
    """Apply the combination at every look of a complete path.

    The output covariance, evaluated as a_j' V a_k, equals the look-j variance
    for all j <= k (independent increments), exactly up to roundoff.
    """
    v = matrix.check_symmetric(v)
    k = v.shape[0]
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if b.shape != (k,) or x.shape != (k,):
        raise DimensionMismatch("b and x must have one entry per look")
    y = np.zeros(k)
    variances = np.zeros(k)
    coeffs = np.zeros((k, k))
    for j in range(1, k + 1):
        a = matrix.spd_solve(v[:j, :j], b[:j])
        coeffs[j - 1, :j] = a
        y[j - 1] = a @ x[:j]
        variances[j - 1] = a @ b[:j]
    return TransformResult(y=y, variances=variances, coeffs=coeffs)


def check_independent_increments(v: np.ndarray, kind: str = "statistic") -> float:
    """Largest deviation from the independent-increments pattern.

    ``statistic`` compares each above-diagonal entry to the variance at the
    earlier look, ``estimator`` to the variance at the later look. Returns 0.0
    for matrices of dimension one.
    """
    v = matrix.check_symmetric(v)
    if kind not in ("statistic", "estimator"):
        raise ValueError(f"unknown kind {kind!r}")
    k = v.shape[0]
    worst = 0.0
    for j in range(k):
        for m in range(j + 1, k):
            ref = v[j, j] if kind == "statistic" else v[m, m]
            worst = max(worst, abs(v[j, m] - ref))
    return worst


def recover_b(coeffs: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Recover the direction vector from sequential combination coefficients.

    Inverts the combination map: if the rows a_j induced a path with
    independent increments and each includes the current look (a_jj != 0), the
    entries b_j = (V_j a_j)_j reproduce those coefficients through
    ``transform_path``.

    Raises:
        TrivialCombination: some row omits its own look (a_jj == 0).
    """
    v = matrix.check_symmetric(v)
    coeffs = np.asarray(coeffs, dtype=float)
    k = v.shape[0]
    if coeffs.shape != (k, k):
        raise DimensionMismatch(f"expected a {k} x {k} coefficient matrix")
    b = np.zeros(k)
    for j in range(1, k + 1):
        a = coeffs[j - 1, :j]
        if a[j - 1] == 0.0:
            raise TrivialCombination(f"coefficient a_{j}{j} is zero")
        b[j - 1] = v[j - 1, :j] @ a
    return b

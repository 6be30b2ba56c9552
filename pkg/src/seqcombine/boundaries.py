"""Two-sided group sequential stopping boundaries.

Two solvers are provided.  For statistics with independent increments the
classic density-propagation recursion applies: the continuation sub-density is
carried forward on a Simpson grid over the continuation region, and each
look's critical value is the root of a univariate crossing-probability
integral.  For arbitrary correlation structures the crossing probability is a
multivariate normal integral, evaluated by randomized quasi-Monte-Carlo
sequential conditioning (Genz-style lattice rule with random shifts); the
same conditioning pass serves every candidate critical value at a look, so
root-finding reuses the sampled paths.

Looks whose spend increment falls below solver resolution get the cap value
(no rejection possible there) and their spend carries to the next look.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import NonMonotoneInformation, NotPositiveDefinite
from .matrix import check_symmetric

BOUNDARY_CAP = 8.0
# Spend increments below this cannot be resolved against the cap's own
# crossing probability; the look is capped instead of solved.
MIN_SPEND = 1e-9

_NDTRI_EPS = 1e-15


@dataclass(frozen=True)
class SpendingPlan:
    """Cumulative error-spending schedule: fractions of a two-sided total."""

    fractions: tuple
    alpha: float = 0.05

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if not fr:
            raise ValueError("spending plan needs at least one look")
        if any(b < a for a, b in zip(fr, fr[1:])) or any(f < 0 for f in fr):
            raise ValueError("cumulative fractions must be nondecreasing and nonnegative")
        if abs(fr[-1] - 1.0) > 1e-12:
            raise ValueError("final cumulative fraction must be 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "fractions", fr)

    @property
    def looks(self) -> int:
        return len(self.fractions)

    def cumulative(self) -> np.ndarray:
        return np.asarray(self.fractions) * self.alpha


@dataclass
class BoundarySchedule:
    """Per-look two-sided critical values with achieved cumulative spend."""

    crit: list = field(default_factory=list)
    achieved: list = field(default_factory=list)  # cumulative crossing probability
    capped: list = field(default_factory=list)
    method: str = ""
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "crit": [float(c) for c in self.crit],
            "achieved_cumulative": [float(a) for a in self.achieved],
            "capped": [bool(c) for c in self.capped],
        }


def _root_decreasing(f, lo: float, hi: float, guess: float | None, xtol: float) -> float:
    """Root of a decreasing function with f(lo) > 0 > f(hi), warm-started."""
    if guess is not None and lo < guess < hi:
        a = max(lo, guess - 0.5)
        b = min(hi, guess + 0.5)
        fa = f(a)
        while fa < 0.0 and a > lo:
            b = a
            a = max(lo, a - 1.0)
            fa = f(a)
        fb = f(b)
        while fb > 0.0 and b < hi:
            a = b
            b = min(hi, b + 1.0)
            fb = f(b)
        if fa >= 0.0 >= fb:
            return float(brentq(f, a, b, xtol=xtol))
    return float(brentq(f, lo, hi, xtol=xtol))


def _simpson_weights(npts: int, h: float) -> np.ndarray:
    if npts < 3 or npts % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of points >= 3")
    w = np.ones(npts)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _norm_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


class IndincRecursion:
    """Incremental boundary solver for independent-increment statistics.

    Feed looks in order via :meth:`add_look`; earlier critical values never
    change.  The continuation sub-density lives on a Simpson grid spanning the
    current continuation region in the unstandardized scale.
    """

    def __init__(self, grid: int = 601, cap: float = BOUNDARY_CAP, root_xtol: float = 1e-9):
        self.grid = int(grid)
        self.cap = float(cap)
        self.root_xtol = float(root_xtol)
        self.crit: list[float] = []
        self.achieved: list[float] = []
        self.capped: list[bool] = []
        self._v_prev = 0.0
        self._x = None  # grid over the continuation region
        self._wh = None  # Simpson weights times sub-density

    @property
    def spent(self) -> float:
        return float(sum(self.achieved))

    def _rebuild(self, c: float, v: float, sigma: float | None) -> None:
        half = c * np.sqrt(v)
        x = np.linspace(-half, half, self.grid)
        h = (2.0 * half) / (self.grid - 1)
        w = _simpson_weights(self.grid, h)
        if sigma is None:
            dens = _norm_pdf(x / np.sqrt(v)) / np.sqrt(v)
        else:
            dens = (self._wh @ _norm_pdf((x[None, :] - self._x[:, None]) / sigma)) / sigma
        self._x = x
        self._wh = w * dens

    def add_look(self, v: float, spend_increment: float) -> float:
        """Solve, fix, and return the critical value for the next look."""
        v = float(v)
        if v <= 0.0:
            raise NonMonotoneInformation(f"variance {v} must be positive")
        if self.crit and v <= self._v_prev * (1.0 + 1e-12):
            raise NonMonotoneInformation(
                f"variance {v} does not exceed previous {self._v_prev}"
            )
        inc = float(spend_increment)
        if inc < 0:
            raise ValueError("spend increment must be nonnegative")
        if not self.crit:
            if inc < MIN_SPEND:
                c = self.cap
            else:
                c = float(min(ndtri(1.0 - inc / 2.0), self.cap))
            achieved = 2.0 * ndtr(-c)
            self._rebuild(c, v, sigma=None)
        else:
            sigma = float(np.sqrt(v - self._v_prev))
            sqrt_v = np.sqrt(v)
            x = self._x
            wh = self._wh

            def crossing(c: float) -> float:
                lo = ndtr((-c * sqrt_v - x) / sigma)
                hi = ndtr(-(c * sqrt_v - x) / sigma)
                return float(wh @ (lo + hi))

            cap_cross = crossing(self.cap)
            if inc <= max(cap_cross, MIN_SPEND):
                c = self.cap
            else:
                c = _root_decreasing(
                    lambda cc: crossing(cc) - inc, 0.0, self.cap, self.crit[-1], self.root_xtol
                )
            achieved = crossing(c)
            self._rebuild(c, v, sigma=sigma)
        self.crit.append(c)
        self.achieved.append(achieved)
        self.capped.append(c >= self.cap)
        self._v_prev = v
        return c


def indinc_boundaries(
    variances, plan: SpendingPlan, upto: int | None = None, grid: int = 601
) -> BoundarySchedule:
    """Boundaries for a strictly increasing variance sequence under a plan.

    Spend targets use achieved cumulative probability, so spend left on the
    table by a capped look carries to the next one.
    """
    variances = np.asarray(variances, dtype=float)
    upto = variances.shape[0] if upto is None else int(upto)
    if upto > plan.looks or upto > variances.shape[0]:
        raise ValueError("more looks requested than plan or variances provide")
    rec = IndincRecursion(grid=grid)
    cum = plan.cumulative()
    for j in range(upto):
        rec.add_look(variances[j], cum[j] - rec.spent)
    sched = BoundarySchedule(method="indinc")
    sched.crit = list(rec.crit)
    sched.achieved = list(np.cumsum(rec.achieved))
    sched.capped = list(rec.capped)
    return sched


# ---------------------------------------------------------------------------
# Randomized QMC multivariate normal integration (sequential conditioning).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QmcConfig:
    """Lattice configuration: shift count, points per shift, and seed."""

    shifts: int = 8
    points: int = 2**14
    seed: int = 0

    def __post_init__(self):
        if self.shifts < 2:
            raise ValueError("need at least two shifts for an error estimate")
        if self.points < 8:
            raise ValueError("too few lattice points")


_PRIMES = np.array(
    [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71],
    dtype=float,
)

_LATTICE_CACHE: dict = {}


def _lattice_base(dim: int, points: int) -> np.ndarray:
    key = (dim, points)
    base = _LATTICE_CACHE.get(key)
    if base is None:
        gen = np.sqrt(_PRIMES[:dim])
        k = np.arange(1, points + 1, dtype=float)[:, None]
        base = np.mod(k * gen[None, :], 1.0)
        _LATTICE_CACHE[key] = base
    return base


def _lattice(dim: int, points: int, rng: np.random.Generator):
    """Richtmyer lattice coordinates with a random shift, tent-periodized."""
    if dim > _PRIMES.shape[0]:
        raise ValueError(f"lattice supports at most {_PRIMES.shape[0]} dimensions")
    z = _lattice_base(dim, points) + rng.random(dim)[None, :]
    z -= np.floor(z)
    return np.abs(2.0 * z - 1.0)


def _chol_corr(corr: np.ndarray) -> np.ndarray:
    corr = check_symmetric(corr)
    if np.any(np.abs(np.diag(corr) - 1.0) > 1e-8):
        raise ValueError("correlation matrix must have unit diagonal")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("correlation matrix is not positive definite") from exc


def _conditioning_pass(ch: np.ndarray, lower: np.ndarray, upper: np.ndarray, x: np.ndarray):
    """Sequentially condition the first ``m`` variables of a rectangle.

    ``x`` holds lattice coordinates, one column per conditioned variable.
    Returns the per-path box weight for those variables and the partial
    inner products needed to condition the next variable on them.
    """
    m = x.shape[1]
    npts = x.shape[0]
    y = np.empty((npts, m))
    lo = ndtr(lower[0] / ch[0, 0])
    hi = ndtr(upper[0] / ch[0, 0])
    f = np.full(npts, hi - lo)
    lo_v = np.full(npts, lo)
    hi_v = np.full(npts, hi)
    for i in range(1, m + 1):
        arg = lo_v + x[:, i - 1] * (hi_v - lo_v)
        np.clip(arg, _NDTRI_EPS, 1.0 - _NDTRI_EPS, out=arg)
        y[:, i - 1] = ndtri(arg)
        if i == m:
            break
        s = y[:, :i] @ ch[i, :i]
        lo_v = ndtr((lower[i] - s) / ch[i, i])
        hi_v = ndtr((upper[i] - s) / ch[i, i])
        f *= hi_v - lo_v
    return f, y


def mvn_rectangle(lower, upper, corr, config: QmcConfig | None = None):
    """P(lower < Z < upper) for Z ~ N(0, corr), with an error estimate.

    Returns (probability, error); the error is three times the standard error
    over the random lattice shifts.  Infinite bounds are allowed.
    """
    config = config or QmcConfig()
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    ch = _chol_corr(corr)
    d = ch.shape[0]
    if lower.shape != (d,) or upper.shape != (d,):
        raise ValueError("bounds must match the matrix dimension")
    if np.any(lower >= upper):
        raise ValueError("need lower < upper elementwise")
    if d == 1:
        return float(ndtr(upper[0]) - ndtr(lower[0])), 1e-16
    rng = np.random.default_rng(config.seed)
    estimates = np.empty(config.shifts)
    for s_idx in range(config.shifts):
        x = _lattice(d - 1, config.points, rng)
        f, y = _conditioning_pass(ch, lower, upper, x)
        s = y @ ch[d - 1, : d - 1]
        lo_v = ndtr((lower[d - 1] - s) / ch[d - 1, d - 1])
        hi_v = ndtr((upper[d - 1] - s) / ch[d - 1, d - 1])
        estimates[s_idx] = np.mean(f * (hi_v - lo_v))
    prob = float(np.mean(estimates))
    err = 3.0 * float(np.std(estimates, ddof=1)) / np.sqrt(config.shifts)
    return prob, err


class MvnBoundarySolver:
    """Incremental boundary solver for arbitrary correlation structures.

    At look j the probability of continuing through looks 1..j-1 and exiting
    the two-sided region at look j is evaluated by conditioning on sampled
    paths for the first j-1 statistics; the exit probability of the new
    statistic is analytic per path, so every candidate critical value reuses
    the same paths (and the root is found with common random numbers).
    """

    def __init__(
        self,
        config: QmcConfig | None = None,
        cap: float = BOUNDARY_CAP,
        root_xtol: float = 1e-8,
    ):
        self.config = config or QmcConfig()
        self.cap = float(cap)
        self.root_xtol = float(root_xtol)
        self.crit: list[float] = []
        self.achieved: list[float] = []
        self.capped: list[bool] = []

    @property
    def spent(self) -> float:
        return float(sum(self.achieved))

    def add_look(self, corr: np.ndarray, spend_increment: float) -> float:
        """Solve the critical value for look j given corr of looks 1..j."""
        corr = np.atleast_2d(np.asarray(corr, dtype=float))
        j = len(self.crit) + 1
        if corr.shape != (j, j):
            raise ValueError(f"expected a {j} x {j} correlation block")
        inc = float(spend_increment)
        if j == 1:
            if inc < MIN_SPEND:
                c = self.cap
            else:
                c = float(min(ndtri(1.0 - inc / 2.0), self.cap))
            achieved = 2.0 * ndtr(-c)
            self.crit.append(c)
            self.achieved.append(achieved)
            self.capped.append(c >= self.cap)
            return c
        ch = _chol_corr(corr)
        prev = np.asarray(self.crit)
        rng = np.random.default_rng(self.config.seed)
        # One lattice per shift, stacked so the conditioning pass vectorizes
        # across every sampled path at once.
        x = np.concatenate(
            [_lattice(j - 1, self.config.points, rng) for _ in range(self.config.shifts)]
        )
        f, y = _conditioning_pass(ch, -prev, prev, x)
        s = y @ ch[j - 1, : j - 1]
        sd = ch[j - 1, j - 1]

        def crossing(c: float) -> float:
            exit_prob = ndtr((-c - s) / sd) + ndtr(-(c - s) / sd)
            return float(np.mean(f * exit_prob))

        cap_cross = crossing(self.cap)
        if inc <= max(cap_cross, MIN_SPEND):
            c = self.cap
        else:
            c = _root_decreasing(
                lambda cc: crossing(cc) - inc, 0.0, self.cap, self.crit[-1], self.root_xtol
            )
        self.crit.append(c)
        self.achieved.append(crossing(c))
        self.capped.append(c >= self.cap)
        return c


def mvn_boundaries(
    corr: np.ndarray, plan: SpendingPlan, upto: int | None = None, config: QmcConfig | None = None
) -> BoundarySchedule:
    """Boundaries for standardized statistics with the given correlation."""
    corr = check_symmetric(corr)
    upto = corr.shape[0] if upto is None else int(upto)
    if upto > plan.looks or upto > corr.shape[0]:
        raise ValueError("more looks requested than plan or correlation provide")
    solver = MvnBoundarySolver(config=config)
    cum = plan.cumulative()
    for j in range(1, upto + 1):
        solver.add_look(corr[:j, :j], cum[j - 1] - solver.spent)
    sched = BoundarySchedule(method="mvn", seed=solver.config.seed)
    sched.crit = list(solver.crit)
    sched.achieved = list(np.cumsum(solver.achieved))
    sched.capped = list(solver.capped)
    return sched


def corr_from_cov(cov: np.ndarray) -> np.ndarray:
    """Correlation matrix from a covariance matrix with positive diagonal."""
    cov = check_symmetric(cov)
    d = np.sqrt(np.diag(cov))
    if np.any(d <= 0):
        raise NotPositiveDefinite("covariance diagonal must be positive")
    corr = cov / np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    return corr

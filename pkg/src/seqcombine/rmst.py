"""Restricted-mean-survival-time differences and their sequential moments.

Each look carries a restriction time L no larger than the analysis time; the
treatment effect is the difference of the areas under the arm-specific
Kaplan-Meier curves over [0, L].  Variances and cross-look covariances are
influence-function estimates of the form
sum over arm events of A(u, L_j) A(u, L_k) / [W (W - 1)], scaled by the
potential arm size, with A the remaining area under the survival curve and
all quantities for a (j, k) entry evaluated from the data at the later look.
Targeted means for the combination directions integrate pooled survival-curve
functionals (positive-scale convention as in the Wilcoxon module).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArmMissing, DegenerateArm, LookOrder, RestrictionExceedsFollowup
from .survdata import InterimView, event_table, km_estimator, nelson_aalen


def _arm_km_table(view: InterimView, arm):
    """Event table plus survival values for one arm (or pooled)."""
    mask = view.arm_mask(arm)
    times, deaths, at_risk = event_table(view.followup[mask], view.event[mask])
    surv = np.cumprod(1.0 - deaths / at_risk) if times.size else np.empty(0)
    return times, deaths, at_risk, surv


def _area_fn(times: np.ndarray, surv: np.ndarray):
    """Return a vectorized x -> integral of the step survival curve on [0, x]."""
    starts = np.concatenate(([0.0], times))
    values = np.concatenate(([1.0], surv))
    seg = values[:-1] * np.diff(starts) if starts.size > 1 else np.empty(0)
    base = np.concatenate(([0.0], np.cumsum(seg)))

    def area(x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(starts, x, side="right") - 1
        out = base[idx] + values[idx] * (x - starts[idx])
        return out if out.ndim else float(out)

    return area


def rmst_estimate(view: InterimView, arm, restriction: float) -> float:
    """Area under the arm's Kaplan-Meier curve over [0, restriction]."""
    if restriction > view.analysis_time:
        raise RestrictionExceedsFollowup(
            f"restriction {restriction} exceeds analysis time {view.analysis_time}"
        )
    times, _, _, surv = _arm_km_table(view, arm)
    return float(_area_fn(times, surv)(restriction))


def theta_hat(view: InterimView, restriction: float) -> float:
    """Treated-minus-control difference in restricted mean survival time."""
    for z in (0, 1):
        if not np.any(view.arm == z):
            raise ArmMissing(f"arm {z} has no enrolled subjects")
    return rmst_estimate(view, 1, restriction) - rmst_estimate(view, 0, restriction)


def _if_cov_kernel(
    times: np.ndarray,
    deaths: np.ndarray,
    at_risk: np.ndarray,
    area,
    restriction_j: float,
    restriction_k: float,
    n_arm: int,
) -> float:
    keep = (times <= restriction_j) & (at_risk > 1)
    if not np.any(keep):
        return 0.0
    a_j = area(restriction_j) - area(times[keep])
    a_k = area(restriction_k) - area(times[keep])
    w = at_risk[keep].astype(float)
    return float(n_arm * np.sum(deaths[keep] * a_j * a_k / (w * (w - 1.0))))


def rmst_if_covariance(
    view: InterimView, arm, restriction_j: float, restriction_k: float, n_arm: int
) -> float:
    """Influence-function covariance of one arm's RMST at two restrictions.

    Both remaining-area factors and the at-risk counts use the data in
    ``view`` (the later of the two looks). Event terms with fewer than two
    subjects at risk are excluded: the estimator presumes W >= 2 and the
    remaining area at the data edge is negligible.
    """
    if restriction_j > restriction_k:
        raise LookOrder("restrictions must be ordered (earlier look first)")
    if restriction_k > view.analysis_time:
        raise RestrictionExceedsFollowup(
            f"restriction {restriction_k} exceeds analysis time {view.analysis_time}"
        )
    times, deaths, at_risk, surv = _arm_km_table(view, arm)
    return _if_cov_kernel(
        times, deaths, at_risk, _area_fn(times, surv), restriction_j, restriction_k, n_arm
    )


def rmst_if_variance(view: InterimView, arm, restriction: float, n_arm: int) -> float:
    """Influence-function variance of one arm's RMST estimate."""
    return rmst_if_covariance(view, arm, restriction, restriction, n_arm)


def theta_cov_entry(arm1_term: float, arm0_term: float, pi_hat: float) -> float:
    """Combine arm-wise covariance terms with inverse randomization weights."""
    if not 0.0 < pi_hat < 1.0:
        raise DegenerateArm(f"randomization fraction {pi_hat} not in (0, 1)")
    return arm1_term / pi_hat + arm0_term / (1.0 - pi_hat)


def rmst_mean_logodds(view: InterimView, restriction: float) -> float:
    """Targeted-mean entry for log-odds alternatives: integral of S(1 - S)."""
    if restriction > view.analysis_time:
        raise RestrictionExceedsFollowup(
            f"restriction {restriction} exceeds analysis time {view.analysis_time}"
        )
    km = km_estimator(view, "pooled")
    integrand = StepProduct(km.times, km.values * (1.0 - km.values), initial=0.0)
    return integrand.integral(0.0, restriction)


def rmst_mean_delayed(view: InterimView, restriction: float, t_delay: float) -> float:
    """Targeted-mean entry for delayed-effect alternatives.

    Integrates pooled survival times the cumulative-hazard excess past the
    delay, over (t_delay, restriction]. A zero delay targets proportional
    hazards.
    """
    if restriction > view.analysis_time:
        raise RestrictionExceedsFollowup(
            f"restriction {restriction} exceeds analysis time {view.analysis_time}"
        )
    if t_delay >= restriction:
        return 0.0
    km = km_estimator(view, "pooled")
    na = nelson_aalen(view)
    base = float(na(t_delay))
    # Product of two right-continuous steps sharing event-time knots.
    knots = km.times
    surv = km.values
    cumhaz = np.asarray(na(knots)) if knots.size else np.empty(0)
    integrand = StepProduct(knots, surv * np.maximum(cumhaz - base, 0.0), initial=0.0)
    return integrand.integral(t_delay, restriction)


class StepProduct:
    """Right-continuous step function used for exact mean-target integrals."""

    def __init__(self, times: np.ndarray, values: np.ndarray, initial: float):
        self.times = times
        self.values = values
        self.initial = initial

    def integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        inner = self.times[(self.times > a) & (self.times < b)]
        edges = np.concatenate(([a], inner, [b]))
        idx = np.searchsorted(self.times, edges[:-1], side="right")
        padded = np.concatenate(([self.initial], self.values))
        return float(np.sum(padded[idx] * np.diff(edges)))


@dataclass
class RmstPath:
    """Sequential RMST state with per-look freezing.

    ``n``, ``n1`` are the potential total and treated counts (known from the
    full dataset); the covariance is for sqrt(n) times the RMST difference.
    """

    n: int
    n1: int
    t_delay: float = 0.6
    times: list = field(default_factory=list)
    restrictions: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    x: list = field(default_factory=list)  # sqrt(n) * theta
    means: dict = field(default_factory=lambda: {"logodds": [], "prop": [], "delayed": []})
    _cov: list = field(default_factory=list)
    _cov_cache: np.ndarray | None = None

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def looks(self) -> int:
        return len(self.times)

    @property
    def cov(self) -> np.ndarray:
        if self._cov_cache is None:
            j = self.looks
            out = np.zeros((j, j))
            for m in range(j):
                for l in range(m + 1):
                    out[l, m] = out[m, l] = self._cov[m][l]
            self._cov_cache = out
        return self._cov_cache

    def update(self, view: InterimView, restriction: float) -> None:
        """Ingest the next look at the given restriction time."""
        if self.times and view.analysis_time <= self.times[-1]:
            raise LookOrder("analysis times must be strictly increasing")
        if self.restrictions and restriction < self.restrictions[-1]:
            raise LookOrder("restriction times must be nondecreasing")
        if self.n1 == 0 or self.n0 == 0:
            # One arm entirely absent: the difference carries no information,
            # so the look contributes zeros and is treated as no-data.
            th = 0.0
            row = [0.0] * (len(self.restrictions) + 1)
        else:
            pi = self.n1 / self.n
            tables = {}
            for arm in (0, 1):
                times, deaths, at_risk, surv = _arm_km_table(view, arm)
                tables[arm] = (times, deaths, at_risk, _area_fn(times, surv))
            th = tables[1][3](restriction) - tables[0][3](restriction)
            row = []
            for l_rest in self.restrictions + [restriction]:
                arm1 = _if_cov_kernel(*tables[1], l_rest, restriction, self.n1)
                arm0 = _if_cov_kernel(*tables[0], l_rest, restriction, self.n0)
                row.append(theta_cov_entry(arm1, arm0, pi))
        self._cov.append(row)
        self._cov_cache = None
        self.times.append(view.analysis_time)
        self.restrictions.append(restriction)
        self.theta.append(th)
        self.x.append(np.sqrt(self.n) * th)
        self.means["logodds"].append(rmst_mean_logodds(view, restriction))
        self.means["prop"].append(rmst_mean_delayed(view, restriction, 0.0))
        self.means["delayed"].append(rmst_mean_delayed(view, restriction, self.t_delay))

"""Gehan-Wilcoxon and logrank statistics with influence-function moments.

The Gehan statistic is computed in its weighted-logrank form: each observed
event contributes the at-risk fraction times the arm contrast against the
at-risk average.  Variances and cross-look covariances come from the
influence-function representation; targeted mean estimators supply the
direction entries for the independent-increments combinations (the overall
negative sign and the unknown local-alternative scale are dropped, since
two-sided standardized statistics are invariant to positive rescaling and a
global sign flip).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LookOrder
from .indinc import DirectionVector
from .survdata import InterimView, event_table


def _pooled_tables(view: InterimView):
    """Distinct event times with pooled and arm-1 death/at-risk counts."""
    u = view.followup
    times, deaths, at_risk = event_table(u, view.event)
    arm1 = view.arm == 1
    u1_sorted = np.sort(u[arm1])
    at_risk1 = u1_sorted.shape[0] - np.searchsorted(u1_sorted, times, side="left")
    # Arm-1 deaths at each distinct time.
    d1 = np.zeros_like(deaths)
    if times.size:
        e1 = u[arm1 & view.event]
        if e1.size:
            idx = np.searchsorted(times, e1)
            np.add.at(d1, idx, 1)
    return times, deaths, d1, at_risk, at_risk1


def pi_hat(view: InterimView) -> float:
    """Observed arm-1 fraction among enrolled subjects."""
    if view.n_enrolled == 0:
        return 0.0
    return float(np.mean(view.arm == 1))


def gehan_statistic(view: InterimView, n: int) -> float:
    """Gehan-Wilcoxon statistic at the view's analysis time, normalized by n^(1/2).

    Sums, over observed events, the pooled at-risk fraction times the event
    subject's arm contrast with the at-risk arm average.
    """
    times, deaths, d1, at_risk, at_risk1 = _pooled_tables(view)
    if times.size == 0:
        return 0.0
    contrast = d1 - deaths * (at_risk1 / at_risk)
    return float(np.sum(at_risk * contrast) / n**1.5)


def logrank_statistic(view: InterimView, n: int) -> float:
    """Unweighted logrank statistic (observed minus expected), n^(1/2)-normalized."""
    times, deaths, d1, at_risk, at_risk1 = _pooled_tables(view)
    if times.size == 0:
        return 0.0
    contrast = d1 - deaths * (at_risk1 / at_risk)
    return float(np.sum(contrast) / np.sqrt(n))


def if_variance(view: InterimView, n: int) -> float:
    """Influence-function variance of the Gehan statistic at this look."""
    times, deaths, _, at_risk, _ = _pooled_tables(view)
    p = pi_hat(view)
    return float(p * (1.0 - p) * np.sum(deaths * at_risk.astype(float) ** 2) / n**3)


def logrank_variance(view: InterimView, n: int) -> float:
    """Influence-function variance of the logrank statistic (events over n)."""
    p = pi_hat(view)
    return float(p * (1.0 - p) * np.sum(view.event) / n)


def if_covariance(view_s: InterimView, view_t: InterimView, n: int) -> float:
    """Influence-function covariance between the Gehan statistics at s <= t.

    Event times come from the later view; the squared at-risk weight is
    evaluated on the earlier view, whose at-risk process is frozen at its own
    analysis time.
    """
    s = view_s.analysis_time
    t = view_t.analysis_time
    if s > t:
        raise LookOrder(f"covariance requires s <= t, got s={s}, t={t}")
    times, deaths, _, _, _ = _pooled_tables(view_t)
    keep = times <= s
    if not np.any(keep):
        return 0.0
    u_s = np.sort(view_s.followup)
    w_s = u_s.shape[0] - np.searchsorted(u_s, times[keep], side="left")
    p = pi_hat(view_t)
    return float(p * (1.0 - p) * np.sum(deaths[keep] * w_s.astype(float) ** 2) / n**3)


def mean_logodds(view: InterimView, n: int) -> float:
    """Targeted-mean entry for log-odds alternatives (positive-scale convention).

    Weighs each event by the at-risk count and the pooled Kaplan-Meier
    survival just before the event time.
    """
    times, deaths, _, at_risk, _ = _pooled_tables(view)
    if times.size == 0:
        return 0.0
    surv = np.cumprod(1.0 - deaths / at_risk)
    surv_before = np.concatenate(([1.0], surv[:-1]))
    p = pi_hat(view)
    return float(p * (1.0 - p) * np.sum(deaths * at_risk * surv_before) / n**2)


def mean_delayed(view: InterimView, n: int, t_delay: float) -> float:
    """Targeted-mean entry for delayed-effect alternatives.

    Counts at-risk-weighted events strictly after the delay; a zero delay
    targets proportional hazards.
    """
    times, deaths, _, at_risk, _ = _pooled_tables(view)
    keep = times > t_delay
    if not np.any(keep):
        return 0.0
    p = pi_hat(view)
    return float(p * (1.0 - p) * np.sum(deaths[keep] * at_risk[keep]) / n**2)


def adhoc_direction(variances) -> DirectionVector:
    """Direction proportional to the per-look variances (efficient-like choice)."""
    return DirectionVector(np.asarray(variances, dtype=float))


@dataclass
class WilcoxonPath:
    """Sequential Gehan/logrank state with per-look freezing.

    Statistics, targeted means, and the diagonal of the covariance are
    computed once at their own look; the (l, m) covariance entry is computed
    at the later look m and then frozen.
    """

    n: int
    t_delay: float = 0.6
    times: list = field(default_factory=list)
    g: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    lr_var: list = field(default_factory=list)
    pi: list = field(default_factory=list)
    means: dict = field(default_factory=lambda: {"adhoc": [], "logodds": [], "prop": [], "delayed": []})
    _frozen_followup: list = field(default_factory=list)
    _cov: list = field(default_factory=list)  # flattened growing matrix rows
    _cov_cache: np.ndarray | None = None

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

    def update(self, view: InterimView) -> None:
        """Ingest the next look; earlier frozen quantities never change."""
        if self.times and view.analysis_time <= self.times[-1]:
            raise LookOrder("analysis times must be strictly increasing")
        n = self.n
        times, deaths, d1, at_risk, at_risk1 = _pooled_tables(view)
        p = pi_hat(view)
        pq = p * (1.0 - p)
        if times.size:
            contrast = d1 - deaths * (at_risk1 / at_risk)
            w2 = at_risk.astype(float) ** 2
            g = float(np.sum(at_risk * contrast) / n**1.5)
            lr = float(np.sum(contrast) / np.sqrt(n))
            var = float(pq * np.sum(deaths * w2) / n**3)
            surv = np.cumprod(1.0 - deaths / at_risk)
            surv_before = np.concatenate(([1.0], surv[:-1]))
            m_lo = float(pq * np.sum(deaths * at_risk * surv_before) / n**2)
            m_pr = float(pq * np.sum(deaths * at_risk) / n**2)
            late = times > self.t_delay
            m_de = float(pq * np.sum(deaths[late] * at_risk[late]) / n**2)
        else:
            g = lr = var = m_lo = m_pr = m_de = 0.0
        # Covariance row: entry (l, current) uses the frozen at-risk process
        # of look l and this look's events and arm fraction.
        row = []
        for l, u_l in enumerate(self._frozen_followup):
            keep = times <= self.times[l]
            if np.any(keep):
                w_l = u_l.shape[0] - np.searchsorted(u_l, times[keep], side="left")
                row.append(float(pq * np.sum(deaths[keep] * w_l.astype(float) ** 2) / n**3))
            else:
                row.append(0.0)
        row.append(var)
        self._cov.append(row)
        self._cov_cache = None
        self.times.append(view.analysis_time)
        self.g.append(g)
        self.lr.append(lr)
        self.lr_var.append(float(pq * np.sum(deaths) / n) if times.size else 0.0)
        self.pi.append(p)
        self.means["adhoc"].append(var)
        self.means["logodds"].append(m_lo)
        self.means["prop"].append(m_pr)
        self.means["delayed"].append(m_de)
        self._frozen_followup.append(np.sort(view.followup))

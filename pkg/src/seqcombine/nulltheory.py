"""Asymptotic moments under the null generative model, by quadrature.

The generative model has unit-exponential event times, uniform entry on
(0, entry_max), and randomization fraction pi.  The limiting at-risk fraction
at event time u viewed from analysis time t is
w(u, t) = exp(-u) * clip((t - u) / entry_max, 0, 1).  Everything here follows
by plugging that limit into the influence-function moment integrals; the
results back the ``covariance_source = "fixed"`` mode and serve as
independent oracles for the data-driven estimators.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad


def w_limit(u, t: float, entry_max: float = 2.0):
    """Limiting at-risk fraction at event time u for analysis time t."""
    u = np.asarray(u, dtype=float)
    frac = np.clip((t - u) / entry_max, 0.0, 1.0)
    out = np.exp(-u) * frac
    return out if out.ndim else float(out)


def _quad(fn, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    val, _ = quad(fn, a, b, limit=200)
    return float(val)


def gehan_if_cov(s: float, t: float, pi: float = 0.5, entry_max: float = 2.0) -> float:
    """Asymptotic covariance of the Gehan statistics at analysis times s <= t."""
    return pi * (1.0 - pi) * _quad(
        lambda u: w_limit(u, s, entry_max) ** 2 * w_limit(u, t, entry_max), 0.0, s
    )


def gehan_if_var(t: float, pi: float = 0.5, entry_max: float = 2.0) -> float:
    return gehan_if_cov(t, t, pi, entry_max)


def gehan_mean_logodds(t: float, pi: float = 0.5, entry_max: float = 2.0) -> float:
    """Local log-odds-alternative mean of the Gehan statistic (positive scale)."""
    return pi * (1.0 - pi) * _quad(
        lambda u: w_limit(u, t, entry_max) ** 2 * np.exp(-u), 0.0, t
    )


def gehan_mean_delayed(
    t: float, t_delay: float, pi: float = 0.5, entry_max: float = 2.0
) -> float:
    """Local delayed-effect-alternative mean of the Gehan statistic."""
    return pi * (1.0 - pi) * _quad(
        lambda u: w_limit(u, t, entry_max) ** 2, t_delay, t
    )


def logrank_info(t: float, pi: float = 0.5, entry_max: float = 2.0) -> float:
    """Asymptotic variance of the logrank statistic (its information)."""
    return pi * (1.0 - pi) * _quad(lambda u: w_limit(u, t, entry_max), 0.0, t)


def rmst_arm_if_cov(
    restriction_j: float,
    restriction_k: float,
    t_k: float,
    entry_max: float = 2.0,
) -> float:
    """Asymptotic one-arm RMST covariance at restrictions L_j <= L_k, look time t_k."""

    def integrand(u):
        a_j = np.exp(-u) - np.exp(-restriction_j)
        a_k = np.exp(-u) - np.exp(-restriction_k)
        return a_j * a_k / w_limit(u, t_k, entry_max)

    return _quad(integrand, 0.0, restriction_j)


def rmst_cov_entry(
    restriction_j: float,
    restriction_k: float,
    t_k: float,
    pi: float = 0.5,
    entry_max: float = 2.0,
) -> float:
    """Asymptotic covariance of sqrt(n) times the RMST difference at two looks."""
    arm = rmst_arm_if_cov(restriction_j, restriction_k, t_k, entry_max)
    return arm / pi + arm / (1.0 - pi)


def rmst_mean_logodds(restriction: float) -> float:
    """Closed form of the log-odds RMST mean target under unit-exponential survival."""
    return (1.0 - np.exp(-restriction)) - (1.0 - np.exp(-2.0 * restriction)) / 2.0


def rmst_mean_delayed(restriction: float, t_delay: float = 0.0) -> float:
    """Closed form of the delayed-effect RMST mean target."""
    if t_delay >= restriction:
        return 0.0
    return float(
        np.exp(-t_delay) - np.exp(-restriction) * (1.0 + restriction - t_delay)
    )

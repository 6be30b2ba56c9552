import numpy as np
import numpy.testing as npt
import pytest
from scipy.integrate import quad

from seqcombine.errors import (
    ArmMissing,
    DegenerateArm,
    LookOrder,
    RestrictionExceedsFollowup,
)
from seqcombine.rmst import (
    RmstPath,
    rmst_estimate,
    rmst_if_covariance,
    rmst_if_variance,
    rmst_mean_delayed,
    rmst_mean_logodds,
    theta_cov_entry,
    theta_hat,
)
from seqcombine.survdata import Cohort, ScenarioSpec, interim_view, sample_scenario


def _view(entries, events, arms, t):
    return interim_view(Cohort(np.array(entries), np.array(events), np.array(arms)), t)


def _w_limit(u, t):
    return np.exp(-u) * np.clip((t - u) / 2.0, 0.0, 1.0)


def test_rmst_no_events_equals_restriction():
    view = _view([0.0, 0.0], [9.0, 9.0], [1, 1], 1.0)
    assert rmst_estimate(view, 1, 0.8) == pytest.approx(0.8)


def test_rmst_step_area_by_hand():
    view = _view([0.0, 0.0], [1.0, 2.0], [1, 1], 3.0)
    assert rmst_estimate(view, 1, 2.0) == pytest.approx(1.5)
    assert rmst_estimate(view, 1, 0.0) == 0.0


def test_rmst_restriction_past_followup():
    view = _view([0.0], [9.0], [1], 1.0)
    with pytest.raises(RestrictionExceedsFollowup):
        rmst_estimate(view, 1, 1.5)


def test_rmst_monotone_bounded():
    rng = np.random.default_rng(93)
    cohort = sample_scenario(ScenarioSpec(n=200), rng)
    view = interim_view(cohort, 2.0)
    values = [rmst_estimate(view, "pooled", L) for L in np.linspace(0.1, 1.8, 9)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    for L, v in zip(np.linspace(0.1, 1.8, 9), values):
        assert 0.0 <= v <= L + 1e-12


def test_theta_hat_antisymmetry():
    rng = np.random.default_rng(95)
    cohort = sample_scenario(ScenarioSpec(n=150), rng)
    flipped = Cohort(cohort.entry, cohort.event, 1 - cohort.arm)
    va = interim_view(cohort, 2.0)
    vb = interim_view(flipped, 2.0)
    assert theta_hat(va, 1.8) == pytest.approx(-theta_hat(vb, 1.8), rel=1e-12)


def test_theta_hat_identical_arms_zero():
    view = _view([0.0, 0.0, 0.0, 0.0], [1.0, 2.0, 1.0, 2.0], [0, 0, 1, 1], 3.0)
    assert theta_hat(view, 2.5) == pytest.approx(0.0)


def test_theta_hat_missing_arm():
    view = _view([0.0], [1.0], [1], 2.0)
    with pytest.raises(ArmMissing):
        theta_hat(view, 1.5)


def test_if_variance_quadrature():
    rng = np.random.default_rng(97)
    cohort = sample_scenario(ScenarioSpec(n=20_000), rng)
    view = interim_view(cohort, 3.0)
    L = 2.8
    n1 = cohort.n_arm1

    def integrand(u):
        a = np.exp(-u) - np.exp(-L)
        return a * a / _w_limit(u, 3.0)

    target = quad(integrand, 0.0, L, limit=200)[0]
    assert rmst_if_variance(view, 1, L, n1) == pytest.approx(target, rel=0.05)


def test_if_covariance_quadrature():
    rng = np.random.default_rng(101)
    cohort = sample_scenario(ScenarioSpec(n=20_000), rng)
    view = interim_view(cohort, 3.0)
    lj, lk = 1.3, 2.8
    n0 = len(cohort) - cohort.n_arm1

    def integrand(u):
        aj = np.exp(-u) - np.exp(-lj)
        ak = np.exp(-u) - np.exp(-lk)
        return aj * ak / _w_limit(u, 3.0)

    target = quad(integrand, 0.0, lj, limit=200)[0]
    assert rmst_if_covariance(view, 0, lj, lk, n0) == pytest.approx(target, rel=0.05)


def test_if_covariance_collapses_to_variance():
    rng = np.random.default_rng(103)
    cohort = sample_scenario(ScenarioSpec(n=300), rng)
    view = interim_view(cohort, 2.5)
    a = rmst_if_covariance(view, 1, 2.0, 2.0, cohort.n_arm1)
    b = rmst_if_variance(view, 1, 2.0, cohort.n_arm1)
    assert a == b


def test_if_covariance_order_checks():
    rng = np.random.default_rng(107)
    cohort = sample_scenario(ScenarioSpec(n=50), rng)
    view = interim_view(cohort, 2.0)
    with pytest.raises(LookOrder):
        rmst_if_covariance(view, 1, 1.8, 1.0, cohort.n_arm1)
    with pytest.raises(RestrictionExceedsFollowup):
        rmst_if_covariance(view, 1, 1.0, 2.5, cohort.n_arm1)


def test_if_variance_no_events():
    view = _view([0.0, 0.0], [9.0, 9.0], [1, 1], 1.0)
    assert rmst_if_variance(view, 1, 0.8, 2) == 0.0


def test_events_past_restriction_contribute_zero():
    # Single event beyond L: remaining-area factor vanishes there.
    view = _view([0.0, 0.0, 0.0], [1.5, 9.0, 9.0], [1, 1, 1], 2.0)
    assert rmst_if_variance(view, 1, 1.0, 3) == 0.0


def test_theta_cov_entry_weights():
    assert theta_cov_entry(2.0, 2.0, 0.5) == pytest.approx(8.0)
    v = 0.37
    assert theta_cov_entry(v, v, 0.5) == pytest.approx(4 * v)
    rng = np.random.default_rng(109)
    for _ in range(20):
        a1, a0 = rng.uniform(0.1, 2.0, size=2)
        p = rng.uniform(0.2, 0.8)
        assert theta_cov_entry(a1, a0, p) == pytest.approx(a1 / p + a0 / (1 - p))
    with pytest.raises(DegenerateArm):
        theta_cov_entry(1.0, 1.0, 0.0)


def test_mean_logodds_closed_form():
    rng = np.random.default_rng(113)
    cohort = sample_scenario(ScenarioSpec(n=20_000), rng)
    view = interim_view(cohort, 3.0)
    L = 2.0
    target = (1.0 - np.exp(-L)) - (1.0 - np.exp(-2 * L)) / 2.0
    assert rmst_mean_logodds(view, L) == pytest.approx(target, rel=0.05)


def test_mean_logodds_no_events():
    view = _view([0.0], [9.0], [1], 1.0)
    assert rmst_mean_logodds(view, 0.8) == 0.0
    assert rmst_mean_logodds(view, 0.0) == 0.0


def test_mean_delayed_closed_form():
    rng = np.random.default_rng(127)
    cohort = sample_scenario(ScenarioSpec(n=20_000), rng)
    view = interim_view(cohort, 3.0)
    L = 2.0
    target = 1.0 - (1.0 + L) * np.exp(-L)
    assert rmst_mean_delayed(view, L, 0.0) == pytest.approx(target, rel=0.05)


def test_mean_delayed_edges():
    view = _view([0.0, 0.0], [1.0, 2.0], [0, 1], 3.0)
    assert rmst_mean_delayed(view, 1.5, t_delay=1.5) == 0.0
    assert rmst_mean_delayed(view, 1.0, t_delay=2.0) == 0.0
    empty = _view([0.0], [9.0], [1], 2.0)
    assert rmst_mean_delayed(empty, 1.5, 0.0) == 0.0


def test_path_matches_direct_ops():
    rng = np.random.default_rng(131)
    n = 400
    cohort = sample_scenario(ScenarioSpec(n=n), rng)
    n1 = cohort.n_arm1
    pi = n1 / n
    times = [1.0, 1.5, 2.0, 2.5, 3.0]
    restrictions = [t - 0.2 for t in times]
    path = RmstPath(n=n, n1=n1, t_delay=0.6)
    views = []
    for t, L in zip(times, restrictions):
        view = interim_view(cohort, t)
        views.append(view)
        path.update(view, L)
    cov = path.cov
    for j, (view, L) in enumerate(zip(views, restrictions)):
        assert path.theta[j] == pytest.approx(theta_hat(view, L), rel=1e-12)
        assert path.x[j] == pytest.approx(np.sqrt(n) * theta_hat(view, L), rel=1e-12)
        assert path.means["logodds"][j] == pytest.approx(rmst_mean_logodds(view, L), rel=1e-12)
        assert path.means["prop"][j] == pytest.approx(rmst_mean_delayed(view, L, 0.0), rel=1e-12)
        assert path.means["delayed"][j] == pytest.approx(rmst_mean_delayed(view, L, 0.6), rel=1e-12)
        for l in range(j + 1):
            expected = theta_cov_entry(
                rmst_if_covariance(views[j], 1, restrictions[l], L, n1),
                rmst_if_covariance(views[j], 0, restrictions[l], L, n - n1),
                pi,
            )
            assert cov[l, j] == pytest.approx(expected, rel=1e-12)
    # Diagonal equals the combined per-look variances.
    for j, (view, L) in enumerate(zip(views, restrictions)):
        direct = theta_cov_entry(
            rmst_if_variance(view, 1, L, n1),
            rmst_if_variance(view, 0, L, n - n1),
            pi,
        )
        assert cov[j, j] == pytest.approx(direct, rel=1e-12)

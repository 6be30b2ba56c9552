"""Deterministic Monte Carlo study engine.

Each trial draws its own substream keyed on (master seed, trial index,
purpose), so results are bit-identical for any worker count and adding tests
never perturbs data generation.  Workers return light per-trial records that
the driver reduces in trial order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundaries import QmcConfig, SpendingPlan, indinc_boundaries, mvn_boundaries
from .errors import ConfigInvalid, InsufficientData
from .monitor import SIM_PROFILE, SolverProfile, TestSpec, TestState
from .rmst import RmstPath
from .survdata import ScenarioSpec, interim_view, sample_scenario
from .wilcoxon import WilcoxonPath
from . import nulltheory

_PURPOSE_DATA = 0
_PURPOSE_BOUNDARY = 1
_PURPOSE_FIXED = 2


@dataclass(frozen=True)
class Design:
    """Monitoring design: analysis times, spending, restrictions, target delay."""

    analysis_times: tuple = (1.0, 1.5, 2.0, 2.5, 3.0)
    plan: SpendingPlan = SpendingPlan(fractions=(0.05, 0.1, 0.4, 0.7, 1.0), alpha=0.05)
    rmst_offset: float = 0.2
    t_delay: float = 0.6
    covariance_source: str = "estimated"

    def __post_init__(self):
        times = tuple(float(t) for t in self.analysis_times)
        if any(b <= a for a, b in zip(times, times[1:])) or times[0] <= 0:
            raise ConfigInvalid("analysis_times must be positive and strictly increasing")
        if len(times) != self.plan.looks:
            raise ConfigInvalid("spending plan length must match analysis_times")
        if not 0.0 <= self.rmst_offset < times[0]:
            raise ConfigInvalid("rmst_offset must leave a positive first restriction")
        if self.t_delay < 0:
            raise ConfigInvalid("t_delay must be nonnegative")
        if self.covariance_source not in ("estimated", "fixed"):
            raise ConfigInvalid("covariance_source must be 'estimated' or 'fixed'")
        object.__setattr__(self, "analysis_times", times)

    @property
    def looks(self) -> int:
        return len(self.analysis_times)

    def restrictions(self) -> tuple:
        return tuple(t - self.rmst_offset for t in self.analysis_times)


@dataclass
class TrialOutcome:
    """Per-test outcome of one simulated trial."""

    test: str
    stop_look: int | None
    rejected: bool
    flagged: bool
    z: list
    crit: list
    raw: list


@dataclass
class TestSummary:
    name: str
    rate: float
    mc_se: float
    avg_analyses: float
    flagged: int

    def to_dict(self) -> dict:
        return {
            "test": self.name,
            "rate": self.rate,
            "mc_se": self.mc_se,
            "avg_analyses": self.avg_analyses,
            "flagged": self.flagged,
        }


@dataclass
class SimReport:
    """Aggregate of a study: rejection rates, stopping behavior, diagnostics."""

    scenario: str
    reps: int
    seed: int
    tests: list = field(default_factory=list)  # TestSummary
    standardized_cov: dict = field(default_factory=dict)  # test -> nested list
    profile: SolverProfile = SIM_PROFILE
    covariance_source: str = "estimated"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "reps": self.reps,
            "seed": self.seed,
            "covariance_source": self.covariance_source,
            "solver_profile": {
                "indinc_grid": self.profile.indinc_grid,
                "qmc_shifts": self.profile.qmc_shifts,
                "qmc_points": self.profile.qmc_points,
                "root_xtol": self.profile.root_xtol,
            },
            "tests": [t.to_dict() for t in self.tests],
            "standardized_cov": {
                k: [[float(x) for x in row] for row in m]
                for k, m in self.standardized_cov.items()
            },
        }


def _boundary_seed(master: int, trial: int, test_idx: int) -> int:
    ss = np.random.SeedSequence([master, trial, _PURPOSE_BOUNDARY, test_idx])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def fixed_schedules(design: Design, spec: ScenarioSpec, tests: list, seed: int) -> dict:
    """Boundary schedules from the asymptotic null covariance, one per test.

    Used by ``covariance_source = 'fixed'``: statistics stay data-driven but
    every trial shares these precomputed boundaries.
    """
    times = design.analysis_times
    rests = design.restrictions()
    pi, emax = spec.pi, spec.entry_max
    k = len(times)
    v_if = np.array(
        [[nulltheory.gehan_if_cov(min(s, t), max(s, t), pi, emax) for t in times] for s in times]
    )
    v_theta = np.array(
        [
            [
                nulltheory.rmst_cov_entry(
                    min(lj, lk), max(lj, lk), times[max(i, m)], pi, emax
                )
                for m, lk in enumerate(rests)
            ]
            for i, lj in enumerate(rests)
        ]
    )
    directions = {
        ("wilcoxon", "adhoc"): np.diag(v_if),
        ("wilcoxon", "logodds"): np.array([nulltheory.gehan_mean_logodds(t, pi, emax) for t in times]),
        ("wilcoxon", "prop"): np.array([nulltheory.gehan_mean_delayed(t, 0.0, pi, emax) for t in times]),
        ("wilcoxon", "delayed"): np.array(
            [nulltheory.gehan_mean_delayed(t, design.t_delay, pi, emax) for t in times]
        ),
        ("rmst", "logodds"): np.array([nulltheory.rmst_mean_logodds(L) for L in rests]),
        ("rmst", "prop"): np.array([nulltheory.rmst_mean_delayed(L, 0.0) for L in rests]),
        ("rmst", "delayed"): np.array(
            [nulltheory.rmst_mean_delayed(L, design.t_delay) for L in rests]
        ),
    }
    out = {}
    for idx, test in enumerate(tests):
        qseed = int(np.random.SeedSequence([seed, 0, _PURPOSE_FIXED, idx]).generate_state(1, dtype=np.uint64)[0])
        if test.family == "logrank":
            v = np.array([nulltheory.logrank_info(t, pi, emax) for t in times])
            sched = indinc_boundaries(v, design.plan)
        elif test.kind == "raw":
            cov = v_if if test.family == "wilcoxon" else v_theta
            if test.boundary_method == "mvn":
                d = np.sqrt(np.diag(cov))
                corr = cov / np.outer(d, d)
                np.fill_diagonal(corr, 1.0)
                sched = mvn_boundaries(corr, design.plan, config=QmcConfig(seed=qseed))
            else:
                sched = indinc_boundaries(np.diag(cov), design.plan)
        else:
            cov = v_if if test.family == "wilcoxon" else v_theta
            b = directions[(test.family, test.direction)]
            v = np.empty(k)
            for j in range(1, k + 1):
                sol = np.linalg.solve(cov[:j, :j], b[:j])
                v[j - 1] = float(sol @ b[:j])
            sched = indinc_boundaries(v, design.plan)
        out[test.name] = [float(c) for c in sched.crit]
    return out


def run_trial(
    spec: ScenarioSpec,
    design: Design,
    tests: list,
    master_seed: int,
    trial_idx: int,
    profile: SolverProfile = SIM_PROFILE,
    stop: bool = True,
    use_boundaries: bool = True,
    fixed: dict | None = None,
) -> list:
    """Simulate one trial and monitor every test on the shared dataset."""
    rng = np.random.default_rng(np.random.SeedSequence([master_seed, trial_idx, _PURPOSE_DATA]))
    cohort = sample_scenario(spec, rng)
    need_w = any(t.family in ("wilcoxon", "logrank") for t in tests)
    need_r = any(t.family == "rmst" for t in tests)
    wpath = WilcoxonPath(n=spec.n, t_delay=design.t_delay) if need_w else None
    rpath = RmstPath(n=spec.n, n1=cohort.n_arm1, t_delay=design.t_delay) if need_r else None
    states = [
        TestState(
            spec=t,
            plan=design.plan,
            profile=profile,
            boundary_seed=_boundary_seed(master_seed, trial_idx, i),
            fixed_schedule=None if fixed is None else fixed[t.name],
            use_boundaries=use_boundaries,
        )
        for i, t in enumerate(tests)
    ]
    rests = design.restrictions()
    for j, t in enumerate(design.analysis_times):
        alive = [s for s in states if not (stop and (s.done or s.stopped_at is not None))]
        if not alive:
            break
        view = interim_view(cohort, t)
        if wpath is not None:
            wpath.update(view)
        if rpath is not None:
            rpath.update(view, rests[j])
        for s in states:
            if stop and s.done:
                continue
            s.step(j, wpath, rpath)
    outcomes = []
    for s in states:
        outcomes.append(
            TrialOutcome(
                test=s.spec.name,
                stop_look=s.stopped_at,
                rejected=s.rejected,
                flagged=s.flagged,
                z=[r.z for r in s.records],
                crit=[r.crit for r in s.records],
                raw=[r.raw for r in s.records],
            )
        )
    return outcomes


def _run_chunk(args) -> list:
    (spec, design, tests, seed, start, end, profile, stop, use_boundaries, fixed) = args
    out = []
    for trial in range(start, end):
        outcomes = run_trial(
            spec, design, tests, seed, trial,
            profile=profile, stop=stop, use_boundaries=use_boundaries, fixed=fixed,
        )
        k = design.looks
        rec = []
        for o in outcomes:
            analyses = o.stop_look if o.stop_look is not None else k
            rec.append((o.rejected, analyses, o.flagged, o.raw))
        out.append((trial, rec))
    return out


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads == 0:
        env = os.environ.get("SEQCOMBINE_THREADS", "")
        if env.strip():
            threads = int(env)
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ConfigInvalid("threads must be >= 1")
    return threads


def run_study(
    spec: ScenarioSpec,
    design: Design,
    tests: list,
    reps: int,
    seed: int,
    threads: int | None = None,
    profile: SolverProfile = SIM_PROFILE,
    table2: bool = False,
    scenario_name: str = "",
) -> SimReport:
    """Run ``reps`` independent trials and aggregate.

    ``table2`` switches to the covariance diagnostic: trials run all looks
    without stopping, boundaries are skipped, and the report carries each
    test's standardized empirical covariance of the raw statistic path.
    """
    if reps < 1:
        raise ConfigInvalid("reps must be >= 1")
    tests = [t if isinstance(t, TestSpec) else TestSpec(t) for t in tests]
    threads = resolve_threads(threads)
    fixed = None
    if design.covariance_source == "fixed":
        fixed = fixed_schedules(design, spec, tests, seed)
    stop = not table2
    use_boundaries = not table2
    chunk = max(1, min(256, -(-reps // (threads * 4))))
    tasks = [
        (spec, design, tests, seed, s, min(s + chunk, reps), profile, stop, use_boundaries, fixed)
        for s in range(0, reps, chunk)
    ]
    results: list = []
    if threads == 1:
        for task in tasks:
            results.extend(_run_chunk(task))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_run_chunk, tasks):
                results.extend(part)
    results.sort(key=lambda item: item[0])
    ordered = [rec for _, rec in results]

    report = SimReport(
        scenario=scenario_name or spec.family,
        reps=reps,
        seed=seed,
        profile=profile,
        covariance_source=design.covariance_source,
    )
    k = design.looks
    for i, test in enumerate(tests):
        rejected = np.array([rec[i][0] for rec in ordered], dtype=np.int64)
        analyses = np.array([rec[i][1] for rec in ordered], dtype=np.int64)
        flagged = np.array([rec[i][2] for rec in ordered], dtype=np.int64)
        rate = float(np.sum(rejected)) / reps
        se = float(np.sqrt(rate * (1.0 - rate) / reps))
        report.tests.append(
            TestSummary(
                name=test.name,
                rate=rate,
                mc_se=se,
                avg_analyses=float(np.sum(analyses)) / reps,
                flagged=int(np.sum(flagged)),
            )
        )
        if table2:
            raws = np.array([rec[i][3] for rec in ordered], dtype=float)
            report.standardized_cov[test.name] = standardized_cov_report(raws).tolist()
    return report


def standardized_cov_report(vectors: np.ndarray) -> np.ndarray:
    """Empirical covariance of complete statistic paths over the last look's variance."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise InsufficientData("need at least two complete paths")
    cov = np.cov(vectors, rowvar=False, ddof=1)
    denom = cov[-1, -1]
    if denom <= 0:
        raise InsufficientData("last-look statistic has zero empirical variance")
    return cov / denom

"""Command line interface: ``simulate``, ``analyze``, ``boundaries``.

Configuration and reports are JSON; tabular data and matrices are CSV.  Exit
codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from importlib import resources

import numpy as np

from .analyze import analyze_dataset
from .boundaries import (
    BoundarySchedule,
    QmcConfig,
    SpendingPlan,
    corr_from_cov,
    indinc_boundaries,
    mvn_boundaries,
)
from .errors import (
    ConfigInvalid,
    NonMonotoneInformation,
    NotPositiveDefinite,
    SchemaError,
    SeqcombineError,
    StateMismatch,
)
from .indinc import check_independent_increments
from .matrix import check_symmetric
from .mcsim import Design, SimReport, run_study
from .monitor import ROSTER, SolverProfile, TestSpec
from .survdata import ScenarioSpec, load_cohort_csv

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(path_or_name: str) -> dict:
    """Load a run configuration from a path or a bundled config name."""
    if os.path.exists(path_or_name):
        with open(path_or_name) as fh:
            return json.load(fh)
    name = path_or_name if path_or_name.endswith(".json") else path_or_name + ".json"
    ref = resources.files("seqcombine").joinpath("configs", name)
    if ref.is_file():
        return json.loads(ref.read_text())
    raise ConfigInvalid(f"config: no file or bundled config named {path_or_name!r}")


def _design_from_config(cfg: dict, tests: list[TestSpec]) -> Design:
    dcfg = cfg.get("design", {})
    spending = dcfg.get("spending", {})
    t_delay = dcfg.get("t_delay")
    if t_delay is None:
        delayed = [t.name for t in tests if t.needs_delay]
        if delayed:
            raise ConfigInvalid(
                f"design.t_delay: required by requested tests {delayed}"
            )
        t_delay = 0.0
    try:
        plan = SpendingPlan(
            fractions=tuple(spending.get("fractions", (0.05, 0.1, 0.4, 0.7, 1.0))),
            alpha=float(spending.get("alpha", 0.05)),
        )
    except ValueError as exc:
        raise ConfigInvalid(f"design.spending: {exc}") from exc
    return Design(
        analysis_times=tuple(dcfg.get("analysis_times", (1.0, 1.5, 2.0, 2.5, 3.0))),
        plan=plan,
        rmst_offset=float(dcfg.get("rmst_offset", 0.2)),
        t_delay=float(t_delay),
        covariance_source=dcfg.get("covariance_source", "estimated"),
    )


def _tests_from_config(cfg: dict) -> list[TestSpec]:
    names = cfg.get("tests", list(ROSTER))
    return [TestSpec(str(n)) for n in names]


def _scenarios_from_config(cfg: dict) -> list[tuple[str, ScenarioSpec]]:
    pop = cfg.get("population", {})
    n = int(pop.get("n", 1000))
    pi = float(pop.get("pi", 0.5))
    entry_max = float(pop.get("entry_max", 2.0))
    raw = cfg.get("scenarios")
    if not raw:
        raise ConfigInvalid("scenarios: at least one scenario is required")
    out = []
    for i, sc in enumerate(raw):
        family = sc.get("family")
        name = sc.get("name", family or f"scenario{i}")
        try:
            spec = ScenarioSpec(
                n=n,
                family=family,
                delta=float(sc.get("delta", 0.0)),
                t_delay=float(sc.get("t_delay", 0.0)),
                pi=pi,
                entry_max=entry_max,
            )
        except SeqcombineError as exc:
            raise ConfigInvalid(f"scenarios[{i}]: {exc}") from exc
        out.append((name, spec))
    return out


def _profile_from_config(cfg: dict) -> SolverProfile:
    from .monitor import SIM_PROFILE

    scfg = cfg.get("solver", {})
    return SolverProfile(
        indinc_grid=int(scfg.get("indinc_grid", SIM_PROFILE.indinc_grid)),
        qmc_shifts=int(scfg.get("qmc_shifts", SIM_PROFILE.qmc_shifts)),
        qmc_points=int(scfg.get("qmc_points", SIM_PROFILE.qmc_points)),
        root_xtol=float(scfg.get("root_xtol", SIM_PROFILE.root_xtol)),
    )


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    tests = _tests_from_config(cfg)
    if args.test:
        wanted = set(args.test)
        unknown = wanted - {t.name for t in tests}
        if unknown:
            raise ConfigInvalid(f"--test: {sorted(unknown)} not in configured tests")
        tests = [t for t in tests if t.name in wanted]
    design = _design_from_config(cfg, tests)
    scenarios = _scenarios_from_config(cfg)
    if args.scenario:
        wanted = set(args.scenario)
        unknown = wanted - {name for name, _ in scenarios}
        if unknown:
            raise ConfigInvalid(f"--scenario: {sorted(unknown)} not configured")
        scenarios = [(name, sc) for name, sc in scenarios if name in wanted]
    reps = int(cfg.get("reps", 0))
    if reps < 1:
        raise ConfigInvalid("reps: must be >= 1")
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    threads = args.threads if args.threads is not None else cfg.get("threads", 0)
    table2 = bool(cfg.get("table2", False))
    profile = _profile_from_config(cfg)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)

    reports: list[SimReport] = []
    for name, spec in scenarios:
        report = run_study(
            spec,
            design,
            tests,
            reps=reps,
            seed=seed,
            threads=threads,
            profile=profile,
            table2=table2,
            scenario_name=name,
        )
        reports.append(report)
        path = os.path.join(out_dir, f"report_{name}.json")
        with open(path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")

    summary = os.path.join(out_dir, "table2.csv" if table2 else "table1.csv")
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh)
        if table2:
            k = design.looks
            writer.writerow(["scenario", "test", "row"] + [f"c{i+1}" for i in range(k)])
            for report in reports:
                for test in tests:
                    matrix = report.standardized_cov[test.name]
                    for i, row in enumerate(matrix):
                        writer.writerow(
                            [report.scenario, test.name, i + 1] + [f"{x:.6f}" for x in row]
                        )
        else:
            writer.writerow(["scenario", "test", "reps", "rate", "mc_se", "avg_analyses", "flagged"])
            for report in reports:
                for t in report.tests:
                    writer.writerow(
                        [
                            report.scenario,
                            t.name,
                            report.reps,
                            f"{t.rate:.6f}",
                            f"{t.mc_se:.6f}",
                            f"{t.avg_analyses:.6f}",
                            t.flagged,
                        ]
                    )
    print(f"wrote {summary}")
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    test = TestSpec(args.test)
    design = _design_from_config(cfg, [test])
    cohort = load_cohort_csv(args.data)
    look = int(args.look)
    state = None
    if args.state and os.path.exists(args.state):
        with open(args.state) as fh:
            state = json.load(fh)
    seed = int(args.seed if args.seed is not None else 0)
    reports, new_state = analyze_dataset(cohort, design, test, look, state=state, seed=seed)
    stopped = None
    print(f"test {test.name} on {args.data} (n={len(cohort)} rows)")
    header = f"{'look':>4} {'time':>6} {'raw':>12} {'dir':>12} {'info':>12} {'z':>9} {'crit':>7} decision"
    print(header)
    for rep in reports:
        decision = "reject" if rep.rejected else ("no-data" if rep.degenerate else "continue")
        if rep.flagged:
            decision = "flagged"
        if stopped is None and rep.rejected:
            stopped = rep.look
        d = "-" if rep.direction_entry is None else f"{rep.direction_entry:12.5g}"
        print(
            f"{rep.look:>4} {rep.analysis_time:>6.2f} {rep.raw:>12.5g} {d:>12} "
            f"{rep.info:>12.5g} {rep.z:>9.4f} {rep.crit:>7.4f} {decision}"
        )
    if stopped:
        print(f"first crossing at look {stopped}: stop and reject")
    else:
        print("no boundary crossing through the requested look")
    if args.state:
        with open(args.state, "w") as fh:
            json.dump(new_state, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"state written to {args.state}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"looks": [r.to_dict() for r in reports]}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# boundaries
# ---------------------------------------------------------------------------


def _load_cov_csv(path: str) -> np.ndarray:
    try:
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                rows.append([float(x) for x in row])
    except (OSError, ValueError) as exc:
        raise SchemaError(f"covariance csv: {exc}") from exc
    m = np.asarray(rows, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SchemaError(f"covariance csv must be square, got shape {m.shape}")
    try:
        check_symmetric(m, rtol=1e-8)
    except SeqcombineError as exc:
        raise SchemaError(f"covariance csv: {exc}") from exc
    return m


def cmd_boundaries(args) -> int:
    cov = _load_cov_csv(args.cov)
    with open(args.plan) as fh:
        plan_cfg = json.load(fh)
    try:
        plan = SpendingPlan(
            fractions=tuple(plan_cfg["fractions"]), alpha=float(plan_cfg.get("alpha", 0.05))
        )
    except (KeyError, ValueError) as exc:
        raise ConfigInvalid(f"plan: {exc}") from exc
    if plan.looks != cov.shape[0]:
        raise ConfigInvalid("plan: fraction count must match covariance dimension")
    method = plan_cfg.get("method", "auto")
    if method not in ("auto", "indinc", "mvn"):
        raise ConfigInvalid(f"plan.method: unknown method {method!r}")
    seed = int(args.seed if args.seed is not None else plan_cfg.get("seed", 0))
    if method == "auto":
        dev = check_independent_increments(cov, kind="statistic")
        method = "indinc" if dev <= 1e-8 * max(1.0, float(np.max(np.abs(cov)))) else "mvn"
    if method == "indinc":
        sched = indinc_boundaries(np.diag(cov), plan)
    else:
        sched = mvn_boundaries(corr_from_cov(cov), plan, config=QmcConfig(seed=seed))
    payload = sched.to_dict()
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqcombine",
        description="Group sequential tests with independent-increment combinations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo study from a config")
    p_sim.add_argument("--config", required=True, help="config JSON path or bundled name")
    p_sim.add_argument("--out", help="output directory (default: current)")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--threads", type=int, help="worker processes (0 = auto)")
    p_sim.add_argument("--scenario", action="append", help="restrict to named scenario(s)")
    p_sim.add_argument("--test", action="append", help="restrict to named test(s)")
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", help="evaluate one test on a dataset at a look")
    p_an.add_argument("--data", required=True, help="dataset CSV (entry_time,event_time,arm)")
    p_an.add_argument("--config", help="design config JSON (defaults match the bundled design)")
    p_an.add_argument("--test", required=True, help="test name")
    p_an.add_argument("--look", required=True, type=int, help="analysis look (1-based)")
    p_an.add_argument("--state", help="state file to verify and extend")
    p_an.add_argument("--seed", type=int, help="boundary solver seed (default 0)")
    p_an.add_argument("--out", help="write per-look report JSON here")
    p_an.set_defaults(func=cmd_analyze)

    p_b = sub.add_parser("boundaries", help="solve boundaries for a covariance and plan")
    p_b.add_argument("--cov", required=True, help="covariance matrix CSV (K rows)")
    p_b.add_argument("--plan", required=True, help="spending plan JSON")
    p_b.add_argument("--seed", type=int, help="solver seed override")
    p_b.add_argument("--out", help="write the schedule JSON here (default: stdout)")
    p_b.set_defaults(func=cmd_boundaries)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, StateMismatch) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NotPositiveDefinite, NonMonotoneInformation) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SeqcombineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

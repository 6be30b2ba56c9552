"""Look-by-look analysis of a real dataset with persisted frozen state.

The dataset CSV holds the full trial (entry, event time, arm); each look
reconstructs the administratively censored view at its analysis time, so
statistics frozen at earlier looks are exactly reproducible.  A versioned
state file records them anyway: re-running a look verifies the stored values
against the data and fails loudly when the dataset has changed under the
state (StateMismatch), which is the failure mode that matters in practice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, StateMismatch
from .mcsim import Design
from .monitor import SolverProfile, TestSpec, TestState
from .rmst import RmstPath
from .survdata import Cohort, interim_view
from .wilcoxon import WilcoxonPath

STATE_VERSION = 1
_MATCH_TOL = 1e-9


@dataclass
class LookReport:
    look: int
    analysis_time: float
    raw: float
    direction_entry: float | None
    info: float
    z: float
    crit: float
    rejected: bool
    degenerate: bool
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "look": self.look,
            "analysis_time": self.analysis_time,
            "raw": self.raw,
            "direction_entry": self.direction_entry,
            "info": self.info,
            "z": self.z,
            "crit": self.crit,
            "rejected": self.rejected,
            "degenerate": self.degenerate,
            "flagged": self.flagged,
        }


def _fingerprint(cohort: Cohort) -> dict:
    return {
        "rows": int(len(cohort)),
        "arm1": int(cohort.n_arm1),
        "entry_sum": float(np.sum(cohort.entry)),
        "event_sum": float(np.sum(cohort.event)),
    }


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _MATCH_TOL * max(1.0, abs(a), abs(b))


def analyze_dataset(
    cohort: Cohort,
    design: Design,
    test: TestSpec,
    look: int,
    state: dict | None = None,
    seed: int = 0,
    profile: SolverProfile | None = None,
):
    """Evaluate a test at looks 1..look; verify any prior state and extend it.

    Returns (reports, new_state).  A rejection at an earlier look still
    reports later looks when asked; the trial would have stopped at the first
    crossing, which the caller can read off the reports.
    """
    if not 1 <= look <= design.looks:
        raise ConfigInvalid(f"look must lie in 1..{design.looks}")
    profile = profile or SolverProfile()
    fp = _fingerprint(cohort)
    if state is not None:
        if state.get("version") != STATE_VERSION:
            raise StateMismatch(f"unsupported state version {state.get('version')!r}")
        if state.get("test") != test.name:
            raise StateMismatch(
                f"state was built for test {state.get('test')!r}, not {test.name!r}"
            )
        if state.get("seed") != seed:
            raise StateMismatch("state was built with a different boundary seed")
        old_fp = state.get("fingerprint", {})
        for key, val in fp.items():
            if key in ("rows", "arm1") and old_fp.get(key) != val:
                raise StateMismatch(f"dataset {key} changed from {old_fp.get(key)} to {val}")
            if key.endswith("_sum") and not _close(float(old_fp.get(key, np.nan)), val):
                raise StateMismatch(f"dataset column sum {key} changed")

    need_w = test.family in ("wilcoxon", "logrank")
    wpath = WilcoxonPath(n=len(cohort), t_delay=design.t_delay) if need_w else None
    rpath = None if need_w else RmstPath(n=len(cohort), n1=cohort.n_arm1, t_delay=design.t_delay)
    st = TestState(spec=test, plan=design.plan, profile=profile, boundary_seed=seed)
    rests = design.restrictions()
    reports: list[LookReport] = []
    rejected_at = None
    for j in range(look):
        t = design.analysis_times[j]
        view = interim_view(cohort, t)
        if wpath is not None:
            wpath.update(view)
        else:
            rpath.update(view, rests[j])
        rec = st.step(j, wpath, rpath)
        if test.kind == "combined":
            means = (wpath or rpath).means[test.direction]
            direction_entry = float(means[j])
        else:
            direction_entry = None
        crossed_now = rec.crossed and rejected_at is None
        if crossed_now:
            rejected_at = j + 1
        reports.append(
            LookReport(
                look=j + 1,
                analysis_time=t,
                raw=rec.raw,
                direction_entry=direction_entry,
                info=rec.info,
                z=rec.z,
                crit=rec.crit,
                rejected=rec.crossed,
                degenerate=rec.degenerate,
                flagged=rec.flagged,
            )
        )
        if st.flagged:
            break

    if state is not None:
        for stored in state.get("looks", []):
            idx = stored["look"] - 1
            if idx >= len(reports):
                continue
            fresh = reports[idx]
            for field_name in ("raw", "z", "info", "crit"):
                if not _close(float(stored[field_name]), float(getattr(fresh, field_name))):
                    raise StateMismatch(
                        f"look {stored['look']} {field_name} {stored[field_name]!r} no longer "
                        f"matches the data ({getattr(fresh, field_name)!r})"
                    )

    new_state = {
        "version": STATE_VERSION,
        "test": test.name,
        "seed": seed,
        "fingerprint": fp,
        "design": {
            "analysis_times": list(design.analysis_times),
            "fractions": list(design.plan.fractions),
            "alpha": design.plan.alpha,
            "rmst_offset": design.rmst_offset,
            "t_delay": design.t_delay,
        },
        "looks": [r.to_dict() for r in reports],
    }
    return reports, new_state

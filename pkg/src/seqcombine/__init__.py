"""Group sequential monitoring via independent-increment combinations.

Sequentially computed test statistics often lack the independent increments
property that standard group sequential boundary software assumes.  This
package builds sequential linear combinations that restore the property
exactly, targets them at proportional-hazards, log-odds, or delayed-effect
alternatives, supplies the censored-survival statistic families (Gehan's
Wilcoxon, logrank, restricted-mean-survival-time difference) with their
influence-function covariance estimators, computes two-sided spending
boundaries for both independent-increment and general correlation structures,
and drives large deterministic Monte Carlo studies of all of it.
"""

from .boundaries import (
    BoundarySchedule,
    IndincRecursion,
    MvnBoundarySolver,
    QmcConfig,
    SpendingPlan,
    corr_from_cov,
    indinc_boundaries,
    mvn_boundaries,
    mvn_rectangle,
)
from .errors import (
    ArmMissing,
    ConfigInvalid,
    DegenerateArm,
    DegenerateDirection,
    DimensionMismatch,
    InsufficientData,
    InvalidSpec,
    LookOrder,
    NonMonotoneInformation,
    NotPositiveDefinite,
    RestrictionExceedsFollowup,
    SchemaError,
    SeqcombineError,
    StateMismatch,
    TrivialCombination,
)
from .indinc import (
    CombinedStat,
    DirectionVector,
    StatPath,
    TransformResult,
    check_independent_increments,
    combine,
    recover_b,
    transform_path,
)
from .matrix import chol_decompose, padded_geninverse, quad_form
from .survdata import (
    Cohort,
    InterimView,
    ScenarioSpec,
    StepFn,
    Subject,
    interim_view,
    km_estimator,
    load_cohort_csv,
    nelson_aalen,
    risk_count,
    sample_scenario,
    save_cohort_csv,
)

__version__ = "0.1.0"

//! Second derivative of the potential at critical points, the three
//! cancellation inequalities, the critical-point ladder and the continuity
//! diagnostic.

mod continuity;
mod ladder;
mod lemmas;
mod profile;
mod second;
mod sweep;

pub use continuity::{
    continuity_report, evaluate_ladder, BoundedTerm, ContinuityOptions, ContinuityReport, LadderEvaluation,
    LadderOutcome, LevelJump, PointReport,
};
pub use ladder::{
    build_ladder, left_jumps, persists, right_jumps, running_min_scan, side_gaps, CriticalPointLadder, LadderCase,
    LadderHint, RunningMinScan,
};
pub use lemmas::{
    change_of_variables, check_concave_cancellation, check_convex_cancellation, check_rearrangement_inequality,
    monotone_half_bounds, monotone_pieces, Basecase, ChangeOfVariables, ConcaveCancellation, ConvexCancellation,
    ConvexClause, HalfBounds, Orientation, Rearrangement, VIOLATION_TOL,
};
pub use profile::{CubicSpline, HypothesisScan, Profile, Smooth, TestFunction, CRITICAL_ENDPOINT_TOL};
pub use second::{critical_points, critical_tolerance, psi_second_derivative_at_critical, psi_second_derivative_resolved, SecondDerivative};
pub use sweep::{random_instance, standard_kernels, sweep, Lemma, LemmaInstance, LemmaOutcome, SweepReport};

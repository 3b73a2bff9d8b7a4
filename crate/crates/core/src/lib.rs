//! Exact-rational ergodic-theory workbench: finite measure spaces on a
//! dyadic grid, the Bernoulli cylinder calculus, leash and weak metrics,
//! independence scans, conjugacy certificates near the Bernoulli shift,
//! and Rokhlin towers.

pub mod conjugacy;
pub mod error;
pub mod harness;
pub mod independence;
pub mod measure;
pub mod rational;
pub mod rng;
pub mod symbolic;
pub mod topology;
pub mod towers;

pub use conjugacy::{
    build_eta_atoms, build_q, build_q_checked, certify_conjugate, conjugate, conjugacy_demo, verify_certificate,
    BudgetLedger, ConjugacyCertificate, ConjugacyParams, ConjugacyRun, DeviationRow, ConjugacyDemo,
};
pub use error::{Error, Result};
pub use harness::{emit_reports, run_experiment, ExperimentConfig, MapKind, ReportFormat, RunRecord};
pub use independence::{
    delta_deviation, find_half_measure_independent_set, lemma_cdelta_check, well_deviation, IndependenceReport,
    SearchOutcome, SetFamily,
};
pub use measure::{CellSet, GridMap, GridSpace};
pub use rational::{format_rational, parse_rational, Rational};
pub use symbolic::{AtomUnion, BernoulliShift, BlockLayout, Cylinder};
pub use topology::{
    metric_a, metric_d, metric_tau, neighborhood_contains, Basis, Candidate, Center, Membership, MetricRow,
    NeighborhoodSpec, RefinementChain, SetCollection,
};
pub use towers::{
    approximation_accuracy, build_tower, openness_certificate, partial_rigidity_estimate, rank_one_membership,
    shrink_base, OpennessCertificate, Tower,
};

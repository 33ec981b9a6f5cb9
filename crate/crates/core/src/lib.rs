//! Numerical laboratory for Hyers–Ulam stability and hyperstability of
//! Jordan triple derivations on finite-dimensional matrix Banach algebras.

pub mod algebra;
pub mod config;
pub mod control;
pub mod defect;
pub mod direct;
pub mod error;
pub mod fitting;
pub mod maps;
pub mod pipelines;
pub mod report;
pub mod samples;

pub use algebra::{
    annihilator_check, basis, nontrivial_idempotent, random_element, Algebra, AlgebraDescriptor, AlgebraFamily,
    Element, NormKind, ScalarField, StructureFlags, C64,
};
pub use config::{
    arc_grid, AlgebraConfig, ControlsConfig, Experiment, ExperimentConfig, FamilyName, IterationConfig, MapConfig,
    PerturbationConfig, Scalar, ScalarsConfig, SuiteConfig, Theorem, Tolerances,
};
pub use control::{check_contractive_subadditive, evaluate_control, ContractiveVerdict, ControlFunction};
pub use defect::{DefectKernel, DefectSample, SupDefect};
pub use direct::{
    forti_iterate, hyers_limit, liminf_window_check, liminf_window_values, phi_series, phi_series_norm, ConvergenceReport,
    FortiInstance, FortiOptions, FortiOutcome, IterationScheme, IterationStatus, LimitMap, MatrixForti, SeriesOutcome,
    SeriesStatus, SeriesVariant, WindowScaling, WindowSpec, WindowVerdict,
};
pub use error::{LabError, Result};
pub use fitting::{
    derivation_nullspace_dim, fit_inner_derivation, hyers_ulam_gap, jordan_triple_nullspace_dim, BoundForm, FitResult,
    GapReport, IdentityKernel, NullspaceResult,
};
pub use maps::{AlgebraMap, FnMap, MapUnderTest, PerturbationKind, PerturbationSpec};
pub use pipelines::{
    check_c_linearity, run_experiment, run_general_hyperstability, run_jensen3_hyperstability, run_jensen3_stability,
    run_mixed_prime, run_semiprime_upgrade, LinearityVerdict, RunOptions,
};
pub use report::{ConclusionCheck, ConclusionResults, HypothesisCheck, StabilityReport, TraceSummary, Verdict, Witness};
pub use samples::{mix_seed, SampleSet, SampleSpec};

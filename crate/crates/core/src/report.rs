//! Per-experiment results.

use serde::Serialize;

use crate::algebra::Element;
use crate::direct::{ConvergenceReport, IterationStatus};
use crate::error::Result;
use crate::fitting::{GapReport, NullspaceResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    HyperstableConfirmed,
    StableWithBound,
    /// Every hypothesis check passed (used when only hypotheses were run).
    Pass,
    HypothesisViolated,
    /// Hypotheses held but a conclusion check failed on the samples.
    ConclusionFailed,
    Diverged,
}

impl Verdict {
    pub const ALL: [Verdict; 6] = [
        Verdict::HyperstableConfirmed,
        Verdict::StableWithBound,
        Verdict::Pass,
        Verdict::HypothesisViolated,
        Verdict::ConclusionFailed,
        Verdict::Diverged,
    ];

    pub fn is_success(self) -> bool {
        matches!(self, Verdict::HyperstableConfirmed | Verdict::StableWithBound | Verdict::Pass)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::HyperstableConfirmed => "hyperstable-confirmed",
            Verdict::StableWithBound => "stable-with-bound",
            Verdict::Pass => "pass",
            Verdict::HypothesisViolated => "hypothesis-violated",
            Verdict::ConclusionFailed => "conclusion-failed",
            Verdict::Diverged => "diverged",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The sample at which a check was tightest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<Vec<[f64; 2]>>>,
    pub x_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<[f64; 2]>,
}

impl Witness {
    pub fn point(x: &Element) -> Result<Self> {
        Ok(Witness {
            x: x.to_rows(),
            y: None,
            x_norm: x.norm()?,
            y_norm: None,
            scalar: None,
        })
    }

    pub fn pair(x: &Element, y: &Element) -> Result<Self> {
        Ok(Witness {
            y: Some(y.to_rows()),
            y_norm: Some(y.norm()?),
            ..Witness::point(x)?
        })
    }

    pub fn with_scalar(mut self, re: f64, im: f64) -> Self {
        self.scalar = Some([re, im]);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub evaluations: usize,
    /// Largest measured left-hand side.
    pub worst_value: f64,
    /// Bound at the tightest sample.
    pub worst_bound: f64,
    /// Largest ratio of (value − rounding floor) to bound.
    pub worst_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Set for numerical stand-ins of statements that cannot be decided on samples.
    pub surrogate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConclusionCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub surrogate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub sample: usize,
    pub x_norm: f64,
    pub converged: bool,
    pub status: IterationStatus,
    pub k_stop: usize,
    pub k_last: usize,
    pub tail_bound: f64,
    pub observed_ratio: Option<f64>,
    /// `‖h(x) − H(x)‖`.
    pub gap: f64,
    pub differences: Vec<f64>,
}

impl TraceSummary {
    pub fn from_report(sample: usize, x_norm: f64, gap: f64, rep: &ConvergenceReport) -> Self {
        TraceSummary {
            sample,
            x_norm,
            converged: rep.converged,
            status: rep.status,
            k_stop: rep.k_stop,
            k_last: rep.k_last,
            tail_bound: rep.tail_bound,
            observed_ratio: rep.observed_ratio,
            gap,
            differences: rep.decisive_differences().iter().map(|&(_, v)| v).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConclusionResults {
    pub sup_h_minus_limit: Option<f64>,
    pub sup_triple_defect_limit: Option<f64>,
    pub sup_triple_defect_map: Option<f64>,
    pub sup_derivation_defect: Option<f64>,
    pub sup_linearity_defect: Option<f64>,
    /// Largest control bound `Φ` over the point samples.
    pub phi_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub name: String,
    pub theorem: String,
    pub algebra: String,
    pub verdict: Verdict,
    pub hypothesis_results: Vec<HypothesisCheck>,
    pub conclusion_checks: Vec<ConclusionCheck>,
    pub conclusion_results: ConclusionResults,
    pub h_trace: Vec<TraceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_comparison: Option<GapReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub oracles: Vec<NullspaceResult>,
    /// Conclusion checks were run after a failed hypothesis; the verdict is capped.
    pub forced: bool,
    pub sampling: String,
}

impl StabilityReport {
    pub fn hypotheses_passed(&self) -> bool {
        self.hypothesis_results.iter().all(|c| c.passed)
    }

    pub fn first_failed_hypothesis(&self) -> Option<&HypothesisCheck> {
        self.hypothesis_results.iter().find(|c| !c.passed)
    }

    pub fn hypothesis(&self, name: &str) -> Option<&HypothesisCheck> {
        self.hypothesis_results.iter().find(|c| c.name == name)
    }

    pub fn conclusion(&self, name: &str) -> Option<&ConclusionCheck> {
        self.conclusion_checks.iter().find(|c| c.name == name)
    }
}

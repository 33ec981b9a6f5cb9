//! Experiment configuration: the serialized form, its validation, and the
//! materialised experiment (algebra, map, controls, samples).

use serde::{Deserialize, Serialize};

use crate::algebra::{random_element, Algebra, AlgebraDescriptor, AlgebraFamily, Element, NormKind, ScalarField, C64};
use crate::control::ControlFunction;
use crate::direct::IterationScheme;
use crate::error::{LabError, Result};
use crate::maps::{MapUnderTest, PerturbationKind, PerturbationSpec};
use crate::samples::{mix_seed, SampleSet, SampleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    ThmMain,
    SemiprimeUpgrade,
    Jensen3Stability,
    Jensen3Hyper,
    MixedPrime,
    MixedPrimeLinear,
}

impl Theorem {
    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::ThmMain => "thm-main",
            Theorem::SemiprimeUpgrade => "semiprime-upgrade",
            Theorem::Jensen3Stability => "jensen3-stability",
            Theorem::Jensen3Hyper => "jensen3-hyper",
            Theorem::MixedPrime => "mixed-prime",
            Theorem::MixedPrimeLinear => "mixed-prime-linear",
        }
    }
}

/// A real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    pub fn value(self) -> C64 {
        match self {
            Scalar::Real(r) => C64::new(r, 0.0),
            Scalar::Complex([re, im]) => C64::new(re, im),
        }
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::Real(1.0)
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Real(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    FullMatrix,
    DirectSum,
    UpperTriangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
    #[serde(default = "default_field")]
    pub field: ScalarField,
    #[serde(default)]
    pub norm: NormKind,
}

fn default_field() -> ScalarField {
    ScalarField::Real
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub kind: PerturbationKind,
    #[serde(default, alias = "θ_e", alias = "amplitude")]
    pub theta_e: f64,
    #[serde(default = "one", alias = "ρ")]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            kind: PerturbationKind::None,
            theta_e: 0.0,
            rho: 1.0,
            seed: 0,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    #[serde(default)]
    pub generator_seed: u64,
    #[serde(default = "one")]
    pub generator_scale: f64,
    /// Explicit generator rows; overrides the seeded one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<Vec<Scalar>>>,
    #[serde(default)]
    pub forced_odd: bool,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsConfig {
    #[serde(default = "zero_control", alias = "φ")]
    pub phi: ControlFunction,
    #[serde(default = "zero_control", alias = "ψ")]
    pub psi: ControlFunction,
}

fn zero_control() -> ControlFunction {
    ControlFunction::Zero
}

impl Default for ControlsConfig {
    fn default() -> Self {
        ControlsConfig {
            phi: ControlFunction::Zero,
            psi: ControlFunction::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarsConfig {
    #[serde(default = "default_lambda", alias = "Λ")]
    pub lambda: Vec<Scalar>,
    #[serde(default, alias = "ξ")]
    pub xi: Scalar,
    #[serde(default)]
    pub a: Scalar,
    #[serde(default)]
    pub b: Scalar,
    #[serde(default, rename = "A")]
    pub big_a: Scalar,
    #[serde(default, rename = "B")]
    pub big_b: Scalar,
    #[serde(default, alias = "L", skip_serializing_if = "Option::is_none")]
    pub contraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    /// Arc `{e^{iθ} : 0 ≤ θ ≤ 2π/n₀}` for linearity checks.
    #[serde(default, alias = "n₀", skip_serializing_if = "Option::is_none")]
    pub n0: Option<u32>,
    #[serde(default = "default_arc_grid")]
    pub arc_grid: usize,
    /// Use the `μ`-weighted form of the additive-type defect over the arc.
    #[serde(default, alias = "μ_variant")]
    pub mu_variant: bool,
}

fn default_lambda() -> Vec<Scalar> {
    vec![Scalar::Real(1.0)]
}

fn default_arc_grid() -> usize {
    9
}

impl Default for ScalarsConfig {
    fn default() -> Self {
        ScalarsConfig {
            lambda: default_lambda(),
            xi: Scalar::default(),
            a: Scalar::default(),
            b: Scalar::default(),
            big_a: Scalar::default(),
            big_b: Scalar::default(),
            contraction: None,
            m: None,
            n0: None,
            arc_grid: default_arc_grid(),
            mu_variant: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_tol_rel")]
    pub tol_rel: f64,
    #[serde(default = "default_growth_cap")]
    pub growth_cap: f64,
    #[serde(default = "yes")]
    pub accelerate: bool,
}

fn default_k_max() -> usize {
    200
}
fn default_tol_rel() -> f64 {
    1e-11
}
fn default_growth_cap() -> f64 {
    1e12
}
fn yes() -> bool {
    true
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            k_max: default_k_max(),
            tol_rel: default_tol_rel(),
            growth_cap: default_growth_cap(),
            accelerate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative slack on every hypothesis inequality.
    #[serde(default = "default_slack")]
    pub hypothesis_slack: f64,
    /// Absolute tolerance for conclusion defects and `sup ‖h − H‖`.
    #[serde(default = "default_conclusion")]
    pub conclusion: f64,
    #[serde(default = "default_window_tol")]
    pub window: f64,
    #[serde(default = "default_window_k")]
    pub window_k: usize,
    #[serde(default = "default_series_tol")]
    pub series: f64,
    #[serde(default = "default_series_k_max")]
    pub series_k_max: usize,
    #[serde(default)]
    pub iteration: IterationConfig,
}

fn default_slack() -> f64 {
    1e-9
}
fn default_conclusion() -> f64 {
    1e-10
}
fn default_window_tol() -> f64 {
    1e-8
}
fn default_window_k() -> usize {
    64
}
fn default_series_tol() -> f64 {
    1e-12
}
fn default_series_k_max() -> usize {
    2000
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hypothesis_slack: default_slack(),
            conclusion: default_conclusion(),
            window: default_window_tol(),
            window_k: default_window_k(),
            series: default_series_tol(),
            series_k_max: default_series_k_max(),
            iteration: IterationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub theorem: Theorem,
    pub algebra: AlgebraConfig,
    pub map: MapConfig,
    #[serde(default)]
    pub controls: ControlsConfig,
    #[serde(default)]
    pub scalars: ScalarsConfig,
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A whole config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: u64,
    pub experiments: Vec<ExperimentConfig>,
}

/// Everything a pipeline needs, built from a validated config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub algebra: Algebra,
    pub map: MapUnderTest,
    pub phi: ControlFunction,
    pub psi: ControlFunction,
    pub samples: SampleSet,
    pub scheme: IterationScheme,
    /// `d = ξa + b`.
    pub d: C64,
    pub lambda: Vec<C64>,
    pub arc: Vec<C64>,
}

const RELATION_TOL: f64 = 1e-12;

impl AlgebraConfig {
    pub fn descriptor(&self) -> Result<Algebra> {
        let family = match self.family {
            FamilyName::FullMatrix => AlgebraFamily::FullMatrix {
                n: self.n.ok_or_else(|| LabError::InvalidArgument("full-matrix algebra needs `n`".into()))?,
            },
            FamilyName::UpperTriangular => AlgebraFamily::UpperTriangular {
                n: self
                    .n
                    .ok_or_else(|| LabError::InvalidArgument("upper-triangular algebra needs `n`".into()))?,
            },
            FamilyName::DirectSum => AlgebraFamily::DirectSumOfFullMatrix {
                blocks: self
                    .blocks
                    .clone()
                    .ok_or_else(|| LabError::InvalidArgument("direct-sum algebra needs `blocks`".into()))?,
            },
        };
        AlgebraDescriptor::new(family, self.field, self.norm)
    }
}

/// Points `e^{iθ_j}` with `θ_j` uniform on `[0, 2π/n₀]`.
pub fn arc_grid(n0: u32, grid: usize) -> Result<Vec<C64>> {
    if n0 == 0 {
        return Err(LabError::InvalidArgument("n₀ must be a positive integer".into()));
    }
    if grid < 2 {
        return Err(LabError::InvalidArgument("arc grid needs at least two points".into()));
    }
    let span = 2.0 * std::f64::consts::PI / n0 as f64;
    Ok((0..grid)
        .map(|j| C64::from_polar(1.0, span * j as f64 / (grid - 1) as f64))
        .collect())
}

impl ExperimentConfig {
    fn reject(&self, field: &str, reason: impl Into<String>) -> LabError {
        LabError::rejected(&self.name, field, reason)
    }

    /// Structural checks that need no numerics beyond the descriptor.
    pub fn validate(&self) -> Result<Algebra> {
        if self.name.trim().is_empty() {
            return Err(self.reject("name", "experiment name must be nonempty"));
        }
        let algebra = self
            .algebra
            .descriptor()
            .map_err(|e| self.reject("algebra", e.to_string()))?;
        let flags = algebra.flags();
        for (field, c) in [("controls.phi", &self.controls.phi), ("controls.psi", &self.controls.psi)] {
            c.validate().map_err(|e| self.reject(field, e.to_string()))?;
        }
        let s = &self.scalars;
        let real = algebra.field == ScalarField::Real;
        let all_scalars = s.lambda.iter().chain([&s.xi, &s.a, &s.b, &s.big_a, &s.big_b]);
        if real && all_scalars.clone().any(|v| v.value().im != 0.0) {
            return Err(self.reject("scalars", "complex scalars on a real algebra"));
        }
        if (s.n0.is_some() || s.mu_variant) && real {
            return Err(self.reject("scalars.n0", "the arc T¹_{n₀} needs a complex algebra"));
        }
        if s.mu_variant && s.n0.is_none() {
            return Err(self.reject("scalars.n0", "the μ-variant needs n₀"));
        }
        if let Some(n0) = s.n0 {
            arc_grid(n0, s.arc_grid).map_err(|e| self.reject("scalars.arc_grid", e.to_string()))?;
        }
        let t = &self.tolerances;
        if !(t.hypothesis_slack >= 0.0 && t.conclusion >= 0.0 && t.window > 0.0 && t.series > 0.0) {
            return Err(self.reject("tolerances", "tolerances must be nonnegative"));
        }
        if t.window_k < 4 {
            return Err(self.reject("tolerances.window_k", "window needs at least 4 terms"));
        }
        if !(self.samples.scale > 0.0) {
            return Err(self.reject("samples.scale", "sample scale must be positive"));
        }

        match self.theorem {
            Theorem::ThmMain | Theorem::SemiprimeUpgrade => {
                if s.lambda.is_empty() {
                    return Err(self.reject("scalars.lambda", "Λ must be nonempty"));
                }
                let xi = s.xi.value();
                if xi.norm() == 0.0 {
                    return Err(self.reject("scalars.xi", "ξ must be nonzero"));
                }
                if !s.lambda.iter().any(|l| (l.value() - xi).norm() <= RELATION_TOL) {
                    return Err(self.reject("scalars.xi", "ξ must belong to Λ"));
                }
                if (s.a.value() * s.b.value()).norm() == 0.0 {
                    return Err(self.reject("scalars.a", "ab must be nonzero"));
                }
                let d1 = xi * s.big_a.value() + s.big_b.value();
                let d2 = xi * s.a.value() + s.b.value();
                if (d1 - d2).norm() > RELATION_TOL * (1.0 + d2.norm()) {
                    return Err(self.reject("scalars", format!("ξA + B = {d1} differs from ξa + b = {d2}")));
                }
                if !(d2.norm() > 1.0) {
                    return Err(self.reject(
                        "scalars",
                        format!("d = ξa + b = {d2}: only |d| > 1 is supported by the forward iteration"),
                    ));
                }
                if self.theorem == Theorem::SemiprimeUpgrade && !flags.is_semiprime {
                    return Err(self.reject("algebra", format!("{} is not semiprime", algebra.label())));
                }
            }
            Theorem::Jensen3Stability | Theorem::Jensen3Hyper => {
                if s.contraction.is_none() {
                    return Err(self.reject("scalars.contraction", "the doubling condition needs L"));
                }
                if self.theorem == Theorem::Jensen3Hyper && !flags.is_semiprime {
                    return Err(self.reject("algebra", format!("{} is not semiprime", algebra.label())));
                }
            }
            Theorem::MixedPrime | Theorem::MixedPrimeLinear => {
                match s.m {
                    Some(m) if m != 0 && m % 2 == 0 => {}
                    Some(m) => return Err(self.reject("scalars.m", format!("m must be a nonzero even integer, got {m}"))),
                    None => return Err(self.reject("scalars.m", "m is required")),
                }
                if !flags.is_prime {
                    return Err(self.reject("algebra", format!("{} is not prime", algebra.label())));
                }
                if !flags.has_nontrivial_idempotent {
                    return Err(self.reject("algebra", format!("{} has no nontrivial idempotent", algebra.label())));
                }
                if !self.map.forced_odd {
                    return Err(self.reject("map.forced_odd", "the mixed equation pipeline needs an odd map"));
                }
                if self.theorem == Theorem::MixedPrimeLinear && s.n0.is_none() {
                    return Err(self.reject("scalars.n0", "the linear variant needs n₀"));
                }
            }
        }
        Ok(algebra)
    }

    fn generator(&self, algebra: &Algebra, stream: u64) -> Result<Element> {
        match &self.map.generator {
            Some(rows) => {
                let n = algebra.n();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(self.reject("map.generator", format!("expected {n}×{n} rows")));
                }
                let data = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j].value());
                Element::from_matrix(algebra, data).map_err(|e| self.reject("map.generator", e.to_string()))
            }
            None => random_element(algebra, mix_seed(stream, self.map.generator_seed), self.map.generator_scale)
                .map_err(|e| self.reject("map.generator_scale", e.to_string())),
        }
    }

    fn perturbation(&self, algebra: &Algebra, stream: u64) -> Result<PerturbationSpec> {
        let p = &self.map.perturbation;
        let seed = mix_seed(stream, p.seed ^ 0x5eed);
        let direction = || -> Result<Element> {
            let d = random_element(algebra, seed, 1.0)?;
            let n = d.norm()?;
            Ok(d.scale_real(1.0 / n))
        };
        let spec = match p.kind {
            PerturbationKind::None => Ok(PerturbationSpec::none(algebra)),
            PerturbationKind::ConstantOffset => PerturbationSpec::constant_offset(direction()?, p.theta_e),
            PerturbationKind::PowerRadial => PerturbationSpec::power_radial(direction()?, p.theta_e, p.rho),
            PerturbationKind::ClippedRandom => PerturbationSpec::clipped_random(algebra, p.theta_e, p.rho, seed),
        };
        spec.map_err(|e| self.reject("map.perturbation", e.to_string()))
    }

    /// Validates and materialises the experiment. `stream` is the per-experiment
    /// substream seed every configured seed is mixed with.
    pub fn build(&self, stream: u64) -> Result<Experiment> {
        let algebra = self.validate()?;
        let map = MapUnderTest::inner(self.generator(&algebra, stream)?)
            .with_perturbation(self.perturbation(&algebra, stream)?)?
            .forced_odd(self.map.forced_odd);
        let sample_spec = SampleSpec {
            seed: mix_seed(stream, self.samples.seed),
            ..self.samples
        };
        let samples = SampleSet::build(&algebra, &sample_spec)?;
        let s = &self.scalars;
        let d = match self.theorem {
            Theorem::ThmMain | Theorem::SemiprimeUpgrade => s.xi.value() * s.a.value() + s.b.value(),
            _ => C64::new(2.0, 0.0),
        };
        let it = &self.tolerances.iteration;
        let scheme = IterationScheme {
            d,
            k_max: it.k_max,
            tol_rel: it.tol_rel,
            growth_cap: it.growth_cap,
            accelerate: it.accelerate,
        };
        scheme.validate().map_err(|e| self.reject("tolerances.iteration", e.to_string()))?;
        let arc = match s.n0 {
            Some(n0) => arc_grid(n0, s.arc_grid)?,
            None => Vec::new(),
        };
        Ok(Experiment {
            algebra,
            map,
            phi: self.controls.phi,
            psi: self.controls.psi,
            samples,
            scheme,
            d,
            lambda: s.lambda.iter().map(|l| l.value()).collect(),
            arc,
            config: self.clone(),
        })
    }

    /// Minimal config for tests and presets: exact map, zero controls.
    pub fn skeleton(name: &str, theorem: Theorem, algebra: AlgebraConfig) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            theorem,
            algebra,
            map: MapConfig {
                generator_seed: 1,
                generator_scale: 1.0,
                generator: None,
                forced_odd: false,
                perturbation: PerturbationConfig::default(),
            },
            controls: ControlsConfig::default(),
            scalars: ScalarsConfig::default(),
            samples: SampleSpec::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl AlgebraConfig {
    pub fn full(n: usize, field: ScalarField) -> Self {
        AlgebraConfig {
            family: FamilyName::FullMatrix,
            n: Some(n),
            blocks: None,
            field,
            norm: NormKind::default(),
        }
    }
}

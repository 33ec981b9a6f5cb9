//! The direct method: `H(x) = lim d^{-k}·h(d^k x)`, the generic fixed-point
//! iteration `H = lim fⁿ∘h∘gⁿ`, control series `Φ`, and windowed surrogates
//! for the `liminf` conditions.

use serde::Serialize;

use crate::algebra::{Element, C64};
use crate::control::ControlFunction;
use crate::error::{LabError, Result};
use crate::maps::AlgebraMap;

/// Consecutive small differences required before declaring convergence.
pub const STAGNATION_RUN: usize = 3;
/// Consecutive term ratios `≥ 1` that make a series diverge.
pub const DIVERGENCE_RUN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationScheme {
    #[serde(with = "crate::defect::complex_pair")]
    pub d: C64,
    pub k_max: usize,
    pub tol_rel: f64,
    /// Abort once `‖d^k x‖` exceeds this.
    pub growth_cap: f64,
    /// Extrapolate geometric tails once the ratio of consecutive differences settles.
    pub accelerate: bool,
}

impl Default for IterationScheme {
    fn default() -> Self {
        IterationScheme {
            d: C64::new(2.0, 0.0),
            k_max: 200,
            tol_rel: 1e-11,
            growth_cap: 1e12,
            accelerate: true,
        }
    }
}

impl IterationScheme {
    pub fn new(d: C64) -> Result<Self> {
        let scheme = IterationScheme { d, ..Default::default() };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.norm() > 1.0) || !self.d.norm().is_finite() {
            return Err(LabError::Unsupported(format!(
                "only |d| > 1 is supported by the forward iteration, got d = {}",
                self.d
            )));
        }
        if !(self.tol_rel >= 0.0) || !(self.growth_cap > 0.0) {
            return Err(LabError::InvalidArgument("tolerance and growth cap must be positive".into()));
        }
        Ok(())
    }

    pub fn with_accelerate(mut self, on: bool) -> Self {
        self.accelerate = on;
        self
    }

    pub fn with_tol(mut self, tol_rel: f64) -> Self {
        self.tol_rel = tol_rel;
        self
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn with_growth_cap(mut self, cap: f64) -> Self {
        self.growth_cap = cap;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationStatus {
    Converged,
    KMaxReached,
    /// `‖d^k x‖` crossed the growth cap before the iterates settled.
    GrowthCapReached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// `(k, ‖H_k(x) − H_{k−1}(x)‖)` for the raw iterates.
    pub iterates_kept: Vec<(usize, f64)>,
    /// `(k, difference)` of the extrapolated sequence; empty without acceleration.
    pub accelerated: Vec<(usize, f64)>,
    pub converged: bool,
    pub status: IterationStatus,
    /// First index of the run of small differences that ended the iteration.
    pub k_stop: usize,
    /// Last index computed.
    pub k_last: usize,
    #[serde(skip)]
    pub limit_value: Element,
    pub limit_norm: f64,
    pub tail_bound: f64,
    pub observed_ratio: Option<f64>,
}

impl ConvergenceReport {
    /// The difference sequence the stopping rule was applied to.
    pub fn decisive_differences(&self) -> &[(usize, f64)] {
        if self.accelerated.is_empty() {
            &self.iterates_kept
        } else {
            &self.accelerated
        }
    }
}

fn geometric_tail(last: f64, ratio: Option<f64>) -> f64 {
    if last == 0.0 {
        return 0.0;
    }
    match ratio {
        Some(r) if r < 1.0 => last * r / (1.0 - r),
        _ => f64::INFINITY,
    }
}

/// Runs `H_k(x) = d^{−k}·h(d^k x)` until three consecutive relative
/// differences fall below `tol_rel`, `k_max` is reached, or `‖d^k x‖` passes
/// the growth cap.
pub fn hyers_limit<M: AlgebraMap + ?Sized>(h: &M, x: &Element, scheme: &IterationScheme) -> Result<ConvergenceReport> {
    scheme.validate()?;
    let nx = x.norm()?;
    let h0 = h.apply(x)?;
    if !h0.is_finite() {
        return Err(LabError::InvalidEvaluation("h(x) is not finite".into()));
    }
    let mut raw_prev = h0.clone();
    let mut tracked_prev = h0;
    let mut raw_diffs: Vec<(usize, f64)> = Vec::new();
    let mut acc_diffs: Vec<(usize, f64)> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut run = 0usize;
    let mut dk = C64::new(1.0, 0.0);
    let mut status = IterationStatus::KMaxReached;
    let mut k_last = 0;

    for k in 1..=scheme.k_max {
        dk *= scheme.d;
        if nx * dk.norm() > scheme.growth_cap {
            status = IterationStatus::GrowthCapReached;
            break;
        }
        let hk = h.apply(&x.scale(dk))?.scale(dk.inv());
        if !hk.is_finite() {
            return Err(LabError::InvalidEvaluation(format!("iterate {k} is not finite")));
        }
        let raw = (&hk - &raw_prev).norm()?;
        if let Some(&(_, prev)) = raw_diffs.last() {
            if prev > 0.0 && raw > 0.0 {
                ratios.push(raw / prev);
            }
        }
        raw_diffs.push((k, raw));

        let tracked = if scheme.accelerate {
            match settled_ratio(&ratios) {
                Some(r) if raw > 0.0 => &hk + &(&hk - &raw_prev).scale_real(r / (1.0 - r)),
                _ => hk.clone(),
            }
        } else {
            hk.clone()
        };
        let tracked_diff = (&tracked - &tracked_prev).norm()?;
        if scheme.accelerate {
            acc_diffs.push((k, tracked_diff));
        }
        let small = tracked_diff <= scheme.tol_rel * (1.0 + tracked.norm()?);
        run = if small { run + 1 } else { 0 };
        raw_prev = hk;
        tracked_prev = tracked;
        k_last = k;
        if run >= STAGNATION_RUN {
            status = IterationStatus::Converged;
            break;
        }
    }

    let observed_ratio = ratios.last().copied();
    let decisive = if scheme.accelerate { &acc_diffs } else { &raw_diffs };
    let last = decisive.last().map(|&(_, v)| v).unwrap_or(0.0);
    let tail_bound = geometric_tail(last, observed_ratio);
    let converged = status == IterationStatus::Converged;
    let k_stop = if converged { k_last + 1 - STAGNATION_RUN } else { k_last };
    let limit_norm = tracked_prev.norm()?;
    Ok(ConvergenceReport {
        iterates_kept: raw_diffs,
        accelerated: acc_diffs,
        converged,
        status,
        k_stop,
        k_last,
        limit_value: tracked_prev,
        limit_norm,
        tail_bound,
        observed_ratio,
    })
}

/// Common ratio of the last two difference ratios when they agree to 1e-3.
fn settled_ratio(ratios: &[f64]) -> Option<f64> {
    if ratios.len() < 2 {
        return None;
    }
    let r = ratios[ratios.len() - 1];
    let p = ratios[ratios.len() - 2];
    if r > 0.0 && r < 1.0 && (r - p).abs() <= 1e-3 * r {
        Some(r)
    } else {
        None
    }
}

/// `H` evaluated lazily through [`hyers_limit`]; fails when a point does not settle.
pub struct LimitMap<'a, M: AlgebraMap + ?Sized> {
    pub base: &'a M,
    pub scheme: IterationScheme,
}

impl<'a, M: AlgebraMap + ?Sized> LimitMap<'a, M> {
    pub fn new(base: &'a M, scheme: IterationScheme) -> Self {
        LimitMap { base, scheme }
    }
}

impl<M: AlgebraMap + ?Sized> AlgebraMap for LimitMap<'_, M> {
    fn apply(&self, x: &Element) -> Result<Element> {
        let report = hyers_limit(self.base, x, &self.scheme)?;
        if report.converged {
            Ok(report.limit_value)
        } else {
            Err(LabError::Diverged {
                norm: x.norm()?,
                reason: format!("{:?} after k = {}", report.status, report.k_last),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesStatus {
    Converged,
    /// Term ratios stayed at or above one, or the closed-form exponent says so.
    Diverged,
    /// `k_max` reached with the tail still above tolerance.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesOutcome {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
    pub status: SeriesStatus,
    pub observed_ratio: Option<f64>,
    pub analytic_ratio: Option<f64>,
}

impl SeriesOutcome {
    pub fn converged(&self) -> bool {
        self.status == SeriesStatus::Converged
    }

    /// Partial sum plus tail bound: an upper bound on the full series.
    pub fn upper_bound(&self) -> f64 {
        self.value + self.tail_bound
    }
}

/// Sums nonnegative terms until the geometric tail estimate drops below
/// `tol·(1 + sum)`. When `analytic_ratio` bounds the term ratio from above the
/// tail estimate is rigorous.
pub fn sum_nonnegative_series(
    mut term: impl FnMut(usize) -> f64,
    tol: f64,
    k_max: usize,
    analytic_ratio: Option<f64>,
) -> SeriesOutcome {
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    let mut up_run = 0;
    let mut observed: Option<f64> = None;
    let mut zero_run = 0;
    let outcome = |value, tail_bound, terms_used, status, observed_ratio| SeriesOutcome {
        value,
        tail_bound,
        terms_used,
        status,
        observed_ratio,
        analytic_ratio,
    };
    for k in 0..k_max {
        let t = term(k);
        if !t.is_finite() {
            return outcome(f64::INFINITY, f64::INFINITY, k + 1, SeriesStatus::Diverged, observed);
        }
        sum += t;
        if t == 0.0 {
            zero_run += 1;
            if zero_run >= STAGNATION_RUN && analytic_ratio.map_or(true, |r| r < 1.0) && observed.is_none() {
                return outcome(sum, 0.0, k + 1, SeriesStatus::Converged, observed);
            }
        } else {
            zero_run = 0;
        }
        if let Some(p) = prev {
            if p > 0.0 {
                let r = t / p;
                observed = Some(r);
                if r >= 1.0 {
                    up_run += 1;
                    if up_run >= DIVERGENCE_RUN {
                        return outcome(sum, f64::INFINITY, k + 1, SeriesStatus::Diverged, observed);
                    }
                } else {
                    up_run = 0;
                }
            }
        }
        prev = Some(t);
        if k >= 2 && t > 0.0 {
            let r = match (observed, analytic_ratio) {
                (Some(o), Some(a)) => Some(o.max(a)),
                (o, a) => o.or(a),
            };
            let tail = geometric_tail(t, r);
            if tail <= tol * (1.0 + sum) {
                return outcome(sum, tail, k + 1, SeriesStatus::Converged, observed);
            }
        }
    }
    let tail = geometric_tail(prev.unwrap_or(0.0), observed);
    outcome(sum, tail, k_max, SeriesStatus::Exhausted, observed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesVariant {
    /// `Σ_{k≥0} |d|^{−k−1} φ(d^k x, d^k x)`.
    Diagonal,
    /// `Σ_{k≥0} |d|^{−k} φ(0, d^k x)`.
    ZeroFirst,
}

pub fn phi_series_norm(
    phi: &ControlFunction,
    d_abs: f64,
    nx: f64,
    variant: SeriesVariant,
    tol: f64,
    k_max: usize,
) -> Result<SeriesOutcome> {
    if !(d_abs > 1.0) {
        return Err(LabError::Unsupported(format!("series needs |d| > 1, got {d_abs}")));
    }
    let ld = d_abs.ln();
    let x_zero = nx == 0.0;
    let exponent = match variant {
        SeriesVariant::Diagonal => phi.growth_exponent(x_zero, x_zero, true, true),
        SeriesVariant::ZeroFirst => phi.growth_exponent(true, x_zero, false, true),
    };
    let analytic_ratio = exponent.map(|e| d_abs.powf(e - 1.0));
    if exponent.is_none() {
        return Ok(SeriesOutcome {
            value: 0.0,
            tail_bound: 0.0,
            terms_used: 0,
            status: SeriesStatus::Converged,
            observed_ratio: None,
            analytic_ratio: None,
        });
    }
    let term = |k: usize| {
        let kf = k as f64;
        match variant {
            SeriesVariant::Diagonal => phi.eval_scaled(nx, nx, kf * ld, kf * ld, -(kf + 1.0) * ld),
            SeriesVariant::ZeroFirst => phi.eval_scaled(0.0, nx, 0.0, kf * ld, -kf * ld),
        }
    };
    let mut out = sum_nonnegative_series(term, tol, k_max, analytic_ratio);
    if analytic_ratio.is_some_and(|r| r >= 1.0) {
        out.status = SeriesStatus::Diverged;
        out.tail_bound = f64::INFINITY;
    }
    Ok(out)
}

/// The control series `Φ(x)` in either of its two forms.
pub fn phi_series(
    phi: &ControlFunction,
    d: C64,
    x: &Element,
    variant: SeriesVariant,
    tol: f64,
    k_max: usize,
) -> Result<SeriesOutcome> {
    phi_series_norm(phi, d.norm(), x.norm()?, variant, tol, k_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowScaling {
    /// `φ(d^k x, d^k y)`.
    Both,
    /// `φ(d^k x, y)`.
    FirstOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSpec {
    pub control: ControlFunction,
    pub d_abs: f64,
    /// `w` in the weight `|d|^{−wk}`.
    pub weight_exponent: u32,
    pub scaling: WindowScaling,
    pub x_norm: f64,
    pub y_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowVerdict {
    pub pass: bool,
    pub numeric_pass: bool,
    /// Closed-form test `e − w < 0` on the leading growth exponent.
    pub analytic_pass: Option<bool>,
    pub analytic_exponent: Option<f64>,
    pub window_min: f64,
    /// Least-squares slope of `log₂ t_k` over the window.
    pub slope: f64,
    pub sequence: Vec<f64>,
}

/// Slope per step below which a positive window is read as geometric decay.
pub const MIN_DECAY_SLOPE: f64 = -1e-2;

fn window_stats(values: &[f64]) -> (f64, f64) {
    let half = values.len() / 2;
    let window = &values[half..];
    let min = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let pts: Vec<(f64, f64)> = window
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(i, v)| (i as f64, v.log2()))
        .collect();
    if pts.len() < 2 {
        return (min, if window.iter().any(|v| !v.is_finite()) { f64::INFINITY } else { 0.0 });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (min, sxy / sxx)
}

/// Windowed surrogate for `liminf_k t_k = 0` on a precomputed sequence:
/// passes when the minimum over the last half is below `tol` and the
/// log-trend there is not increasing.
pub fn liminf_window_values(values: &[f64], tol: f64) -> WindowVerdict {
    let (window_min, slope) = if values.is_empty() { (0.0, 0.0) } else { window_stats(values) };
    let numeric_pass = window_min <= tol && slope <= 1e-9;
    WindowVerdict {
        pass: numeric_pass,
        numeric_pass,
        analytic_pass: None,
        analytic_exponent: None,
        window_min,
        slope,
        sequence: values.to_vec(),
    }
}

/// Evaluates `t_k = |d|^{−wk}·φ(…)` for `k = 0..=window` and combines the
/// windowed surrogate with the closed-form exponent test.
pub fn liminf_window_check(spec: &WindowSpec, window: usize, tol: f64) -> WindowVerdict {
    let ld = spec.d_abs.ln();
    let w = spec.weight_exponent as f64;
    let sequence: Vec<f64> = (0..=window)
        .map(|k| {
            let kf = k as f64;
            let sy = match spec.scaling {
                WindowScaling::Both => kf * ld,
                WindowScaling::FirstOnly => 0.0,
            };
            spec.control.eval_scaled(spec.x_norm, spec.y_norm, kf * ld, sy, -w * kf * ld)
        })
        .collect();
    let exponent = spec.control.growth_exponent(
        spec.x_norm == 0.0,
        spec.y_norm == 0.0,
        true,
        spec.scaling == WindowScaling::Both,
    );
    let mut verdict = liminf_window_values(&sequence, tol);
    let decaying = verdict.window_min <= tol || verdict.slope <= MIN_DECAY_SLOPE;
    match exponent {
        None => {
            verdict.analytic_pass = Some(true);
            verdict.pass = sequence.iter().all(|v| *v == 0.0) || verdict.numeric_pass;
        }
        Some(e) => {
            let rel = e - w;
            let analytic = rel < 0.0 && sequence.iter().all(|v| v.is_finite());
            verdict.analytic_exponent = Some(rel);
            verdict.analytic_pass = Some(analytic);
            verdict.pass = analytic && decaying;
        }
    }
    verdict
}

/// A concrete instance of the fixed-point setting: `h: S → Y`, a contraction
/// `f: Y → Y` with constant `ε`, `g: S → S`, and the control `φ: S → [0, ∞)`.
pub trait FortiInstance: Sync {
    type Point: Clone;
    type Value: Clone;

    fn h(&self, x: &Self::Point) -> Result<Self::Value>;
    fn f(&self, y: &Self::Value) -> Self::Value;
    fn g(&self, x: &Self::Point) -> Self::Point;
    fn phi(&self, x: &Self::Point) -> Result<f64>;
    fn epsilon(&self) -> f64;
    fn dist(&self, a: &Self::Value, b: &Self::Value) -> Result<f64>;
    /// Size of a value, for relative stopping tolerances.
    fn magnitude(&self, y: &Self::Value) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FortiOptions {
    pub k_max: usize,
    pub tol_rel: f64,
    pub series_tol: f64,
}

impl Default for FortiOptions {
    fn default() -> Self {
        FortiOptions {
            k_max: 200,
            tol_rel: 1e-11,
            series_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FortiLimit<Y> {
    pub limit: Y,
    pub differences: Vec<f64>,
    pub converged: bool,
    pub k_last: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FortiOutcome<Y> {
    pub limit: FortiLimit<Y>,
    /// Truncated `Φ(x) = Σ εⁿ φ(gⁿ x)`.
    pub phi_bound: SeriesOutcome,
    /// `dist(f(H(g(x))), H(x))`.
    pub fixed_point_residual: f64,
    /// A diverging `Φ` series means the instance violates the hypotheses.
    pub hypothesis_violated: bool,
}

/// `lim_n (fⁿ∘h∘gⁿ)(x)` with the same stagnation rule as [`hyers_limit`].
pub fn forti_limit<I: FortiInstance>(inst: &I, x: &I::Point, opts: &FortiOptions) -> Result<FortiLimit<I::Value>> {
    let mut prev = inst.h(x)?;
    let mut gx = x.clone();
    let mut differences = Vec::new();
    let mut run = 0;
    let mut k_last = 0;
    for n in 1..=opts.k_max {
        gx = inst.g(&gx);
        let mut y = inst.h(&gx)?;
        for _ in 0..n {
            y = inst.f(&y);
        }
        let diff = inst.dist(&y, &prev)?;
        if !diff.is_finite() {
            return Err(LabError::InvalidEvaluation(format!("iterate {n} is not finite")));
        }
        differences.push(diff);
        run = if diff <= opts.tol_rel * (1.0 + inst.magnitude(&y)?) { run + 1 } else { 0 };
        prev = y;
        k_last = n;
        if run >= STAGNATION_RUN {
            return Ok(FortiLimit {
                limit: prev,
                differences,
                converged: true,
                k_last,
            });
        }
    }
    Ok(FortiLimit {
        limit: prev,
        differences,
        converged: false,
        k_last,
    })
}

pub fn forti_iterate<I: FortiInstance>(inst: &I, x: &I::Point, opts: &FortiOptions) -> Result<FortiOutcome<I::Value>> {
    let eps = inst.epsilon();
    if !(eps >= 0.0) {
        return Err(LabError::InvalidArgument(format!("ε must be nonnegative, got {eps}")));
    }
    let limit = forti_limit(inst, x, opts)?;
    let at_gx = forti_limit(inst, &inst.g(x), opts)?;
    let residual = inst.dist(&inst.f(&at_gx.limit), &limit.limit)?;

    let mut gx = x.clone();
    let mut weight = 1.0;
    let mut failure = None;
    let phi_bound = sum_nonnegative_series(
        |k| {
            if k > 0 {
                gx = inst.g(&gx);
                weight *= eps;
            }
            match inst.phi(&gx) {
                Ok(v) => weight * v,
                Err(e) => {
                    failure = Some(e);
                    f64::NAN
                }
            }
        },
        opts.series_tol,
        opts.k_max.max(64) * 8,
        None,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(FortiOutcome {
        hypothesis_violated: phi_bound.status != SeriesStatus::Converged,
        limit,
        phi_bound,
        fixed_point_residual: residual,
    })
}

/// The matrix instance `f(y) = y/d`, `g(x) = dx`, `φ_L(x) = |d|^{−1}φ(x, x)`, `ε = 1/|d|`.
pub struct MatrixForti<'a, M: AlgebraMap + ?Sized> {
    pub map: &'a M,
    pub d: C64,
    pub control: ControlFunction,
}

impl<M: AlgebraMap + ?Sized> FortiInstance for MatrixForti<'_, M> {
    type Point = Element;
    type Value = Element;

    fn h(&self, x: &Element) -> Result<Element> {
        self.map.apply(x)
    }

    fn f(&self, y: &Element) -> Element {
        y.scale(self.d.inv())
    }

    fn g(&self, x: &Element) -> Element {
        x.scale(self.d)
    }

    fn phi(&self, x: &Element) -> Result<f64> {
        let n = x.norm()?;
        Ok(self.control.eval_norms(n, n) / self.d.norm())
    }

    fn epsilon(&self) -> f64 {
        1.0 / self.d.norm()
    }

    fn dist(&self, a: &Element, b: &Element) -> Result<f64> {
        (a - b).norm()
    }

    fn magnitude(&self, y: &Element) -> Result<f64> {
        y.norm()
    }
}

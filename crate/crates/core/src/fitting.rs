//! Linear-algebra oracles: nearest inner derivation, the dimension of the
//! space of linear maps satisfying the triple (or derivation) identity, and
//! pointwise Hyers–Ulam gaps against a control bound.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{basis, random_element, Algebra, AlgebraDescriptor, Element, ScalarField, C64};
use crate::control::ControlFunction;
use crate::direct::{phi_series_norm, SeriesVariant};
use crate::error::{LabError, Result};
use crate::maps::{inner_derivation, AlgebraMap, FnMap};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    #[serde(skip)]
    pub generator: Element,
    pub generator_rows: Vec<Vec<[f64; 2]>>,
    pub residual_per_basis: Vec<f64>,
    pub sup_gap: f64,
    pub trace_abs: f64,
}

fn vec_of(x: &Element) -> impl Iterator<Item = C64> + '_ {
    // Row-major, matching the basis order.
    let n = x.n();
    (0..n).flat_map(move |i| (0..n).map(move |j| x.data()[(i, j)]))
}

/// Least-squares `a` with `trace(a) = 0` minimising `Σ_i ‖h(E_i) − [a, E_i]‖²`.
pub fn fit_inner_derivation<M: AlgebraMap + ?Sized>(h: &M, algebra: &Algebra) -> Result<FitResult> {
    if !algebra.is_full_matrix() {
        return Err(LabError::Unsupported(format!(
            "inner-derivation fit needs a full matrix algebra, got {}",
            algebra.label()
        )));
    }
    let n = algebra.n();
    let n2 = n * n;
    let units = basis(algebra);
    let images: Vec<Element> = units.iter().map(|e| h.apply(e)).collect::<Result<_>>()?;

    // Columns: the unknown entry a_pq; rows: blocks vec([E_pq, E_i]) then a trace row.
    let rows = n2 * n2 + 1;
    let mut system = DMatrix::<C64>::zeros(rows, n2);
    for (col, epq) in units.iter().enumerate() {
        for (i, ei) in units.iter().enumerate() {
            for (r, v) in vec_of(&inner_derivation(epq, ei)).enumerate() {
                system[(i * n2 + r, col)] = v;
            }
        }
    }
    for k in 0..n {
        system[(rows - 1, k * n + k)] = C64::new(1.0, 0.0);
    }
    let mut rhs = DMatrix::<C64>::zeros(rows, 1);
    for (i, img) in images.iter().enumerate() {
        for (r, v) in vec_of(img).enumerate() {
            rhs[(i * n2 + r, 0)] = v;
        }
    }

    let svd = system.svd(true, true);
    let smax = svd.singular_values.max();
    let floor = 1e-10 * smax;
    let deficient = svd.singular_values.iter().filter(|s| **s <= floor).count();
    if deficient > 0 {
        return Err(LabError::NumericDegeneracy(format!(
            "commutator system has {deficient} null directions beyond the scalar kernel"
        )));
    }
    let sol = svd
        .solve(&rhs, floor)
        .map_err(|e| LabError::NumericDegeneracy(e.to_string()))?;
    let mut a = DMatrix::<C64>::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let mut v = sol[(p * n + q, 0)];
            if algebra.field == ScalarField::Real {
                v.im = 0.0;
            }
            a[(p, q)] = v;
        }
    }
    let generator = Element::from_matrix(algebra, a)?;
    let residual_per_basis = units
        .iter()
        .zip(&images)
        .map(|(e, img)| (img - &inner_derivation(&generator, e)).norm())
        .collect::<Result<Vec<_>>>()?;
    let sup_gap = residual_per_basis.iter().cloned().fold(0.0, f64::max);
    Ok(FitResult {
        generator_rows: generator.to_rows(),
        trace_abs: generator.trace().norm(),
        generator,
        residual_per_basis,
        sup_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityKernel {
    /// `L(xyx) − L(x)yx − xL(y)x − xyL(x)`.
    JordanTriple,
    /// `L(xy) − L(x)y − xL(y)`.
    Derivation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullspaceResult {
    pub n: usize,
    pub kernel: IdentityKernel,
    pub dimension: usize,
    pub expected: usize,
    pub threshold: f64,
    pub singular_value_gap: f64,
    pub smallest_kept: f64,
    pub largest_discarded: f64,
    pub rows: usize,
    pub inconclusive: bool,
}

impl NullspaceResult {
    pub fn matches_expected(&self) -> bool {
        !self.inconclusive && self.dimension == self.expected
    }
}

pub const DEFAULT_TOL_RANK: f64 = 1e-8;

/// Linear map given by an `n² × n²` matrix acting on row-major coordinates.
fn apply_linear(l: &DMatrix<f64>, x: &Element) -> Element {
    let n = x.n();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (col, v) in vec_of(x).enumerate() {
        if v == C64::new(0.0, 0.0) {
            continue;
        }
        for row in 0..n * n {
            let w = l[(row, col)];
            if w != 0.0 {
                out[(row / n, row % n)] += v * w;
            }
        }
    }
    Element::from_matrix(x.algebra(), out).expect("linear image stays in M_n")
}

/// Numeric dimension of the space of real-linear `L: M_n → M_n` satisfying
/// the chosen identity on `sample_pairs` seeded random pairs.
pub fn identity_nullspace_dim(
    n: usize,
    kernel: IdentityKernel,
    sample_pairs: usize,
    seed: u64,
    tol_rank: f64,
) -> Result<NullspaceResult> {
    if !(1..=4).contains(&n) {
        return Err(LabError::Unsupported(format!("nullspace oracle supports n ≤ 4, got {n}")));
    }
    let needed = 3 * n.pow(4);
    if sample_pairs < needed {
        return Err(LabError::InvalidArgument(format!(
            "need at least 3·n⁴ = {needed} pairs, got {sample_pairs}"
        )));
    }
    let algebra = AlgebraDescriptor::full_matrix(n, ScalarField::Real)?;
    let n2 = n * n;
    let unknowns = n2 * n2;
    let pairs: Vec<(Element, Element)> = (0..sample_pairs as u64)
        .map(|i| {
            let x = random_element(&algebra, seed.wrapping_add(2 * i), 1.0)?;
            let y = random_element(&algebra, seed.wrapping_add(2 * i + 1), 1.0)?;
            Ok((x, y))
        })
        .collect::<Result<_>>()?;

    // Column (p, q) holds the defect of the single-entry map e_p e_qᵀ on every pair.
    let columns: Vec<Vec<f64>> = (0..unknowns)
        .into_par_iter()
        .map(|idx| {
            let mut l = DMatrix::<f64>::zeros(n2, n2);
            l[(idx / n2, idx % n2)] = 1.0;
            let map = FnMap(|x: &Element| Ok(apply_linear(&l, x)));
            let mut col = Vec::with_capacity(pairs.len() * n2);
            for (x, y) in &pairs {
                let d = match kernel {
                    IdentityKernel::JordanTriple => crate::defect::jordan_triple_defect(&map, x, y),
                    IdentityKernel::Derivation => crate::defect::derivation_defect(&map, x, y),
                }
                .expect("same algebra");
                col.extend(vec_of(&d).map(|z| z.re));
            }
            col
        })
        .collect();
    let rows = pairs.len() * n2;
    let system = DMatrix::<f64>::from_fn(rows, unknowns, |r, c| columns[c][r]);
    let sv = system.singular_values();
    let mut values: Vec<f64> = sv.iter().cloned().collect();
    values.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    let smax = values.first().cloned().unwrap_or(0.0);
    let threshold = tol_rank * smax;
    let rank = values.iter().filter(|s| **s > threshold).count();
    let smallest_kept = if rank > 0 { values[rank - 1] } else { 0.0 };
    let largest_discarded = values.get(rank).cloned().unwrap_or(0.0);
    let gap = smallest_kept - largest_discarded;
    Ok(NullspaceResult {
        n,
        kernel,
        dimension: unknowns - rank,
        expected: n2 - 1,
        threshold,
        singular_value_gap: gap,
        smallest_kept,
        largest_discarded,
        rows,
        inconclusive: gap < 1e3 * threshold,
    })
}

/// Nullspace oracle for the triple identity on `M_n(ℝ)`.
pub fn jordan_triple_nullspace_dim(
    algebra: &AlgebraDescriptor,
    sample_pairs: usize,
    seed: u64,
    tol_rank: f64,
) -> Result<NullspaceResult> {
    if !algebra.is_full_matrix() {
        return Err(LabError::Unsupported(format!(
            "nullspace oracle needs a full matrix algebra, got {}",
            algebra.label()
        )));
    }
    identity_nullspace_dim(algebra.n(), IdentityKernel::JordanTriple, sample_pairs, seed, tol_rank)
}

/// Same oracle built from the derivation identity.
pub fn derivation_nullspace_dim(
    algebra: &AlgebraDescriptor,
    sample_pairs: usize,
    seed: u64,
    tol_rank: f64,
) -> Result<NullspaceResult> {
    if !algebra.is_full_matrix() {
        return Err(LabError::Unsupported(format!(
            "nullspace oracle needs a full matrix algebra, got {}",
            algebra.label()
        )));
    }
    identity_nullspace_dim(algebra.n(), IdentityKernel::Derivation, sample_pairs, seed, tol_rank)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "form")]
pub enum BoundForm {
    /// `Σ_k |d|^{−k−1} φ(d^k x, d^k x)` (partial sum plus tail bound).
    Series { d_abs: f64 },
    /// `(φ(x/2,0) + φ(−x/2,0) + φ(x/2,−x/2) + φ(−x/3,2x/3)) / (2 − 2L)`.
    FourTerm { contraction: f64 },
    /// `Σ_k 2^{−k} φ(0, 2^k x) / (2m²)`.
    ZeroFirst { m: i64 },
}

pub const SERIES_TOL: f64 = 1e-12;
pub const SERIES_K_MAX: usize = 4000;

impl BoundForm {
    pub fn evaluate(&self, phi: &ControlFunction, x: &Element) -> Result<f64> {
        let nx = x.norm()?;
        match *self {
            BoundForm::Series { d_abs } => {
                let s = phi_series_norm(phi, d_abs, nx, SeriesVariant::Diagonal, SERIES_TOL, SERIES_K_MAX)?;
                Ok(if s.converged() { s.upper_bound() } else { f64::INFINITY })
            }
            BoundForm::FourTerm { contraction } => Ok(four_term_phi(phi, nx) / (2.0 - 2.0 * contraction)),
            BoundForm::ZeroFirst { m } => {
                let s = phi_series_norm(phi, 2.0, nx, SeriesVariant::ZeroFirst, SERIES_TOL, SERIES_K_MAX)?;
                let total = if s.converged() { s.upper_bound() } else { f64::INFINITY };
                Ok(total / (2.0 * (m * m) as f64))
            }
        }
    }
}

/// `φ(x/2,0) + φ(−x/2,0) + φ(x/2,−x/2) + φ(−x/3,2x/3)`, from `‖x‖` alone.
pub fn four_term_phi(phi: &ControlFunction, nx: f64) -> f64 {
    let h = nx / 2.0;
    phi.eval_norms(h, 0.0) + phi.eval_norms(h, 0.0) + phi.eval_norms(h, h) + phi.eval_norms(nx / 3.0, 2.0 * nx / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSample {
    pub x_norm: f64,
    pub gap: f64,
    pub bound: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub form: BoundForm,
    pub samples: Vec<GapSample>,
    pub all_within: bool,
    pub worst_ratio: f64,
}

pub const GAP_SLACK: f64 = 1e-9;

/// `‖h(x) − H(x)‖` against the chosen bound at every sample.
pub fn hyers_ulam_gap<M: AlgebraMap + ?Sized, L: AlgebraMap + ?Sized>(
    h: &M,
    limit: &L,
    phi: &ControlFunction,
    form: BoundForm,
    samples: &[Element],
) -> Result<GapReport> {
    let rows: Vec<GapSample> = samples
        .par_iter()
        .map(|x| {
            let gap = (&h.apply(x)? - &limit.apply(x)?).norm()?;
            let bound = form.evaluate(phi, x)?;
            Ok(GapSample {
                x_norm: x.norm()?,
                gap,
                bound,
                within: gap <= bound * (1.0 + GAP_SLACK),
            })
        })
        .collect::<Result<_>>()?;
    let worst_ratio = rows
        .iter()
        .map(|r| if r.gap == 0.0 { 0.0 } else { r.gap / r.bound })
        .fold(0.0, f64::max);
    Ok(GapReport {
        form,
        all_within: rows.iter().all(|r| r.within),
        samples: rows,
        worst_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct::{IterationScheme, LimitMap};
    use crate::maps::{MapUnderTest, PerturbationSpec};

    fn trace_free(alg: &Algebra, seed: u64) -> Element {
        let a = random_element(alg, seed, 1.0).unwrap();
        let shift = a.trace() / alg.n() as f64;
        &a - &Element::unit(alg).scale(shift)
    }

    #[test]
    fn recovers_generator() {
        for field in [ScalarField::Real, ScalarField::Complex] {
            for n in 2..=3 {
                let alg = AlgebraDescriptor::full_matrix(n, field).unwrap();
                let a0 = trace_free(&alg, 3 + n as u64);
                let fit = fit_inner_derivation(&MapUnderTest::inner(a0.clone()), &alg).unwrap();
                assert!((&fit.generator - &a0).norm().unwrap() < 1e-10);
                assert!(fit.residual_per_basis.iter().all(|r| *r <= 1e-12));
                assert!(fit.trace_abs < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_shift_invariance() {
        let alg = AlgebraDescriptor::full_matrix(2, ScalarField::Real).unwrap();
        let a0 = trace_free(&alg, 8);
        let shifted = &a0 + &Element::unit(&alg).scale_real(3.7);
        let fit = fit_inner_derivation(&MapUnderTest::inner(shifted), &alg).unwrap();
        assert!((&fit.generator - &a0).norm().unwrap() < 1e-10);
        assert!(fit.sup_gap <= 1e-12);
    }

    #[test]
    fn residual_of_central_offset() {
        // The repeated unit offset is orthogonal to every Σ_i [a, E_i] = [a, J].
        let alg = AlgebraDescriptor::full_matrix(2, ScalarField::Real).unwrap();
        let a0 = trace_free(&alg, 2);
        let h = MapUnderTest::inner(a0)
            .with_perturbation(PerturbationSpec::constant_offset(Element::unit(&alg), 1.0).unwrap())
            .unwrap();
        let fit = fit_inner_derivation(&h, &alg).unwrap();
        for r in &fit.residual_per_basis {
            assert!((r - 1.0).abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn zero_residual_iff_zero_derivation_defect() {
        let alg = AlgebraDescriptor::full_matrix(2, ScalarField::Complex).unwrap();
        let units = basis(&alg);
        let exact = MapUnderTest::inner(random_element(&alg, 4, 1.0).unwrap());
        let fit = fit_inner_derivation(&exact, &alg).unwrap();
        let sup_def = units
            .iter()
            .flat_map(|x| units.iter().map(move |y| (x, y)))
            .map(|(x, y)| crate::defect::derivation_defect(&exact, x, y).unwrap().norm().unwrap())
            .fold(0.0, f64::max);
        assert!(fit.sup_gap <= 1e-10 && sup_def <= 1e-10);
        let off = exact
            .clone()
            .with_perturbation(PerturbationSpec::constant_offset(units[1].clone(), 0.5).unwrap())
            .unwrap();
        assert!(fit_inner_derivation(&off, &alg).unwrap().sup_gap > 1e-3);
    }

    #[test]
    fn non_full_matrix_rejected() {
        let alg = AlgebraDescriptor::upper_triangular(2, ScalarField::Real).unwrap();
        let h = MapUnderTest::inner(Element::zero(&alg));
        assert!(matches!(fit_inner_derivation(&h, &alg), Err(LabError::Unsupported(_))));
    }

    #[test]
    fn nullspace_m2() {
        let alg = AlgebraDescriptor::full_matrix(2, ScalarField::Real).unwrap();
        let t = jordan_triple_nullspace_dim(&alg, 48, 1, DEFAULT_TOL_RANK).unwrap();
        assert_eq!(t.dimension, 3);
        assert!(t.singular_value_gap >= 1e6 * t.threshold);
        let d = derivation_nullspace_dim(&alg, 48, 1, DEFAULT_TOL_RANK).unwrap();
        assert_eq!(d.dimension, 3);
        assert!(jordan_triple_nullspace_dim(&alg, 10, 1, DEFAULT_TOL_RANK).is_err());
    }

    #[test]
    fn gap_examples() {
        let alg = AlgebraDescriptor::full_matrix(2, ScalarField::Real).unwrap();
        let pts: Vec<Element> = (0..5).map(|s| random_element(&alg, 20 + s, 1.0).unwrap()).collect();
        let exact = MapUnderTest::inner(random_element(&alg, 1, 1.0).unwrap());
        let phi = ControlFunction::power_sum(0.1, 0.5, 0.5).unwrap();
        let form = BoundForm::Series { d_abs: 2.0 };
        let rep = hyers_ulam_gap(&exact, &exact, &phi, form, &pts).unwrap();
        assert!(rep.all_within && rep.samples.iter().all(|g| g.gap == 0.0));

        // Constant offset c against φ = θ(‖x‖⁰ + ‖y‖⁰): Φ = θ, gap = ‖c‖(1 − 2^{−k}).
        let c = basis(&alg)[1].clone();
        let off = exact
            .clone()
            .with_perturbation(PerturbationSpec::constant_offset(c, 0.5).unwrap())
            .unwrap();
        let scheme = IterationScheme::default().with_accelerate(false).with_growth_cap(1e300);
        let lim = LimitMap::new(&off, scheme);
        let flat = ControlFunction::power_sum(0.5, 0.0, 0.0).unwrap();
        let rep = hyers_ulam_gap(&off, &lim, &flat, form, &pts).unwrap();
        assert!(rep.all_within);
        for (g, x) in rep.samples.iter().zip(&pts) {
            let k = crate::direct::hyers_limit(&off, x, &scheme).unwrap().k_last;
            assert!((g.gap - 0.5 * (1.0 - 2f64.powi(-(k as i32)))).abs() < 1e-15);
        }
        let rep = hyers_ulam_gap(&off, &lim, &ControlFunction::Zero, form, &pts).unwrap();
        assert!(!rep.all_within);
    }
}

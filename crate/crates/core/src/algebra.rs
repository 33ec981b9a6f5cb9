//! Finite-dimensional unital Banach algebras realized as matrix algebras.
//!
//! Three families are supported: the full matrix algebra `M_n`, block
//! diagonal direct sums `M_{n1} ⊕ … ⊕ M_{nk}`, and the upper-triangular
//! algebra `T_n`. Every element is stored as a dense `n × n` complex matrix;
//! real-field algebras simply keep imaginary parts at zero.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Largest supported matrix dimension. The nullspace oracles grow as `n⁶`.
pub const MAX_DIMENSION: usize = 8;

pub type C64 = Complex64;

/// Shared handle to an algebra descriptor; elements carry one.
pub type Algebra = Arc<AlgebraDescriptor>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarField {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    /// Largest singular value. Keeps `‖1‖ = 1`.
    #[default]
    #[serde(alias = "operator2", alias = "spectral")]
    Operator2,
    /// Entrywise 2-norm. `‖1‖ = √n`.
    Frobenius,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Operator2 => f.write_str("operator-2"),
            NormKind::Frobenius => f.write_str("frobenius"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum AlgebraFamily {
    FullMatrix { n: usize },
    DirectSumOfFullMatrix { blocks: Vec<usize> },
    UpperTriangular { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructureFlags {
    pub is_unital: bool,
    pub is_prime: bool,
    pub is_semiprime: bool,
    pub has_nontrivial_idempotent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgebraDescriptor {
    pub family: AlgebraFamily,
    pub field: ScalarField,
    pub norm_kind: NormKind,
    flags: StructureFlags,
}

impl AlgebraDescriptor {
    pub fn new(family: AlgebraFamily, field: ScalarField, norm_kind: NormKind) -> Result<Algebra> {
        let n = match &family {
            AlgebraFamily::FullMatrix { n } | AlgebraFamily::UpperTriangular { n } => *n,
            AlgebraFamily::DirectSumOfFullMatrix { blocks } => {
                if blocks.is_empty() || blocks.contains(&0) {
                    return Err(LabError::InvalidArgument(
                        "direct sum needs at least one block, each of size >= 1".into(),
                    ));
                }
                blocks.iter().sum()
            }
        };
        if n == 0 || n > MAX_DIMENSION {
            return Err(LabError::InvalidArgument(format!(
                "matrix dimension must lie in 1..={MAX_DIMENSION}, got {n}"
            )));
        }
        let flags = match &family {
            AlgebraFamily::FullMatrix { n } => StructureFlags {
                is_unital: true,
                is_prime: true,
                is_semiprime: true,
                has_nontrivial_idempotent: *n >= 2,
            },
            AlgebraFamily::DirectSumOfFullMatrix { blocks } if blocks.len() == 1 => StructureFlags {
                is_unital: true,
                is_prime: true,
                is_semiprime: true,
                has_nontrivial_idempotent: blocks[0] >= 2,
            },
            // (1,0)·r·(0,1) = 0 for every r, so no direct sum of two or more
            // blocks is prime, though each block being semiprime makes the sum so.
            AlgebraFamily::DirectSumOfFullMatrix { .. } => StructureFlags {
                is_unital: true,
                is_prime: false,
                is_semiprime: true,
                has_nontrivial_idempotent: true,
            },
            AlgebraFamily::UpperTriangular { n } => StructureFlags {
                is_unital: true,
                is_prime: *n == 1,
                is_semiprime: *n == 1,
                has_nontrivial_idempotent: *n >= 2,
            },
        };
        Ok(Arc::new(AlgebraDescriptor {
            family,
            field,
            norm_kind,
            flags,
        }))
    }

    pub fn full_matrix(n: usize, field: ScalarField) -> Result<Algebra> {
        Self::new(AlgebraFamily::FullMatrix { n }, field, NormKind::Operator2)
    }

    pub fn upper_triangular(n: usize, field: ScalarField) -> Result<Algebra> {
        Self::new(AlgebraFamily::UpperTriangular { n }, field, NormKind::Operator2)
    }

    pub fn direct_sum(blocks: &[usize], field: ScalarField) -> Result<Algebra> {
        Self::new(
            AlgebraFamily::DirectSumOfFullMatrix {
                blocks: blocks.to_vec(),
            },
            field,
            NormKind::Operator2,
        )
    }

    /// Same algebra with a different norm.
    pub fn with_norm(&self, norm_kind: NormKind) -> Algebra {
        Arc::new(AlgebraDescriptor {
            norm_kind,
            ..self.clone()
        })
    }

    /// Matrix dimension `n` (elements are `n × n`).
    pub fn n(&self) -> usize {
        match &self.family {
            AlgebraFamily::FullMatrix { n } | AlgebraFamily::UpperTriangular { n } => *n,
            AlgebraFamily::DirectSumOfFullMatrix { blocks } => blocks.iter().sum(),
        }
    }

    /// Dimension of the algebra over its field.
    pub fn dimension(&self) -> usize {
        match &self.family {
            AlgebraFamily::FullMatrix { n } => n * n,
            AlgebraFamily::UpperTriangular { n } => n * (n + 1) / 2,
            AlgebraFamily::DirectSumOfFullMatrix { blocks } => blocks.iter().map(|b| b * b).sum(),
        }
    }

    pub fn flags(&self) -> StructureFlags {
        self.flags
    }

    pub fn is_full_matrix(&self) -> bool {
        matches!(self.family, AlgebraFamily::FullMatrix { .. })
    }

    /// Whether entry `(i, j)` may be nonzero in an element of this algebra.
    pub fn allows(&self, i: usize, j: usize) -> bool {
        match &self.family {
            AlgebraFamily::FullMatrix { .. } => true,
            AlgebraFamily::UpperTriangular { .. } => i <= j,
            AlgebraFamily::DirectSumOfFullMatrix { blocks } => {
                let mut start = 0;
                for &b in blocks {
                    let end = start + b;
                    if (start..end).contains(&i) {
                        return (start..end).contains(&j);
                    }
                    start = end;
                }
                false
            }
        }
    }

    pub fn label(&self) -> String {
        let field = match self.field {
            ScalarField::Real => "R",
            ScalarField::Complex => "C",
        };
        match &self.family {
            AlgebraFamily::FullMatrix { n } => format!("M{n}({field})"),
            AlgebraFamily::UpperTriangular { n } => format!("T{n}({field})"),
            AlgebraFamily::DirectSumOfFullMatrix { blocks } => {
                let parts: Vec<String> = blocks.iter().map(|b| format!("M{b}")).collect();
                format!("{}({field})", parts.join("+"))
            }
        }
    }
}

/// A value of an algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    data: DMatrix<C64>,
    algebra: Algebra,
}

impl Element {
    /// Wraps a matrix, checking its shape, finiteness, sparsity pattern and field.
    pub fn from_matrix(algebra: &Algebra, data: DMatrix<C64>) -> Result<Self> {
        let n = algebra.n();
        if data.nrows() != n || data.ncols() != n {
            return Err(LabError::InvalidElement(format!(
                "expected {n}x{n}, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        for j in 0..n {
            for i in 0..n {
                let z = data[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LabError::InvalidElement(format!("non-finite entry at ({i},{j})")));
                }
                if !algebra.allows(i, j) && z != C64::new(0.0, 0.0) {
                    return Err(LabError::InvalidElement(format!(
                        "entry ({i},{j}) must vanish in {}",
                        algebra.label()
                    )));
                }
                if algebra.field == ScalarField::Real && z.im != 0.0 {
                    return Err(LabError::InvalidElement(format!(
                        "complex entry at ({i},{j}) in a real algebra"
                    )));
                }
            }
        }
        Ok(Element {
            data,
            algebra: algebra.clone(),
        })
    }

    pub fn from_real_rows(algebra: &Algebra, rows: &[&[f64]]) -> Result<Self> {
        let n = algebra.n();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(LabError::InvalidElement(format!("expected {n} rows of length {n}")));
        }
        let data = DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::from_matrix(algebra, data)
    }

    pub fn zero(algebra: &Algebra) -> Self {
        let n = algebra.n();
        Element {
            data: DMatrix::zeros(n, n),
            algebra: algebra.clone(),
        }
    }

    pub fn unit(algebra: &Algebra) -> Self {
        let n = algebra.n();
        Element {
            data: DMatrix::identity(n, n),
            algebra: algebra.clone(),
        }
    }

    /// `E_ij`; fails when the entry is outside the algebra's pattern.
    pub fn matrix_unit(algebra: &Algebra, i: usize, j: usize) -> Result<Self> {
        let n = algebra.n();
        if i >= n || j >= n || !algebra.allows(i, j) {
            return Err(LabError::InvalidElement(format!(
                "E{}{} is not in {}",
                i + 1,
                j + 1,
                algebra.label()
            )));
        }
        let mut data = DMatrix::zeros(n, n);
        data[(i, j)] = C64::new(1.0, 0.0);
        Ok(Element {
            data,
            algebra: algebra.clone(),
        })
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Norm chosen by the algebra descriptor.
    pub fn norm(&self) -> Result<f64> {
        self.norm_of_kind(self.algebra.norm_kind)
    }

    pub fn norm_of_kind(&self, kind: NormKind) -> Result<f64> {
        if !self.is_finite() {
            return Err(LabError::InvalidElement("non-finite entries".into()));
        }
        Ok(match kind {
            NormKind::Frobenius => self.frobenius(),
            NormKind::Operator2 => spectral_norm(&self.data),
        })
    }

    /// Frobenius norm without the finiteness check; used for rounding scales.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, c: C64) -> Element {
        Element {
            data: self.data.map(|z| z * c),
            algebra: self.algebra.clone(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Element {
        Element {
            data: self.data.map(|z| z * c),
            algebra: self.algebra.clone(),
        }
    }

    /// Entrywise complex conjugate (an ℝ-linear, not ℂ-linear, map).
    pub fn conj(&self) -> Element {
        Element {
            data: self.data.map(|z| z.conj()),
            algebra: self.algebra.clone(),
        }
    }

    pub fn adjoint(&self) -> Element {
        Element {
            data: self.data.adjoint(),
            algebra: self.algebra.clone(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn same_algebra(&self, other: &Element) -> Result<()> {
        if Arc::ptr_eq(&self.algebra, &other.algebra) || *self.algebra == *other.algebra {
            Ok(())
        } else {
            Err(LabError::AlgebraMismatch(format!(
                "{} vs {}",
                self.algebra.label(),
                other.algebra.label()
            )))
        }
    }

    pub fn belongs_to(&self, algebra: &AlgebraDescriptor) -> Result<()> {
        if *self.algebra == *algebra {
            Ok(())
        } else {
            Err(LabError::AlgebraMismatch(format!(
                "{} vs {}",
                self.algebra.label(),
                algebra.label()
            )))
        }
    }

    /// Same entries viewed in another algebra; fails if the pattern differs.
    pub fn reinterpret(&self, algebra: &Algebra) -> Result<Element> {
        Element::from_matrix(algebra, self.data.clone())
    }

    /// Rows of `[re, im]` pairs, for reports.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| [self.data[(i, j)].re, self.data[(i, j)].im]).collect())
            .collect()
    }
}

fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].norm();
    }
    if m.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Element> for &Element {
            type Output = Element;
            fn $method(self, rhs: &Element) -> Element {
                debug_assert!(self.same_algebra(rhs).is_ok());
                Element {
                    data: &self.data $op &rhs.data,
                    algebra: self.algebra.clone(),
                }
            }
        }
        impl $trait<Element> for Element {
            type Output = Element;
            fn $method(self, rhs: Element) -> Element {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Element> for Element {
            type Output = Element;
            fn $method(self, rhs: &Element) -> Element {
                (&self).$method(rhs)
            }
        }
        impl $trait<Element> for &Element {
            type Output = Element;
            fn $method(self, rhs: Element) -> Element {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        Element {
            data: -&self.data,
            algebra: self.algebra.clone(),
        }
    }
}

impl Neg for Element {
    type Output = Element;
    fn neg(self) -> Element {
        -&self
    }
}

/// Matrix units spanning the algebra over its field, in row-major order.
pub fn basis(algebra: &Algebra) -> Vec<Element> {
    let n = algebra.n();
    let mut out = Vec::with_capacity(algebra.dimension());
    for i in 0..n {
        for j in 0..n {
            if algebra.allows(i, j) {
                out.push(Element::matrix_unit(algebra, i, j).expect("pattern checked"));
            }
        }
    }
    out
}

/// Seeded element with entries bounded in modulus by `scale`.
///
/// Real entries are uniform on `[-scale, scale]`; complex entries draw real and
/// imaginary parts uniformly on `[-scale/√2, scale/√2]`.
pub fn random_element(algebra: &Algebra, seed: u64, scale: f64) -> Result<Element> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(LabError::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = algebra.n();
    let mut data = DMatrix::zeros(n, n);
    // Row-major fill keeps the stream layout independent of storage order.
    for i in 0..n {
        for j in 0..n {
            if !algebra.allows(i, j) {
                continue;
            }
            data[(i, j)] = match algebra.field {
                ScalarField::Real => C64::new(scale * rng.random_range(-1.0..=1.0), 0.0),
                ScalarField::Complex => {
                    let s = scale * std::f64::consts::FRAC_1_SQRT_2;
                    C64::new(s * rng.random_range(-1.0..=1.0), s * rng.random_range(-1.0..=1.0))
                }
            };
        }
    }
    Element::from_matrix(algebra, data)
}

/// Canonical nontrivial idempotent: `E11`, or the first block's unit in a direct sum.
pub fn nontrivial_idempotent(algebra: &Algebra) -> Result<Element> {
    if !algebra.flags().has_nontrivial_idempotent {
        return Err(LabError::UnsupportedHypothesis(format!(
            "{} has no nontrivial idempotent",
            algebra.label()
        )));
    }
    match &algebra.family {
        AlgebraFamily::DirectSumOfFullMatrix { blocks } if blocks.len() > 1 => {
            let n = algebra.n();
            let mut data = DMatrix::zeros(n, n);
            for i in 0..blocks[0] {
                data[(i, i)] = C64::new(1.0, 0.0);
            }
            Element::from_matrix(algebra, data)
        }
        _ => Element::matrix_unit(algebra, 0, 0),
    }
}

/// `max_i ‖a·E_i·a‖` over the basis. Zero with `a ≠ 0` witnesses `aXa = {0}`.
pub fn annihilator_check(a: &Element, algebra: &Algebra) -> Result<f64> {
    a.belongs_to(algebra)?;
    let mut worst = 0.0f64;
    for e in basis(algebra) {
        worst = worst.max((&(a * &e) * a).norm()?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m2() -> Algebra {
        AlgebraDescriptor::full_matrix(2, ScalarField::Real).unwrap()
    }

    #[test]
    fn norm_examples() {
        let a = m2();
        assert_eq!(Element::zero(&a).norm().unwrap(), 0.0);
        for n in 1..=5 {
            let alg = AlgebraDescriptor::full_matrix(n, ScalarField::Complex).unwrap();
            assert!((Element::unit(&alg).norm().unwrap() - 1.0).abs() < 1e-15);
            let fro = alg.with_norm(NormKind::Frobenius);
            let u = Element::unit(&fro).norm().unwrap();
            assert!((u - (n as f64).sqrt()).abs() < 1e-15);
        }
        let x = Element::from_real_rows(&a, &[&[3.0, 0.0], &[0.0, 4.0]]).unwrap();
        assert!((x.norm().unwrap() - 4.0).abs() < 1e-14);
        assert!((x.norm_of_kind(NormKind::Frobenius).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_norm_matches_closed_form_2x2() {
        // For [[a, b], [0, d]] the singular values solve σ⁴ − tσ² + det² = 0,
        // t = a² + b² + d².
        let a = m2();
        let x = Element::from_real_rows(&a, &[&[1.0, 2.0], &[0.0, 3.0]]).unwrap();
        let t: f64 = 1.0 + 4.0 + 9.0;
        let det: f64 = 3.0;
        let sigma_max = ((t + (t * t - 4.0 * det * det).sqrt()) / 2.0).sqrt();
        assert!((x.norm().unwrap() - sigma_max).abs() < 1e-13);
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let a = m2();
        let data = DMatrix::from_element(2, 2, C64::new(f64::NAN, 0.0));
        assert!(matches!(Element::from_matrix(&a, data), Err(LabError::InvalidElement(_))));
        let big = Element::from_real_rows(&a, &[&[f64::MAX, 0.0], &[0.0, 1.0]]).unwrap();
        let overflow = &big.scale_real(4.0) * &big;
        assert!(matches!(overflow.norm(), Err(LabError::InvalidElement(_))));
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(basis(&m2()).len(), 4);
        let t2 = AlgebraDescriptor::upper_triangular(2, ScalarField::Real).unwrap();
        let b = basis(&t2);
        assert_eq!(b.len(), 3);
        assert_eq!(b[0], Element::matrix_unit(&t2, 0, 0).unwrap());
        assert_eq!(b[1], Element::matrix_unit(&t2, 0, 1).unwrap());
        assert_eq!(b[2], Element::matrix_unit(&t2, 1, 1).unwrap());
        let ds = AlgebraDescriptor::direct_sum(&[2, 2], ScalarField::Real).unwrap();
        let b = basis(&ds);
        assert_eq!(b.len(), 8);
        assert_eq!(ds.dimension(), 8);
        assert!(b.iter().all(|e| e.data()[(0, 2)] == C64::new(0.0, 0.0)));
    }

    #[test]
    fn structural_flags() {
        let f = m2().flags();
        assert!(f.is_prime && f.is_semiprime && f.has_nontrivial_idempotent && f.is_unital);
        let f1 = AlgebraDescriptor::full_matrix(1, ScalarField::Real).unwrap().flags();
        assert!(!f1.has_nontrivial_idempotent);
        let t = AlgebraDescriptor::upper_triangular(3, ScalarField::Real).unwrap().flags();
        assert!(!t.is_semiprime && !t.is_prime && t.is_unital);
        let ds = AlgebraDescriptor::direct_sum(&[2, 2], ScalarField::Real).unwrap().flags();
        assert!(ds.is_semiprime && !ds.is_prime);
        assert!(AlgebraDescriptor::full_matrix(9, ScalarField::Real).is_err());
        assert!(AlgebraDescriptor::full_matrix(0, ScalarField::Real).is_err());
    }

    #[test]
    fn random_element_is_deterministic_and_shaped() {
        let a = AlgebraDescriptor::full_matrix(3, ScalarField::Complex).unwrap();
        assert_eq!(random_element(&a, 7, 1.0).unwrap(), random_element(&a, 7, 1.0).unwrap());
        assert_ne!(random_element(&a, 7, 1.0).unwrap(), random_element(&a, 8, 1.0).unwrap());
        let tiny = random_element(&a, 3, 1e-9).unwrap();
        assert!(tiny.norm().unwrap() <= 1e-9 * 3.0);
        assert!(random_element(&a, 3, 0.0).is_err());
        let t = AlgebraDescriptor::upper_triangular(4, ScalarField::Real).unwrap();
        let x = random_element(&t, 11, 2.0).unwrap();
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(x.data()[(i, j)], C64::new(0.0, 0.0));
            }
        }
        assert!(x.data().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn idempotents() {
        let a = m2();
        let e = nontrivial_idempotent(&a).unwrap();
        assert_eq!(&e * &e, e);
        assert_eq!(e, Element::matrix_unit(&a, 0, 0).unwrap());
        let m1 = AlgebraDescriptor::full_matrix(1, ScalarField::Real).unwrap();
        assert!(matches!(nontrivial_idempotent(&m1), Err(LabError::UnsupportedHypothesis(_))));
        let ds = AlgebraDescriptor::direct_sum(&[2, 2], ScalarField::Real).unwrap();
        let p = nontrivial_idempotent(&ds).unwrap();
        assert_eq!(&p * &p, p);
        assert_ne!(p, Element::unit(&ds));
        assert_eq!(p.trace(), C64::new(2.0, 0.0));
    }

    #[test]
    fn annihilator_examples() {
        let a = m2();
        assert_eq!(annihilator_check(&Element::zero(&a), &a).unwrap(), 0.0);
        let e12 = Element::matrix_unit(&a, 0, 1).unwrap();
        let e21 = Element::matrix_unit(&a, 1, 0).unwrap();
        assert_eq!(&(&e12 * &e21) * &e12, e12);
        assert!(annihilator_check(&e12, &a).unwrap() >= 1.0);
        let t2 = AlgebraDescriptor::upper_triangular(2, ScalarField::Real).unwrap();
        let w = Element::matrix_unit(&t2, 0, 1).unwrap();
        assert_eq!(annihilator_check(&w, &t2).unwrap(), 0.0);
        assert_eq!(w.norm().unwrap(), 1.0);
    }

    #[test]
    fn mismatch_is_detected() {
        let a = m2();
        let b = AlgebraDescriptor::full_matrix(3, ScalarField::Real).unwrap();
        assert!(Element::zero(&a).same_algebra(&Element::zero(&b)).is_err());
        assert!(annihilator_check(&Element::zero(&a), &b).is_err());
    }

    fn any_algebra() -> impl Strategy<Value = Algebra> {
        (1usize..=4, prop::bool::ANY).prop_map(|(n, complex)| {
            let field = if complex { ScalarField::Complex } else { ScalarField::Real };
            AlgebraDescriptor::full_matrix(n, field).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn submultiplicative(alg in any_algebra(), s1 in any::<u64>(), s2 in any::<u64>(), fro in prop::bool::ANY) {
            let alg = if fro { alg.with_norm(NormKind::Frobenius) } else { alg };
            let x = random_element(&alg, s1, 3.0).unwrap();
            let y = random_element(&alg, s2, 3.0).unwrap();
            let lhs = (&x * &y).norm().unwrap();
            prop_assert!(lhs <= x.norm().unwrap() * y.norm().unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn norm_equivalence(alg in any_algebra(), seed in any::<u64>()) {
            let x = random_element(&alg, seed, 1.0).unwrap();
            let op = x.norm_of_kind(NormKind::Operator2).unwrap();
            let fro = x.norm_of_kind(NormKind::Frobenius).unwrap();
            let n = alg.n() as f64;
            prop_assert!(fro / n.sqrt() <= op * (1.0 + 1e-12));
            prop_assert!(op <= fro * (1.0 + 1e-12));
        }

        #[test]
        fn full_matrix_has_no_annihilating_elements(n in 2usize..=3, seed in any::<u64>()) {
            let alg = AlgebraDescriptor::full_matrix(n, ScalarField::Real).unwrap();
            let a = random_element(&alg, seed, 1.0).unwrap();
            let ann = annihilator_check(&a, &alg).unwrap();
            prop_assert!(!(ann <= 1e-12) || a.norm().unwrap() <= 1e-12);
        }
    }

    #[test]
    fn upper_triangular_has_unit_norm_witness() {
        for n in 2..=4 {
            let t = AlgebraDescriptor::upper_triangular(n, ScalarField::Real).unwrap();
            let found = basis(&t).into_iter().any(|e| {
                annihilator_check(&e, &t).unwrap() <= 1e-12 && (e.norm().unwrap() - 1.0).abs() < 1e-15
            });
            assert!(found);
        }
    }
}

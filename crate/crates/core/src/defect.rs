//! Left-hand-side defects of the functional (in)equations under study.
//!
//! Each kernel is assembled from its signed terms, so alongside the defect
//! we keep `term_scale = Σ‖term‖_F`, the magnitude rounding errors are
//! measured against.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{Element, ScalarField, C64};
use crate::error::{LabError, Result};
use crate::maps::AlgebraMap;

const ONE: C64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kernel")]
pub enum DefectKernel {
    /// `h(xyx) − h(x)yx − xh(y)x − xyh(x)`.
    JordanTriple,
    /// `h(xy) − h(x)y − xh(y)`.
    Derivation,
    /// `h(x²) − h(x)x − xh(x)`; ignores `y`.
    Jordan,
    /// `h(λax + by) − λAh(x) − Bh(y)`.
    GeneralAdditivity {
        #[serde(with = "complex_pair")]
        lambda: C64,
        #[serde(with = "complex_pair")]
        a: C64,
        #[serde(with = "complex_pair")]
        b: C64,
        #[serde(with = "complex_pair")]
        big_a: C64,
        #[serde(with = "complex_pair")]
        big_b: C64,
    },
    /// `f(2μx + μy) + f(μx + 2μy) − μ[f(3x) + f(3y)]`.
    Jensen3 {
        #[serde(with = "complex_pair")]
        mu: C64,
    },
    /// `h(μ(x+my)) + h(μ(x−my)) − μ(2h(x) − 2m²h(y) + m²h(2y))`.
    MixedM {
        m: i64,
        #[serde(with = "complex_pair")]
        mu: C64,
    },
    /// `h(λx) − λh(x)`; ignores `y`.
    ScalarHomogeneity {
        #[serde(with = "complex_pair")]
        lambda: C64,
    },
    /// `h(x + y) − h(x) − h(y)`.
    Additivity,
}

pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq([z.re, z.im])
    }
}

impl DefectKernel {
    pub fn jensen3() -> Self {
        DefectKernel::Jensen3 { mu: ONE }
    }

    pub fn mixed(m: i64) -> Self {
        DefectKernel::MixedM { m, mu: ONE }
    }

    /// Degree of the kernel in its element arguments (not counting `h`).
    pub fn degree(&self) -> u32 {
        match self {
            DefectKernel::JordanTriple => 3,
            DefectKernel::Derivation | DefectKernel::Jordan => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DefectKernel::JordanTriple => "jordan-triple",
            DefectKernel::Derivation => "derivation",
            DefectKernel::Jordan => "jordan",
            DefectKernel::GeneralAdditivity { .. } => "general-additivity",
            DefectKernel::Jensen3 { .. } => "jensen3",
            DefectKernel::MixedM { .. } => "mixed-m",
            DefectKernel::ScalarHomogeneity { .. } => "scalar-homogeneity",
            DefectKernel::Additivity => "additivity",
        }
    }

    fn scalars(&self) -> Vec<C64> {
        match *self {
            DefectKernel::GeneralAdditivity { lambda, a, b, big_a, big_b } => vec![lambda, a, b, big_a, big_b],
            DefectKernel::Jensen3 { mu } | DefectKernel::MixedM { mu, .. } => vec![mu],
            DefectKernel::ScalarHomogeneity { lambda } => vec![lambda],
            _ => Vec::new(),
        }
    }

    fn validate(&self, x: &Element) -> Result<()> {
        if x.algebra().field == ScalarField::Real && self.scalars().iter().any(|z| z.im != 0.0) {
            return Err(LabError::Unsupported(format!(
                "{} kernel with non-real scalars needs a complex algebra",
                self.name()
            )));
        }
        match *self {
            DefectKernel::GeneralAdditivity { a, b, .. } if a * b == C64::new(0.0, 0.0) => {
                Err(LabError::InvalidArgument("general additivity needs ab ≠ 0".into()))
            }
            DefectKernel::MixedM { m, .. } if m == 0 || m % 2 != 0 => {
                Err(LabError::InvalidArgument(format!("m must be a nonzero even integer, got {m}")))
            }
            _ => Ok(()),
        }
    }

    /// Signed terms whose sum is the defect.
    fn terms<M: AlgebraMap + ?Sized>(&self, h: &M, x: &Element, y: &Element) -> Result<Vec<Element>> {
        x.same_algebra(y)?;
        self.validate(x)?;
        Ok(match *self {
            DefectKernel::JordanTriple => {
                let xyx = &(x * y) * x;
                let hx = h.apply(x)?;
                let hy = h.apply(y)?;
                vec![
                    h.apply(&xyx)?,
                    -&(&(&hx * y) * x),
                    -&(&(x * &hy) * x),
                    -&(&(x * y) * &hx),
                ]
            }
            DefectKernel::Derivation => {
                let hx = h.apply(x)?;
                let hy = h.apply(y)?;
                vec![h.apply(&(x * y))?, -&(&hx * y), -&(x * &hy)]
            }
            DefectKernel::Jordan => {
                let hx = h.apply(x)?;
                vec![h.apply(&(x * x))?, -&(&hx * x), -&(x * &hx)]
            }
            DefectKernel::GeneralAdditivity { lambda, a, b, big_a, big_b } => {
                let arg = &x.scale(lambda * a) + &y.scale(b);
                vec![
                    h.apply(&arg)?,
                    -&h.apply(x)?.scale(lambda * big_a),
                    -&h.apply(y)?.scale(big_b),
                ]
            }
            DefectKernel::Jensen3 { mu } => {
                let two_mu = mu * 2.0;
                let first = &x.scale(two_mu) + &y.scale(mu);
                let second = &x.scale(mu) + &y.scale(two_mu);
                vec![
                    h.apply(&first)?,
                    h.apply(&second)?,
                    -&h.apply(&x.scale_real(3.0))?.scale(mu),
                    -&h.apply(&y.scale_real(3.0))?.scale(mu),
                ]
            }
            DefectKernel::MixedM { m, mu } => {
                let mf = m as f64;
                let my = y.scale_real(mf);
                let m2 = mf * mf;
                vec![
                    h.apply(&(x + &my).scale(mu))?,
                    h.apply(&(x - &my).scale(mu))?,
                    -&h.apply(x)?.scale(mu * 2.0),
                    h.apply(y)?.scale(mu * (2.0 * m2)),
                    -&h.apply(&y.scale_real(2.0))?.scale(mu * m2),
                ]
            }
            DefectKernel::ScalarHomogeneity { lambda } => {
                vec![h.apply(&x.scale(lambda))?, -&h.apply(x)?.scale(lambda)]
            }
            DefectKernel::Additivity => vec![h.apply(&(x + y))?, -&h.apply(x)?, -&h.apply(y)?],
        })
    }

    pub fn evaluate<M: AlgebraMap + ?Sized>(&self, h: &M, x: &Element, y: &Element) -> Result<DefectSample> {
        let terms = self.terms(h, x, y)?;
        let term_scale = terms.iter().map(Element::frobenius).sum();
        let mut iter = terms.into_iter();
        let first = iter.next().expect("every kernel has terms");
        let defect_value = iter.fold(first, |acc, t| &acc + &t);
        let defect_norm = defect_value.norm()?;
        Ok(DefectSample {
            kernel: *self,
            x: x.clone(),
            y: y.clone(),
            defect_value,
            defect_norm,
            term_scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectSample {
    pub kernel: DefectKernel,
    pub x: Element,
    pub y: Element,
    pub defect_value: Element,
    pub defect_norm: f64,
    /// Sum of the Frobenius norms of the individual terms.
    pub term_scale: f64,
}

pub fn jordan_triple_defect<M: AlgebraMap + ?Sized>(h: &M, x: &Element, y: &Element) -> Result<Element> {
    Ok(DefectKernel::JordanTriple.evaluate(h, x, y)?.defect_value)
}

pub fn derivation_defect<M: AlgebraMap + ?Sized>(h: &M, x: &Element, y: &Element) -> Result<Element> {
    Ok(DefectKernel::Derivation.evaluate(h, x, y)?.defect_value)
}

pub fn jordan_defect<M: AlgebraMap + ?Sized>(h: &M, x: &Element) -> Result<Element> {
    Ok(DefectKernel::Jordan.evaluate(h, x, x)?.defect_value)
}

#[allow(clippy::too_many_arguments)]
pub fn general_additivity_defect<M: AlgebraMap + ?Sized>(
    h: &M,
    x: &Element,
    y: &Element,
    lambda: C64,
    a: C64,
    b: C64,
    big_a: C64,
    big_b: C64,
) -> Result<Element> {
    let k = DefectKernel::GeneralAdditivity { lambda, a, b, big_a, big_b };
    Ok(k.evaluate(h, x, y)?.defect_value)
}

pub fn jensen3_defect<M: AlgebraMap + ?Sized>(h: &M, x: &Element, y: &Element, mu: C64) -> Result<Element> {
    Ok(DefectKernel::Jensen3 { mu }.evaluate(h, x, y)?.defect_value)
}

pub fn mixed_m_defect<M: AlgebraMap + ?Sized>(h: &M, x: &Element, y: &Element, m: i64, mu: C64) -> Result<Element> {
    Ok(DefectKernel::MixedM { m, mu }.evaluate(h, x, y)?.defect_value)
}

pub fn scalar_homogeneity_defect<M: AlgebraMap + ?Sized>(h: &M, lambda: C64, x: &Element) -> Result<Element> {
    Ok(DefectKernel::ScalarHomogeneity { lambda }.evaluate(h, x, x)?.defect_value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupDefect {
    pub sup_norm: f64,
    pub argmax: usize,
    pub sample: DefectSample,
}

/// Largest defect norm over the sample set; ties go to the lowest index.
pub fn max_defect_over_samples<M: AlgebraMap + ?Sized>(
    kernel: DefectKernel,
    h: &M,
    samples: &[(Element, Element)],
) -> Result<SupDefect> {
    if samples.is_empty() {
        return Err(LabError::InvalidArgument("sample set is empty".into()));
    }
    let evaluated: Vec<DefectSample> = samples
        .par_iter()
        .map(|(x, y)| kernel.evaluate(h, x, y))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in evaluated.iter().enumerate() {
        if s.defect_norm > evaluated[best].defect_norm {
            best = i;
        }
    }
    let sample = evaluated.into_iter().nth(best).expect("nonempty");
    Ok(SupDefect {
        sup_norm: sample.defect_norm,
        argmax: best,
        sample,
    })
}

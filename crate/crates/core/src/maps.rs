//! Maps under test: an inner derivation plus a structured perturbation.

use serde::{Deserialize, Serialize};

use crate::algebra::{random_element, Algebra, Element};
use crate::error::{LabError, Result};

/// Anything that maps an algebra into itself.
pub trait AlgebraMap: Sync {
    fn apply(&self, x: &Element) -> Result<Element>;
}

impl<M: AlgebraMap + ?Sized> AlgebraMap for &M {
    fn apply(&self, x: &Element) -> Result<Element> {
        (**self).apply(x)
    }
}

/// Adapter turning a closure into an [`AlgebraMap`].
pub struct FnMap<F>(pub F);

impl<F> AlgebraMap for FnMap<F>
where
    F: Fn(&Element) -> Result<Element> + Sync,
{
    fn apply(&self, x: &Element) -> Result<Element> {
        (self.0)(x)
    }
}

/// `D_a(x) = a·x − x·a`.
pub fn inner_derivation(a: &Element, x: &Element) -> Element {
    &(a * x) - &(x * a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    None,
    /// `e(x) = θ_e·direction`.
    ConstantOffset,
    /// `e(x) = θ_e·‖x‖^ρ·direction`.
    PowerRadial,
    /// Pseudo-random element, deterministic in `(x, seed)`, clipped to
    /// `‖e(x)‖ ≤ θ_e·‖x‖^ρ`.
    ClippedRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub direction: Element,
    pub amplitude: f64,
    pub exponent: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn none(algebra: &Algebra) -> Self {
        PerturbationSpec {
            kind: PerturbationKind::None,
            direction: Element::zero(algebra),
            amplitude: 0.0,
            exponent: 0.0,
            seed: 0,
        }
    }

    pub fn constant_offset(direction: Element, amplitude: f64) -> Result<Self> {
        Self::build(PerturbationKind::ConstantOffset, direction, amplitude, 0.0, 0)
    }

    pub fn power_radial(direction: Element, amplitude: f64, exponent: f64) -> Result<Self> {
        Self::build(PerturbationKind::PowerRadial, direction, amplitude, exponent, 0)
    }

    pub fn clipped_random(algebra: &Algebra, amplitude: f64, exponent: f64, seed: u64) -> Result<Self> {
        Self::build(
            PerturbationKind::ClippedRandom,
            Element::zero(algebra),
            amplitude,
            exponent,
            seed,
        )
    }

    fn build(kind: PerturbationKind, direction: Element, amplitude: f64, exponent: f64, seed: u64) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(LabError::InvalidArgument(format!(
                "perturbation amplitude must be finite and nonnegative, got {amplitude}"
            )));
        }
        if !exponent.is_finite() {
            return Err(LabError::InvalidArgument("perturbation exponent must be finite".into()));
        }
        Ok(PerturbationSpec {
            kind,
            direction,
            amplitude,
            exponent,
            seed,
        })
    }

    /// Declared bound `θ_e·‖x‖^ρ` of the clipped sampler.
    pub fn clip_bound(&self, x: &Element) -> Result<f64> {
        Ok(self.amplitude * x.norm()?.powf(self.exponent))
    }

    pub fn evaluate(&self, x: &Element) -> Result<Element> {
        match self.kind {
            PerturbationKind::None => Ok(Element::zero(x.algebra())),
            PerturbationKind::ConstantOffset => Ok(self.direction.scale_real(self.amplitude)),
            PerturbationKind::PowerRadial => {
                let r = x.norm()?.powf(self.exponent);
                Ok(self.direction.scale_real(self.amplitude * r))
            }
            PerturbationKind::ClippedRandom => {
                let bound = self.clip_bound(x)?;
                if bound == 0.0 {
                    return Ok(Element::zero(x.algebra()));
                }
                let raw = random_element(x.algebra(), point_seed(self.seed, x), 1.0)?.scale_real(bound);
                let norm = raw.norm()?;
                if norm > bound {
                    Ok(raw.scale_real(bound / norm))
                } else {
                    Ok(raw)
                }
            }
        }
    }
}

/// FNV-1a over the seed and the entry bit patterns of `x`.
fn point_seed(seed: u64, x: &Element) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(seed);
    for z in x.data().iter() {
        // -0.0 and 0.0 must hash alike so that h(0) is well defined.
        feed((z.re + 0.0).to_bits());
        feed((z.im + 0.0).to_bits());
    }
    h
}

/// `h(x) = D_a(x) + e(x)`, optionally replaced by its odd part `(h(x) − h(−x))/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapUnderTest {
    generator: Element,
    perturbation: PerturbationSpec,
    parity_forced_odd: bool,
}

impl MapUnderTest {
    pub fn inner(generator: Element) -> Self {
        let perturbation = PerturbationSpec::none(generator.algebra());
        MapUnderTest {
            generator,
            perturbation,
            parity_forced_odd: false,
        }
    }

    pub fn with_perturbation(mut self, perturbation: PerturbationSpec) -> Result<Self> {
        if perturbation.kind != PerturbationKind::None {
            perturbation.direction.same_algebra(&self.generator)?;
        }
        self.perturbation = perturbation;
        Ok(self)
    }

    pub fn forced_odd(mut self, odd: bool) -> Self {
        self.parity_forced_odd = odd;
        self
    }

    pub fn generator(&self) -> &Element {
        &self.generator
    }

    pub fn algebra(&self) -> &Algebra {
        self.generator.algebra()
    }

    pub fn perturbation(&self) -> &PerturbationSpec {
        &self.perturbation
    }

    pub fn is_forced_odd(&self) -> bool {
        self.parity_forced_odd
    }

    pub fn is_exact(&self) -> bool {
        self.perturbation.kind == PerturbationKind::None || self.perturbation.amplitude == 0.0
    }

    /// The derivation part `D_a(x)` the perturbation is anchored at.
    pub fn target(&self, x: &Element) -> Result<Element> {
        x.same_algebra(&self.generator)?;
        Ok(inner_derivation(&self.generator, x))
    }

    fn raw(&self, x: &Element) -> Result<Element> {
        let d = inner_derivation(&self.generator, x);
        if self.perturbation.kind == PerturbationKind::None {
            return Ok(d);
        }
        Ok(&d + &self.perturbation.evaluate(x)?)
    }

    pub fn evaluate(&self, x: &Element) -> Result<Element> {
        x.same_algebra(&self.generator)?;
        let out = if self.parity_forced_odd {
            let plus = self.raw(x)?;
            let minus = self.raw(&-x)?;
            (&plus - &minus).scale_real(0.5)
        } else {
            self.raw(x)?
        };
        if !out.is_finite() {
            return Err(LabError::InvalidEvaluation("map produced non-finite entries".into()));
        }
        Ok(out)
    }
}

impl AlgebraMap for MapUnderTest {
    fn apply(&self, x: &Element) -> Result<Element> {
        self.evaluate(x)
    }
}

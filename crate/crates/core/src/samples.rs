//! Sample sets standing in for the universal quantifiers: the matrix-unit
//! basis plus seeded random elements at three scales.

use serde::{Deserialize, Serialize};

use crate::algebra::{basis, random_element, Algebra, Element};
use crate::error::{LabError, Result};

pub const SCALE_LADDER: [f64; 3] = [0.1, 1.0, 10.0];
/// Largest dimension for which all basis pairs are included.
pub const BASIS_PAIR_LIMIT: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    /// Random elements per scale.
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_count() -> usize {
    6
}

fn default_scale() -> f64 {
    1.0
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: default_count(),
            seed: 0,
            scale: default_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Element>,
    pub pairs: Vec<(Element, Element)>,
}

/// SplitMix64 step, used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SampleSet {
    pub fn build(algebra: &Algebra, spec: &SampleSpec) -> Result<Self> {
        if !(spec.scale > 0.0) || !spec.scale.is_finite() {
            return Err(LabError::InvalidArgument(format!("sample scale must be positive, got {}", spec.scale)));
        }
        let units = basis(algebra);
        let mut randoms = Vec::new();
        for (si, s) in SCALE_LADDER.iter().enumerate() {
            for i in 0..spec.count {
                let seed = mix_seed(spec.seed, (si * 100_000 + i) as u64);
                randoms.push(random_element(algebra, seed, s * spec.scale)?);
            }
        }
        let mut pairs = Vec::new();
        if units.len() <= BASIS_PAIR_LIMIT {
            for x in &units {
                for y in &units {
                    pairs.push((x.clone(), y.clone()));
                }
            }
        }
        let zero = Element::zero(algebra);
        let scaled_count = SCALE_LADDER.len() * spec.count;
        for i in 0..scaled_count {
            let x = &randoms[i];
            // Partner drawn from the next scale so mixed magnitudes appear.
            let y = &randoms[(i + spec.count) % scaled_count.max(1)];
            pairs.push((x.clone(), y.clone()));
            pairs.push((x.clone(), x.clone()));
            pairs.push((x.clone(), zero.clone()));
            pairs.push((zero.clone(), x.clone()));
        }
        let mut points = units;
        points.extend(randoms);
        Ok(SampleSet { points, pairs })
    }

    pub fn description(&self, spec: &SampleSpec) -> String {
        format!(
            "finite surrogate for all x, y: matrix-unit basis plus {} seeded elements at scales {:?}×{}; {} points, {} pairs",
            spec.count * SCALE_LADDER.len(),
            SCALE_LADDER,
            spec.scale,
            self.points.len(),
            self.pairs.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{AlgebraDescriptor, ScalarField};

    #[test]
    fn layout_and_determinism() {
        let a = AlgebraDescriptor::full_matrix(2, ScalarField::Real).unwrap();
        let spec = SampleSpec { count: 3, seed: 9, scale: 1.0 };
        let s = SampleSet::build(&a, &spec).unwrap();
        assert_eq!(s.points.len(), 4 + 9);
        assert_eq!(s.pairs.len(), 16 + 9 * 4);
        assert_eq!(s, SampleSet::build(&a, &spec).unwrap());
        let big = s.points.iter().map(|p| p.norm().unwrap()).fold(0.0, f64::max);
        assert!(big > 1.0 && big <= 10.0 * 2.0);
        let other = SampleSet::build(&a, &SampleSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(s.points[5], other.points[5]);
    }

    #[test]
    fn large_algebra_skips_basis_pairs() {
        let a = AlgebraDescriptor::full_matrix(4, ScalarField::Real).unwrap();
        let s = SampleSet::build(&a, &SampleSpec::default()).unwrap();
        assert_eq!(s.pairs.len(), 18 * 4);
    }
}

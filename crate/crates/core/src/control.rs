//! Control functions `φ(x, y)` bounding defects, and the contractive checks.
//!
//! Every supported family is a finite sum of monomials `c·‖x‖^a·‖y‖^b`,
//! which lets the series and window checks evaluate `φ(d^k x, d^k y)` in
//! log space without forming `d^k x`, and read off the growth exponent in
//! closed form.

use serde::{Deserialize, Serialize};

use crate::algebra::Element;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum ControlFunction {
    Zero,
    /// `θ(‖x‖^p + ‖y‖^q + ‖x‖^r‖y‖^s)`; the cross term is optional.
    PowerSum {
        #[serde(alias = "θ")]
        theta: f64,
        p: f64,
        q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<f64>,
    },
    /// `θ‖x‖^p‖y‖^p`.
    ProductPower {
        #[serde(alias = "θ")]
        theta: f64,
        p: f64,
    },
    /// `θ(‖x‖^e + ‖y‖^e)` with `e = 1 + log₂ L`, so that `½φ(2x,2y) = Lφ(x,y)`.
    ScaledPair {
        #[serde(alias = "θ")]
        theta: f64,
        #[serde(alias = "L")]
        contraction: f64,
    },
}

/// One term `coef·‖x‖^ex·‖y‖^ey`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub ex: f64,
    pub ey: f64,
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!("θ must be finite and nonnegative, got {theta}")))
    }
}

/// `t^e` with `0^0 = 1`, `0^e = 0` for `e > 0` and `+∞` for `e < 0`.
fn pow(t: f64, e: f64) -> f64 {
    t.powf(e)
}

impl ControlFunction {
    pub fn power_sum(theta: f64, p: f64, q: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(ControlFunction::PowerSum { theta, p, q, r: None, s: None })
    }

    pub fn power_sum_with_cross(theta: f64, p: f64, q: f64, r: f64, s: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(ControlFunction::PowerSum { theta, p, q, r: Some(r), s: Some(s) })
    }

    pub fn product_power(theta: f64, p: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(ControlFunction::ProductPower { theta, p })
    }

    pub fn scaled_pair(theta: f64, contraction: f64) -> Result<Self> {
        check_theta(theta)?;
        if !(contraction > 0.0 && contraction < 1.0) {
            return Err(LabError::InvalidArgument(format!(
                "contraction constant must lie in (0,1), got {contraction}"
            )));
        }
        Ok(ControlFunction::ScaledPair { theta, contraction })
    }

    /// Re-checks the constructor invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ControlFunction::Zero => Ok(()),
            ControlFunction::PowerSum { theta, p, q, r, s } => {
                check_theta(theta)?;
                if r.is_some() != s.is_some() {
                    return Err(LabError::InvalidArgument("cross term needs both r and s".into()));
                }
                let all = [Some(p), Some(q), r, s];
                if all.iter().flatten().any(|e| !e.is_finite()) {
                    return Err(LabError::InvalidArgument("exponents must be finite".into()));
                }
                Ok(())
            }
            ControlFunction::ProductPower { theta, p } => {
                check_theta(theta)?;
                if p.is_finite() {
                    Ok(())
                } else {
                    Err(LabError::InvalidArgument("exponent must be finite".into()))
                }
            }
            ControlFunction::ScaledPair { theta, contraction } => Self::scaled_pair(theta, contraction).map(|_| ()),
        }
    }

    pub fn monomials(&self) -> Vec<Monomial> {
        match *self {
            ControlFunction::Zero => Vec::new(),
            ControlFunction::PowerSum { theta, p, q, r, s } => {
                let mut out = vec![
                    Monomial { coef: theta, ex: p, ey: 0.0 },
                    Monomial { coef: theta, ex: 0.0, ey: q },
                ];
                if let (Some(r), Some(s)) = (r, s) {
                    out.push(Monomial { coef: theta, ex: r, ey: s });
                }
                out
            }
            ControlFunction::ProductPower { theta, p } => vec![Monomial { coef: theta, ex: p, ey: p }],
            ControlFunction::ScaledPair { theta, contraction } => {
                let e = 1.0 + contraction.log2();
                vec![
                    Monomial { coef: theta, ex: e, ey: 0.0 },
                    Monomial { coef: theta, ex: 0.0, ey: e },
                ]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.monomials().iter().all(|m| m.coef == 0.0)
    }

    /// `φ` evaluated on argument norms.
    pub fn eval_norms(&self, nx: f64, ny: f64) -> f64 {
        self.monomials()
            .iter()
            .filter(|m| m.coef != 0.0)
            .map(|m| m.coef * pow(nx, m.ex) * pow(ny, m.ey))
            .sum()
    }

    /// `weight·φ(sx·‖x‖-scaled, sy·‖y‖-scaled)` computed in log space:
    /// returns `exp(log_weight) · φ(exp(log_sx)·nx, exp(log_sy)·ny)`.
    pub fn eval_scaled(&self, nx: f64, ny: f64, log_sx: f64, log_sy: f64, log_weight: f64) -> f64 {
        let mut total = 0.0;
        for m in self.monomials().iter().filter(|m| m.coef != 0.0) {
            let lx = match log_pow(nx, m.ex, log_sx) {
                Some(v) => v,
                None => continue,
            };
            let ly = match log_pow(ny, m.ey, log_sy) {
                Some(v) => v,
                None => continue,
            };
            total += (m.coef.ln() + lx + ly + log_weight).exp();
        }
        total
    }

    /// Largest exponent of the `d^k` growth of `φ(d^{k·sx} x, d^{k·sy} y)` over
    /// the monomials that do not vanish at the given arguments. `None` when
    /// `φ` vanishes identically there.
    pub fn growth_exponent(&self, x_zero: bool, y_zero: bool, scale_x: bool, scale_y: bool) -> Option<f64> {
        self.monomials()
            .iter()
            .filter(|m| m.coef != 0.0)
            .filter(|m| !(x_zero && m.ex > 0.0) && !(y_zero && m.ey > 0.0))
            .map(|m| {
                let gx = if scale_x && !x_zero { m.ex } else { 0.0 };
                let gy = if scale_y && !y_zero { m.ey } else { 0.0 };
                gx + gy
            })
            .reduce(f64::max)
    }
}

/// `log((t·e^{ls})^e)`, or `None` when the factor is exactly zero.
fn log_pow(t: f64, e: f64, ls: f64) -> Option<f64> {
    if t == 0.0 {
        if e > 0.0 {
            None
        } else if e == 0.0 {
            Some(0.0)
        } else {
            Some(f64::INFINITY)
        }
    } else if e == 0.0 {
        Some(0.0)
    } else {
        Some(e * (t.ln() + ls))
    }
}

pub fn evaluate_control(phi: &ControlFunction, x: &Element, y: &Element) -> Result<f64> {
    Ok(phi.eval_norms(x.norm()?, y.norm()?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractiveVerdict {
    /// `½φ(2x,2y) ≤ Lφ(x,y)` on every sample.
    pub doubling_pass: bool,
    /// Largest `½φ(2x,2y) / (Lφ(x,y))`.
    pub doubling_worst_ratio: f64,
    /// `φ(x+x', y+y') ≤ L(φ(x,y) + φ(x',y'))` on every sample combination.
    pub pairwise_pass: bool,
    /// Largest `φ(x+x', y+y') / (L(φ(x,y) + φ(x',y')))`.
    pub pairwise_worst_ratio: f64,
}

impl ContractiveVerdict {
    pub fn pass(&self) -> bool {
        self.doubling_pass && self.pairwise_pass
    }
}

const CONTRACTIVE_SLACK: f64 = 1e-12;

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn check_contractive_subadditive(
    phi: &ControlFunction,
    contraction: f64,
    samples: &[(Element, Element)],
) -> Result<ContractiveVerdict> {
    if !(contraction > 0.0 && contraction < 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "contraction constant must lie in (0,1), got {contraction}"
        )));
    }
    if samples.is_empty() {
        return Err(LabError::InvalidArgument("contractive check needs samples".into()));
    }
    let mut values = Vec::with_capacity(samples.len());
    let mut doubling_worst = 0.0f64;
    for (x, y) in samples {
        let v = evaluate_control(phi, x, y)?;
        let doubled = 0.5 * evaluate_control(phi, &x.scale_real(2.0), &y.scale_real(2.0))?;
        doubling_worst = doubling_worst.max(ratio(doubled, contraction * v));
        values.push(v);
    }
    let mut pairwise_worst = 0.0f64;
    for i in 0..samples.len() {
        for j in i..samples.len() {
            let sx = &samples[i].0 + &samples[j].0;
            let sy = &samples[i].1 + &samples[j].1;
            let lhs = evaluate_control(phi, &sx, &sy)?;
            pairwise_worst = pairwise_worst.max(ratio(lhs, contraction * (values[i] + values[j])));
        }
    }
    Ok(ContractiveVerdict {
        doubling_pass: doubling_worst <= 1.0 + CONTRACTIVE_SLACK,
        doubling_worst_ratio: doubling_worst,
        pairwise_pass: pairwise_worst <= 1.0 + CONTRACTIVE_SLACK,
        pairwise_worst_ratio: pairwise_worst,
    })
}

//! Finite-length deviation bound for the section error rate and the scaling
//! quantities derived from it.
//!
//! The bound is
//!
//! ```text
//! P(E_sec > ε) ≤ K_T exp{ −κ_T L / (ln M)^{2T−1} · (ε σ² C / 2 − P f_R)² }
//! K_T = C^{2T} (T!)^{11},   κ_T = 1 / (c^{2T} (T!)^{17})
//! ```
//!
//! for any `ε > 2 snr f_R / C`, where `c` and `C` are universal constants
//! that are not known explicitly. Values are therefore meaningful only up to
//! those constants: what is checked is their shape in `L`, `T` and `ε`.

use serde::{Deserialize, Serialize};

use crate::se::{delta_r_min, f_r};
use crate::{CodeParams, Error, Result};

/// Annotation attached to every reported bound.
pub const CONSTANTS_NOTE: &str = "up to unspecified universal constants";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_small: f64,
    pub c_big: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c_small: 1.0,
            c_big: 1.0,
        }
    }
}

fn ln_factorial(t: usize) -> f64 {
    (2..=t).map(|k| (k as f64).ln()).sum()
}

impl BoundConstants {
    pub fn new(c_small: f64, c_big: f64) -> Result<Self> {
        let c = Self { c_small, c_big };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_small > 0.0 && self.c_small.is_finite()) {
            return Err(Error::invalid("c_small", format!("{} is not positive", self.c_small)));
        }
        if !(self.c_big > 0.0 && self.c_big.is_finite()) {
            return Err(Error::invalid("C_big", format!("{} is not positive", self.c_big)));
        }
        Ok(())
    }

    /// `ln K_T`.
    pub fn ln_k(&self, t: usize) -> f64 {
        2.0 * t as f64 * self.c_big.ln() + 11.0 * ln_factorial(t)
    }

    /// `ln κ_T`.
    pub fn ln_kappa(&self, t: usize) -> f64 {
        -2.0 * t as f64 * self.c_small.ln() - 17.0 * ln_factorial(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBound {
    pub bound: f64,
    pub ln_bound: f64,
    pub k_t: f64,
    pub kappa_t: f64,
    /// True when the bound exceeds 1.
    pub vacuous: bool,
}

/// Smallest admissible `ε`: `2 snr f_R / C`.
pub fn epsilon_threshold(params: &CodeParams, f_r_value: f64) -> f64 {
    2.0 * params.snr() * f_r_value / params.capacity()
}

/// Evaluates the deviation bound in the log domain.
pub fn deviation_bound(
    params: &CodeParams,
    t: usize,
    f_r_value: f64,
    epsilon: f64,
    constants: BoundConstants,
) -> Result<DeviationBound> {
    constants.validate()?;
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    if !(f_r_value >= 0.0 && f_r_value.is_finite()) {
        return Err(Error::invalid("f_R", format!("{f_r_value} is not a finite non-negative value")));
    }
    let threshold = epsilon_threshold(params, f_r_value);
    if !(epsilon > threshold) {
        return Err(Error::Precondition(format!(
            "epsilon {epsilon} must exceed 2 snr f_R / C = {threshold}"
        )));
    }
    let gap = epsilon * params.sigma2() * params.capacity() / 2.0 - params.power() * f_r_value;
    let exponent = constants.ln_kappa(t).exp() * params.l() as f64
        / params.ln_m().powi(2 * t as i32 - 1)
        * gap
        * gap;
    let ln_k = constants.ln_k(t);
    let ln_bound = ln_k - exponent;
    let bound = ln_bound.exp();
    Ok(DeviationBound {
        bound,
        ln_bound,
        k_t: ln_k.exp(),
        kappa_t: constants.ln_kappa(t).exp(),
        vacuous: ln_bound > 0.0,
    })
}

/// How `L` and `M` grow with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "regime")]
pub enum Regime {
    /// `M = L^a`.
    PolynomialSections { a: f64 },
    /// `L = k n / ln ln n`.
    LogLogSections { k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentScale {
    pub n: f64,
    /// Real-valued `L` and `M` satisfying `L ln M = n R`.
    pub l: f64,
    pub m: f64,
    /// `L / (ln M)^{2T−1}`.
    pub exponent: f64,
    /// `n / (ln n)^{2T}` or `n / (ln ln n)^{2T}`.
    pub order: f64,
    pub order_expr: String,
}

/// `L`, `M` and the size of the bound's exponent for block length `n`.
///
/// `M` is taken from `L ln M = n R` exactly rather than from a leading-order
/// simplification.
pub fn exponent_scale(n: f64, rate: f64, regime: Regime, t: usize) -> Result<ExponentScale> {
    if !(n >= 16.0) {
        return Err(Error::invalid("n", format!("{n} is below 16")));
    }
    if !(rate > 0.0) {
        return Err(Error::invalid("rate", format!("{rate} is not positive")));
    }
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    let target = n * rate;
    let pow = 2 * t as i32;
    let (l, m, order, order_expr) = match regime {
        Regime::PolynomialSections { a } => {
            if !(a > 0.0) {
                return Err(Error::invalid("a", format!("{a} is not positive")));
            }
            // a L ln L is increasing for L ≥ 1; bisect on ln L.
            let (mut lo, mut hi) = (0.0f64, target.ln().max(1.0) + 1.0);
            while a * hi.exp() * hi < target {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if a * mid.exp() * mid < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let ln_l = 0.5 * (lo + hi);
            let l = ln_l.exp();
            (l, (a * ln_l).exp(), n / n.ln().powi(pow), format!("n/(ln n)^{pow}"))
        }
        Regime::LogLogSections { k } => {
            if !(k > 0.0) {
                return Err(Error::invalid("k", format!("{k} is not positive")));
            }
            let lnln = n.ln().ln();
            let l = k * n / lnln;
            (l, (target / l).exp(), n / lnln.powi(pow), format!("n/(ln ln n)^{pow}"))
        }
    };
    Ok(ExponentScale {
        n,
        l,
        m,
        exponent: l / m.ln().powi(pow - 1),
        order,
        order_expr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityGap {
    pub delta_r_min: f64,
    /// `√κ2 / (ln M √(ln ln M))`.
    pub f_r_at_min: f64,
    /// `2 snr / Δ_R,min`.
    pub t_upper: f64,
    /// `f_R(M)` evaluated at the code's own gap.
    pub f_r: f64,
    /// Whether the code's gap is at least `Δ_R,min`.
    pub gap_admissible: bool,
}

pub fn capacity_gap_report(m: f64, kappa2: f64, params: &CodeParams) -> Result<CapacityGap> {
    if !(m > std::f64::consts::E.exp()) {
        return Err(Error::invalid("M", format!("{m} must exceed e^e")));
    }
    if !(kappa2 > 0.0) {
        return Err(Error::invalid("kappa2", format!("{kappa2} is not positive")));
    }
    let d_min = delta_r_min(m, kappa2)?;
    let ln_m = m.ln();
    let delta_r = params.delta_r();
    Ok(CapacityGap {
        delta_r_min: d_min,
        f_r_at_min: kappa2.sqrt() / (ln_m * ln_m.ln().sqrt()),
        t_upper: 2.0 * params.snr() / d_min,
        f_r: if delta_r > 0.0 {
            f_r(params.m(), delta_r, kappa2)
        } else {
            f64::INFINITY
        },
        gap_admissible: delta_r >= d_min,
    })
}

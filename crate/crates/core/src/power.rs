//! Power allocation across sections.

use serde::{Deserialize, Serialize};

use crate::{CodeParams, Error, Result};

/// Relative tolerance on `Σ P_ℓ = P`.
pub const SUM_TOLERANCE: f64 = 1e-10;

/// Per-section powers `P_1 ≥ P_2 ≥ … ≥ P_L > 0` summing to `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    p: Vec<f64>,
    total: f64,
}

impl PowerAllocation {
    /// The exponentially decaying allocation `P_ℓ ∝ e^{-2Cℓ/L}`, normalised in
    /// closed form.
    pub fn exponential(params: &CodeParams) -> Self {
        let l = params.l() as f64;
        let two_c = 2.0 * params.capacity();
        // (e^{2C/L} - 1) / (1 - e^{-2C})
        let scale = params.power() * (two_c / l).exp_m1() / -(-two_c).exp_m1();
        let p: Vec<f64> = (1..=params.l())
            .map(|ell| scale * (-two_c * ell as f64 / l).exp())
            .collect();
        let total = p.iter().sum();
        let alloc = Self { p, total };
        debug_assert!(alloc.validate(params.power()).is_ok());
        alloc
    }

    /// Accepts a user-supplied allocation after checking positivity,
    /// monotonicity and the power constraint against `power`.
    pub fn from_values(p: Vec<f64>, power: f64) -> Result<Self> {
        let total = p.iter().sum();
        let alloc = Self { p, total };
        alloc.validate(power)?;
        Ok(alloc)
    }

    pub fn validate(&self, power: f64) -> Result<()> {
        if self.p.is_empty() {
            return Err(Error::invalid("allocation", "empty"));
        }
        if let Some(bad) = self.p.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "allocation",
                format!("entry {bad} is not positive"),
            ));
        }
        if let Some(i) = self.p.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::invalid(
                "allocation",
                format!("increases between sections {} and {}", i + 1, i + 2),
            ));
        }
        let rel = (self.total - power).abs() / power;
        if rel > SUM_TOLERANCE {
            return Err(Error::invalid(
                "allocation",
                format!("sums to {} instead of {power}", self.total),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Non-zero amplitudes `√(n P_ℓ)` per section.
    pub fn amplitudes(&self, n: usize) -> Vec<f64> {
        self.p.iter().map(|p| (n as f64 * p).sqrt()).collect()
    }

    /// `ν_ℓ = L P_ℓ / (R τ²)`.
    pub fn nu(&self, params: &CodeParams, tau2: f64) -> Result<Vec<f64>> {
        if !(tau2 > 0.0) {
            return Err(Error::invalid("tau2", format!("{tau2} is not positive")));
        }
        let scale = params.l() as f64 / (params.rate() * tau2);
        Ok(self.p.iter().map(|p| scale * p).collect())
    }
}

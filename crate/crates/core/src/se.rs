//! State evolution and its analytical lower bounds.
//!
//! The recursion is
//!
//! ```text
//! τ_0² = σ² + P,   x_{t+1} = x(τ_t),   τ_{t+1}² = σ² + P (1 − x_{t+1})
//! ```
//!
//! where `x(τ)` is a power-weighted average over sections of the posterior
//! probability assigned to the correct column when the section is observed in
//! Gaussian noise of variance `τ²`. The expectation is estimated by Monte
//! Carlo. Each section draws its own `ceil(S / L)` standard-normal
//! `M`-vectors from stream `ℓ` of the configured seed, so the same draws are
//! reused for every `τ` (common random numbers) and the trace is a
//! deterministic function of the seed.
//!
//! The lower bounds `x_L(τ)`, the per-iteration increments `χ_1, χ`, the
//! residual target `f_R(M)` and the admissible gap `Δ_R` contain universal
//! constants that are never fixed; every value computed from them holds only
//! up to those constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{self, fill_gaussian};
use crate::special::q_function;
use crate::{CodeParams, Error, PowerAllocation, Result};

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    /// Total number of inner-problem samples per evaluation, spread evenly
    /// across sections.
    pub num_samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            num_samples: 100_000,
            seed: 0,
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Free constants of the state-evolution lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// `Δ_R = (C − R)/C`.
    pub delta_r: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub alpha: f64,
    pub upsilon: f64,
    /// Increment-bound parameter, in `(0, min(Δ_R, ½)]`.
    pub delta: f64,
}

impl BoundInputs {
    pub const DEFAULT_KAPPA2: f64 = 1.0;
    pub const DEFAULT_KAPPA3: f64 = 1.0;
    pub const DEFAULT_ALPHA: f64 = 0.5;
    pub const DEFAULT_UPSILON: f64 = 1.0;

    /// Defaults for `params`, with `δ = min(Δ_R, ½)`.
    pub fn for_params(params: &CodeParams) -> Result<Self> {
        Self::new(
            params,
            Self::DEFAULT_KAPPA2,
            Self::DEFAULT_KAPPA3,
            Self::DEFAULT_ALPHA,
            Self::DEFAULT_UPSILON,
        )
    }

    pub fn new(params: &CodeParams, kappa2: f64, kappa3: f64, alpha: f64, upsilon: f64) -> Result<Self> {
        params.require_below_capacity()?;
        let delta_r = params.delta_r();
        let inputs = Self {
            delta_r,
            kappa2,
            kappa3,
            alpha,
            upsilon,
            delta: delta_r.min(0.5),
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_r > 0.0 && self.delta_r < 1.0) {
            return Err(Error::invalid("delta_R", format!("{} not in (0, 1)", self.delta_r)));
        }
        if !(self.kappa2 > 0.0) || !(self.kappa3 > 0.0) {
            return Err(Error::invalid("kappa", "kappa2 and kappa3 must be positive"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", format!("{} not in [0, 1)", self.alpha)));
        }
        if !(self.upsilon > 0.0) {
            return Err(Error::invalid("upsilon", format!("{} is not positive", self.upsilon)));
        }
        let max_delta = self.delta_r.min(0.5);
        if !(self.delta > 0.0 && self.delta <= max_delta) {
            return Err(Error::invalid(
                "delta",
                format!("{} not in (0, {max_delta}]", self.delta),
            ));
        }
        Ok(())
    }
}

/// Estimates `x(τ)` for `τ² = tau2`.
pub fn x_of_tau(tau2: f64, params: &CodeParams, alloc: &PowerAllocation, mc: McConfig) -> Result<Estimate> {
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(Error::invalid("tau2", format!("{tau2} is not positive")));
    }
    if mc.num_samples == 0 {
        return Err(Error::invalid("num_samples", "must be at least 1"));
    }
    let l = params.l();
    let m = params.m();
    let per_section = mc.num_samples.div_ceil(l);
    let tau = tau2.sqrt();
    let amps = alloc.amplitudes(params.n());

    let stats: Vec<(f64, f64)> = amps
        .par_iter()
        .enumerate()
        .map(|(ell, &amp)| {
            let a = amp / tau;
            let mut r = rng::stream(mc.seed, ell as u64);
            let mut u = vec![0.0; m];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..per_section {
                fill_gaussian(&mut r, &mut u, 1.0);
                let v1 = a * (u[0] + a);
                let top = u[1..].iter().fold(v1, |acc, &x| acc.max(a * x));
                let rest: f64 = u[1..].iter().map(|&x| (a * x - top).exp()).sum();
                let head = (v1 - top).exp();
                let ratio = head / (head + rest);
                sum += ratio;
                sum_sq += ratio * ratio;
            }
            let k = per_section as f64;
            let mean = sum / k;
            let var = if per_section > 1 {
                ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, var / k)
        })
        .collect();

    let p = params.power();
    let (mut value, mut var) = (0.0, 0.0);
    for ((mean, var_mean), pl) in stats.iter().zip(alloc.values()) {
        let w = pl / p;
        value += w * mean;
        var += w * w * var_mean;
    }
    Ok(Estimate {
        value,
        std_err: var.sqrt(),
    })
}

/// Why the recursion stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// `x_T ≥ 1 − f_R(M)`.
    Target,
    /// `f_R(M) ≥ 1`, so the target is vacuous; stopped once the increment
    /// `x_T − x_{T−1}` fell below the floor.
    IncrementFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeOptions {
    pub max_iter: usize,
    pub kappa2: f64,
    /// Increment below which the recursion is considered stalled.
    pub increment_floor: f64,
}

impl Default for SeOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            kappa2: BoundInputs::DEFAULT_KAPPA2,
            increment_floor: 1e-4,
        }
    }
}

/// State-evolution sequence up to the stopping index `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeTrace {
    pub x: Vec<f64>,
    pub x_std_err: Vec<f64>,
    pub tau2: Vec<f64>,
    /// `σ_t² = τ_t² − σ² = P (1 − x_t)`.
    pub sigma2_t: Vec<f64>,
    pub sigma_perp2: Vec<f64>,
    pub tau_perp2: Vec<f64>,
    /// Stopping index `T`.
    pub t_stop: usize,
    /// First index at which the increment fell below the floor, at or after
    /// `T`; all vectors have length `t_converged + 1`.
    pub t_converged: usize,
    pub f_r: f64,
    pub stop_rule: StopRule,
}

impl SeTrace {
    /// `τ_T²`.
    pub fn tau2_stop(&self) -> f64 {
        self.tau2[self.t_stop]
    }

    /// `τ²` at the fixed point.
    pub fn tau2_converged(&self) -> f64 {
        self.tau2[self.t_converged]
    }
}

/// `M^{−κ2 δ²} / (δ √ln M)`; with `δ = Δ_R` this is the residual target
/// `f_R(M)`.
pub fn f_r(m: usize, delta: f64, kappa2: f64) -> f64 {
    let ln_m = (m as f64).ln();
    (-kappa2 * delta * delta * ln_m).exp() / (delta * ln_m.sqrt())
}

/// Smallest gap `√(ln ln M / (κ2 ln M))` for which `f_R(M)/Δ_R → 0`.
pub fn delta_r_min(m: f64, kappa2: f64) -> Result<f64> {
    if !(m > std::f64::consts::E) {
        return Err(Error::invalid("M", format!("{m} must exceed e")));
    }
    let ln_m = m.ln();
    Ok((ln_m.ln() / (kappa2 * ln_m)).sqrt())
}

fn perp(cur: f64, prev: f64) -> f64 {
    cur * (1.0 - cur / prev)
}

/// Runs the recursion from `x_0 = 0` until the stopping rule fires, then on
/// to the fixed point.
///
/// A stall before the target is reached means the gap condition fails and is
/// reported as [`Error::NonConvergence`], as is reaching `max_iter` without
/// meeting the stopping rule.
pub fn se_recursion(
    params: &CodeParams,
    alloc: &PowerAllocation,
    mc: McConfig,
    options: SeOptions,
) -> Result<SeTrace> {
    params.require_below_capacity()?;
    if options.max_iter == 0 {
        return Err(Error::invalid("max_iter", "must be at least 1"));
    }
    let (p, sigma2) = (params.power(), params.sigma2());
    let target = f_r(params.m(), params.delta_r(), options.kappa2);
    let stop_rule = if target < 1.0 {
        StopRule::Target
    } else {
        StopRule::IncrementFloor
    };

    let mut x = vec![0.0];
    let mut x_se = vec![0.0];
    let mut tau2 = vec![sigma2 + p];
    let mut t_stop = None;
    let t_converged = loop {
        let t = x.len() - 1;
        if t >= options.max_iter {
            match t_stop {
                Some(_) => break t,
                None => return Err(Error::NonConvergence { iterations: t, x: x[t] }),
            }
        }
        let est = x_of_tau(tau2[t], params, alloc, mc)?;
        let next = est.value.clamp(0.0, 1.0);
        let increment = next - x[t];
        x.push(next);
        x_se.push(est.std_err);
        tau2.push(sigma2 + p * (1.0 - next));
        let stalled = increment < options.increment_floor;
        if t_stop.is_none() {
            match stop_rule {
                StopRule::Target if next >= 1.0 - target => t_stop = Some(t + 1),
                StopRule::Target if stalled => {
                    return Err(Error::NonConvergence { iterations: t + 1, x: next });
                }
                StopRule::IncrementFloor if stalled => t_stop = Some(t + 1),
                _ => {}
            }
        }
        if stalled && t_stop.is_some() {
            break t + 1;
        }
    };
    let t_stop = t_stop.unwrap_or(t_converged);

    let sigma2_t: Vec<f64> = x.iter().map(|xt| p * (1.0 - xt)).collect();
    let mut sigma_perp2 = vec![sigma2_t[0]];
    let mut tau_perp2 = vec![tau2[0]];
    for t in 1..x.len() {
        sigma_perp2.push(perp(sigma2_t[t], sigma2_t[t - 1]));
        tau_perp2.push(perp(tau2[t], tau2[t - 1]));
    }
    Ok(SeTrace {
        x,
        x_std_err: x_se,
        tau2,
        sigma2_t,
        sigma_perp2,
        tau_perp2,
        t_stop,
        t_converged,
        f_r: target,
        stop_rule,
    })
}

fn require_monotone(alloc: &PowerAllocation) -> Result<()> {
    if alloc.values().windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("allocation", "must be non-increasing"));
    }
    Ok(())
}

/// Non-asymptotic lower bound `x_L(τ) ≤ x(τ)` for free constants `α, υ`.
pub fn x_lower_bound(
    tau2: f64,
    params: &CodeParams,
    alloc: &PowerAllocation,
    inputs: &BoundInputs,
) -> Result<f64> {
    inputs.validate()?;
    require_monotone(alloc)?;
    let ln_m = params.ln_m();
    let sqrt_ln_m = ln_m.sqrt();
    let (alpha, upsilon) = (inputs.alpha, inputs.upsilon);
    let nu = alloc.nu(params, tau2)?;
    let lower_edge = 2.0 * (1.0 - upsilon / sqrt_ln_m);
    let p = params.power();
    let total = nu
        .iter()
        .zip(alloc.values())
        .map(|(&v, &pl)| {
            let w = pl / p;
            if v > 2.0 {
                let g = v / 2.0 - 1.0;
                let num = q_function(-alpha * g / v.sqrt() * sqrt_ln_m);
                let den = 1.0 + (-(1.0 - alpha) * g * ln_m).exp();
                w * num / den
            } else if v >= lower_edge {
                let num = q_function(2.0 * upsilon / v.sqrt());
                let den = 1.0 + (-upsilon * sqrt_ln_m).exp();
                w * num / den
            } else {
                0.0
            }
        })
        .sum();
    Ok(total)
}

/// Large-`M` form of the lower bound with constants `κ2, κ3` and `δ`.
pub fn x_lower_bound_asymptotic(
    tau2: f64,
    params: &CodeParams,
    alloc: &PowerAllocation,
    inputs: &BoundInputs,
) -> Result<f64> {
    inputs.validate()?;
    require_monotone(alloc)?;
    let ln_m = params.ln_m();
    let delta = inputs.delta;
    let prefactor = 1.0 - f_r(params.m(), delta, inputs.kappa2);
    let lower_edge = 2.0 * (1.0 - inputs.kappa3 / ln_m.sqrt());
    let nu = alloc.nu(params, tau2)?;
    let p = params.power();
    let (mut above, mut band) = (0.0, 0.0);
    for (&v, &pl) in nu.iter().zip(alloc.values()) {
        if v > 2.0 + delta {
            above += pl / p;
        } else if v >= lower_edge {
            band += pl / p;
        }
    }
    Ok(prefactor * above + 0.25 * band)
}

/// Guaranteed first-step value `χ_1` and per-step increment `χ` for the
/// exponential allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Increments {
    pub chi1: f64,
    pub chi: f64,
    /// `f(M)` with the configured `δ`.
    pub f_m: f64,
}

pub fn chi_increments(params: &CodeParams, inputs: &BoundInputs) -> Result<Increments> {
    inputs.validate()?;
    let f_m = f_r(params.m(), inputs.delta, inputs.kappa2);
    Ok(increments_for(params, inputs.delta, f_m))
}

fn increments_for(params: &CodeParams, delta: f64, f_m: f64) -> Increments {
    let (p, sigma2) = (params.power(), params.sigma2());
    let r = params.rate();
    let l = params.l() as f64;
    let ratio = (1.0 + delta / 2.0) * r / params.capacity();
    let chi1 = (1.0 - f_m) * (p + sigma2) / p * (1.0 - ratio - 5.0 * r / l);
    let chi = (1.0 - f_m) * (sigma2 / p * (1.0 - ratio) - f_m * ratio) - 5.0 * r * (1.0 + sigma2 / p) / l;
    Increments { chi1, chi, f_m }
}

/// Lower bounds on `χ_1` and `χ` in terms of `Δ_R` alone, valid for any
/// `δ ≤ Δ_R` with the same `f(M)`.
pub fn chi_lower_bounds(params: &CodeParams, f_m: f64) -> (f64, f64) {
    let (p, sigma2) = (params.power(), params.sigma2());
    let r = params.rate();
    let l = params.l() as f64;
    let d = params.delta_r();
    let key = (d + d * d) / 2.0;
    let chi1 = (1.0 - f_m) * (p + sigma2) / p * (key - 5.0 * r / l);
    let chi = (1.0 - f_m) * (sigma2 / p * key - f_m) - 5.0 * r * (1.0 + sigma2 / p) / l;
    (chi1, chi)
}

/// Leading-order iteration budget `(P/σ²) / ((Δ_R + Δ_R²)/2)`.
pub fn iteration_budget(params: &CodeParams) -> f64 {
    let d = params.delta_r();
    params.snr() / ((d + d * d) / 2.0)
}

/// Predicted section error rate at `τ_T`: the probability,
/// averaged over sections, that the correct column loses the hard decision
/// when every entry is observed in `N(0, τ_T²)` noise.
///
/// Conditioning on the correct column's noise `Z_1`, the loss probability is
/// `1 − Φ(a_ℓ + Z_1)^{M−1}` with `a_ℓ = √(nP_ℓ)/τ_T`; the outer expectation is
/// estimated from `num_samples` draws of `Z_1` shared across sections.
pub fn se_predicted_ser(
    trace: &SeTrace,
    params: &CodeParams,
    alloc: &PowerAllocation,
    mc: McConfig,
) -> Result<Estimate> {
    predicted_ser_at(trace.tau2_stop(), params, alloc, mc)
}

pub fn predicted_ser_at(
    tau2: f64,
    params: &CodeParams,
    alloc: &PowerAllocation,
    mc: McConfig,
) -> Result<Estimate> {
    if !(tau2 > 0.0) {
        return Err(Error::invalid("tau2", format!("{tau2} is not positive")));
    }
    if mc.num_samples == 0 {
        return Err(Error::invalid("num_samples", "must be at least 1"));
    }
    let tau = tau2.sqrt();
    let a: Vec<f64> = alloc.amplitudes(params.n()).iter().map(|v| v / tau).collect();
    let others = (params.m() - 1) as f64;
    let mut z = vec![0.0; mc.num_samples];
    fill_gaussian(&mut rng::stream(mc.seed, u64::MAX), &mut z, 1.0);
    let l = params.l() as f64;
    let per_sample: Vec<f64> = z
        .par_iter()
        .map(|&z1| {
            a.iter()
                .map(|&al| -(others * (-q_function(al + z1)).ln_1p()).exp_m1())
                .sum::<f64>()
                / l
        })
        .collect();
    let k = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / k;
    let var = if k > 1.0 {
        per_sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Ok(Estimate {
        value: mean,
        std_err: (var / k).sqrt(),
    })
}

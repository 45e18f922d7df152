//! Approximate message passing decoder.
//!
//! Starting from `β⁰ = 0`, iteration `t` computes
//!
//! ```text
//! z^t     = y − A β^t + (z^{t−1} / τ²_{t−1}) (P − ‖β^t‖²/n)
//! s^t     = β^t + Aᵀ z^t
//! β^{t+1} = η^t(s^t)
//! ```
//!
//! where the correction term is absent at `t = 0` and `η^t` is the
//! section-wise posterior mean under the model `s = β + τ_t Z`, evaluated with
//! `τ_t²` (not `τ²_{t+1}`). After `T` iterations the largest entry of each
//! section is taken as the decoded column.

use crate::codebook::{BetaVector, Message};
use crate::design::DesignMatrix;
use crate::{CodeParams, Error, PowerAllocation, Result};

/// Tolerated relative drift of a section sum of `β^t` from `√(n P_ℓ)`.
pub const SECTION_SUM_TOLERANCE: f64 = 1e-6;

/// Where `τ_t²` comes from at each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSchedule<'a> {
    /// Precomputed `τ_0², τ_1², …` from state evolution.
    StateEvolution(&'a [f64]),
    /// `τ_t² = ‖z^t‖²/n`.
    Online,
}

/// Effective noise variance for a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepTau {
    Fixed(f64),
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderOptions {
    /// Include the memory (Onsager) term in the residual update.
    pub onsager: bool,
    /// Keep the per-iteration error and effective-noise vectors.
    pub keep_vectors: bool,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        Self {
            onsager: true,
            keep_vectors: false,
        }
    }
}

/// Decoder state after `t` iterations.
///
/// `beta` is `β^t`. The remaining fields describe the step that produced it:
/// `z` is `z^{t−1}`, `tau2` is `τ²_{t−1}`, `s` is `s^{t−1}` and `lambda` is
/// `λ_{t−1}`. In the initial state `z` is all zeros, which makes the memory
/// term of the first step vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub t: usize,
    pub beta: Vec<f64>,
    pub z: Vec<f64>,
    pub tau2: f64,
    pub lambda: f64,
    pub s: Vec<f64>,
}

impl AmpState {
    pub fn initial(params: &CodeParams) -> Self {
        Self {
            t: 0,
            beta: vec![0.0; params.columns()],
            z: vec![0.0; params.n()],
            tau2: params.sigma2() + params.power(),
            lambda: 0.0,
            s: Vec::new(),
        }
    }
}

/// Per-iteration measurements. Fields tied to a step are `None` at `t = T`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationRecord {
    pub t: usize,
    /// `‖β^t − β_0‖²/n`, when the truth is known.
    pub mse: Option<f64>,
    /// `β_0ᵀ β^t / (nP)`, when the truth is known.
    pub overlap: Option<f64>,
    /// `τ_t²` used by `η^t`.
    pub tau2: Option<f64>,
    /// `‖z^t‖²/n`.
    pub residual_power: Option<f64>,
    /// `λ_t = −(P − ‖β^t‖²/n)/τ²_{t−1}`, for `t ≥ 1`.
    pub lambda: Option<f64>,
    /// `q^t = β^t − β_0`.
    pub error: Option<Vec<f64>>,
    /// `s^t − β_0`.
    pub effective_noise: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DecodeOutput {
    pub state: AmpState,
    pub records: Vec<IterationRecord>,
}

/// Section-wise posterior mean `η(s)` with variance `tau2`.
///
/// Within section `ℓ` the output is `√(nP_ℓ)` times the softmax of
/// `s_i √(nP_ℓ)/τ²`, computed after subtracting the section maximum.
pub fn eta(s: &[f64], tau2: f64, params: &CodeParams, alloc: &PowerAllocation) -> Result<Vec<f64>> {
    let amps = alloc.amplitudes(params.n());
    let mut out = vec![0.0; s.len()];
    eta_into(s, tau2, &amps, params.m(), &mut out)?;
    Ok(out)
}

fn eta_into(s: &[f64], tau2: f64, amps: &[f64], m: usize, out: &mut [f64]) -> Result<()> {
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(Error::invalid("tau2", format!("{tau2} is not positive")));
    }
    if s.len() != amps.len() * m {
        return Err(Error::DimensionMismatch {
            context: "eta input",
            expected: amps.len() * m,
            actual: s.len(),
        });
    }
    for ((sec_in, sec_out), &amp) in s.chunks_exact(m).zip(out.chunks_exact_mut(m)).zip(amps) {
        let c = amp / tau2;
        let top = sec_in.iter().copied().fold(f64::NEG_INFINITY, f64::max) * c;
        let mut sum = 0.0;
        for (o, &x) in sec_out.iter_mut().zip(sec_in) {
            let e = (x * c - top).exp();
            *o = e;
            sum += e;
        }
        let scale = amp / sum;
        for o in sec_out.iter_mut() {
            *o *= scale;
        }
    }
    Ok(())
}

/// Per-section argmax (lowest index on ties), mapped back to the codebook.
pub fn hard_decision(
    beta: &[f64],
    params: &CodeParams,
    alloc: &PowerAllocation,
) -> Result<(Message, BetaVector)> {
    if beta.len() != params.columns() {
        return Err(Error::DimensionMismatch {
            context: "hard decision input",
            expected: params.columns(),
            actual: beta.len(),
        });
    }
    let sections = beta
        .chunks_exact(params.m())
        .map(|sec| {
            let mut best = 0;
            for (i, &v) in sec.iter().enumerate() {
                if v > sec[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    let msg = Message::new(sections, params)?;
    let codeword = msg.to_beta(params, alloc);
    Ok((msg, codeword))
}

/// Fraction of sections whose decoded column differs from the truth.
pub fn section_error_rate(decoded: &Message, truth: &Message) -> Result<f64> {
    if decoded.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "section error rate",
            expected: truth.len(),
            actual: decoded.len(),
        });
    }
    let wrong = decoded
        .sections()
        .iter()
        .zip(truth.sections())
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// An AMP decoder bound to one design matrix and channel output.
pub struct Decoder<'a> {
    a: &'a DesignMatrix,
    y: &'a [f64],
    params: &'a CodeParams,
    amps: Vec<f64>,
    options: DecoderOptions,
}

impl<'a> Decoder<'a> {
    pub fn new(
        a: &'a DesignMatrix,
        y: &'a [f64],
        params: &'a CodeParams,
        alloc: &'a PowerAllocation,
        options: DecoderOptions,
    ) -> Result<Self> {
        if a.rows() != params.n() || a.cols() != params.columns() {
            return Err(Error::DimensionMismatch {
                context: "design matrix shape",
                expected: params.n() * params.columns(),
                actual: a.rows() * a.cols(),
            });
        }
        if y.len() != params.n() {
            return Err(Error::DimensionMismatch {
                context: "channel output",
                expected: params.n(),
                actual: y.len(),
            });
        }
        if alloc.len() != params.l() {
            return Err(Error::DimensionMismatch {
                context: "power allocation",
                expected: params.l(),
                actual: alloc.len(),
            });
        }
        Ok(Self {
            a,
            y,
            params,
            amps: alloc.amplitudes(params.n()),
            options,
        })
    }

    /// One iteration: from `β^t` to `β^{t+1}` using `τ_t²` from `tau`.
    pub fn step(&self, state: &AmpState, tau: StepTau) -> Result<AmpState> {
        let n = self.params.n() as f64;
        let p = self.params.power();
        let t = state.t;
        if state.beta.len() != self.params.columns() || state.z.len() != self.params.n() {
            return Err(Error::DimensionMismatch {
                context: "decoder state",
                expected: self.params.columns(),
                actual: state.beta.len(),
            });
        }

        let beta_norm2: f64 = state.beta.iter().map(|b| b * b).sum();
        let mut z = self.y.to_vec();
        let mut lambda = 0.0;
        if t > 0 {
            let mut ab = vec![0.0; self.params.n()];
            self.a.apply(&state.beta, &mut ab)?;
            for (zi, abi) in z.iter_mut().zip(&ab) {
                *zi -= abi;
            }
            lambda = -(p - beta_norm2 / n) / state.tau2;
            if self.options.onsager {
                let coef = -lambda;
                for (zi, zp) in z.iter_mut().zip(&state.z) {
                    *zi += coef * zp;
                }
            }
        }

        let tau2 = match tau {
            StepTau::Fixed(v) => v,
            StepTau::Online => z.iter().map(|v| v * v).sum::<f64>() / n,
        };
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::NumericFailure {
                iteration: t,
                reason: format!("tau2 = {tau2}"),
            });
        }

        let mut s = vec![0.0; self.params.columns()];
        self.a.apply_transpose(&z, &mut s)?;
        for (si, bi) in s.iter_mut().zip(&state.beta) {
            *si += bi;
        }

        let mut beta = vec![0.0; s.len()];
        eta_into(&s, tau2, &self.amps, self.params.m(), &mut beta)?;
        self.check_sections(&beta, t + 1)?;

        Ok(AmpState {
            t: t + 1,
            beta,
            z,
            tau2,
            lambda,
            s,
        })
    }

    fn check_sections(&self, beta: &[f64], iteration: usize) -> Result<()> {
        for (ell, (sec, &amp)) in beta.chunks_exact(self.params.m()).zip(&self.amps).enumerate() {
            let sum: f64 = sec.iter().sum();
            let drift = (sum - amp).abs() / amp;
            if !(drift <= SECTION_SUM_TOLERANCE) || sec.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::NumericFailure {
                    iteration,
                    reason: format!("section {ell} sums to {sum}, expected {amp}"),
                });
            }
        }
        Ok(())
    }

    /// Runs `iterations` steps and records diagnostics for `t = 0..=T`.
    pub fn run(
        &self,
        schedule: TauSchedule<'_>,
        iterations: usize,
        truth: Option<&BetaVector>,
    ) -> Result<DecodeOutput> {
        if iterations == 0 {
            return Err(Error::invalid("T", "at least one iteration is required"));
        }
        if let TauSchedule::StateEvolution(taus) = schedule {
            if taus.len() < iterations {
                return Err(Error::invalid(
                    "schedule",
                    format!("{} values for {iterations} iterations", taus.len()),
                ));
            }
        }
        if let Some(truth) = truth {
            if truth.values().len() != self.params.columns() {
                return Err(Error::DimensionMismatch {
                    context: "ground truth",
                    expected: self.params.columns(),
                    actual: truth.values().len(),
                });
            }
        }

        let n = self.params.n() as f64;
        let np = n * self.params.power();
        let mut state = AmpState::initial(self.params);
        let mut records = Vec::with_capacity(iterations + 1);
        for t in 0..=iterations {
            let mut rec = IterationRecord {
                t,
                ..Default::default()
            };
            if let Some(truth) = truth {
                let b0 = truth.values();
                let (mut err2, mut dot) = (0.0, 0.0);
                for (b, b0) in state.beta.iter().zip(b0) {
                    err2 += (b - b0) * (b - b0);
                    dot += b * b0;
                }
                rec.mse = Some(err2 / n);
                rec.overlap = Some(dot / np);
                if self.options.keep_vectors {
                    rec.error = Some(state.beta.iter().zip(b0).map(|(b, b0)| b - b0).collect());
                }
            }
            if t == iterations {
                records.push(rec);
                break;
            }
            let tau = match schedule {
                TauSchedule::StateEvolution(taus) => StepTau::Fixed(taus[t]),
                TauSchedule::Online => StepTau::Online,
            };
            let next = self.step(&state, tau)?;
            rec.tau2 = Some(next.tau2);
            rec.residual_power = Some(next.z.iter().map(|v| v * v).sum::<f64>() / n);
            if t > 0 {
                rec.lambda = Some(next.lambda);
            }
            if let (Some(truth), true) = (truth, self.options.keep_vectors) {
                rec.effective_noise =
                    Some(next.s.iter().zip(truth.values()).map(|(s, b0)| s - b0).collect());
            }
            records.push(rec);
            state = next;
        }
        Ok(DecodeOutput { state, records })
    }
}

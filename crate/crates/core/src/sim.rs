//! Seeded Monte Carlo experiments.
//!
//! Every random quantity of trial `i` comes from its own seed,
//! `derive_seed(master_seed, i, tag)` with tags `"message"`, `"matrix"` and
//! `"channel"`, so trials can run in any order on any number of threads and
//! still produce identical results. In pinned-matrix mode a single matrix is
//! drawn once from `derive_seed(master_seed, PINNED_MATRIX_INDEX, "matrix")`
//! and shared by all trials; that is a different experiment from the default
//! fresh-matrix mode, where the design is part of the randomness being
//! averaged over.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{DecodeOutput, Decoder, DecoderOptions, TauSchedule, hard_decision, section_error_rate};
use crate::channel::{ChannelDraw, transmit};
use crate::codebook::{BetaVector, Message};
use crate::design::{DEFAULT_MEMORY_CAP, DesignMatrix, MatrixKind, encode};
use crate::rng::{self, derive_seed};
use crate::se::{Estimate, McConfig, SeOptions, SeTrace, predicted_ser_at, se_recursion};
use crate::{CodeParams, Error, PowerAllocation, Result};

/// Trial index used to seed the shared matrix in pinned-matrix mode.
pub const PINNED_MATRIX_INDEX: u64 = u64::MAX;

/// Largest fraction of failed trials a batch may have and still be usable.
pub const FAILURE_BUDGET: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauMode {
    /// `τ_t²` from the state-evolution trace.
    Se,
    /// `τ_t² = ‖z^t‖²/n`.
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: CodeParams,
    pub matrix_kind: MatrixKind,
    pub fresh_per_trial: bool,
    pub memory_cap: u64,
    pub tau_mode: TauMode,
    /// Number of decoder iterations; defaults to the state-evolution fixed
    /// point.
    pub t_override: Option<usize>,
    pub mc: McConfig,
    pub se_options: SeOptions,
    pub master_seed: u64,
    pub epsilon_list: Vec<f64>,
    /// Transmit without noise while the decoder keeps its nominal `σ²`.
    pub noiseless: bool,
}

impl SimConfig {
    pub fn new(params: CodeParams) -> Self {
        Self {
            params,
            matrix_kind: MatrixKind::DenseGaussian,
            fresh_per_trial: true,
            memory_cap: DEFAULT_MEMORY_CAP,
            tau_mode: TauMode::Se,
            t_override: None,
            mc: McConfig::default(),
            se_options: SeOptions::default(),
            master_seed: 0,
            epsilon_list: Vec::new(),
            noiseless: false,
        }
    }

    pub fn matrix_bytes(&self) -> u64 {
        self.matrix_kind
            .storage_bytes(self.params.n(), self.params.columns())
    }
}

/// Everything random about one trial.
#[derive(Debug, Clone)]
pub struct TrialInputs {
    pub message: Message,
    pub beta: BetaVector,
    pub channel: ChannelDraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: u64,
    pub master_seed: u64,
    pub ser: f64,
    /// `‖β^t − β_0‖²/n` for `t = 0..=T`.
    pub mse_trajectory: Vec<f64>,
    pub decoded_ok: bool,
    /// `‖z^t‖²/n` for `t = 0..T`, recorded in online mode.
    pub tau_online_trajectory: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub epsilon: f64,
    /// Fraction of successful trials with `SER > ε`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub num_trials: u64,
    pub num_ok: u64,
    pub failures: u64,
    pub mean_ser: f64,
    /// Sample standard deviation over `√num_ok`.
    pub std_err: f64,
    pub deviations: Vec<Deviation>,
}

impl Aggregate {
    pub fn from_results(num_trials: u64, results: &[TrialResult], epsilons: &[f64]) -> Self {
        let k = results.len() as f64;
        let mean = if results.is_empty() {
            f64::NAN
        } else {
            results.iter().map(|r| r.ser).sum::<f64>() / k
        };
        let std_err = if results.len() > 1 {
            let var = results.iter().map(|r| (r.ser - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            f64::NAN
        };
        let deviations = epsilons
            .iter()
            .map(|&epsilon| Deviation {
                epsilon,
                fraction: results.iter().filter(|r| r.ser > epsilon).count() as f64 / k,
            })
            .collect();
        Self {
            num_trials,
            num_ok: results.len() as u64,
            failures: num_trials - results.len() as u64,
            mean_ser: mean,
            std_err,
            deviations,
        }
    }

    pub fn failure_budget_exceeded(&self) -> bool {
        self.failures as f64 > FAILURE_BUDGET * self.num_trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub trials: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    pub aggregate: Aggregate,
    /// Number of trials actually run at once after the memory cap.
    pub concurrency: usize,
}

/// A configuration with its state-evolution trace and, in pinned mode, its
/// shared matrix.
#[derive(Debug)]
pub struct Experiment {
    config: SimConfig,
    alloc: PowerAllocation,
    trace: SeTrace,
    iterations: usize,
    schedule: Vec<f64>,
    pinned: Option<DesignMatrix>,
}

impl Experiment {
    pub fn new(config: SimConfig) -> Result<Self> {
        let params = &config.params;
        let required = config.matrix_bytes();
        if required > config.memory_cap {
            return Err(Error::MemoryCap {
                required,
                cap: config.memory_cap,
            });
        }
        for &eps in &config.epsilon_list {
            if !eps.is_finite() {
                return Err(Error::invalid("epsilon_list", format!("{eps} is not finite")));
            }
        }
        let alloc = PowerAllocation::exponential(params);
        let trace = se_recursion(params, &alloc, config.mc, config.se_options)?;
        let iterations = match config.t_override {
            Some(0) => return Err(Error::invalid("T_override", "must be at least 1")),
            Some(t) => t,
            None => trace.t_converged,
        };
        // Past the end of the trace the last value is held.
        let schedule = (0..iterations)
            .map(|t| trace.tau2[t.min(trace.t_converged)])
            .collect();
        let pinned = if config.fresh_per_trial {
            None
        } else {
            let seed = derive_seed(config.master_seed, PINNED_MATRIX_INDEX, "matrix");
            Some(DesignMatrix::sample(params, config.matrix_kind, seed, config.memory_cap)?)
        };
        Ok(Self {
            config,
            alloc,
            trace,
            iterations,
            schedule,
            pinned,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn params(&self) -> &CodeParams {
        &self.config.params
    }

    pub fn alloc(&self) -> &PowerAllocation {
        &self.alloc
    }

    pub fn trace(&self) -> &SeTrace {
        &self.trace
    }

    /// Decoder iterations per trial: the state-evolution fixed point unless
    /// overridden.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Predicted section error rate after [`Self::iterations`] steps.
    pub fn predicted_ser(&self) -> Result<Estimate> {
        let t = self.iterations.min(self.trace.t_converged);
        predicted_ser_at(self.trace.tau2[t], &self.config.params, &self.alloc, self.config.mc)
    }

    /// The design matrix used by `trial`.
    pub fn matrix(&self, trial: u64) -> Result<std::borrow::Cow<'_, DesignMatrix>> {
        match &self.pinned {
            Some(a) => Ok(std::borrow::Cow::Borrowed(a)),
            None => {
                let seed = derive_seed(self.config.master_seed, trial, "matrix");
                DesignMatrix::sample(
                    &self.config.params,
                    self.config.matrix_kind,
                    seed,
                    self.config.memory_cap,
                )
                .map(std::borrow::Cow::Owned)
            }
        }
    }

    /// Message and channel output of `trial` for design `a`.
    pub fn inputs(&self, trial: u64, a: &DesignMatrix) -> Result<TrialInputs> {
        let params = &self.config.params;
        let master = self.config.master_seed;
        let mut msg_rng = rng::stream(derive_seed(master, trial, "message"), 0);
        let message = Message::random(params, &mut msg_rng);
        let beta = message.to_beta(params, &self.alloc);
        let x = encode(a, &beta)?;
        let sigma2 = if self.config.noiseless { 0.0 } else { params.sigma2() };
        let channel = transmit(&x, sigma2, derive_seed(master, trial, "channel"))?;
        Ok(TrialInputs {
            message,
            beta,
            channel,
        })
    }

    /// Runs the decoder on `inputs` with this experiment's schedule.
    pub fn decode(&self, a: &DesignMatrix, inputs: &TrialInputs, keep_vectors: bool) -> Result<DecodeOutput> {
        let options = DecoderOptions {
            keep_vectors,
            ..DecoderOptions::default()
        };
        let decoder = Decoder::new(a, &inputs.channel.y, &self.config.params, &self.alloc, options)?;
        let schedule = match self.config.tau_mode {
            TauMode::Se => TauSchedule::StateEvolution(&self.schedule),
            TauMode::Online => TauSchedule::Online,
        };
        decoder.run(schedule, self.iterations, Some(&inputs.beta))
    }

    pub fn run_trial(&self, trial: u64) -> Result<TrialResult> {
        self.try_trial(trial).map_err(|e| Error::Trial {
            trial,
            source: Box::new(e),
        })
    }

    fn try_trial(&self, trial: u64) -> Result<TrialResult> {
        let a = self.matrix(trial)?;
        let inputs = self.inputs(trial, &a)?;
        let out = self.decode(&a, &inputs, false)?;
        drop(a);
        let params = &self.config.params;
        let (decoded, _) = hard_decision(&out.state.beta, params, &self.alloc)?;
        let ser = section_error_rate(&decoded, &inputs.message)?;
        let mse_trajectory = out.records.iter().map(|r| r.mse.unwrap_or(f64::NAN)).collect();
        let tau_online_trajectory = match self.config.tau_mode {
            TauMode::Online => Some(
                out.records[..self.iterations]
                    .iter()
                    .map(|r| r.residual_power.unwrap_or(f64::NAN))
                    .collect(),
            ),
            TauMode::Se => None,
        };
        Ok(TrialResult {
            trial_index: trial,
            master_seed: self.config.master_seed,
            ser,
            mse_trajectory,
            decoded_ok: ser == 0.0,
            tau_online_trajectory,
        })
    }

    /// Trials that may run at once given `parallelism` and the memory cap.
    pub fn concurrency(&self, parallelism: usize) -> usize {
        let parallelism = parallelism.max(1);
        if self.pinned.is_some() {
            return parallelism;
        }
        let per_trial = self.config.matrix_bytes().max(1);
        let fit = (self.config.memory_cap / per_trial).max(1);
        parallelism.min(usize::try_from(fit).unwrap_or(usize::MAX))
    }

    /// Runs trials `0..num_trials`. Failed trials are recorded and excluded
    /// from the aggregate.
    pub fn run_batch(&self, num_trials: u64, parallelism: usize) -> Result<BatchResult> {
        if num_trials == 0 {
            return Err(Error::invalid("num_trials", "must be at least 1"));
        }
        let concurrency = self.concurrency(parallelism);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(concurrency)
            .build()
            .map_err(|e| Error::invalid("parallelism", e.to_string()))?;
        let outcomes: Vec<Result<TrialResult>> =
            pool.install(|| (0..num_trials).into_par_iter().map(|i| self.run_trial(i)).collect());
        let mut trials = Vec::with_capacity(outcomes.len());
        let mut failures = Vec::new();
        for (i, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(r) => trials.push(r),
                Err(e) => failures.push(TrialFailure {
                    trial_index: i as u64,
                    reason: e.to_string(),
                }),
            }
        }
        let aggregate = Aggregate::from_results(num_trials, &trials, &self.config.epsilon_list);
        Ok(BatchResult {
            trials,
            failures,
            aggregate,
            concurrency,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub n: usize,
    pub t: usize,
    pub num_trials: u64,
    pub failures: u64,
    pub mean_ser: f64,
    pub std_err_ser: f64,
    pub se_predicted_ser: f64,
    pub se_predicted_std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Runs one batch per section size in `grid`, re-deriving `n` from
/// `rate_target` for each.
pub fn sweep_m(
    base: &SimConfig,
    rate_target: f64,
    grid: &[usize],
    num_trials: u64,
    parallelism: usize,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::invalid("M_grid", "is empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("M_grid", "must be strictly increasing"));
    }
    let p = &base.params;
    let mut rows = Vec::with_capacity(grid.len());
    for &m in grid {
        let params = CodeParams::derive(p.l(), m, rate_target, p.power(), p.sigma2())?;
        let exp = Experiment::new(SimConfig {
            params,
            ..base.clone()
        })?;
        let predicted = exp.predicted_ser()?;
        let batch = exp.run_batch(num_trials, parallelism)?;
        rows.push(SweepRow {
            m,
            n: params.n(),
            t: exp.iterations(),
            num_trials: batch.aggregate.num_ok,
            failures: batch.aggregate.failures,
            mean_ser: batch.aggregate.mean_ser,
            std_err_ser: batch.aggregate.std_err,
            se_predicted_ser: predicted.value,
            se_predicted_std_err: predicted.std_err,
        });
    }
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::capacity;

    fn config(l: usize, m: usize, snr: f64, frac: f64) -> SimConfig {
        let params = CodeParams::derive(l, m, frac * capacity(snr), snr, 1.0).unwrap();
        let mut c = SimConfig::new(params);
        c.mc = McConfig { num_samples: 20_000, seed: 7 };
        c.master_seed = 42;
        c.epsilon_list = vec![0.0, 0.05, 1.0];
        c
    }

    #[test]
    fn trial_is_deterministic() {
        let exp = Experiment::new(config(16, 16, 7.0, 0.5)).unwrap();
        assert_eq!(exp.run_trial(3).unwrap(), exp.run_trial(3).unwrap());
        assert_ne!(exp.run_trial(3).unwrap().mse_trajectory, exp.run_trial(4).unwrap().mse_trajectory);
    }

    #[test]
    fn mse_starts_at_power() {
        let exp = Experiment::new(config(16, 16, 7.0, 0.5)).unwrap();
        let p = exp.params().power();
        for i in 0..5 {
            let r = exp.run_trial(i).unwrap();
            assert!((r.mse_trajectory[0] - p).abs() <= 1e-10 * p);
            assert_eq!(r.mse_trajectory.len(), exp.iterations() + 1);
            let scaled = r.ser * 16.0;
            assert_eq!(scaled, scaled.round());
        }
    }

    #[test]
    fn noiseless_trials_decode() {
        let mut c = config(16, 16, 7.0, 0.5);
        c.noiseless = true;
        let exp = Experiment::new(c).unwrap();
        let batch = exp.run_batch(20, 1).unwrap();
        assert_eq!(batch.aggregate.failures, 0);
        assert!(batch.trials.iter().all(|t| t.ser == 0.0 && t.decoded_ok));
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let exp = Experiment::new(config(16, 32, 7.0, 0.6)).unwrap();
        let a = exp.run_batch(12, 1).unwrap();
        let b = exp.run_batch(12, 8).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.aggregate, b.aggregate);
    }

    #[test]
    fn deviations_are_monotone_and_bounded() {
        let exp = Experiment::new(config(16, 16, 3.0, 0.9)).unwrap();
        let agg = exp.run_batch(30, 1).unwrap().aggregate;
        assert_eq!(agg.deviations[2].fraction, 0.0);
        assert!(agg.deviations[0].fraction >= agg.deviations[1].fraction);
    }

    #[test]
    fn pinned_mode_shares_one_matrix() {
        let mut c = config(8, 16, 7.0, 0.5);
        c.fresh_per_trial = false;
        let exp = Experiment::new(c).unwrap();
        let a0 = exp.matrix(0).unwrap().materialize();
        assert_eq!(a0, exp.matrix(9).unwrap().materialize());
        let fresh = Experiment::new(config(8, 16, 7.0, 0.5)).unwrap();
        assert_ne!(fresh.matrix(0).unwrap().materialize(), fresh.matrix(9).unwrap().materialize());
    }

    #[test]
    fn memory_cap_limits_concurrency() {
        let mut c = config(16, 16, 7.0, 0.5);
        c.memory_cap = 3 * c.matrix_bytes();
        let exp = Experiment::new(c.clone()).unwrap();
        assert_eq!(exp.concurrency(8), 3);
        assert_eq!(exp.concurrency(2), 2);
        c.memory_cap = c.matrix_bytes() - 1;
        assert!(matches!(Experiment::new(c), Err(Error::MemoryCap { .. })));
    }

    #[test]
    fn online_mode_records_residuals() {
        let mut c = config(16, 16, 7.0, 0.5);
        c.tau_mode = TauMode::Online;
        let exp = Experiment::new(c).unwrap();
        let r = exp.run_trial(0).unwrap();
        let taus = r.tau_online_trajectory.unwrap();
        assert_eq!(taus.len(), exp.iterations());
        assert!(taus.iter().all(|t| *t > 0.0));
    }

    #[test]
    fn aggregate_arithmetic() {
        let mk = |ser| TrialResult {
            trial_index: 0,
            master_seed: 0,
            ser,
            mse_trajectory: vec![],
            decoded_ok: ser == 0.0,
            tau_online_trajectory: None,
        };
        let rs = [mk(0.0), mk(0.25), mk(0.5)];
        let agg = Aggregate::from_results(4, &rs, &[0.1]);
        assert_eq!(agg.failures, 1);
        assert!(agg.failure_budget_exceeded());
        assert!((agg.mean_ser - 0.25).abs() < 1e-15);
        assert!((agg.std_err - (0.0625f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((agg.deviations[0].fraction - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_point_sweep_matches_batch() {
        let base = config(16, 16, 7.0, 0.5);
        let target = 0.5 * capacity(7.0);
        let sweep = sweep_m(&base, target, &[16], 6, 1).unwrap();
        let batch = Experiment::new(base).unwrap().run_batch(6, 1).unwrap();
        assert_eq!(sweep.rows.len(), 1);
        assert_eq!(sweep.rows[0].mean_ser, batch.aggregate.mean_ser);
        assert!(sweep_m(&config(16, 16, 7.0, 0.5), target, &[32, 16], 1, 1).is_err());
    }
}

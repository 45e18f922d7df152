//! Flat JSON experiment configuration.

use serde::{Deserialize, Serialize};
use sparc_core::bounds::BoundConstants;
use sparc_core::design::{DEFAULT_MEMORY_CAP, MatrixKind};
use sparc_core::params::bits_to_nats;
use sparc_core::se::{BoundInputs, McConfig, SeOptions};
use sparc_core::sim::{SimConfig, TauMode};
use sparc_core::CodeParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// One experiment. Field names match the JSON keys.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub L: usize,
    pub M: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub R_bits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub R_nats: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub P: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,

    #[serde(default = "default_kind")]
    pub matrix_kind: MatrixKind,
    #[serde(default = "default_true")]
    pub fresh_per_trial: bool,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_bytes: u64,

    #[serde(default = "default_tau_mode")]
    pub tau_mode: TauMode,
    #[serde(default)]
    pub T_override: Option<usize>,

    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub se_seed: u64,
    #[serde(default = "default_max_iter")]
    pub se_max_iter: usize,

    #[serde(default = "default_trials")]
    pub num_trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub epsilon_list: Vec<f64>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub noiseless: bool,

    #[serde(default = "default_kappa2")]
    pub kappa2: f64,
    #[serde(default = "default_kappa3")]
    pub kappa3: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_upsilon")]
    pub upsilon: f64,
    #[serde(default = "default_one")]
    pub c_small: f64,
    #[serde(default = "default_one")]
    pub C_big: f64,

    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,

    #[serde(default)]
    pub M_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub bound_T: Option<usize>,
    #[serde(default)]
    pub bound_epsilon: Option<f64>,
}

fn default_kind() -> MatrixKind {
    MatrixKind::DenseGaussian
}
fn default_true() -> bool {
    true
}
fn default_memory_cap() -> u64 {
    DEFAULT_MEMORY_CAP
}
fn default_tau_mode() -> TauMode {
    TauMode::Se
}
fn default_mc_samples() -> usize {
    McConfig::default().num_samples
}
fn default_max_iter() -> usize {
    SeOptions::default().max_iter
}
fn default_trials() -> u64 {
    100
}
fn default_parallelism() -> usize {
    1
}
fn default_kappa2() -> f64 {
    BoundInputs::DEFAULT_KAPPA2
}
fn default_kappa3() -> f64 {
    BoundInputs::DEFAULT_KAPPA3
}
fn default_alpha() -> f64 {
    BoundInputs::DEFAULT_ALPHA
}
fn default_upsilon() -> f64 {
    BoundInputs::DEFAULT_UPSILON
}
fn default_one() -> f64 {
    1.0
}
fn default_format() -> Format {
    Format::Csv
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        match (self.R_bits, self.R_nats) {
            (Some(_), Some(_)) => return bad("give exactly one of R_bits and R_nats, not both".into()),
            (None, None) => return bad("one of R_bits or R_nats is required".into()),
            _ => {}
        }
        match (self.snr, self.P, self.sigma2) {
            (Some(_), None, None) | (None, Some(_), Some(_)) => {}
            _ => return bad("give either snr, or both P and sigma2".into()),
        }
        let positive = [
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
            ("upsilon", self.upsilon),
            ("c_small", self.c_small),
            ("C_big", self.C_big),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be at least 1".into());
        }
        if self.num_trials == 0 {
            return bad("num_trials must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.epsilon_list.iter().any(|e| !e.is_finite()) {
            return bad("epsilon_list entries must be finite".into());
        }
        Ok(())
    }

    /// Target rate in nats.
    pub fn rate_nats(&self) -> f64 {
        match (self.R_bits, self.R_nats) {
            (Some(b), _) => bits_to_nats(b),
            (_, Some(n)) => n,
            _ => f64::NAN,
        }
    }

    pub fn power_and_noise(&self) -> (f64, f64) {
        match (self.snr, self.P, self.sigma2) {
            (Some(snr), _, _) => (snr, 1.0),
            (_, Some(p), Some(s)) => (p, s),
            _ => (f64::NAN, f64::NAN),
        }
    }

    pub fn params_for(&self, m: usize) -> Result<CodeParams, CliError> {
        let (p, sigma2) = self.power_and_noise();
        Ok(CodeParams::derive(self.L, m, self.rate_nats(), p, sigma2)?)
    }

    pub fn params(&self) -> Result<CodeParams, CliError> {
        self.params_for(self.M)
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            num_samples: self.mc_samples,
            seed: self.se_seed,
        }
    }

    pub fn se_options(&self) -> SeOptions {
        SeOptions {
            max_iter: self.se_max_iter,
            kappa2: self.kappa2,
            ..SeOptions::default()
        }
    }

    pub fn bound_constants(&self) -> BoundConstants {
        BoundConstants {
            c_small: self.c_small,
            c_big: self.C_big,
        }
    }

    pub fn sim_config(&self, params: CodeParams) -> SimConfig {
        SimConfig {
            params,
            matrix_kind: self.matrix_kind,
            fresh_per_trial: self.fresh_per_trial,
            memory_cap: self.memory_cap_bytes,
            tau_mode: self.tau_mode,
            t_override: self.T_override,
            mc: self.mc(),
            se_options: self.se_options(),
            master_seed: self.master_seed,
            epsilon_list: self.epsilon_list.clone(),
            noiseless: self.noiseless,
        }
    }

    /// The resolved config as echoed into outputs. The output path is left
    /// out so that the same experiment written to two places gives identical
    /// files.
    pub fn provenance_value(&self) -> serde_json::Value {
        let mut echo = self.clone();
        echo.path = None;
        serde_json::to_value(&echo).expect("config serialises")
    }

    /// Canonical single-line JSON of [`Self::provenance_value`].
    pub fn to_canonical_json(&self) -> String {
        self.provenance_value().to_string()
    }
}

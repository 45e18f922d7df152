//! Subcommand implementations.

use std::path::Path;

use serde_json::json;
use sparc_core::bounds::{
    CONSTANTS_NOTE, Regime, capacity_gap_report, deviation_bound, epsilon_threshold, exponent_scale,
};
use sparc_core::se::{BoundInputs, chi_increments, delta_r_min, f_r, se_recursion};
use sparc_core::sim::{Experiment, FAILURE_BUDGET, sweep_m};
use sparc_core::PowerAllocation;

use crate::output::{Csv, emit, json_document, real};
use crate::{CliError, ExperimentConfig, Format};

pub const SE_HEADER: &str = "t,x_t,tau2_t,sigma2_t,sigma_perp2_t,tau_perp2_t";
pub const SWEEP_HEADER: &str = "M,n,T,num_trials,mean_ser,std_err_ser,se_predicted_ser";

fn matrix_mode(cfg: &ExperimentConfig) -> &'static str {
    if cfg.fresh_per_trial { "fresh" } else { "pinned" }
}

pub fn se(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let params = cfg.params()?;
    let alloc = PowerAllocation::exponential(&params);
    let trace = se_recursion(&params, &alloc, cfg.mc(), cfg.se_options())?;
    let inputs = BoundInputs::new(&params, cfg.kappa2, cfg.kappa3, cfg.alpha, cfg.upsilon)?;
    let inc = chi_increments(&params, &inputs)?;
    let d_min = delta_r_min(params.m() as f64, cfg.kappa2).unwrap_or(f64::NAN);

    let text = match cfg.format {
        Format::Csv => {
            let mut csv = Csv::new(cfg, SE_HEADER);
            for t in 0..trace.x.len() {
                csv.row(&[
                    t.to_string(),
                    real(trace.x[t]),
                    real(trace.tau2[t]),
                    real(trace.sigma2_t[t]),
                    real(trace.sigma_perp2[t]),
                    real(trace.tau_perp2[t]),
                ]);
            }
            csv.footer("T", &trace.t_stop.to_string());
            csv.footer("T_converged", &trace.t_converged.to_string());
            csv.footer("f_R", &real(trace.f_r));
            csv.footer("delta_R", &real(params.delta_r()));
            csv.footer("delta_R_min", &real(d_min));
            csv.footer("chi", &real(inc.chi));
            csv.footer("chi1", &real(inc.chi1));
            csv.finish()
        }
        Format::Json => json_document(
            cfg,
            json!({
                "trace": trace,
                "T": trace.t_stop,
                "f_R": trace.f_r,
                "delta_R": params.delta_r(),
                "delta_R_min": d_min,
                "chi": inc.chi,
                "chi1": inc.chi1,
                "note": CONSTANTS_NOTE,
            }),
        ),
    };
    emit(cfg.path.as_deref(), &text)
}

pub fn sim(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let params = cfg.params()?;
    let exp = Experiment::new(cfg.sim_config(params))?;
    let predicted = exp.predicted_ser()?;
    let batch = exp.run_batch(cfg.num_trials, cfg.parallelism)?;
    let agg = &batch.aggregate;
    let aggregate = json!({
        "matrix_mode": matrix_mode(cfg),
        "T": exp.iterations(),
        "num_trials": agg.num_trials,
        "num_ok": agg.num_ok,
        "failures": agg.failures,
        "failed_trials": batch.failures,
        "mean_ser": agg.mean_ser,
        "std_err": agg.std_err,
        "deviations": agg.deviations,
        "se_predicted_ser": predicted.value,
        "se_predicted_std_err": predicted.std_err,
    });

    match cfg.format {
        Format::Csv => {
            let mse_cols: Vec<String> = (0..=exp.iterations()).map(|t| format!("mse_{t}")).collect();
            let mut csv = Csv::new(cfg, &format!("trial,seed,ser,decoded_ok,{}", mse_cols.join(",")));
            for r in &batch.trials {
                let mut fields = vec![
                    r.trial_index.to_string(),
                    r.master_seed.to_string(),
                    real(r.ser),
                    r.decoded_ok.to_string(),
                ];
                fields.extend(r.mse_trajectory.iter().map(|v| real(*v)));
                csv.row(&fields);
            }
            let agg_text = json_document(cfg, json!({ "aggregate": aggregate }));
            match cfg.path.as_deref() {
                Some(p) => {
                    emit(Some(p), &csv.finish())?;
                    let agg_path = Path::new(p).with_extension("aggregate.json");
                    std::fs::write(agg_path, agg_text)?;
                }
                None => {
                    emit(None, &csv.finish())?;
                    eprint!("{agg_text}");
                }
            }
        }
        Format::Json => {
            let text = json_document(cfg, json!({ "aggregate": aggregate, "trials": batch.trials }));
            emit(cfg.path.as_deref(), &text)?;
        }
    }
    if agg.failure_budget_exceeded() {
        return Err(CliError::FailureBudget {
            failures: agg.failures,
            trials: agg.num_trials,
        });
    }
    Ok(())
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let grid = cfg
        .M_grid
        .clone()
        .ok_or_else(|| CliError::Usage("sweep needs M_grid in the config or --m-grid".into()))?;
    let first = *grid
        .first()
        .ok_or_else(|| CliError::Config("M_grid is empty".into()))?;
    let base = cfg.sim_config(cfg.params_for(first)?);
    let result = sweep_m(&base, cfg.rate_nats(), &grid, cfg.num_trials, cfg.parallelism)?;

    let text = match cfg.format {
        Format::Csv => {
            let mut csv = Csv::new(cfg, SWEEP_HEADER);
            for r in &result.rows {
                csv.row(&[
                    r.m.to_string(),
                    r.n.to_string(),
                    r.t.to_string(),
                    r.num_trials.to_string(),
                    real(r.mean_ser),
                    real(r.std_err_ser),
                    real(r.se_predicted_ser),
                ]);
            }
            csv.footer("matrix_mode", matrix_mode(cfg));
            csv.finish()
        }
        Format::Json => json_document(
            cfg,
            json!({ "matrix_mode": matrix_mode(cfg), "rows": result.rows }),
        ),
    };
    emit(cfg.path.as_deref(), &text)?;
    let failures: u64 = result.rows.iter().map(|r| r.failures).sum();
    let trials = cfg.num_trials * grid.len() as u64;
    if failures as f64 > FAILURE_BUDGET * trials as f64 {
        return Err(CliError::FailureBudget { failures, trials });
    }
    Ok(())
}

pub fn bounds(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let params = cfg.params()?;
    params.require_below_capacity()?;
    let epsilon = cfg
        .bound_epsilon
        .ok_or_else(|| CliError::Usage("bounds needs bound_epsilon in the config or --epsilon".into()))?;
    let f_r_value = f_r(params.m(), params.delta_r(), cfg.kappa2);
    let threshold = epsilon_threshold(&params, f_r_value);
    let t = match cfg.bound_T {
        Some(t) => t,
        None => {
            let alloc = PowerAllocation::exponential(&params);
            se_recursion(&params, &alloc, cfg.mc(), cfg.se_options())?.t_stop
        }
    };
    let bound = deviation_bound(&params, t, f_r_value, epsilon, cfg.bound_constants())?;

    let n = params.n() as f64;
    let (l, m) = (params.l() as f64, params.m() as f64);
    let scale = |regime| exponent_scale(n, params.rate(), regime, t).ok();
    let polynomial = if l > 1.0 {
        scale(Regime::PolynomialSections { a: m.ln() / l.ln() })
    } else {
        None
    };
    let loglog = scale(Regime::LogLogSections { k: l * n.ln().ln() / n });
    let gap = capacity_gap_report(m, cfg.kappa2, &params).ok();

    let text = json_document(
        cfg,
        json!({
            "T": t,
            "epsilon": epsilon,
            "epsilon_threshold": threshold,
            "f_R": f_r_value,
            "log_bound": bound.ln_bound,
            "bound": bound.bound,
            "vacuous_flag": bound.vacuous,
            "K_T": bound.k_t,
            "kappa_T": bound.kappa_t,
            "exponent_scale": { "polynomial_sections": polynomial, "loglog_sections": loglog },
            "capacity_gap": gap,
            "note": CONSTANTS_NOTE,
        }),
    );
    emit(cfg.path.as_deref(), &text)
}

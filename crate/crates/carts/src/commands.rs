//! Drivers behind the `run`, `sweep` and `compare` subcommands.

use std::path::Path;

use carts_core::harness::{run_round, ExperimentConfig, ExperimentOutput, SchedulerKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::apply_param;
use crate::output::{write_json, write_run, RunSummary};
use crate::Error;

/// [`carts_core::harness::run_experiment`] with rounds spread over threads.
/// Rounds share nothing, so the result is identical to the sequential run.
pub fn run_parallel(cfg: &ExperimentConfig) -> Result<ExperimentOutput, Error> {
    cfg.validate()?;
    let rounds = (0..cfg.round_count())
        .into_par_iter()
        .map(|r| run_round(cfg, r, cfg.target_of_round(r)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentOutput::from_rounds(rounds))
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, Error> {
    let out = run_parallel(cfg)?;
    write_run(out_dir, cfg, &out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub stitches: usize,
    pub nmse_mean: f64,
    pub nmse_median: f64,
    pub nmse_p90: f64,
    pub cir_within_2_taps: f64,
    pub est_rate_hz_mean: f64,
    pub tracking_error_mean_m: f64,
    pub smoothed_tracking_error_mean_m: f64,
    pub ranging_error_mean_m: f64,
    pub angular_error_mean_deg: f64,
}

impl SweepRow {
    fn new(param: &str, value: &str, s: &RunSummary) -> Self {
        let a = &s.summary;
        Self {
            param: param.into(),
            value: value.into(),
            stitches: a.stitches,
            nmse_mean: a.nmse_mean,
            nmse_median: a.nmse_median,
            nmse_p90: a.nmse_p90,
            cir_within_2_taps: a.cir_within_2_taps,
            est_rate_hz_mean: a.est_rate_hz_mean,
            tracking_error_mean_m: a.tracking_error_mean_m,
            smoothed_tracking_error_mean_m: a.smoothed_tracking_error_mean_m,
            ranging_error_mean_m: a.ranging_error_mean_m,
            angular_error_mean_deg: a.angular_error_mean_deg,
        }
    }
}

fn write_table(path: &Path, rows: &[SweepRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One full run per value of `param`, each in `out_dir/<param>=<value>/`,
/// plus `sweep.csv` with one summary row per value.
pub fn sweep(base: &ExperimentConfig, param: &str, values: &[String], out_dir: &Path) -> Result<Vec<SweepRow>, Error> {
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut cfg = base.clone();
        apply_param(&mut cfg, param, v)?;
        cfg.validate()?;
        configs.push(cfg);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rows = Vec::with_capacity(values.len());
    for (cfg, v) in configs.iter().zip(values) {
        log::info!("sweep {param}={v}");
        let summary = run(cfg, &out_dir.join(format!("{param}={v}")))?;
        rows.push(SweepRow::new(param, v, &summary));
    }
    write_table(&out_dir.join("sweep.csv"), &rows)?;
    Ok(rows)
}

/// Paired runs: identical config and seed, only the scheduler differs.
/// Writes `out_dir/<scheduler>/` per scheduler, `compare.csv` and
/// `compare.json`.
pub fn compare(base: &ExperimentConfig, schedulers: &[SchedulerKind], out_dir: &Path) -> Result<Vec<RunSummary>, Error> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut summaries = Vec::with_capacity(schedulers.len());
    let mut rows = Vec::with_capacity(schedulers.len());
    for &kind in schedulers {
        let cfg = ExperimentConfig { scheduler: kind, ..base.clone() };
        let summary = run(&cfg, &out_dir.join(kind.as_str()))?;
        rows.push(SweepRow::new("scheduler", kind.as_str(), &summary));
        summaries.push(summary);
    }
    write_table(&out_dir.join("compare.csv"), &rows)?;
    write_json(&out_dir.join("compare.json"), &summaries)?;
    Ok(summaries)
}

pub fn parse_schedulers(list: &str) -> Result<Vec<SchedulerKind>, Error> {
    list.split(',')
        .map(|s| match s.trim() {
            "carts" => Ok(SchedulerKind::Carts),
            "periodic" => Ok(SchedulerKind::Periodic),
            other => Err(Error::BadValue { name: "schedulers".into(), value: other.into() }),
        })
        .collect()
}

//! CSV and JSON artifacts of a run. Column sets are part of the interface
//! (see the README); floats are written in shortest round-trip form so
//! identical runs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use carts_core::harness::{ExperimentConfig, ExperimentOutput, RoundOutput, Summary, TrafficSource};
use carts_core::stitcher::StitchedChannel;
use carts_core::Origin;
use serde::Serialize;

use crate::trace_io::write_schedule;
use crate::Error;

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct MetricRow {
    round: usize,
    target_ue: usize,
    moving: bool,
    slot: u64,
    t: f64,
    n_bands: usize,
    max_age_s: f64,
    nmse: f64,
    cir_peak_error: usize,
    aoa_deg: f64,
    range_m: f64,
    x_est: f64,
    y_est: f64,
    x_true: f64,
    y_true: f64,
}

/// Per-round digest.
#[derive(Debug, Clone, Serialize)]
pub struct RoundRow {
    pub round: usize,
    pub target_ue: usize,
    pub moving: bool,
    pub est_rate_hz: f64,
    pub stitches: usize,
    pub stitch_failures: usize,
    pub nmse_mean: f64,
    pub nmse_median: f64,
    pub cir_within_2_taps: f64,
    pub tracking_error_mean_m: f64,
    pub smoothed_tracking_error_mean_m: f64,
    pub ranging_error_mean_m: f64,
    pub angular_error_mean_deg: f64,
}

impl RoundRow {
    pub fn of(r: &RoundOutput) -> Self {
        let s = Summary::of(&r.metrics);
        Self {
            round: r.round,
            target_ue: r.target_ue,
            moving: r.moving,
            est_rate_hz: r.metrics.est_rate_hz.first().copied().unwrap_or(f64::NAN),
            stitches: s.stitches,
            stitch_failures: r.stitch_failures,
            nmse_mean: s.nmse_mean,
            nmse_median: s.nmse_median,
            cir_within_2_taps: s.cir_within_2_taps,
            tracking_error_mean_m: s.tracking_error_mean_m,
            smoothed_tracking_error_mean_m: s.smoothed_tracking_error_mean_m,
            ranging_error_mean_m: s.ranging_error_mean_m,
            angular_error_mean_deg: s.angular_error_mean_deg,
        }
    }
}

#[derive(Serialize)]
struct AllocationRow {
    round: usize,
    slot: u64,
    ue: usize,
    resource_k: i64,
    start_rb: usize,
    num_rb: usize,
}

#[derive(Serialize)]
struct MeasurementRow {
    round: usize,
    slot: u64,
    t: f64,
    origin: &'static str,
    first_subcarrier: usize,
    n_subcarriers: usize,
}

#[derive(Serialize)]
struct TrajectoryRow {
    round: usize,
    t: f64,
    x_est: f64,
    y_est: f64,
    x_true: f64,
    y_true: f64,
    x_smoothed: f64,
    y_smoothed: f64,
}

#[derive(Serialize)]
struct StitchedRow {
    subcarrier: usize,
    antenna: usize,
    re: f64,
    im: f64,
    provenance_t: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scheduler: &'static str,
    pub n_ues: usize,
    pub rounds: usize,
    pub seed: u64,
    pub horizon_slots: u64,
    pub traffic: String,
    pub summary: Summary,
    pub per_round: Vec<RoundRow>,
}

impl RunSummary {
    pub fn new(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Self {
        Self {
            scheduler: cfg.scheduler.as_str(),
            n_ues: cfg.n_ues,
            rounds: out.rounds.len(),
            seed: cfg.seed,
            horizon_slots: cfg.horizon_slots,
            traffic: traffic_label(&cfg.traffic),
            summary: out.summary(),
            per_round: out.rounds.iter().map(RoundRow::of).collect(),
        }
    }
}

pub fn traffic_label(t: &TrafficSource) -> String {
    match t {
        TrafficSource::Synthetic(level) => format!("{level:?}").to_lowercase(),
        TrafficSource::Schedule(_) => "trace".into(),
    }
}

/// `subcarrier,antenna,re,im,provenance_t` for every cell of a stitched
/// channel.
pub fn write_stitched<W: Write>(s: &StitchedChannel, w: W) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    for (col, &t) in s.provenance.iter().enumerate() {
        for m in 0..s.csi.antennas() {
            let v = s.csi.get(m, col);
            out.serialize(StitchedRow { subcarrier: s.band.start + col, antenna: m, re: v.re, im: v.im, provenance_t: t })?;
        }
    }
    out.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every artifact of one experiment into `dir`:
///
/// | file | rows |
/// |---|---|
/// | `metrics.csv` | one per stitched snapshot |
/// | `rounds.csv` | one per round |
/// | `allocations.csv` | one per SRS grant, all UEs |
/// | `measurements.csv` | one per target measurement |
/// | `trajectory.csv` | one per localization fix |
/// | `stitched_r{round}.csv` | last stitched channel of the round |
/// | `schedule.csv` | replayed trace, only for trace-driven runs |
/// | `summary.json` | aggregate and per-round digest |
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<RunSummary, Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(
        &dir.join("metrics.csv"),
        out.rounds.iter().flat_map(|r| {
            r.samples.iter().map(move |s| MetricRow {
                round: r.round,
                target_ue: r.target_ue,
                moving: r.moving,
                slot: s.slot,
                t: s.t,
                n_bands: s.n_bands,
                max_age_s: s.max_age_s,
                nmse: s.nmse,
                cir_peak_error: s.cir_peak_error,
                aoa_deg: s.aoa_deg,
                range_m: s.range_m,
                x_est: s.x_est,
                y_est: s.y_est,
                x_true: s.x_true,
                y_true: s.y_true,
            })
        }),
    )?;
    write_rows(&dir.join("rounds.csv"), out.rounds.iter().map(RoundRow::of))?;
    write_rows(
        &dir.join("allocations.csv"),
        out.rounds.iter().flat_map(|r| {
            r.allocations.iter().map(move |a| AllocationRow {
                round: r.round,
                slot: a.slot,
                ue: a.ue,
                resource_k: a.resource_k,
                start_rb: a.start_rb,
                num_rb: a.num_rb,
            })
        }),
    )?;
    write_rows(
        &dir.join("measurements.csv"),
        out.rounds.iter().flat_map(|r| {
            r.measurements.iter().map(move |m| MeasurementRow {
                round: r.round,
                slot: m.slot,
                t: m.t,
                origin: match m.origin {
                    Origin::Dmrs => "dmrs",
                    Origin::Srs => "srs",
                },
                first_subcarrier: m.band.start,
                n_subcarriers: m.band.len,
            })
        }),
    )?;
    write_rows(
        &dir.join("trajectory.csv"),
        out.rounds.iter().flat_map(|r| {
            r.trajectory.iter().map(move |p| TrajectoryRow {
                round: r.round,
                t: p.t,
                x_est: p.x_est,
                y_est: p.y_est,
                x_true: p.x_true,
                y_true: p.y_true,
                x_smoothed: p.x_smoothed,
                y_smoothed: p.y_smoothed,
            })
        }),
    )?;
    for r in &out.rounds {
        if let Some(s) = &r.last_stitched {
            let path = dir.join(format!("stitched_r{}.csv", r.round));
            write_stitched(s, create(&path)?)?;
        }
    }
    if let TrafficSource::Schedule(s) = &cfg.traffic {
        write_schedule(s, create(&dir.join("schedule.csv"))?)?;
    }
    let summary = RunSummary::new(cfg, out);
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

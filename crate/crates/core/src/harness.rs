//! Slot-level emulation: traffic replay, SRS scheduling, per-allocation CSI
//! synthesis, stitching and metric collection for one target UE per round.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelScenario, Trajectory};
use crate::metrics::{self, MeasurementRecord, MetricRecord, MetricsError};
use crate::scheduler::{
    periodic_baseline, ConstraintViolation, SchedulerConfig, SchedulerError, SchedulerState, SrsAllocation,
    SrsResourceGrid,
};
use crate::sensing::{self, KalmanConfig, PositionEstimate, RangingConfig};
use crate::stitcher::{resample_uniform, stitch_full, StitchConfig, StitchedChannel};
use crate::trace::{synth_traffic, TraceError, TrafficLevel, TrafficSchedule};
use crate::types::{EstimateBuffer, FrequencyGrid, Origin, TddPattern, UeId, DEFAULT_MAX_AGE_S};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("trajectory ends at {trajectory_end_s} s but the horizon runs to {horizon_s} s")]
    ScenarioTooShort { horizon_s: f64, trajectory_end_s: f64 },
    #[error("traffic schedule covers {schedule} slots for {schedule_ues} UEs, need {horizon} slots for {n_ues}")]
    TrafficMismatch { schedule: u64, schedule_ues: usize, horizon: u64, n_ues: usize },
    #[error("invariant violated at slot {slot}: {violation}")]
    InvariantViolation { slot: u64, violation: ConstraintViolation },
    #[error("measurement for ue {ue} at slot {slot} has no matching allocation")]
    PhantomMeasurement { slot: u64, ue: UeId },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SchedulerKind {
    Carts,
    Periodic,
}

impl SchedulerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerKind::Carts => "carts",
            SchedulerKind::Periodic => "periodic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrafficSource {
    /// Generated per round from the round seed.
    Synthetic(TrafficLevel),
    /// Replayed as-is in every round.
    Schedule(TrafficSchedule),
}

/// Where static UEs are dropped: uniform in range and angle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StaticRegion {
    pub r_min_m: f64,
    pub r_max_m: f64,
    pub max_angle_deg: f64,
}

impl Default for StaticRegion {
    fn default() -> Self {
        Self { r_min_m: 2.0, r_max_m: 8.0, max_angle_deg: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_ues: usize,
    /// The lowest `ceil(n_ues * moving_fraction)` UEs follow the scenario
    /// trajectory; the rest are static.
    pub moving_fraction: f64,
    pub tgt_rate_moving: f64,
    pub tgt_rate_static: f64,
    pub scheduler: SchedulerKind,
    pub scheduler_cfg: SchedulerConfig,
    pub scenario: ChannelScenario,
    pub grid: FrequencyGrid,
    pub tdd: TddPattern,
    pub horizon_slots: u64,
    pub seed: u64,
    /// Number of rounds; `None` makes every UE the target once.
    pub rounds: Option<usize>,
    pub traffic: TrafficSource,
    pub stitch: StitchConfig,
    pub buffer_max_age_s: f64,
    pub kalman: KalmanConfig,
    pub cir_fft_size: usize,
    /// Spline-resample each round's stitched history at the target rate.
    pub resample: bool,
    pub static_region: StaticRegion,
    /// Keep allocation and measurement logs in the output.
    pub keep_logs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_ues: 10,
            moving_fraction: 0.5,
            tgt_rate_moving: 200.0,
            tgt_rate_static: 50.0,
            scheduler: SchedulerKind::Carts,
            scheduler_cfg: SchedulerConfig::default(),
            scenario: ChannelScenario::indoor_office(),
            grid: FrequencyGrid::nr_100mhz(),
            tdd: TddPattern::dddsu(),
            horizon_slots: 4000,
            seed: 0,
            rounds: None,
            traffic: TrafficSource::Synthetic(TrafficLevel::Medium),
            stitch: StitchConfig::default(),
            buffer_max_age_s: DEFAULT_MAX_AGE_S,
            kalman: KalmanConfig::default(),
            cir_fft_size: metrics::DEFAULT_CIR_FFT,
            resample: false,
            static_region: StaticRegion::default(),
            keep_logs: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_ues == 0 {
            return Err(HarnessError::InvalidConfig("n_ues must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.moving_fraction) {
            return Err(HarnessError::InvalidConfig("moving_fraction must lie in [0, 1]"));
        }
        if !(self.tgt_rate_moving > 0.0 && self.tgt_rate_static > 0.0) {
            return Err(HarnessError::InvalidConfig("target rates must be positive"));
        }
        if self.horizon_slots == 0 {
            return Err(HarnessError::InvalidConfig("horizon_slots must be positive"));
        }
        if self.rounds == Some(0) {
            return Err(HarnessError::InvalidConfig("rounds must be positive"));
        }
        if !(self.buffer_max_age_s > 0.0) {
            return Err(HarnessError::InvalidConfig("buffer_max_age_s must be positive"));
        }
        if self.cir_fft_size < self.grid.n_subcarriers() {
            return Err(HarnessError::InvalidConfig("cir_fft_size below the subcarrier count"));
        }
        let r = &self.static_region;
        if !(r.r_min_m > 0.0 && r.r_max_m >= r.r_min_m && (0.0..90.0).contains(&r.max_angle_deg)) {
            return Err(HarnessError::InvalidConfig("static region"));
        }
        self.scenario.validate()?;
        if self.moving_count() > 0 {
            if let Some((_, end)) = self.scenario.trajectory.span() {
                let horizon_s = self.grid.clock().time_of(self.horizon_slots - 1);
                if end < horizon_s {
                    return Err(HarnessError::ScenarioTooShort { horizon_s, trajectory_end_s: end });
                }
            }
        }
        if let TrafficSource::Schedule(s) = &self.traffic {
            if s.n_ues() != self.n_ues || s.horizon_slots() < self.horizon_slots {
                return Err(HarnessError::TrafficMismatch {
                    schedule: s.horizon_slots(),
                    schedule_ues: s.n_ues(),
                    horizon: self.horizon_slots,
                    n_ues: self.n_ues,
                });
            }
            s.validate(self.grid.n_rbs())?;
        }
        Ok(())
    }

    pub fn moving_count(&self) -> usize {
        (self.n_ues as f64 * self.moving_fraction - 1e-9).ceil().max(0.0) as usize
    }

    pub fn is_moving(&self, ue: UeId) -> bool {
        ue < self.moving_count()
    }

    pub fn tgt_rate(&self, ue: UeId) -> f64 {
        if self.is_moving(ue) {
            self.tgt_rate_moving
        } else {
            self.tgt_rate_static
        }
    }

    pub fn round_count(&self) -> usize {
        self.rounds.unwrap_or(self.n_ues)
    }

    /// Target of round `r`; rounds are spread evenly over the UEs.
    pub fn target_of_round(&self, round: usize) -> UeId {
        round * self.n_ues / self.round_count()
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_slots as f64 * self.grid.clock().slot_duration_s()
    }
}

/// Seed of round `round`, mixed with splitmix64 so neighbouring rounds get
/// unrelated streams.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    let mut z = seed ^ (round as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One SRS grant as logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AllocationLogEntry {
    pub slot: u64,
    pub ue: UeId,
    /// −1 for periodic full-band sounding.
    pub resource_k: i64,
    pub start_rb: usize,
    pub num_rb: usize,
}

/// Metrics of one stitched snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StitchSample {
    pub slot: u64,
    pub t: f64,
    pub n_bands: usize,
    /// Age of the oldest column at stitch time.
    pub max_age_s: f64,
    pub nmse: f64,
    pub cir_peak_error: usize,
    pub aoa_deg: f64,
    pub range_m: f64,
    pub x_est: f64,
    pub y_est: f64,
    pub x_true: f64,
    pub y_true: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x_est: f64,
    pub y_est: f64,
    pub x_smoothed: f64,
    pub y_smoothed: f64,
    pub x_true: f64,
    pub y_true: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutput {
    pub round: usize,
    pub target_ue: UeId,
    pub moving: bool,
    pub metrics: MetricRecord,
    pub samples: Vec<StitchSample>,
    pub trajectory: Vec<TrajectoryPoint>,
    /// SRS grants of every UE.
    pub allocations: Vec<AllocationLogEntry>,
    /// Measurements synthesized for the target.
    pub measurements: Vec<MeasurementRecord>,
    pub stitch_failures: usize,
    /// Most recent stitched channel of the round.
    pub last_stitched: Option<StitchedChannel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rounds: Vec<RoundOutput>,
    pub aggregate: MetricRecord,
}

impl ExperimentOutput {
    /// Aggregates rounds in the order given.
    pub fn from_rounds(rounds: Vec<RoundOutput>) -> Self {
        let mut aggregate = MetricRecord::default();
        for r in &rounds {
            aggregate.extend(&r.metrics);
        }
        Self { rounds, aggregate }
    }

    pub fn summary(&self) -> Summary {
        Summary::of(&self.aggregate)
    }
}

/// Scalar digest of an aggregated record.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub stitches: usize,
    pub nmse_mean: f64,
    pub nmse_median: f64,
    pub nmse_p90: f64,
    pub cir_within_2_taps: f64,
    pub est_rate_hz_mean: f64,
    pub tracking_error_mean_m: f64,
    pub tracking_error_median_m: f64,
    pub smoothed_tracking_error_mean_m: f64,
    pub ranging_error_mean_m: f64,
    pub angular_error_mean_deg: f64,
    pub resampled_nmse_mean: f64,
}

impl Summary {
    pub fn of(m: &MetricRecord) -> Self {
        Self {
            stitches: m.nmse_samples.len(),
            nmse_mean: metrics::mean(&m.nmse_samples),
            nmse_median: metrics::median(&m.nmse_samples),
            nmse_p90: metrics::percentile(&m.nmse_samples, 90.0),
            cir_within_2_taps: m.cir_within(2),
            est_rate_hz_mean: metrics::mean(&m.est_rate_hz),
            tracking_error_mean_m: metrics::mean(&m.tracking_errors_m),
            tracking_error_median_m: metrics::median(&m.tracking_errors_m),
            smoothed_tracking_error_mean_m: metrics::mean(&m.smoothed_tracking_errors_m),
            ranging_error_mean_m: metrics::mean(&m.ranging_errors_m),
            angular_error_mean_deg: metrics::mean(&m.angular_errors_deg),
            resampled_nmse_mean: metrics::mean(&m.resampled_nmse),
        }
    }
}

/// Channel of the target in round `round`: the scenario trajectory for
/// moving UEs, a random drop in the static region otherwise. Noise is keyed
/// by the round seed.
pub fn target_scenario(cfg: &ExperimentConfig, round: usize, target: UeId) -> ChannelScenario {
    let seed = round_seed(cfg.seed, round);
    let scenario = cfg.scenario.clone().with_seed(seed);
    if cfg.is_moving(target) {
        return scenario;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5747_4943);
    let r = &cfg.static_region;
    let range = rng.random_range(r.r_min_m..=r.r_max_m);
    let angle = rng.random_range(-r.max_angle_deg..=r.max_angle_deg).to_radians();
    let (x, y) = sensing::localize(angle, range);
    scenario.with_trajectory(Trajectory::stationary(x, y))
}

fn round_traffic(cfg: &ExperimentConfig, round: usize) -> Result<TrafficSchedule, HarnessError> {
    match &cfg.traffic {
        TrafficSource::Synthetic(level) => Ok(synth_traffic(
            *level,
            cfg.n_ues,
            cfg.horizon_slots,
            &cfg.grid,
            &cfg.tdd,
            round_seed(cfg.seed, round) ^ 0x7452_4146,
        )?),
        TrafficSource::Schedule(s) => Ok(s.clone()),
    }
}

/// One round with `target` as the observed UE. The other UEs only take part
/// in scheduling; their CSI is never synthesized.
pub fn run_round(cfg: &ExperimentConfig, round: usize, target: UeId) -> Result<RoundOutput, HarnessError> {
    cfg.validate()?;
    if target >= cfg.n_ues {
        return Err(HarnessError::InvalidConfig("target UE out of range"));
    }
    let scenario = target_scenario(cfg, round, target);
    let traffic = round_traffic(cfg, round)?;
    let clock = cfg.grid.clock();
    let srs_grid = SrsResourceGrid::build(&cfg.grid)?;
    let rates: Vec<f64> = (0..cfg.n_ues).map(|ue| cfg.tgt_rate(ue)).collect();
    let mut state = SchedulerState::new(rates, cfg.grid.n_rbs(), 0.0)?;
    let ranging = RangingConfig::from_scenario(&scenario);
    let mut buffer = EstimateBuffer::new(cfg.buffer_max_age_s);

    let mut out = RoundOutput {
        round,
        target_ue: target,
        moving: cfg.is_moving(target),
        metrics: MetricRecord::default(),
        samples: Vec::new(),
        trajectory: Vec::new(),
        allocations: Vec::new(),
        measurements: Vec::new(),
        stitch_failures: 0,
        last_stitched: None,
    };
    let mut measurements = Vec::new();
    let mut fixes: Vec<PositionEstimate> = Vec::new();
    let mut truths: Vec<(f64, f64)> = Vec::new();
    let mut history: Vec<StitchedChannel> = Vec::new();

    for slot in 0..cfg.horizon_slots {
        if !cfg.tdd.is_uplink(slot) {
            continue;
        }
        let t = clock.time_of(slot);
        let pusch = traffic.grants(slot);

        let mut fresh = Vec::new();
        if cfg.scheduler == SchedulerKind::Carts {
            for g in pusch.iter().filter(|g| g.ue == target) {
                let mut e = scenario.measure(t, g.rbs.subcarriers(), Origin::Dmrs, &cfg.grid)?;
                e.ue = target;
                fresh.push(e);
            }
        }
        let srs = match cfg.scheduler {
            SchedulerKind::Carts => state.step(pusch, &srs_grid, t, &cfg.scheduler_cfg)?,
            SchedulerKind::Periodic => periodic_baseline(cfg.n_ues, slot, &cfg.tdd, &cfg.grid),
        };
        srs.check_constraints().map_err(|violation| HarnessError::InvariantViolation { slot, violation })?;
        log_allocation(&srs, slot, cfg.keep_logs, &mut out.allocations);
        for rbs in srs.merged_ranges(target) {
            let mut e = scenario.measure(t, rbs.subcarriers(), Origin::Srs, &cfg.grid)?;
            e.ue = target;
            fresh.push(e);
        }
        if fresh.is_empty() {
            continue;
        }
        for e in &fresh {
            let logged = match e.origin {
                Origin::Dmrs => pusch.iter().any(|g| g.ue == target && g.rbs.subcarriers() == e.band),
                Origin::Srs => srs.merged_ranges(target).iter().any(|r| r.subcarriers() == e.band),
            };
            if !logged {
                return Err(HarnessError::PhantomMeasurement { slot, ue: target });
            }
            measurements.push(MeasurementRecord { slot, t, ue: target, origin: e.origin, band: e.band });
        }
        let srs_now = fresh.iter().any(|e| e.origin == Origin::Srs);
        for e in fresh {
            buffer.push(e);
        }
        buffer.evict_stale(t);
        let ready = srs_now
            && buffer.newest().is_some_and(|e| e.origin == Origin::Srs)
            && buffer.coverage_complete(&cfg.grid);
        if !ready {
            continue;
        }
        let Ok(stitched) = stitch_full(buffer.entries(), &cfg.grid, &cfg.stitch) else {
            out.stitch_failures += 1;
            continue;
        };
        let t_ref = stitched.reference_time;
        let truth = scenario.ground_truth_csi(t_ref, &cfg.grid)?;
        let nmse = metrics::nmse(&truth, &stitched.csi)?;
        let cir = metrics::cir_peak_error(&truth, &stitched.csi, cfg.cir_fft_size)?;
        out.metrics.nmse_samples.push(nmse);
        out.metrics.cir_peak_errors.push(cir);
        let (x_true, y_true) = scenario.trajectory.position(t_ref)?;
        let fix = match (
            sensing::estimate_aoa(&stitched.csi, &scenario.array),
            sensing::estimate_range(&stitched.csi, &ranging),
        ) {
            (Ok(aoa), Ok(range)) => Some(PositionEstimate::from_polar(t_ref, aoa, range)),
            _ => None,
        };
        let (x_est, y_est) = fix.map_or((f64::NAN, f64::NAN), |f| (f.x, f.y));
        if let Some(f) = fix {
            fixes.push(f);
            truths.push((x_true, y_true));
        }
        out.samples.push(StitchSample {
            slot,
            t: t_ref,
            n_bands: buffer.len(),
            max_age_s: t_ref - stitched.oldest(),
            nmse,
            cir_peak_error: cir,
            aoa_deg: fix.map_or(f64::NAN, |f| f.aoa_rad.to_degrees()),
            range_m: fix.map_or(f64::NAN, |f| f.range_m),
            x_est,
            y_est,
            x_true,
            y_true,
        });
        if cfg.resample {
            history.push(stitched.clone());
        }
        out.last_stitched = Some(stitched);
    }

    let window = cfg.horizon_s();
    out.metrics.est_rate_hz.push(metrics::estimation_rate(&measurements, target, window));
    let est_xy: Vec<(f64, f64)> = fixes.iter().map(|f| (f.x, f.y)).collect();
    let raw = metrics::tracking_error(&est_xy, &truths)?;
    out.metrics.tracking_errors_m = raw.errors_m;
    out.metrics.ranging_errors_m = raw.ranging_errors_m;
    out.metrics.angular_errors_deg = raw.angular_errors_deg;
    let smoothed = if fixes.len() >= 2 { sensing::kalman_smooth(&fixes, &cfg.kalman).ok() } else { None };
    if let Some(s) = &smoothed {
        out.metrics.smoothed_tracking_errors_m = metrics::tracking_error(s, &truths)?.errors_m;
    }
    out.trajectory = fixes
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let (xs, ys) = smoothed.as_ref().map_or((f.x, f.y), |s| s[i]);
            TrajectoryPoint {
                t: f.t,
                x_est: f.x,
                y_est: f.y,
                x_smoothed: xs,
                y_smoothed: ys,
                x_true: truths[i].0,
                y_true: truths[i].1,
            }
        })
        .collect();
    if cfg.resample && history.len() >= 4 {
        if let Ok(series) = resample_uniform(&history, cfg.tgt_rate(target)) {
            for snap in series {
                let truth = scenario.ground_truth_csi(snap.t, &cfg.grid)?;
                out.metrics.resampled_nmse.push(metrics::nmse(&truth, &snap.csi)?);
            }
        }
    }
    if cfg.keep_logs {
        out.measurements = measurements;
    }
    Ok(out)
}

fn log_allocation(alloc: &SrsAllocation, slot: u64, keep: bool, log: &mut Vec<AllocationLogEntry>) {
    if !keep {
        return;
    }
    log.extend(alloc.grants.iter().map(|g| AllocationLogEntry {
        slot,
        ue: g.ue,
        resource_k: g.resource.log_index(),
        start_rb: g.rbs.start,
        num_rb: g.rbs.len,
    }));
}

/// Runs every round in order and concatenates their metric samples.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let rounds = (0..cfg.round_count())
        .map(|r| run_round(cfg, r, cfg.target_of_round(r)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentOutput::from_rounds(rounds))
}

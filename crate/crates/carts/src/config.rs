//! TOML experiment configuration.
//!
//! Every key is optional; missing keys keep the defaults of
//! [`ExperimentConfig`]. Relative paths (`scenario_file`, `trace.file`)
//! resolve against the directory of the file that names them.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use carts_core::channel::{ChannelScenario, DopplerPolicy, MultipathRay, Trajectory, UniformLinearArray, Waypoint, WALKING_SPEED_MPS};
use carts_core::harness::{ExperimentConfig, SchedulerKind, TrafficSource};
use carts_core::sensing::KalmanConfig;
use carts_core::stitcher::{SmoothingConfig, StitchMethod};
use carts_core::trace::TrafficLevel;
use carts_core::{FrequencyGrid, TddPattern};
use num_complex::Complex64;
use serde::Deserialize;

use crate::trace_io::{self, DEFAULT_SCALE, SOURCE_RBS};
use crate::Error;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n_ues: Option<usize>,
    pub moving_fraction: Option<f64>,
    pub tgt_rate_moving: Option<f64>,
    pub tgt_rate_static: Option<f64>,
    pub scheduler: Option<SchedulerKind>,
    pub urgency_floor: Option<f64>,
    pub horizon_slots: Option<u64>,
    pub seed: Option<u64>,
    pub rounds: Option<usize>,
    pub traffic: Option<TrafficLevel>,
    pub trace: Option<TraceSection>,
    pub n_rbs: Option<usize>,
    pub scs_khz: Option<u32>,
    pub tdd: Option<String>,
    pub buffer_max_age_s: Option<f64>,
    pub cir_fft_size: Option<usize>,
    pub resample: Option<bool>,
    pub keep_logs: Option<bool>,
    pub stitch: Option<StitchSection>,
    pub kalman: Option<KalmanSection>,
    pub static_region: Option<StaticRegionSection>,
    pub scenario: Option<ScenarioSection>,
    pub scenario_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    pub file: PathBuf,
    pub source_rbs: Option<usize>,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StitchSection {
    pub smoothing: Option<bool>,
    pub alpha: Option<f64>,
    pub method: Option<StitchMethod>,
    pub boundary_width: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanSection {
    pub process_noise_accel: Option<f64>,
    pub measurement_noise_pos: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticRegionSection {
    pub r_min_m: Option<f64>,
    pub r_max_m: Option<f64>,
    pub max_angle_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    IndoorOffice,
    SingleRay,
}

/// Channel scenario. Starts from `preset` (default `indoor_office`) and
/// overrides what is given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub preset: Option<Preset>,
    pub carrier_hz: Option<f64>,
    /// Omit to keep the preset; `noiseless = true` disables noise.
    pub snr_db: Option<f64>,
    pub noiseless: Option<bool>,
    pub dmrs_power_offset_db: Option<f64>,
    pub path_loss_exponent: Option<f64>,
    pub reference_distance_m: Option<f64>,
    pub seed: Option<u64>,
    pub array: Option<ArraySection>,
    /// Replaces the preset's rays; the first must be line-of-sight.
    pub rays: Option<Vec<RaySection>>,
    pub trajectory: Option<TrajectorySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub elements: usize,
    pub spacing_wavelengths: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySection {
    /// Magnitude relative to the LOS amplitude.
    pub gain: f64,
    #[serde(default)]
    pub phase_deg: f64,
    #[serde(default)]
    pub excess_delay_ns: f64,
    #[serde(default)]
    pub aoa_offset_deg: f64,
    pub doppler: Option<DopplerPolicy>,
}

/// Exactly one of `stationary`, `waypoints`, `timed` or `rectangle`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub stationary: Option<[f64; 2]>,
    /// Walked at `speed_mps` from t = 0.
    pub waypoints: Option<Vec<[f64; 2]>>,
    /// Explicit `[t, x, y]` samples.
    pub timed: Option<Vec<[f64; 3]>>,
    pub rectangle: Option<RectangleSection>,
    pub speed_mps: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleSection {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
    pub laps: Option<usize>,
}

fn config_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_path_buf(), message: message.into() }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn parse_file_config(text: &str, path: &Path) -> Result<FileConfig, Error> {
    toml::from_str(text).map_err(|e| config_err(path, e.to_string()))
}

pub fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = parse_file_config(&text, path)?;
    file.into_experiment(path)
}

pub fn load_scenario(path: &Path) -> Result<ChannelScenario, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let section: ScenarioSection = toml::from_str(&text).map_err(|e| config_err(path, e.to_string()))?;
    section.build(path)
}

impl ScenarioSection {
    pub fn build(&self, origin: &Path) -> Result<ChannelScenario, Error> {
        let mut s = match self.preset.unwrap_or(Preset::IndoorOffice) {
            Preset::IndoorOffice => ChannelScenario::indoor_office(),
            Preset::SingleRay => ChannelScenario::single_ray(0.0, 3.0),
        };
        if let Some(v) = self.carrier_hz {
            s.carrier_hz = v;
        }
        if let Some(v) = self.snr_db {
            s.snr_db = Some(v);
        }
        if self.noiseless == Some(true) {
            s.snr_db = None;
        }
        if let Some(v) = self.dmrs_power_offset_db {
            s.dmrs_power_offset_db = v;
        }
        if let Some(v) = self.path_loss_exponent {
            s.path_loss_exponent = v;
        }
        if let Some(v) = self.reference_distance_m {
            s.reference_distance_m = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(a) = &self.array {
            s.array = UniformLinearArray::new(a.elements, a.spacing_wavelengths.unwrap_or(0.5));
        }
        if let Some(rays) = &self.rays {
            s.rays = rays
                .iter()
                .map(|r| MultipathRay {
                    relative_gain: Complex64::from_polar(r.gain, r.phase_deg * PI / 180.0),
                    excess_delay_s: r.excess_delay_ns * 1e-9,
                    aoa_offset_rad: r.aoa_offset_deg.to_radians(),
                    doppler: r.doppler.unwrap_or(DopplerPolicy::Geometric),
                })
                .collect();
        }
        if let Some(t) = &self.trajectory {
            s.trajectory = t.build(origin)?;
        }
        s.validate().map_err(|e| config_err(origin, e.to_string()))?;
        Ok(s)
    }
}

impl TrajectorySection {
    fn build(&self, origin: &Path) -> Result<Trajectory, Error> {
        let speed = self.speed_mps.unwrap_or(WALKING_SPEED_MPS);
        if !(speed > 0.0) {
            return Err(config_err(origin, "trajectory speed_mps must be positive"));
        }
        let given = [
            self.stationary.is_some(),
            self.waypoints.is_some(),
            self.timed.is_some(),
            self.rectangle.is_some(),
        ];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(config_err(origin, "trajectory needs exactly one of stationary, waypoints, timed, rectangle"));
        }
        Ok(if let Some([x, y]) = self.stationary {
            Trajectory::stationary(x, y)
        } else if let Some(points) = &self.waypoints {
            let points: Vec<(f64, f64)> = points.iter().map(|&[x, y]| (x, y)).collect();
            Trajectory::polyline(&points, speed)
        } else if let Some(samples) = &self.timed {
            Trajectory { waypoints: samples.iter().map(|&[t, x, y]| Waypoint { t, x, y }).collect() }
        } else {
            let r = self.rectangle.as_ref().expect("checked above");
            Trajectory::rectangle(r.x0, r.y0, r.width, r.height, speed, r.laps.unwrap_or(1))
        })
    }
}

impl FileConfig {
    /// Builds the experiment. `origin` is the config file's path.
    pub fn into_experiment(self, origin: &Path) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::default();
        let err = |m: &str| config_err(origin, m);
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(n_ues, moving_fraction, tgt_rate_moving, tgt_rate_static, scheduler, horizon_slots, seed);
        set!(buffer_max_age_s, cir_fft_size, resample, keep_logs);
        cfg.rounds = self.rounds.or(cfg.rounds);
        if let Some(v) = self.urgency_floor {
            cfg.scheduler_cfg.urgency_floor = v;
        }
        if self.n_rbs.is_some() || self.scs_khz.is_some() {
            cfg.grid = FrequencyGrid::new(
                self.n_rbs.unwrap_or(cfg.grid.n_rbs()),
                self.scs_khz.unwrap_or(cfg.grid.scs_khz()),
            )
            .map_err(|e| config_err(origin, e.to_string()))?;
        }
        if let Some(p) = &self.tdd {
            cfg.tdd = TddPattern::parse(p).ok_or_else(|| err("tdd must be a D/S/U pattern with an uplink slot"))?;
        }
        if let Some(st) = &self.stitch {
            if let Some(m) = st.method {
                cfg.stitch.method = m;
            }
            if let Some(w) = st.boundary_width {
                cfg.stitch.boundary_width = w;
            }
            let alpha = st.alpha.unwrap_or(SmoothingConfig::default().alpha);
            cfg.stitch.smoothing = match st.smoothing {
                Some(false) => None,
                _ => Some(SmoothingConfig { alpha }),
            };
        }
        if let Some(k) = &self.kalman {
            let d = KalmanConfig::default();
            cfg.kalman = KalmanConfig {
                process_noise_accel: k.process_noise_accel.unwrap_or(d.process_noise_accel),
                measurement_noise_pos: k.measurement_noise_pos.unwrap_or(d.measurement_noise_pos),
            };
        }
        if let Some(r) = &self.static_region {
            let d = cfg.static_region;
            cfg.static_region.r_min_m = r.r_min_m.unwrap_or(d.r_min_m);
            cfg.static_region.r_max_m = r.r_max_m.unwrap_or(d.r_max_m);
            cfg.static_region.max_angle_deg = r.max_angle_deg.unwrap_or(d.max_angle_deg);
        }
        match (&self.scenario, &self.scenario_file) {
            (Some(_), Some(_)) => return Err(err("give either [scenario] or scenario_file, not both")),
            (Some(s), None) => cfg.scenario = s.build(origin)?,
            (None, Some(f)) => cfg.scenario = load_scenario(&resolve(origin, f))?,
            (None, None) => {}
        }
        if let Some(level) = self.traffic {
            cfg.traffic = TrafficSource::Synthetic(level);
        }
        if let Some(t) = &self.trace {
            if self.traffic.is_some() {
                return Err(err("give either traffic or [trace], not both"));
            }
            let schedule = trace_io::load_schedule(
                &resolve(origin, &t.file),
                cfg.n_ues,
                t.source_rbs.unwrap_or(SOURCE_RBS),
                t.scale.unwrap_or(DEFAULT_SCALE),
                cfg.grid.n_rbs(),
                &cfg.tdd,
            )?;
            if schedule.n_ues() < cfg.n_ues {
                log::warn!("running with {} UEs, all the trace provides", schedule.n_ues());
                cfg.n_ues = schedule.n_ues();
            }
            if self.horizon_slots.is_none() {
                cfg.horizon_slots = schedule.horizon_slots();
            }
            cfg.traffic = TrafficSource::Schedule(schedule);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Applies one `name=value` override, as used by `sweep`.
pub fn apply_param(cfg: &mut ExperimentConfig, name: &str, value: &str) -> Result<(), Error> {
    let bad = || Error::BadValue { name: name.into(), value: value.into() };
    fn num<T: std::str::FromStr>(v: &str, bad: impl Fn() -> Error) -> Result<T, Error> {
        v.trim().parse().map_err(|_| bad())
    }
    match name {
        "n_ues" => cfg.n_ues = num(value, bad)?,
        "seed" => cfg.seed = num(value, bad)?,
        "rounds" => cfg.rounds = Some(num(value, bad)?),
        "horizon_slots" => cfg.horizon_slots = num(value, bad)?,
        "moving_fraction" => cfg.moving_fraction = num(value, bad)?,
        "tgt_rate_moving" => cfg.tgt_rate_moving = num(value, bad)?,
        "tgt_rate_static" => cfg.tgt_rate_static = num(value, bad)?,
        "boundary_width" => cfg.stitch.boundary_width = num(value, bad)?,
        "snr_db" => {
            cfg.scenario.snr_db = match value.trim() {
                "none" | "inf" => None,
                v => Some(num(v, bad)?),
            }
        }
        "smoothing" => {
            cfg.stitch.smoothing = match value.trim() {
                "on" | "true" => Some(SmoothingConfig::default()),
                "off" | "false" => None,
                _ => return Err(bad()),
            }
        }
        "alpha" => cfg.stitch.smoothing = Some(SmoothingConfig { alpha: num(value, bad)? }),
        "scheduler" => {
            cfg.scheduler = match value.trim() {
                "carts" => SchedulerKind::Carts,
                "periodic" => SchedulerKind::Periodic,
                _ => return Err(bad()),
            }
        }
        "traffic" => {
            cfg.traffic = TrafficSource::Synthetic(match value.trim() {
                "zero" => TrafficLevel::Zero,
                "low" => TrafficLevel::Low,
                "medium" => TrafficLevel::Medium,
                "high" => TrafficLevel::High,
                "full" => TrafficLevel::Full,
                _ => return Err(bad()),
            })
        }
        "method" => {
            cfg.stitch.method = match value.trim() {
                "slope_based" => StitchMethod::SlopeBased,
                "peak_shift" => StitchMethod::PeakShift,
                "naive" => StitchMethod::Naive,
                _ => return Err(bad()),
            }
        }
        _ => return Err(Error::UnknownParam(name.into())),
    }
    Ok(())
}

/// Splits `name=v1,v2,...`.
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<String>), Error> {
    let (name, values) = spec.split_once('=').ok_or_else(|| Error::BadParam(spec.into()))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if name.trim().is_empty() || values.is_empty() {
        return Err(Error::BadParam(spec.into()));
    }
    Ok((name.trim().to_string(), values))
}

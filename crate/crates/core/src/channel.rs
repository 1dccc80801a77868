//! Synthetic multipath ground truth for a UE moving in the plane around a
//! gNB with a uniform linear array at the origin.
//!
//! Angles are measured from the array broadside (+y axis) towards +x, so a
//! UE at `(r sin θ, r cos θ)` arrives at angle `θ`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::types::{CsiMatrix, FrequencyGrid, Origin, SubBandEstimate, SubcarrierRange};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Walking speed used for moving UEs, 3 km/h in m/s.
pub const WALKING_SPEED_MPS: f64 = 3.0 / 3.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("time out of range: t = {t} s outside [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },
    #[error("subcarriers [{start}, {end}) outside the {n} subcarrier grid")]
    BandOutOfGrid { start: usize, end: usize, n: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UniformLinearArray {
    pub elements: usize,
    /// Element spacing in carrier wavelengths.
    pub spacing_wavelengths: f64,
}

impl UniformLinearArray {
    pub fn new(elements: usize, spacing_wavelengths: f64) -> Self {
        Self { elements, spacing_wavelengths }
    }

    /// Steering vector `a_m(θ) = exp(-j2π d m sin θ)`.
    pub fn steering(&self, aoa_rad: f64) -> Vec<Complex64> {
        (0..self.elements)
            .map(|m| Complex64::from_polar(1.0, -2.0 * PI * self.spacing_wavelengths * m as f64 * aoa_rad.sin()))
            .collect()
    }
}

impl Default for UniformLinearArray {
    fn default() -> Self {
        Self { elements: 4, spacing_wavelengths: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DopplerPolicy {
    /// The ray bounces off a fixed point scatterer placed from the UE's
    /// starting position; delay and angle follow the geometry as the UE moves.
    Geometric,
    /// Excess delay and angle offset stay constant relative to the LOS ray.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultipathRay {
    /// Complex gain relative to the nominal LOS amplitude.
    #[cfg_attr(feature = "serde", serde(with = "complex_serde"))]
    pub relative_gain: Complex64,
    pub excess_delay_s: f64,
    pub aoa_offset_rad: f64,
    pub doppler: DopplerPolicy,
}

impl MultipathRay {
    pub fn line_of_sight() -> Self {
        Self {
            relative_gain: Complex64::new(1.0, 0.0),
            excess_delay_s: 0.0,
            aoa_offset_rad: 0.0,
            doppler: DopplerPolicy::Geometric,
        }
    }

    pub fn reflection(relative_gain: Complex64, excess_delay_s: f64, aoa_offset_rad: f64) -> Self {
        Self { relative_gain, excess_delay_s, aoa_offset_rad, doppler: DopplerPolicy::Geometric }
    }

    pub fn fixed(relative_gain: Complex64, excess_delay_s: f64, aoa_offset_rad: f64) -> Self {
        Self { relative_gain, excess_delay_s, aoa_offset_rad, doppler: DopplerPolicy::Fixed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Piecewise-linear UE path. A single waypoint is a stationary UE valid at
/// any time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn stationary(x: f64, y: f64) -> Self {
        Self { waypoints: alloc::vec![Waypoint { t: 0.0, x, y }] }
    }

    /// Walks through `points` at constant `speed_mps` starting at t = 0.
    pub fn polyline(points: &[(f64, f64)], speed_mps: f64) -> Self {
        let mut waypoints = Vec::with_capacity(points.len());
        let mut t = 0.0;
        for (i, &(x, y)) in points.iter().enumerate() {
            if i > 0 {
                let (px, py) = points[i - 1];
                t += (x - px).hypot(y - py) / speed_mps;
            }
            waypoints.push(Waypoint { t, x, y });
        }
        Self { waypoints }
    }

    /// Closed axis-aligned rectangle walked counter-clockwise from
    /// `(x0, y0)`, repeated `laps` times.
    pub fn rectangle(x0: f64, y0: f64, width: f64, height: f64, speed_mps: f64, laps: usize) -> Self {
        let corners = [(x0, y0), (x0 + width, y0), (x0 + width, y0 + height), (x0, y0 + height)];
        let mut points = alloc::vec![(x0, y0)];
        for _ in 0..laps.max(1) {
            for &c in corners[1..].iter().chain(core::iter::once(&corners[0])) {
                points.push(c);
            }
        }
        Self::polyline(&points, speed_mps)
    }

    pub fn is_stationary(&self) -> bool {
        self.waypoints.len() == 1
    }

    pub fn start(&self) -> (f64, f64) {
        let w = self.waypoints[0];
        (w.x, w.y)
    }

    /// Valid time span; `None` for a stationary UE (all times valid).
    pub fn span(&self) -> Option<(f64, f64)> {
        if self.is_stationary() {
            None
        } else {
            Some((self.waypoints[0].t, self.waypoints[self.waypoints.len() - 1].t))
        }
    }

    pub fn position(&self, t: f64) -> Result<(f64, f64), ChannelError> {
        let Some((start, end)) = self.span() else {
            return Ok(self.start());
        };
        if !(t >= start && t <= end) {
            return Err(ChannelError::TimeOutOfRange { t, start, end });
        }
        let i = self.waypoints.partition_point(|w| w.t <= t).clamp(1, self.waypoints.len() - 1);
        let (a, b) = (self.waypoints[i - 1], self.waypoints[i]);
        let f = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
        Ok((a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)))
    }

    fn validate(&self) -> Result<(), ChannelError> {
        if self.waypoints.is_empty() {
            return Err(ChannelError::InvalidScenario("trajectory has no waypoints"));
        }
        if self.waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(ChannelError::InvalidScenario("waypoint times must increase"));
        }
        if self.waypoints.iter().any(|w| w.x.hypot(w.y) <= 0.0) {
            return Err(ChannelError::InvalidScenario("UE may not sit on the array"));
        }
        Ok(())
    }
}

/// Instantaneous parameters of one ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayGeometry {
    pub gain: Complex64,
    pub delay_s: f64,
    pub aoa_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelScenario {
    pub array: UniformLinearArray,
    pub carrier_hz: f64,
    /// `rays[0]` is the line-of-sight ray; its gain may be suppressed to
    /// approximate NLOS.
    pub rays: Vec<MultipathRay>,
    pub trajectory: Trajectory,
    /// Per-subcarrier SNR relative to the nominal LOS power. `None` or an
    /// infinite value disables noise.
    pub snr_db: Option<f64>,
    pub dmrs_power_offset_db: f64,
    pub path_loss_exponent: f64,
    pub reference_distance_m: f64,
    pub seed: u64,
}

impl ChannelScenario {
    /// Noiseless single LOS ray for a UE at a fixed position.
    pub fn single_ray(x: f64, y: f64) -> Self {
        Self {
            array: UniformLinearArray::default(),
            carrier_hz: 4.0e9,
            rays: alloc::vec![MultipathRay::line_of_sight()],
            trajectory: Trajectory::stationary(x, y),
            snr_db: None,
            dmrs_power_offset_db: 3.0,
            path_loss_exponent: 2.0,
            reference_distance_m: 1.0,
            seed: 0,
        }
    }

    /// LOS plus two wall reflections, walking a 3 m × 3 m rectangle at
    /// 3 km/h, SNR 20 dB.
    pub fn indoor_office() -> Self {
        Self {
            rays: alloc::vec![
                MultipathRay::line_of_sight(),
                MultipathRay::reflection(Complex64::new(0.3, 0.0), 25e-9, 35f64.to_radians()),
                MultipathRay::reflection(Complex64::new(0.2, 0.0), 60e-9, -50f64.to_radians()),
            ],
            trajectory: Trajectory::rectangle(-1.5, 3.0, 3.0, 3.0, WALKING_SPEED_MPS, 2),
            snr_db: Some(20.0),
            ..Self::single_ray(0.0, 3.0)
        }
    }

    pub fn with_trajectory(mut self, trajectory: Trajectory) -> Self {
        self.trajectory = trajectory;
        self
    }

    pub fn with_snr_db(mut self, snr_db: Option<f64>) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.array.elements == 0 {
            return Err(ChannelError::InvalidScenario("array needs at least one element"));
        }
        let Some(los) = self.rays.first() else {
            return Err(ChannelError::InvalidScenario("at least one ray is required"));
        };
        if los.excess_delay_s != 0.0 || los.aoa_offset_rad != 0.0 {
            return Err(ChannelError::InvalidScenario("first ray must be line-of-sight"));
        }
        for r in &self.rays {
            if !(r.excess_delay_s >= 0.0) {
                return Err(ChannelError::InvalidScenario("excess delay must be non-negative"));
            }
            if r.relative_gain.norm() > 1.0 + 1e-12 {
                return Err(ChannelError::InvalidScenario("relative gain magnitude must not exceed 1"));
            }
        }
        if !(self.carrier_hz > 0.0) || !(self.path_loss_exponent > 0.0) || !(self.reference_distance_m > 0.0) {
            return Err(ChannelError::InvalidScenario("carrier, path loss and reference distance must be positive"));
        }
        self.trajectory.validate()
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Nominal LOS amplitude at distance `d` under the path-loss law.
    pub fn los_amplitude(&self, distance_m: f64) -> f64 {
        (self.reference_distance_m / distance_m).powf(self.path_loss_exponent / 2.0)
    }

    /// Ray parameters at time `t`.
    pub fn rays_at(&self, t: f64) -> Result<Vec<RayGeometry>, ChannelError> {
        let (x, y) = self.trajectory.position(t)?;
        let d = x.hypot(y);
        let los_delay = d / SPEED_OF_LIGHT;
        let los_aoa = x.atan2(y);
        let amp = self.los_amplitude(d);
        let (x0, y0) = self.trajectory.start();
        Ok(self
            .rays
            .iter()
            .enumerate()
            .map(|(i, ray)| {
                let gain = ray.relative_gain * amp;
                if i == 0 {
                    return RayGeometry { gain, delay_s: los_delay, aoa_rad: los_aoa };
                }
                let fixed = RayGeometry {
                    gain,
                    delay_s: los_delay + ray.excess_delay_s,
                    aoa_rad: los_aoa + ray.aoa_offset_rad,
                };
                match ray.doppler {
                    DopplerPolicy::Fixed => fixed,
                    DopplerPolicy::Geometric => match scatterer(x0, y0, ray) {
                        Some((sx, sy)) => RayGeometry {
                            gain,
                            delay_s: (sx.hypot(sy) + (x - sx).hypot(y - sy)) / SPEED_OF_LIGHT,
                            aoa_rad: sx.atan2(sy),
                        },
                        None => fixed,
                    },
                }
            })
            .collect())
    }

    /// Noiseless CSI over the whole grid at time `t`.
    pub fn ground_truth_csi(&self, t: f64, grid: &FrequencyGrid) -> Result<CsiMatrix, ChannelError> {
        self.ground_truth_band(t, grid.full_band(), grid)
    }

    /// Noiseless CSI restricted to `band`. Every entry is evaluated
    /// independently, so restriction commutes exactly with the full-band
    /// evaluation.
    pub fn ground_truth_band(
        &self,
        t: f64,
        band: SubcarrierRange,
        grid: &FrequencyGrid,
    ) -> Result<CsiMatrix, ChannelError> {
        if band.end() > grid.n_subcarriers() || band.is_empty() {
            return Err(ChannelError::BandOutOfGrid { start: band.start, end: band.end(), n: grid.n_subcarriers() });
        }
        let rays = self.rays_at(t)?;
        let m_count = self.array.elements;
        let spatial: Vec<Vec<Complex64>> = rays.iter().map(|r| self.array.steering(r.aoa_rad)).collect();
        let mut csi = CsiMatrix::zeros(m_count, band.len);
        for (col, n) in band.range().enumerate() {
            let f = self.carrier_hz + grid.subcarrier_offset_hz(n);
            for (ray, steer) in rays.iter().zip(&spatial) {
                let phase = -2.0 * PI * (f * ray.delay_s).fract();
                let coeff = ray.gain * Complex64::from_polar(1.0, phase);
                for (m, s) in steer.iter().enumerate() {
                    let v = csi.get(m, col) + coeff * s;
                    csi.set(m, col, v);
                }
            }
        }
        Ok(csi)
    }

    /// Noise standard deviation per complex entry at time `t`, or zero when
    /// noise is disabled.
    pub fn noise_std(&self, t: f64) -> Result<f64, ChannelError> {
        match self.snr_db {
            Some(snr) if snr.is_finite() => {
                let (x, y) = self.trajectory.position(t)?;
                let amp = self.los_amplitude(x.hypot(y));
                Ok(amp / 10f64.powf(snr / 20.0))
            }
            _ => Ok(0.0),
        }
    }

    /// One measurement over `band` as seen through `origin`'s reference
    /// signal. DMRS measurements carry the scenario's power offset.
    ///
    /// Noise draws come from a ChaCha stream keyed by (seed, t, origin) and
    /// positioned by subcarrier, so a sub-band draw equals the matching
    /// columns of a full-band draw.
    pub fn measure(
        &self,
        t: f64,
        band: SubcarrierRange,
        origin: Origin,
        grid: &FrequencyGrid,
    ) -> Result<SubBandEstimate, ChannelError> {
        let mut csi = self.ground_truth_band(t, band, grid)?;
        if origin == Origin::Dmrs && self.dmrs_power_offset_db != 0.0 {
            let g = 10f64.powf(self.dmrs_power_offset_db / 20.0);
            csi.scale(Complex64::new(g, 0.0));
        }
        let sigma = self.noise_std(t)?;
        if sigma > 0.0 {
            let m_count = csi.antennas();
            let mut rng = self.noise_stream(t, origin);
            // four 32-bit words per complex sample
            rng.set_word_pos((band.start * m_count * 4) as u128);
            for col in 0..band.len {
                for m in 0..m_count {
                    let u1: f64 = 1.0 - rng.random::<f64>();
                    let u2: f64 = rng.random::<f64>();
                    let noise = Complex64::from_polar(sigma * (-u1.ln()).sqrt(), 2.0 * PI * u2);
                    let v = csi.get(m, col) + noise;
                    csi.set(m, col, v);
                }
            }
        }
        Ok(SubBandEstimate { csi, band, timestamp: t, origin, ue: 0 })
    }

    fn noise_stream(&self, t: f64, origin: Origin) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&t.to_bits().to_le_bytes());
        key[16] = match origin {
            Origin::Dmrs => 1,
            Origin::Srs => 2,
        };
        ChaCha8Rng::from_seed(key)
    }
}

/// Point scatterer consistent with `ray` for a UE at `(x0, y0)`: it lies at
/// angle θ_los + offset from the array and lengthens the path by
/// `c · excess_delay`.
fn scatterer(x0: f64, y0: f64, ray: &MultipathRay) -> Option<(f64, f64)> {
    let d0 = x0.hypot(y0);
    let psi = x0.atan2(y0) + ray.aoa_offset_rad;
    let path = d0 + SPEED_OF_LIGHT * ray.excess_delay_s;
    let denom = 2.0 * (path - d0 * ray.aoa_offset_rad.cos());
    let rho = (path * path - d0 * d0) / denom;
    if rho.is_finite() && rho > 0.0 {
        Some((rho * psi.sin(), rho * psi.cos()))
    } else {
        None
    }
}

#[cfg(feature = "serde")]
mod complex_serde {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

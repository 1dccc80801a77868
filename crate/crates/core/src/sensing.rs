//! AoA, amplitude ranging, 2-D localization and trajectory smoothing.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix2x4, Matrix4, SymmetricEigen, Vector2, Vector4};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::channel::{ChannelScenario, UniformLinearArray};
use crate::dsp::argmax_by;
use crate::types::CsiMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("need ≥ 2 antennas, got {0}")]
    TooFewAntennas(usize),
    #[error("csi has {csi} antennas but the array has {array}")]
    ArrayMismatch { csi: usize, array: usize },
    #[error("no signal")]
    NoSignal,
    #[error("need at least 2 position estimates, got {0}")]
    TooFewEstimates(usize),
    #[error("timestamps must increase strictly (index {0})")]
    NonMonotonicTime(usize),
    #[error("invalid {0}")]
    InvalidConfig(&'static str),
}

/// One localization fix. Angles from broadside, gNB at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PositionEstimate {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub aoa_rad: f64,
    pub range_m: f64,
}

impl PositionEstimate {
    pub fn from_polar(t: f64, aoa_rad: f64, range_m: f64) -> Self {
        let (x, y) = localize(aoa_rad, range_m);
        Self { t, x, y, aoa_rad, range_m }
    }
}

/// Spacing of the AoA search grid.
pub const AOA_STEP_DEG: f64 = 0.5;

/// Dominant arrival angle. For M ≥ 3 this is the peak of the MUSIC
/// pseudo-spectrum with a one-dimensional signal subspace, searched on a
/// 0.5° grid strictly inside (−90°, 90°). For M = 2 it is the angle implied
/// by the mean inter-antenna phase difference.
pub fn estimate_aoa(csi: &CsiMatrix, array: &UniformLinearArray) -> Result<f64, SensingError> {
    let m = csi.antennas();
    if m < 2 {
        return Err(SensingError::TooFewAntennas(m));
    }
    if m != array.elements {
        return Err(SensingError::ArrayMismatch { csi: m, array: array.elements });
    }
    if m == 2 {
        let mut s = Complex64::new(0.0, 0.0);
        for (a, b) in csi.row(0).iter().zip(csi.row(1)) {
            s += b * a.conj();
        }
        if s.norm() == 0.0 {
            return Err(SensingError::NoSignal);
        }
        // a_1 / a_0 = exp(−j2π d sin θ)
        let sin = (-s.arg() / (2.0 * PI * array.spacing_wavelengths)).clamp(-1.0, 1.0);
        return Ok(sin.asin());
    }
    let mut r = DMatrix::<Complex64>::zeros(m, m);
    for n in 0..csi.cols() {
        for i in 0..m {
            let hi = csi.get(i, n);
            for j in 0..m {
                r[(i, j)] += hi * csi.get(j, n).conj();
            }
        }
    }
    if !(r.trace().re > 0.0) {
        return Err(SensingError::NoSignal);
    }
    r /= Complex64::new(csi.cols() as f64, 0.0);
    let eig = SymmetricEigen::new(r);
    let u1: Vec<Complex64> = eig.eigenvectors.column(eig.eigenvalues.imax()).iter().copied().collect();
    // with orthonormal eigenvectors, 1/Σ_noise|e^H a|² = 1/(M − |u1^H a|²)
    let grid: Vec<f64> = aoa_grid().collect();
    let best = argmax_by(grid.iter().map(|&deg| {
        let a = array.steering(deg.to_radians());
        let p: Complex64 = u1.iter().zip(&a).map(|(u, a)| u.conj() * a).sum();
        p.norm_sqr()
    }))
    .expect("non-empty grid");
    Ok(grid[best].to_radians())
}

fn aoa_grid() -> impl Iterator<Item = f64> {
    let n = (180.0 / AOA_STEP_DEG) as i32;
    (1..n).map(|i| -90.0 + i as f64 * AOA_STEP_DEG)
}

/// Amplitude-to-distance calibration `d = d0 (A0 / Ā)^(2/pl)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RangingConfig {
    pub reference_amplitude: f64,
    pub reference_distance_m: f64,
    pub path_loss_exponent: f64,
}

impl RangingConfig {
    /// Calibration read straight from the channel model: the LOS amplitude
    /// at the reference distance.
    pub fn from_scenario(s: &ChannelScenario) -> Self {
        Self {
            reference_amplitude: s.rays.first().map_or(1.0, |r| r.relative_gain.norm()),
            reference_distance_m: s.reference_distance_m,
            path_loss_exponent: s.path_loss_exponent,
        }
    }
}

impl Default for RangingConfig {
    fn default() -> Self {
        Self { reference_amplitude: 1.0, reference_distance_m: 1.0, path_loss_exponent: 2.0 }
    }
}

/// Distance from the mean CSI magnitude over antennas and subcarriers.
pub fn estimate_range(csi: &CsiMatrix, cfg: &RangingConfig) -> Result<f64, SensingError> {
    let count = csi.as_slice().len();
    let mean = csi.iter().map(|v| v.norm()).sum::<f64>() / count.max(1) as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(SensingError::NoSignal);
    }
    Ok(cfg.reference_distance_m * (cfg.reference_amplitude / mean).powf(2.0 / cfg.path_loss_exponent))
}

/// `(r sin θ, r cos θ)`.
pub fn localize(aoa_rad: f64, range_m: f64) -> (f64, f64) {
    (range_m * aoa_rad.sin(), range_m * aoa_rad.cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KalmanConfig {
    /// White acceleration noise, m/s² std-dev.
    pub process_noise_accel: f64,
    /// Position measurement noise, m std-dev.
    pub measurement_noise_pos: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self { process_noise_accel: 0.5, measurement_noise_pos: 0.5 }
    }
}

/// Constant-velocity Kalman filter followed by an RTS smoother.
///
/// The filter starts at the first fix with the velocity of the first two
/// fixes, so noiseless constant-velocity tracks pass through unchanged.
pub fn kalman_smooth(estimates: &[PositionEstimate], cfg: &KalmanConfig) -> Result<Vec<(f64, f64)>, SensingError> {
    if !(cfg.process_noise_accel > 0.0) {
        return Err(SensingError::InvalidConfig("process noise"));
    }
    if !(cfg.measurement_noise_pos > 0.0) {
        return Err(SensingError::InvalidConfig("measurement noise"));
    }
    let n = estimates.len();
    if n < 2 {
        return Err(SensingError::TooFewEstimates(n));
    }
    if let Some(i) = estimates.windows(2).position(|w| !(w[1].t > w[0].t)) {
        return Err(SensingError::NonMonotonicTime(i + 1));
    }
    let q = cfg.process_noise_accel * cfg.process_noise_accel;
    let r2 = cfg.measurement_noise_pos * cfg.measurement_noise_pos;
    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let r = Matrix2::identity() * r2;
    let transition = |dt: f64| {
        let f = Matrix4::new(1.0, 0.0, dt, 0.0, 0.0, 1.0, 0.0, dt, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let (a, b, c) = (dt.powi(4) / 4.0, dt.powi(3) / 2.0, dt * dt);
        let qm = Matrix4::new(a, 0.0, b, 0.0, 0.0, a, 0.0, b, b, 0.0, c, 0.0, 0.0, b, 0.0, c) * q;
        (f, qm)
    };

    let z = |e: &PositionEstimate| Vector2::new(e.x, e.y);
    let dt01 = estimates[1].t - estimates[0].t;
    let v0 = (z(&estimates[1]) - z(&estimates[0])) / dt01;
    let mut x = Vector4::new(estimates[0].x, estimates[0].y, v0.x, v0.y);
    let pv = 2.0 * r2 / (dt01 * dt01);
    let mut p = Matrix4::from_diagonal(&Vector4::new(r2, r2, pv, pv));

    let mut filtered = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);
    filtered.push((x, p));
    predicted.push((x, p));
    for k in 1..n {
        let (f, qm) = transition(estimates[k].t - estimates[k - 1].t);
        let xp = f * x;
        let pp = f * p * f.transpose() + qm;
        let s = h * pp * h.transpose() + r;
        let gain = pp * h.transpose() * s.try_inverse().ok_or(SensingError::InvalidConfig("innovation covariance"))?;
        x = xp + gain * (z(&estimates[k]) - h * xp);
        p = (Matrix4::identity() - gain * h) * pp;
        predicted.push((xp, pp));
        filtered.push((x, p));
    }

    let mut smoothed = alloc::vec![Vector4::zeros(); n];
    smoothed[n - 1] = filtered[n - 1].0;
    for k in (0..n - 1).rev() {
        let (f, _) = transition(estimates[k + 1].t - estimates[k].t);
        let (xf, pf) = filtered[k];
        let (xp, pp) = predicted[k + 1];
        let c = pf * f.transpose() * pp.try_inverse().ok_or(SensingError::InvalidConfig("predicted covariance"))?;
        smoothed[k] = xf + c * (smoothed[k + 1] - xp);
    }
    Ok(smoothed.iter().map(|s| (s[0], s[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixes(points: &[(f64, f64, f64)]) -> Vec<PositionEstimate> {
        points.iter().map(|&(t, x, y)| PositionEstimate { t, x, y, aoa_rad: x.atan2(y), range_m: x.hypot(y) }).collect()
    }

    #[test]
    fn localize_examples() {
        let (x, y) = localize(0.0, 3.0);
        assert!(x.abs() < 1e-15 && (y - 3.0).abs() < 1e-15);
        let (x, y) = localize(30f64.to_radians(), 2.0);
        assert!((x - 1.0).abs() < 1e-12 && (y - 3f64.sqrt()).abs() < 1e-12);
        let (x, y) = localize(PI / 2.0 - 1e-9, 1.0);
        assert!((x - 1.0).abs() < 1e-9 && y.abs() < 1e-8);
    }

    #[test]
    fn range_inverse_law() {
        let cfg = RangingConfig { reference_amplitude: 0.8, reference_distance_m: 1.0, path_loss_exponent: 2.0 };
        let at = |a: f64| CsiMatrix::from_fn(2, 4, |_, n| Complex64::from_polar(a, n as f64));
        assert!((estimate_range(&at(0.8), &cfg).unwrap() - 1.0).abs() < 1e-12);
        assert!((estimate_range(&at(0.4), &cfg).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(estimate_range(&at(0.0), &cfg), Err(SensingError::NoSignal));
    }

    #[test]
    fn two_antenna_phase_difference() {
        let arr = UniformLinearArray::new(2, 0.5);
        let theta = 20f64.to_radians();
        let a = arr.steering(theta);
        let csi = CsiMatrix::from_fn(2, 8, |m, n| a[m] * Complex64::from_polar(1.0, 0.3 * n as f64));
        assert!((estimate_aoa(&csi, &arr).unwrap() - theta).abs() < 1e-12);
    }

    #[test]
    fn aoa_needs_two_antennas() {
        let csi = CsiMatrix::zeros(1, 4);
        assert_eq!(estimate_aoa(&csi, &UniformLinearArray::new(1, 0.5)), Err(SensingError::TooFewAntennas(1)));
    }

    #[test]
    fn kalman_passes_constant_velocity_through() {
        let est = fixes(&[(0.0, 1.0, 2.0), (0.1, 1.1, 2.05), (0.25, 1.25, 2.125), (0.3, 1.3, 2.15)]);
        let out = kalman_smooth(&est, &KalmanConfig::default()).unwrap();
        for (o, e) in out.iter().zip(&est) {
            assert!((o.0 - e.x).abs() < 1e-9 && (o.1 - e.y).abs() < 1e-9);
        }
    }

    #[test]
    fn kalman_rejects_bad_input() {
        let one = fixes(&[(0.0, 1.0, 1.0)]);
        assert_eq!(kalman_smooth(&one, &KalmanConfig::default()), Err(SensingError::TooFewEstimates(1)));
        let back = fixes(&[(0.0, 1.0, 1.0), (0.0, 1.0, 1.0)]);
        assert_eq!(kalman_smooth(&back, &KalmanConfig::default()), Err(SensingError::NonMonotonicTime(1)));
    }
}

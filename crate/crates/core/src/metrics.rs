//! Communication and sensing metrics.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::dsp::{argmax_by, idft_padded, wrap_angle};
use crate::types::{CsiMatrix, Origin, SubcarrierRange, UeId};

/// IDFT size for metric-grade CIR peaks.
pub const DEFAULT_CIR_FFT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("ground truth has zero norm")]
    ZeroReference,
    #[error("length mismatch: {0} estimates vs {1} ground-truth points")]
    LengthMismatch(usize, usize),
    #[error("fft size {fft} smaller than {n} subcarriers")]
    FftTooSmall { fft: usize, n: usize },
    #[error("empty input")]
    Empty,
}

fn same_shape(a: &CsiMatrix, b: &CsiMatrix) -> Result<(), MetricsError> {
    if a.antennas() != b.antennas() || a.cols() != b.cols() {
        return Err(MetricsError::ShapeMismatch(a.antennas(), a.cols(), b.antennas(), b.cols()));
    }
    Ok(())
}

/// `‖|H_true| − |H_est|‖² / ‖|H_true|‖²` over all entries.
pub fn nmse(h_true: &CsiMatrix, h_est: &CsiMatrix) -> Result<f64, MetricsError> {
    same_shape(h_true, h_est)?;
    let mut err = 0.0;
    let mut norm = 0.0;
    for (t, e) in h_true.iter().zip(h_est.iter()) {
        let d = t.norm() - e.norm();
        err += d * d;
        norm += t.norm_sqr();
    }
    if !(norm > 0.0) {
        return Err(MetricsError::ZeroReference);
    }
    Ok(err / norm)
}

/// `‖H_true − H_est‖² / ‖H_true‖²` on complex values.
pub fn nmse_complex(h_true: &CsiMatrix, h_est: &CsiMatrix) -> Result<f64, MetricsError> {
    same_shape(h_true, h_est)?;
    let norm = h_true.frobenius_norm_sqr();
    if !(norm > 0.0) {
        return Err(MetricsError::ZeroReference);
    }
    let err: f64 = h_true.iter().zip(h_est.iter()).map(|(t, e)| (t - e).norm_sqr()).sum();
    Ok(err / norm)
}

/// Strongest tap of the zero-padded IDFT, power summed over antennas.
pub fn cir_peak_tap(h: &CsiMatrix, fft_size: usize) -> Result<usize, MetricsError> {
    if fft_size < h.cols() {
        return Err(MetricsError::FftTooSmall { fft: fft_size, n: h.cols() });
    }
    let mut power = alloc::vec![0.0; fft_size];
    for m in 0..h.antennas() {
        for (p, v) in power.iter_mut().zip(idft_padded(h.row(m), fft_size)) {
            *p += v.norm_sqr();
        }
    }
    argmax_by(power.into_iter()).ok_or(MetricsError::Empty)
}

/// Circular distance in taps between the CIR peaks of truth and estimate.
pub fn cir_peak_error(h_true: &CsiMatrix, h_est: &CsiMatrix, fft_size: usize) -> Result<usize, MetricsError> {
    same_shape(h_true, h_est)?;
    let d = cir_peak_tap(h_true, fft_size)?.abs_diff(cir_peak_tap(h_est, fft_size)?);
    Ok(d.min(fft_size - d))
}

/// Duration of one padded CIR tap.
pub fn tap_duration_s(fft_size: usize, scs_hz: f64) -> f64 {
    1.0 / (fft_size as f64 * scs_hz)
}

/// One CSI measurement of a UE, as logged by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementRecord {
    pub slot: u64,
    pub t: f64,
    pub ue: UeId,
    pub origin: Origin,
    pub band: SubcarrierRange,
}

/// Slots in `[0, window_s)` with at least one measurement of `ue`, per second.
pub fn estimation_rate(log: &[MeasurementRecord], ue: UeId, window_s: f64) -> f64 {
    if !(window_s > 0.0) {
        return 0.0;
    }
    let slots: BTreeSet<u64> = log.iter().filter(|r| r.ue == ue && r.t >= 0.0 && r.t < window_s).map(|r| r.slot).collect();
    slots.len() as f64 / window_s
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackingStats {
    pub errors_m: Vec<f64>,
    pub ranging_errors_m: Vec<f64>,
    pub angular_errors_deg: Vec<f64>,
}

impl TrackingStats {
    pub fn mean_m(&self) -> f64 {
        mean(&self.errors_m)
    }

    pub fn median_m(&self) -> f64 {
        median(&self.errors_m)
    }
}

/// Euclidean error per sample, split into ranging `|r_est − r_true|` and
/// angular `|θ_est − θ_true|` parts (angles from broadside).
pub fn tracking_error(est: &[(f64, f64)], truth: &[(f64, f64)]) -> Result<TrackingStats, MetricsError> {
    if est.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(est.len(), truth.len()));
    }
    let mut stats = TrackingStats::default();
    for (&(xe, ye), &(xt, yt)) in est.iter().zip(truth) {
        stats.errors_m.push((xe - xt).hypot(ye - yt));
        stats.ranging_errors_m.push((xe.hypot(ye) - xt.hypot(yt)).abs());
        stats.angular_errors_deg.push(wrap_angle(xe.atan2(ye) - xt.atan2(yt)).abs().to_degrees());
    }
    Ok(stats)
}

/// Per-round (or aggregated) metric samples.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricRecord {
    pub nmse_samples: Vec<f64>,
    pub cir_peak_errors: Vec<usize>,
    /// One entry per round.
    pub est_rate_hz: Vec<f64>,
    pub tracking_errors_m: Vec<f64>,
    pub smoothed_tracking_errors_m: Vec<f64>,
    pub ranging_errors_m: Vec<f64>,
    pub angular_errors_deg: Vec<f64>,
    /// NMSE of the resampled series against the truth at the resample times.
    pub resampled_nmse: Vec<f64>,
}

impl MetricRecord {
    pub fn extend(&mut self, other: &MetricRecord) {
        self.nmse_samples.extend_from_slice(&other.nmse_samples);
        self.cir_peak_errors.extend_from_slice(&other.cir_peak_errors);
        self.est_rate_hz.extend_from_slice(&other.est_rate_hz);
        self.tracking_errors_m.extend_from_slice(&other.tracking_errors_m);
        self.smoothed_tracking_errors_m.extend_from_slice(&other.smoothed_tracking_errors_m);
        self.ranging_errors_m.extend_from_slice(&other.ranging_errors_m);
        self.angular_errors_deg.extend_from_slice(&other.angular_errors_deg);
        self.resampled_nmse.extend_from_slice(&other.resampled_nmse);
    }

    /// Fraction of CIR peak errors at or below `taps`.
    pub fn cir_within(&self, taps: usize) -> f64 {
        if self.cir_peak_errors.is_empty() {
            return f64::NAN;
        }
        self.cir_peak_errors.iter().filter(|&&e| e <= taps).count() as f64 / self.cir_peak_errors.len() as f64
    }
}

/// Arithmetic mean; NaN for empty input.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median with the midpoint rule for even lengths; NaN for empty input.
pub fn median(xs: &[f64]) -> f64 {
    percentile(xs, 50.0)
}

/// Linear-interpolated percentile, `p` in [0, 100].
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Sorted samples paired with their empirical CDF value `i / n`.
pub fn empirical_cdf(xs: &[f64]) -> Vec<(f64, f64)> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use num_complex::Complex64;

    fn h() -> CsiMatrix {
        CsiMatrix::from_fn(2, 64, |m, n| Complex64::from_polar(1.0 + 0.01 * n as f64, 0.3 * m as f64 - 0.1 * n as f64))
    }

    #[test]
    fn nmse_examples() {
        let t = h();
        assert_eq!(nmse(&t, &t).unwrap(), 0.0);
        let mut doubled = t.clone();
        doubled.scale(Complex64::new(2.0, 0.0));
        assert!((nmse(&t, &doubled).unwrap() - 1.0).abs() < 1e-12);
        let mut rotated = t.clone();
        rotated.scale(Complex64::from_polar(1.0, 1.3));
        assert!(nmse(&t, &rotated).unwrap() < 1e-24);
        assert!(nmse_complex(&t, &rotated).unwrap() > 0.1);
        assert_eq!(nmse(&CsiMatrix::zeros(1, 2), &CsiMatrix::zeros(1, 2)), Err(MetricsError::ZeroReference));
    }

    #[test]
    fn cir_two_tap_delay() {
        let n = 3264;
        let base = CsiMatrix::from_fn(2, n, |m, k| Complex64::from_polar(1.0, -0.02 * k as f64 + m as f64));
        let delayed = CsiMatrix::from_fn(2, n, |m, k| base.get(m, k) * Complex64::from_polar(1.0, -2.0 * PI * 2.0 * k as f64 / 4096.0));
        assert_eq!(cir_peak_error(&base, &base, 4096).unwrap(), 0);
        assert_eq!(cir_peak_error(&base, &delayed, 4096).unwrap(), 2);
    }

    #[test]
    fn tap_anchor() {
        let two = 2.0 * tap_duration_s(4096, 30e3);
        assert!((two - 16.3e-9).abs() < 0.05e-9);
    }

    #[test]
    fn estimation_rate_counts_slots() {
        let rec = |slot: u64, origin| MeasurementRecord {
            slot,
            t: slot as f64 * 0.0005,
            ue: 0,
            origin,
            band: SubcarrierRange::new(0, 12),
        };
        let log: Vec<_> = (0..2000).filter(|s| s % 5 == 4).flat_map(|s| [rec(s, Origin::Dmrs), rec(s, Origin::Srs)]).collect();
        assert!((estimation_rate(&log, 0, 1.0) - 400.0).abs() < 1e-9);
        assert_eq!(estimation_rate(&log, 1, 1.0), 0.0);
    }

    #[test]
    fn tracking_decomposition() {
        let truth = [(0.0, 10.0), (0.0, 20.0)];
        let est = [(1.0, 10.0), (1.0, 20.0)];
        let s = tracking_error(&est, &truth).unwrap();
        assert!((s.mean_m() - 1.0).abs() < 1e-12);
        assert!((s.angular_errors_deg[0] - (0.1f64).atan().to_degrees()).abs() < 1e-9);
        let s = tracking_error(&[(0.0, 5.5)], &[(0.0, 5.0)]).unwrap();
        assert!((s.ranging_errors_m[0] - 0.5).abs() < 1e-12);
        assert_eq!(s.angular_errors_deg[0], 0.0);
        assert!(tracking_error(&[(0.0, 1.0)], &[]).is_err());
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(mean(&[]).is_nan());
        assert_eq!(empirical_cdf(&[2.0, 1.0]), [(1.0, 0.5), (2.0, 1.0)]);
    }
}

use alloc::vec::Vec;

use num_complex::Complex64;

use super::{StitchError, StitchedChannel};
use crate::spline::SplineBasis;
use crate::types::CsiMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ResampledSnapshot {
    pub t: f64,
    pub csi: CsiMatrix,
}

/// Cubic-spline resampling of a stitched history at `rate_hz`, starting at
/// the first snapshot and stopping at or before the last one.
///
/// Knots are the snapshots' reference times. Each (antenna, subcarrier)
/// series is splined separately with not-a-knot end conditions.
pub fn resample_uniform(history: &[StitchedChannel], rate_hz: f64) -> Result<Vec<ResampledSnapshot>, StitchError> {
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(StitchError::InvalidRate(rate_hz));
    }
    if history.len() < 4 {
        return Err(StitchError::InsufficientHistory(history.len()));
    }
    let first = &history[0];
    if history.iter().any(|h| h.band != first.band || h.csi.antennas() != first.csi.antennas()) {
        return Err(StitchError::HistoryShapeMismatch);
    }
    let knots: Vec<f64> = history.iter().map(|h| h.reference_time).collect();
    let basis = SplineBasis::new(&knots).map_err(|_| StitchError::NonMonotonicHistory)?;
    let t0 = knots[0];
    let t_last = knots[knots.len() - 1];
    let times: Vec<f64> = (0..)
        .map(|k| t0 + k as f64 / rate_hz)
        .take_while(|&t| t <= t_last + 1e-12 * t_last.abs().max(1.0))
        .collect();
    let weights: Vec<(usize, [f64; 4])> = times.iter().map(|&t| basis.weights(t)).collect();

    let antennas = first.csi.antennas();
    let cols = first.csi.cols();
    let mut out: Vec<ResampledSnapshot> =
        times.iter().map(|&t| ResampledSnapshot { t, csi: CsiMatrix::zeros(antennas, cols) }).collect();
    let mut y = alloc::vec![Complex64::new(0.0, 0.0); history.len()];
    for j in 0..antennas * cols {
        for (yk, h) in y.iter_mut().zip(history) {
            *yk = h.csi.as_slice()[j];
        }
        let m2 = basis.second_derivatives(&y);
        for (snap, &(i, w)) in out.iter_mut().zip(&weights) {
            snap.csi.as_mut_slice()[j] = y[i] * w[0] + y[i + 1] * w[1] + m2[i] * w[2] + m2[i + 1] * w[3];
        }
    }
    Ok(out)
}

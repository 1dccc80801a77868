use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::StitchError;
use crate::dsp::{argmax_magnitude, idft, signed_index, unwrap_phase, wrap_angle};
use crate::types::SubBandEstimate;

/// `arg H(n) ≈ intercept + slope · (n − n0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseLine {
    /// Radians per subcarrier.
    pub slope: f64,
    /// Radians, in (−π, π].
    pub intercept: f64,
    pub n0: usize,
}

/// Least-squares line through the unwrapped phase of one antenna's row.
pub fn fit_phase_line(estimate: &SubBandEstimate, antenna: usize) -> Result<PhaseLine, StitchError> {
    let n = estimate.band.len;
    if n < 2 {
        return Err(StitchError::InsufficientPoints(n));
    }
    if antenna >= estimate.antennas() {
        return Err(StitchError::NoSuchAntenna { antenna, antennas: estimate.antennas() });
    }
    let phase: Vec<f64> = estimate.csi.row(antenna).iter().map(|v| v.arg()).collect();
    let y = unwrap_phase(&phase);
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (yi - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok(PhaseLine { slope, intercept: wrap_angle(y_mean - slope * x_mean), n0: estimate.band.start })
}

/// Multiplies subcarrier `n` by `e^{j·slope·(n − n0)}` on every antenna.
pub fn apply_phase_slope(estimate: &SubBandEstimate, slope: f64, n0: usize) -> SubBandEstimate {
    let mut out = estimate.clone();
    let rot: Vec<Complex64> = estimate
        .band
        .range()
        .map(|n| Complex64::from_polar(1.0, slope * (n as f64 - n0 as f64)))
        .collect();
    for m in 0..out.antennas() {
        for (v, r) in out.csi.row_mut(m).iter_mut().zip(&rot) {
            *v *= r;
        }
    }
    out
}

/// Removes the fitted slope: `Ĥ(n) = H(n) e^{−jα(n − n0)}`. The intercept
/// stays in the data.
pub fn remove_slope(estimate: &SubBandEstimate, line: &PhaseLine) -> SubBandEstimate {
    apply_phase_slope(estimate, -line.slope, line.n0)
}

/// Normalised N_b-point inverse DFT of one antenna's row, natural tap order.
/// Tap `k ≥ N_b/2` stands for delay `k − N_b`.
pub fn cir(estimate: &SubBandEstimate, antenna: usize) -> Vec<Complex64> {
    idft(estimate.csi.row(antenna))
}

/// Index of the strongest tap; ties go to the smallest index.
pub fn peak_delay(cir: &[Complex64]) -> usize {
    argmax_magnitude(cir).expect("peak_delay needs a non-empty sequence")
}

/// Peak-shift baseline: moves the band's CIR peak onto the reference's peak
/// delay, measured on antenna 0. Both peaks are taken in the window
/// [−N/2, N/2) and the reference delay is expressed in the band's own tap
/// units, so the applied shift may be fractional.
pub fn tonetrack_align(estimate: &SubBandEstimate, reference: &SubBandEstimate) -> SubBandEstimate {
    let nb = estimate.band.len;
    let nr = reference.band.len;
    let tau_b = signed_index(peak_delay(&cir(estimate, 0)), nb) as f64;
    let tau_ref = signed_index(peak_delay(&cir(reference, 0)), nr) as f64;
    let shift = tau_ref * nb as f64 / nr as f64 - tau_b;
    if shift == 0.0 {
        return estimate.clone();
    }
    // h'[k] = h[k − shift]  <=>  H'(n) = H(n) e^{−j2π·shift·(n − n0)/N_b}
    apply_phase_slope(estimate, -2.0 * PI * shift / nb as f64, estimate.band.start)
}

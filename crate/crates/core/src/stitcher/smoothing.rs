use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::StitchError;
use crate::types::SubBandEstimate;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothingConfig {
    /// Decay rate of the recency weights, 1/s.
    pub alpha: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { alpha: 20.0 }
    }
}

/// Principal eigenvector of the recency-weighted spatial covariance
/// `R = Σ_b w_b Σ_n H_b(n) H_b(n)^H / Σ_b w_b N_b`, `w_b = exp(−α(t_ref − t_b))`.
pub fn principal_spatial_mode(entries: &[SubBandEstimate], cfg: &SmoothingConfig) -> Result<Vec<Complex64>, StitchError> {
    if !(cfg.alpha >= 0.0) {
        return Err(StitchError::InvalidDecay(cfg.alpha));
    }
    let first = entries.first().ok_or(StitchError::EmptyBuffer)?;
    let m = first.antennas();
    if entries.iter().any(|e| e.antennas() != m) {
        return Err(StitchError::AntennaMismatch);
    }
    let t_ref = entries.iter().map(|e| e.timestamp).fold(f64::NEG_INFINITY, f64::max);
    let mut r = DMatrix::<Complex64>::zeros(m, m);
    let mut norm = 0.0;
    let mut col = alloc::vec![Complex64::new(0.0, 0.0); m];
    for e in entries {
        let w = (-cfg.alpha * (t_ref - e.timestamp)).exp();
        norm += w * e.band.len as f64;
        for n in 0..e.band.len {
            for (i, c) in col.iter_mut().enumerate() {
                *c = e.csi.get(i, n);
            }
            for i in 0..m {
                let wi = col[i] * w;
                for j in 0..m {
                    r[(i, j)] += wi * col[j].conj();
                }
            }
        }
    }
    let trace: f64 = (0..m).map(|i| r[(i, i)].re).sum();
    if !(norm > 0.0) || !(trace > 0.0) || !trace.is_finite() {
        return Err(StitchError::DegenerateCovariance);
    }
    r /= Complex64::new(norm, 0.0);
    let eig = SymmetricEigen::new(r);
    let top = eig.eigenvalues.imax();
    Ok(eig.eigenvectors.column(top).iter().copied().collect())
}

/// Rotates every estimate by `e^{−j∠(Σ_n u_1^H H_b(n))}` so all sub-bands
/// share the phase of the principal spatial mode. Magnitudes are unchanged.
/// Single-antenna input passes through.
pub fn spatial_smooth(entries: &[SubBandEstimate], cfg: &SmoothingConfig) -> Result<Vec<SubBandEstimate>, StitchError> {
    let first = entries.first().ok_or(StitchError::EmptyBuffer)?;
    if first.antennas() < 2 {
        if entries.iter().any(|e| e.antennas() != first.antennas()) {
            return Err(StitchError::AntennaMismatch);
        }
        return Ok(entries.to_vec());
    }
    let u = principal_spatial_mode(entries, cfg)?;
    Ok(entries
        .iter()
        .map(|e| {
            let mut s = Complex64::new(0.0, 0.0);
            for (m, um) in u.iter().enumerate() {
                let uc = um.conj();
                for v in e.csi.row(m) {
                    s += uc * v;
                }
            }
            let mut out = e.clone();
            if s.norm() > 0.0 {
                out.csi.scale(s.conj() / s.norm());
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CsiMatrix, Origin, SubcarrierRange};

    fn est(rows: [[Complex64; 2]; 3], t: f64) -> SubBandEstimate {
        // 3 antennas x 2 subcarriers given column-wise
        let csi = CsiMatrix::from_fn(3, 2, |m, n| rows[m][n]);
        SubBandEstimate::new(csi, SubcarrierRange::new(0, 2), t, Origin::Srs, 0).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_estimate_only_rotates() {
        let e = est([[c(1.0, 2.0), c(0.5, -1.0)], [c(-0.3, 0.1), c(2.0, 0.0)], [c(0.0, 1.0), c(1.0, 1.0)]], 0.0);
        let out = spatial_smooth(core::slice::from_ref(&e), &SmoothingConfig::default()).unwrap();
        let ratio = out[0].csi.get(0, 0) / e.csi.get(0, 0);
        assert!((ratio.norm() - 1.0).abs() < 1e-12);
        for (a, b) in out[0].csi.iter().zip(e.csi.iter()) {
            assert!((a - b * ratio).norm() < 1e-12);
        }
    }

    #[test]
    fn single_antenna_passes_through() {
        let csi = CsiMatrix::from_fn(1, 4, |_, n| c(n as f64, 1.0));
        let e = SubBandEstimate::new(csi, SubcarrierRange::new(0, 4), 0.0, Origin::Srs, 0).unwrap();
        assert_eq!(spatial_smooth(&[e.clone()], &SmoothingConfig::default()).unwrap(), [e]);
    }

    #[test]
    fn zero_power_is_degenerate() {
        let e = est([[c(0.0, 0.0); 2]; 3], 0.0);
        assert_eq!(spatial_smooth(&[e], &SmoothingConfig::default()), Err(StitchError::DegenerateCovariance));
    }
}

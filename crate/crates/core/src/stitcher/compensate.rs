use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::{StitchError, StitchedChannel};
use crate::dsp::wrap_angle;
use crate::types::{CsiMatrix, SubBandEstimate, SubcarrierRange};

/// Anything holding CSI over a contiguous subcarrier range.
pub trait SubBand {
    fn band(&self) -> SubcarrierRange;
    fn csi(&self) -> &CsiMatrix;

    /// Value at absolute subcarrier `n`.
    fn value(&self, m: usize, n: usize) -> Complex64 {
        self.csi().get(m, n - self.band().start)
    }
}

impl SubBand for SubBandEstimate {
    fn band(&self) -> SubcarrierRange {
        self.band
    }

    fn csi(&self) -> &CsiMatrix {
        &self.csi
    }
}

impl SubBand for StitchedChannel {
    fn band(&self) -> SubcarrierRange {
        self.band
    }

    fn csi(&self) -> &CsiMatrix {
        &self.csi
    }
}

/// `γ = β e^{jφ}`, applied to a band to match the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompensationFactor {
    pub beta: f64,
    pub phi: f64,
    /// Boundary pair (reference subcarrier, band subcarrier) for adjacent
    /// bands; `None` when the factor came from an overlap.
    pub boundary: Option<(usize, usize)>,
}

impl CompensationFactor {
    pub const IDENTITY: Self = Self { beta: 1.0, phi: 0.0, boundary: None };

    pub fn gamma(&self) -> Complex64 {
        Complex64::from_polar(self.beta, self.phi)
    }
}

/// Amplitude and phase that bring `band` onto `reference`.
///
/// Overlapping bands use the power ratio and the summed conjugate product
/// over the overlap. Adjacent bands use `boundary_width` subcarrier pairs
/// mirrored about the shared edge; β is the mean magnitude ratio and φ the
/// mean wrapped phase difference, both over antennas and pairs.
pub fn estimate_compensation<R: SubBand + ?Sized>(
    band: &SubBandEstimate,
    reference: &R,
    boundary_width: usize,
) -> Result<CompensationFactor, StitchError> {
    compensation_between(band, reference, boundary_width)
}

pub(crate) fn compensation_between<B: SubBand + ?Sized, R: SubBand + ?Sized>(
    band: &B,
    reference: &R,
    boundary_width: usize,
) -> Result<CompensationFactor, StitchError> {
    let nb = band.band();
    let nr = reference.band();
    let antennas = band.csi().antennas();
    if reference.csi().antennas() != antennas {
        return Err(StitchError::AntennaMismatch);
    }
    let overlap = nb.intersection(&nr);
    if !overlap.is_empty() {
        let mut p_ref = 0.0;
        let mut p_b = 0.0;
        let mut cross = Complex64::new(0.0, 0.0);
        for m in 0..antennas {
            for n in overlap.range() {
                let r = reference.value(m, n);
                let b = band.value(m, n);
                p_ref += r.norm_sqr();
                p_b += b.norm_sqr();
                cross += r * b.conj();
            }
        }
        if !(p_b > 0.0) || !(p_ref > 0.0) {
            return Err(StitchError::DegenerateBoundary(overlap.start));
        }
        return Ok(CompensationFactor { beta: (p_ref / p_b).sqrt(), phi: cross.arg(), boundary: None });
    }
    let width = boundary_width.max(1).min(nb.len).min(nr.len);
    let pairs: Vec<(usize, usize)> = if nr.end() == nb.start {
        (0..width).map(|i| (nr.end() - 1 - i, nb.start + i)).collect()
    } else if nb.end() == nr.start {
        (0..width).map(|i| (nr.start + i, nb.end() - 1 - i)).collect()
    } else {
        return Err(StitchError::NoAdjacency { a_start: nb.start, a_end: nb.end(), b_start: nr.start, b_end: nr.end() });
    };
    let mut beta = 0.0;
    let mut phi = 0.0;
    for m in 0..antennas {
        for &(nr_i, nb_i) in &pairs {
            let r = reference.value(m, nr_i);
            let b = band.value(m, nb_i);
            if !(b.norm() > 0.0) {
                return Err(StitchError::DegenerateBoundary(nb_i));
            }
            if !(r.norm() > 0.0) {
                return Err(StitchError::DegenerateBoundary(nr_i));
            }
            beta += r.norm() / b.norm();
            phi += wrap_angle(r.arg() - b.arg());
        }
    }
    let count = (antennas * pairs.len()) as f64;
    Ok(CompensationFactor { beta: beta / count, phi: phi / count, boundary: Some(pairs[0]) })
}

/// Scales `band` by γ and merges it with `reference` over the union of
/// their subcarriers. Where both are present the newer one wins; the
/// reference keeps ties.
pub fn stitch_pair<B: SubBand + Timestamped + ?Sized>(
    band: &B,
    reference: &StitchedChannel,
    factor: &CompensationFactor,
) -> Result<StitchedChannel, StitchError> {
    let nb = band.band();
    let nr = reference.band;
    if !nb.touches(&nr) {
        return Err(StitchError::NoAdjacency { a_start: nb.start, a_end: nb.end(), b_start: nr.start, b_end: nr.end() });
    }
    let union = nb.hull(&nr);
    let antennas = reference.csi.antennas();
    let gamma = factor.gamma();
    let t_b = band.timestamp();
    let mut csi = CsiMatrix::zeros(antennas, union.len);
    let mut provenance = Vec::with_capacity(union.len);
    for (col, n) in union.range().enumerate() {
        let take_band = nb.contains(n) && (!nr.contains(n) || t_b > reference.provenance[n - nr.start]);
        for m in 0..antennas {
            let v = if take_band { band.value(m, n) * gamma } else { reference.value(m, n) };
            csi.set(m, col, v);
        }
        provenance.push(if take_band { t_b } else { reference.provenance[n - nr.start] });
    }
    Ok(StitchedChannel { csi, band: union, provenance, reference_time: reference.reference_time })
}

/// Measurement time of a sub-band.
pub trait Timestamped {
    fn timestamp(&self) -> f64;
}

impl Timestamped for SubBandEstimate {
    fn timestamp(&self) -> f64 {
        self.timestamp
    }
}

use alloc::vec::Vec;

use super::align::{apply_phase_slope, fit_phase_line, remove_slope, tonetrack_align};
use super::compensate::{compensation_between, stitch_pair, CompensationFactor};
use super::smoothing::{spatial_smooth, SmoothingConfig};
use super::StitchError;
use crate::types::{coverage_complete, CsiMatrix, FrequencyGrid, Origin, SubBandEstimate, SubcarrierRange};

/// Full-band (or partial, while stitching) CSI with per-subcarrier
/// provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedChannel {
    pub csi: CsiMatrix,
    pub band: SubcarrierRange,
    /// Timestamp of the measurement each column came from.
    pub provenance: Vec<f64>,
    /// Timestamp of the reference sub-band.
    pub reference_time: f64,
}

impl StitchedChannel {
    pub fn from_estimate(e: &SubBandEstimate) -> Self {
        Self {
            csi: e.csi.clone(),
            band: e.band,
            provenance: alloc::vec![e.timestamp; e.band.len],
            reference_time: e.timestamp,
        }
    }

    /// Oldest measurement that went into the composite.
    pub fn oldest(&self) -> f64 {
        self.provenance.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StitchMethod {
    /// Phase-slope removal per band, compensation, reference slope restored.
    SlopeBased,
    /// CIR peak shifting onto the reference band, then compensation.
    PeakShift,
    /// Newest value per subcarrier, no alignment or compensation.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct StitchConfig {
    /// `None` disables spatial smoothing.
    pub smoothing: Option<SmoothingConfig>,
    pub method: StitchMethod,
    /// Boundary pairs used when compensating adjacent bands.
    pub boundary_width: usize,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self { smoothing: Some(SmoothingConfig::default()), method: StitchMethod::SlopeBased, boundary_width: 1 }
    }
}

/// Stitches the buffered sub-bands into one full-band channel.
///
/// The newest SRS entry is the reference. Other bands are attached one at
/// a time, always picking among those touching the composite the one
/// whose centre is closest to the reference centre (newest first on ties),
/// so the composite grows outward in both directions.
pub fn stitch_full(
    entries: &[SubBandEstimate],
    grid: &FrequencyGrid,
    cfg: &StitchConfig,
) -> Result<StitchedChannel, StitchError> {
    if !coverage_complete(entries, grid) {
        return Err(StitchError::IncompleteCoverage);
    }
    let mut ref_idx = None;
    for (i, e) in entries.iter().enumerate().filter(|(_, e)| e.origin == Origin::Srs) {
        if ref_idx.is_none_or(|r: usize| e.timestamp >= entries[r].timestamp) {
            ref_idx = Some(i);
        }
    }
    let ref_idx = ref_idx.ok_or(StitchError::NoReference)?;

    let smoothed = match &cfg.smoothing {
        Some(s) => spatial_smooth(entries, s)?,
        None => entries.to_vec(),
    };
    let mut ref_slope = None;
    let prepared: Vec<SubBandEstimate> = match cfg.method {
        StitchMethod::SlopeBased => {
            let mut out = Vec::with_capacity(smoothed.len());
            for (i, e) in smoothed.iter().enumerate() {
                let line = fit_phase_line(e, 0)?;
                if i == ref_idx {
                    ref_slope = Some(line);
                }
                out.push(remove_slope(e, &line));
            }
            out
        }
        StitchMethod::PeakShift => smoothed
            .iter()
            .enumerate()
            .map(|(i, e)| if i == ref_idx { e.clone() } else { tonetrack_align(e, &smoothed[ref_idx]) })
            .collect(),
        StitchMethod::Naive => smoothed,
    };

    let ref_center = prepared[ref_idx].band.center2();
    let mut composite = StitchedChannel::from_estimate(&prepared[ref_idx]);
    let mut remaining: Vec<usize> = (0..prepared.len()).filter(|&i| i != ref_idx).collect();
    while !remaining.is_empty() {
        let pos = remaining
            .iter()
            .enumerate()
            .filter(|(_, &i)| prepared[i].band.touches(&composite.band))
            .min_by(|(_, &a), (_, &b)| {
                let da = prepared[a].band.center2().abs_diff(ref_center);
                let db = prepared[b].band.center2().abs_diff(ref_center);
                da.cmp(&db)
                    .then(prepared[b].timestamp.total_cmp(&prepared[a].timestamp))
                    .then(a.cmp(&b))
            })
            .map(|(pos, _)| pos)
            .ok_or(StitchError::IncompleteCoverage)?;
        let band = &prepared[remaining.remove(pos)];
        let factor = match cfg.method {
            StitchMethod::Naive => CompensationFactor::IDENTITY,
            _ => compensation_between(band, &composite, cfg.boundary_width)?,
        };
        composite = stitch_pair(band, &composite, &factor)?;
    }

    if let Some(line) = ref_slope {
        // the intercept never left the reference values, only the slope returns
        let tmp = SubBandEstimate {
            csi: composite.csi,
            band: composite.band,
            timestamp: composite.reference_time,
            origin: Origin::Srs,
            ue: entries[ref_idx].ue,
        };
        composite.csi = apply_phase_slope(&tmp, line.slope, line.n0).csi;
    }
    Ok(composite)
}

//! Asynchronous sub-band CSI stitching: spatial smoothing, phase-slope
//! alignment, gain/phase compensation, keep-most-recent merging and
//! uniform-rate resampling.

mod align;
mod compensate;
mod resample;
mod smoothing;
mod stitch;

use thiserror::Error;

pub use align::{apply_phase_slope, cir, fit_phase_line, peak_delay, remove_slope, tonetrack_align, PhaseLine};
pub use compensate::{estimate_compensation, stitch_pair, CompensationFactor, SubBand, Timestamped};
pub use resample::{resample_uniform, ResampledSnapshot};
pub use smoothing::{principal_spatial_mode, spatial_smooth, SmoothingConfig};
pub use stitch::{stitch_full, StitchConfig, StitchMethod, StitchedChannel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StitchError {
    #[error("empty buffer")]
    EmptyBuffer,
    #[error("estimates disagree on antenna count")]
    AntennaMismatch,
    #[error("degenerate covariance")]
    DegenerateCovariance,
    #[error("invalid smoothing decay {0}")]
    InvalidDecay(f64),
    #[error("insufficient points: phase fit needs at least 2 subcarriers, got {0}")]
    InsufficientPoints(usize),
    #[error("antenna {antenna} out of range for {antennas} antennas")]
    NoSuchAntenna { antenna: usize, antennas: usize },
    #[error("no adjacency between subcarriers [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    NoAdjacency { a_start: usize, a_end: usize, b_start: usize, b_end: usize },
    #[error("degenerate boundary: zero magnitude at subcarrier {0}")]
    DegenerateBoundary(usize),
    #[error("incomplete coverage")]
    IncompleteCoverage,
    #[error("no SRS estimate to serve as reference")]
    NoReference,
    #[error("insufficient history: {0} snapshots, at least 4 needed")]
    InsufficientHistory(usize),
    #[error("snapshot times must increase strictly")]
    NonMonotonicHistory,
    #[error("snapshots cover different subcarriers or antennas")]
    HistoryShapeMismatch,
    #[error("resampling rate must be positive, got {0}")]
    InvalidRate(f64),
}

#![allow(dead_code)]

use std::f64::consts::PI;

use carts_core::channel::ChannelScenario;
use carts_core::{CsiMatrix, FrequencyGrid, Origin, SubBandEstimate, SubcarrierRange};
use num_complex::Complex64;

pub const C: f64 = 299_792_458.0;

/// Closed-form LOS response of a static UE at (x, y) on a half-wavelength
/// ULA, path-loss exponent 2, unit amplitude at 1 m.
pub fn los_oracle(x: f64, y: f64, carrier_hz: f64, grid: &FrequencyGrid, band: SubcarrierRange, m_count: usize) -> CsiMatrix {
    let d = x.hypot(y);
    let tau = d / C;
    let sin = x / d;
    let amp = 1.0 / d;
    let n_half = (grid.n_subcarriers() / 2) as f64;
    CsiMatrix::from_fn(m_count, band.len, |m, col| {
        let f = carrier_hz + ((band.start + col) as f64 - n_half) * grid.scs_hz();
        let delay_phase = -2.0 * PI * ((f * tau) % 1.0);
        Complex64::from_polar(amp, delay_phase - PI * m as f64 * sin)
    })
}

/// `min_c ‖a − c·b‖ / ‖a‖` over unit-modulus `c`.
pub fn rel_err_up_to_rotation(a: &CsiMatrix, b: &CsiMatrix) -> f64 {
    let cross: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum();
    let c = if cross.norm() > 0.0 { cross / cross.norm() } else { Complex64::new(1.0, 0.0) };
    let err: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - c * y).norm_sqr()).sum();
    (err / a.frobenius_norm_sqr()).sqrt()
}

pub fn measure(s: &ChannelScenario, grid: &FrequencyGrid, t: f64, band: SubcarrierRange, origin: Origin) -> SubBandEstimate {
    s.measure(t, band, origin, grid).unwrap()
}

/// Six equal-ish disjoint bands tiling the grid.
pub fn six_bands(grid: &FrequencyGrid) -> Vec<SubcarrierRange> {
    let n = grid.n_subcarriers();
    let edges: Vec<usize> = (0..=6).map(|i| i * n / 6).collect();
    edges.windows(2).map(|w| SubcarrierRange::from_bounds(w[0], w[1])).collect()
}

use carts_core::channel::{ChannelScenario, Trajectory, UniformLinearArray, WALKING_SPEED_MPS};
use carts_core::sensing::*;
use carts_core::FrequencyGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> FrequencyGrid {
    FrequencyGrid::nr_100mhz()
}

#[test]
fn aoa_of_a_single_ray_is_within_half_a_grid_step() {
    for deg in (-70..=70).step_by(7) {
        let theta = (deg as f64 + 0.13).to_radians();
        let (x, y) = localize(theta, 4.0);
        let s = ChannelScenario::single_ray(x, y);
        let csi = s.ground_truth_csi(0.0, &grid()).unwrap();
        let est = estimate_aoa(&csi, &s.array).unwrap();
        assert!((est - theta).abs().to_degrees() <= AOA_STEP_DEG / 2.0 + 1e-9, "{deg}: {}", est.to_degrees());
    }
}

#[test]
fn two_element_array_uses_phase_difference() {
    let theta = 23.7f64.to_radians();
    let (x, y) = localize(theta, 3.0);
    let mut s = ChannelScenario::single_ray(x, y);
    s.array = UniformLinearArray::new(2, 0.5);
    let csi = s.ground_truth_csi(0.0, &grid()).unwrap();
    assert!((estimate_aoa(&csi, &s.array).unwrap() - theta).abs() < 1e-9);
}

#[test]
fn noiseless_single_ray_localizes_exactly() {
    for &(x, y) in &[(0.0, 2.0), (1.5, 3.0), (-4.0, 6.5), (3.0, 7.0)] {
        let s = ChannelScenario::single_ray(x, y);
        let cfg = RangingConfig::from_scenario(&s);
        let csi = s.ground_truth_csi(0.0, &grid()).unwrap();
        let r = estimate_range(&csi, &cfg).unwrap();
        assert!((r - f64::hypot(x, y)).abs() < 1e-9);
        let fix = PositionEstimate::from_polar(0.0, estimate_aoa(&csi, &s.array).unwrap(), r);
        assert!((fix.x - x).hypot(fix.y - y) < 0.1);
    }
}

#[test]
fn range_follows_the_path_loss_exponent() {
    let mut s = ChannelScenario::single_ray(0.0, 5.0);
    s.path_loss_exponent = 3.0;
    s.reference_distance_m = 2.0;
    let csi = s.ground_truth_csi(0.0, &grid()).unwrap();
    let r = estimate_range(&csi, &RangingConfig::from_scenario(&s)).unwrap();
    assert!((r - 5.0).abs() < 1e-9);
}

fn walk(noise: f64, seed: u64) -> (Vec<PositionEstimate>, Vec<(f64, f64)>) {
    let path = Trajectory::rectangle(-1.5, 3.0, 3.0, 3.0, WALKING_SPEED_MPS, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fixes = Vec::new();
    let mut truth = Vec::new();
    for k in 0..2800 {
        let t = k as f64 * 5e-3;
        let (x, y) = path.position(t).unwrap();
        let (ex, ey) = (rng.random_range(-noise..noise), rng.random_range(-noise..noise));
        let (xm, ym) = (x + ex, y + ey);
        fixes.push(PositionEstimate { t, x: xm, y: ym, aoa_rad: xm.atan2(ym), range_m: xm.hypot(ym) });
        truth.push((x, y));
    }
    (fixes, truth)
}

fn rms(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    (a.iter().zip(b).map(|(p, q)| (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn smoother_reduces_error_on_a_noisy_walk() {
    for seed in 0..3 {
        let (fixes, truth) = walk(0.4, seed);
        let raw: Vec<(f64, f64)> = fixes.iter().map(|f| (f.x, f.y)).collect();
        let smoothed = kalman_smooth(&fixes, &KalmanConfig::default()).unwrap();
        let (e_raw, e_s) = (rms(&raw, &truth), rms(&smoothed, &truth));
        assert!(e_s < 0.6 * e_raw, "seed {seed}: {e_s} vs {e_raw}");
    }
}

/// Noiseless fixes on an L-shaped walk: exact on the straight legs,
/// rounded off around the turn.
#[test]
fn smoother_is_exact_away_from_the_turn() {
    let path = Trajectory::polyline(&[(-8.0, 4.0), (0.0, 4.0), (0.0, 12.0)], WALKING_SPEED_MPS);
    let turn_t = 8.0 / WALKING_SPEED_MPS;
    let fixes: Vec<PositionEstimate> = (0..3800)
        .map(|k| {
            let t = k as f64 * 5e-3;
            let (x, y) = path.position(t).unwrap();
            PositionEstimate { t, x, y, aoa_rad: x.atan2(y), range_m: x.hypot(y) }
        })
        .collect();
    let smoothed = kalman_smooth(&fixes, &KalmanConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for (f, s) in fixes.iter().zip(&smoothed) {
        let err = (s.0 - f.x).hypot(s.1 - f.y);
        if (f.t - turn_t).abs() > 6.0 {
            assert!(err < 5e-3, "t={} err={err}", f.t);
        }
        worst = worst.max(err);
    }
    assert!(worst > 0.01 && worst < 0.5, "{worst}");
}

#[test]
fn smoother_ignores_time_origin() {
    let (fixes, _) = walk(0.3, 5);
    let fixes = &fixes[..400];
    let shifted: Vec<PositionEstimate> = fixes.iter().map(|f| PositionEstimate { t: f.t + 1234.5, ..*f }).collect();
    let a = kalman_smooth(fixes, &KalmanConfig::default()).unwrap();
    let b = kalman_smooth(&shifted, &KalmanConfig::default()).unwrap();
    for (p, q) in a.iter().zip(&b) {
        assert!((p.0 - q.0).abs() < 1e-6 && (p.1 - q.1).abs() < 1e-6);
    }
}

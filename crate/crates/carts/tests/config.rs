use std::path::Path;

use carts::config::*;
use carts::Error;
use carts_core::channel::{ChannelScenario, DopplerPolicy};
use carts_core::harness::{ExperimentConfig, SchedulerKind, TrafficSource};
use carts_core::stitcher::StitchMethod;
use carts_core::trace::TrafficLevel;

fn build(text: &str) -> Result<ExperimentConfig, Error> {
    let path = Path::new("inline.toml");
    parse_file_config(text, path)?.into_experiment(path)
}

#[test]
fn empty_file_is_the_default_experiment() {
    assert_eq!(build("").unwrap(), ExperimentConfig::default());
}

#[test]
fn top_level_keys_map_onto_the_experiment() {
    let cfg = build(
        r#"
        n_ues = 20
        moving_fraction = 0.25
        scheduler = "periodic"
        traffic = "full"
        horizon_slots = 1000
        seed = 9
        rounds = 4
        urgency_floor = 0.0
        tdd = "DDSUU"

        [stitch]
        smoothing = false
        method = "peak_shift"
        boundary_width = 3

        [kalman]
        process_noise_accel = 1.5
        "#,
    )
    .unwrap();
    assert_eq!(cfg.n_ues, 20);
    assert_eq!(cfg.moving_count(), 5);
    assert_eq!(cfg.scheduler, SchedulerKind::Periodic);
    assert_eq!(cfg.traffic, TrafficSource::Synthetic(TrafficLevel::Full));
    assert_eq!((cfg.horizon_slots, cfg.seed, cfg.rounds), (1000, 9, Some(4)));
    assert_eq!(cfg.scheduler_cfg.urgency_floor, 0.0);
    assert!(cfg.tdd.is_uplink(3) && cfg.tdd.is_uplink(4) && !cfg.tdd.is_uplink(2));
    assert_eq!(cfg.stitch.smoothing, None);
    assert_eq!(cfg.stitch.method, StitchMethod::PeakShift);
    assert_eq!(cfg.stitch.boundary_width, 3);
    assert_eq!(cfg.kalman.process_noise_accel, 1.5);
    assert_eq!(cfg.kalman.measurement_noise_pos, 0.5);
}

#[test]
fn inline_scenario_overrides_the_preset() {
    let cfg = build(
        r#"
        moving_fraction = 0.0
        [scenario]
        preset = "single_ray"
        noiseless = true
        path_loss_exponent = 2.5
        array = { elements = 8 }
        trajectory = { stationary = [1.0, 4.0] }
        rays = [
          { gain = 1.0 },
          { gain = 0.4, phase_deg = 90, excess_delay_ns = 30, aoa_offset_deg = 10, doppler = "fixed" },
        ]
        "#,
    )
    .unwrap();
    let s = &cfg.scenario;
    assert_eq!(s.snr_db, None);
    assert_eq!(s.path_loss_exponent, 2.5);
    assert_eq!(s.array.elements, 8);
    assert_eq!(s.array.spacing_wavelengths, 0.5);
    assert_eq!(s.trajectory.start(), (1.0, 4.0));
    assert_eq!(s.rays.len(), 2);
    assert!((s.rays[1].relative_gain.im - 0.4).abs() < 1e-12);
    assert!((s.rays[1].excess_delay_s - 30e-9).abs() < 1e-21);
    assert_eq!(s.rays[1].doppler, DopplerPolicy::Fixed);
}

#[test]
fn scenario_file_resolves_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("scenarios")).unwrap();
    std::fs::write(
        dir.path().join("scenarios/walk.toml"),
        "snr_db = 15\n[trajectory]\nwaypoints = [[0.0, 2.0], [0.0, 12.0]]\nspeed_mps = 2.0\n",
    )
    .unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, "horizon_slots = 2000\nscenario_file = \"scenarios/walk.toml\"\n").unwrap();
    let cfg = load(&cfg_path).unwrap();
    assert_eq!(cfg.scenario.snr_db, Some(15.0));
    assert_eq!(cfg.scenario.trajectory.span(), Some((0.0, 5.0)));
    assert_eq!(cfg.scenario.rays, ChannelScenario::indoor_office().rays);
}

#[test]
fn trace_file_becomes_a_replayed_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("frame,slot,rnti,start_rb,num_rb\n");
    for k in 0..50 {
        rows.push_str(&format!("{},{},{},{},{}\n", k / 10, k % 10, 100 + k % 3, 10 * (k % 3), 8));
    }
    std::fs::write(dir.path().join("trace.csv"), rows).unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, "n_ues = 5\n[trace]\nfile = \"trace.csv\"\n").unwrap();
    let cfg = load(&cfg_path).unwrap();
    assert_eq!(cfg.n_ues, 3);
    assert_eq!(cfg.horizon_slots, 250);
    let TrafficSource::Schedule(s) = &cfg.traffic else { panic!("expected a schedule") };
    assert_eq!(s.iter().count(), 50);
}

#[test]
fn bad_configs_are_rejected() {
    assert!(matches!(build("n_uez = 3"), Err(Error::Config { .. })));
    assert!(matches!(build("tdd = \"DDD\""), Err(Error::Config { .. })));
    assert!(matches!(build("n_rbs = 271"), Err(Error::Config { .. })));
    assert!(matches!(build("scheduler = \"fifo\""), Err(Error::Config { .. })));
    assert!(build("n_ues = 0").is_err());
    assert!(build("scenario_file = \"a.toml\"\n[scenario]\nsnr_db = 3").is_err());
    assert!(build("[scenario.trajectory]\nstationary = [1.0, 2.0]\nwaypoints = [[0.0, 1.0]]").is_err());
    let too_long = build("horizon_slots = 100000");
    assert!(matches!(too_long, Err(Error::Harness(_))), "{too_long:?}");
}

#[test]
fn sweep_parameters() {
    assert_eq!(parse_sweep("n_ues=5,10, 20").unwrap(), ("n_ues".to_string(), vec!["5".into(), "10".into(), "20".into()]));
    assert!(matches!(parse_sweep("n_ues"), Err(Error::BadParam(_))));
    assert!(matches!(parse_sweep("n_ues="), Err(Error::BadParam(_))));
    let mut cfg = ExperimentConfig::default();
    apply_param(&mut cfg, "n_ues", "50").unwrap();
    apply_param(&mut cfg, "smoothing", "off").unwrap();
    apply_param(&mut cfg, "snr_db", "none").unwrap();
    apply_param(&mut cfg, "traffic", "zero").unwrap();
    assert_eq!(cfg.n_ues, 50);
    assert_eq!(cfg.stitch.smoothing, None);
    assert_eq!(cfg.scenario.snr_db, None);
    assert_eq!(cfg.traffic, TrafficSource::Synthetic(TrafficLevel::Zero));
    assert!(matches!(apply_param(&mut cfg, "n_ues", "many"), Err(Error::BadValue { .. })));
    assert!(matches!(apply_param(&mut cfg, "colour", "red"), Err(Error::UnknownParam(_))));
}

#[test]
fn shipped_config_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/office.toml");
    let cfg = load(&path).unwrap();
    assert_eq!(cfg.n_ues, 10);
    assert_eq!(cfg.scenario.snr_db, Some(20.0));
    assert_eq!(cfg.traffic, TrafficSource::Synthetic(TrafficLevel::Medium));
}

use std::path::Path;
use std::process::Command;

const SMALL: &str = "n_ues = 4\nhorizon_slots = 600\nrounds = 2\ntraffic = \"medium\"\n";

fn carts(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_carts")).args(args).output().expect("binary runs")
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = carts(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(
        header(&out.join("metrics.csv")),
        "round,target_ue,moving,slot,t,n_bands,max_age_s,nmse,cir_peak_error,aoa_deg,range_m,x_est,y_est,x_true,y_true"
    );
    assert_eq!(header(&out.join("allocations.csv")), "round,slot,ue,resource_k,start_rb,num_rb");
    assert_eq!(header(&out.join("measurements.csv")), "round,slot,t,origin,first_subcarrier,n_subcarriers");
    assert_eq!(header(&out.join("trajectory.csv")), "round,t,x_est,y_est,x_true,y_true,x_smoothed,y_smoothed");
    assert_eq!(header(&out.join("stitched_r0.csv")), "subcarrier,antenna,re,im,provenance_t");
    assert!(header(&out.join("rounds.csv")).starts_with("round,target_ue,moving,est_rate_hz,"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rounds"], 2);
    assert_eq!(summary["traffic"], "medium");
    assert_eq!(summary["per_round"].as_array().unwrap().len(), 2);
    assert!(summary["summary"]["stitches"].as_u64().unwrap() > 0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        assert!(carts(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    }
    for file in ["metrics.csv", "allocations.csv", "measurements.csv", "trajectory.csv", "stitched_r1.csv", "summary.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
}

#[test]
fn sweep_and_compare_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let sweep = dir.path().join("sweep");
    let res = carts(&["sweep", "--config", &cfg, "--param", "n_ues=2,4", "--out", sweep.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(sweep.join("n_ues=2/summary.json").exists() && sweep.join("n_ues=4/metrics.csv").exists());
    let table = std::fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("param,value,stitches,"));

    let cmp = dir.path().join("cmp");
    let res = carts(&["compare", "--config", &cfg, "--schedulers", "carts,periodic", "--out", cmp.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = std::fs::read_to_string(cmp.join("compare.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert!(rows[0].starts_with("scheduler,carts,") && rows[1].starts_with("scheduler,periodic,"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cmp.join("compare.json")).unwrap()).unwrap();
    assert_eq!(json[1]["scheduler"], "periodic");
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_ues = \"ten\"\n");
    let res = carts(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    let res = carts(&["sweep", "--param", "colour=red", "--out", dir.path().join("s").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let res = carts(&["compare", "--schedulers", "carts,fifo"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn invariant_violations_map_to_their_own_exit_code() {
    use carts::core::harness::HarnessError;
    use carts::Error;
    let inv = Error::Harness(HarnessError::PhantomMeasurement { slot: 3, ue: 1 });
    assert!(inv.is_invariant_violation());
    assert_eq!(inv.exit_code(), 2);
    assert_eq!(Error::EmptyTrace.exit_code(), 1);
}

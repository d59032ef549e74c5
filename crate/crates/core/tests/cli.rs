use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hkiclock::circuit::{serialize_netlist, TranSpec};
use hkiclock::resonator::{build_quad, quadrature_ic, QuadSpec};
use serde_json::Value;

fn hkiclock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hkiclock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn profile(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("profiles")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p:?}: {e}"))).unwrap()
}

fn quad_netlist(dir: &Path) -> String {
    let mut c = quadrature_ic(&build_quad(&QuadSpec::symmetric(1e-6, 1e-12, 1.0)).unwrap(), 1.0).unwrap();
    c.tran = Some(TranSpec {
        dt: 2e-12,
        t_stop: 10e-9,
    });
    let p = dir.join("quad.cir");
    std::fs::write(&p, serialize_netlist(&c).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn plan_reports_layers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("hr");
    let o = hkiclock(&[
        "plan",
        "--process",
        &profile("seeqc.json"),
        "--chip",
        &profile("horseridge.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("layers_required = 2"), "{}", stdout(&o));
    let plan = read_json(out.join("plan.json"));
    assert_eq!(plan["layers_required"], 2);
    assert!(out.join("plan.txt").exists());

    let low = tmp.path().join("low");
    let o = hkiclock(&[
        "plan",
        "--process",
        &profile("seeqc.json"),
        "--chip",
        &profile("horseridge-low.json"),
        "--out",
        low.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_json(low.join("plan.json"))["layers_required"], 3);
}

#[test]
fn sim_and_modes_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let net = quad_netlist(tmp.path());
    let out = tmp.path().join("o");
    let o = hkiclock(&["sim", &net, "--out", out.to_str().unwrap(), "--seed-manifest"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(csv.starts_with("time_s,v(P0)"), "{}", &csv[..60]);
    let energy = read_json(out.join("energy.json"));
    assert!(energy["conservation_residual"].as_f64().unwrap().abs() < 1e-6);
    let manifest = read_json(out.join("manifest.json"));
    assert!(manifest.to_string().contains("quad.cir"));

    let o = hkiclock(&["modes", &net, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let modes = read_json(out.join("modes.json"));
    assert_eq!(modes.as_array().map(Vec::len), Some(4));
}

#[test]
fn resonator_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok");
    let o = hkiclock(&["resonator", "--quad", "--rdrive", "5k", "--out", ok.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("sustained"));
    for f in ["scenario.json", "waveforms.csv", "verdict.json", "circuit.cir"] {
        assert!(ok.join(f).exists(), "{f}");
    }
    assert_eq!(read_json(ok.join("verdict.json"))["verdict"]["sustained"], true);

    let bad = tmp.path().join("bad");
    let o = hkiclock(&["resonator", "--quad", "--rdrive", "15k", "--out", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");
    assert!(stdout(&o).contains("failed"));
    assert!(read_json(bad.join("verdict.json"))["verdict"]["time_of_collapse"].is_number());
}

#[test]
fn scenario_file_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("a");
    let o = hkiclock(&["resonator", "--quad", "--rdrive", "5k", "--out", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let scenario = first.join("scenario.json");
    let second = tmp.path().join("b");
    let o = hkiclock(&[
        "resonator",
        "--scenario",
        scenario.to_str().unwrap(),
        "--set",
        "drive.r_drive=15k",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");
    let o = hkiclock(&[
        "resonator",
        "--scenario",
        scenario.to_str().unwrap(),
        "--set",
        "no.such.key=1",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_outputs_and_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = hkiclock(&["sweep-rdrive", "--values", "2k,15k", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("2000,true"));
    assert!(csv.lines().nth(2).unwrap().starts_with("15000,false"));
    let o = hkiclock(&["sweep-rdrive", "--values", "2k,15k", "--check", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = hkiclock(&["sweep-rdrive", "--values", "5k,1k", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn study_scaling_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("st");
    let o = hkiclock(&["study-scaling", "--gate", "default", "--freqs", "25meg", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    for f in ["scaling.csv", "scaling.json", "scaling_table.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn input_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let o = out.to_str().unwrap();
    let missing = tmp.path().join("missing.cir");
    assert_eq!(hkiclock(&["sim", missing.to_str().unwrap(), "--out", o]).status.code(), Some(2));
    let garbage = tmp.path().join("bad.cir");
    std::fs::write(&garbage, "R1 a\n").unwrap();
    assert_eq!(hkiclock(&["modes", garbage.to_str().unwrap(), "--out", o]).status.code(), Some(2));
    assert_eq!(hkiclock(&["resonator", "--bogus"]).status.code(), Some(2));
    assert_eq!(hkiclock(&[]).status.code(), Some(2));
    assert_eq!(hkiclock(&["--help"]).status.code(), Some(0));
}

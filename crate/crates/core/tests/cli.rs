use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tiltwing::manifest::{sha256_hex, RunManifest};
use tiltwing::env::EnvConfig;
use tiltwing::pipeline::ReferenceRecord;
use tiltwing::reference::{read_jsonl, rollout_controls};
use tiltwing::vehicle::VehicleConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tiltwing"))
}

fn scratch(tag: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn controls_csv(dir: &Path, power: f64, theta: f64, n: usize) -> PathBuf {
    let p = dir.join("controls.csv");
    let mut text = String::from("P,theta\n");
    for _ in 0..n {
        text.push_str(&format!("{power},{theta}\n"));
    }
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn min_power_with_horizontal_thrust_hits_the_ground() {
    let d = scratch("ground");
    let c = controls_csv(&d, 180_000.0, std::f64::consts::FRAC_PI_2, 50);
    let out_csv = d.join("ep.csv");
    let out = run(&["simulate", "--controls", s(&c), "--out", s(&out_csv)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.ends_with(",ground"), "{last}");
    assert!(text.lines().count() - 1 < 10);
}

#[test]
fn floats_have_17_significant_digits() {
    let d = scratch("digits");
    let c = controls_csv(&d, 250_000.0, 0.2, 3);
    let out_csv = d.join("ep.csv");
    assert!(run(&["simulate", "--controls", s(&c), "--out", s(&out_csv)]).status.success());
    let text = std::fs::read_to_string(&out_csv).unwrap();
    for cell in text.lines().nth(1).unwrap().split(',').take(12) {
        let mantissa = cell.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{cell}");
        let v: f64 = cell.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), cell);
    }
}

#[test]
fn evaluate_trajectory_against_itself() {
    let d = scratch("self");
    let c = controls_csv(&d, 300_000.0, 0.1, 40);
    let ep = d.join("ep.csv");
    assert!(run(&["simulate", "--controls", s(&c), "--out", s(&ep)]).status.success());
    let report = d.join("report.json");
    let out = run(&["evaluate", "--trajectory", s(&ep), "--reference", s(&ep), "--out", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["accuracy"]["ra"].as_f64(), Some(1.0));

    let replay = d.join("replay.json");
    let out = run(&["evaluate", "--controls", s(&ep), "--reference", s(&ep), "--out", s(&replay)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&replay).unwrap()).unwrap();
    assert_eq!(v["accuracy"]["ra"].as_f64(), Some(1.0));

    let out = run(&["evaluate", "--trajectory", s(&ep), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_records_config_and_hashes() {
    let d = scratch("manifest");
    let c = controls_csv(&d, 300_000.0, 0.1, 5);
    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"env": {"dt": 0.05}, "seed": 9}"#).unwrap();
    let ep = d.join("ep.csv");
    let out = run(&["simulate", "--config", s(&cfg), "--set", "env.dt=0.2", "--controls", s(&c), "--out", s(&ep)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::read(&d.join("ep.csv.manifest.json")).unwrap();
    assert_eq!(m.command, "simulate");
    assert_eq!(m.config["env"]["dt"].as_f64(), Some(0.2));
    assert_eq!(m.seeds["seed"], 9);
    assert_eq!(m.inputs[0].sha256, sha256_hex(&std::fs::read(&c).unwrap()));
    assert_eq!(m.outputs[0].sha256, sha256_hex(&std::fs::read(&ep).unwrap()));
    let text = std::fs::read_to_string(&ep).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("2.0000000000000001e-1,"));

    let seeded = d.join("ep2.csv");
    let out = run(&["simulate", "--config", s(&cfg), "--seed", "4", "--controls", s(&c), "--out", s(&seeded)]);
    assert!(out.status.success());
    assert_eq!(RunManifest::read(&d.join("ep2.csv.manifest.json")).unwrap().seeds["seed"], 4);

    let replay = d.join("ep3.csv");
    let out = run(&["simulate", "--config", s(&d.join("ep.csv.manifest.json")), "--controls", s(&c), "--out", s(&replay)]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&replay).unwrap(), std::fs::read(&ep).unwrap());
}

#[test]
fn bad_config_and_thread_settings_are_usage_errors() {
    let d = scratch("badcfg");
    let c = controls_csv(&d, 300_000.0, 0.1, 5);
    let ep = d.join("ep.csv");
    let out = run(&["simulate", "--set", "env.nope=1", "--controls", s(&c), "--out", s(&ep)]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["simulate", "--controls", s(&c), "--out", s(&ep)]).env("EVTOL_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--controls", s(&d.join("missing.csv")), "--out", s(&ep)]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["train-sac", "--env", "toy", "--mode", "guided", "--out", s(&d.join("x.ckpt"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_ref_infeasible_budget_exits_3() {
    let d = scratch("infeasible");
    let out_json = d.join("ref.json");
    let out = run(&[
        "optimize-ref", "--alpha-max", "12", "--a-max", "0.3", "--k-w", "0.8", "--eta", "0.8", "--s-ref", "0.95",
        "--path-constraints", "--budget", "40", "--out", s(&out_json),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    assert_eq!(v["feasible"], serde_json::json!(false));
}

#[test]
fn optimize_ref_then_replay_matches_reported_energy() {
    let d = scratch("optref");
    let out_json = d.join("ref.json");
    let csv = d.join("ref.csv");
    let out = run(&["optimize-ref", "--verification", "--budget", "1200", "--out", s(&out_json), "--csv", s(&csv)]);
    assert!(matches!(out.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::read(&d.join("ref.json.manifest.json")).unwrap();
    assert_eq!(m.config["vehicle"]["momentum_consistent"], serde_json::json!(true));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    let ep = d.join("replay.csv");
    let cfgm = d.join("ref.json.manifest.json");
    assert!(run(&["simulate", "--config", s(&cfgm), "--controls", s(&out_json), "--out", s(&ep)]).status.success());
    let text = std::fs::read_to_string(&ep).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "energy_Wh").unwrap();
    let last: f64 = text.lines().last().unwrap().split(',').nth(col).unwrap().parse().unwrap();
    let reported = v["energy_wh"].as_f64().unwrap();
    let rec: ReferenceRecord = serde_json::from_value(v).unwrap();
    let steps = text.lines().count() - 1;
    let cond = rec.condition;
    let vehicle = VehicleConfig { momentum_consistent: true, ..VehicleConfig::default() };
    let prefix = rollout_controls(&rec.physical_controls()[..steps], &cond, &cond.apply(&vehicle), &EnvConfig::default());
    assert_eq!(last, prefix.energy_wh);
    assert!(last <= reported);
    if steps < rec.controls.len() {
        assert!(text.lines().last().unwrap().ends_with(",took_off"));
    } else {
        assert_eq!(last, reported);
    }
    assert_eq!(std::fs::read(&ep).unwrap(), std::fs::read(&csv).unwrap());
}

#[test]
fn gen_dataset_round_trips_bit_identically() {
    let d = scratch("dataset");
    let path = d.join("ds.jsonl");
    let out = run(&["gen-dataset", "--n", "3", "--budget", "600", "--seed", "2", "--set", "dataset.path_constraints=false", "--out", s(&path)]);
    assert!(matches!(out.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&path).unwrap();
    let entries = read_jsonl(std::io::BufReader::new(&bytes[..])).unwrap();
    let mut again = Vec::new();
    tiltwing::reference::write_jsonl(&entries, &mut again).unwrap();
    assert_eq!(again, bytes);
}

#[test]
fn toy_training_and_plots() {
    let d = scratch("toy");
    let ck = d.join("toy.ckpt");
    let out = run(&["train-sac", "--env", "toy", "--steps", "600", "--set", "sac_toy.eval_interval=300", "--set", "sac_toy.warmup=200", "--out", s(&ck)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(d.join("toy.ckpt.metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,eval_return"));
    assert_eq!(metrics.lines().count(), 1 + 3);

    let c = controls_csv(&d, 300_000.0, 0.3, 30);
    let ep = d.join("ep.csv");
    assert!(run(&["simulate", "--controls", s(&c), "--out", s(&ep)]).status.success());
    let plots = d.join("plots");
    let out = run(&["export-plots", "--csv", s(&ep), "--label", "constant", "--out-dir", s(&plots)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trajectory.svg", "speed.svg"] {
        let svg = std::fs::read_to_string(plots.join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<path d=\"M") && svg.contains("constant"));
    }
    assert!(plots.join("manifest.json").exists());
    let out = run(&["export-plots", "--csv", s(&ep), "--label", "a", "--label", "b", "--out-dir", s(&plots)]);
    assert_eq!(out.status.code(), Some(2));
}

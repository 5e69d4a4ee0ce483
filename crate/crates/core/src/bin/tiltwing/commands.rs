use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde_json::{json, Value};
use tiltwing::checkpoint::Checkpoint;
use tiltwing::config::RunConfig;
use tiltwing::env::{episode_csv, fmt17, EpisodeRow, ObsMode, TakeoffEnv};
use tiltwing::guided::{train_guided, GuidedTakeoff};
use tiltwing::manifest::{sha256_hex, write_atomic};
use tiltwing::metrics::AccuracyReport;
use tiltwing::pipeline::{self, episode_energy, ReferenceRecord};
use tiltwing::plots::{takeoff_figures, Columns};
use tiltwing::reference::{build_dataset, by_split, optimize, read_jsonl, write_jsonl, DatasetEntry, FlightCondition, Split};
use tiltwing::sac::{self, metrics_csv, DoubleIntegrator, SacAgent, TrainOptions, TrainOutcome, VanillaTakeoff};
use tiltwing::transformer::{self, GenerationMode, Transformer};
use tiltwing::vehicle::ControlInput;

use crate::{EnvKind, Failure, Mode, Outcome, EXIT_INFEASIBLE, EXIT_NUMERICAL};

type Res<T> = Result<T, Failure>;

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn manifest_for(p: &Path) -> PathBuf {
    with_suffix(p, ".manifest.json")
}

fn to_json<T: serde::Serialize>(v: &T) -> Res<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(tiltwing::Error::from)?;
    s.push('\n');
    Ok(s)
}

fn episode_summary(rows: &[EpisodeRow]) -> Value {
    match rows.last() {
        None => json!({"steps": 0}),
        Some(r) => json!({
            "steps": rows.len(),
            "cause": r.cause.as_str(),
            "energy_wh": r.energy_wh,
            "t": r.state.t,
            "x": r.state.x,
            "y": r.state.y,
            "v_x": r.state.vx,
        }),
    }
}

fn read_dataset(path: &Path) -> Res<Vec<DatasetEntry>> {
    let f = std::fs::File::open(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok(read_jsonl(std::io::BufReader::new(f))?)
}

fn load_checkpoint(path: &Path) -> Res<Checkpoint> {
    Checkpoint::load(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Controls from a reference JSON (with its flight condition) or from a CSV
/// with `P` and `theta` columns; `normalized` reads the CSV in [0, 1] units.
fn read_controls(path: &Path, normalized: bool) -> Res<(Vec<ControlInput>, Option<FlightCondition>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let rec: ReferenceRecord =
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        return Ok((rec.physical_controls(), Some(rec.condition)));
    }
    let cols = Columns::parse(&text)?;
    let p = cols.get("P").or_else(|_| cols.get("power"))?;
    let th = cols.get("theta")?;
    let controls = p
        .iter()
        .zip(th)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(&a, &b)| if normalized { ControlInput::from_normalized([a, b]) } else { ControlInput::new(a, b) })
        .collect();
    Ok((controls, None))
}

/// Reference energy from a number, a JSON document with `energy_wh`, or the
/// last `energy_Wh` of an episode CSV.
fn reference_energy(path: Option<&PathBuf>, wh: Option<f64>) -> Res<Option<f64>> {
    if let Some(w) = wh {
        return Ok(Some(w));
    }
    let Some(path) = path else { return Ok(None) };
    Ok(Some(file_energy(path)?))
}

fn file_energy(path: &Path) -> Res<f64> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if let Ok(v) = serde_json::from_str::<Value>(&text) {
        return v
            .get("energy_wh")
            .and_then(Value::as_f64)
            .ok_or_else(|| Failure::usage(format!("{}: no energy_wh field", path.display())));
    }
    let cols = Columns::parse(&text)?;
    cols.get("energy_Wh")?
        .iter()
        .rev()
        .find(|v| v.is_finite())
        .copied()
        .ok_or_else(|| Failure::usage(format!("{}: empty trajectory", path.display())))
}

fn accuracy_json(e_gen: f64, e_ref: Option<f64>) -> Res<Value> {
    Ok(match e_ref {
        Some(r) => serde_json::to_value(AccuracyReport::new(e_gen, r)?).map_err(tiltwing::Error::from)?,
        None => Value::Null,
    })
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Reference JSON from optimize-ref, or CSV with P and theta columns.
    #[arg(long)]
    controls: PathBuf,
    /// CSV controls are in normalized [0, 1] units.
    #[arg(long)]
    normalized: bool,
    #[arg(long)]
    out: PathBuf,
}

pub fn simulate(a: SimulateArgs, cfg: RunConfig) -> Res<Outcome> {
    let (controls, cond) = read_controls(&a.controls, a.normalized)?;
    let vehicle = cond.map_or_else(|| cfg.vehicle.clone(), |c| c.apply(&cfg.vehicle));
    let mut env = TakeoffEnv::new(vehicle, cfg.env.clone(), ObsMode::Vanilla)?;
    let rows = pipeline::simulate(&mut env, &controls)?;
    write_atomic(&a.out, episode_csv(&rows).as_bytes())?;
    Ok(Outcome {
        code: 0,
        config: cfg,
        inputs: vec![a.controls],
        manifest_default: manifest_for(&a.out),
        outputs: vec![a.out],
        summary: json!({"episode": episode_summary(&rows)}),
    })
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// The single verification condition (k_w 1, η 0.9, S_ref 1, no path
    /// limits) with the momentum-consistent induced velocity.
    #[arg(long, conflicts_with_all = ["alpha_max", "a_max", "k_w", "eta", "s_ref", "path_constraints"])]
    verification: bool,
    /// Angle-of-attack limit (deg).
    #[arg(long)]
    alpha_max: Option<f64>,
    /// Acceleration limit (g).
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    k_w: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    s_ref: Option<f64>,
    #[arg(long)]
    path_constraints: bool,
    /// Rollout budget.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the optimized controls replayed through the environment.
    #[arg(long)]
    csv: Option<PathBuf>,
}

pub fn optimize_ref(a: OptimizeArgs, mut cfg: RunConfig) -> Res<Outcome> {
    let mut cond = FlightCondition::verification();
    if a.verification {
        cfg.vehicle.momentum_consistent = true;
    } else {
        cond.alpha_max_deg = a.alpha_max.unwrap_or(cond.alpha_max_deg);
        cond.a_max_g = a.a_max.unwrap_or(cond.a_max_g);
        cond.k_w = a.k_w.unwrap_or(cond.k_w);
        cond.eta = a.eta.unwrap_or(cond.eta);
        cond.s_ref = a.s_ref.unwrap_or(cond.s_ref);
        cond.path_constraints = a.path_constraints;
    }
    cond.validate()?;
    if let Some(b) = a.budget {
        cfg.optimizer.budget = b;
    }
    let result = optimize(&cond, &cfg.vehicle, &cfg.env, &cfg.optimizer)?;
    let rec = ReferenceRecord::new(cond, &result, cfg.env.dt)?;
    write_atomic(&a.out, to_json(&rec)?.as_bytes())?;
    let mut outputs = vec![a.out.clone()];
    if let Some(csv) = a.csv {
        let mut env = TakeoffEnv::new(cond.apply(&cfg.vehicle), cfg.env.clone(), ObsMode::Vanilla)?;
        let rows = pipeline::simulate(&mut env, &rec.physical_controls())?;
        write_atomic(&csv, episode_csv(&rows).as_bytes())?;
        outputs.push(csv);
    }
    Ok(Outcome {
        code: if rec.feasible { 0 } else { EXIT_INFEASIBLE },
        summary: json!({
            "energy_wh": rec.energy_wh,
            "duration_s": rec.duration,
            "feasible": rec.feasible,
            "evaluations": rec.evaluations,
            "residuals": rec.residuals,
        }),
        config: cfg,
        inputs: vec![],
        manifest_default: manifest_for(&a.out),
        outputs,
    })
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    /// Number of sampled flight conditions.
    #[arg(long)]
    n: Option<usize>,
    /// Rollout budget per condition.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

pub fn gen_dataset(a: DatasetArgs, mut cfg: RunConfig) -> Res<Outcome> {
    if let Some(n) = a.n {
        cfg.dataset.n = n;
    }
    if let Some(b) = a.budget {
        cfg.dataset.optimizer.budget = b;
    }
    let report = build_dataset(&cfg.vehicle, &cfg.env, &cfg.dataset)?;
    let mut buf = Vec::new();
    write_jsonl(&report.entries, &mut buf)?;
    write_atomic(&a.out, &buf)?;
    let count = |s| report.entries.iter().filter(|e| e.split == s).count();
    Ok(Outcome {
        code: if report.entries.is_empty() { EXIT_INFEASIBLE } else { 0 },
        summary: json!({
            "kept": report.entries.len(),
            "excluded": report.excluded.len(),
            "train": count(Split::Train),
            "val": count(Split::Val),
            "test": count(Split::Test),
        }),
        config: cfg,
        inputs: vec![],
        manifest_default: manifest_for(&a.out),
        outputs: vec![a.out],
    })
}

#[derive(Args, Debug)]
pub struct TransformerArgs {
    /// Dataset JSONL from gen-dataset.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch losses (default: <out>.metrics.csv).
    #[arg(long)]
    metrics: Option<PathBuf>,
}

pub fn train_transformer(a: TransformerArgs, mut cfg: RunConfig) -> Res<Outcome> {
    if let Some(e) = a.epochs {
        cfg.transformer.epochs = e;
    }
    let entries = read_dataset(&a.data)?;
    let seqs = |s| by_split(&entries, s).iter().map(|e| e.controls.as_slice()).collect::<Vec<_>>();
    let (train, val) = (seqs(Split::Train), seqs(Split::Val));
    if train.is_empty() || val.is_empty() {
        return Err(Failure::usage("dataset needs train and val entries"));
    }
    let (model, report) = transformer::train(&cfg.transformer, &train, &val, cfg.seed, |e, t, v| {
        eprintln!("epoch {e} train_nll {t:.6} val_nll {v:.6}")
    })?;
    let mut csv = String::from("epoch,train_nll,val_nll\n");
    for (i, (t, v)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        csv.push_str(&format!("{i},{},{}\n", fmt17(*t), fmt17(*v)));
    }
    let test = by_split(&entries, Split::Test);
    let checks = pipeline::generation_accuracy(&model, &test, &cfg.vehicle, &cfg.env, GenerationMode::Mean, cfg.seed)?;
    let mean_ra = (!checks.is_empty()).then(|| checks.iter().map(|c| c.ra).sum::<f64>() / checks.len() as f64);
    let data_hash = sha256_hex(&std::fs::read(&a.data)?);
    let ckpt = model.to_checkpoint(cfg.seed, json!({"dataset_sha256": data_hash, "best_epoch": report.best_epoch}))?;
    write_atomic(&a.out, &ckpt.to_bytes()?)?;
    let metrics = a.metrics.unwrap_or_else(|| with_suffix(&a.out, ".metrics.csv"));
    write_atomic(&metrics, csv.as_bytes())?;
    let first = report.val_loss.first().copied().unwrap_or(f64::NAN);
    Ok(Outcome {
        code: if report.diverged { EXIT_NUMERICAL } else { 0 },
        summary: json!({
            "epochs_run": report.val_loss.len(),
            "first_val_nll": first,
            "best_val_nll": report.best_val,
            "best_epoch": report.best_epoch,
            "val_improvement": (first - report.best_val) / first.abs(),
            "diverged": report.diverged,
            "test_mean_ra": mean_ra,
            "test": checks,
        }),
        config: cfg,
        inputs: vec![a.data],
        manifest_default: manifest_for(&a.out),
        outputs: vec![a.out, metrics],
    })
}

#[derive(Args, Debug)]
pub struct SacArgs {
    #[arg(long, value_enum, default_value = "vanilla")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "takeoff")]
    env: EnvKind,
    /// Frozen transformer checkpoint (guided mode).
    #[arg(long)]
    transformer: Option<PathBuf>,
    /// Environment steps.
    #[arg(long)]
    steps: Option<u64>,
    /// End training after the first successful takeoff episode.
    #[arg(long)]
    stop_on_success: bool,
    /// Agent checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Evaluation log (default: <out>.metrics.csv).
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Deterministic episode of the best agent (default: <out>.episode.csv).
    #[arg(long)]
    episode: Option<PathBuf>,
    /// Reference energy for the accuracy of the final episode: a reference
    /// JSON or an episode CSV.
    #[arg(long, conflicts_with = "reference_wh")]
    reference: Option<PathBuf>,
    #[arg(long)]
    reference_wh: Option<f64>,
}

fn load_transformer(path: Option<&PathBuf>) -> Res<(Arc<Transformer>, PathBuf)> {
    let path = path.ok_or_else(|| Failure::usage("guided mode needs --transformer"))?;
    let model = Transformer::from_checkpoint(&load_checkpoint(path)?)?;
    Ok((Arc::new(model), path.clone()))
}

pub fn train_sac(a: SacArgs, mut cfg: RunConfig) -> Res<Outcome> {
    let e_ref = reference_energy(a.reference.as_ref(), a.reference_wh)?;
    let mut inputs: Vec<PathBuf> = a.reference.iter().cloned().collect();
    let opts = TrainOptions { stop_on_success: a.stop_on_success };
    let log = |r: &sac::MetricsRow| {
        eprintln!("step {} eval_return {:.6} successes {} lr {:.3e}", r.step, r.eval_return, r.eval_successes, r.lr)
    };
    let steps = a.steps;
    let mut summary = json!({});
    let mut rows = None;
    let outcome: TrainOutcome = match (a.env, a.mode) {
        (EnvKind::Toy, Mode::Guided) => return Err(Failure::usage("the toy environment has no guided mode")),
        (EnvKind::Toy, Mode::Vanilla) => {
            if let Some(s) = steps {
                cfg.sac_toy.total_steps = s;
            }
            sac::train(&DoubleIntegrator::default(), &cfg.sac_toy, cfg.seed, &opts, log)?
        }
        (EnvKind::Takeoff, Mode::Vanilla) => {
            if let Some(s) = steps {
                cfg.sac.total_steps = s;
            }
            let env = TakeoffEnv::new(cfg.vehicle.clone(), cfg.env.clone(), ObsMode::Vanilla)?;
            let out = sac::train(&VanillaTakeoff::new(env.clone())?, &cfg.sac, cfg.seed, &opts, log)?;
            rows = Some(pipeline::vanilla_episode(&out.best, &mut env.clone())?);
            out
        }
        (EnvKind::Takeoff, Mode::Guided) => {
            if let Some(s) = steps {
                cfg.sac.total_steps = s;
            }
            let (model, path) = load_transformer(a.transformer.as_ref())?;
            let env = TakeoffEnv::new(cfg.vehicle.clone(), cfg.env.clone(), ObsMode::Guided)?;
            let (out, audit) = train_guided(env.clone(), model.clone(), &cfg.sac, cfg.seed, &opts, log)?;
            summary["envelope_checked"] = json!(audit.checked());
            summary["envelope_violations"] = json!(audit.violations());
            rows = Some(pipeline::guided_episode(&out.best, &mut GuidedTakeoff::new(env, model)?)?);
            inputs.push(path);
            out
        }
    };
    let transformer_hash = match &a.transformer {
        Some(p) if a.mode == Mode::Guided => Value::String(sha256_hex(&std::fs::read(p)?)),
        _ => Value::Null,
    };
    let meta = json!({
        "mode": if a.mode == Mode::Guided { "guided" } else { "vanilla" },
        "env": if a.env == EnvKind::Toy { "toy" } else { "takeoff" },
        "transformer_sha256": transformer_hash,
    });
    write_atomic(&a.out, &outcome.best.to_checkpoint(cfg.seed, meta)?.to_bytes()?)?;
    let metrics = a.metrics.unwrap_or_else(|| with_suffix(&a.out, ".metrics.csv"));
    write_atomic(&metrics, metrics_csv(&outcome.metrics).as_bytes())?;
    let mut outputs = vec![a.out.clone(), metrics];
    summary["best_return"] = json!(outcome.best_return);
    summary["best_step"] = json!(outcome.best_step);
    summary["total_steps"] = json!(outcome.total_steps);
    summary["episodes"] = json!(outcome.episodes);
    summary["training_successes"] = json!(outcome.training_successes);
    summary["first_success_step"] = json!(outcome.first_success_step);
    if let Some(rows) = rows {
        let path = a.episode.unwrap_or_else(|| with_suffix(&a.out, ".episode.csv"));
        write_atomic(&path, episode_csv(&rows).as_bytes())?;
        outputs.push(path);
        summary["episode"] = episode_summary(&rows);
        summary["accuracy"] = accuracy_json(episode_energy(&rows), e_ref)?;
    }
    Ok(Outcome { code: 0, config: cfg, inputs, manifest_default: manifest_for(&a.out), outputs, summary })
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Agent checkpoint from train-sac; runs one deterministic episode.
    #[arg(long, conflicts_with_all = ["trajectory", "controls"])]
    agent: Option<PathBuf>,
    /// Existing episode CSV.
    #[arg(long, conflicts_with = "controls")]
    trajectory: Option<PathBuf>,
    /// Controls to simulate (as for `simulate`).
    #[arg(long)]
    controls: Option<PathBuf>,
    /// Transformer checkpoint: frozen proposals for a guided agent, or,
    /// without --agent, autoregressive generation against --data.
    #[arg(long)]
    transformer: Option<PathBuf>,
    /// Dataset whose test split the transformer is evaluated on.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    generation_mode: Option<GenMode>,
    /// Reference JSON or episode CSV.
    #[arg(long, conflicts_with = "reference_wh")]
    reference: Option<PathBuf>,
    #[arg(long)]
    reference_wh: Option<f64>,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Episode CSV of the evaluated run.
    #[arg(long)]
    episode: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum GenMode {
    Mean,
    Sample,
}

fn agent_episode(path: &Path, transformer: Option<&PathBuf>, cfg: &RunConfig, inputs: &mut Vec<PathBuf>) -> Res<Vec<EpisodeRow>> {
    let ckpt = load_checkpoint(path)?;
    let agent = SacAgent::from_checkpoint(&ckpt)?;
    match ckpt.header.meta.get("env").and_then(Value::as_str) {
        Some("takeoff") | None => {}
        Some(other) => return Err(Failure::usage(format!("agent was trained on the '{other}' environment"))),
    }
    let guided = ckpt.header.meta.get("mode").and_then(Value::as_str) == Some("guided");
    if guided {
        let (model, tpath) = load_transformer(transformer)?;
        if let Some(h) = ckpt.header.meta.get("transformer_sha256").and_then(Value::as_str) {
            if h != sha256_hex(&std::fs::read(&tpath)?) {
                return Err(Failure::usage("transformer differs from the one the agent was trained with"));
            }
        }
        inputs.push(tpath);
        let env = TakeoffEnv::new(cfg.vehicle.clone(), cfg.env.clone(), ObsMode::Guided)?;
        Ok(pipeline::guided_episode(&agent, &mut GuidedTakeoff::new(env, model)?)?)
    } else {
        let mut env = TakeoffEnv::new(cfg.vehicle.clone(), cfg.env.clone(), ObsMode::Vanilla)?;
        Ok(pipeline::vanilla_episode(&agent, &mut env)?)
    }
}

pub fn evaluate(a: EvaluateArgs, cfg: RunConfig) -> Res<Outcome> {
    let mut inputs: Vec<PathBuf> = a.reference.iter().cloned().collect();
    let mut outputs = vec![a.out.clone()];
    let e_ref = reference_energy(a.reference.as_ref(), a.reference_wh)?;
    let report = if a.agent.is_some() || a.trajectory.is_some() || a.controls.is_some() {
        let e_ref = e_ref.ok_or_else(|| Failure::usage("evaluate needs --reference or --reference-wh"))?;
        let (energy, episode) = if let Some(p) = &a.trajectory {
            inputs.push(p.clone());
            (file_energy(p)?, None)
        } else {
            let rows = if let Some(p) = &a.agent {
                inputs.push(p.clone());
                agent_episode(p, a.transformer.as_ref(), &cfg, &mut inputs)?
            } else {
                let p = a.controls.as_ref().expect("one source is present");
                inputs.push(p.clone());
                let (controls, cond) = read_controls(p, false)?;
                let vehicle = cond.map_or_else(|| cfg.vehicle.clone(), |c| c.apply(&cfg.vehicle));
                pipeline::simulate(&mut TakeoffEnv::new(vehicle, cfg.env.clone(), ObsMode::Vanilla)?, &controls)?
            };
            if let Some(path) = &a.episode {
                write_atomic(path, episode_csv(&rows).as_bytes())?;
                outputs.push(path.clone());
            }
            (episode_energy(&rows), Some(episode_summary(&rows)))
        };
        json!({"accuracy": AccuracyReport::new(energy, e_ref)?, "episode": episode})
    } else if let (Some(t), Some(d)) = (&a.transformer, &a.data) {
        inputs.extend([t.clone(), d.clone()]);
        let model = Transformer::from_checkpoint(&load_checkpoint(t)?)?;
        let entries = read_dataset(d)?;
        let test = by_split(&entries, Split::Test);
        let mode = match a.generation_mode {
            Some(GenMode::Sample) => GenerationMode::Sample,
            _ => GenerationMode::Mean,
        };
        let checks = pipeline::generation_accuracy(&model, &test, &cfg.vehicle, &cfg.env, mode, cfg.seed)?;
        if checks.is_empty() {
            return Err(Failure::usage("dataset has no test entries"));
        }
        let mean = checks.iter().map(|c| c.ra).sum::<f64>() / checks.len() as f64;
        json!({"mean_ra": mean, "test": checks})
    } else {
        return Err(Failure::usage("evaluate needs --agent, --trajectory, --controls, or --transformer with --data"));
    };
    write_atomic(&a.out, to_json(&report)?.as_bytes())?;
    Ok(Outcome { code: 0, config: cfg, inputs, manifest_default: manifest_for(&a.out), outputs, summary: report })
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Episode CSV; repeat to overlay several runs.
    #[arg(long = "csv", required = true)]
    csvs: Vec<PathBuf>,
    /// Legend entry per CSV (default: file stem).
    #[arg(long = "label")]
    labels: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn export_plots(a: PlotArgs, cfg: RunConfig) -> Res<Outcome> {
    if !a.labels.is_empty() && a.labels.len() != a.csvs.len() {
        return Err(Failure::usage("give one --label per --csv or none"));
    }
    let mut runs = Vec::new();
    for (i, p) in a.csvs.iter().enumerate() {
        let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
        let label = a.labels.get(i).cloned().unwrap_or_else(|| {
            p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        });
        runs.push((label, Columns::parse(&text)?));
    }
    let (traj, speed) = takeoff_figures(&runs)?;
    let (tp, sp) = (a.out_dir.join("trajectory.svg"), a.out_dir.join("speed.svg"));
    write_atomic(&tp, traj.as_bytes())?;
    write_atomic(&sp, speed.as_bytes())?;
    Ok(Outcome {
        code: 0,
        config: cfg,
        manifest_default: a.out_dir.join("manifest.json"),
        inputs: a.csvs,
        outputs: vec![tp, sp],
        summary: json!({"runs": runs.len()}),
    })
}

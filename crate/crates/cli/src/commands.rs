//! Execution of the subcommands: each builds a fully resolved config
//! snapshot, derives its run directory from the snapshot's hash, runs the
//! pipeline stage, and writes every artifact under that directory.
//!
//! The snapshot (`config.json`) never contains the output base path, so
//! the same semantic config lands in the same-named run directory wherever
//! the base points, and identical runs overwrite themselves with identical
//! bytes. The first stdout line of every command is the run directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use rlp_core::error::{Error, Result};
use rlp_core::eval::{evaluate_placement, evaluate_placement_late, APResult};
use rlp_core::jsonio;
use rlp_core::lidar::{
    cast_cropped, cast_frame, write_cloud, write_cloud_csv, LidarSpec, RangeBox,
};
use rlp_core::optimizer::{
    default_score_frames, strategy_by_name, PerceptionScorer, SelectionContext, SelectionOutcome,
    Scorer,
};
use rlp_core::perception::{
    extract_features, load_model, predict_ability, sample_training_set, save_model,
    train_predictor, PredictorModel, ScorerMode, TrainConfig,
};
use rlp_core::scene::{generate_scene, load_scenario, save_scenario, MountId, SceneParams, Scenario};

use crate::report;
use crate::{
    AuditArgs, EvalArgs, GenSceneArgs, OptimizeArgs, ReportArgs, SimulateArgs, SpecArgs,
    TrainArgs, TrainKnobs,
};

impl SpecArgs {
    pub fn spec(&self) -> LidarSpec {
        LidarSpec {
            channels: self.channels,
            azimuth_step_deg: self.azimuth_step,
            ..LidarSpec::default()
        }
    }
}

impl TrainKnobs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma,
            threshold: self.threshold,
            lr: self.lr,
            epochs: self.epochs,
            seed,
        }
    }

    fn snapshot(&self) -> serde_json::Value {
        json!({
            "gamma": self.gamma,
            "threshold": self.threshold,
            "lr": self.lr,
            "epochs": self.epochs,
            "samples": self.samples,
        })
    }
}

/// Comma-separated frame indices; duplicates rejected, order kept.
pub fn parse_frames(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let v: usize = part
            .parse()
            .map_err(|_| Error::Param(format!("bad frame index '{part}'")))?;
        if out.contains(&v) {
            return Err(Error::Param(format!("frame index {v} listed twice")));
        }
        out.push(v);
    }
    Ok(out)
}

fn frames_or(opt: &Option<String>, default: impl FnOnce() -> Vec<usize>) -> Result<Vec<usize>> {
    match opt {
        Some(s) => parse_frames(s),
        None => Ok(default()),
    }
}

/// Creates `<out>/<command>-<hash12>/`, with `config.json` holding the
/// exact bytes the hash covers.
fn run_dir(out: &Path, command: &str, cfg: &serde_json::Value) -> Result<PathBuf> {
    let text = jsonio::canonical_string(cfg)?;
    let digest = Sha256::digest(text.as_bytes());
    let hash: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    let dir = out.join(format!("{command}-{hash}"));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.json"), text)?;
    Ok(dir)
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}

fn write_losses(losses: &[f64], path: &Path) -> Result<()> {
    let mut s = String::from("epoch,loss\n");
    for (e, l) in losses.iter().enumerate() {
        s.push_str(&format!("{e},{l}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Loads the model at `path` when given, otherwise trains one from the
/// scenario and writes `model.json` and `losses.csv` into the run dir.
fn obtain_model(
    scenario: &Scenario,
    spec: &LidarSpec,
    model_path: &Option<PathBuf>,
    knobs: &TrainKnobs,
    seed: u64,
    dir: &Path,
) -> Result<PredictorModel> {
    match model_path {
        Some(p) => load_model(p),
        None => {
            let samples = sample_training_set(scenario, spec, knobs.samples, seed)?;
            let out = train_predictor(&samples, &knobs.config(seed))?;
            save_model(&out.model, &dir.join("model.json"))?;
            write_losses(&out.losses, &dir.join("losses.csv"))?;
            Ok(out.model)
        }
    }
}

/// The pinned result file: these six fields and nothing else.
#[derive(Serialize)]
struct ResultFile<'a> {
    method: &'a str,
    placement: &'a [MountId],
    score: f64,
    scorer_mode: &'a str,
    frames_used: &'a [usize],
    seed: u64,
}

pub fn gen_scene(a: &GenSceneArgs) -> Result<()> {
    let params = SceneParams {
        n_mounts: a.mounts,
        n_vehicles: a.vehicles,
        n_frames: a.frames,
        n_occluders: a.occluders,
        half_extent: a.half_extent,
        cell_size: a.cell_size,
        mast_height: a.mast_height,
        frame_dt: a.frame_dt,
    };
    let cfg = json!({ "command": "gen-scene", "seed": a.seed, "params": params });
    let dir = run_dir(&a.out, "gen-scene", &cfg)?;
    let scenario = generate_scene(a.seed, &params)?;
    save_scenario(&scenario, &dir.join("scenario.json"))?;
    println!("{}", dir.display());
    println!(
        "mounts: {} frames: {} grid: {}x{}",
        scenario.mounts.len(),
        scenario.frames.len(),
        scenario.grid.height,
        scenario.grid.width
    );
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let spec = a.spec.spec();
    let frames = frames_or(&a.frames, || (0..scenario.frames.len()).collect())?;
    let cfg = json!({
        "command": "simulate",
        "scenario": a.scenario.display().to_string(),
        "frames": frames,
        "raw": a.raw,
        "csv": a.csv,
        "spec": spec,
    });
    let dir = run_dir(&a.out, "simulate", &cfg)?;
    let mut index = String::from("frame,mount,points\n");
    let mut total = 0usize;
    for &f in &frames {
        scenario.frame(f)?;
        for m in &scenario.mounts {
            let cloud = if a.raw {
                cast_frame(&scenario, f, m, &spec)?
            } else {
                cast_cropped(&scenario, f, m, &spec, &RangeBox::default())?
            };
            let stem = format!("cloud_f{f:02}_m{:02}", m.id);
            write_cloud(&cloud, &dir.join(format!("{stem}.rlpc")))?;
            if a.csv {
                write_cloud_csv(&cloud, &dir.join(format!("{stem}.csv")))?;
            }
            index.push_str(&format!("{f},{},{}\n", m.id, cloud.len()));
            total += cloud.len();
        }
    }
    std::fs::write(dir.join("clouds.csv"), index)?;
    println!("{}", dir.display());
    println!(
        "clouds: {} points: {total}",
        frames.len() * scenario.mounts.len()
    );
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let spec = a.spec.spec();
    let cfg = json!({
        "command": "train",
        "scenario": a.scenario.display().to_string(),
        "seed": a.seed,
        "train": a.knobs.snapshot(),
        "spec": spec,
    });
    let dir = run_dir(&a.out, "train", &cfg)?;
    let samples = sample_training_set(&scenario, &spec, a.knobs.samples, a.seed)?;
    let out = train_predictor(&samples, &a.knobs.config(a.seed))?;
    save_model(&out.model, &dir.join("model.json"))?;
    write_losses(&out.losses, &dir.join("losses.csv"))?;
    // First sample's supervision and the trained response to it, for eyes.
    let (cloud, conf) = &samples[0];
    conf.write_csv(&dir.join("confidence_sample0.csv"))?;
    conf.write_pgm(&dir.join("confidence_sample0.pgm"))?;
    let ability = predict_ability(&out.model, &extract_features(cloud, &scenario.grid)?);
    ability.write_csv(&dir.join("ability_sample0.csv"))?;
    ability.write_pgm(&dir.join("ability_sample0.pgm"))?;
    println!("{}", dir.display());
    println!(
        "loss: {} -> {} over {} epochs",
        out.losses.first().unwrap(),
        out.losses.last().unwrap(),
        a.knobs.epochs
    );
    Ok(())
}

pub fn optimize(a: &OptimizeArgs) -> Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let spec = a.spec.spec();
    let mode = ScorerMode::parse(&a.scorer)?;
    let strategy = strategy_by_name(&a.method)?;
    let frames = frames_or(&a.frames, || default_score_frames(scenario.frames.len()))?;
    let cfg = json!({
        "command": "optimize",
        "scenario": a.scenario.display().to_string(),
        "seed": a.seed,
        "m": a.m,
        "method": a.method,
        "scorer": mode.name(),
        "frames": frames,
        "model": a.model.as_ref().map(|p| p.display().to_string()),
        "train": a.knobs.snapshot(),
        "spec": spec,
    });
    let dir = run_dir(&a.out, "optimize", &cfg)?;
    let model = obtain_model(&scenario, &spec, &a.model, &a.knobs, a.seed, &dir)?;
    let scorer = PerceptionScorer::new(&scenario, &model, mode, &spec, Some(&frames))?;
    let mut candidates = scenario.mount_ids();
    candidates.sort_unstable();
    let outcome = strategy.select(&SelectionContext {
        scenario: &scenario,
        scorer: &scorer,
        candidates: &candidates,
        m: a.m,
        seed: a.seed,
        spec: &spec,
    })?;
    outcome.trace.write_csv(&dir.join("trace.csv"))?;
    jsonio::write_canonical(
        &ResultFile {
            method: strategy.name(),
            placement: &outcome.placement,
            score: outcome.score,
            scorer_mode: mode.name(),
            frames_used: &frames,
            seed: a.seed,
        },
        &dir.join("result.json"),
    )?;
    let ability = rlp_core::perception::ability_for_placement(
        &scenario,
        frames[0],
        &outcome.placement,
        &model,
        mode,
        &spec,
    )?;
    ability.write_csv(&dir.join("ability_selected.csv"))?;
    ability.write_pgm(&dir.join("ability_selected.pgm"))?;
    println!("{}", dir.display());
    println!(
        "placement: {} score: {} evaluations: {}",
        join(&outcome.placement, ","),
        outcome.score,
        outcome.evaluations
    );
    Ok(())
}

fn select_placement(
    scenario: &Scenario,
    scorer: &dyn Scorer,
    method: &str,
    m: usize,
    seed: u64,
    spec: &LidarSpec,
) -> Result<SelectionOutcome> {
    let mut candidates = scenario.mount_ids();
    candidates.sort_unstable();
    strategy_by_name(method)?.select(&SelectionContext {
        scenario,
        scorer,
        candidates: &candidates,
        m,
        seed,
        spec,
    })
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let spec = a.spec.spec();
    let mode = ScorerMode::parse(&a.scorer)?;
    let methods: Vec<String> = a.methods.split(',').map(str::to_string).collect();
    for m in &methods {
        strategy_by_name(m)?;
    }
    if a.random_runs == 0 {
        return Err(Error::Param("random-runs must be at least 1".into()));
    }
    let eval_frames = frames_or(&a.frames, || (0..scenario.frames.len()).collect())?;
    let scorer_frames = default_score_frames(scenario.frames.len());
    let cfg = json!({
        "command": "eval",
        "scenario": a.scenario.display().to_string(),
        "seed": a.seed,
        "m": a.m,
        "methods": methods,
        "scorer": mode.name(),
        "frames": eval_frames,
        "scorer_frames": scorer_frames,
        "random_runs": a.random_runs,
        "fusion": if a.late { "late" } else { "early" },
        "model": a.model.as_ref().map(|p| p.display().to_string()),
        "train": a.knobs.snapshot(),
        "spec": spec,
    });
    let dir = run_dir(&a.out, "eval", &cfg)?;
    let model = obtain_model(&scenario, &spec, &a.model, &a.knobs, a.seed, &dir)?;
    let scorer = PerceptionScorer::new(&scenario, &model, mode, &spec, Some(&scorer_frames))?;
    let frames_label = join(&eval_frames, ";");
    let evaluate = |placement: &[MountId]| -> Result<APResult> {
        if a.late {
            evaluate_placement_late(&scenario, placement, &eval_frames, &spec)
        } else {
            evaluate_placement(&scenario, placement, &eval_frames, &spec)
        }
    };

    let mut rows: Vec<report::EvalRow> = Vec::new();
    let mut placements = Vec::new();
    for &m in &a.m {
        for method in &methods {
            let seeds: Vec<u64> = if method == "random" {
                (0..a.random_runs).map(|r| a.seed + r).collect()
            } else {
                vec![a.seed]
            };
            for seed in seeds {
                let started = Instant::now();
                let outcome = match select_placement(&scenario, &scorer, method, m, seed, &spec) {
                    Ok(o) => o,
                    Err(Error::Budget(msg)) if method == "brute" => {
                        println!("brute skipped at m={m}: {msg}");
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let ap = evaluate(&outcome.placement)?;
                rows.push(report::EvalRow {
                    method: method.clone(),
                    m,
                    seed,
                    ap: [ap.ap_03, ap.ap_05, ap.ap_07],
                    frames: frames_label.clone(),
                    runtime_ms: started.elapsed().as_millis() as u64,
                });
                placements.push(json!({
                    "method": method,
                    "m": m,
                    "seed": seed,
                    "placement": outcome.placement,
                    "selection_score": outcome.score,
                    "evaluations": outcome.evaluations,
                }));
            }
        }
    }
    let mut csv = String::from(report::EVAL_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv_line());
        csv.push('\n');
    }
    std::fs::write(dir.join("evaluation.csv"), csv)?;
    jsonio::write_canonical(&serde_json::Value::Array(placements), &dir.join("placements.json"))?;
    println!("{}", dir.display());
    println!("rows: {}", rows.len());
    Ok(())
}

pub fn audit(a: &AuditArgs) -> Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let spec = a.spec.spec();
    let mode = ScorerMode::parse(&a.scorer)?;
    let frames = frames_or(&a.frames, || default_score_frames(scenario.frames.len()))?;
    let cfg = json!({
        "command": "audit",
        "scenario": a.scenario.display().to_string(),
        "seed": a.seed,
        "scorer": mode.name(),
        "frames": frames,
        "checks": a.checks,
        "model": a.model.as_ref().map(|p| p.display().to_string()),
        "train": a.knobs.snapshot(),
        "spec": spec,
    });
    let dir = run_dir(&a.out, "audit", &cfg)?;
    let model = obtain_model(&scenario, &spec, &a.model, &a.knobs, a.seed, &dir)?;
    let scorer = PerceptionScorer::new(&scenario, &model, mode, &spec, Some(&frames))?;
    let mut candidates = scenario.mount_ids();
    candidates.sort_unstable();
    let report = rlp_core::optimizer::submodularity_audit(&scorer, &candidates, a.checks, a.seed)?;
    jsonio::write_canonical(
        &json!({
            "report": report,
            "scorer_mode": mode.name(),
            "frames_used": frames,
            "seed": a.seed,
        }),
        &dir.join("audit.json"),
    )?;
    println!("{}", dir.display());
    println!(
        "violations: {}/{} monotonicity: {} max: {}",
        report.violations, report.checks, report.monotonicity_violations, report.max_violation
    );
    Ok(())
}

pub fn emit_report(a: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.results)?;
    let rows = report::parse_rows(&text)?;
    let aggs = report::aggregate(&rows)?;
    let cfg = json!({
        "command": "report",
        "results": a.results.display().to_string(),
    });
    let dir = run_dir(&a.out, "report", &cfg)?;
    std::fs::write(dir.join("report.md"), report::render_markdown(&aggs))?;
    std::fs::write(dir.join("report.csv"), report::render_csv(&aggs))?;
    println!("{}", dir.display());
    println!("groups: {}", aggs.len());
    Ok(())
}

use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tensopt_core::dsl::{parse_kernel, KernelProgram};
use tensopt_core::sim::{compute_feedback, SimError, Simulator};
use tensopt_core::verify::{check_simulator, simulator_for, trial_rng, Phase};
use tensopt_search::search::{run_reuse_search, run_search};
use tensopt_search::trace::read_jsonl;
use tensopt_search::{iso_budget, write_jsonl, BeamParams, Evaluator, Report, Schedule, SearchError, SearchResult};

use crate::config::RunConfig;
use crate::{exit, Failure};

pub type Outcome = Result<i32, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write_err(e: std::io::Error) -> Failure {
    Failure::new(exit::INVALID, format!("write failed: {e}"))
}

fn parse(path: &Path) -> Result<KernelProgram, Failure> {
    let src = read(path)?;
    parse_kernel(&src).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}: {d}", path.display())).collect();
        Failure::usage(lines.join("\n"))
    })
}

fn sim_failure(e: SimError) -> Failure {
    let code = match e {
        SimError::Invalid(_) | SimError::Input(_) => exit::INVALID,
        SimError::Exec { .. } | SimError::Runaway { .. } => exit::SIMULATION,
    };
    Failure::new(code, e.to_string())
}

fn build(kernel: &Path, cfg: &RunConfig) -> Result<Simulator, Failure> {
    let p = parse(kernel)?;
    simulator_for(&p, &cfg.workload()?.spec, &cfg.accelerator, cfg.search.check.max_nodes).map_err(sim_failure)
}

fn json_line(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Runs a kernel once on inputs drawn from `seed`. Timed runs print the
/// feedback line and the performance report; functional runs print counters.
pub fn simulate(kernel: &Path, config: &Path, timed: bool, seed: u64, out: &mut dyn Write) -> Outcome {
    let cfg = RunConfig::load(config)?;
    let sim = build(kernel, &cfg)?;
    let inputs = cfg.workload()?.spec.random_inputs(&mut trial_rng(seed, 0));
    let text = if timed {
        let r = sim.run_timed(&inputs).map_err(sim_failure)?;
        format!("{}\n{}", compute_feedback(&r.perf, &cfg.accelerator), json_line(&r.perf))
    } else {
        let r = sim.run(&inputs).map_err(sim_failure)?;
        format!("Functional run; latency not simulated.\n{}", json_line(&r.stats))
    };
    out.write_all(text.as_bytes()).map_err(write_err)?;
    Ok(exit::OK)
}

/// Checks a kernel against the workload's oracle. `trials` overrides the
/// configured (functional, timed) trial counts.
pub fn verify(kernel: &Path, config: &Path, trials: Option<(usize, usize)>, seed: Option<u64>, out: &mut dyn Write) -> Outcome {
    let cfg = RunConfig::load(config)?;
    let sim = build(kernel, &cfg)?;
    let mut opts = cfg.search.check;
    if let Some((f, t)) = trials {
        opts.n_functional = f;
        opts.n_timed = t;
    }
    opts.base_seed = seed.unwrap_or(opts.base_seed);
    let v = check_simulator(&sim, &cfg.workload()?.spec, &opts);
    out.write_all(json_line(&v).as_bytes()).map_err(write_err)?;
    Ok(match &v.first_mismatch {
        None => exit::OK,
        Some(m) if m.phase == Phase::Setup => exit::INVALID,
        Some(_) => exit::INCORRECT,
    })
}

fn search_failure(e: SearchError) -> Failure {
    let code = match e {
        SearchError::StartIncorrect(_) => exit::START_FAILED,
        SearchError::StartUnparsable(_) | SearchError::NoBackends | SearchError::Config(_) => exit::INVALID,
    };
    Failure::new(code, e.to_string())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

/// Writes trace.jsonl, schedule.json, report.json and best.gk.
fn write_outputs(dir: &Path, r: &SearchResult, report: &Report) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let mut trace = Vec::new();
    write_jsonl(&r.trace, &mut trace).map_err(write_err)?;
    write_file(&dir.join("trace.jsonl"), &trace)?;
    write_file(&dir.join("schedule.json"), r.schedule.to_json().as_bytes())?;
    write_file(&dir.join("report.json"), json_line(report).as_bytes())?;
    write_file(&dir.join("best.gk"), r.best.code.as_bytes())
}

fn finish(r: &SearchResult, dir: &Path, phases: &[&str], out: &mut dyn Write) -> Outcome {
    let mut report = Report::from_trace(&r.trace).map_err(|e| Failure::new(exit::INVALID, e.to_string()))?;
    for p in phases {
        report.calls_by_phase.entry(p.to_string()).or_insert(0);
    }
    write_outputs(dir, r, &report)?;
    let mut msg = String::new();
    for w in &r.warnings {
        msg.push_str(&format!("warning: {w}\n"));
    }
    msg.push_str(&format!(
        "speedup {:.3}x: {} -> {} cycles in {} steps, {} LLM calls\n",
        r.speedup(),
        r.root.latency(),
        r.best.latency(),
        r.schedule.steps.len(),
        r.total_calls()
    ));
    out.write_all(msg.as_bytes()).map_err(write_err)?;
    Ok(exit::OK)
}

pub struct SearchArgs<'a> {
    pub config: &'a Path,
    pub out_dir: Option<PathBuf>,
    pub jobs: usize,
}

struct Prepared {
    cfg: RunConfig,
    start: String,
    evaluator: Evaluator,
    backends: Vec<std::sync::Arc<dyn tensopt_search::llm::Backend>>,
    dir: PathBuf,
}

fn prepare(a: &SearchArgs<'_>) -> Result<Prepared, Failure> {
    let cfg = RunConfig::load(a.config)?;
    let start = cfg.start_code()?;
    let evaluator = Evaluator::new(cfg.workload()?.spec.clone(), cfg.accelerator.clone(), cfg.search.check);
    let backends = cfg.backends(a.jobs)?;
    let dir = a.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok(Prepared { cfg, start, evaluator, backends, dir })
}

/// Full beam search from the configured start kernel.
pub fn optimize(a: &SearchArgs<'_>, out: &mut dyn Write) -> Outcome {
    let p = prepare(a)?;
    let r = run_search(&p.start, &p.cfg.search, &p.backends, &p.evaluator).map_err(search_failure)?;
    finish(&r, &p.dir, &["search"], out)
}

/// Replays `schedule` at `params`, then refines for `refine` iterations.
pub fn reuse(a: &SearchArgs<'_>, schedule: &Path, refine: usize, params: BeamParams, out: &mut dyn Write) -> Outcome {
    let recorded = Schedule::from_json(&read(schedule)?).map_err(|e| Failure::usage(format!("{}: {e}", schedule.display())))?;
    let p = prepare(a)?;
    let r = run_reuse_search(&p.start, &recorded, params, refine, &p.cfg.search, &p.backends, &p.evaluator).map_err(search_failure)?;
    finish(&r, &p.dir, &["reuse", "refine"], out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

fn load_report(trace: &Path) -> Result<Report, Failure> {
    let f = std::fs::File::open(trace).map_err(|e| Failure::io(trace, e))?;
    let events = read_jsonl(BufReader::new(f)).map_err(|e| Failure::usage(format!("{}: {e}", trace.display())))?;
    Report::from_trace(&events).map_err(|e| Failure::usage(format!("{}: {e}", trace.display())))
}

const CSV_HEADER: [&str; 12] = [
    "iteration",
    "phase",
    "plan_calls",
    "code_calls",
    "failed_calls",
    "cumulative_calls",
    "prompt_tokens",
    "completion_tokens",
    "evaluated",
    "correct",
    "best_latency",
    "speedup",
];

fn csv_failure(e: csv::Error) -> Failure {
    Failure::new(exit::INVALID, format!("csv: {e}"))
}

/// One row per search iteration; the start kernel's row is left out.
fn report_csv(r: &Report) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_failure)?;
    for (s, p) in r.iterations.iter().zip(&r.curve).filter(|(s, _)| s.phase != "start") {
        w.write_record([
            s.iteration.to_string(),
            s.phase.clone(),
            s.plan_calls.to_string(),
            s.code_calls.to_string(),
            s.failed_calls.to_string(),
            s.cumulative_calls.to_string(),
            s.prompt_tokens.to_string(),
            s.completion_tokens.to_string(),
            s.evaluated.to_string(),
            s.correct.to_string(),
            s.best_latency.to_string(),
            format!("{:.6}", p.speedup),
        ])
        .map_err(csv_failure)?;
    }
    w.into_inner().map_err(|e| Failure::new(exit::INVALID, e.to_string()))
}

/// Renders the report of one trace, or with `iso` the best latency of two
/// runs at matched call budgets.
pub fn report(trace: &Path, format: Format, iso: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let r = load_report(trace)?;
    let bytes = match (iso, format) {
        (None, Format::Json) => json_line(&r).into_bytes(),
        (None, Format::Csv) => report_csv(&r)?,
        (Some(other), fmt) => {
            let o = load_report(other)?;
            let points = iso_budget(&r, &o);
            match fmt {
                Format::Json => json_line(&BTreeMap::from([("points", &points)])).into_bytes(),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["calls", "full", "reuse"]).map_err(csv_failure)?;
                    for p in &points {
                        w.write_record([p.calls.to_string(), p.full.to_string(), p.reuse.to_string()]).map_err(csv_failure)?;
                    }
                    w.into_inner().map_err(|e| Failure::new(exit::INVALID, e.to_string()))?
                }
            }
        }
    };
    out.write_all(&bytes).map_err(write_err)?;
    Ok(exit::OK)
}

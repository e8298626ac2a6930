//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line to
//! stderr (uncaptured) and the test fails if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensopt_cli::RunConfig;
use tensopt_core::dsl::{has_errors, parse_kernel, validate_kernel_with, KernelProgram};
use tensopt_core::sim::{check_trace, AcceleratorConfig, SimOptions, Simulator};
use tensopt_core::verify::{
    check_equivalence, gemm_kernel, reference_gemm, simulator_for, trial_rng, CheckOptions, Tolerance, WorkloadSpec,
};
use tensopt_search::llm::{ensemble_assign, Backend, LibraryBackend, ScriptManifest, Transition};
use tensopt_search::prompts::{sample_menu, MenuConfig};
use tensopt_search::search::{run_reuse_search, run_search, Search};
use tensopt_search::trace::{EventKind, TraceEvent};
use tensopt_search::{iso_budget, BeamParams, Evaluator, Report, SearchConfig, SearchResult};

const GEMM_UNOPT: &str = include_str!("../../core/assets/gemm_12544x64x256_unopt.gk");
const GEMM_EXO: &str = include_str!("../../core/assets/gemm_12544x64x256_exo_opt.gk");
const GEMM_AUTOCOMP: &str = include_str!("../../core/assets/gemm_12544x64x256_autocomp.gk");
const MPC_UNOPT: &str = include_str!("../../core/assets/tinympc_fwd_unopt.gk");
const MPC_HWFSM: &str = include_str!("../../core/assets/tinympc_fwd_hwfsm_ref.gk");
const MPC_AUTOCOMP: &str = include_str!("../../core/assets/tinympc_fwd_autocomp.gk");
const CONV: &str = include_str!("../../core/assets/conv_1x7x7x16x16_k3.gk");

// Pinned thresholds.
const ORACLE_BUDGET: Duration = Duration::from_secs(120);
const SEARCH_BUDGET: Duration = Duration::from_secs(300);
// Measured 3.285x; 10% slack gives 2.96, and the floor stays at 3.0.
const MIN_SPEEDUP: f64 = 3.0;
const RETENTION: (f64, f64) = (0.28, 0.32);
const REUSE_CALL_CAP: u64 = 108;
// The fused TinyMPC listing reorders f32 sums; see its dedicated check.
const FUSED_FLOAT: Tolerance = Tolerance { relative: 1e-4, absolute: 1e-4 };

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parse(src: &str) -> Result<KernelProgram, String> {
    parse_kernel(src).map_err(|d| format!("{d:?}"))
}

/// Shared state: the 512^3 evaluator and scripted run feed criteria 3 and 7.
struct Bench {
    cfg: RunConfig,
    evaluator: Evaluator,
    start: String,
    run: Option<SearchResult>,
}

impl Bench {
    fn load() -> Bench {
        let cfg = RunConfig::load(&benchmark_dir().join("config.toml")).unwrap();
        let evaluator = Evaluator::new(cfg.workload().unwrap().spec.clone(), cfg.accelerator.clone(), cfg.search.check);
        let start = cfg.start_code().unwrap();
        Bench { cfg, evaluator, start, run: None }
    }
}

fn oracle_equivalence() -> Outcome {
    let clock = Instant::now();
    let cfg = AcceleratorConfig::int8_16x16();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let dims = [16, 32, 48, 64];
    for t in 0..100 {
        let (m, k, n) = (dims[rng.gen_range(0..4)], dims[rng.gen_range(0..4)], dims[rng.gen_range(0..4)]);
        let p = parse(&gemm_kernel(m, k, n, &cfg).map_err(|e| e.to_string())?)?;
        let spec = WorkloadSpec::gemm(m, k, n);
        let sim = simulator_for(&p, &spec, &cfg, 1 << 30).map_err(|e| e.to_string())?;
        let inputs = spec.random_inputs(&mut trial_rng(t, 0));
        let out = sim.run(&inputs).map_err(|e| e.to_string())?;
        let want = reference_gemm(&inputs["A"], &inputs["B"], None).map_err(|e| e.to_string())?;
        ensure(out.outputs["C"] == want, || format!("gemm {m}x{k}x{n} (trial {t}) differs from the oracle"))?;
    }
    let opts = CheckOptions { n_functional: 50, n_timed: 0, base_seed: 202, ..CheckOptions::default() };
    let v = check_equivalence(&parse(MPC_UNOPT)?, &WorkloadSpec::tinympc(5), &AcceleratorConfig::fp32_4x4(), &opts);
    ensure(v.correct && v.functional_trials == 50, || format!("tinympc: {:?}", v.first_mismatch))?;
    let took = clock.elapsed();
    ensure(took < ORACLE_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("100 int8 GEMMs exact, 50 TinyMPC runs within rel 1e-5, {:.1}s", took.as_secs_f64()))
}

fn corpus_parity() -> Outcome {
    let int8 = AcceleratorConfig::int8_16x16();
    let fp = AcceleratorConfig::fp32_4x4();
    let gemm = WorkloadSpec::gemm(12544, 256, 64);
    let mpc = WorkloadSpec::tinympc(5);
    let conv: WorkloadSpec =
        serde_json::from_str(r#"{"kind":"conv","batch":1,"in_ch":16,"out_ch":16,"spatial":7,"kernel":3,"stride":1,"padding":1}"#).unwrap();
    let latency =
        |src: &str, spec: &WorkloadSpec, cfg: &AcceleratorConfig, tol: Tolerance, trials: (usize, usize)| -> Result<u64, String> {
            let p = parse(src)?;
            let diags = validate_kernel_with(&p, cfg, &spec.bindings());
            ensure(!has_errors(&diags), || format!("validation: {diags:?}"))?;
            let opts = CheckOptions { n_functional: trials.0, n_timed: trials.1, base_seed: 7, tolerance: tol, ..CheckOptions::default() };
            let v = check_equivalence(&p, spec, cfg, &opts);
            v.latency_cycles.filter(|_| v.correct).ok_or_else(|| format!("incorrect: {:?}", v.first_mismatch))
        };
    let unopt = latency(GEMM_UNOPT, &gemm, &int8, Tolerance::default(), (1, 1))?;
    let exo = latency(GEMM_EXO, &gemm, &int8, Tolerance::default(), (1, 1))?;
    let auto = latency(GEMM_AUTOCOMP, &gemm, &int8, Tolerance::default(), (1, 1))?;
    latency(MPC_UNOPT, &mpc, &fp, Tolerance::default(), (5, 1))?;
    latency(MPC_AUTOCOMP, &mpc, &fp, FUSED_FLOAT, (5, 1))?;
    latency(CONV, &conv, &int8, Tolerance::default(), (3, 1))?;
    let fsm = parse(MPC_HWFSM)?;
    ensure(has_errors(&validate_kernel_with(&fsm, &fp, &mpc.bindings())), || "FSM reference unexpectedly validates".into())?;
    ensure(auto < unopt, || format!("autocomp {auto} is not below exo-unoptimized {unopt}"))?;
    ensure(exo < unopt, || format!("exo-optimized {exo} is not below exo-unoptimized {unopt}"))?;
    let place = if exo < auto { "below autocomp" } else { "between" };
    Ok(format!(
        "6 executable assets verify (fused TinyMPC at rel 1e-4), FSM reference parse-only; gemm cycles unopt {unopt}, exo {exo} ({place}), autocomp {auto}"
    ))
}

fn scripted_search(bench: &mut Bench) -> Outcome {
    let clock = Instant::now();
    let backends = bench.cfg.backends(1).map_err(|e| e.to_string())?;
    let r = run_search(&bench.start, &bench.cfg.search, &backends, &bench.evaluator).map_err(|e| e.to_string())?;
    let took = clock.elapsed();
    let steps = &r.schedule.steps;
    ensure(steps.len() == 9, || format!("{} steps", steps.len()))?;
    r.schedule.validate()?;
    ensure(steps[0].latency_before == r.root.latency(), || "schedule does not start at the root".into())?;
    let speedup = r.speedup();
    ensure(speedup >= MIN_SPEEDUP, || format!("speedup {speedup:.3}"))?;
    ensure(took < SEARCH_BUDGET, || format!("took {took:?}"))?;
    let msg = format!(
        "9 strictly decreasing steps, {} -> {} cycles, speedup {speedup:.3}x (>= {MIN_SPEEDUP}), {:.1}s",
        r.root.latency(),
        r.best.latency(),
        took.as_secs_f64()
    );
    bench.run = Some(r);
    Ok(msg)
}

/// Checks one trace against the beam invariants.
fn check_invariants(trace: &[TraceEvent], p: BeamParams, iterations: usize) -> Result<(), String> {
    let mut verdicts: HashMap<&str, (bool, u64, Option<&str>)> = HashMap::new();
    let mut plans: BTreeMap<usize, u64> = BTreeMap::new();
    let mut codes: BTreeMap<usize, u64> = BTreeMap::new();
    let mut bests = Vec::new();
    for e in trace {
        match e.kind {
            EventKind::Verdict => {
                if let (Some(id), Some(true)) = (&e.ids.candidate, e.payload["accepted"].as_bool()) {
                    let correct = e.payload["correct"].as_bool() == Some(true);
                    let latency = e.payload["latency"].as_u64().unwrap_or(u64::MAX);
                    verdicts.insert(id, (correct, latency, e.payload["parent"].as_str()));
                }
            }
            EventKind::PlanRequest => *plans.entry(e.iteration).or_default() += 1,
            EventKind::CodeRequest => *codes.entry(e.iteration).or_default() += 1,
            EventKind::Beam => {
                let members = e.payload["members"].as_array().ok_or("beam event without members")?;
                ensure(members.len() <= p.beam_width.max(1), || format!("iteration {}: {} members", e.iteration, members.len()))?;
                for m in members {
                    let id = m["id"].as_str().ok_or("member without id")?;
                    let (correct, _, _) = verdicts.get(id).ok_or_else(|| format!("member {id} has no accepted verdict"))?;
                    ensure(*correct, || format!("member {id} is incorrect"))?;
                }
                bests.push(e.payload["best"]["latency"].as_u64().ok_or("beam event without best")?);
            }
            _ => {}
        }
    }
    for (id, (_, latency, parent)) in &verdicts {
        if let Some(parent) = parent {
            let (_, pl, _) = verdicts.get(parent).ok_or_else(|| format!("{id}: unknown parent {parent}"))?;
            ensure(latency < pl, || format!("{id} ({latency}) is not faster than {parent} ({pl})"))?;
        }
    }
    ensure(bests.windows(2).all(|w| w[1] <= w[0]), || format!("best regressed: {bests:?}"))?;
    let (bn, bnk) = ((p.beam_width * p.plans_per_element) as u64, (p.beam_width * p.plans_per_element * p.codes_per_plan) as u64);
    ensure(plans.values().all(|&c| c <= bn) && codes.values().all(|&c| c <= bnk), || "per-iteration call cap exceeded".into())?;
    let t = iterations as u64;
    ensure(plans.values().sum::<u64>() <= t * bn, || "total plan calls exceed T*B*N".into())?;
    ensure(codes.values().sum::<u64>() <= t * bnk, || "total code calls exceed T*B*N*K".into())
}

fn beam_invariants() -> Outcome {
    let ev = Evaluator::new(WorkloadSpec::gemm(64, 64, 64), AcceleratorConfig::int8_16x16(), quick_check());
    let all = transitions();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut improved = 0;
    for run in 0..1000 {
        let subset: Vec<Transition> = all.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
        let n_models = rng.gen_range(1..=2);
        let backends: Vec<Arc<dyn Backend>> = (0..n_models)
            .map(|m| Arc::new(LibraryBackend::new(format!("m{m}"), rng.gen(), subset.clone()).unwrap()) as Arc<dyn Backend>)
            .collect();
        let sc = SearchConfig {
            beam_width: rng.gen_range(1..=3),
            plans_per_element: rng.gen_range(1..=3),
            codes_per_plan: rng.gen_range(1..=2),
            iterations: rng.gen_range(1..=4),
            seed: rng.gen(),
            check: quick_check(),
            ..SearchConfig::default()
        };
        let r = run_search(CONFIG_IN_LOOP, &sc, &backends, &ev).map_err(|e| format!("run {run}: {e}"))?;
        check_invariants(&r.trace, sc.params(), sc.iterations).map_err(|e| format!("run {run}: {e}"))?;
        improved += usize::from(r.best.latency() < r.root.latency());
    }
    Ok(format!("1000 randomized searches, {improved} improved on the start, all invariants hold"))
}

fn quick_check() -> CheckOptions {
    CheckOptions { n_functional: 2, n_timed: 1, ..CheckOptions::default() }
}

fn dropout() -> Outcome {
    let menu = MenuConfig::gemm();
    let droppable: Vec<usize> = (0..menu.options.len()).filter(|&i| !menu.always_keep.contains(&menu.options[i])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let renders = 10_000;
    let mut kept = vec![0usize; menu.options.len()];
    for _ in 0..renders {
        for i in sample_menu(&menu, 0.7, &mut rng) {
            kept[i] += 1;
        }
    }
    let rates: Vec<f64> = droppable.iter().map(|&i| kept[i] as f64 / renders as f64).collect();
    let (lo, hi) = rates.iter().fold((1.0f64, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    ensure(lo >= RETENTION.0 && hi <= RETENTION.1, || format!("retention range [{lo:.4}, {hi:.4}]"))?;
    for _ in 0..1000 {
        ensure(sample_menu(&menu, 0.0, &mut rng).len() == menu.options.len(), || "p=0 dropped an option".into())?;
        let one = sample_menu(&menu, 1.0, &mut rng);
        let kept_droppable = one.iter().filter(|i| droppable.contains(i)).count();
        ensure(kept_droppable == 1 && one.len() == 1 + menu.always_keep.len(), || format!("p=1 kept {one:?}"))?;
    }
    Ok(format!("p=0.7 retention in [{lo:.4}, {hi:.4}] over {renders} renders; p=0 keeps all, p=1 keeps exactly one droppable"))
}

fn ensemble_split() -> Outcome {
    for n in 1..=100 {
        for k in 1..=5 {
            let mut counts = vec![0usize; k];
            for m in ensemble_assign(n, &vec![(); k]) {
                counts[m] += 1;
            }
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            ensure(hi - lo <= 1 && counts.iter().sum::<usize>() == n, || format!("n={n} k={k}: {counts:?}"))?;
        }
    }
    Ok("500 (n, k) pairs, counts differ by at most 1".into())
}

/// A backend that knows exactly the benchmark's nine rewrites.
fn chain_library(dir: &std::path::Path, start: &str, seed: u64) -> Result<Arc<dyn Backend>, String> {
    let m = ScriptManifest::load(&dir.join("manifest.json")).map_err(|e| e.to_string())?;
    let mut from = start.to_string();
    let mut ts = Vec::new();
    for pair in m.entries.chunks(2) {
        let plan = pair[0].response.clone().unwrap_or_default();
        let (head, body) = plan.split_once('\n').ok_or("plan without body")?;
        let option = head.trim_start_matches("OPTIMIZATION:").trim();
        let to = pair[1].response.clone().unwrap_or_default();
        ts.push(Transition { from: from.clone(), option: option.into(), plan: body.into(), to: to.clone() });
        from = to;
    }
    Ok(Arc::new(LibraryBackend::new("chain", seed, ts)?))
}

fn reuse_accounting(bench: &Bench) -> Outcome {
    let full_iteration = BeamParams { beam_width: 6, plans_per_element: 6, codes_per_plan: 2 };

    // One real full-search iteration over a full six-member beam.
    let ev64 = Evaluator::new(WorkloadSpec::gemm(64, 64, 64), AcceleratorConfig::int8_16x16(), quick_check());
    let sc64 = SearchConfig { check: quick_check(), ..SearchConfig::default() };
    let lib: Vec<Arc<dyn Backend>> = vec![Arc::new(LibraryBackend::new("lib", 0, transitions()).unwrap())];
    let mut s = Search::new(&sc64, &lib, &ev64).map_err(|e| e.to_string())?;
    let template = gemm_kernel(64, 64, 64, ev64.config()).map_err(|e| e.to_string())?;
    let mut members = Vec::new();
    for src in [CONFIG_IN_LOOP, SERIAL, SERIAL_UNROLLED, DOUBLE_BUFFERED, PIPELINED, template.as_str()] {
        members.extend(s.start(src).map_err(|e| e.to_string())?.members);
    }
    members.sort_by_key(|c| (c.latency(), c.discovery_index));
    let beam = tensopt_search::search::BeamState { iteration: 0, best_overall: members[0].clone(), members };
    let after = s.run_iteration(&beam, full_iteration, "search", None);
    let one = s.finish(after);
    let last = one.iterations.last().unwrap();
    let full_calls = last.plan_calls + last.code_calls;
    ensure(full_calls == full_iteration.max_calls_per_iteration() as u64 && full_calls == 108, || {
        format!("full iteration made {full_calls} calls")
    })?;

    // Replay of the nine-step schedule, then the iso-budget comparison.
    let recorded = &bench.run.as_ref().ok_or("criterion 3 did not produce a schedule")?.schedule;
    let dir = benchmark_dir();
    let replay = [chain_library(&dir, &bench.start, 1)?];
    let r = run_reuse_search(&bench.start, recorded, BeamParams::REUSE, 0, &bench.cfg.search, &replay, &bench.evaluator)
        .map_err(|e| e.to_string())?;
    let reuse_calls = r.calls_in_phase("reuse");
    ensure(reuse_calls <= REUSE_CALL_CAP && r.calls_in_phase("refine") == 0, || format!("reuse made {reuse_calls} calls"))?;
    ensure(r.best.latency() == recorded.steps.last().unwrap().latency_after, || "replay did not reach the recorded result".into())?;

    let full_sc =
        SearchConfig { beam_width: 6, plans_per_element: 6, codes_per_plan: 2, iterations: 12, seed: 9, ..bench.cfg.search.clone() };
    let searcher = [chain_library(&dir, &bench.start, 2)?];
    let full = run_search(&bench.start, &full_sc, &searcher, &bench.evaluator).map_err(|e| e.to_string())?;
    let (fr, rr) = (Report::from_trace(&full.trace).map_err(|e| e.to_string())?, Report::from_trace(&r.trace).map_err(|e| e.to_string())?);
    let points = iso_budget(&fr, &rr);
    ensure(!points.is_empty(), || "no matched budgets".into())?;
    let behind: Vec<_> = points.iter().filter(|p| p.reuse > p.full).collect();
    ensure(behind.is_empty(), || format!("reuse behind at {behind:?}"))?;
    let root = r.root.latency() as f64;
    let mid = &points[points.len() / 2];
    Ok(format!(
        "reuse {reuse_calls} calls (<= {REUSE_CALL_CAP}) vs {full_calls} for one full B6 N6 K2 iteration; reuse >= full at all {} matched budgets (at {} calls: {:.2}x vs {:.2}x)",
        points.len(),
        mid.calls,
        root / mid.reuse as f64,
        root / mid.full as f64
    ))
}

fn timing_directionality() -> Outcome {
    let cfg = AcceleratorConfig::int8_16x16();
    let spec = WorkloadSpec::gemm(64, 64, 64);
    let latency = |src: &str| -> Result<u64, String> {
        let v = check_equivalence(&parse(src)?, &spec, &cfg, &CheckOptions::default());
        v.latency_cycles.filter(|_| v.correct).ok_or_else(|| format!("{:?}", v.first_mismatch))
    };
    let (config_in_loop, serial, db, piped) = (latency(CONFIG_IN_LOOP)?, latency(SERIAL)?, latency(DOUBLE_BUFFERED)?, latency(PIPELINED)?);
    ensure(serial < config_in_loop, || format!("hoisting: {config_in_loop} -> {serial}"))?;
    ensure(db < serial, || format!("double buffering: {serial} -> {db}"))?;
    ensure(piped < serial, || format!("pipelining: {serial} -> {piped}"))?;

    let cases = [CONFIG_IN_LOOP, SERIAL, SERIAL_UNROLLED, DOUBLE_BUFFERED, PIPELINED];
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let dims = [16, 32, 48, 64];
    for run in 0..1000u64 {
        let (src, spec) = if rng.gen_bool(0.3) {
            let (m, k, n) = (dims[rng.gen_range(0..4)], dims[rng.gen_range(0..4)], dims[rng.gen_range(0..4)]);
            (gemm_kernel(m, k, n, &cfg).map_err(|e| e.to_string())?, WorkloadSpec::gemm(m, k, n))
        } else {
            (cases[rng.gen_range(0..cases.len())].to_string(), spec.clone())
        };
        let mut c = cfg.clone();
        let t = &mut c.timing;
        t.cpu_node_cost = rng.gen_range(1..4);
        t.issue_cost = rng.gen_range(1..6);
        t.dma_startup = rng.gen_range(1..80);
        t.bus_bytes_per_cycle = [1, 2, 4, 8, 16, 32, 64][rng.gen_range(0..7)];
        t.compute_fill = Some(rng.gen_range(1..40));
        t.queue_depth = rng.gen_range(1..20);
        let sim = Simulator::with_bindings(&parse(&src)?, &c, &spec.bindings(), SimOptions { max_nodes: 1 << 32, record_events: true })
            .map_err(|e| e.to_string())?;
        let out = sim.run_timed(&spec.random_inputs(&mut trial_rng(run, 0))).map_err(|e| e.to_string())?;
        check_trace(&out.events.unwrap_or_default()).map_err(|v| format!("run {run}: {v:?}"))?;
    }
    Ok(format!(
        "hoist {config_in_loop} -> {serial}, double buffer {serial} -> {db}, pipeline {serial} -> {piped}; 1000 timed traces conflict-free"
    ))
}

fn run_files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    ["trace.jsonl", "schedule.json", "report.json", "best.gk"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = write_small_run(work.path(), 3);
    let cfg = cfg.to_str().unwrap();
    let path = |name: &str| work.path().join(name).to_str().unwrap().to_string();
    let mut compared = 0;
    let mut same = |what: &str, a: Vec<u8>, b: Vec<u8>| -> Result<(), String> {
        compared += 1;
        ensure(a == b, || format!("{what} differs between runs"))
    };
    for (name, args) in
        [("simulate", vec!["simulate", &path("start.gk"), "-c", cfg, "--timed"]), ("verify", vec!["verify", &path("step3.gk"), "-c", cfg])]
    {
        let (a, b) = (tensopt(&args), tensopt(&args));
        ensure(a.status.success(), || format!("{name}: {}", String::from_utf8_lossy(&a.stderr)))?;
        same(name, a.stdout, b.stdout)?;
    }
    for run in ["a", "b"] {
        let o = tensopt(&["optimize", "-c", cfg, "-o", &path(&format!("opt_{run}"))]);
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    }
    for ((f, a), (_, b)) in run_files(&work.path().join("opt_a")).into_iter().zip(run_files(&work.path().join("opt_b"))) {
        same(&format!("optimize {f}"), a, b)?;
    }
    let schedule = path("opt_a/schedule.json");
    for run in ["a", "b"] {
        let o = tensopt(&["reuse", "-c", cfg, "--schedule", &schedule, "--beam", "1,1,1", "-o", &path(&format!("reuse_{run}"))]);
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    }
    for ((f, a), (_, b)) in run_files(&work.path().join("reuse_a")).into_iter().zip(run_files(&work.path().join("reuse_b"))) {
        same(&format!("reuse {f}"), a, b)?;
    }
    let trace = path("opt_a/trace.jsonl");
    for format in ["json", "csv"] {
        let args = ["report", trace.as_str(), "--format", format];
        same(&format!("report {format}"), tensopt(&args).stdout, tensopt(&args).stdout)?;
    }
    Ok(format!("{compared} outputs byte-identical across repeated runs of simulate, verify, optimize, reuse and report"))
}

fn emit(n: usize, name: &str, result: Outcome) -> bool {
    let line = match &result {
        Ok(detail) => format!("criterion {n} PASS  {name}: {detail}\n"),
        Err(why) => format!("criterion {n} FAIL  {name}: {why}\n"),
    };
    // Straight to the handle so the line shows even when output is captured.
    let _ = std::io::stderr().write_all(line.as_bytes());
    result.is_ok()
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    })
}

#[test]
fn acceptance() {
    let mut bench = Bench::load();
    let results = [
        emit(1, "oracle equivalence", guarded(oracle_equivalence)),
        emit(2, "corpus parity", guarded(corpus_parity)),
        emit(3, "scripted end-to-end search", guarded(|| scripted_search(&mut bench))),
        emit(4, "beam invariants", guarded(beam_invariants)),
        emit(5, "dropout statistic", guarded(dropout)),
        emit(6, "ensemble split", guarded(ensemble_split)),
        emit(7, "reuse accounting", guarded(|| reuse_accounting(&bench))),
        emit(8, "timing directionality", guarded(timing_directionality)),
        emit(9, "determinism", guarded(determinism)),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

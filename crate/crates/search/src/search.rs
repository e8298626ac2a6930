//! Two-phase beam search: plans sampled per beam member, code sampled per
//! plan, every candidate verified and timed, the best `B` kept.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tensopt_core::dsl::{extract_code_block, parse_kernel, print_kernel, KernelProgram};
use tensopt_core::sim::AcceleratorConfig;
use tensopt_core::verify::{check_equivalence, CheckOptions, Verdict, WorkloadSpec};

use crate::config::{BeamParams, SearchConfig};
use crate::llm::{ensemble_assign, Backend, Completion, LlmError, Phase};
use crate::prompts::{build_code_prompt, build_plan_prompt, parse_plan, Plan, ReuseConstraint};
use crate::schedule::{Schedule, ScheduleStep};
use crate::trace::{EventKind, TraceEvent, TraceIds};

/// Hex SHA-256 of canonical code text.
pub fn code_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// A verified kernel.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub program: Arc<KernelProgram>,
    /// Canonical text, as printed from the AST.
    pub code: String,
    pub hash: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    NoCode,
    Unparsable(String),
    Checked(Arc<Evaluated>),
}

/// Verifies kernels against one workload, caching verdicts by code hash.
pub struct Evaluator {
    spec: WorkloadSpec,
    cfg: AcceleratorConfig,
    opts: CheckOptions,
    cache: Mutex<HashMap<String, Arc<Evaluated>>>,
}

impl Evaluator {
    pub fn new(spec: WorkloadSpec, cfg: AcceleratorConfig, opts: CheckOptions) -> Evaluator {
        Evaluator { spec, cfg, opts, cache: Mutex::new(HashMap::new()) }
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    pub fn config(&self) -> &AcceleratorConfig {
        &self.cfg
    }

    /// Distinct kernels checked so far.
    pub fn checked(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn evaluate_source(&self, source: &str) -> Outcome {
        let program = match parse_kernel(source) {
            Ok(p) => p,
            Err(diags) => {
                let msg = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ");
                return Outcome::Unparsable(msg);
            }
        };
        let code = print_kernel(&program);
        let hash = code_hash(&code);
        if let Some(hit) = self.cache.lock().unwrap().get(&hash) {
            return Outcome::Checked(hit.clone());
        }
        let verdict = check_equivalence(&program, &self.spec, &self.cfg, &self.opts);
        let e = Arc::new(Evaluated { program: Arc::new(program), code, hash: hash.clone(), verdict });
        Outcome::Checked(self.cache.lock().unwrap().entry(hash).or_insert(e).clone())
    }

    /// Extracts the kernel from a model response and evaluates it.
    pub fn evaluate_response(&self, response: &str) -> Outcome {
        match extract_code_block(response) {
            Some(src) => self.evaluate_source(&src),
            None => Outcome::NoCode,
        }
    }
}

/// One search node.
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub id: String,
    pub code: String,
    pub hash: String,
    pub parent_id: Option<String>,
    pub plan: Option<Plan>,
    pub verdict: Verdict,
    pub iteration_found: usize,
    pub discovery_index: usize,
    #[serde(skip)]
    pub ast: Arc<KernelProgram>,
}

impl Candidate {
    /// Canonical latency; only correct candidates are ever constructed.
    pub fn latency(&self) -> u64 {
        self.verdict.latency_cycles.unwrap_or(u64::MAX)
    }

    fn rank(&self) -> (u64, usize) {
        (self.latency(), self.discovery_index)
    }
}

#[derive(Debug, Clone)]
pub struct BeamState {
    pub iteration: usize,
    /// Sorted by (latency, discovery index).
    pub members: Vec<Candidate>,
    pub best_overall: Candidate,
}

/// Counters for one iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub phase: String,
    pub plan_calls: u64,
    pub code_calls: u64,
    pub failed_calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub evaluated: u64,
    pub correct: u64,
    pub accepted: u64,
    pub best_latency: u64,
    pub cumulative_calls: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("start kernel does not parse: {0}")]
    StartUnparsable(String),
    #[error("start kernel is incorrect: {0}")]
    StartIncorrect(String),
    #[error("no usable backends")]
    NoBackends,
    #[error("invalid search configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub root: Candidate,
    pub best: Candidate,
    pub schedule: Schedule,
    pub trace: Vec<TraceEvent>,
    pub iterations: Vec<IterationStats>,
    /// The root and every child that beat its parent.
    pub candidates: Vec<Candidate>,
    pub final_beam: Vec<Candidate>,
    pub warnings: Vec<String>,
}

impl SearchResult {
    pub fn speedup(&self) -> f64 {
        self.root.latency() as f64 / self.best.latency() as f64
    }

    pub fn total_calls(&self) -> u64 {
        self.iterations.last().map_or(0, |s| s.cumulative_calls)
    }

    /// LLM calls issued by iterations of the given phase.
    pub fn calls_in_phase(&self, phase: &str) -> u64 {
        self.iterations.iter().filter(|s| s.phase == phase).map(|s| s.plan_calls + s.code_calls).sum()
    }
}

/// Schedule leading to `result.best`, root first.
pub fn record_schedule(result: &SearchResult, spec: &WorkloadSpec) -> Schedule {
    let by_id: HashMap<&str, &Candidate> = result.candidates.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut steps = Vec::new();
    let mut cur = &result.best;
    while let Some(parent) = cur.parent_id.as_deref().and_then(|p| by_id.get(p)) {
        let plan = cur.plan.as_ref();
        steps.push(ScheduleStep {
            menu_option: plan.map_or_else(String::new, |p| p.menu_option.clone()),
            plan_text: plan.map_or_else(String::new, |p| p.plan_text.clone()),
            latency_before: parent.latency(),
            latency_after: cur.latency(),
        });
        cur = parent;
    }
    steps.reverse();
    Schedule { fingerprint: spec.fingerprint(), steps }
}

/// Dropout RNG of one plan sample, independent of evaluation order.
fn sample_rng(seed: u64, iteration: usize, member: usize, sample: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"menu");
    for v in [seed, iteration as u64, member as u64, sample as u64] {
        h.update(v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn response_payload(r: &Result<Completion, LlmError>) -> Value {
    match r {
        Ok(c) => json!({
            "ok": true,
            "text": c.text,
            "prompt_tokens": c.prompt_tokens,
            "completion_tokens": c.completion_tokens,
        }),
        Err(e) => json!({"ok": false, "error": e.to_string()}),
    }
}

fn member_summary(c: &Candidate) -> Value {
    json!({"id": c.id, "parent": c.parent_id, "latency": c.latency(), "hash": c.hash})
}

struct Request {
    model: usize,
    prompt: String,
}

/// A search in progress. Drive it with [`Search::start`] and
/// [`Search::run_iteration`], then [`Search::finish`].
pub struct Search<'a> {
    sc: &'a SearchConfig,
    backends: &'a [Arc<dyn Backend>],
    evaluator: &'a Evaluator,
    trace: Vec<TraceEvent>,
    candidates: Vec<Candidate>,
    stats: Vec<IterationStats>,
    warnings: Vec<String>,
    next_index: usize,
    next_plan: usize,
    iteration: usize,
    calls: u64,
}

impl<'a> Search<'a> {
    pub fn new(sc: &'a SearchConfig, backends: &'a [Arc<dyn Backend>], evaluator: &'a Evaluator) -> Result<Search<'a>, SearchError> {
        sc.validate().map_err(SearchError::Config)?;
        if backends.is_empty() {
            return Err(SearchError::NoBackends);
        }
        let backends = if sc.ablations.enable_ensemble { backends } else { &backends[..1] };
        Ok(Search {
            sc,
            backends,
            evaluator,
            trace: Vec::new(),
            candidates: Vec::new(),
            stats: Vec::new(),
            warnings: Vec::new(),
            next_index: 0,
            next_plan: 0,
            iteration: 0,
            calls: 0,
        })
    }

    pub fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn event(&mut self, kind: EventKind, ids: TraceIds, payload: Value) {
        self.trace.push(TraceEvent { kind, iteration: self.iteration, ids, payload });
    }

    fn cfg(&self) -> &AcceleratorConfig {
        self.evaluator.config()
    }

    /// Verifies and times the start kernel, which becomes the one-member root beam.
    pub fn start(&mut self, start_code: &str) -> Result<BeamState, SearchError> {
        let e = match self.evaluator.evaluate_source(start_code) {
            Outcome::Checked(e) => e,
            Outcome::Unparsable(msg) => return Err(SearchError::StartUnparsable(msg)),
            Outcome::NoCode => unreachable!("source is evaluated directly"),
        };
        if !e.verdict.correct {
            let why = e.verdict.first_mismatch.as_ref().map_or_else(String::new, |m| m.reason.clone());
            return Err(SearchError::StartIncorrect(why));
        }
        let root = Candidate {
            id: format!("c{}", self.next_index),
            code: e.code.clone(),
            hash: e.hash.clone(),
            parent_id: None,
            plan: None,
            verdict: e.verdict.clone(),
            iteration_found: 0,
            discovery_index: self.next_index,
            ast: e.program.clone(),
        };
        self.next_index += 1;
        let ids = TraceIds { candidate: Some(root.id.clone()), ..Default::default() };
        self.event(
            EventKind::Verdict,
            ids,
            json!({"status": "correct", "correct": true, "latency": root.latency(), "hash": root.hash, "accepted": true}),
        );
        let stats = IterationStats { phase: "start".into(), best_latency: root.latency(), ..Default::default() };
        self.event(
            EventKind::Beam,
            TraceIds::default(),
            json!({"members": [member_summary(&root)], "best": member_summary(&root), "stats": stats}),
        );
        self.stats.push(stats);
        self.candidates.push(root.clone());
        Ok(BeamState { iteration: 0, members: vec![root.clone()], best_overall: root })
    }

    /// Sends requests to their backends and returns results in request order.
    fn call(&self, phase: Phase, reqs: &[Request]) -> Vec<Result<Completion, LlmError>> {
        let mut slots: Vec<Option<Result<Completion, LlmError>>> = reqs.iter().map(|_| None).collect();
        let per_backend: Vec<(Vec<usize>, Vec<String>)> = (0..self.backends.len())
            .map(|b| {
                let idx: Vec<usize> = (0..reqs.len()).filter(|&i| reqs[i].model == b).collect();
                let prompts = idx.iter().map(|&i| reqs[i].prompt.clone()).collect();
                (idx, prompts)
            })
            .collect();
        let answers: Vec<Vec<Result<Completion, LlmError>>> = std::thread::scope(|s| {
            let handles: Vec<_> = per_backend
                .iter()
                .enumerate()
                .map(|(b, (_, prompts))| s.spawn(move || self.backends[b].complete_batch(phase, prompts)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("backend thread panicked")).collect()
        });
        for ((idx, _), out) in per_backend.iter().zip(answers) {
            for (&i, r) in idx.iter().zip(out) {
                slots[i] = Some(r);
            }
        }
        slots.into_iter().map(|r| r.expect("every request answered")).collect()
    }

    /// One round of planning, coding and selection. `reuse` restricts the
    /// menu to a single recorded option.
    pub fn run_iteration(&mut self, beam: &BeamState, params: BeamParams, phase: &str, reuse: Option<&ReuseConstraint>) -> BeamState {
        self.iteration += 1;
        let it = self.iteration;
        let sc = self.sc;
        let cfg = self.cfg().clone();
        let n_models = self.backends.len();
        let mut st = IterationStats { iteration: it, phase: phase.to_string(), ..Default::default() };

        let mut plan_reqs = Vec::new();
        let mut plan_owner = Vec::new();
        for (mi, m) in beam.members.iter().enumerate() {
            let models = ensemble_assign(params.plans_per_element, self.backends);
            for (s, &model) in models.iter().enumerate() {
                let mut rng = sample_rng(sc.seed, it, mi, s);
                let prompt = build_plan_prompt(m, sc, &cfg, &mut rng, reuse);
                let plan_id = format!("p{}", self.next_plan);
                self.next_plan += 1;
                let ids = TraceIds { member: Some(m.id.clone()), plan: Some(plan_id.clone()), candidate: None };
                let payload =
                    json!({"phase": phase, "sample": s, "model": model, "backend": self.backends[model].name(), "prompt": prompt});
                self.event(EventKind::PlanRequest, ids, payload);
                plan_reqs.push(Request { model, prompt });
                plan_owner.push((mi, plan_id));
            }
        }
        let plan_out = self.call(Phase::Plan, &plan_reqs);
        st.plan_calls = plan_reqs.len() as u64;

        let mut plans = Vec::new();
        for ((mi, plan_id), r) in plan_owner.into_iter().zip(&plan_out) {
            let mut payload = response_payload(r);
            let ids = TraceIds { member: Some(beam.members[mi].id.clone()), plan: Some(plan_id.clone()), candidate: None };
            match r {
                Ok(c) => {
                    st.prompt_tokens += c.prompt_tokens.unwrap_or(0);
                    st.completion_tokens += c.completion_tokens.unwrap_or(0);
                    let plan = parse_plan(&c.text, &sc.menu);
                    payload["menu_option"] = json!(plan.menu_option);
                    plans.push((mi, plan_id, plan));
                }
                Err(_) => st.failed_calls += 1,
            }
            self.event(EventKind::PlanResponse, ids, payload);
        }

        let mut code_reqs = Vec::new();
        let mut code_owner = Vec::new();
        for (pi, (mi, plan_id, plan)) in plans.iter().enumerate() {
            let m = &beam.members[*mi];
            let prompt = build_code_prompt(m, plan, sc, &cfg);
            for c in ensemble_assign(params.codes_per_plan, self.backends) {
                let model = (c + pi) % n_models;
                let ids = TraceIds { member: Some(m.id.clone()), plan: Some(plan_id.clone()), candidate: None };
                let payload = json!({"phase": phase, "model": model, "backend": self.backends[model].name(), "prompt": prompt});
                self.event(EventKind::CodeRequest, ids, payload);
                code_reqs.push(Request { model, prompt: prompt.clone() });
                code_owner.push(pi);
            }
        }
        let code_out = self.call(Phase::Code, &code_reqs);
        st.code_calls = code_reqs.len() as u64;

        let outcomes: Vec<Option<Outcome>> =
            code_out.par_iter().map(|r| r.as_ref().ok().map(|c| self.evaluator.evaluate_response(&c.text))).collect();

        let mut children = Vec::new();
        for ((pi, r), outcome) in code_owner.into_iter().zip(&code_out).zip(outcomes) {
            let (mi, plan_id, plan) = &plans[pi];
            let parent = &beam.members[*mi];
            let mut ids = TraceIds { member: Some(parent.id.clone()), plan: Some(plan_id.clone()), candidate: None };
            let Some(outcome) = outcome else {
                st.failed_calls += 1;
                self.event(EventKind::CodeResponse, ids, response_payload(r));
                continue;
            };
            if let Ok(c) = r {
                st.prompt_tokens += c.prompt_tokens.unwrap_or(0);
                st.completion_tokens += c.completion_tokens.unwrap_or(0);
            }
            let index = self.next_index;
            self.next_index += 1;
            let id = format!("c{index}");
            ids.candidate = Some(id.clone());
            self.event(EventKind::CodeResponse, ids.clone(), response_payload(r));
            st.evaluated += 1;
            let mut verdict = json!({"parent": parent.id, "menu_option": plan.menu_option});
            match outcome {
                Outcome::NoCode => verdict["status"] = json!("no_code"),
                Outcome::Unparsable(msg) => {
                    verdict["status"] = json!("unparsable");
                    verdict["reason"] = json!(msg);
                }
                Outcome::Checked(e) if !e.verdict.correct => {
                    verdict["status"] = json!("incorrect");
                    verdict["hash"] = json!(e.hash);
                    verdict["reason"] = json!(e.verdict.first_mismatch.as_ref().map(|m| m.reason.clone()));
                }
                Outcome::Checked(e) => {
                    st.correct += 1;
                    let latency = e.verdict.latency_cycles.expect("correct verdicts carry latency");
                    let accepted = latency < parent.latency();
                    verdict["status"] = json!("correct");
                    verdict["hash"] = json!(e.hash);
                    verdict["latency"] = json!(latency);
                    verdict["accepted"] = json!(accepted);
                    if accepted {
                        st.accepted += 1;
                        verdict["plan_text"] = json!(plan.plan_text);
                        children.push(Candidate {
                            id: id.clone(),
                            code: e.code.clone(),
                            hash: e.hash.clone(),
                            parent_id: Some(parent.id.clone()),
                            plan: Some(plan.clone()),
                            verdict: e.verdict.clone(),
                            iteration_found: it,
                            discovery_index: index,
                            ast: e.program.clone(),
                        });
                    }
                }
            }
            verdict["correct"] = json!(verdict["status"] == "correct");
            self.event(EventKind::Verdict, ids, verdict);
        }

        self.candidates.extend(children.iter().cloned());
        let mut pool: Vec<Candidate> = beam.members.iter().cloned().chain(children).collect();
        pool.sort_by_key(Candidate::rank);
        let mut seen = HashSet::new();
        pool.retain(|c| seen.insert(c.hash.clone()));
        pool.truncate(params.beam_width);
        let best_overall = if pool[0].rank() < beam.best_overall.rank() { pool[0].clone() } else { beam.best_overall.clone() };

        self.calls += st.plan_calls + st.code_calls;
        st.cumulative_calls = self.calls;
        st.best_latency = best_overall.latency();
        log::info!(
            "iteration {it} ({phase}): {} calls, {} correct, {} accepted, best {} cycles",
            st.plan_calls + st.code_calls,
            st.correct,
            st.accepted,
            st.best_latency
        );
        let payload = json!({
            "members": pool.iter().map(member_summary).collect::<Vec<_>>(),
            "best": member_summary(&best_overall),
            "stats": st,
        });
        self.event(EventKind::Beam, TraceIds::default(), payload);
        self.stats.push(st);
        BeamState { iteration: it, members: pool, best_overall }
    }

    pub fn finish(self, beam: BeamState) -> SearchResult {
        let root = self.candidates[0].clone();
        let mut result = SearchResult {
            root,
            best: beam.best_overall,
            schedule: Schedule { fingerprint: self.evaluator.spec().fingerprint(), steps: Vec::new() },
            trace: self.trace,
            iterations: self.stats,
            candidates: self.candidates,
            final_beam: beam.members,
            warnings: self.warnings,
        };
        result.schedule = record_schedule(&result, self.evaluator.spec());
        result
    }
}

/// Full search from `start_code` for `sc.iterations` iterations.
pub fn run_search(
    start_code: &str,
    sc: &SearchConfig,
    backends: &[Arc<dyn Backend>],
    evaluator: &Evaluator,
) -> Result<SearchResult, SearchError> {
    let mut s = Search::new(sc, backends, evaluator)?;
    let mut beam = s.start(start_code)?;
    for _ in 0..sc.iterations {
        beam = s.run_iteration(&beam, sc.params(), "search", None);
    }
    Ok(s.finish(beam))
}

/// Replays a recorded schedule one constrained iteration per step with
/// `reuse` parameters, then refines the best code with `refine_iters` full
/// iterations at the parameters of `sc`.
pub fn run_reuse_search(
    start_code: &str,
    recorded: &Schedule,
    reuse: BeamParams,
    refine_iters: usize,
    sc: &SearchConfig,
    backends: &[Arc<dyn Backend>],
    evaluator: &Evaluator,
) -> Result<SearchResult, SearchError> {
    if recorded.steps.is_empty() {
        return Err(SearchError::Config("recorded schedule has no steps".into()));
    }
    let mut s = Search::new(sc, backends, evaluator)?;
    let target = evaluator.spec().fingerprint();
    let shared = recorded.fingerprint.shared_dims(&target);
    if shared < 2 {
        s.warn(format!(
            "schedule was recorded for {} {:?}, which shares only {shared} dimension(s) with {} {:?}",
            recorded.fingerprint.kind, recorded.fingerprint.dims, target.kind, target.dims
        ));
    }
    let mut beam = s.start(start_code)?;
    for step in &recorded.steps {
        let constraint = ReuseConstraint { menu_option: step.menu_option.clone(), plan_hint: Some(step.plan_text.clone()) };
        beam = s.run_iteration(&beam, reuse, "reuse", Some(&constraint));
    }
    let best = beam.best_overall.clone();
    beam = BeamState { iteration: beam.iteration, members: vec![best.clone()], best_overall: best };
    for _ in 0..refine_iters {
        beam = s.run_iteration(&beam, sc.params(), "refine", None);
    }
    Ok(s.finish(beam))
}

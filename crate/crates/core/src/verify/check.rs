//! Randomized functional-equivalence checking and canonical latency.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::workload::WorkloadSpec;
use crate::dsl::KernelProgram;
use crate::sim::{AcceleratorConfig, ArrayData, Data, PerfReport, SimError, SimOptions, Simulator, DEFAULT_MAX_NODES};

pub const RELATIVE_TOLERANCE: f64 = 1e-5;
pub const ABSOLUTE_TOLERANCE: f64 = 1e-6;

/// Float comparison bounds: `|actual - expected| <= max(relative·|expected|, absolute)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { relative: RELATIVE_TOLERANCE, absolute: ABSOLUTE_TOLERANCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckOptions {
    pub n_functional: usize,
    /// Timed trials; at least one (the canonical trial) always runs.
    pub n_timed: usize,
    pub base_seed: u64,
    pub max_nodes: u64,
    pub tolerance: Tolerance,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { n_functional: 5, n_timed: 20, base_seed: 0, max_nodes: DEFAULT_MAX_NODES, tolerance: Tolerance::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Setup,
    Functional,
    Timed,
}

/// Why a kernel was judged incorrect. Element mismatches fill in the
/// location fields; errors leave them empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub phase: Phase,
    pub trial: usize,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actual: Option<f64>,
}

impl Mismatch {
    fn error(phase: Phase, trial: usize, reason: impl Into<String>) -> Mismatch {
        Mismatch { phase, trial, reason: reason.into(), param: None, index: None, expected: None, actual: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub correct: bool,
    /// Simulator runs performed, functional and timed.
    pub trials_run: usize,
    pub functional_trials: usize,
    pub timed_trials: usize,
    pub first_mismatch: Option<Mismatch>,
    /// Cycles of the canonical timed trial; present iff correct.
    pub latency_cycles: Option<u64>,
    pub perf: Option<PerfReport>,
}

impl Verdict {
    fn failed(m: Mismatch, functional: usize, timed: usize) -> Verdict {
        Verdict {
            correct: false,
            trials_run: functional + timed,
            functional_trials: functional,
            timed_trials: timed,
            first_mismatch: Some(m),
            latency_cycles: None,
            perf: None,
        }
    }
}

/// RNG of one trial. Stream 0 is the canonical trial.
pub fn trial_rng(base_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream);
    rng
}

fn functional_stream(i: usize) -> u64 {
    1 + i as u64
}

fn timed_stream(j: usize) -> u64 {
    if j == 0 {
        0
    } else {
        1000 + j as u64
    }
}

/// Whether `actual` is acceptable for `expected`. Integers compare exactly.
pub fn values_match(expected: f64, actual: f64, float: bool, tol: Tolerance) -> bool {
    if !float {
        return expected == actual;
    }
    if expected.is_nan() || actual.is_nan() {
        return false;
    }
    (actual - expected).abs() <= (tol.relative * expected.abs()).max(tol.absolute)
}

/// Compares kernel outputs with the oracle on freshly generated inputs.
fn compare(
    spec: &WorkloadSpec,
    inputs: &BTreeMap<String, ArrayData>,
    outputs: &BTreeMap<String, ArrayData>,
    phase: Phase,
    trial: usize,
    tol: Tolerance,
) -> Result<(), Mismatch> {
    let expected = spec.expected(inputs).map_err(|e| Mismatch::error(phase, trial, e.to_string()))?;
    for e in expected {
        let Some(got) = outputs.get(e.name) else {
            return Err(Mismatch::error(phase, trial, format!("kernel has no parameter '{}'", e.name)));
        };
        let float = matches!(e.data.data, Data::F32(_));
        for i in e.compare.clone() {
            let (want, have) = (e.data.data.get(i), got.data.get(i));
            if !values_match(want, have, float, tol) {
                return Err(Mismatch {
                    phase,
                    trial,
                    reason: format!("{}{:?} = {have}, expected {want}", e.name, e.data.unflatten(i)),
                    param: Some(e.name.to_string()),
                    index: Some(e.data.unflatten(i)),
                    expected: Some(want),
                    actual: Some(have),
                });
            }
        }
    }
    Ok(())
}

/// Checks that the kernel declares exactly the parameters the workload needs.
fn check_params(sim: &Simulator, spec: &WorkloadSpec) -> Result<(), String> {
    let have = sim.params();
    for p in spec.params() {
        match have.iter().find(|(n, _, _)| n == p.name) {
            None => return Err(format!("kernel has no parameter '{}'", p.name)),
            Some((_, dims, kind)) if *dims != p.dims || *kind != p.kind => {
                return Err(format!("parameter '{}' is {kind:?}{dims:?}, expected {:?}{:?}", p.name, p.kind, p.dims))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Builds a simulator for `p` with the workload's constant bindings.
pub fn simulator_for(p: &KernelProgram, spec: &WorkloadSpec, cfg: &AcceleratorConfig, max_nodes: u64) -> Result<Simulator, SimError> {
    let opts = SimOptions { max_nodes, record_events: false };
    Simulator::with_bindings(p, cfg, &spec.bindings(), opts)
}

/// Runs `n_functional` functional trials and, if they all pass, the timed
/// trials. Every trial draws fresh inputs from its own seed stream; the
/// canonical timed trial uses `base_seed` directly.
pub fn check_equivalence(p: &KernelProgram, spec: &WorkloadSpec, cfg: &AcceleratorConfig, opts: &CheckOptions) -> Verdict {
    match simulator_for(p, spec, cfg, opts.max_nodes) {
        Ok(sim) => check_simulator(&sim, spec, opts),
        Err(e) => Verdict::failed(Mismatch::error(Phase::Setup, 0, e.to_string()), 0, 0),
    }
}

/// As [`check_equivalence`], for an already constructed simulator.
pub fn check_simulator(sim: &Simulator, spec: &WorkloadSpec, opts: &CheckOptions) -> Verdict {
    if let Err(e) = spec.validate() {
        return Verdict::failed(Mismatch::error(Phase::Setup, 0, e.to_string()), 0, 0);
    }
    if let Err(e) = check_params(sim, spec) {
        return Verdict::failed(Mismatch::error(Phase::Setup, 0, e), 0, 0);
    }
    let seed = opts.base_seed;

    let functional: Vec<Result<(), Mismatch>> = (0..opts.n_functional)
        .into_par_iter()
        .map(|i| {
            let inputs = spec.random_inputs(&mut trial_rng(seed, functional_stream(i)));
            let out = sim.run(&inputs).map_err(|e| Mismatch::error(Phase::Functional, i, e.to_string()))?;
            compare(spec, &inputs, &out.outputs, Phase::Functional, i, opts.tolerance)
        })
        .collect();
    if let Some(m) = functional.into_iter().find_map(Result::err) {
        return Verdict::failed(m, opts.n_functional, 0);
    }

    let n_timed = opts.n_timed.max(1);
    let timed: Vec<Result<PerfReport, Mismatch>> = (0..n_timed)
        .into_par_iter()
        .map(|j| {
            let inputs = spec.random_inputs(&mut trial_rng(seed, timed_stream(j)));
            let out = sim.run_timed(&inputs).map_err(|e| Mismatch::error(Phase::Timed, j, e.to_string()))?;
            compare(spec, &inputs, &out.outputs, Phase::Timed, j, opts.tolerance)?;
            Ok(out.perf)
        })
        .collect();
    let mut canonical = None;
    for (j, r) in timed.into_iter().enumerate() {
        match r {
            Err(m) => return Verdict::failed(m, opts.n_functional, n_timed),
            Ok(perf) if j == 0 => canonical = Some(perf),
            Ok(_) => {}
        }
    }
    let perf = canonical.expect("canonical trial ran");
    Verdict {
        correct: true,
        trials_run: opts.n_functional + n_timed,
        functional_trials: opts.n_functional,
        timed_trials: n_timed,
        first_mismatch: None,
        latency_cycles: Some(perf.total_cycles),
        perf: Some(perf),
    }
}

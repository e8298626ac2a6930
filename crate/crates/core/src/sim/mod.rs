//! Functional and cycle-approximate simulation of kernels on a Gemmini-style
//! accelerator.

pub mod address;
mod config;
mod dram;
mod interp;
pub mod machine;
mod timing;
pub mod value;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dsl::{has_errors, validate_kernel_with, Bindings, Diagnostic, KernelProgram};

pub use address::{Access, LocalAddress, Space, NO_ADDRESS};
pub use config::{AcceleratorConfig, ElemKind, TimingParams};
pub use dram::{ArrayData, Data};
pub use machine::ExecError;
pub use timing::{check_trace, compute_feedback, Event, EventRows, PerfReport, TraceViolation};

use interp::{lower, Interp, Lowered};
use timing::TimingModel;

/// Default runaway guard, in evaluated nodes.
pub const DEFAULT_MAX_NODES: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("kernel is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("bad input: {0}")]
    Input(String),
    #[error("line {line}: {error}")]
    Exec { line: u32, error: ExecError },
    #[error("runaway guard: more than {limit} nodes evaluated")]
    Runaway { limit: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub max_nodes: u64,
    /// Keep the per-instruction event log of timed runs.
    pub record_events: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { max_nodes: DEFAULT_MAX_NODES, record_events: false }
    }
}

/// Counters available from any run, timed or not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecStats {
    pub instr_counts: BTreeMap<String, u64>,
    pub cpu_nodes: u64,
    pub dram_bytes_in: u64,
    pub dram_bytes_out: u64,
    pub spad_util_kb: f64,
    pub acc_util_kb: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outputs: BTreeMap<String, ArrayData>,
    pub stats: ExecStats,
}

#[derive(Debug, Clone)]
pub struct TimedOutput {
    pub outputs: BTreeMap<String, ArrayData>,
    pub perf: PerfReport,
    pub events: Option<Vec<Event>>,
}

/// A kernel validated and lowered once for a configuration; cheap to run many
/// times and shareable across threads.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: AcceleratorConfig,
    prog: Lowered,
    opts: SimOptions,
}

impl Simulator {
    pub fn new(p: &KernelProgram, cfg: &AcceleratorConfig) -> Result<Simulator, SimError> {
        Self::with_bindings(p, cfg, &Bindings::new(), SimOptions::default())
    }

    pub fn with_bindings(p: &KernelProgram, cfg: &AcceleratorConfig, bindings: &Bindings, opts: SimOptions) -> Result<Simulator, SimError> {
        cfg.validate().map_err(SimError::Input)?;
        let diags = validate_kernel_with(p, cfg, bindings);
        if has_errors(&diags) {
            return Err(SimError::Invalid(diags.into_iter().filter(|d| d.is_error()).collect()));
        }
        let prog = lower(p, cfg, bindings)?;
        Ok(Simulator { cfg: cfg.clone(), prog, opts })
    }

    pub fn config(&self) -> &AcceleratorConfig {
        &self.cfg
    }

    /// Parameter names with their shapes and storage kinds, in declaration order.
    pub fn params(&self) -> Vec<(String, Vec<usize>, ElemKind)> {
        self.prog.arrays[..self.prog.n_params].iter().map(|a| (a.name.clone(), a.dims.clone(), a.kind)).collect()
    }

    fn util_kb(&self, it: &Interp<'_>) -> (f64, f64) {
        let (s, a) = it.accel.touched_rows();
        let kb = |rows: usize, kind: ElemKind| (rows * self.cfg.dim * kind.bytes()) as f64 / 1024.0;
        (kb(s, self.cfg.elem), kb(a, self.cfg.acc))
    }

    pub fn run(&self, inputs: &BTreeMap<String, ArrayData>) -> Result<RunOutput, SimError> {
        let mut it = Interp::new(&self.prog, &self.cfg, inputs, None, self.opts.max_nodes)?;
        it.run()?;
        let (spad_util_kb, acc_util_kb) = self.util_kb(&it);
        let c = &it.counters;
        let stats = ExecStats {
            instr_counts: c.instr_counts.clone(),
            cpu_nodes: c.nodes,
            dram_bytes_in: c.dram_in,
            dram_bytes_out: c.dram_out,
            spad_util_kb,
            acc_util_kb,
        };
        Ok(RunOutput { outputs: it.outputs(), stats })
    }

    pub fn run_timed(&self, inputs: &BTreeMap<String, ArrayData>) -> Result<TimedOutput, SimError> {
        let tm = TimingModel::new(&self.cfg, self.opts.record_events);
        let mut it = Interp::new(&self.prog, &self.cfg, inputs, Some(tm), self.opts.max_nodes)?;
        it.run()?;
        let (spad_util_kb, acc_util_kb) = self.util_kb(&it);
        let nodes = it.counters.nodes;
        let t = it.timing.as_mut().expect("timed run").finish(nodes);
        let c = &it.counters;
        let perf = PerfReport {
            total_cycles: t.total_cycles,
            spad_util_kb,
            acc_util_kb,
            dram_bytes_in: c.dram_in,
            dram_bytes_out: c.dram_out,
            instr_counts: c.instr_counts.clone(),
            cpu_nodes: nodes,
            cpu_cycles: t.cpu_cycles,
            stall_cycles: t.stall_cycles,
            busy_cycles: t.busy_cycles,
            queue_stall_cycles: t.queue_stall_cycles,
        };
        Ok(TimedOutput { outputs: it.outputs(), perf, events: t.events })
    }
}

/// Validates and runs `p` once without timing.
pub fn run_functional(p: &KernelProgram, cfg: &AcceleratorConfig, inputs: &BTreeMap<String, ArrayData>) -> Result<RunOutput, SimError> {
    Simulator::new(p, cfg)?.run(inputs)
}

/// Validates and runs `p` once with the timing model.
pub fn run_timed(p: &KernelProgram, cfg: &AcceleratorConfig, inputs: &BTreeMap<String, ArrayData>) -> Result<TimedOutput, SimError> {
    Simulator::new(p, cfg)?.run_timed(inputs)
}

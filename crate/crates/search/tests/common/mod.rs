#![allow(dead_code)]

use std::sync::Arc;

use tensopt_core::sim::AcceleratorConfig;
use tensopt_core::verify::{CheckOptions, WorkloadSpec};
use tensopt_search::llm::{Backend, LibraryBackend, Transition};
use tensopt_search::{Evaluator, SearchConfig};

pub const CONFIG_IN_LOOP: &str = include_str!("../fixtures/config_in_loop.gk");
pub const SERIAL: &str = include_str!("../fixtures/serial.gk");
pub const SERIAL_UNROLLED: &str = include_str!("../fixtures/serial_unrolled.gk");
pub const DOUBLE_BUFFERED: &str = include_str!("../fixtures/double_buffered.gk");
pub const DOUBLE_BUFFERED_BAD: &str = include_str!("../fixtures/double_buffered_wrong_operand.gk");
pub const PIPELINED: &str = include_str!("../fixtures/pipelined.gk");
pub const PIPELINED_BAD: &str = include_str!("../fixtures/pipelined_short_loop.gk");

pub const HOIST: &str = "hoist redundant operations out of loops";
pub const DOUBLE_BUFFERING: &str = "double buffering";
pub const PIPELINE: &str = "pipeline operations to better overlap computation and data movement";
pub const UNROLL: &str = "loop unrolling";

pub fn t(from: &str, option: &str, plan: &str, to: &str) -> Transition {
    Transition { from: from.into(), option: option.into(), plan: plan.into(), to: to.into() }
}

/// Rewrites between the 64x64x64 fixtures, including two that break the kernel.
pub fn transitions() -> Vec<Transition> {
    vec![
        t(CONFIG_IN_LOOP, HOIST, "Move both config_ld calls above the i loop.", SERIAL),
        t(CONFIG_IN_LOOP, DOUBLE_BUFFERING, "Alternate scratchpad halves on k.", DOUBLE_BUFFERED_BAD),
        t(SERIAL, DOUBLE_BUFFERING, "Alternate between two scratchpad buffers on k.", DOUBLE_BUFFERED),
        t(SERIAL, UNROLL, "Unroll the k loop by two.", SERIAL_UNROLLED),
        t(SERIAL, PIPELINE, "Load all four k tiles before computing on them.", PIPELINED_BAD),
        t(DOUBLE_BUFFERED, PIPELINE, "Hoist the loads of all k tiles ahead of the computes, alternating tile sets on (i, j).", PIPELINED),
        t(SERIAL_UNROLLED, DOUBLE_BUFFERING, "Use separate buffers for the two unrolled halves.", DOUBLE_BUFFERED),
    ]
}

pub fn library(name: &str, seed: u64) -> Arc<dyn Backend> {
    Arc::new(LibraryBackend::new(name, seed, transitions()).unwrap())
}

pub fn quick_check() -> CheckOptions {
    CheckOptions { n_functional: 2, n_timed: 1, ..CheckOptions::default() }
}

pub fn evaluator() -> Evaluator {
    Evaluator::new(WorkloadSpec::gemm(64, 64, 64), AcceleratorConfig::int8_16x16(), quick_check())
}

pub fn small_config(seed: u64) -> SearchConfig {
    SearchConfig {
        beam_width: 2,
        plans_per_element: 3,
        codes_per_plan: 2,
        iterations: 4,
        seed,
        check: quick_check(),
        ..SearchConfig::default()
    }
}

pub fn latency(ev: &Evaluator, src: &str) -> Option<u64> {
    match ev.evaluate_source(src) {
        tensopt_search::search::Outcome::Checked(e) if e.verdict.correct => e.verdict.latency_cycles,
        _ => None,
    }
}

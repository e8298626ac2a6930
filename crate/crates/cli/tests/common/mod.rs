#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tensopt_search::llm::Transition;

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

/// Rewrites between the 64x64x64 fixtures; two of them break the kernel.
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

pub fn benchmark_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("benchmarks/gemm512")
}

/// Writes a 64x64x64 GEMM run whose scripted model walks
/// config_in_loop -> serial -> double_buffered -> pipelined.
pub fn write_small_run(dir: &Path, iterations: usize) -> PathBuf {
    let steps = [
        (HOIST, "Move both config_ld calls above the i loop.", SERIAL),
        (DOUBLE_BUFFERING, "Alternate between two scratchpad buffers on k.", DOUBLE_BUFFERED),
        (PIPELINE, "Hoist the loads of all k tiles ahead of the computes.", PIPELINED),
    ];
    let mut entries = Vec::new();
    for (n, (option, plan, code)) in steps.iter().enumerate() {
        let file = format!("step{}.gk", n + 1);
        std::fs::write(dir.join(&file), code).unwrap();
        entries.push(serde_json::json!({"phase": "plan", "response": format!("OPTIMIZATION: {option}\n{plan}")}));
        entries.push(serde_json::json!({"phase": "code", "response_file": file}));
    }
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&serde_json::json!({"entries": entries})).unwrap()).unwrap();
    std::fs::write(dir.join("start.gk"), CONFIG_IN_LOOP).unwrap();
    let config = format!(
        r#"[workload]
kind = "gemm"
m = 64
k = 64
n = 64
start = "start.gk"

[search]
beam_width = 1
plans_per_element = 1
codes_per_plan = 1
iterations = {iterations}
seed = 3

[search.check]
n_functional = 2
n_timed = 1

[backends]
script = "manifest.json"
"#
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

pub fn tensopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tensopt")).args(args).output().expect("tensopt runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

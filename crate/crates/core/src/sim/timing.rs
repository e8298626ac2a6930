//! Cycle-approximate decoupled access/execute model.
//!
//! A front end walks the program, paying `cpu_node_cost` per evaluated node
//! and `issue_cost` per accelerator instruction, and dispatches instructions
//! in order to three in-order controllers (load, execute, store) with bounded
//! queues. Cross-controller hazards on scratchpad/accumulator rows are
//! resolved by per-row last-read/last-write completion times.
//!
//! The array double-buffers its weights: a preload may shift in the next
//! weights once the preceding compute has started streaming, so preload fill
//! overlaps compute. Instructions on one controller still start in order.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::config::AcceleratorConfig;
use super::machine::{Controller, Footprint, Instr, RowSpan};

/// One timed instruction, as written to the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub instr: String,
    pub controller: String,
    pub dispatch_cycle: u64,
    pub start_cycle: u64,
    pub end_cycle: u64,
    pub rows: Vec<EventRows>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRows {
    pub lo: u32,
    pub hi: u32,
    pub write: bool,
}

impl From<RowSpan> for EventRows {
    fn from(s: RowSpan) -> Self {
        EventRows { lo: s.lo, hi: s.hi, write: s.write }
    }
}

/// Performance summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub total_cycles: u64,
    pub spad_util_kb: f64,
    pub acc_util_kb: f64,
    pub dram_bytes_in: u64,
    pub dram_bytes_out: u64,
    pub instr_counts: BTreeMap<String, u64>,
    pub cpu_nodes: u64,
    pub cpu_cycles: u64,
    /// Cycles instructions waited on cross-controller hazards.
    pub stall_cycles: BTreeMap<String, u64>,
    /// Cycles during which each controller was servicing at least one
    /// instruction.
    pub busy_cycles: BTreeMap<String, u64>,
    /// Cycles the front end waited on full queues.
    pub queue_stall_cycles: u64,
}

/// Renders the feedback line shown to the planner.
pub fn compute_feedback(r: &PerfReport, cfg: &AcceleratorConfig) -> String {
    format!(
        "Latency: {} cycles. Scratchpad utilization: {:.1} KB / {} KB. Accumulator utilization: {:.1} KB / {} KB.",
        r.total_cycles, r.spad_util_kb, cfg.spad_kb, r.acc_util_kb, cfg.acc_kb
    )
}

#[derive(Default)]
struct CtrlState {
    /// Completion times of instructions still occupying the queue.
    queue: VecDeque<u64>,
    last_start: u64,
    last_end: u64,
    busy: u64,
    stall: u64,
}

/// Execute-controller lanes: weight shifting and A streaming.
#[derive(Default)]
struct ArrayState {
    weights_end: u64,
    stream_start: u64,
    stream_end: u64,
}

pub struct TimingModel {
    cpu_node_cost: u64,
    issue_cost: u64,
    config_cost: u64,
    dma_startup: u64,
    bus: u64,
    compute_fill: u64,
    depth: usize,
    fence_overhead: u64,
    t_fe: u64,
    nodes_seen: u64,
    ctrl: [CtrlState; 3],
    array: ArrayState,
    last_write: Vec<u64>,
    last_read: Vec<u64>,
    queue_stall: u64,
    events: Option<Vec<Event>>,
}

fn idx(c: Controller) -> usize {
    match c {
        Controller::Load => 0,
        Controller::Execute => 1,
        Controller::Store => 2,
    }
}

impl TimingModel {
    pub fn new(cfg: &AcceleratorConfig, record_events: bool) -> Self {
        let t = &cfg.timing;
        let rows = cfg.spad_rows() + cfg.acc_rows();
        TimingModel {
            cpu_node_cost: t.cpu_node_cost,
            issue_cost: t.issue_cost,
            config_cost: t.config_cost,
            dma_startup: t.dma_startup,
            bus: t.bus_bytes_per_cycle,
            compute_fill: cfg.compute_fill(),
            depth: t.queue_depth,
            fence_overhead: t.fence_drain_overhead,
            t_fe: 0,
            nodes_seen: 0,
            ctrl: Default::default(),
            array: ArrayState::default(),
            last_write: vec![0; rows],
            last_read: vec![0; rows],
            queue_stall: 0,
            events: record_events.then(Vec::new),
        }
    }

    fn advance_cpu(&mut self, nodes: u64) {
        let delta = nodes.saturating_sub(self.nodes_seen);
        self.nodes_seen = nodes;
        self.t_fe += delta * self.cpu_node_cost;
    }

    fn service(&self, instr: &Instr, fp: &Footprint) -> u64 {
        match instr {
            Instr::ConfigEx { .. } | Instr::ConfigLd { .. } | Instr::ConfigSt { .. } => self.config_cost,
            Instr::Mvin { .. } | Instr::Mvout { .. } => {
                let per_row = fp.row_bytes.div_ceil(self.bus).max(1);
                self.dma_startup + fp.rows * per_row
            }
            Instr::Preload { .. } => self.compute_fill,
            Instr::Compute { .. } => fp.rows,
        }
    }

    /// Accounts one accelerator instruction; `nodes` is the total number of
    /// CPU nodes evaluated so far.
    pub fn instr(&mut self, nodes: u64, instr: &Instr, fp: &Footprint) {
        self.advance_cpu(nodes);
        let c = idx(instr.controller());
        let service = self.service(instr, fp);

        let mut dispatch = self.t_fe;
        let q = &mut self.ctrl[c].queue;
        while q.front().is_some_and(|&e| e <= dispatch) {
            q.pop_front();
        }
        if q.len() >= self.depth {
            let freed = q.pop_front().unwrap_or(0);
            if freed > dispatch {
                self.queue_stall += freed - dispatch;
                dispatch = freed;
            }
        }
        self.t_fe = dispatch + self.issue_cost;
        let st = &self.ctrl[c];
        let a = &self.array;
        let ready = match instr {
            Instr::Preload { .. } => self.t_fe.max(st.last_start).max(a.weights_end).max(a.stream_start),
            Instr::Compute { .. } => self.t_fe.max(st.last_start).max(a.weights_end).max(a.stream_end),
            _ => self.t_fe.max(st.last_end),
        };

        let mut start = ready;
        for s in &fp.spans {
            for r in s.lo as usize..s.hi as usize {
                start = start.max(self.last_write[r]);
                if s.write {
                    start = start.max(self.last_read[r]);
                }
            }
        }
        let end = start + service;
        for s in &fp.spans {
            let table = if s.write { &mut self.last_write } else { &mut self.last_read };
            for t in &mut table[s.lo as usize..s.hi as usize] {
                *t = (*t).max(end);
            }
        }
        match instr {
            Instr::Preload { .. } => self.array.weights_end = end,
            Instr::Compute { .. } => {
                self.array.stream_start = start;
                self.array.stream_end = end;
            }
            _ => {}
        }
        let st = &mut self.ctrl[c];
        st.stall += start - ready;
        st.busy += end.saturating_sub(start.max(st.last_end));
        st.last_start = start;
        st.last_end = st.last_end.max(end);
        st.queue.push_back(end);
        if let Some(ev) = self.events.as_mut() {
            ev.push(Event {
                instr: instr.name().to_string(),
                controller: instr.controller().name().to_string(),
                dispatch_cycle: dispatch,
                start_cycle: start,
                end_cycle: end,
                rows: fp.spans.iter().copied().map(EventRows::from).collect(),
            });
        }
    }

    fn drained(&self) -> u64 {
        self.ctrl.iter().map(|c| c.last_end).max().unwrap_or(0)
    }

    pub fn fence(&mut self, nodes: u64) {
        self.advance_cpu(nodes);
        self.t_fe = self.t_fe.max(self.drained()) + self.fence_overhead;
        for c in &mut self.ctrl {
            c.queue.clear();
        }
    }

    pub fn finish(&mut self, nodes: u64) -> TimingSummary {
        self.advance_cpu(nodes);
        let mut stall = BTreeMap::new();
        let mut busy = BTreeMap::new();
        for c in Controller::ALL {
            stall.insert(c.name().to_string(), self.ctrl[idx(c)].stall);
            busy.insert(c.name().to_string(), self.ctrl[idx(c)].busy);
        }
        TimingSummary {
            total_cycles: self.t_fe.max(self.drained()),
            cpu_cycles: nodes * self.cpu_node_cost,
            stall_cycles: stall,
            busy_cycles: busy,
            queue_stall_cycles: self.queue_stall,
            events: self.events.take(),
        }
    }
}

pub struct TimingSummary {
    pub total_cycles: u64,
    pub cpu_cycles: u64,
    pub stall_cycles: BTreeMap<String, u64>,
    pub busy_cycles: BTreeMap<String, u64>,
    pub queue_stall_cycles: u64,
    pub events: Option<Vec<Event>>,
}

/// A pair of conflicting instructions whose service intervals overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceViolation {
    pub earlier: usize,
    pub later: usize,
    pub row: u32,
}

/// Replays an event log in dispatch order and checks that no instruction
/// started before every earlier conflicting instruction on a shared row had
/// finished (read-after-write, write-after-read, write-after-write).
pub fn check_trace(events: &[Event]) -> Result<(), TraceViolation> {
    let rows = events.iter().flat_map(|e| e.rows.iter().map(|r| r.hi)).max().unwrap_or(0) as usize;
    // (end cycle, event index) of the latest-finishing writer / reader per row.
    let mut writer: Vec<Option<(u64, usize)>> = vec![None; rows];
    let mut reader: Vec<Option<(u64, usize)>> = vec![None; rows];
    for (j, e) in events.iter().enumerate() {
        for s in &e.rows {
            for r in s.lo..s.hi {
                let mut deps = vec![writer[r as usize]];
                if s.write {
                    deps.push(reader[r as usize]);
                }
                for (end, i) in deps.into_iter().flatten() {
                    if e.start_cycle < end {
                        return Err(TraceViolation { earlier: i, later: j, row: r });
                    }
                }
            }
        }
        for s in &e.rows {
            let table = if s.write { &mut writer } else { &mut reader };
            for r in s.lo..s.hi {
                let slot = &mut table[r as usize];
                if slot.is_none_or(|(end, _)| e.end_cycle > end) {
                    *slot = Some((e.end_cycle, j));
                }
            }
        }
    }
    Ok(())
}

//! Summaries rebuilt from a search trace alone.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::search::IterationStats;
use crate::trace::{EventKind, TraceEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub calls: u64,
    pub best_latency: u64,
    pub speedup: f64,
}

/// One accepted rewrite on the path to the best kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub candidate: String,
    pub iteration: usize,
    pub menu_option: String,
    pub latency: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub start_latency: Option<u64>,
    pub best_latency: Option<u64>,
    pub best_candidate: Option<String>,
    pub speedup: Option<f64>,
    pub total_calls: u64,
    pub calls_by_phase: BTreeMap<String, u64>,
    pub iterations: Vec<IterationStats>,
    pub schedule: Vec<StepSummary>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed {kind} event in iteration {iteration}: {what}")]
pub struct ReportError {
    pub kind: String,
    pub iteration: usize,
    pub what: String,
}

struct Accepted {
    parent: Option<String>,
    iteration: usize,
    menu_option: String,
    latency: u64,
}

impl Report {
    pub fn from_trace(events: &[TraceEvent]) -> Result<Report, ReportError> {
        let bad =
            |e: &TraceEvent, what: &str| ReportError { kind: format!("{:?}", e.kind), iteration: e.iteration, what: what.to_string() };
        let mut r = Report::default();
        let mut accepted: HashMap<String, Accepted> = HashMap::new();
        for e in events {
            match e.kind {
                EventKind::Beam => {
                    let stats: IterationStats = serde_json::from_value(e.payload["stats"].clone()).map_err(|_| bad(e, "stats"))?;
                    let best = e.payload["best"]["id"].as_str().ok_or_else(|| bad(e, "best"))?;
                    r.start_latency.get_or_insert(stats.best_latency);
                    r.best_latency = Some(stats.best_latency);
                    r.best_candidate = Some(best.to_string());
                    r.total_calls = stats.cumulative_calls;
                    if stats.phase != "start" {
                        *r.calls_by_phase.entry(stats.phase.clone()).or_default() += stats.plan_calls + stats.code_calls;
                    }
                    r.iterations.push(stats);
                }
                EventKind::Verdict if e.payload["accepted"].as_bool() == Some(true) => {
                    let id = e.ids.candidate.clone().ok_or_else(|| bad(e, "candidate id"))?;
                    let latency = e.payload["latency"].as_u64().ok_or_else(|| bad(e, "latency"))?;
                    accepted.insert(
                        id,
                        Accepted {
                            parent: e.payload["parent"].as_str().map(String::from),
                            iteration: e.iteration,
                            menu_option: e.payload["menu_option"].as_str().unwrap_or_default().to_string(),
                            latency,
                        },
                    );
                }
                _ => {}
            }
        }
        if let (Some(s), Some(b)) = (r.start_latency, r.best_latency) {
            r.speedup = Some(s as f64 / b as f64);
            r.curve = r
                .iterations
                .iter()
                .map(|i| CurvePoint { calls: i.cumulative_calls, best_latency: i.best_latency, speedup: s as f64 / i.best_latency as f64 })
                .collect();
        }
        let mut cur = r.best_candidate.clone();
        while let Some(id) = cur {
            let Some(a) = accepted.get(&id) else { break };
            if a.parent.is_none() {
                break;
            }
            r.schedule.push(StepSummary {
                candidate: id.clone(),
                iteration: a.iteration,
                menu_option: a.menu_option.clone(),
                latency: a.latency,
            });
            cur = a.parent.clone();
        }
        r.schedule.reverse();
        Ok(r)
    }

    /// Best latency reached within `budget` calls.
    pub fn best_within(&self, budget: u64) -> Option<u64> {
        self.curve.iter().take_while(|p| p.calls <= budget).last().map(|p| p.best_latency)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoPoint {
    pub calls: u64,
    pub full: u64,
    pub reuse: u64,
}

/// Best latency of each run at every budget either run passes through, up to
/// the smaller of the two total budgets.
pub fn iso_budget(full: &Report, reuse: &Report) -> Vec<IsoPoint> {
    let cap = full.total_calls.min(reuse.total_calls);
    let mut budgets: Vec<u64> = full.curve.iter().chain(&reuse.curve).map(|p| p.calls).filter(|&c| c <= cap).collect();
    budgets.sort_unstable();
    budgets.dedup();
    budgets
        .into_iter()
        .filter_map(|calls| Some(IsoPoint { calls, full: full.best_within(calls)?, reuse: reuse.best_within(calls)? }))
        .collect()
}

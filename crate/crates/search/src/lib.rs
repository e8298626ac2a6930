//! LLM-guided beam search over accelerator kernels.

pub mod config;
pub mod llm;
pub mod prompts;
pub mod report;
pub mod schedule;
pub mod search;
pub mod trace;

pub use config::{Ablations, BeamParams, SearchConfig};
pub use report::{iso_budget, IsoPoint, Report};
pub use schedule::{Schedule, ScheduleStep};
pub use search::{record_schedule, run_reuse_search, run_search, Candidate, Evaluator, IterationStats, SearchError, SearchResult};
pub use trace::{read_jsonl, write_jsonl, TraceEvent};

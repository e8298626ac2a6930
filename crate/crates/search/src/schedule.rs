use serde::{Deserialize, Serialize};
use tensopt_core::verify::Fingerprint;

/// One applied optimization and the latency it took the code from and to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub menu_option: String,
    pub plan_text: String,
    pub latency_before: u64,
    pub latency_after: u64,
}

/// The sequence of plans leading from the start kernel to the best one found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub fingerprint: Fingerprint,
    pub steps: Vec<ScheduleStep>,
}

impl Schedule {
    /// Checks that every step improves and starts where the previous ended.
    pub fn validate(&self) -> Result<(), String> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.latency_after >= s.latency_before {
                return Err(format!("step {} does not lower latency ({} -> {})", i + 1, s.latency_before, s.latency_after));
            }
            if let Some(next) = self.steps.get(i + 1) {
                if next.latency_before != s.latency_after {
                    return Err(format!(
                        "step {} starts at {} but step {} ended at {}",
                        i + 2,
                        next.latency_before,
                        i + 1,
                        s.latency_after
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Schedule, String> {
        let s: Schedule = serde_json::from_str(text).map_err(|e| e.to_string())?;
        s.validate()?;
        Ok(s)
    }
}

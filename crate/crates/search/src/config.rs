use serde::{Deserialize, Serialize};
use tensopt_core::verify::CheckOptions;

use crate::prompts::{MenuConfig, PromptAssets};

/// Switches that remove one prompt section or search behavior each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    pub include_isa: bool,
    pub include_menu: bool,
    pub include_feedback: bool,
    pub enable_dropout: bool,
    /// When off, every request goes to the first backend.
    pub enable_ensemble: bool,
}

impl Default for Ablations {
    fn default() -> Self {
        Ablations { include_isa: true, include_menu: true, include_feedback: true, enable_dropout: true, enable_ensemble: true }
    }
}

/// Beam width and sample counts of one search phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamParams {
    pub beam_width: usize,
    pub plans_per_element: usize,
    pub codes_per_plan: usize,
}

impl BeamParams {
    /// Parameters of the constrained phase of schedule reuse.
    pub const REUSE: BeamParams = BeamParams { beam_width: 2, plans_per_element: 2, codes_per_plan: 2 };

    /// Most LLM calls one iteration can issue.
    pub fn max_calls_per_iteration(&self) -> usize {
        let plans = self.beam_width * self.plans_per_element;
        plans + plans * self.codes_per_plan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub plans_per_element: usize,
    pub codes_per_plan: usize,
    pub iterations: usize,
    pub dropout_prob: f64,
    pub menu: MenuConfig,
    pub ablations: Ablations,
    pub seed: u64,
    /// Correctness filter and latency measurement for every candidate.
    pub check: CheckOptions,
    /// Show the recorded plan text next to the constrained option during reuse.
    pub reuse_hint: bool,
    #[serde(skip)]
    pub prompts: PromptAssets,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 6,
            plans_per_element: 6,
            codes_per_plan: 2,
            iterations: 15,
            dropout_prob: 0.7,
            menu: MenuConfig::gemm(),
            ablations: Ablations::default(),
            seed: 0,
            check: CheckOptions::default(),
            reuse_hint: true,
            prompts: PromptAssets::default(),
        }
    }
}

impl SearchConfig {
    pub fn params(&self) -> BeamParams {
        BeamParams { beam_width: self.beam_width, plans_per_element: self.plans_per_element, codes_per_plan: self.codes_per_plan }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.beam_width == 0 || self.plans_per_element == 0 || self.codes_per_plan == 0 {
            return Err("beam_width, plans_per_element and codes_per_plan must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(format!("dropout_prob {} is outside [0, 1]", self.dropout_prob));
        }
        self.menu.validate()
    }
}

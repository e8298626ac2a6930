//! Run configuration files (TOML). Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use tensopt_core::sim::{AcceleratorConfig, ElemKind, TimingParams};
use tensopt_core::verify::{gemm_kernel, WorkloadSpec};
use tensopt_search::llm::{Backend, ModelSpec, OpenAiBackend, ScriptManifest, ScriptedBackend};
use tensopt_search::prompts::MenuConfig;
use tensopt_search::SearchConfig;

use crate::Failure;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceleratorSection {
    /// `int8_16x16` (default) or `fp32_4x4`; other keys override it.
    pub preset: Option<String>,
    pub dim: Option<usize>,
    pub elem: Option<ElemKind>,
    pub acc: Option<ElemKind>,
    pub spad_kb: Option<usize>,
    pub acc_kb: Option<usize>,
    pub timing: Option<TimingParams>,
}

impl AcceleratorSection {
    pub fn resolve(&self) -> Result<AcceleratorConfig, String> {
        let mut cfg = match self.preset.as_deref().unwrap_or("int8_16x16") {
            "int8_16x16" => AcceleratorConfig::int8_16x16(),
            "fp32_4x4" => AcceleratorConfig::fp32_4x4(),
            other => return Err(format!("unknown accelerator preset '{other}'")),
        };
        cfg.dim = self.dim.unwrap_or(cfg.dim);
        cfg.elem = self.elem.unwrap_or(cfg.elem);
        cfg.acc = self.acc.unwrap_or(cfg.acc);
        cfg.spad_kb = self.spad_kb.unwrap_or(cfg.spad_kb);
        cfg.acc_kb = self.acc_kb.unwrap_or(cfg.acc_kb);
        cfg.timing = self.timing.unwrap_or(cfg.timing);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct WorkloadSection {
    /// Start kernel; GEMM workloads default to the unoptimized template.
    pub start: Option<PathBuf>,
    #[serde(flatten)]
    pub spec: WorkloadSpec,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsSection {
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    accelerator: AcceleratorSection,
    workload: Option<WorkloadSection>,
    #[serde(default)]
    search: Option<toml::Table>,
    #[serde(default)]
    backends: BackendsSection,
    output_dir: Option<PathBuf>,
}

/// A loaded and checked config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dir: PathBuf,
    pub accelerator: AcceleratorConfig,
    pub workload: Option<WorkloadSection>,
    pub search: SearchConfig,
    pub backends: BackendsSection,
    pub output_dir: PathBuf,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> Failure {
    Failure::usage(format!("{}: {msg}", path.display()))
}

/// The `menu` key takes `"gemm"`, `"fine_grained"` or an inline table.
fn search_config(mut table: toml::Table) -> Result<SearchConfig, String> {
    if let Some(toml::Value::String(name)) = table.get("menu") {
        let menu = match name.as_str() {
            "gemm" => MenuConfig::gemm(),
            "fine_grained" => MenuConfig::fine_grained(),
            other => return Err(format!("unknown menu '{other}'")),
        };
        table.insert("menu".into(), toml::Value::try_from(menu).map_err(|e| e.to_string())?);
    }
    let sc: SearchConfig = table.try_into().map_err(|e: toml::de::Error| e.to_string())?;
    sc.validate()?;
    Ok(sc)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(path, e))?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| bad(path, e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let accelerator = raw.accelerator.resolve().map_err(|e| bad(path, format!("[accelerator] {e}")))?;
        let search = search_config(raw.search.unwrap_or_default()).map_err(|e| bad(path, format!("[search] {e}")))?;
        if let Some(w) = &raw.workload {
            w.spec.validate().map_err(|e| bad(path, format!("[workload] {e}")))?;
        }
        for m in &raw.backends.models {
            m.validate().map_err(|e| bad(path, format!("[backends] {e}")))?;
        }
        let output_dir = dir.join(raw.output_dir.unwrap_or_else(|| PathBuf::from("out")));
        Ok(RunConfig { dir, accelerator, workload: raw.workload, search, backends: raw.backends, output_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.dir.join(p)
    }

    pub fn workload(&self) -> Result<&WorkloadSection, Failure> {
        self.workload.as_ref().ok_or_else(|| Failure::usage("config has no [workload] section"))
    }

    /// Source of the start kernel.
    pub fn start_code(&self) -> Result<String, Failure> {
        let w = self.workload()?;
        match (&w.start, &w.spec) {
            (Some(p), _) => {
                let p = self.resolve(p);
                std::fs::read_to_string(&p).map_err(|e| bad(&p, e))
            }
            (None, WorkloadSpec::Gemm { m, k, n, .. }) => {
                gemm_kernel(*m, *k, *n, &self.accelerator).map_err(|e| Failure::usage(format!("[workload] {e}")))
            }
            (None, _) => Err(Failure::usage("[workload] start is required for this workload kind")),
        }
    }

    /// Exactly one of a script manifest or a model list. Live models get at
    /// most `jobs` requests in flight.
    pub fn backends(&self, jobs: usize) -> Result<Vec<Arc<dyn Backend>>, Failure> {
        let b = &self.backends;
        match (&b.script, b.models.is_empty()) {
            (Some(script), true) => {
                let path = self.resolve(script);
                let manifest = ScriptManifest::load(&path).map_err(|e| Failure::usage(e.to_string()))?;
                Ok(vec![Arc::new(ScriptedBackend::new("script", &manifest))])
            }
            (None, false) => b
                .models
                .iter()
                .map(|m| {
                    let mut m = m.clone();
                    m.max_in_flight = m.max_in_flight.min(jobs.max(1));
                    OpenAiBackend::from_env(m).map(|o| Arc::new(o) as Arc<dyn Backend>).map_err(|e| Failure::usage(e.to_string()))
                })
                .collect(),
            _ => Err(Failure::usage("[backends] needs exactly one of `script` or `models`")),
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::dsl::ScalarType;

/// Element types the accelerator and DRAM arrays can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElemKind {
    Int8,
    Int32,
    Float32,
}

impl ElemKind {
    pub fn bytes(self) -> usize {
        match self {
            ElemKind::Int8 => 1,
            ElemKind::Int32 | ElemKind::Float32 => 4,
        }
    }

    pub fn is_float(self) -> bool {
        self == ElemKind::Float32
    }
}

/// Cost-model knobs for the timed simulator. All values are in cycles except
/// `bus_bytes_per_cycle` and `queue_depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingParams {
    pub cpu_node_cost: u64,
    pub issue_cost: u64,
    pub config_cost: u64,
    pub dma_startup: u64,
    pub bus_bytes_per_cycle: u64,
    /// Pipeline fill per preload; `None` means "equal to DIM".
    pub compute_fill: Option<u64>,
    pub queue_depth: usize,
    pub fence_drain_overhead: u64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            cpu_node_cost: 1,
            issue_cost: 2,
            config_cost: 2,
            dma_startup: 20,
            bus_bytes_per_cycle: 16,
            compute_fill: None,
            queue_depth: 16,
            fence_drain_overhead: 10,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            ("cpu_node_cost", self.cpu_node_cost),
            ("issue_cost", self.issue_cost),
            ("config_cost", self.config_cost),
            ("dma_startup", self.dma_startup),
            ("bus_bytes_per_cycle", self.bus_bytes_per_cycle),
            ("compute_fill", self.compute_fill.unwrap_or(1)),
            ("queue_depth", self.queue_depth as u64),
            ("fence_drain_overhead", self.fence_drain_overhead),
        ];
        for (name, v) in checks {
            if v == 0 {
                return Err(format!("timing parameter {name} must be positive"));
            }
        }
        Ok(())
    }
}

/// A parameterized Gemmini-style accelerator instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceleratorConfig {
    pub dim: usize,
    pub elem: ElemKind,
    pub acc: ElemKind,
    pub spad_kb: usize,
    pub acc_kb: usize,
    #[serde(default)]
    pub timing: TimingParams,
}

impl AcceleratorConfig {
    /// 16x16 int8 array with int32 accumulation, 256 KB scratchpad, 64 KB accumulator.
    pub fn int8_16x16() -> Self {
        AcceleratorConfig { dim: 16, elem: ElemKind::Int8, acc: ElemKind::Int32, spad_kb: 256, acc_kb: 64, timing: TimingParams::default() }
    }

    /// 4x4 fp32 array, 256 KB scratchpad, 64 KB accumulator.
    pub fn fp32_4x4() -> Self {
        AcceleratorConfig {
            dim: 4,
            elem: ElemKind::Float32,
            acc: ElemKind::Float32,
            spad_kb: 256,
            acc_kb: 64,
            timing: TimingParams::default(),
        }
    }

    pub fn spad_rows(&self) -> usize {
        self.spad_kb * 1024 / (self.dim * self.elem.bytes())
    }

    pub fn acc_rows(&self) -> usize {
        self.acc_kb * 1024 / (self.dim * self.acc.bytes())
    }

    pub fn compute_fill(&self) -> u64 {
        self.timing.compute_fill.unwrap_or(self.dim as u64)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 {
            return Err("dim must be positive".into());
        }
        match (self.elem, self.acc) {
            (ElemKind::Int8, ElemKind::Int32) | (ElemKind::Float32, ElemKind::Float32) => {}
            (e, a) => return Err(format!("unsupported element/accumulator pair {e:?}/{a:?}")),
        }
        for (what, kb, bytes) in [("scratchpad", self.spad_kb, self.elem.bytes()), ("accumulator", self.acc_kb, self.acc.bytes())] {
            let row_bytes = self.dim * bytes;
            if kb == 0 || (kb * 1024) % row_bytes != 0 {
                return Err(format!("{what} capacity {kb} KB is not a positive whole number of {row_bytes}-byte rows"));
            }
        }
        self.timing.validate()
    }

    /// One-line description used in prompts, e.g. "16x16 int8 systolic array".
    pub fn summary(&self) -> String {
        let ty = match self.elem {
            ElemKind::Int8 => "int8 (int32 accumulation)",
            ElemKind::Int32 => "int32",
            ElemKind::Float32 => "fp32",
        };
        format!(
            "The accelerator is a {d}x{d} {ty} systolic array (DIM = {d}) with a {s} KB scratchpad and a {a} KB accumulator.",
            d = self.dim,
            s = self.spad_kb,
            a = self.acc_kb
        )
    }

    /// Resolves a declared scalar type to the storage kind it occupies in DRAM.
    pub fn storage_kind(&self, ty: ScalarType) -> Option<ElemKind> {
        Some(match ty {
            ScalarType::Int8 | ScalarType::Uint8 | ScalarType::Char | ScalarType::Bool => ElemKind::Int8,
            ScalarType::Int32 | ScalarType::Uint32 | ScalarType::Int | ScalarType::Unsigned => ElemKind::Int32,
            ScalarType::Float => ElemKind::Float32,
            ScalarType::ElemT => self.elem,
            ScalarType::AccT => self.acc,
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_instances() {
        let a = AcceleratorConfig::int8_16x16();
        assert_eq!(a.spad_rows(), 16384);
        assert_eq!(a.acc_rows(), 1024);
        assert!(a.validate().is_ok());
        let b = AcceleratorConfig::fp32_4x4();
        assert_eq!(b.spad_rows(), 16384);
        assert_eq!(b.acc_rows(), 4096);
        assert!(b.validate().is_ok());
    }

    #[test]
    fn rejects_fractional_rows() {
        let mut c = AcceleratorConfig::int8_16x16();
        c.dim = 48;
        c.spad_kb = 1;
        assert!(c.validate().is_err());
        let mut t = AcceleratorConfig::int8_16x16();
        t.timing.dma_startup = 0;
        assert!(t.validate().is_err());
    }
}

//! The closed table of callable names: accelerator instructions, CPU helper
//! routines and the hardware-FSM calls that only appear in reference listings.

/// How an argument position is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    /// DRAM address: an array expression, or the literal 0 (zero fill).
    Dram,
    /// Scratchpad/accumulator address.
    Local,
    /// Local address that may be `0xffffffff` ("none").
    LocalOrNone,
    /// Row/column counts, strides and ids.
    Int,
    /// Scale factor.
    Scale,
    /// Enumerated or boolean configuration value.
    Flag,
    /// Array operand of a CPU helper.
    Array,
    /// Unchecked argument of a non-executable call.
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntrinsicKind {
    ConfigEx,
    ConfigLd,
    Mvin(u8),
    Preload,
    ComputePreloaded,
    ComputeAccumulated,
    ConfigSt,
    Mvout,
    Fence,
    NegateMatrix,
    AddMatrix,
    /// Hardware-FSM call kept only so reference listings parse.
    HardwareFsm,
}

#[derive(Debug, Clone, Copy)]
pub struct Intrinsic {
    pub name: &'static str,
    pub kind: IntrinsicKind,
    pub args: &'static [ArgKind],
    /// Number of trailing arguments that may be omitted.
    pub optional: usize,
}

impl Intrinsic {
    pub fn min_args(&self) -> usize {
        self.args.len() - self.optional
    }

    pub fn max_args(&self) -> usize {
        self.args.len()
    }

    pub fn executable(&self) -> bool {
        self.kind != IntrinsicKind::HardwareFsm
    }
}

use ArgKind::*;

const MVIN_ARGS: &[ArgKind] = &[Dram, Local, Int, Int];
const COMPUTE_ARGS: &[ArgKind] = &[Local, LocalOrNone, Int, Int, Int, Int];
const ANY23: &[ArgKind] = &[Any; 23];

pub const INTRINSICS: &[Intrinsic] = &[
    Intrinsic { name: "config_ex", kind: IntrinsicKind::ConfigEx, args: &[Flag, Flag, Int, Flag, Flag], optional: 0 },
    Intrinsic { name: "config_ld", kind: IntrinsicKind::ConfigLd, args: &[Int, Scale, Int, Int], optional: 0 },
    Intrinsic { name: "mvin", kind: IntrinsicKind::Mvin(0), args: MVIN_ARGS, optional: 0 },
    Intrinsic { name: "mvin2", kind: IntrinsicKind::Mvin(1), args: MVIN_ARGS, optional: 0 },
    Intrinsic { name: "mvin3", kind: IntrinsicKind::Mvin(2), args: MVIN_ARGS, optional: 0 },
    Intrinsic { name: "preload", kind: IntrinsicKind::Preload, args: &[LocalOrNone, LocalOrNone, Int, Int, Int, Int], optional: 0 },
    Intrinsic { name: "compute_preloaded", kind: IntrinsicKind::ComputePreloaded, args: COMPUTE_ARGS, optional: 0 },
    Intrinsic { name: "compute_accumulated", kind: IntrinsicKind::ComputeAccumulated, args: COMPUTE_ARGS, optional: 0 },
    Intrinsic { name: "config_st", kind: IntrinsicKind::ConfigSt, args: &[Int, Scale], optional: 1 },
    Intrinsic { name: "mvout", kind: IntrinsicKind::Mvout, args: &[Dram, Local, Int, Int], optional: 0 },
    Intrinsic { name: "fence", kind: IntrinsicKind::Fence, args: &[], optional: 0 },
    Intrinsic { name: "negate_matrix", kind: IntrinsicKind::NegateMatrix, args: &[Array, Array, Int, Int], optional: 0 },
    Intrinsic { name: "add_matrix", kind: IntrinsicKind::AddMatrix, args: &[Array, Array, Array, Int, Int], optional: 0 },
    Intrinsic { name: "gemmini_extended_config_ex", kind: IntrinsicKind::HardwareFsm, args: &[Any; 6], optional: 0 },
    Intrinsic { name: "gemmini_extended3_config_ld", kind: IntrinsicKind::HardwareFsm, args: &[Any; 4], optional: 0 },
    Intrinsic { name: "gemmini_extended_config_st", kind: IntrinsicKind::HardwareFsm, args: &[Any; 3], optional: 0 },
    Intrinsic { name: "gemmini_loop_ws", kind: IntrinsicKind::HardwareFsm, args: ANY23, optional: 0 },
    Intrinsic { name: "gemmini_fence", kind: IntrinsicKind::HardwareFsm, args: &[], optional: 0 },
];

pub fn lookup(name: &str) -> Option<&'static Intrinsic> {
    INTRINSICS.iter().find(|i| i.name == name)
}

/// Named integer constants every kernel may reference.
pub const BUILTIN_CONSTANTS: &[(&str, i64)] = &[
    ("OUTPUT_STATIONARY", 0),
    ("WEIGHT_STATIONARY", 1),
    ("NO_ACTIVATION", 0),
    ("RELU", 1),
    ("LAYERNORM", 2),
    ("IGELU", 3),
    ("SOFTMAX", 4),
    ("false", 0),
    ("true", 1),
    ("NULL", 0),
];

pub fn builtin_constant(name: &str) -> Option<i64> {
    BUILTIN_CONSTANTS.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
}

/// Attributes that may follow a declarator and are ignored.
pub const IGNORED_ATTRIBUTES: &[&str] = &["row_align", "row_align_acc"];

//! Reference oracles and the randomized equivalence harness used as the
//! correctness filter.

mod check;
mod oracle;
mod template;
mod workload;

pub use check::{
    check_equivalence, check_simulator, simulator_for, trial_rng, values_match, CheckOptions, Mismatch, Phase, Tolerance, Verdict,
    ABSOLUTE_TOLERANCE, RELATIVE_TOLERANCE,
};
pub use oracle::{reference_conv, reference_gemm, reference_tinympc_forward, ConvSpec, ShapeError, NINPUTS, NSTATES};
pub use template::gemm_kernel;
pub use workload::{Expected, Fingerprint, ParamSpec, Role, WorkloadSpec};

//! Workload descriptions: kernel parameter layout, random inputs and the
//! expected outputs computed by the oracles.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{f32_data, reference_conv, reference_gemm, reference_tinympc_forward, ConvSpec, ShapeError, NINPUTS, NSTATES};
use crate::dsl::Bindings;
use crate::sim::{ArrayData, Data, ElemKind};

fn default_elem() -> ElemKind {
    ElemKind::Int8
}

/// What a kernel computes, and at which sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSpec {
    /// `C[m][n] = A[m][k] × B[k][n]`.
    Gemm {
        m: usize,
        k: usize,
        n: usize,
        #[serde(default = "default_elem")]
        elem: ElemKind,
    },
    /// `output = conv(input, weights)` with the layouts of [`ConvSpec`].
    Conv {
        #[serde(flatten)]
        conv: ConvSpec,
        #[serde(default = "default_elem")]
        elem: ElemKind,
    },
    /// TinyMPC forward pass over `nhorizon` steps, fp32.
    TinympcFwd { nhorizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Output,
    /// Read by the kernel and partly overwritten with intermediate results.
    InOut,
}

/// One kernel parameter a workload expects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub dims: Vec<usize>,
    pub kind: ElemKind,
    pub role: Role,
}

/// Reference values for one parameter; only `compare` (flat indices) is checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub name: &'static str,
    pub data: ArrayData,
    pub compare: Range<usize>,
}

/// Sizes and element type, used to judge whether a recorded schedule fits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub kind: String,
    pub dims: Vec<usize>,
    pub elem: ElemKind,
}

impl Fingerprint {
    /// Number of dimension values the two fingerprints have in common
    /// (as a multiset).
    pub fn shared_dims(&self, other: &Fingerprint) -> usize {
        let mut rest = other.dims.clone();
        let mut n = 0;
        for d in &self.dims {
            if let Some(i) = rest.iter().position(|x| x == d) {
                rest.swap_remove(i);
                n += 1;
            }
        }
        n
    }

    /// Same kind and element type, and at least two shared dimensions or the
    /// same aspect ratio.
    pub fn similar(&self, other: &Fingerprint) -> bool {
        if self.kind != other.kind || self.elem != other.elem {
            return false;
        }
        let same_ratio = self.dims.len() == other.dims.len()
            && self.dims.len() >= 2
            && self.dims.windows(2).zip(other.dims.windows(2)).all(|(a, b)| a[0] * b[1] == a[1] * b[0]);
        self.shared_dims(other) >= 2 || same_ratio
    }
}

fn acc_of(elem: ElemKind) -> ElemKind {
    if elem.is_float() {
        ElemKind::Float32
    } else {
        ElemKind::Int32
    }
}

impl WorkloadSpec {
    pub fn gemm(m: usize, k: usize, n: usize) -> WorkloadSpec {
        WorkloadSpec::Gemm { m, k, n, elem: ElemKind::Int8 }
    }

    pub fn tinympc(nhorizon: usize) -> WorkloadSpec {
        WorkloadSpec::TinympcFwd { nhorizon }
    }

    pub fn elem(&self) -> ElemKind {
        match self {
            WorkloadSpec::Gemm { elem, .. } | WorkloadSpec::Conv { elem, .. } => *elem,
            WorkloadSpec::TinympcFwd { .. } => ElemKind::Float32,
        }
    }

    pub fn acc(&self) -> ElemKind {
        acc_of(self.elem())
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        match self {
            WorkloadSpec::Gemm { m, k, n, elem } => {
                if *m == 0 || *k == 0 || *n == 0 {
                    return Err(ShapeError("GEMM dimensions must be positive".into()));
                }
                if *elem == ElemKind::Int32 {
                    return Err(ShapeError("GEMM elements must be int8 or float32".into()));
                }
                Ok(())
            }
            WorkloadSpec::Conv { conv, elem } => {
                if *elem == ElemKind::Int32 {
                    return Err(ShapeError("convolution elements must be int8 or float32".into()));
                }
                conv.validate()
            }
            WorkloadSpec::TinympcFwd { nhorizon } => {
                if *nhorizon == 0 {
                    return Err(ShapeError("nhorizon must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Constants the kernel source may refer to by name.
    pub fn bindings(&self) -> Bindings {
        match self {
            WorkloadSpec::TinympcFwd { nhorizon } => Bindings::from([
                ("NHORIZON".to_string(), *nhorizon as i64),
                ("NSTATES".to_string(), NSTATES as i64),
                ("NINPUTS".to_string(), NINPUTS as i64),
            ]),
            _ => Bindings::new(),
        }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let (kind, dims) = match self {
            WorkloadSpec::Gemm { m, k, n, .. } => ("gemm", vec![*m, *k, *n]),
            WorkloadSpec::Conv { conv: c, .. } => ("conv", vec![c.batch, c.in_ch, c.out_ch, c.spatial, c.kernel, c.stride, c.padding]),
            WorkloadSpec::TinympcFwd { nhorizon } => ("tinympc_fwd", vec![*nhorizon, NSTATES, NINPUTS]),
        };
        Fingerprint { kind: kind.into(), dims, elem: self.elem() }
    }

    /// Parameters the kernel under test must declare, by name.
    pub fn params(&self) -> Vec<ParamSpec> {
        let p = |name, dims: &[usize], kind, role| ParamSpec { name, dims: dims.to_vec(), kind, role };
        match self {
            WorkloadSpec::Gemm { m, k, n, elem } => {
                vec![p("A", &[*m, *k], *elem, Role::Input), p("B", &[*k, *n], *elem, Role::Input), p("C", &[*m, *n], *elem, Role::Output)]
            }
            WorkloadSpec::Conv { conv, elem } => vec![
                p("input", &conv.input_dims(), *elem, Role::Input),
                p("weights", &conv.weight_dims(), *elem, Role::Input),
                p("output", &conv.output_dims(), *elem, Role::Output),
            ],
            WorkloadSpec::TinympcFwd { nhorizon: nh } => {
                let f = ElemKind::Float32;
                vec![
                    p("Adyn", &[NSTATES, NSTATES], f, Role::Input),
                    p("Bdyn", &[NSTATES, NINPUTS], f, Role::Input),
                    p("Kinf", &[NINPUTS, NSTATES], f, Role::Input),
                    p("x", &[nh + 1, NSTATES, 1], f, Role::InOut),
                    p("d", &[*nh, NINPUTS, 1], f, Role::Input),
                    p("u", &[*nh, NINPUTS, 1], f, Role::Output),
                ]
            }
        }
    }

    /// Fills every parameter with random values: int8 uniform over
    /// [-128, 127], float32 uniform over [-1, 1]. Outputs are filled too so
    /// that elements a kernel forgets to write are unlikely to match.
    pub fn random_inputs(&self, rng: &mut impl Rng) -> BTreeMap<String, ArrayData> {
        self.params()
            .into_iter()
            .map(|p| {
                let len = p.dims.iter().product();
                let data = match p.kind {
                    ElemKind::Int8 => Data::I8((0..len).map(|_| rng.gen_range(-128..=127)).collect()),
                    ElemKind::Int32 => Data::I32((0..len).map(|_| rng.gen_range(-128..=127)).collect()),
                    ElemKind::Float32 => Data::F32((0..len).map(|_| rng.gen_range(-1.0f32..=1.0)).collect()),
                };
                (p.name.to_string(), ArrayData { dims: p.dims, data })
            })
            .collect()
    }

    /// Oracle results for the parameters that are checked.
    pub fn expected(&self, inputs: &BTreeMap<String, ArrayData>) -> Result<Vec<Expected>, ShapeError> {
        let get = |name: &str| inputs.get(name).ok_or_else(|| ShapeError(format!("missing input '{name}'")));
        match self {
            WorkloadSpec::Gemm { .. } => {
                let c = reference_gemm(get("A")?, get("B")?, None)?;
                let compare = 0..c.len();
                Ok(vec![Expected { name: "C", data: c, compare }])
            }
            WorkloadSpec::Conv { conv, .. } => {
                let o = reference_conv(get("input")?, get("weights")?, None, conv)?;
                let compare = 0..o.len();
                Ok(vec![Expected { name: "output", data: o, compare }])
            }
            WorkloadSpec::TinympcFwd { nhorizon: nh } => {
                let f = |name: &str| -> Result<&[f32], ShapeError> {
                    f32_data(get(name)?).ok_or_else(|| ShapeError(format!("'{name}' must be float")))
                };
                let (u, x) = reference_tinympc_forward(f("Adyn")?, f("Bdyn")?, f("Kinf")?, &f("x")?[..NSTATES], f("d")?, *nh)?;
                // x keeps its extra trailing row so shapes line up with the kernel.
                let mut xs = f("x")?.to_vec();
                xs[..nh * NSTATES].copy_from_slice(&x);
                Ok(vec![
                    Expected { name: "u", data: ArrayData { dims: vec![*nh, NINPUTS, 1], data: Data::F32(u) }, compare: 0..nh * NINPUTS },
                    Expected {
                        name: "x",
                        data: ArrayData { dims: vec![nh + 1, NSTATES, 1], data: Data::F32(xs) },
                        compare: NSTATES..nh * NSTATES,
                    },
                ])
            }
        }
    }
}

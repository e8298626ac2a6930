//! Plain reference implementations the simulator is checked against.
//!
//! The integer path accumulates in wrapping int32 and narrows to int8 by
//! round-half-even and saturation. The float path accumulates in f32 with the
//! reduction index innermost and ascending, adding any bias last.

use crate::sim::{ArrayData, Data};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("shape mismatch: {0}")]
pub struct ShapeError(pub String);

fn dims2(a: &ArrayData, what: &str) -> Result<(usize, usize), ShapeError> {
    match a.dims[..] {
        [r, c] => Ok((r, c)),
        _ => Err(ShapeError(format!("{what} must be 2-D, got {:?}", a.dims))),
    }
}

fn narrow_i8(v: i32) -> i8 {
    (v as f64).round_ties_even().clamp(-128.0, 127.0) as i8
}

/// `C = A × B (+ bias)`. Bias is either one row of `N` values broadcast over
/// the rows of `C`, or a full `M × N` matrix, in the accumulator type.
pub fn reference_gemm(a: &ArrayData, b: &ArrayData, bias: Option<&ArrayData>) -> Result<ArrayData, ShapeError> {
    let (m, k) = dims2(a, "A")?;
    let (k2, n) = dims2(b, "B")?;
    if k != k2 {
        return Err(ShapeError(format!("A is {m}x{k} but B is {k2}x{n}")));
    }
    let bias_at = |i: usize, j: usize| -> Option<usize> {
        let bias = bias?;
        Some(if bias.dims == [n] { j } else { i * n + j })
    };
    if let Some(bias) = bias {
        if bias.dims != [n] && bias.dims != [m, n] {
            return Err(ShapeError(format!("bias must be [{n}] or [{m}, {n}], got {:?}", bias.dims)));
        }
    }
    let data = match (&a.data, &b.data) {
        (Data::I8(av), Data::I8(bv)) => {
            let bias = match bias.map(|x| &x.data) {
                None => None,
                Some(Data::I32(v)) => Some(v),
                Some(_) => return Err(ShapeError("int8 GEMM bias must be int32".into())),
            };
            let mut c = vec![0i8; m * n];
            for i in 0..m {
                for j in 0..n {
                    let mut t: i32 = 0;
                    for kk in 0..k {
                        t = t.wrapping_add(av[i * k + kk] as i32 * bv[kk * n + j] as i32);
                    }
                    if let (Some(bv), Some(at)) = (bias, bias_at(i, j)) {
                        t = t.wrapping_add(bv[at]);
                    }
                    c[i * n + j] = narrow_i8(t);
                }
            }
            Data::I8(c)
        }
        (Data::F32(av), Data::F32(bv)) => {
            let bias = match bias.map(|x| &x.data) {
                None => None,
                Some(Data::F32(v)) => Some(v),
                Some(_) => return Err(ShapeError("float GEMM bias must be float".into())),
            };
            let mut c = vec![0f32; m * n];
            for i in 0..m {
                for j in 0..n {
                    let mut t = 0f32;
                    for kk in 0..k {
                        t += av[i * k + kk] * bv[kk * n + j];
                    }
                    if let (Some(bv), Some(at)) = (bias, bias_at(i, j)) {
                        t += bv[at];
                    }
                    c[i * n + j] = t;
                }
            }
            Data::F32(c)
        }
        _ => return Err(ShapeError("A and B must both be int8 or both be float".into())),
    };
    Ok(ArrayData { dims: vec![m, n], data })
}

/// Geometry of a square-kernel convolution over square images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvSpec {
    pub batch: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    /// Input height and width.
    pub spatial: usize,
    pub kernel: usize,
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
}

impl ConvSpec {
    pub fn out_spatial(&self) -> usize {
        (self.spatial + 2 * self.padding - self.kernel) / self.stride + 1
    }

    /// `[batch][spatial²][in_ch]`, pixels row-major.
    pub fn input_dims(&self) -> Vec<usize> {
        vec![self.batch, self.spatial * self.spatial, self.in_ch]
    }

    /// `[kernel²·in_ch][out_ch]`, rows ordered by (ky, kx, c).
    pub fn weight_dims(&self) -> Vec<usize> {
        vec![self.kernel * self.kernel * self.in_ch, self.out_ch]
    }

    pub fn output_dims(&self) -> Vec<usize> {
        let o = self.out_spatial();
        vec![self.batch, o * o, self.out_ch]
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        let ok = [self.batch, self.in_ch, self.out_ch, self.spatial, self.kernel, self.stride].iter().all(|&d| d > 0)
            && self.kernel <= self.spatial + 2 * self.padding;
        if ok {
            Ok(())
        } else {
            Err(ShapeError(format!("inconsistent convolution {self:?}")))
        }
    }
}

/// Direct convolution. Bias, when present, has one accumulator-typed value
/// per output channel.
pub fn reference_conv(input: &ArrayData, weights: &ArrayData, bias: Option<&ArrayData>, s: &ConvSpec) -> Result<ArrayData, ShapeError> {
    s.validate()?;
    if input.dims != s.input_dims() || weights.dims != s.weight_dims() {
        return Err(ShapeError(format!(
            "expected input {:?} and weights {:?}, got {:?} and {:?}",
            s.input_dims(),
            s.weight_dims(),
            input.dims,
            weights.dims
        )));
    }
    if bias.is_some_and(|b| b.dims != [s.out_ch]) {
        return Err(ShapeError(format!("bias must be [{}]", s.out_ch)));
    }
    let (w, o) = (s.spatial as isize, s.out_spatial());
    let out_len = s.batch * o * o * s.out_ch;
    let pixel = |b: usize, y: isize, x: isize, c: usize| -> Option<usize> {
        (y >= 0 && x >= 0 && y < w && x < w).then(|| ((b * s.spatial * s.spatial) + (y * w + x) as usize) * s.in_ch + c)
    };
    let taps = |b: usize, oy: usize, ox: usize, oc: usize| {
        let mut v = Vec::with_capacity(s.kernel * s.kernel * s.in_ch);
        for ky in 0..s.kernel {
            for kx in 0..s.kernel {
                let y = (oy * s.stride + ky) as isize - s.padding as isize;
                let x = (ox * s.stride + kx) as isize - s.padding as isize;
                for c in 0..s.in_ch {
                    if let Some(pi) = pixel(b, y, x, c) {
                        v.push((pi, ((ky * s.kernel + kx) * s.in_ch + c) * s.out_ch + oc));
                    }
                }
            }
        }
        v
    };
    let mut flat = 0;
    let data = match (&input.data, &weights.data) {
        (Data::I8(iv), Data::I8(wv)) => {
            let bias = match bias.map(|b| &b.data) {
                None => None,
                Some(Data::I32(v)) => Some(v),
                Some(_) => return Err(ShapeError("int8 convolution bias must be int32".into())),
            };
            let mut out = vec![0i8; out_len];
            for b in 0..s.batch {
                for oy in 0..o {
                    for ox in 0..o {
                        for oc in 0..s.out_ch {
                            let mut t: i32 = 0;
                            for (pi, wi) in taps(b, oy, ox, oc) {
                                t = t.wrapping_add(iv[pi] as i32 * wv[wi] as i32);
                            }
                            if let Some(bv) = bias {
                                t = t.wrapping_add(bv[oc]);
                            }
                            out[flat] = narrow_i8(t);
                            flat += 1;
                        }
                    }
                }
            }
            Data::I8(out)
        }
        (Data::F32(iv), Data::F32(wv)) => {
            let bias = match bias.map(|b| &b.data) {
                None => None,
                Some(Data::F32(v)) => Some(v),
                Some(_) => return Err(ShapeError("float convolution bias must be float".into())),
            };
            let mut out = vec![0f32; out_len];
            for b in 0..s.batch {
                for oy in 0..o {
                    for ox in 0..o {
                        for oc in 0..s.out_ch {
                            let mut t = 0f32;
                            for (pi, wi) in taps(b, oy, ox, oc) {
                                t += iv[pi] * wv[wi];
                            }
                            if let Some(bv) = bias {
                                t += bv[oc];
                            }
                            out[flat] = t;
                            flat += 1;
                        }
                    }
                }
            }
            Data::F32(out)
        }
        _ => return Err(ShapeError("input and weights must both be int8 or both be float".into())),
    };
    Ok(ArrayData { dims: s.output_dims(), data })
}

pub const NSTATES: usize = 12;
pub const NINPUTS: usize = 4;

/// Forward pass of the TinyMPC primal update:
/// `u[i] = -Kinf·x[i] - d[i]` and `x[i+1] = Adyn·x[i] + Bdyn·u[i]`.
///
/// Returns `(u, x)` with `u` of shape `[nh][4]` and `x` of shape `[nh][12]`,
/// where `x[0] = x0` and the state after the last control is not formed.
pub fn reference_tinympc_forward(
    adyn: &[f32],
    bdyn: &[f32],
    kinf: &[f32],
    x0: &[f32],
    d: &[f32],
    nh: usize,
) -> Result<(Vec<f32>, Vec<f32>), ShapeError> {
    let (s, c) = (NSTATES, NINPUTS);
    let want = [(adyn.len(), s * s, "Adyn"), (bdyn.len(), s * c, "Bdyn"), (kinf.len(), c * s, "Kinf")];
    for (got, need, name) in want.into_iter().chain([(x0.len(), s, "x0"), (d.len(), nh * c, "d")]) {
        if got != need {
            return Err(ShapeError(format!("{name} has {got} elements, expected {need}")));
        }
    }
    let matvec = |m: &[f32], rows: usize, cols: usize, v: &[f32]| -> Vec<f32> {
        (0..rows)
            .map(|r| {
                let mut t = 0f32;
                for k in 0..cols {
                    t += m[r * cols + k] * v[k];
                }
                t
            })
            .collect()
    };
    let mut u = vec![0f32; nh * c];
    let mut x = vec![0f32; nh * s];
    x[..s].copy_from_slice(x0);
    for i in 0..nh {
        let xi = x[i * s..(i + 1) * s].to_vec();
        let kx = matvec(kinf, c, s, &xi);
        for r in 0..c {
            u[i * c + r] = -kx[r] - d[i * c + r];
        }
        if i + 1 < nh {
            let ax = matvec(adyn, s, s, &xi);
            let bu = matvec(bdyn, s, c, &u[i * c..(i + 1) * c]);
            for r in 0..s {
                x[(i + 1) * s + r] = ax[r] + bu[r];
            }
        }
    }
    Ok((u, x))
}

pub(crate) fn f32_data(a: &ArrayData) -> Option<&[f32]> {
    match &a.data {
        Data::F32(v) => Some(v),
        _ => None,
    }
}

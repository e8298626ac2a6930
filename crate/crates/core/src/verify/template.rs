//! Generator for the straightforward tiled GEMM kernel at arbitrary sizes.

use crate::sim::{AcceleratorConfig, ElemKind};

fn largest_divisor_at_most(n: usize, cap: usize) -> usize {
    (1..=cap.min(n)).rev().find(|&d| n.is_multiple_of(d)).unwrap_or(1)
}

/// Source of an unoptimized weight-stationary GEMM `C[m][n] = A[m][k] × B[k][n]`
/// for `cfg`, in the same shape as the compiler-generated starting kernel:
/// every output row tile zeroes its accumulator tiles, then streams A and B
/// blocks of up to four tiles per side through the array.
///
/// All dimensions must be multiples of `cfg.dim`.
pub fn gemm_kernel(m: usize, k: usize, n: usize, cfg: &AcceleratorConfig) -> Result<String, String> {
    let d = cfg.dim;
    if [m, k, n].iter().any(|&x| x == 0 || x % d != 0) {
        return Err(format!("dimensions {m}x{k}x{n} must be positive multiples of {d}"));
    }
    let ty = match cfg.elem {
        ElemKind::Int8 => "int8_t",
        ElemKind::Float32 => "float",
        ElemKind::Int32 => return Err("int32 elements are not supported".into()),
    };
    let eb = cfg.elem.bytes();
    let kn = largest_divisor_at_most(k / d, 4);
    let ko = k / d / kn;
    let jn = largest_divisor_at_most(n / d, 4);
    let jo = n / d / jn;
    if k + k * jn > cfg.spad_rows() {
        return Err(format!("A and B blocks need {} scratchpad rows", k + k * jn));
    }
    if jn * d > cfg.acc_rows() {
        return Err("accumulator too small".into());
    }
    let dd = d * d;
    let a_blk = dd * kn;
    let b_k = dd * jn;
    let b_ko = dd * kn * jn;
    Ok(format!(
        "void test({ty} A[{m}][{k}], {ty} B[{k}][{n}], {ty} C[{m}][{n}]) {{
  config_st(({st}));
  config_ex(WEIGHT_STATIONARY, NO_ACTIVATION, 1, false, false);
  config_ld(({st}), 1.0f, {d}, 2);
  config_ld(({ak}), 1.0f, {d}, 1);
  config_ld(0, 1.0f, 0, 0);

  for (int_fast32_t i = 0; i < {mi}; i++) {{
    for (int_fast32_t j = 0; j < {jo}; j++) {{
      uint32_t res = 1 << 31;
      for (int_fast32_t j_in_o = 0; j_in_o < {jn}; j_in_o++) {{
        mvin( 0, res + ((j_in_o) * ({dd}))/{d},({d} + 0), ({d} + 0) );
      }}
      uint32_t a = 0;
      uint32_t b = {d} * {d} * {kn} * {ko} / {d};
      for (int_fast32_t ko = 0; ko < {ko}; ko++) {{
        mvin2( &A[({d} * i)][{akn} * ko], a + ((ko) * ({a_blk}))/{d}, {d}*({kn} + 0), ({d} + 0) );
        for (int_fast32_t k = 0; k < {kn}; k++) {{
          mvin3( &B[({akn} * ko + {d} * k)][{bjn} * j], b + ((ko) * ({b_ko}) + (k) * ({b_k}))/{d}, {d}*({jn} + 0), ({d} + 0) );
        }}
        for (int_fast32_t k = 0; k < {kn}; k++) {{
          for (int_fast32_t j_in_o = 0; j_in_o < {jn}; j_in_o++) {{
            preload(b + ((ko) * ({b_ko}) + (k) * ({b_k}) + (j_in_o) * ({dd}))/{d}, res + ((j_in_o) * ({dd}))/{d} | 0x40000000, ({d} + 0), ({d} + 0), ({d} + 0), ({d} + 0));
            compute_preloaded(a + ((ko) * ({a_blk}) + (k) * ({dd}))/{d}, ~((uint32_t)0), ({d} + 0), ({d} + 0), {d}, {d});
          }}
        }}
      }}
      for (int_fast32_t j_in_o = 0; j_in_o < {jn}; j_in_o++) {{
        mvout( &C[({d} * i)][{d} * j_in_o + {bjn} * j], res + ((j_in_o) * ({dd}))/{d}, ({d} + 0), ({d} + 0) );
      }}
    }}
  }}
  fence();
}}
",
        st = n * eb,
        ak = k * eb,
        mi = m / d,
        akn = d * kn,
        bjn = d * jn,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{has_errors, parse_kernel, validate_kernel};

    #[test]
    fn reproduces_the_reference_starting_kernel() {
        let cfg = AcceleratorConfig::int8_16x16();
        let generated = parse_kernel(&gemm_kernel(12544, 256, 64, &cfg).unwrap()).unwrap();
        let asset = parse_kernel(include_str!("../../assets/gemm_12544x64x256_unopt.gk")).unwrap();
        assert_eq!(generated, asset);
    }

    #[test]
    fn small_sizes_validate() {
        let cfg = AcceleratorConfig::int8_16x16();
        for (m, k, n) in [(16, 16, 16), (48, 32, 64), (64, 48, 16)] {
            let p = parse_kernel(&gemm_kernel(m, k, n, &cfg).unwrap()).unwrap();
            assert!(!has_errors(&validate_kernel(&p, &cfg)));
        }
        assert!(gemm_kernel(20, 16, 16, &cfg).is_err());
    }
}

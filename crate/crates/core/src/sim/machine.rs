//! Functional semantics of the accelerator instructions.

use std::fmt;

use serde::Serialize;

use super::address::{LocalAddress, Space, NO_ADDRESS};
use super::config::AcceleratorConfig;
use super::dram::Buffer;
use super::value::Ptr;

/// DRAM operand of a data-movement instruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DramArg {
    /// The literal address 0: zero fill on mvin.
    Zero,
    Ptr(Ptr),
}

/// A decoded accelerator instruction with evaluated operands.
#[derive(Debug, Clone, PartialEq)]
pub enum Instr {
    ConfigEx { dataflow: i64, activation: i64, a_stride: i64, a_transpose: i64, b_transpose: i64 },
    ConfigLd { stride: i64, scale: f64, block_stride: i64, id: i64 },
    Mvin { channel: u8, dram: DramArg, local: u32, cols: i64, rows: i64 },
    Preload { b: u32, c: u32, b_cols: i64, b_rows: i64, c_cols: i64, c_rows: i64 },
    Compute { accumulated: bool, a: u32, bias: u32, a_cols: i64, a_rows: i64, bias_cols: i64, bias_rows: i64 },
    ConfigSt { stride: i64, scale: f64 },
    Mvout { dram: DramArg, local: u32, cols: i64, rows: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Controller {
    Load,
    Execute,
    Store,
}

impl Controller {
    pub const ALL: [Controller; 3] = [Controller::Load, Controller::Execute, Controller::Store];

    pub fn name(self) -> &'static str {
        match self {
            Controller::Load => "load",
            Controller::Execute => "execute",
            Controller::Store => "store",
        }
    }
}

impl Instr {
    pub fn name(&self) -> &'static str {
        match self {
            Instr::ConfigEx { .. } => "config_ex",
            Instr::ConfigLd { .. } => "config_ld",
            Instr::Mvin { channel: 0, .. } => "mvin",
            Instr::Mvin { channel: 1, .. } => "mvin2",
            Instr::Mvin { .. } => "mvin3",
            Instr::Preload { .. } => "preload",
            Instr::Compute { accumulated: false, .. } => "compute_preloaded",
            Instr::Compute { accumulated: true, .. } => "compute_accumulated",
            Instr::ConfigSt { .. } => "config_st",
            Instr::Mvout { .. } => "mvout",
        }
    }

    pub fn controller(&self) -> Controller {
        match self {
            Instr::ConfigLd { .. } | Instr::Mvin { .. } => Controller::Load,
            Instr::ConfigEx { .. } | Instr::Preload { .. } | Instr::Compute { .. } => Controller::Execute,
            Instr::ConfigSt { .. } | Instr::Mvout { .. } => Controller::Store,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Instr::ConfigEx { .. } | Instr::ConfigLd { .. } | Instr::ConfigSt { .. })
    }
}

/// Half-open range of rows in the unified row space: scratchpad rows first,
/// then accumulator rows offset by the scratchpad size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowSpan {
    pub lo: u32,
    pub hi: u32,
    pub write: bool,
}

/// What an executed instruction touched, for the timing model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Footprint {
    pub spans: Vec<RowSpan>,
    /// Rows moved or streamed.
    pub rows: u64,
    /// Bytes per row crossing the DMA bus (data movement only).
    pub row_bytes: u64,
    /// Host bytes read / written.
    pub dram_in: u64,
    pub dram_out: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecError {
    RowOutOfRange { space: Space, row: usize, rows: usize },
    DramOutOfBounds { array: String, index: i64, len: usize },
    Misaligned { array: String, byte_offset: i64, elem_bytes: usize },
    Limit { instr: &'static str, what: &'static str, value: i64, limit: i64 },
    NoPreloadedWeights,
    NoOutputDescriptor,
    Unsupported(String),
    BadOperand(String),
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::RowOutOfRange { space, row, rows } => {
                let s = match space {
                    Space::Scratchpad => "scratchpad",
                    Space::Accumulator => "accumulator",
                };
                write!(f, "{s} row out of range: {row} >= {rows}")
            }
            ExecError::DramOutOfBounds { array, index, len } => {
                write!(f, "access to '{array}' at element {index} is outside its {len} elements")
            }
            ExecError::Misaligned { array, byte_offset, elem_bytes } => {
                write!(f, "byte offset {byte_offset} into '{array}' is not a multiple of {elem_bytes}")
            }
            ExecError::Limit { instr, what, value, limit } => {
                write!(f, "{instr}: {what} = {value} must be between 1 and {limit}")
            }
            ExecError::NoPreloadedWeights => {
                write!(f, "preload with B address 0xffffffff but no weights were preloaded before")
            }
            ExecError::NoOutputDescriptor => write!(f, "compute issued before any preload"),
            ExecError::Unsupported(s) => write!(f, "unsupported feature: {s}"),
            ExecError::BadOperand(s) => write!(f, "{s}"),
        }
    }
}

/// Arithmetic of one element/accumulator type pairing.
pub trait Domain: 'static {
    type E: Copy + Default + fmt::Debug;
    type A: Copy + Default + fmt::Debug;
    /// Host value scaled into the input type.
    fn elem_from(v: f64, scale: f64) -> Self::E;
    /// Host value scaled into the accumulator type.
    fn acc_from(v: f64, scale: f64) -> Self::A;
    fn mac(t: Self::A, a: Self::E, b: Self::E) -> Self::A;
    fn add_elem(t: Self::A, x: Self::E) -> Self::A;
    fn add_acc(t: Self::A, x: Self::A) -> Self::A;
    /// Scaled-down accumulator read.
    fn acc_to_elem(a: Self::A, scale: f64) -> Self::E;
    fn elem_f64(e: Self::E) -> f64;
    fn acc_f64(a: Self::A) -> f64;
}

/// int8 inputs, int32 accumulation.
pub struct IntDomain;

fn round_sat(x: f64, lo: f64, hi: f64) -> f64 {
    x.round_ties_even().clamp(lo, hi)
}

impl Domain for IntDomain {
    type E = i8;
    type A = i32;

    fn elem_from(v: f64, scale: f64) -> i8 {
        round_sat(v * scale, i8::MIN as f64, i8::MAX as f64) as i8
    }

    fn acc_from(v: f64, scale: f64) -> i32 {
        round_sat(v * scale, i32::MIN as f64, i32::MAX as f64) as i32
    }

    fn mac(t: i32, a: i8, b: i8) -> i32 {
        t.wrapping_add(a as i32 * b as i32)
    }

    fn add_elem(t: i32, x: i8) -> i32 {
        t.wrapping_add(x as i32)
    }

    fn add_acc(t: i32, x: i32) -> i32 {
        t.wrapping_add(x)
    }

    fn acc_to_elem(a: i32, scale: f64) -> i8 {
        round_sat(a as f64 * scale, i8::MIN as f64, i8::MAX as f64) as i8
    }

    fn elem_f64(e: i8) -> f64 {
        e as f64
    }

    fn acc_f64(a: i32) -> f64 {
        a as f64
    }
}

/// fp32 inputs and accumulation.
pub struct FloatDomain;

impl Domain for FloatDomain {
    type E = f32;
    type A = f32;

    fn elem_from(v: f64, scale: f64) -> f32 {
        v as f32 * scale as f32
    }

    fn acc_from(v: f64, scale: f64) -> f32 {
        v as f32 * scale as f32
    }

    fn mac(t: f32, a: f32, b: f32) -> f32 {
        t + a * b
    }

    fn add_elem(t: f32, x: f32) -> f32 {
        t + x
    }

    fn add_acc(t: f32, x: f32) -> f32 {
        t + x
    }

    fn acc_to_elem(a: f32, scale: f64) -> f32 {
        a * scale as f32
    }

    fn elem_f64(e: f32) -> f64 {
        e as f64
    }

    fn acc_f64(a: f32) -> f64 {
        a as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct LdCfg {
    stride: i64,
    scale: f64,
    block_stride: i64,
}

#[derive(Debug, Clone, Copy)]
struct OutDesc {
    c: u32,
    cols: usize,
    rows: usize,
}

/// Object-safe view of a machine, whatever its numeric domain.
pub trait Accelerator {
    fn exec(&mut self, instr: &Instr, dram: &mut [Buffer]) -> Result<Footprint, ExecError>;
    /// Distinct scratchpad and accumulator rows written so far.
    fn touched_rows(&self) -> (usize, usize);
}

pub fn new_accelerator(cfg: &AcceleratorConfig) -> Box<dyn Accelerator + Send> {
    if cfg.elem.is_float() {
        Box::new(Machine::<FloatDomain>::new(cfg))
    } else {
        Box::new(Machine::<IntDomain>::new(cfg))
    }
}

/// Scratchpad, accumulator, configuration registers and the PE array.
pub struct Machine<D: Domain> {
    dim: usize,
    spad_rows: usize,
    acc_rows: usize,
    elem_bytes: u64,
    acc_bytes: u64,
    spad: Vec<D::E>,
    acc: Vec<D::A>,
    ld: [LdCfg; 3],
    a_stride: usize,
    st_stride: i64,
    st_scale: f64,
    weights: Option<Vec<D::E>>,
    desc: Option<OutDesc>,
    spad_written: Vec<bool>,
    acc_written: Vec<bool>,
    spad_touched: usize,
    acc_touched: usize,
}

fn limit(instr: &'static str, what: &'static str, value: i64, max: usize) -> Result<usize, ExecError> {
    if value < 1 || value > max as i64 {
        return Err(ExecError::Limit { instr, what, value, limit: max as i64 });
    }
    Ok(value as usize)
}

impl<D: Domain> Machine<D> {
    pub fn new(cfg: &AcceleratorConfig) -> Self {
        let dim = cfg.dim;
        let spad_rows = cfg.spad_rows();
        let acc_rows = cfg.acc_rows();
        let ld = LdCfg { stride: 0, scale: 1.0, block_stride: 0 };
        Machine {
            dim,
            spad_rows,
            acc_rows,
            elem_bytes: cfg.elem.bytes() as u64,
            acc_bytes: cfg.acc.bytes() as u64,
            spad: vec![D::E::default(); spad_rows * dim],
            acc: vec![D::A::default(); acc_rows * dim],
            ld: [ld; 3],
            a_stride: 1,
            st_stride: 0,
            st_scale: 1.0,
            weights: None,
            desc: None,
            spad_written: vec![false; spad_rows],
            acc_written: vec![false; acc_rows],
            spad_touched: 0,
            acc_touched: 0,
        }
    }

    fn check_rows(&self, addr: &LocalAddress, first: usize, count: usize) -> Result<(), ExecError> {
        let (cap, space) = match addr.space {
            Space::Scratchpad => (self.spad_rows, Space::Scratchpad),
            Space::Accumulator => (self.acc_rows, Space::Accumulator),
        };
        if count > 0 && first + count > cap {
            return Err(ExecError::RowOutOfRange { space, row: (first + count - 1).max(first), rows: cap });
        }
        Ok(())
    }

    fn span(&self, space: Space, lo: usize, n: usize, write: bool) -> RowSpan {
        let base = match space {
            Space::Scratchpad => 0,
            Space::Accumulator => self.spad_rows,
        };
        RowSpan { lo: (base + lo) as u32, hi: (base + lo + n) as u32, write }
    }

    fn mark_spad(&mut self, row: usize) {
        if !self.spad_written[row] {
            self.spad_written[row] = true;
            self.spad_touched += 1;
        }
    }

    fn mark_acc(&mut self, row: usize) {
        if !self.acc_written[row] {
            self.acc_written[row] = true;
            self.acc_touched += 1;
        }
    }

    fn mvin(&mut self, channel: u8, dram: DramArg, local: u32, cols: i64, rows: i64, mem: &[Buffer]) -> Result<Footprint, ExecError> {
        let name = ["mvin", "mvin2", "mvin3"][channel as usize];
        let dim = self.dim;
        let rows = limit(name, "rows", rows, dim)?;
        let max_cols = if matches!(dram, DramArg::Zero) { dim } else { 4 * dim };
        let cols = limit(name, "cols", cols, max_cols)?;
        if local == NO_ADDRESS {
            return Err(ExecError::BadOperand(format!("{name}: destination address cannot be 0xffffffff")));
        }
        let addr = LocalAddress::decode_write(local);
        let cfg = self.ld[channel as usize];
        let blocks = cols.div_ceil(dim);
        let mut fp = Footprint { rows: rows as u64, ..Default::default() };
        if addr.is_accumulator() && cols > dim {
            return Err(ExecError::Unsupported(format!("{name} of {cols} columns into the accumulator (at most DIM)")));
        }
        if cfg.block_stride < 0 {
            return Err(ExecError::BadOperand(format!("negative block stride {}", cfg.block_stride)));
        }
        for b in 0..blocks {
            let first = addr.row + b * cfg.block_stride as usize;
            self.check_rows(&addr, first, rows)?;
            fp.spans.push(self.span(addr.space, first, rows, true));
        }
        let src = match dram {
            DramArg::Zero => None,
            DramArg::Ptr(p) => Some((&mem[p.buf], p.off)),
        };
        let dest_bytes = if addr.is_accumulator() { self.acc_bytes } else { self.elem_bytes };
        fp.row_bytes = cols as u64 * dest_bytes;
        if let Some((buf, _)) = src {
            fp.dram_in = (rows * cols * buf.elem_bytes()) as u64;
        }
        for r in 0..rows {
            let row_base = match src {
                Some((buf, off)) => Some(dram_row(buf, off, r, cfg.stride, cols)?),
                None => None,
            };
            for c in 0..cols {
                let v = match (src, row_base) {
                    (Some((buf, _)), Some(base)) => buf.data.get(base + c),
                    _ => 0.0,
                };
                let row = addr.row + (c / dim) * cfg.block_stride as usize + r;
                let i = row * dim + c % dim;
                match addr.space {
                    Space::Scratchpad => {
                        self.spad[i] = D::elem_from(v, cfg.scale);
                        self.mark_spad(row);
                    }
                    Space::Accumulator => {
                        let x = D::acc_from(v, cfg.scale);
                        self.acc[i] = if addr.accumulate { D::add_acc(self.acc[i], x) } else { x };
                        self.mark_acc(row);
                    }
                }
            }
        }
        Ok(fp)
    }

    fn preload(&mut self, b: u32, c: u32, b_cols: i64, b_rows: i64, c_cols: i64, c_rows: i64) -> Result<Footprint, ExecError> {
        let dim = self.dim;
        let b_cols = limit("preload", "B_cols", b_cols, dim)?;
        let b_rows = limit("preload", "B_rows", b_rows, dim)?;
        let c_cols = limit("preload", "C_cols", c_cols, dim)?;
        let c_rows = limit("preload", "C_rows", c_rows, dim)?;
        let mut fp = Footprint::default();
        if b == NO_ADDRESS {
            if self.weights.is_none() {
                return Err(ExecError::NoPreloadedWeights);
            }
        } else {
            let addr = LocalAddress::decode_read(b);
            if addr.is_accumulator() {
                return Err(ExecError::BadOperand("preload: B must be in the scratchpad".into()));
            }
            self.check_rows(&addr, addr.row, b_rows)?;
            let mut w = vec![D::E::default(); dim * dim];
            for k in 0..b_rows {
                let src = (addr.row + k) * dim;
                w[k * dim..k * dim + b_cols].copy_from_slice(&self.spad[src..src + b_cols]);
            }
            self.weights = Some(w);
            fp.spans.push(self.span(Space::Scratchpad, addr.row, b_rows, false));
        }
        if c != NO_ADDRESS {
            let addr = LocalAddress::decode_write(c);
            self.check_rows(&addr, addr.row, c_rows)?;
        }
        self.desc = Some(OutDesc { c, cols: c_cols, rows: c_rows });
        fp.rows = b_rows as u64;
        Ok(fp)
    }

    #[allow(clippy::too_many_arguments)]
    fn compute(
        &mut self,
        accumulated: bool,
        a: u32,
        bias: u32,
        a_cols: i64,
        a_rows: i64,
        bias_cols: i64,
        bias_rows: i64,
    ) -> Result<Footprint, ExecError> {
        let name = if accumulated { "compute_accumulated" } else { "compute_preloaded" };
        let dim = self.dim;
        let a_cols = limit(name, "A_cols", a_cols, dim)?;
        let a_rows = limit(name, "A_rows", a_rows, dim)?;
        let desc = self.desc.ok_or(ExecError::NoOutputDescriptor)?;
        let weights = self.weights.as_ref().ok_or(ExecError::NoPreloadedWeights)?;
        let mut fp = Footprint { rows: a_rows as u64, ..Default::default() };

        let a_addr = LocalAddress::decode_read(a);
        if a == NO_ADDRESS || a_addr.is_accumulator() {
            return Err(ExecError::BadOperand(format!("{name}: A must be in the scratchpad")));
        }
        let stride = self.a_stride;
        let last = a_addr.row + (a_rows - 1) * stride;
        self.check_rows(&a_addr, last, 1)?;
        if stride == 1 {
            fp.spans.push(self.span(Space::Scratchpad, a_addr.row, a_rows, false));
        } else {
            for r in 0..a_rows {
                fp.spans.push(self.span(Space::Scratchpad, a_addr.row + r * stride, 1, false));
            }
        }

        let bias_src = if bias == NO_ADDRESS {
            None
        } else {
            let bias_cols = limit(name, "bias_cols", bias_cols, dim)?;
            let bias_rows = limit(name, "bias_rows", bias_rows, dim)?;
            let addr = LocalAddress::decode_read(bias);
            if addr.is_accumulator() {
                return Err(ExecError::BadOperand(format!("{name}: bias must be in the scratchpad")));
            }
            self.check_rows(&addr, addr.row, bias_rows)?;
            fp.spans.push(self.span(Space::Scratchpad, addr.row, bias_rows, false));
            Some((addr.row, bias_cols, bias_rows))
        };

        if desc.c == NO_ADDRESS {
            return Ok(fp);
        }
        let out = LocalAddress::decode_write(desc.c);
        self.check_rows(&out, out.row, desc.rows)?;
        let mut results = vec![D::A::default(); desc.rows * desc.cols];
        for r in 0..desc.rows {
            for c in 0..desc.cols {
                let oi = (out.row + r) * dim + c;
                let mut t = if out.is_accumulator() && out.accumulate { self.acc[oi] } else { D::A::default() };
                if r < a_rows {
                    let arow = (a_addr.row + r * stride) * dim;
                    for k in 0..a_cols {
                        t = D::mac(t, self.spad[arow + k], weights[k * dim + c]);
                    }
                }
                if let Some((brow, bc, br)) = bias_src {
                    if r < br && c < bc {
                        t = D::add_elem(t, self.spad[(brow + r) * dim + c]);
                    }
                }
                results[r * desc.cols + c] = t;
            }
        }
        for r in 0..desc.rows {
            let row = out.row + r;
            for c in 0..desc.cols {
                let t = results[r * desc.cols + c];
                match out.space {
                    Space::Accumulator => self.acc[row * dim + c] = t,
                    Space::Scratchpad => self.spad[row * dim + c] = D::acc_to_elem(t, 1.0),
                }
            }
            match out.space {
                Space::Accumulator => self.mark_acc(row),
                Space::Scratchpad => self.mark_spad(row),
            }
        }
        fp.spans.push(self.span(out.space, out.row, desc.rows, true));
        Ok(fp)
    }

    fn mvout(&mut self, dram: DramArg, local: u32, cols: i64, rows: i64, mem: &mut [Buffer]) -> Result<Footprint, ExecError> {
        let dim = self.dim;
        let cols = limit("mvout", "cols", cols, dim)?;
        let rows = limit("mvout", "rows", rows, dim)?;
        let DramArg::Ptr(p) = dram else {
            return Err(ExecError::BadOperand("mvout: DRAM address 0 is not writable".into()));
        };
        if local == NO_ADDRESS {
            return Err(ExecError::BadOperand("mvout: source address cannot be 0xffffffff".into()));
        }
        let addr = LocalAddress::decode_read(local);
        self.check_rows(&addr, addr.row, rows)?;
        let buf = &mut mem[p.buf];
        let width = if addr.full_width_read { self.acc_bytes } else { self.elem_bytes };
        let fp = Footprint {
            spans: vec![self.span(addr.space, addr.row, rows, false)],
            rows: rows as u64,
            row_bytes: cols as u64 * width,
            dram_out: (rows * cols * buf.elem_bytes()) as u64,
            ..Default::default()
        };
        for r in 0..rows {
            let base = dram_row(buf, p.off, r, self.st_stride, cols)?;
            let li = (addr.row + r) * dim;
            for c in 0..cols {
                let v = match addr.space {
                    Space::Scratchpad => D::elem_f64(self.spad[li + c]),
                    Space::Accumulator if addr.full_width_read => D::acc_f64(self.acc[li + c]),
                    Space::Accumulator => D::elem_f64(D::acc_to_elem(self.acc[li + c], self.st_scale)),
                };
                buf.data.set(base + c, v);
            }
        }
        Ok(fp)
    }
}

/// Element index of the first element of row `r` of a strided DRAM tile,
/// after checking the whole row lies inside the buffer.
fn dram_row(buf: &Buffer, off: i64, r: usize, stride_bytes: i64, cols: usize) -> Result<usize, ExecError> {
    let eb = buf.elem_bytes() as i64;
    let byte = off * eb + r as i64 * stride_bytes;
    if byte % eb != 0 {
        return Err(ExecError::Misaligned { array: buf.name.clone(), byte_offset: byte, elem_bytes: eb as usize });
    }
    let first = byte / eb;
    let len = buf.data.len();
    if first < 0 || first as usize >= len {
        return Err(ExecError::DramOutOfBounds { array: buf.name.clone(), index: first, len });
    }
    let last = first + cols as i64 - 1;
    if last as usize >= len {
        return Err(ExecError::DramOutOfBounds { array: buf.name.clone(), index: last, len });
    }
    Ok(first as usize)
}

impl<D: Domain> Accelerator for Machine<D> {
    fn exec(&mut self, instr: &Instr, dram: &mut [Buffer]) -> Result<Footprint, ExecError> {
        match *instr {
            Instr::ConfigEx { dataflow, activation, a_stride, a_transpose, b_transpose } => {
                if dataflow != 1 {
                    return Err(ExecError::Unsupported(format!("dataflow {dataflow} (only WEIGHT_STATIONARY)")));
                }
                if activation != 0 {
                    return Err(ExecError::Unsupported(format!("activation {activation} (only NO_ACTIVATION)")));
                }
                if a_transpose != 0 || b_transpose != 0 {
                    return Err(ExecError::Unsupported("transposed operands".into()));
                }
                if a_stride < 1 {
                    return Err(ExecError::BadOperand(format!("config_ex: A stride {a_stride} must be positive")));
                }
                self.a_stride = a_stride as usize;
                Ok(Footprint::default())
            }
            Instr::ConfigLd { stride, scale, block_stride, id } => {
                if !(0..3).contains(&id) {
                    return Err(ExecError::BadOperand(format!("config_ld: id {id} must be 0, 1 or 2")));
                }
                self.ld[id as usize] = LdCfg { stride, scale, block_stride };
                Ok(Footprint::default())
            }
            Instr::ConfigSt { stride, scale } => {
                self.st_stride = stride;
                self.st_scale = scale;
                Ok(Footprint::default())
            }
            Instr::Mvin { channel, dram: d, local, cols, rows } => self.mvin(channel, d, local, cols, rows, dram),
            Instr::Preload { b, c, b_cols, b_rows, c_cols, c_rows } => self.preload(b, c, b_cols, b_rows, c_cols, c_rows),
            Instr::Compute { accumulated, a, bias, a_cols, a_rows, bias_cols, bias_rows } => {
                self.compute(accumulated, a, bias, a_cols, a_rows, bias_cols, bias_rows)
            }
            Instr::Mvout { dram: d, local, cols, rows } => self.mvout(d, local, cols, rows, dram),
        }
    }

    fn touched_rows(&self) -> (usize, usize) {
        (self.spad_touched, self.acc_touched)
    }
}

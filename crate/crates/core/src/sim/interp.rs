//! Lowering of the AST to slot-resolved form, and its execution.

use std::collections::{BTreeMap, HashMap};

use crate::dsl::intrinsics::{self, ArgKind, IntrinsicKind};
use crate::dsl::validate::{const_eval, Bindings};
use crate::dsl::{codes, BinOp, Diagnostic, Expr, Init, KernelProgram, LoopStep, ScalarType, Span, Stmt, UnOp};

use super::config::{AcceleratorConfig, ElemKind};
use super::dram::{ArrayData, Buffer, Data};
use super::machine::{new_accelerator, Accelerator, DramArg, ExecError, Instr};
use super::timing::TimingModel;
use super::value::{int_binop, is_float_type, sizeof_static, wrap_int, Ptr, Value};
use super::SimError;

/// CPU nodes charged per element by the host matrix helpers.
const HELPER_NODES_PER_ELEM: u64 = 3;

#[derive(Debug, Clone)]
pub(crate) struct ArrayDef {
    pub name: String,
    pub ty: ScalarType,
    pub kind: ElemKind,
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
}

impl ArrayDef {
    fn len(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone)]
enum LExpr {
    Int(i64),
    Float(f64),
    Var(usize),
    Elem { arr: usize, idx: Vec<LExpr> },
    Ptr { arr: usize, idx: Vec<LExpr> },
    Unary(UnOp, Box<LExpr>),
    Binary(BinOp, Box<LExpr>, Box<LExpr>),
    Ternary(Box<LExpr>, Box<LExpr>, Box<LExpr>),
    Cast(ScalarType, Box<LExpr>),
}

#[derive(Debug, Clone)]
enum Target {
    Var(usize),
    Elem { arr: usize, idx: Vec<LExpr> },
}

#[derive(Debug, Clone)]
enum LStmt {
    Scalar { slot: usize, init: Option<LExpr>, static_id: Option<usize> },
    Array { arr: usize, init: Option<Vec<LExpr>>, static_id: Option<usize> },
    Assign { target: Target, op: Option<BinOp>, value: LExpr, line: u32 },
    Call { kind: IntrinsicKind, args: Vec<LExpr>, line: u32 },
    For { var: usize, init: LExpr, cmp: BinOp, bound: LExpr, step: LExpr, down: bool, body: Vec<LStmt>, line: u32 },
    If { cond: LExpr, then_body: Vec<LStmt>, else_body: Vec<LStmt>, line: u32 },
    Block(Vec<LStmt>),
}

/// A kernel lowered for execution against one accelerator configuration.
#[derive(Debug, Clone)]
pub(crate) struct Lowered {
    pub arrays: Vec<ArrayDef>,
    pub n_params: usize,
    var_types: Vec<ScalarType>,
    n_statics: usize,
    body: Vec<LStmt>,
}

#[derive(Clone, Copy)]
enum Sym {
    Var(usize),
    Arr(usize),
}

struct Lowerer<'a> {
    cfg: &'a AcceleratorConfig,
    bindings: &'a Bindings,
    scopes: Vec<HashMap<String, Sym>>,
    arrays: Vec<ArrayDef>,
    var_types: Vec<ScalarType>,
    n_statics: usize,
}

fn invalid(span: Span, msg: impl Into<String>) -> SimError {
    SimError::Invalid(vec![Diagnostic::error(codes::SYNTAX, span, msg)])
}

impl Lowerer<'_> {
    fn resolve_type(&self, ty: ScalarType) -> ScalarType {
        match ty {
            ScalarType::ElemT => {
                if self.cfg.elem.is_float() {
                    ScalarType::Float
                } else {
                    ScalarType::Int8
                }
            }
            ScalarType::AccT => {
                if self.cfg.acc.is_float() {
                    ScalarType::Float
                } else {
                    ScalarType::Int32
                }
            }
            t => t,
        }
    }

    fn lookup(&self, name: &str) -> Option<Sym> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str, sym: Sym) {
        self.scopes.last_mut().expect("scope").insert(name.to_string(), sym);
    }

    fn array_def(&self, name: &str, ty: ScalarType, dims: &[Expr], span: Span) -> Result<ArrayDef, SimError> {
        let ty = self.resolve_type(ty);
        let kind = self.cfg.storage_kind(ty).ok_or_else(|| invalid(span, format!("array '{name}' has unsupported element type")))?;
        let mut sizes = Vec::new();
        for d in dims {
            match const_eval(d, self.bindings) {
                Some(n) if n >= 1 => sizes.push(n as usize),
                _ => return Err(invalid(span, format!("array '{name}' needs constant positive dimensions"))),
            }
        }
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        Ok(ArrayDef { name: name.to_string(), ty, kind, dims: sizes, strides })
    }

    fn new_var(&mut self, name: &str, ty: ScalarType) -> usize {
        let slot = self.var_types.len();
        self.var_types.push(self.resolve_type(ty));
        self.declare(name, Sym::Var(slot));
        slot
    }

    fn expr(&self, e: &Expr, span: Span) -> Result<LExpr, SimError> {
        Ok(match e {
            Expr::Int(l) => LExpr::Int(l.value),
            Expr::Float { value, single } => LExpr::Float(if *single { *value as f32 as f64 } else { *value }),
            Expr::Ident(n) => match self.lookup(n) {
                Some(Sym::Var(s)) => LExpr::Var(s),
                Some(Sym::Arr(a)) => LExpr::Ptr { arr: a, idx: vec![] },
                None => match intrinsics::builtin_constant(n).or_else(|| self.bindings.get(n).copied()) {
                    Some(v) => LExpr::Int(v),
                    None => return Err(invalid(span, format!("'{n}' is not declared"))),
                },
            },
            Expr::Index { .. } => {
                let (root, idx) = e.index_chain().ok_or_else(|| invalid(span, "only named arrays can be indexed"))?;
                let Some(Sym::Arr(arr)) = self.lookup(root) else {
                    return Err(invalid(span, format!("'{root}' is not an array")));
                };
                let ndims = self.arrays[arr].dims.len();
                if idx.len() > ndims {
                    return Err(invalid(span, format!("too many indices for '{root}'")));
                }
                let idx = idx.into_iter().map(|i| self.expr(i, span)).collect::<Result<Vec<_>, _>>()?;
                if idx.len() == ndims {
                    LExpr::Elem { arr, idx }
                } else {
                    LExpr::Ptr { arr, idx }
                }
            }
            Expr::AddrOf(inner) => match self.expr(inner, span)? {
                LExpr::Elem { arr, idx } => LExpr::Ptr { arr, idx },
                _ => return Err(invalid(span, "'&' must be applied to an array element")),
            },
            Expr::Unary(op, a) => LExpr::Unary(*op, Box::new(self.expr(a, span)?)),
            Expr::Binary(op, a, b) => LExpr::Binary(*op, Box::new(self.expr(a, span)?), Box::new(self.expr(b, span)?)),
            Expr::Ternary(c, a, b) => {
                LExpr::Ternary(Box::new(self.expr(c, span)?), Box::new(self.expr(a, span)?), Box::new(self.expr(b, span)?))
            }
            Expr::Cast(ty, a) => LExpr::Cast(self.resolve_type(*ty), Box::new(self.expr(a, span)?)),
            Expr::SizeOf(ty) => {
                let t = self.resolve_type(*ty);
                LExpr::Int(sizeof_static(t).expect("resolved type has a size") as i64)
            }
            Expr::Call { name, .. } => return Err(invalid(span, format!("'{name}' cannot be used as a value"))),
        })
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<Vec<LStmt>, SimError> {
        self.scopes.push(HashMap::new());
        let out = stmts.iter().map(|s| self.stmt(s)).collect();
        self.scopes.pop();
        out
    }

    fn stmt(&mut self, s: &Stmt) -> Result<LStmt, SimError> {
        let line = s.span().line;
        Ok(match s {
            Stmt::Decl(d) => {
                let static_id = d.is_static.then(|| {
                    self.n_statics += 1;
                    self.n_statics - 1
                });
                if d.dims.is_empty() {
                    let init = match &d.init {
                        Some(Init::Expr(e)) => Some(self.expr(e, d.span)?),
                        Some(Init::List(_)) => return Err(invalid(d.span, "brace initializer on a scalar")),
                        None => None,
                    };
                    let slot = self.new_var(&d.name, d.ty);
                    LStmt::Scalar { slot, init, static_id }
                } else {
                    let def = self.array_def(&d.name, d.ty, &d.dims, d.span)?;
                    let init = match &d.init {
                        Some(Init::List(items)) => {
                            if items.len() > def.len() {
                                return Err(invalid(d.span, format!("too many initializers for '{}'", d.name)));
                            }
                            Some(items.iter().map(|e| self.expr(e, d.span)).collect::<Result<Vec<_>, _>>()?)
                        }
                        Some(Init::Expr(_)) => return Err(invalid(d.span, "array initializer must be a brace list")),
                        None => None,
                    };
                    let arr = self.arrays.len();
                    self.arrays.push(def);
                    self.declare(&d.name, Sym::Arr(arr));
                    LStmt::Array { arr, init, static_id }
                }
            }
            Stmt::Assign { target, op, value, span } => {
                let target = match self.expr(target, *span)? {
                    LExpr::Var(s) => Target::Var(s),
                    LExpr::Elem { arr, idx } => Target::Elem { arr, idx },
                    _ => return Err(invalid(*span, "invalid assignment target")),
                };
                LStmt::Assign { target, op: op.binop(), value: self.expr(value, *span)?, line }
            }
            Stmt::Expr { expr: Expr::Call { name, args, span }, .. } => {
                let intr = intrinsics::lookup(name).ok_or_else(|| invalid(*span, format!("unknown intrinsic '{name}'")))?;
                let args = args.iter().map(|a| self.expr(a, *span)).collect::<Result<Vec<_>, _>>()?;
                LStmt::Call { kind: intr.kind, args, line }
            }
            Stmt::Expr { expr, span } => {
                // Side-effect free; evaluated for its cost only.
                let e = self.expr(expr, *span)?;
                LStmt::If { cond: e, then_body: vec![], else_body: vec![], line }
            }
            Stmt::For(l) => {
                self.scopes.push(HashMap::new());
                let init = self.expr(&l.init, l.span)?;
                let var = match l.var_ty {
                    Some(ty) => self.new_var(&l.var, ty),
                    None => match self.lookup(&l.var) {
                        Some(Sym::Var(s)) => s,
                        _ => return Err(invalid(l.span, format!("loop variable '{}' is not a scalar", l.var))),
                    },
                };
                let bound = self.expr(&l.bound, l.span)?;
                let (step, down) = match &l.step {
                    LoopStep::Inc => (LExpr::Int(1), false),
                    LoopStep::Dec => (LExpr::Int(1), true),
                    LoopStep::Add(e) => (self.expr(e, l.span)?, false),
                    LoopStep::Sub(e) => (self.expr(e, l.span)?, true),
                };
                let body = self.block(&l.body)?;
                self.scopes.pop();
                LStmt::For { var, init, cmp: l.cmp, bound, step, down, body, line }
            }
            Stmt::If { cond, then_body, else_body, span } => LStmt::If {
                cond: self.expr(cond, *span)?,
                then_body: self.block(then_body)?,
                else_body: match else_body {
                    Some(e) => self.block(e)?,
                    None => vec![],
                },
                line,
            },
            Stmt::Block(b) => LStmt::Block(self.block(b)?),
        })
    }
}

pub(crate) fn lower(p: &KernelProgram, cfg: &AcceleratorConfig, bindings: &Bindings) -> Result<Lowered, SimError> {
    let mut l = Lowerer { cfg, bindings, scopes: vec![HashMap::new()], arrays: Vec::new(), var_types: Vec::new(), n_statics: 0 };
    for param in &p.params {
        let def = l.array_def(&param.name, param.elem, &param.dims, param.span)?;
        let arr = l.arrays.len();
        l.arrays.push(def);
        l.declare(&param.name, Sym::Arr(arr));
    }
    let n_params = l.arrays.len();
    let body = l.block(&p.body)?;
    Ok(Lowered { arrays: l.arrays, n_params, var_types: l.var_types, n_statics: l.n_statics, body })
}

/// Counters gathered by any run.
#[derive(Debug, Clone, Default)]
pub(crate) struct Counters {
    pub nodes: u64,
    pub instr_counts: BTreeMap<String, u64>,
    pub dram_in: u64,
    pub dram_out: u64,
}

pub(crate) struct Interp<'a> {
    prog: &'a Lowered,
    vars: Vec<Value>,
    pub bufs: Vec<Buffer>,
    statics_done: Vec<bool>,
    pub accel: Box<dyn Accelerator + Send>,
    pub timing: Option<TimingModel>,
    max_nodes: u64,
    pub counters: Counters,
}

type R<T> = Result<T, SimError>;

fn exec_err(line: u32, error: ExecError) -> SimError {
    SimError::Exec { line, error }
}

fn bad(line: u32, msg: impl Into<String>) -> SimError {
    exec_err(line, ExecError::BadOperand(msg.into()))
}

impl<'a> Interp<'a> {
    pub fn new(
        prog: &'a Lowered,
        cfg: &AcceleratorConfig,
        inputs: &BTreeMap<String, ArrayData>,
        timing: Option<TimingModel>,
        max_nodes: u64,
    ) -> R<Self> {
        let mut bufs = Vec::with_capacity(prog.arrays.len());
        for (i, def) in prog.arrays.iter().enumerate() {
            let data = match inputs.get(&def.name).filter(|_| i < prog.n_params) {
                Some(a) => {
                    if a.dims != def.dims || a.kind() != def.kind {
                        return Err(SimError::Input(format!(
                            "input '{}' has shape {:?} of {:?}, expected {:?} of {:?}",
                            def.name,
                            a.dims,
                            a.kind(),
                            def.dims,
                            def.kind
                        )));
                    }
                    a.data.clone()
                }
                None => Data::zeros(def.kind, def.len()),
            };
            bufs.push(Buffer { name: def.name.clone(), dims: def.dims.clone(), data });
        }
        Ok(Interp {
            prog,
            vars: vec![Value::Int(0); prog.var_types.len()],
            bufs,
            statics_done: vec![false; prog.n_statics],
            accel: new_accelerator(cfg),
            timing,
            max_nodes,
            counters: Counters::default(),
        })
    }

    pub fn run(&mut self) -> R<()> {
        let prog = self.prog;
        self.block(&prog.body)
    }

    /// Final contents of the parameter arrays.
    pub fn outputs(&self) -> BTreeMap<String, ArrayData> {
        self.bufs[..self.prog.n_params].iter().map(|b| (b.name.clone(), ArrayData { dims: b.dims.clone(), data: b.data.clone() })).collect()
    }

    fn tick(&mut self, n: u64) -> R<()> {
        self.counters.nodes += n;
        if self.counters.nodes > self.max_nodes {
            return Err(SimError::Runaway { limit: self.max_nodes });
        }
        Ok(())
    }

    fn block(&mut self, stmts: &[LStmt]) -> R<()> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn convert(&self, ty: ScalarType, v: Value, line: u32) -> R<Value> {
        Ok(match (v, is_float_type(ty)) {
            (Value::Int(i), false) => Value::Int(wrap_int(ty, i)),
            (Value::Float(f), false) => Value::Int(wrap_int(ty, f as i64)),
            (Value::Int(i), true) => Value::Float(round_float(ty, i as f64)),
            (Value::Float(f), true) => Value::Float(round_float(ty, f)),
            (Value::Ptr(_), _) => return Err(bad(line, "an array address cannot be stored in a scalar")),
        })
    }

    fn stmt(&mut self, s: &LStmt) -> R<()> {
        self.tick(1)?;
        match s {
            LStmt::Scalar { slot, init, static_id } => {
                if let Some(id) = static_id {
                    if self.statics_done[*id] {
                        return Ok(());
                    }
                    self.statics_done[*id] = true;
                }
                let ty = self.prog.var_types[*slot];
                let v = match init {
                    Some(e) => self.eval(e, 0)?,
                    None => Value::Int(0),
                };
                self.vars[*slot] = self.convert(ty, v, 0)?;
            }
            LStmt::Array { arr, init, static_id } => {
                if let Some(id) = static_id {
                    if self.statics_done[*id] {
                        return Ok(());
                    }
                    self.statics_done[*id] = true;
                }
                let def = &self.prog.arrays[*arr];
                self.bufs[*arr].data = Data::zeros(def.kind, def.len());
                if let Some(items) = init {
                    for (i, e) in items.iter().enumerate() {
                        let v = self.eval(e, 0)?;
                        self.store_elem(*arr, i, v, 0)?;
                    }
                }
            }
            LStmt::Assign { target, op, value, line } => {
                let v = self.eval(value, *line)?;
                match target {
                    Target::Var(slot) => {
                        let v = match op {
                            Some(op) => self.binary(*op, self.vars[*slot], v, *line)?,
                            None => v,
                        };
                        self.vars[*slot] = self.convert(self.prog.var_types[*slot], v, *line)?;
                    }
                    Target::Elem { arr, idx } => {
                        let i = self.elem_index(*arr, idx, *line)?;
                        let v = match op {
                            Some(op) => {
                                let old = self.load_elem(*arr, i);
                                self.binary(*op, old, v, *line)?
                            }
                            None => v,
                        };
                        self.store_elem(*arr, i, v, *line)?;
                    }
                }
            }
            LStmt::Call { kind, args, line } => self.call(*kind, args, *line)?,
            LStmt::For { var, init, cmp, bound, step, down, body, line } => {
                let ty = self.prog.var_types[*var];
                let v = self.eval(init, *line)?;
                self.vars[*var] = self.convert(ty, v, *line)?;
                loop {
                    self.tick(1)?;
                    let b = self.eval(bound, *line)?;
                    if !self.binary(*cmp, self.vars[*var], b, *line)?.truthy() {
                        break;
                    }
                    self.block(body)?;
                    let st = self.eval(step, *line)?;
                    let op = if *down { BinOp::Sub } else { BinOp::Add };
                    let next = self.binary(op, self.vars[*var], st, *line)?;
                    self.vars[*var] = self.convert(ty, next, *line)?;
                    self.tick(1)?;
                }
            }
            LStmt::If { cond, then_body, else_body, line } => {
                if self.eval(cond, *line)?.truthy() {
                    self.block(then_body)?;
                } else {
                    self.block(else_body)?;
                }
            }
            LStmt::Block(b) => self.block(b)?,
        }
        Ok(())
    }

    fn elem_offset(&mut self, arr: usize, idx: &[LExpr], line: u32) -> R<i64> {
        let mut off: i64 = 0;
        for (k, e) in idx.iter().enumerate() {
            let i = match self.eval(e, line)? {
                Value::Int(i) => i,
                _ => return Err(bad(line, format!("index into '{}' is not an integer", self.prog.arrays[arr].name))),
            };
            off = off.wrapping_add(i.wrapping_mul(self.prog.arrays[arr].strides[k] as i64));
        }
        Ok(off)
    }

    fn elem_index(&mut self, arr: usize, idx: &[LExpr], line: u32) -> R<usize> {
        let off = self.elem_offset(arr, idx, line)?;
        self.check_index(arr, off, line)
    }

    fn check_index(&self, buf: usize, off: i64, line: u32) -> R<usize> {
        let len = self.bufs[buf].data.len();
        if off < 0 || off as usize >= len {
            return Err(exec_err(line, ExecError::DramOutOfBounds { array: self.bufs[buf].name.clone(), index: off, len }));
        }
        Ok(off as usize)
    }

    fn load_elem(&self, buf: usize, i: usize) -> Value {
        let b = &self.bufs[buf];
        match &b.data {
            Data::F32(v) => Value::Float(v[i] as f64),
            d => Value::Int(wrap_int(self.prog.arrays[buf].ty, d.get(i) as i64)),
        }
    }

    fn store_elem(&mut self, buf: usize, i: usize, v: Value, line: u32) -> R<()> {
        let ty = self.prog.arrays[buf].ty;
        match self.convert(ty, v, line)? {
            Value::Int(x) => self.bufs[buf].data.set_int(i, x),
            Value::Float(x) => self.bufs[buf].data.set(i, x),
            Value::Ptr(_) => unreachable!("convert rejects pointers"),
        }
        Ok(())
    }

    fn eval(&mut self, e: &LExpr, line: u32) -> R<Value> {
        self.tick(1)?;
        Ok(match e {
            LExpr::Int(v) => Value::Int(*v),
            LExpr::Float(v) => Value::Float(*v),
            LExpr::Var(s) => self.vars[*s],
            LExpr::Elem { arr, idx } => {
                let i = self.elem_index(*arr, idx, line)?;
                self.load_elem(*arr, i)
            }
            LExpr::Ptr { arr, idx } => Value::Ptr(Ptr { buf: *arr, off: self.elem_offset(*arr, idx, line)? }),
            LExpr::Unary(op, a) => {
                let v = self.eval(a, line)?;
                match (op, v) {
                    (UnOp::Not, v) => Value::Int(i64::from(!v.truthy())),
                    (UnOp::Neg, Value::Int(i)) => Value::Int(i.wrapping_neg()),
                    (UnOp::Neg, Value::Float(f)) => Value::Float(-f),
                    (UnOp::BitNot, Value::Int(i)) => Value::Int(!i),
                    _ => return Err(bad(line, format!("operator '{}' needs an integer or number", op.symbol()))),
                }
            }
            LExpr::Binary(BinOp::And, a, b) => {
                let r = self.eval(a, line)?.truthy() && self.eval(b, line)?.truthy();
                Value::Int(i64::from(r))
            }
            LExpr::Binary(BinOp::Or, a, b) => {
                let r = self.eval(a, line)?.truthy() || self.eval(b, line)?.truthy();
                Value::Int(i64::from(r))
            }
            LExpr::Binary(op, a, b) => {
                let x = self.eval(a, line)?;
                let y = self.eval(b, line)?;
                self.binary(*op, x, y, line)?
            }
            LExpr::Ternary(c, a, b) => {
                if self.eval(c, line)?.truthy() {
                    self.eval(a, line)?
                } else {
                    self.eval(b, line)?
                }
            }
            LExpr::Cast(ty, a) => {
                let v = self.eval(a, line)?;
                self.convert(*ty, v, line)?
            }
        })
    }

    fn binary(&self, op: BinOp, x: Value, y: Value, line: u32) -> R<Value> {
        Ok(match (x, y) {
            (Value::Int(a), Value::Int(b)) => Value::Int(int_binop(op, a, b).map_err(|e| bad(line, e.to_string()))?),
            (Value::Ptr(p), Value::Int(i)) if matches!(op, BinOp::Add | BinOp::Sub) => {
                let d = if op == BinOp::Add { i } else { i.wrapping_neg() };
                Value::Ptr(Ptr { buf: p.buf, off: p.off.wrapping_add(d) })
            }
            (Value::Int(i), Value::Ptr(p)) if op == BinOp::Add => Value::Ptr(Ptr { buf: p.buf, off: p.off.wrapping_add(i) }),
            (Value::Ptr(p), Value::Ptr(q)) if p.buf == q.buf => match op {
                BinOp::Sub => Value::Int(p.off - q.off),
                BinOp::Eq => Value::Int(i64::from(p.off == q.off)),
                BinOp::Ne => Value::Int(i64::from(p.off != q.off)),
                _ => return Err(bad(line, format!("operator '{}' on array addresses", op.symbol()))),
            },
            (Value::Ptr(_), _) | (_, Value::Ptr(_)) => return Err(bad(line, format!("operator '{}' on array addresses", op.symbol()))),
            (a, b) => {
                let a = as_f64(a);
                let b = as_f64(b);
                match op {
                    BinOp::Add => Value::Float(a + b),
                    BinOp::Sub => Value::Float(a - b),
                    BinOp::Mul => Value::Float(a * b),
                    BinOp::Div => Value::Float(a / b),
                    BinOp::Lt => Value::Int(i64::from(a < b)),
                    BinOp::Le => Value::Int(i64::from(a <= b)),
                    BinOp::Gt => Value::Int(i64::from(a > b)),
                    BinOp::Ge => Value::Int(i64::from(a >= b)),
                    BinOp::Eq => Value::Int(i64::from(a == b)),
                    BinOp::Ne => Value::Int(i64::from(a != b)),
                    BinOp::And => Value::Int(i64::from(a != 0.0 && b != 0.0)),
                    BinOp::Or => Value::Int(i64::from(a != 0.0 || b != 0.0)),
                    _ => return Err(bad(line, format!("operator '{}' needs integer operands", op.symbol()))),
                }
            }
        })
    }

    fn call(&mut self, kind: IntrinsicKind, args: &[LExpr], line: u32) -> R<()> {
        self.tick(1)?;
        let intr = intrinsics::INTRINSICS.iter().find(|i| i.kind == kind).expect("kind in table");
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, line)?);
        }
        let int = |i: usize| -> R<i64> {
            match vals[i] {
                Value::Int(v) => Ok(v),
                Value::Float(f) => Ok(f as i64),
                Value::Ptr(_) => Err(bad(line, format!("argument {} of '{}' must be an integer", i + 1, intr.name))),
            }
        };
        let local = |i: usize| -> R<u32> { int(i).map(|v| v as u32) };
        let scale = |i: usize| -> R<f64> {
            match vals.get(i) {
                None => Ok(1.0),
                Some(Value::Int(v)) => Ok(*v as f64),
                Some(Value::Float(f)) => Ok(*f),
                Some(Value::Ptr(_)) => Err(bad(line, format!("argument {} of '{}' must be a number", i + 1, intr.name))),
            }
        };
        let dram = |i: usize| -> R<DramArg> {
            match vals[i] {
                Value::Ptr(p) => Ok(DramArg::Ptr(p)),
                Value::Int(0) => Ok(DramArg::Zero),
                _ => Err(bad(line, format!("argument {} of '{}' must be an array address or 0", i + 1, intr.name))),
            }
        };
        let array = |i: usize| -> R<Ptr> {
            match vals[i] {
                Value::Ptr(p) => Ok(p),
                _ => Err(bad(line, format!("argument {} of '{}' must be an array", i + 1, intr.name))),
            }
        };
        debug_assert!(intr.args.iter().all(|k| *k != ArgKind::Any) || kind == IntrinsicKind::HardwareFsm);
        let instr = match kind {
            IntrinsicKind::ConfigEx => {
                Instr::ConfigEx { dataflow: int(0)?, activation: int(1)?, a_stride: int(2)?, a_transpose: int(3)?, b_transpose: int(4)? }
            }
            IntrinsicKind::ConfigLd => Instr::ConfigLd { stride: int(0)?, scale: scale(1)?, block_stride: int(2)?, id: int(3)? },
            IntrinsicKind::Mvin(channel) => Instr::Mvin { channel, dram: dram(0)?, local: local(1)?, cols: int(2)?, rows: int(3)? },
            IntrinsicKind::Preload => {
                Instr::Preload { b: local(0)?, c: local(1)?, b_cols: int(2)?, b_rows: int(3)?, c_cols: int(4)?, c_rows: int(5)? }
            }
            IntrinsicKind::ComputePreloaded | IntrinsicKind::ComputeAccumulated => Instr::Compute {
                accumulated: kind == IntrinsicKind::ComputeAccumulated,
                a: local(0)?,
                bias: local(1)?,
                a_cols: int(2)?,
                a_rows: int(3)?,
                bias_cols: int(4)?,
                bias_rows: int(5)?,
            },
            IntrinsicKind::ConfigSt => Instr::ConfigSt { stride: int(0)?, scale: scale(1)? },
            IntrinsicKind::Mvout => Instr::Mvout { dram: dram(0)?, local: local(1)?, cols: int(2)?, rows: int(3)? },
            IntrinsicKind::Fence => {
                *self.counters.instr_counts.entry("fence".into()).or_default() += 1;
                if let Some(t) = self.timing.as_mut() {
                    t.fence(self.counters.nodes);
                }
                return Ok(());
            }
            IntrinsicKind::NegateMatrix => {
                let (src, dst) = (array(0)?, array(1)?);
                let n = int(2)?.saturating_mul(int(3)?);
                return self.helper(intr.name, &[src], dst, n, line, |v| -v[0]);
            }
            IntrinsicKind::AddMatrix => {
                let (a, b, dst) = (array(0)?, array(1)?, array(2)?);
                let n = int(3)?.saturating_mul(int(4)?);
                return self.helper(intr.name, &[a, b], dst, n, line, |v| v[0] + v[1]);
            }
            IntrinsicKind::HardwareFsm => return Err(exec_err(line, ExecError::Unsupported(format!("hardware-FSM call '{}'", intr.name)))),
        };
        let fp = self.accel.exec(&instr, &mut self.bufs).map_err(|e| exec_err(line, e))?;
        *self.counters.instr_counts.entry(instr.name().into()).or_default() += 1;
        self.counters.dram_in += fp.dram_in;
        self.counters.dram_out += fp.dram_out;
        if let Some(t) = self.timing.as_mut() {
            t.instr(self.counters.nodes, &instr, &fp);
        }
        Ok(())
    }

    /// Element-wise host helper over `n` contiguous elements.
    fn helper(&mut self, name: &str, srcs: &[Ptr], dst: Ptr, n: i64, line: u32, f: impl Fn(&[Value]) -> Value) -> R<()> {
        if n < 0 {
            return Err(bad(line, format!("{name}: negative element count")));
        }
        self.tick(n as u64 * HELPER_NODES_PER_ELEM)?;
        *self.counters.instr_counts.entry(name.into()).or_default() += 1;
        let float = self.prog.arrays[dst.buf].kind.is_float();
        let mut operands = Vec::with_capacity(srcs.len());
        for k in 0..n {
            operands.clear();
            for s in srcs {
                let i = self.check_index(s.buf, s.off + k, line)?;
                let v = self.load_elem(s.buf, i);
                // Host arithmetic happens in the destination's type.
                operands.push(match (v, float) {
                    (Value::Int(x), true) => Value::Float(x as f64),
                    (v, _) => v,
                });
            }
            let r = match f(&operands) {
                Value::Float(x) if float => Value::Float(x as f32 as f64),
                v => v,
            };
            let r = match r {
                Value::Float(x) if !float => Value::Int(x as i64),
                Value::Int(x) if operands.iter().any(|o| matches!(o, Value::Float(_))) => Value::Float(x as f64),
                v => v,
            };
            let i = self.check_index(dst.buf, dst.off + k, line)?;
            self.store_elem(dst.buf, i, r, line)?;
        }
        Ok(())
    }
}

impl std::ops::Neg for Value {
    type Output = Value;
    fn neg(self) -> Value {
        match self {
            Value::Int(i) => Value::Int(i.wrapping_neg()),
            Value::Float(f) => Value::Float(-f),
            p => p,
        }
    }
}

impl std::ops::Add for Value {
    type Output = Value;
    fn add(self, o: Value) -> Value {
        match (self, o) {
            (Value::Int(a), Value::Int(b)) => Value::Int(a.wrapping_add(b)),
            (a, b) => Value::Float((as_f64(a) as f32 + as_f64(b) as f32) as f64),
        }
    }
}

fn as_f64(v: Value) -> f64 {
    match v {
        Value::Int(i) => i as f64,
        Value::Float(f) => f,
        Value::Ptr(_) => f64::NAN,
    }
}

fn round_float(ty: ScalarType, x: f64) -> f64 {
    if ty == ScalarType::Float {
        x as f32 as f64
    } else {
        x
    }
}

//! Static checks against an accelerator configuration.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::diag::{codes, Diagnostic};
use super::intrinsics::{self, ArgKind, IntrinsicKind};
use crate::sim::address::{LocalAddress, NO_ADDRESS};
use crate::sim::AcceleratorConfig;

/// Externally supplied named integer constants (e.g. `NHORIZON`).
pub type Bindings = BTreeMap<String, i64>;

pub fn validate_kernel(p: &KernelProgram, cfg: &AcceleratorConfig) -> Vec<Diagnostic> {
    validate_kernel_with(p, cfg, &Bindings::new())
}

pub fn validate_kernel_with(p: &KernelProgram, cfg: &AcceleratorConfig, bindings: &Bindings) -> Vec<Diagnostic> {
    let mut v = Validator { cfg, bindings, scopes: vec![HashMap::new()], diags: Vec::new() };
    if p.name != "test" {
        v.diags.push(Diagnostic::error(
            codes::FUNCTION_NAME,
            Span::new(1, 1),
            format!("kernel function must be named 'test', found '{}'", p.name),
        ));
    }
    for param in &p.params {
        v.check_param(param);
    }
    v.block(&p.body, false);
    v.diags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    Scalar { is_const: bool },
    Array { ndims: usize },
}

/// What an expression denotes, as far as static checking can tell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Scalar,
    /// An array or sub-array that decays to an address.
    Array,
    /// `&a[i][j]`.
    Pointer,
}

struct Validator<'a> {
    cfg: &'a AcceleratorConfig,
    bindings: &'a Bindings,
    scopes: Vec<HashMap<String, Sym>>,
    diags: Vec<Diagnostic>,
}

/// Folds an expression built only from literals and named constants.
pub fn const_eval(e: &Expr, bindings: &Bindings) -> Option<i64> {
    Some(match e {
        Expr::Int(l) => l.value,
        Expr::Ident(n) => intrinsics::builtin_constant(n).or_else(|| bindings.get(n).copied())?,
        Expr::Unary(op, a) => {
            let a = const_eval(a, bindings)?;
            match op {
                UnOp::Neg => a.wrapping_neg(),
                UnOp::BitNot => !a,
                UnOp::Not => i64::from(a == 0),
            }
        }
        Expr::Binary(op, a, b) => {
            let a = const_eval(a, bindings)?;
            let b = const_eval(b, bindings)?;
            crate::sim::value::int_binop(*op, a, b).ok()?
        }
        Expr::Ternary(c, a, b) => {
            if const_eval(c, bindings)? != 0 {
                const_eval(a, bindings)?
            } else {
                const_eval(b, bindings)?
            }
        }
        Expr::Cast(ty, a) => crate::sim::value::wrap_int(*ty, const_eval(a, bindings)?),
        Expr::SizeOf(ty) => crate::sim::value::sizeof_static(*ty)? as i64,
        _ => return None,
    })
}

impl Validator<'_> {
    fn lookup(&self, name: &str) -> Option<Sym> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn is_constant_name(&self, name: &str) -> bool {
        intrinsics::builtin_constant(name).is_some() || self.bindings.contains_key(name)
    }

    fn declare(&mut self, name: &str, sym: Sym, span: Span) {
        let scope = self.scopes.last_mut().expect("scope stack non-empty");
        if scope.insert(name.to_string(), sym).is_some() {
            self.diags.push(Diagnostic::error(codes::REDECLARED, span, format!("'{name}' is already declared in this scope")));
        }
    }

    fn check_dims(&mut self, dims: &[Expr], span: Span, what: &str) -> Option<u64> {
        let mut total: u64 = 1;
        for d in dims {
            match const_eval(d, self.bindings) {
                Some(n) if n >= 1 => total = total.checked_mul(n as u64)?,
                Some(n) => {
                    self.diags.push(Diagnostic::error(codes::PARAM_SHAPE, span, format!("{what} dimension {n} must be at least 1")));
                    return None;
                }
                None => {
                    self.diags.push(Diagnostic::error(codes::VLA, span, format!("{what} dimension must be a compile-time constant")));
                    return None;
                }
            }
        }
        Some(total)
    }

    fn check_param(&mut self, p: &ArrayParam) {
        match self.cfg.storage_kind(p.elem) {
            Some(_) => {}
            None => self.diags.push(Diagnostic::error(
                codes::PARAM_TYPE,
                p.span,
                format!("parameter '{}' has unsupported element type {}", p.name, p.elem.spelling()),
            )),
        }
        if p.dims.is_empty() || p.dims.len() > 3 {
            self.diags.push(Diagnostic::error(
                codes::PARAM_SHAPE,
                p.span,
                format!("parameter '{}' must be an array with 1 to 3 dimensions", p.name),
            ));
        }
        let what = format!("parameter '{}'", p.name);
        if let Some(total) = self.check_dims(&p.dims, p.span, &what) {
            let bytes = self.cfg.storage_kind(p.elem).map(|k| k.bytes() as u64).unwrap_or(1);
            if total.checked_mul(bytes).is_none_or(|b| b > i64::MAX as u64) {
                self.diags.push(Diagnostic::error(codes::PARAM_SHAPE, p.span, format!("{what} is too large")));
            }
        }
        self.declare(&p.name, Sym::Array { ndims: p.dims.len() }, p.span);
    }

    fn block(&mut self, stmts: &[Stmt], new_scope: bool) {
        if new_scope {
            self.scopes.push(HashMap::new());
        }
        for s in stmts {
            self.stmt(s);
        }
        if new_scope {
            self.scopes.pop();
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Decl(d) => {
                for dim in &d.dims {
                    self.expr(dim, d.span);
                }
                if !d.dims.is_empty() {
                    let what = format!("array '{}'", d.name);
                    self.check_dims(&d.dims, d.span, &what);
                    if self.cfg.storage_kind(d.ty).is_none() {
                        self.diags.push(Diagnostic::error(
                            codes::PARAM_TYPE,
                            d.span,
                            format!("array '{}' has unsupported element type {}", d.name, d.ty.spelling()),
                        ));
                    }
                }
                match &d.init {
                    Some(Init::Expr(e)) => {
                        if !d.dims.is_empty() {
                            self.diags.push(Diagnostic::error(codes::ARG_TYPE, d.span, "array initializer must be a brace list"));
                        }
                        self.scalar_expr(e, d.span);
                    }
                    Some(Init::List(items)) => {
                        if d.dims.is_empty() {
                            self.diags.push(Diagnostic::error(codes::ARG_TYPE, d.span, "brace initializer on a scalar"));
                        }
                        for it in items {
                            self.scalar_expr(it, d.span);
                        }
                    }
                    None => {}
                }
                let sym = if d.dims.is_empty() { Sym::Scalar { is_const: d.is_const } } else { Sym::Array { ndims: d.dims.len() } };
                self.declare(&d.name, sym, d.span);
            }
            Stmt::Assign { target, value, span, .. } => {
                self.assign_target(target, *span);
                self.scalar_expr(value, *span);
            }
            Stmt::Expr { expr, span } => match expr {
                Expr::Call { name, args, span } => self.call(name, args, *span),
                _ => {
                    self.expr(expr, *span);
                    self.diags.push(Diagnostic::warning(codes::MISPLACED_CALL, *span, "expression statement has no effect"));
                }
            },
            Stmt::For(l) => {
                self.scopes.push(HashMap::new());
                self.scalar_expr(&l.init, l.span);
                match l.var_ty {
                    Some(_) => self.declare(&l.var, Sym::Scalar { is_const: false }, l.span),
                    None => self.assign_target(&Expr::Ident(l.var.clone()), l.span),
                }
                self.scalar_expr(&l.bound, l.span);
                if let LoopStep::Add(e) | LoopStep::Sub(e) = &l.step {
                    self.scalar_expr(e, l.span);
                }
                self.block(&l.body, true);
                self.scopes.pop();
            }
            Stmt::If { cond, then_body, else_body, span } => {
                self.scalar_expr(cond, *span);
                self.block(then_body, true);
                if let Some(e) = else_body {
                    self.block(e, true);
                }
            }
            Stmt::Block(b) => self.block(b, true),
        }
    }

    fn assign_target(&mut self, target: &Expr, span: Span) {
        match target {
            Expr::Ident(n) => match self.lookup(n) {
                Some(Sym::Scalar { is_const: false }) => {}
                Some(Sym::Scalar { is_const: true }) => {
                    self.diags.push(Diagnostic::error(codes::NOT_ASSIGNABLE, span, format!("cannot assign to const '{n}'")))
                }
                Some(Sym::Array { .. }) => {
                    self.diags.push(Diagnostic::error(codes::NOT_ASSIGNABLE, span, format!("cannot assign to array '{n}'")))
                }
                None => self.undeclared(n, span),
            },
            Expr::Index { .. } => {
                if self.expr(target, span) != Shape::Scalar {
                    self.diags.push(Diagnostic::error(codes::NOT_ASSIGNABLE, span, "assignment target is not an element"));
                }
            }
            _ => self.diags.push(Diagnostic::error(codes::NOT_ASSIGNABLE, span, "invalid assignment target")),
        }
    }

    fn undeclared(&mut self, name: &str, span: Span) {
        self.diags.push(Diagnostic::error(codes::UNDECLARED, span, format!("'{name}' is used before it is declared")));
    }

    fn scalar_expr(&mut self, e: &Expr, span: Span) {
        if self.expr(e, span) != Shape::Scalar {
            self.diags.push(Diagnostic::error(codes::ARG_TYPE, span, "array used where a scalar value is required"));
        }
    }

    fn expr(&mut self, e: &Expr, span: Span) -> Shape {
        match e {
            Expr::Int(_) | Expr::Float { .. } | Expr::SizeOf(_) => Shape::Scalar,
            Expr::Ident(n) => match self.lookup(n) {
                Some(Sym::Scalar { .. }) => Shape::Scalar,
                Some(Sym::Array { .. }) => Shape::Array,
                None if self.is_constant_name(n) => Shape::Scalar,
                None => {
                    self.undeclared(n, span);
                    Shape::Scalar
                }
            },
            Expr::Index { .. } => {
                let Some((root, indices)) = e.index_chain() else {
                    self.diags.push(Diagnostic::error(codes::ARG_TYPE, span, "only named arrays can be indexed"));
                    return Shape::Scalar;
                };
                for i in &indices {
                    self.scalar_expr(i, span);
                }
                match self.lookup(root) {
                    Some(Sym::Array { ndims }) if indices.len() < ndims => Shape::Array,
                    Some(Sym::Array { ndims }) if indices.len() == ndims => Shape::Scalar,
                    Some(Sym::Array { ndims }) => {
                        self.diags.push(Diagnostic::error(
                            codes::ARG_TYPE,
                            span,
                            format!("'{root}' has {ndims} dimension(s) but is indexed {} time(s)", indices.len()),
                        ));
                        Shape::Scalar
                    }
                    Some(Sym::Scalar { .. }) => {
                        self.diags.push(Diagnostic::error(codes::ARG_TYPE, span, format!("'{root}' is not an array")));
                        Shape::Scalar
                    }
                    None => {
                        self.undeclared(root, span);
                        Shape::Scalar
                    }
                }
            }
            Expr::AddrOf(inner) => {
                if matches!(inner.as_ref(), Expr::Index { .. }) && self.expr(inner, span) == Shape::Scalar {
                    Shape::Pointer
                } else {
                    self.diags.push(Diagnostic::error(codes::ARG_TYPE, span, "'&' must be applied to an array element"));
                    Shape::Pointer
                }
            }
            Expr::Unary(_, a) | Expr::Cast(_, a) => {
                self.scalar_expr(a, span);
                Shape::Scalar
            }
            Expr::Binary(_, a, b) => {
                self.scalar_expr(a, span);
                self.scalar_expr(b, span);
                Shape::Scalar
            }
            Expr::Ternary(c, a, b) => {
                self.scalar_expr(c, span);
                self.scalar_expr(a, span);
                self.scalar_expr(b, span);
                Shape::Scalar
            }
            Expr::Call { name, span, .. } => {
                self.diags.push(Diagnostic::error(
                    codes::MISPLACED_CALL,
                    *span,
                    format!("'{name}' does not produce a value and must be called as a statement"),
                ));
                Shape::Scalar
            }
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], span: Span) {
        let Some(intr) = intrinsics::lookup(name) else {
            self.diags.push(Diagnostic::error(codes::UNKNOWN_INTRINSIC, span, format!("unknown intrinsic '{name}'")));
            return;
        };
        if !intr.executable() {
            self.diags.push(Diagnostic::error(
                codes::NOT_EXECUTABLE,
                span,
                format!("'{name}' is a hardware-FSM call and cannot be simulated"),
            ));
        }
        if args.len() < intr.min_args() || args.len() > intr.max_args() {
            let expected =
                if intr.optional == 0 { format!("{}", intr.max_args()) } else { format!("{} to {}", intr.min_args(), intr.max_args()) };
            self.diags.push(Diagnostic::error(codes::ARITY, span, format!("'{name}' takes {expected} argument(s), found {}", args.len())));
            for a in args {
                self.expr(a, span);
            }
            return;
        }
        for (pos, (arg, kind)) in args.iter().zip(intr.args).enumerate() {
            let shape = self.expr(arg, span);
            let n = pos + 1;
            match kind {
                ArgKind::Dram => {
                    let zero = const_eval(arg, self.bindings) == Some(0);
                    if shape == Shape::Scalar && !zero {
                        self.diags.push(Diagnostic::error(
                            codes::ARG_TYPE,
                            span,
                            format!("argument {n} of '{name}' must be an array address or 0"),
                        ));
                    }
                }
                ArgKind::Array => {
                    if shape == Shape::Scalar {
                        self.diags.push(Diagnostic::error(codes::ARG_TYPE, span, format!("argument {n} of '{name}' must be an array")));
                    }
                }
                ArgKind::Any => {}
                _ => {
                    if shape != Shape::Scalar {
                        self.diags.push(Diagnostic::error(codes::ARG_TYPE, span, format!("argument {n} of '{name}' must be a scalar")));
                    }
                }
            }
            if matches!(kind, ArgKind::Local | ArgKind::LocalOrNone) {
                self.check_const_address(arg, *kind, name, n, span);
            }
        }
        self.check_const_sizes(intr.kind, args, name, span);
    }

    fn check_const_address(&mut self, arg: &Expr, kind: ArgKind, name: &str, n: usize, span: Span) {
        let Some(v) = const_eval(arg, self.bindings) else { return };
        let raw = v as u32;
        if raw == NO_ADDRESS {
            if kind == ArgKind::Local {
                self.diags.push(Diagnostic::error(codes::ARG_TYPE, span, format!("argument {n} of '{name}' cannot be 0xffffffff")));
            }
            return;
        }
        let addr = LocalAddress::decode_read(raw);
        if addr.is_accumulator() {
            if addr.row >= self.cfg.acc_rows() {
                self.diags.push(Diagnostic::error(
                    codes::ACC_RANGE,
                    span,
                    format!("accumulator row out of range: {} >= {}", addr.row, self.cfg.acc_rows()),
                ));
            }
        } else if addr.row >= self.cfg.spad_rows() {
            self.diags.push(Diagnostic::error(
                codes::SPAD_RANGE,
                span,
                format!("scratchpad row out of range: {} >= {}", addr.row, self.cfg.spad_rows()),
            ));
        }
    }

    fn check_const_sizes(&mut self, kind: IntrinsicKind, args: &[Expr], name: &str, span: Span) {
        let dim = self.cfg.dim as i64;
        // (argument index, limit, label)
        let limits: &[(usize, i64, &str)] = match kind {
            IntrinsicKind::Mvin(_) => &[(2, 4 * dim, "cols"), (3, dim, "rows")],
            IntrinsicKind::Mvout => &[(2, dim, "cols"), (3, dim, "rows")],
            IntrinsicKind::Preload | IntrinsicKind::ComputePreloaded | IntrinsicKind::ComputeAccumulated => {
                &[(2, dim, "size"), (3, dim, "size"), (4, dim, "size"), (5, dim, "size")]
            }
            _ => &[],
        };
        for &(i, limit, label) in limits {
            if let Some(v) = args.get(i).and_then(|a| const_eval(a, self.bindings)) {
                if v < 0 || v > limit {
                    self.diags.push(Diagnostic::error(
                        codes::ARG_TYPE,
                        span,
                        format!("'{name}' {label} argument {v} exceeds the limit {limit}"),
                    ));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{has_errors, parse_kernel};

    fn check(src: &str) -> Vec<Diagnostic> {
        validate_kernel(&parse_kernel(src).unwrap(), &AcceleratorConfig::int8_16x16())
    }

    #[test]
    fn mvout_arity() {
        let d = check("void test(int8_t C[16][16]) { mvout(C, 0, 16, 16, 1); }");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, codes::ARITY);
    }

    #[test]
    fn spad_row_literal_out_of_range() {
        // 256 KB / (16 lanes * 1 byte) = 16384 rows.
        let d = check("void test(int8_t A[16][16]) { mvin(A, 16384, 16, 16); }");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("scratchpad row out of range"));
        assert!(check("void test(int8_t A[16][16]) { mvin(A, 16383, 16, 16); }").is_empty());
    }

    #[test]
    fn acc_row_literal_out_of_range() {
        let d = check("void test(int8_t C[16][16]) { mvout(C, 0x80000400, 16, 16); }");
        assert_eq!(d[0].code, codes::ACC_RANGE);
    }

    #[test]
    fn use_before_declare() {
        let d = check("void test() { uint32_t a = b; uint32_t b = 1; }");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, codes::UNDECLARED);
    }

    #[test]
    fn loop_scope_ends_with_loop() {
        let d = check("void test() { for (int i = 0; i < 2; i++) {} uint32_t x = i; }");
        assert_eq!(d[0].code, codes::UNDECLARED);
    }

    #[test]
    fn variable_length_array_rejected() {
        let d = check("void test() { uint32_t n = 4; int buf[n]; }");
        assert!(d.iter().any(|d| d.code == codes::VLA));
    }

    #[test]
    fn dram_argument_kinds() {
        assert!(check("void test(int8_t A[16][64]) { mvin(&A[0][16], 0, 16, 16); mvin(A[1], 0, 16, 16); mvin(0, 0, 16, 16); }").is_empty());
        let d = check("void test(int8_t A[16][64]) { mvin(5, 0, 16, 16); }");
        assert_eq!(d[0].code, codes::ARG_TYPE);
    }

    #[test]
    fn bound_constants_resolve() {
        let p = parse_kernel("void test(float x[NHORIZON + 1][12][1]) { fence(); }").unwrap();
        let cfg = AcceleratorConfig::fp32_4x4();
        assert!(has_errors(&validate_kernel(&p, &cfg)));
        let b: Bindings = [("NHORIZON".to_string(), 5)].into();
        assert!(validate_kernel_with(&p, &cfg, &b).is_empty());
    }

    #[test]
    fn hardware_fsm_not_executable() {
        let d = check("void test() { gemmini_fence(); }");
        assert_eq!(d[0].code, codes::NOT_EXECUTABLE);
    }

    #[test]
    fn too_many_rows_constant() {
        let d = check("void test(int8_t A[32][16]) { mvin(A, 0, 16, 32); }");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("rows"));
    }
}

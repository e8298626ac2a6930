//! Syntax tree for accelerator kernels.
//!
//! Source positions are carried on statements and calls for diagnostics, but
//! [`Span`] compares equal to every other span so that structural equality of
//! two trees ignores where their nodes came from.

use std::fmt;

/// Line/column of a node in the source text (1-based).
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Scalar type names accepted by the dialect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarType {
    Int8,
    Uint8,
    Int16,
    Uint16,
    Int32,
    Uint32,
    Int64,
    Uint64,
    IntFast32,
    UintFast32,
    Int,
    Unsigned,
    Long,
    SizeT,
    Bool,
    Char,
    Float,
    Double,
    /// `elem_t`: the accelerator's input element type.
    ElemT,
    /// `acc_t`: the accelerator's accumulator type.
    AccT,
}

impl ScalarType {
    pub const ALL: [ScalarType; 20] = [
        ScalarType::Int8,
        ScalarType::Uint8,
        ScalarType::Int16,
        ScalarType::Uint16,
        ScalarType::Int32,
        ScalarType::Uint32,
        ScalarType::Int64,
        ScalarType::Uint64,
        ScalarType::IntFast32,
        ScalarType::UintFast32,
        ScalarType::Int,
        ScalarType::Unsigned,
        ScalarType::Long,
        ScalarType::SizeT,
        ScalarType::Bool,
        ScalarType::Char,
        ScalarType::Float,
        ScalarType::Double,
        ScalarType::ElemT,
        ScalarType::AccT,
    ];

    pub fn spelling(self) -> &'static str {
        match self {
            ScalarType::Int8 => "int8_t",
            ScalarType::Uint8 => "uint8_t",
            ScalarType::Int16 => "int16_t",
            ScalarType::Uint16 => "uint16_t",
            ScalarType::Int32 => "int32_t",
            ScalarType::Uint32 => "uint32_t",
            ScalarType::Int64 => "int64_t",
            ScalarType::Uint64 => "uint64_t",
            ScalarType::IntFast32 => "int_fast32_t",
            ScalarType::UintFast32 => "uint_fast32_t",
            ScalarType::Int => "int",
            ScalarType::Unsigned => "unsigned",
            ScalarType::Long => "long",
            ScalarType::SizeT => "size_t",
            ScalarType::Bool => "bool",
            ScalarType::Char => "char",
            ScalarType::Float => "float",
            ScalarType::Double => "double",
            ScalarType::ElemT => "elem_t",
            ScalarType::AccT => "acc_t",
        }
    }

    pub fn from_spelling(s: &str) -> Option<ScalarType> {
        ScalarType::ALL.iter().copied().find(|t| t.spelling() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Mul,
    Div,
    Rem,
    Add,
    Sub,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    And,
    Or,
}

impl BinOp {
    /// C precedence level; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Mul | BinOp::Div | BinOp::Rem => 10,
            BinOp::Add | BinOp::Sub => 9,
            BinOp::Shl | BinOp::Shr => 8,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 7,
            BinOp::Eq | BinOp::Ne => 6,
            BinOp::BitAnd => 5,
            BinOp::BitXor => 4,
            BinOp::BitOr => 3,
            BinOp::And => 2,
            BinOp::Or => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::BitAnd => "&",
            BinOp::BitXor => "^",
            BinOp::BitOr => "|",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    BitNot,
    Not,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::BitNot => "~",
            UnOp::Not => "!",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    BitAnd,
    BitOr,
    BitXor,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Rem => "%=",
            AssignOp::Shl => "<<=",
            AssignOp::Shr => ">>=",
            AssignOp::BitAnd => "&=",
            AssignOp::BitOr => "|=",
            AssignOp::BitXor => "^=",
        }
    }

    /// The binary operator a compound assignment applies, `None` for `=`.
    pub fn binop(self) -> Option<BinOp> {
        Some(match self {
            AssignOp::Set => return None,
            AssignOp::Add => BinOp::Add,
            AssignOp::Sub => BinOp::Sub,
            AssignOp::Mul => BinOp::Mul,
            AssignOp::Div => BinOp::Div,
            AssignOp::Rem => BinOp::Rem,
            AssignOp::Shl => BinOp::Shl,
            AssignOp::Shr => BinOp::Shr,
            AssignOp::BitAnd => BinOp::BitAnd,
            AssignOp::BitOr => BinOp::BitOr,
            AssignOp::BitXor => BinOp::BitXor,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntLit {
    pub value: i64,
    pub hex: bool,
    pub unsigned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(IntLit),
    /// Floating literal; `single` records an `f` suffix.
    Float {
        value: f64,
        single: bool,
    },
    Ident(String),
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    AddrOf(Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Cast(ScalarType, Box<Expr>),
    SizeOf(ScalarType),
    Call {
        name: String,
        args: Vec<Expr>,
        span: Span,
    },
}

impl Expr {
    pub fn int(value: i64) -> Expr {
        Expr::Int(IntLit { value, hex: false, unsigned: false })
    }

    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Ident(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Root identifier of an identifier or index chain, if any.
    pub fn root_ident(&self) -> Option<&str> {
        match self {
            Expr::Ident(n) => Some(n),
            Expr::Index { base, .. } => base.root_ident(),
            _ => None,
        }
    }

    /// Splits `a[i][j]` into (`a`, [i, j]).
    pub fn index_chain(&self) -> Option<(&str, Vec<&Expr>)> {
        let mut idx = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Expr::Index { base, index } => {
                    idx.push(index.as_ref());
                    cur = base;
                }
                Expr::Ident(name) => {
                    idx.reverse();
                    return Some((name, idx));
                }
                _ => return None,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Expr(Expr),
    List(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub is_static: bool,
    pub is_const: bool,
    pub ty: ScalarType,
    pub name: String,
    /// Array dimensions; empty for scalars.
    pub dims: Vec<Expr>,
    pub init: Option<Init>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoopStep {
    Inc,
    Dec,
    Add(Expr),
    Sub(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForLoop {
    /// Type of the induction variable when it is declared in the header.
    pub var_ty: Option<ScalarType>,
    pub var: String,
    pub init: Expr,
    pub cmp: BinOp,
    pub bound: Expr,
    pub step: LoopStep,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Decl(Decl),
    Assign { target: Expr, op: AssignOp, value: Expr, span: Span },
    Expr { expr: Expr, span: Span },
    For(ForLoop),
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Option<Vec<Stmt>>, span: Span },
    Block(Vec<Stmt>),
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Decl(d) => d.span,
            Stmt::Assign { span, .. } | Stmt::Expr { span, .. } | Stmt::If { span, .. } => *span,
            Stmt::For(f) => f.span,
            Stmt::Block(b) => b.first().map(Stmt::span).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayParam {
    pub name: String,
    pub elem: ScalarType,
    pub dims: Vec<Expr>,
    pub span: Span,
}

/// A parsed kernel: one `void test(...)` function.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProgram {
    pub name: String,
    pub params: Vec<ArrayParam>,
    pub body: Vec<Stmt>,
}

impl KernelProgram {
    pub fn param(&self, name: &str) -> Option<&ArrayParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Visits every statement in program order, descending into bodies.
    pub fn walk_stmts<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        fn go<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
            for s in stmts {
                f(s);
                match s {
                    Stmt::For(l) => go(&l.body, f),
                    Stmt::If { then_body, else_body, .. } => {
                        go(then_body, f);
                        if let Some(e) = else_body {
                            go(e, f);
                        }
                    }
                    Stmt::Block(b) => go(b, f),
                    _ => {}
                }
            }
        }
        go(&self.body, f);
    }

    /// Number of statements, counting nested ones.
    pub fn stmt_count(&self) -> usize {
        let mut n = 0;
        self.walk_stmts(&mut |_| n += 1);
        n
    }

    /// Depth of the deepest loop nest.
    pub fn max_loop_depth(&self) -> usize {
        fn depth(stmts: &[Stmt]) -> usize {
            stmts
                .iter()
                .map(|s| match s {
                    Stmt::For(l) => 1 + depth(&l.body),
                    Stmt::If { then_body, else_body, .. } => depth(then_body).max(else_body.as_deref().map(depth).unwrap_or(0)),
                    Stmt::Block(b) => depth(b),
                    _ => 0,
                })
                .max()
                .unwrap_or(0)
        }
        depth(&self.body)
    }
}

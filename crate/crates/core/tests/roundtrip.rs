use proptest::prelude::*;
use tensopt_core::dsl::{
    parse_kernel, print_kernel, ArrayParam, AssignOp, BinOp, Decl, Expr, ForLoop, Init, IntLit, KernelProgram, LoopStep, ScalarType, Span,
    Stmt, UnOp,
};

const BINOPS: &[BinOp] = &[
    BinOp::Mul,
    BinOp::Div,
    BinOp::Rem,
    BinOp::Add,
    BinOp::Sub,
    BinOp::Shl,
    BinOp::Shr,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::BitAnd,
    BinOp::BitXor,
    BinOp::BitOr,
    BinOp::And,
    BinOp::Or,
];
const UNOPS: &[UnOp] = &[UnOp::Neg, UnOp::BitNot, UnOp::Not];
const ASSIGN_OPS: &[AssignOp] = &[AssignOp::Set, AssignOp::Add, AssignOp::Sub, AssignOp::Mul, AssignOp::Shl, AssignOp::BitOr];
const TYPES: &[ScalarType] =
    &[ScalarType::Int8, ScalarType::Uint32, ScalarType::Int, ScalarType::IntFast32, ScalarType::Float, ScalarType::ElemT];
const NAMES: &[&str] = &["a", "b", "i", "j", "acc_base", "x0"];
const CMPS: &[BinOp] = &[BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Ne];

fn pick<T: Clone + std::fmt::Debug + 'static>(xs: &'static [T]) -> impl Strategy<Value = T> {
    (0..xs.len()).prop_map(move |i| xs[i].clone())
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0i64..=0xffff_ffff, any::<bool>(), any::<bool>()).prop_map(|(value, hex, unsigned)| Expr::Int(IntLit { value, hex, unsigned })),
        (pick(&[0.0, 0.5, 1.0, 2.25, 1e-3, 123456.0]), any::<bool>()).prop_map(|(value, single)| Expr::Float { value, single }),
        pick(NAMES).prop_map(Expr::ident),
        pick(TYPES).prop_map(Expr::SizeOf),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 4, |inner| {
        prop_oneof![
            (pick(BINOPS), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (pick(UNOPS), inner.clone()).prop_map(|(op, e)| Expr::Unary(op, Box::new(e))),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, f)| Expr::Ternary(Box::new(c), Box::new(t), Box::new(f))),
            (pick(TYPES), inner.clone()).prop_map(|(t, e)| Expr::Cast(t, Box::new(e))),
            (pick(NAMES), prop::collection::vec(inner.clone(), 1..3)).prop_map(|(n, idx)| {
                idx.into_iter().fold(Expr::ident(n), |b, i| Expr::Index { base: Box::new(b), index: Box::new(i) })
            }),
            (pick(NAMES), inner.clone())
                .prop_map(|(n, i)| Expr::AddrOf(Box::new(Expr::Index { base: Box::new(Expr::ident(n)), index: Box::new(i) }))),
            (pick(&["mvin", "preload", "fence", "add_matrix"]), prop::collection::vec(inner, 0..4)).prop_map(|(n, args)| Expr::Call {
                name: n.to_string(),
                args,
                span: Span::default()
            }),
        ]
    })
}

fn lvalue() -> impl Strategy<Value = Expr> {
    (pick(NAMES), prop::collection::vec(expr(), 0..2))
        .prop_map(|(n, idx)| idx.into_iter().fold(Expr::ident(n), |b, i| Expr::Index { base: Box::new(b), index: Box::new(i) }))
}

fn simple_stmt() -> impl Strategy<Value = Stmt> {
    let decl = (any::<bool>(), any::<bool>(), pick(TYPES), pick(NAMES), prop::collection::vec(expr(), 0..2), prop::option::of(expr()))
        .prop_map(|(is_static, is_const, ty, name, dims, init)| {
            let init = match (dims.is_empty(), init) {
                (_, None) => None,
                (true, Some(e)) => Some(Init::Expr(e)),
                (false, Some(e)) => Some(Init::List(vec![e, Expr::int(1)])),
            };
            Stmt::Decl(Decl { is_static, is_const, ty, name: name.into(), dims, init, span: Span::default() })
        });
    prop_oneof![
        decl,
        (lvalue(), pick(ASSIGN_OPS), expr()).prop_map(|(target, op, value)| Stmt::Assign { target, op, value, span: Span::default() }),
        expr().prop_map(|expr| Stmt::Expr { expr, span: Span::default() }),
    ]
}

fn stmt() -> impl Strategy<Value = Stmt> {
    simple_stmt().prop_recursive(3, 24, 3, |inner| {
        let body = prop::collection::vec(inner, 0..3);
        let step = prop_oneof![Just(LoopStep::Inc), Just(LoopStep::Dec), expr().prop_map(LoopStep::Add), expr().prop_map(LoopStep::Sub),];
        prop_oneof![
            (prop::option::of(pick(TYPES)), pick(NAMES), expr(), pick(CMPS), expr(), step, body.clone()).prop_map(
                |(var_ty, var, init, cmp, bound, step, body)| Stmt::For(ForLoop {
                    var_ty,
                    var: var.into(),
                    init,
                    cmp,
                    bound,
                    step,
                    body,
                    span: Span::default()
                })
            ),
            (expr(), body.clone(), prop::option::of(body.clone())).prop_map(|(cond, then_body, else_body)| Stmt::If {
                cond,
                then_body,
                else_body,
                span: Span::default()
            }),
            body.prop_map(Stmt::Block),
        ]
    })
}

fn program() -> impl Strategy<Value = KernelProgram> {
    let param = (pick(&["A", "B", "C"]), pick(TYPES), prop::collection::vec(1i64..512, 1..4)).prop_map(|(n, elem, dims)| ArrayParam {
        name: n.into(),
        elem,
        dims: dims.into_iter().map(Expr::int).collect(),
        span: Span::default(),
    });
    (prop::collection::vec(param, 1..4), prop::collection::vec(stmt(), 0..6)).prop_map(|(params, body)| KernelProgram {
        name: "test".into(),
        params,
        body,
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn printed_programs_parse_back_to_the_same_tree(p in program()) {
        let text = print_kernel(&p);
        let back = parse_kernel(&text).map_err(|d| TestCaseError::fail(format!("{d:?}\n{text}")))?;
        prop_assert_eq!(back, p, "{}", text);
    }
}

#[test]
fn hex_literals_stay_hex() {
    let p = parse_kernel("void test(int8_t A[4]) { uint32_t x = 0x40000000; }").unwrap();
    let text = print_kernel(&p);
    assert!(text.contains("0x40000000"), "{text}");
    assert_eq!(parse_kernel(&text).unwrap(), p);
}

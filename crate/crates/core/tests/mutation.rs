use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensopt_core::dsl::intrinsics::{lookup, ArgKind};
use tensopt_core::dsl::{parse_kernel, BinOp, Expr, KernelProgram, Stmt};
use tensopt_core::sim::AcceleratorConfig;
use tensopt_core::verify::{check_equivalence, CheckOptions, Tolerance, WorkloadSpec};

#[derive(Debug, Clone, Copy)]
enum Mutation {
    Drop(usize),
    Bound(usize, i64),
    Swap(usize),
}

fn call_of(s: &Stmt) -> Option<&str> {
    match s {
        Stmt::Expr { expr: Expr::Call { name, .. }, .. } => Some(name),
        _ => None,
    }
}

fn children(s: &mut Stmt) -> Vec<&mut Vec<Stmt>> {
    match s {
        Stmt::For(l) => vec![&mut l.body],
        Stmt::If { then_body, else_body, .. } => {
            let mut v = vec![then_body];
            v.extend(else_body.as_mut());
            v
        }
        Stmt::Block(b) => vec![b],
        _ => vec![],
    }
}

/// Applies the drop or bound mutation at site `t`, counting sites in `seen`.
fn walk(stmts: &mut Vec<Stmt>, m: Mutation, seen: &mut usize, desc: &mut Option<String>) {
    let mut i = 0;
    while i < stmts.len() {
        match m {
            Mutation::Drop(t) if call_of(&stmts[i]).is_some() => {
                if *seen == t && desc.is_none() {
                    *desc = Some(format!("drop {} @{}", call_of(&stmts[i]).unwrap(), stmts[i].span().line));
                    stmts.remove(i);
                    *seen += 1;
                    continue;
                }
                *seen += 1;
            }
            Mutation::Bound(t, delta) => {
                if let Stmt::For(l) = &mut stmts[i] {
                    if *seen == t && desc.is_none() {
                        *desc = Some(format!("bound {:+} @{}", delta, l.span.line));
                        let op = if delta > 0 { BinOp::Add } else { BinOp::Sub };
                        l.bound = Expr::binary(op, l.bound.clone(), Expr::int(delta.abs()));
                    }
                    *seen += 1;
                }
            }
            _ => {}
        }
        for body in children(&mut stmts[i]) {
            walk(body, m, seen, desc);
        }
        i += 1;
    }
}

fn local_arg(name: &str) -> Option<usize> {
    lookup(name)?.args.iter().position(|a| matches!(a, ArgKind::Local | ArgKind::LocalOrNone))
}

fn calls<'a>(stmts: &'a mut [Stmt], out: &mut Vec<(String, &'a mut Vec<Expr>)>) {
    for s in stmts {
        match s {
            Stmt::Expr { expr: Expr::Call { name, args, .. }, span } => {
                if local_arg(name).is_some_and(|i| i < args.len()) {
                    out.push((format!("{name} @{}", span.line), args));
                }
            }
            Stmt::For(l) => calls(&mut l.body, out),
            Stmt::If { then_body, else_body, .. } => {
                calls(then_body, out);
                if let Some(e) = else_body {
                    calls(e, out);
                }
            }
            Stmt::Block(b) => calls(b, out),
            _ => {}
        }
    }
}

/// The mutant, a description, or `None` when the mutation is a no-op.
fn apply(p: &KernelProgram, m: Mutation) -> Option<(KernelProgram, String)> {
    let mut q = p.clone();
    let mut desc = None;
    match m {
        Mutation::Drop(_) | Mutation::Bound(..) => walk(&mut q.body, m, &mut 0, &mut desc),
        Mutation::Swap(t) => {
            let mut cs = Vec::new();
            calls(&mut q.body, &mut cs);
            if t + 1 >= cs.len() {
                return None;
            }
            let (head, tail) = cs.split_at_mut(t + 1);
            let (na, a) = &mut head[t];
            let (nb, b) = &mut tail[0];
            let arg = |n: &str| local_arg(n.split(' ').next().unwrap()).unwrap();
            let (ia, ib) = (arg(na), arg(nb));
            if a[ia] == b[ib] {
                return None;
            }
            desc = Some(format!("swap {na} / {nb}"));
            std::mem::swap(&mut a[ia], &mut b[ib]);
        }
    }
    desc.map(|d| (q, d))
}

fn all_mutations(p: &KernelProgram) -> Vec<Mutation> {
    let count = |m: fn(usize) -> Mutation| {
        let mut seen = 0;
        walk(&mut p.clone().body, m(usize::MAX), &mut seen, &mut None);
        seen
    };
    let drops = count(Mutation::Drop);
    let loops = count(|t| Mutation::Bound(t, 1));
    let mut body = p.body.clone();
    let mut cs = Vec::new();
    calls(&mut body, &mut cs);
    let mut v: Vec<Mutation> = (0..drops).map(Mutation::Drop).collect();
    v.extend((0..loops).flat_map(|t| [Mutation::Bound(t, 1), Mutation::Bound(t, -1)]));
    v.extend((0..cs.len().saturating_sub(1)).map(Mutation::Swap));
    v
}

struct Outcome {
    total: usize,
    survivors: Vec<String>,
}

fn run_suite(src: &str, spec: WorkloadSpec, cfg: AcceleratorConfig, opts: CheckOptions, cap: usize) -> Outcome {
    let p = parse_kernel(src).unwrap();
    assert!(check_equivalence(&p, &spec, &cfg, &opts).correct, "unmutated kernel must pass");
    let mut ms = all_mutations(&p);
    ms.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let mut out = Outcome { total: 0, survivors: Vec::new() };
    for m in ms {
        if out.total == cap {
            break;
        }
        let Some((q, desc)) = apply(&p, m) else { continue };
        out.total += 1;
        if check_equivalence(&q, &spec, &cfg, &opts).correct {
            out.survivors.push(desc);
        }
    }
    out
}

// Hand-audited semantics-preserving mutants, by asset. Anything else that
// survives is a checker miss.
const AUDITED: &[(&str, &str, &str)] = &[
    ("unopt", "bound +1 @11", "extra zeroing writes accumulator rows 64..79, never read"),
    ("unopt", "bound +1 @22", "extra preload/compute writes accumulator rows 64..79, never read"),
    ("unopt", "drop fence @33", "trailing fence"),
    ("exo", "drop config_ld @6", "channel 0 only zero-fills, which ignores its stride"),
    ("autocomp", "bound +1 @61", "extra A block lands in unused scratchpad rows"),
    ("autocomp", "bound -1 @31", "br < 255 visits the same multiples of 16"),
    ("autocomp", "drop config_ld @25", "channel 0 is unused"),
    ("tinympc unopt", "drop config_ex @19", "reset dataflow"),
    ("tinympc unopt", "drop config_ex @44", "repeats line 19"),
    ("tinympc unopt", "drop config_ex @83", "repeats line 19"),
    ("tinympc unopt", "drop config_ld @23", "channel 2 is unused"),
    ("tinympc unopt", "drop config_ld @46", "repeats line 21"),
    ("tinympc unopt", "drop config_ld @47", "repeats line 22"),
    ("tinympc unopt", "drop config_ld @48", "channel 2 is unused"),
    ("tinympc unopt", "drop config_ld @86", "repeats line 22"),
    ("tinympc unopt", "drop config_ld @87", "channel 2 is unused"),
    ("tinympc unopt", "drop config_st @45", "repeats line 20"),
    ("tinympc unopt", "drop config_st @84", "repeats line 20"),
    ("tinympc unopt", "drop fence @35", "stores complete in program order and DRAM is not hazard-tracked"),
    ("tinympc unopt", "drop fence @80", "stores complete in program order and DRAM is not hazard-tracked"),
    ("tinympc unopt", "drop fence @101", "stores complete in program order and DRAM is not hazard-tracked"),
    ("tinympc unopt", "drop mvin2 @52", "x[i][0] is already at x_sp_addr from line 25"),
    ("tinympc unopt", "drop mvin2 @53", "x[i][4] is already at x_sp_addr + 4 from line 28"),
    ("tinympc unopt", "drop mvin2 @54", "x[i][8] is already at x_sp_addr + 8 from line 31"),
    ("tinympc autocomp", "drop config_ex @19", "reset dataflow"),
    ("tinympc autocomp", "drop config_ld @27", "repeats line 23"),
    ("tinympc autocomp", "drop fence @104", "stores complete in program order and DRAM is not hazard-tracked"),
    ("tinympc autocomp", "drop preload @59", "A operand is the zero row block, so the kept weights contribute nothing"),
    ("conv", "drop config_ex @3", "reset dataflow"),
    ("conv", "drop fence @29", "trailing fence"),
];

fn report(name: &str, o: &Outcome) -> (usize, usize) {
    let detected = o.total - o.survivors.len();
    println!("{name}: {detected}/{} mutants detected; survivors {:?}", o.total, o.survivors);
    assert!(o.total > 0);
    let missed: Vec<&String> = o.survivors.iter().filter(|s| !AUDITED.iter().any(|(a, d, _)| *a == name && d == s)).collect();
    assert!(missed.is_empty(), "{name}: unaudited survivors {missed:?}");
    (o.total, o.survivors.len())
}

// Detection over the mutants that are not audited as equivalent.
fn assert_rate(total: usize, equivalent: usize, detected: usize) {
    let rate = detected as f64 / (total - equivalent) as f64;
    println!("raw detection {:.3}, over non-equivalent mutants {rate:.3}", detected as f64 / total as f64);
    assert!(rate >= 0.95);
}

fn quick() -> CheckOptions {
    CheckOptions { n_functional: 3, n_timed: 1, ..Default::default() }
}

#[test]
fn gemm_asset_mutants_are_caught() {
    let (mut total, mut equivalent) = (0, 0);
    for (name, src) in [
        ("unopt", include_str!("../assets/gemm_12544x64x256_unopt.gk")),
        ("exo", include_str!("../assets/gemm_12544x64x256_exo_opt.gk")),
        ("autocomp", include_str!("../assets/gemm_12544x64x256_autocomp.gk")),
    ] {
        let opts = CheckOptions { n_functional: 1, n_timed: 1, ..Default::default() };
        let o = run_suite(src, WorkloadSpec::gemm(12544, 256, 64), AcceleratorConfig::int8_16x16(), opts, 24);
        let (n, eq) = report(name, &o);
        total += n;
        equivalent += eq;
    }
    assert_rate(total, equivalent, total - equivalent);
}

#[test]
fn small_kernel_mutants_are_caught() {
    let conv: WorkloadSpec =
        serde_json::from_str(r#"{"kind":"conv","batch":1,"in_ch":16,"out_ch":16,"spatial":7,"kernel":3,"stride":1,"padding":1}"#).unwrap();
    let fused = CheckOptions { tolerance: Tolerance { relative: 1e-4, absolute: 1e-4 }, ..quick() };
    let suites = [
        ("tinympc unopt", include_str!("../assets/tinympc_fwd_unopt.gk"), WorkloadSpec::tinympc(5), AcceleratorConfig::fp32_4x4(), quick()),
        (
            "tinympc autocomp",
            include_str!("../assets/tinympc_fwd_autocomp.gk"),
            WorkloadSpec::tinympc(5),
            AcceleratorConfig::fp32_4x4(),
            fused,
        ),
        ("conv", include_str!("../assets/conv_1x7x7x16x16_k3.gk"), conv, AcceleratorConfig::int8_16x16(), quick()),
    ];
    let (mut total, mut equivalent) = (0, 0);
    for (name, src, spec, cfg, opts) in suites {
        let (n, eq) = report(name, &run_suite(src, spec, cfg, opts, usize::MAX));
        total += n;
        equivalent += eq;
    }
    assert_rate(total, equivalent, total - equivalent);
}

//! Recursive-descent parser for the kernel dialect.

use super::ast::*;
use super::diag::{codes, Diagnostic};
use super::intrinsics::{self, IGNORED_ATTRIBUTES};
use super::lexer::{tokenize, Tok, Token};

/// Parses kernel source. Failure yields at least one error diagnostic.
pub fn parse_kernel(src: &str) -> Result<KernelProgram, Vec<Diagnostic>> {
    let tokens = tokenize(src).map_err(|d| vec![d])?;
    let mut p = Parser { toks: tokens, pos: 0 };
    p.program().map_err(|d| vec![d])
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Int { value, .. } => format!("integer {value}"),
        Tok::Float { value, .. } => format!("number {value}"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".into(),
    }
}

const KEYWORDS: &[&str] = &["for", "if", "else", "void", "static", "const", "sizeof", "while", "return"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err_expected(&self, what: &str) -> Diagnostic {
        Diagnostic::error(codes::SYNTAX, self.span(), format!("expected {what}, found {}", describe(self.peek())))
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.err_expected(&format!("'{p}'")))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && ScalarType::from_spelling(&s).is_none() => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err_expected("identifier")),
        }
    }

    fn peek_type(&self) -> Option<ScalarType> {
        match self.peek() {
            Tok::Ident(s) => ScalarType::from_spelling(s),
            _ => None,
        }
    }

    fn expect_type(&mut self) -> PResult<ScalarType> {
        match self.peek_type() {
            Some(t) => {
                self.bump();
                Ok(t)
            }
            None => Err(self.err_expected("type name")),
        }
    }

    fn program(&mut self) -> PResult<KernelProgram> {
        if !self.eat_word("void") {
            return Err(self.err_expected("'void'"));
        }
        let name = self.expect_ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.is_word("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
        }
        if !self.is_punct(")") {
            loop {
                params.push(self.param()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        if !matches!(self.peek(), Tok::Eof) {
            return Err(Diagnostic::error(
                codes::SYNTAX,
                self.span(),
                format!(
                    "expected end of input after test(), found {}; all code must be inside the single test() function",
                    describe(self.peek())
                ),
            ));
        }
        Ok(KernelProgram { name, params, body })
    }

    fn param(&mut self) -> PResult<ArrayParam> {
        let span = self.span();
        self.eat_word("const");
        let elem = self.expect_type()?;
        let name = self.expect_ident()?;
        let dims = self.dims()?;
        Ok(ArrayParam { name, elem, dims, span })
    }

    fn dims(&mut self) -> PResult<Vec<Expr>> {
        let mut dims = Vec::new();
        while self.eat_punct("[") {
            dims.push(self.expr()?);
            self.expect_punct("]")?;
        }
        Ok(dims)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.err_expected("'}'"));
            }
            if let Some(s) = self.stmt()? {
                stmts.push(s);
            }
        }
        self.bump();
        Ok(stmts)
    }

    /// Loop/branch body: a braced block or a single statement.
    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_punct("{") {
            self.block()
        } else {
            Ok(self.stmt()?.into_iter().collect())
        }
    }

    fn stmt(&mut self) -> PResult<Option<Stmt>> {
        let span = self.span();
        if self.eat_punct(";") {
            return Ok(None);
        }
        if self.is_punct("{") {
            return Ok(Some(Stmt::Block(self.block()?)));
        }
        if self.is_word("for") {
            return self.for_loop().map(Some);
        }
        if self.eat_word("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_body = self.body()?;
            let else_body = if self.eat_word("else") { Some(self.body()?) } else { None };
            return Ok(Some(Stmt::If { cond, then_body, else_body, span }));
        }
        if self.is_word("while") || self.is_word("return") {
            return Err(Diagnostic::error(
                codes::SYNTAX,
                span,
                format!("'{}' is not part of the kernel dialect", describe(self.peek()).trim_matches('\'')),
            ));
        }
        if self.is_word("static") || self.is_word("const") || self.peek_type().is_some() {
            let d = self.decl()?;
            self.expect_punct(";")?;
            return Ok(Some(Stmt::Decl(d)));
        }
        let s = self.simple_stmt()?;
        self.expect_punct(";")?;
        Ok(Some(s))
    }

    fn decl(&mut self) -> PResult<Decl> {
        let span = self.span();
        let mut is_static = false;
        let mut is_const = false;
        loop {
            if self.eat_word("static") {
                is_static = true;
            } else if self.eat_word("const") {
                is_const = true;
            } else {
                break;
            }
        }
        let ty = self.expect_type()?;
        if self.eat_word("const") {
            is_const = true;
        }
        let name = self.expect_ident()?;
        let dims = self.dims()?;
        // Alignment attributes such as `row_align_acc(1)` are accepted and dropped.
        while let Tok::Ident(a) = self.peek().clone() {
            if !IGNORED_ATTRIBUTES.contains(&a.as_str()) {
                break;
            }
            self.bump();
            self.expect_punct("(")?;
            self.expr()?;
            self.expect_punct(")")?;
        }
        let init = if self.eat_punct("=") {
            if self.eat_punct("{") {
                let mut items = Vec::new();
                while !self.is_punct("}") {
                    items.push(self.expr()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct("}")?;
                Some(Init::List(items))
            } else {
                Some(Init::Expr(self.expr()?))
            }
        } else {
            None
        };
        if self.is_punct(",") {
            return Err(Diagnostic::error(codes::SYNTAX, self.span(), "declare one variable per statement"));
        }
        Ok(Decl { is_static, is_const, ty, name, dims, init, span })
    }

    /// Assignment, increment, or call statement (without the `;`).
    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        if self.is_punct("++") || self.is_punct("--") {
            let inc = self.is_punct("++");
            self.bump();
            let target = self.unary()?;
            let op = if inc { AssignOp::Add } else { AssignOp::Sub };
            return Ok(Stmt::Assign { target, op, value: Expr::int(1), span });
        }
        let lhs = self.expr()?;
        if self.is_punct("++") || self.is_punct("--") {
            let inc = self.is_punct("++");
            self.bump();
            let op = if inc { AssignOp::Add } else { AssignOp::Sub };
            return Ok(Stmt::Assign { target: lhs, op, value: Expr::int(1), span });
        }
        if let Some(op) = self.assign_op() {
            self.bump();
            let value = self.expr()?;
            return Ok(Stmt::Assign { target: lhs, op, value, span });
        }
        Ok(Stmt::Expr { expr: lhs, span })
    }

    fn assign_op(&self) -> Option<AssignOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "=" => AssignOp::Set,
            "+=" => AssignOp::Add,
            "-=" => AssignOp::Sub,
            "*=" => AssignOp::Mul,
            "/=" => AssignOp::Div,
            "%=" => AssignOp::Rem,
            "<<=" => AssignOp::Shl,
            ">>=" => AssignOp::Shr,
            "&=" => AssignOp::BitAnd,
            "|=" => AssignOp::BitOr,
            "^=" => AssignOp::BitXor,
            _ => return None,
        })
    }

    fn for_loop(&mut self) -> PResult<Stmt> {
        let span = self.span();
        self.bump();
        self.expect_punct("(")?;
        let var_ty = match self.peek_type() {
            Some(t) => {
                self.bump();
                Some(t)
            }
            None => None,
        };
        let var = self.expect_ident()?;
        self.expect_punct("=")?;
        let init = self.expr()?;
        self.expect_punct(";")?;

        let cond_span = self.span();
        let lhs = self.expect_ident()?;
        if lhs != var {
            return Err(Diagnostic::error(codes::SYNTAX, cond_span, format!("loop condition must test the induction variable '{var}'")));
        }
        let cmp = match self.peek() {
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            Tok::Punct("!=") => BinOp::Ne,
            _ => return Err(self.err_expected("comparison operator")),
        };
        self.bump();
        let bound = self.expr()?;
        self.expect_punct(";")?;

        let step_span = self.span();
        let step = if self.eat_punct("++") {
            self.expect_step_var(&var)?;
            LoopStep::Inc
        } else if self.eat_punct("--") {
            self.expect_step_var(&var)?;
            LoopStep::Dec
        } else {
            self.expect_step_var(&var)?;
            if self.eat_punct("++") {
                LoopStep::Inc
            } else if self.eat_punct("--") {
                LoopStep::Dec
            } else if self.eat_punct("+=") {
                LoopStep::Add(self.expr()?)
            } else if self.eat_punct("-=") {
                LoopStep::Sub(self.expr()?)
            } else if self.eat_punct("=") {
                // i = i + e / i = i - e
                let e = self.expr()?;
                match e {
                    Expr::Binary(BinOp::Add, l, r) if matches!(l.as_ref(), Expr::Ident(n) if *n == var) => LoopStep::Add(*r),
                    Expr::Binary(BinOp::Sub, l, r) if matches!(l.as_ref(), Expr::Ident(n) if *n == var) => LoopStep::Sub(*r),
                    _ => return Err(Diagnostic::error(codes::SYNTAX, step_span, "loop step must be additive")),
                }
            } else {
                return Err(self.err_expected("loop step"));
            }
        };
        self.expect_punct(")")?;
        let body = self.body()?;
        Ok(Stmt::For(ForLoop { var_ty, var, init, cmp, bound, step, body, span }))
    }

    fn expect_step_var(&mut self, var: &str) -> PResult<()> {
        let sp = self.span();
        let v = self.expect_ident()?;
        if v != var {
            return Err(Diagnostic::error(codes::SYNTAX, sp, format!("loop step must update '{var}'")));
        }
        Ok(())
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(1)?;
        if self.eat_punct("?") {
            let a = self.expr()?;
            self.expect_punct(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "<<" => BinOp::Shl,
            ">>" => BinOp::Shr,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&" => BinOp::BitAnd,
            "^" => BinOp::BitXor,
            "|" => BinOp::BitOr,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_punct("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        if self.eat_punct("~") {
            return Ok(Expr::Unary(UnOp::BitNot, Box::new(self.unary()?)));
        }
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat_punct("&") {
            return Ok(Expr::AddrOf(Box::new(self.unary()?)));
        }
        if self.is_punct("(") {
            if let Tok::Ident(s) = self.peek_at(1) {
                if let Some(ty) = ScalarType::from_spelling(s) {
                    if matches!(self.peek_at(2), Tok::Punct(")")) {
                        self.bump();
                        self.bump();
                        self.bump();
                        let e = self.unary()?;
                        return Ok(Expr::Cast(ty, Box::new(e)));
                    }
                }
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.eat_punct("[") {
            let idx = self.expr()?;
            self.expect_punct("]")?;
            e = Expr::Index { base: Box::new(e), index: Box::new(idx) };
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int { value, hex, unsigned } => {
                self.bump();
                Ok(Expr::Int(IntLit { value, hex, unsigned }))
            }
            Tok::Float { value, single } => {
                self.bump();
                Ok(Expr::Float { value, single })
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "sizeof" => {
                self.bump();
                self.expect_punct("(")?;
                let ty = self.expect_type()?;
                self.expect_punct(")")?;
                Ok(Expr::SizeOf(ty))
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && ScalarType::from_spelling(&s).is_none() => {
                self.bump();
                if self.is_punct("(") {
                    if intrinsics::lookup(&s).is_none() {
                        return Err(Diagnostic::error(codes::UNKNOWN_INTRINSIC, span, format!("unknown intrinsic '{s}'")));
                    }
                    self.bump();
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    return Ok(Expr::Call { name: s, args, span });
                }
                Ok(Expr::Ident(s))
            }
            _ => Err(self.err_expected("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_body() {
        let p = parse_kernel("void test(){}").unwrap();
        assert_eq!(p.name, "test");
        assert!(p.params.is_empty());
        assert!(p.body.is_empty());
    }

    #[test]
    fn precedence() {
        let p = parse_kernel("void test() { uint32_t x = 1 + 2 * 3 << 1 | 4; }").unwrap();
        let Stmt::Decl(d) = &p.body[0] else { panic!() };
        let Some(Init::Expr(e)) = &d.init else { panic!() };
        // ((1 + (2*3)) << 1) | 4
        let Expr::Binary(BinOp::BitOr, l, _) = e else { panic!("{e:?}") };
        assert!(matches!(l.as_ref(), Expr::Binary(BinOp::Shl, _, _)));
    }

    #[test]
    fn cast_and_not() {
        let p = parse_kernel("void test() { uint32_t x = ~((uint32_t)0); }").unwrap();
        let Stmt::Decl(d) = &p.body[0] else { panic!() };
        assert_eq!(d.init, Some(Init::Expr(Expr::Unary(UnOp::BitNot, Box::new(Expr::Cast(ScalarType::Uint32, Box::new(Expr::int(0))))))));
    }

    #[test]
    fn attribute_ignored() {
        let p = parse_kernel("void test() { static acc_t t[4][1] row_align_acc(1); }").unwrap();
        let Stmt::Decl(d) = &p.body[0] else { panic!() };
        assert!(d.is_static);
        assert_eq!(d.dims.len(), 2);
    }

    #[test]
    fn unknown_intrinsic() {
        let e = parse_kernel("void test() { frobnicate(1); }").unwrap_err();
        assert_eq!(e[0].code, codes::UNKNOWN_INTRINSIC);
        assert_eq!((e[0].line, e[0].col), (1, 15));
    }

    #[test]
    fn syntax_error_has_span_and_expectation() {
        let e = parse_kernel("void test() {\n  for (int i = 0; i < 4; i++ {\n  }\n}").unwrap_err();
        assert_eq!(e[0].code, codes::SYNTAX);
        assert_eq!(e[0].line, 2);
        assert!(e[0].message.contains("expected ')'"), "{}", e[0].message);
    }

    #[test]
    fn rejects_second_function() {
        let e = parse_kernel("void test() {} void other() {}").unwrap_err();
        assert!(e[0].message.contains("inside the single test()"));
    }

    #[test]
    fn define_rejected() {
        let e = parse_kernel("#define T 16\nvoid test() {}").unwrap_err();
        assert_eq!(e[0].code, codes::PREPROCESSOR);
        assert!(e[0].message.contains("preprocessor directive"));
    }

    #[test]
    fn loop_forms() {
        let p = parse_kernel(
            "void test() { for (int i = 0; i < 8; i += 2) {} for (j = 3; j >= 0; j--) ; for (int k = 0; k < 4; k = k + 1) {} }",
        )
        .unwrap();
        let Stmt::For(a) = &p.body[0] else { panic!() };
        assert_eq!(a.step, LoopStep::Add(Expr::int(2)));
        let Stmt::For(b) = &p.body[1] else { panic!() };
        assert_eq!(b.var_ty, None);
        assert_eq!(b.step, LoopStep::Dec);
        let Stmt::For(c) = &p.body[2] else { panic!() };
        assert_eq!(c.step, LoopStep::Add(Expr::int(1)));
    }
}

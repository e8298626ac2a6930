use super::ast::Span;
use super::diag::{codes, Diagnostic};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int { value: i64, hex: bool, unsigned: bool },
    Float { value: f64, single: bool },
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first so that maximal munch works by linear scan.
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "(", ")",
    "[", "]", "{", "}", ";", ",", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^", "?", ":",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut line_start = 0usize;
    // Whether only whitespace has been seen on the current line.
    let mut at_line_start = true;

    while i < bytes.len() {
        let c = bytes[i];
        let span = Span::new(line, (i - line_start + 1) as u32);
        if c == b'\n' {
            line += 1;
            i += 1;
            line_start = i;
            at_line_start = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            let msg = if at_line_start {
                "preprocessor directive found; C preprocessing is not supported"
            } else {
                "unexpected '#' (preprocessor directive)"
            };
            return Err(Diagnostic::error(codes::PREPROCESSOR, span, msg));
        }
        at_line_start = false;
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(Diagnostic::error(codes::SYNTAX, span, "unterminated block comment"));
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                    line_start = i + 1;
                }
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), span });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let (tok, len) = lex_number(&src[i..]).map_err(|m| Diagnostic::error(codes::SYNTAX, span, m))?;
            out.push(Token { tok, span });
            i += len;
            continue;
        }
        let rest = &src[i..];
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push(Token { tok: Tok::Punct(p), span });
                i += p.len();
            }
            None => {
                let ch = rest.chars().next().unwrap_or('?');
                return Err(Diagnostic::error(codes::SYNTAX, span, format!("unexpected character '{ch}'")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, (i - line_start + 1) as u32) });
    Ok(out)
}

fn lex_number(s: &str) -> Result<(Tok, usize), String> {
    let b = s.as_bytes();
    if b.len() > 1 && b[0] == b'0' && (b[1] == b'x' || b[1] == b'X') {
        let mut j = 2;
        while j < b.len() && b[j].is_ascii_hexdigit() {
            j += 1;
        }
        if j == 2 {
            return Err("malformed hex literal".into());
        }
        let value = u64::from_str_radix(&s[2..j], 16).map_err(|e| e.to_string())?;
        let value = i64::try_from(value).map_err(|_| "integer literal too large".to_string())?;
        let (unsigned, k) = int_suffix(&b[j..]);
        return Ok((Tok::Int { value, hex: true, unsigned }, j + k));
    }
    let mut j = 0;
    while j < b.len() && b[j].is_ascii_digit() {
        j += 1;
    }
    let mut is_float = false;
    if j < b.len() && b[j] == b'.' {
        is_float = true;
        j += 1;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
    }
    if j < b.len() && (b[j] == b'e' || b[j] == b'E') {
        let mut k = j + 1;
        if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
            k += 1;
        }
        if k < b.len() && b[k].is_ascii_digit() {
            while k < b.len() && b[k].is_ascii_digit() {
                k += 1;
            }
            is_float = true;
            j = k;
        }
    }
    if is_float {
        let value: f64 = s[..j].parse().map_err(|_| "malformed floating literal".to_string())?;
        let single = j < b.len() && (b[j] == b'f' || b[j] == b'F');
        return Ok((Tok::Float { value, single }, j + usize::from(single)));
    }
    let value: i64 = s[..j].parse().map_err(|_| "integer literal too large".to_string())?;
    let (unsigned, k) = int_suffix(&b[j..]);
    if j + k < b.len() && (b[j + k].is_ascii_alphanumeric() || b[j + k] == b'_') {
        return Err("malformed numeric literal".into());
    }
    Ok((Tok::Int { value, hex: false, unsigned }, j + k))
}

/// Consumes `u`/`l` suffix letters; returns whether `u` was present.
fn int_suffix(b: &[u8]) -> (bool, usize) {
    let mut k = 0;
    let mut unsigned = false;
    while k < b.len() && k < 3 {
        match b[k] {
            b'u' | b'U' => unsigned = true,
            b'l' | b'L' => {}
            _ => break,
        }
        k += 1;
    }
    (unsigned, k)
}

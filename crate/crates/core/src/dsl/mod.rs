//! The C-like kernel dialect: parsing, validation and canonical printing.

mod ast;
mod diag;
mod extract;
pub mod intrinsics;
mod lexer;
mod parser;
mod printer;
pub mod validate;

pub use ast::{ArrayParam, AssignOp, BinOp, Decl, Expr, ForLoop, Init, IntLit, KernelProgram, LoopStep, ScalarType, Span, Stmt, UnOp};
pub use diag::{codes, has_errors, Diagnostic, Severity};
pub use extract::extract_code_block;
pub use parser::parse_kernel;
pub use printer::{print_expr, print_kernel};
pub use validate::{const_eval, validate_kernel, validate_kernel_with, Bindings};

//! ApproxC front-end: lexer, parser, semantic checks, and source printer.
//!
//! ApproxC is a small imperative language: `int`/`float` scalars, fixed-size
//! 1-D/2-D arrays, `for`/`while`/`if`, functions, and typed output channels
//! (`emit_num`, `emit_pixel`, `emit_word`). Inputs are read through the
//! `in_num`/`in_pixel`/`in_len` intrinsics. The grammar is documented in
//! `docs/approxc.md`.

pub mod ast;
mod lexer;
mod parser;
mod printer;
pub(crate) mod validate;

pub use ast::*;
pub use parser::{parse_source, parse_unvalidated};
pub use printer::{expr_str, float_lit, pretty_print};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: u32,
        col: u32,
        message: String,
    },
    #[error("semantic error at {line}:{col}: {message}")]
    Semantic {
        line: u32,
        col: u32,
        message: String,
    },
}

/// Re-validate a program, e.g. after a transform pass.
pub fn revalidate(p: &Program) -> Result<(), LangError> {
    validate::validate(p)
}

/// Structural equality ignoring source positions.
pub fn ast_eq(a: &Program, b: &Program) -> bool {
    a.normalized() == b.normalized()
}

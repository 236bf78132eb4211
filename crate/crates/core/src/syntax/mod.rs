//! Concrete grammar, AST, pretty printer and name resolution.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod resolve;

use std::fmt;

pub use ast::*;
pub use parser::{parse_expr, parse_program, parse_statements};
pub use pretty::{pretty_print, print_expr, print_stmt};
pub use resolve::{resolve, NameError, ResolvedProgram};

/// A syntax error with 1-based position and the set of tokens that would
/// have been accepted there.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.col)?;
        if self.expected.is_empty() {
            write!(f, "{}", self.found)
        } else {
            write!(f, "expected {}, found {}", self.expected.join(" or "), self.found)
        }
    }
}

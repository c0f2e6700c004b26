//! Lexer, parser and pretty-printer for the concrete syntax.

pub mod lexer;
pub mod parser;
pub mod pretty;

pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse_exp_str, parse_program, parse_prop_str, parse_source, parse_type_str, ParseError};
pub use pretty::{pretty_decl, pretty_exp, pretty_proc, pretty_prop, pretty_signature, pretty_type};

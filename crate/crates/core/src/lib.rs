//! Session-typed concurrent programs with arithmetic refinements,
//! ergometric and temporal types: checker, reconstruction and interpreter.

pub mod ast;
pub mod diag;
pub mod syntax;
pub mod arith;
pub mod elaborate;
pub mod subtype;
pub mod reconstruct;
pub mod typecheck;
pub mod runtime;
pub mod cli;

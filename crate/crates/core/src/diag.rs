//! Diagnostics with source positions.

use std::fmt;

use crate::ast::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Error, span, message: message.into() }
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Warning, span, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Line/column lookup for one source file. Lines and columns are 1-based.
#[derive(Clone, Debug)]
pub struct SourceMap {
    pub name: String,
    line_starts: Vec<usize>,
    len: usize,
}

impl SourceMap {
    pub fn new(name: &str, text: &str) -> SourceMap {
        let mut line_starts = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i + 1);
            }
        }
        SourceMap { name: name.to_string(), line_starts, len: text.len() }
    }

    pub fn line_col(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.len);
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (line + 1, offset - self.line_starts[line] + 1)
    }

    pub fn render(&self, d: &Diagnostic) -> String {
        let (l1, c1) = self.line_col(d.span.start);
        let (l2, c2) = self.line_col(d.span.end);
        format!("{}:{}.{}-{}.{}: {}: {}", self.name, l1, c1, l2, c2, d.severity, d.message)
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_line_and_column() {
        let sm = SourceMap::new("f.rast", "type a = 1\ndecl f : . |- (x : a)\n");
        let d = Diagnostic::error(Span::new(16, 17), "boom");
        assert_eq!(sm.render(&d), "f.rast:2.6-2.7: error: boom");
        assert_eq!(sm.line_col(0), (1, 1));
        assert_eq!(sm.line_col(11), (2, 1));
    }
}

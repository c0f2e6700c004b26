use crate::ast::Span;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Nat(u64),
    Keyword(&'static str),
    Symbol(&'static str),
    /// Raw text after `#options` up to the end of the line.
    Pragma(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

pub const KEYWORDS: &[&str] = &[
    "case", "send", "recv", "close", "wait", "assert", "assume", "pay", "get", "work", "delay", "when",
    "now", "impossible", "type", "decl", "proc", "eqtype", "exec",
];

// Longest first so that matching is greedy.
const SYMBOLS: &[&str] = &[
    "<->", "|-", "<-", "=>", "-o", "+{", "&{", "?{", "!{", "|{", "<{", "|>", "<|", "()", "[]", "<>", "<=",
    ">=", "!=", "/\\", "\\/", "*", "+", "-", "=", ">", "<", "(", ")", "[", "]", "{", "}", ".", ",", ":",
    ";", "|", "?", "!", "~", "&",
];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '$'
}

/// Splits source text into tokens, skipping whitespace, `%` line comments
/// and nested `(* ... *)` block comments.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    while i < src.len() {
        let c = src[i..].chars().next().unwrap();
        if c == '\n' {
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '%' {
            while i < src.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("(*") {
            let start = i;
            let mut depth = 0;
            loop {
                if i >= src.len() {
                    return Err(LexError {
                        span: Span::new(start, src.len()),
                        message: "unterminated comment".into(),
                    });
                }
                if src[i..].starts_with("(*") {
                    depth += 1;
                    i += 2;
                } else if src[i..].starts_with("*)") {
                    depth -= 1;
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    i += src[i..].chars().next().unwrap().len_utf8();
                }
            }
            continue;
        }
        let was_line_start = line_start;
        line_start = false;
        if c == '#' {
            let start = i;
            while i < src.len() && bytes[i] != b'\n' && bytes[i] != b'%' {
                i += 1;
            }
            let text = src[start..i].trim_end();
            match text.strip_prefix("#options") {
                Some(rest) if was_line_start => {
                    toks.push(Token {
                        kind: TokenKind::Pragma(rest.trim().to_string()),
                        span: Span::new(start, start + text.len()),
                    });
                }
                _ => {
                    return Err(LexError {
                        span: Span::new(start, start + text.len()),
                        message: format!("unknown directive `{text}`"),
                    })
                }
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < src.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i].parse::<u64>().map_err(|_| LexError {
                span: Span::new(start, i),
                message: "numeral too large".into(),
            })?;
            toks.push(Token { kind: TokenKind::Nat(n), span: Span::new(start, i) });
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while i < src.len() {
                let d = src[i..].chars().next().unwrap();
                if !is_ident_char(d) {
                    break;
                }
                i += d.len_utf8();
            }
            let word = &src[start..i];
            let kind = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(word.to_string()),
            };
            toks.push(Token { kind, span: Span::new(start, i) });
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                toks.push(Token { kind: TokenKind::Symbol(s), span: Span::new(i, i + s.len()) });
                i += s.len();
            }
            None => {
                return Err(LexError {
                    span: Span::new(i, i + c.len_utf8()),
                    message: format!("illegal character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    fn id(s: &str) -> TokenKind {
        TokenKind::Ident(s.into())
    }

    #[test]
    fn forward() {
        assert_eq!(kinds("x <-> y"), vec![id("x"), TokenKind::Symbol("<->"), id("y")]);
    }

    #[test]
    fn empty_input() {
        assert!(kinds("").is_empty());
        assert!(kinds("  % only a comment\n (* block (* nested *) *) ").is_empty());
    }

    #[test]
    fn queue_header() {
        use TokenKind::*;
        assert_eq!(
            kinds("queue[A]{n+1}"),
            vec![
                id("queue"),
                Symbol("["),
                id("A"),
                Symbol("]"),
                Symbol("{"),
                id("n"),
                Symbol("+"),
                Nat(1),
                Symbol("}")
            ]
        );
    }

    #[test]
    fn greedy_symbols() {
        use TokenKind::*;
        assert_eq!(kinds("|{2}>"), vec![Symbol("|{"), Nat(2), Symbol("}"), Symbol(">")]);
        assert_eq!(kinds("()()[]<>"), vec![Symbol("()"), Symbol("()"), Symbol("[]"), Symbol("<>")]);
        assert_eq!(kinds("k' <= n"), vec![id("k'"), Symbol("<="), id("n")]);
        assert_eq!(kinds("$ : 1"), vec![id("$"), Symbol(":"), Nat(1)]);
    }

    #[test]
    fn pragma_and_errors() {
        assert_eq!(
            kinds("#options --work=send\ntype"),
            vec![TokenKind::Pragma("--work=send".into()), TokenKind::Keyword("type")]
        );
        let err = tokenize("type a = @").unwrap_err();
        assert_eq!(err.span, Span::new(9, 10));
        assert!(tokenize("(* open").is_err());
    }
}

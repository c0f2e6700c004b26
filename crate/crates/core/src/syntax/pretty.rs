//! Concrete-syntax printing with minimal parentheses. Output reparses to
//! an alpha-equivalent tree.

use std::fmt::Write;

use crate::ast::*;

pub fn pretty_exp(e: &Exp) -> String {
    let mut s = String::new();
    exp(&mut s, e, 0);
    s
}

// Levels: 0 sum, 1 product operand on the right of `-`/`+`, 2 factor.
fn exp(out: &mut String, e: &Exp, level: u8) {
    match e {
        Exp::Nat(n) => write!(out, "{n}").unwrap(),
        Exp::Var(v) => out.push_str(v),
        Exp::Add(a, b) | Exp::Sub(a, b) => {
            let paren = level > 0;
            if paren {
                out.push('(');
            }
            exp(out, a, 0);
            out.push_str(if matches!(e, Exp::Add(..)) { "+" } else { "-" });
            exp(out, b, 1);
            if paren {
                out.push(')');
            }
        }
        Exp::Mul(a, b) => {
            let paren = level > 1;
            if paren {
                out.push('(');
            }
            exp(out, a, 1);
            out.push('*');
            exp(out, b, 2);
            if paren {
                out.push(')');
            }
        }
    }
}

pub fn pretty_prop(p: &Prop) -> String {
    let mut s = String::new();
    prop(&mut s, p, 0);
    s
}

// Levels: 0 disjunction, 1 left of `/\`, 2 right of `/\`, 3 under `~`.
fn prop(out: &mut String, p: &Prop, level: u8) {
    match p {
        Prop::True => out.push_str("true"),
        Prop::False => out.push_str("false"),
        Prop::Eq(a, b) | Prop::Gt(a, b) => {
            if level > 2 {
                out.push('(');
            }
            exp(out, a, 0);
            out.push_str(if matches!(p, Prop::Eq(..)) { " = " } else { " > " });
            exp(out, b, 0);
            if level > 2 {
                out.push(')');
            }
        }
        Prop::Or(a, b) => {
            let paren = level > 0;
            if paren {
                out.push('(');
            }
            prop(out, a, 0);
            out.push_str(" \\/ ");
            prop(out, b, 1);
            if paren {
                out.push(')');
            }
        }
        Prop::And(a, b) => {
            let paren = level > 1;
            if paren {
                out.push('(');
            }
            prop(out, a, 1);
            out.push_str(" /\\ ");
            prop(out, b, 2);
            if paren {
                out.push(')');
            }
        }
        Prop::Not(a) => {
            out.push('~');
            prop(out, a, 3);
        }
        Prop::Exists(v, body) | Prop::Forall(v, body) => {
            let paren = level > 0;
            if paren {
                out.push('(');
            }
            out.push(if matches!(p, Prop::Exists(..)) { '?' } else { '!' });
            write!(out, "{v}. ").unwrap();
            prop(out, body, 0);
            if paren {
                out.push(')');
            }
        }
    }
}

pub fn pretty_type(t: &Type) -> String {
    let mut s = String::new();
    ty(&mut s, t, 0, true);
    s
}

// Levels: 0 anywhere, 1 right of `*`, 2 left of `-o`, 3 left of `*`.
// Prefix constructors extend to the right, so they need parentheses
// unless nothing follows them (`tail`).
fn ty(out: &mut String, t: &Type, level: u8, tail: bool) {
    let prefix = |out: &mut String, head: &str, body: &Type| {
        if !tail {
            out.push('(');
        }
        out.push_str(head);
        ty(out, body, 0, true);
        if !tail {
            out.push(')');
        }
    };
    match t {
        Type::One => out.push('1'),
        Type::Var(v) => out.push_str(v),
        Type::Name(v, tps, idx) => {
            out.push_str(v);
            type_args(out, tps, idx);
        }
        Type::Plus(bs) | Type::With(bs) => {
            out.push_str(if matches!(t, Type::Plus(_)) { "+{" } else { "&{" });
            for (i, (l, b)) in bs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write!(out, "{l} : ").unwrap();
                ty(out, b, 0, true);
            }
            out.push('}');
        }
        Type::Tensor(a, b) => {
            let paren = level > 2;
            if paren {
                out.push('(');
            }
            ty(out, a, 3, false);
            out.push_str(" * ");
            ty(out, b, 1, tail || paren);
            if paren {
                out.push(')');
            }
        }
        Type::Lolli(a, b) => {
            let paren = level > 0;
            if paren {
                out.push('(');
            }
            ty(out, a, 2, false);
            out.push_str(" -o ");
            ty(out, b, 0, tail || paren);
            if paren {
                out.push(')');
            }
        }
        Type::ExistsTp(v, b) => prefix(out, &format!("?[{v}]. "), b),
        Type::ForallTp(v, b) => prefix(out, &format!("![{v}]. "), b),
        Type::ExistsIx(v, b) => prefix(out, &format!("?{v}. "), b),
        Type::ForallIx(v, b) => prefix(out, &format!("!{v}. "), b),
        Type::Assert(p, b) => prefix(out, &format!("?{{{}}}. ", pretty_prop(p)), b),
        Type::Assume(p, b) => prefix(out, &format!("!{{{}}}. ", pretty_prop(p)), b),
        Type::Pay(r, b) => prefix(out, &format!("|{{{}}}> ", pretty_exp(r)), b),
        Type::Get(r, b) => prefix(out, &format!("<{{{}}}| ", pretty_exp(r)), b),
        Type::Next(e, b) => {
            let head = match e {
                Exp::Nat(1) => "() ".to_string(),
                _ => format!("({{{}}}) ", pretty_exp(e)),
            };
            prefix(out, &head, b)
        }
        Type::Box(b) => prefix(out, "[] ", b),
        Type::Dia(b) => prefix(out, "<> ", b),
    }
}

fn type_args(out: &mut String, tps: &[Type], idx: &[Exp]) {
    if !tps.is_empty() {
        out.push('[');
        for (i, t) in tps.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            ty(out, t, 0, true);
        }
        out.push(']');
    }
    if !idx.is_empty() {
        out.push('{');
        for (i, e) in idx.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            exp(out, e, 0);
        }
        out.push('}');
    }
}

pub fn pretty_proc(p: &Proc) -> String {
    let mut s = String::new();
    proc(&mut s, p, 0);
    s
}

fn newline(out: &mut String, indent: usize) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn opt_amount(e: &Exp) -> String {
    match e {
        Exp::Nat(1) => String::new(),
        _ => format!(" {{{}}}", pretty_exp(e)),
    }
}

fn proc(out: &mut String, p: &Proc, ind: usize) {
    use ProcKind::*;
    let seq = |out: &mut String, head: String, cont: &Proc| {
        out.push_str(&head);
        out.push_str(" ;");
        newline(out, ind);
        proc(out, cont, ind);
    };
    match &p.kind {
        SendLabel { ch, label, cont } => seq(out, format!("{ch}.{label}"), cont),
        Case { ch, branches } => {
            write!(out, "case {ch} (").unwrap();
            for (i, b) in branches.iter().enumerate() {
                newline(out, ind + 1);
                out.push_str(if i == 0 { "  " } else { "| " });
                write!(out, "{} =>", b.label).unwrap();
                newline(out, ind + 2);
                proc(out, &b.body, ind + 2);
            }
            out.push_str(" )");
        }
        SendChan { ch, arg, cont } => seq(out, format!("send {ch} {arg}"), cont),
        RecvChan { ch, var, cont } => seq(out, format!("{var} <- recv {ch}"), cont),
        Close { ch } => write!(out, "close {ch}").unwrap(),
        Wait { ch, cont } => seq(out, format!("wait {ch}"), cont),
        Fwd { x, y } => write!(out, "{x} <-> {y}").unwrap(),
        Spawn { x, f, tps, idx, args, cont } => {
            let mut head = format!("{x} <- {f}");
            type_args(&mut head, tps, idx);
            for a in args {
                head.push(' ');
                head.push_str(a);
            }
            match cont {
                Some(c) => seq(out, head, c),
                None => out.push_str(&head),
            }
        }
        SendType { ch, tp, cont } => seq(out, format!("send {ch} [{}]", pretty_type(tp)), cont),
        RecvType { ch, var, cont } => seq(out, format!("[{var}] <- recv {ch}"), cont),
        SendIdx { ch, e, cont } => seq(out, format!("send {ch} {{{}}}", pretty_exp(e)), cont),
        RecvIdx { ch, var, cont } => seq(out, format!("{{{var}}} <- recv {ch}"), cont),
        Assert { ch, phi, cont } => seq(out, format!("assert {ch} {{{}}}", pretty_prop(phi)), cont),
        Assume { ch, phi, cont } => seq(out, format!("assume {ch} {{{}}}", pretty_prop(phi)), cont),
        Pay { ch, r, cont } => seq(out, format!("pay {ch}{}", opt_amount(r)), cont),
        Get { ch, r, cont } => seq(out, format!("get {ch}{}", opt_amount(r)), cont),
        Work { r, cont } => seq(out, format!("work{}", opt_amount(r)), cont),
        Delay { t, cont } => seq(out, format!("delay{}", opt_amount(t)), cont),
        When { ch, cont } => seq(out, format!("when {ch}"), cont),
        Now { ch, cont } => seq(out, format!("now {ch}"), cont),
        Impossible => out.push_str("impossible"),
    }
}

fn tparams(out: &mut String, tps: &[String], ips: &[String]) {
    for a in tps {
        write!(out, "[{a}]").unwrap();
    }
    for n in ips {
        write!(out, "{{{n}}}").unwrap();
    }
}

pub fn pretty_pragma(p: &Pragma) -> Option<String> {
    if p.syntax.is_none() && p.work.is_none() && p.time.is_none() {
        return None;
    }
    let mut s = "#options".to_string();
    if let Some(m) = p.syntax {
        write!(s, " --syntax={m}").unwrap();
    }
    if let Some(m) = p.work {
        write!(s, " --work={m}").unwrap();
    }
    if let Some(m) = p.time {
        write!(s, " --time={m}").unwrap();
    }
    Some(s)
}

pub fn pretty_decl(d: &Decl) -> String {
    let mut out = String::new();
    match d {
        Decl::Type(t) => {
            write!(out, "type {}", t.name).unwrap();
            tparams(&mut out, &t.tparams, &t.iparams);
            write!(out, " = {}", pretty_type(&t.body)).unwrap();
        }
        Decl::Proc(p) => {
            write!(out, "decl {}", p.name).unwrap();
            for a in &p.tparams {
                write!(out, "[{a}]").unwrap();
            }
            if !p.iparams.is_empty() {
                write!(out, "{{{}", p.iparams.join(", ")).unwrap();
                if p.guard != Prop::True {
                    write!(out, " | {}", pretty_prop(&p.guard)).unwrap();
                }
                out.push('}');
            }
            out.push_str(" :");
            if p.ctx.is_empty() {
                out.push_str(" .");
            }
            for (x, t) in &p.ctx {
                write!(out, " ({x} : {})", pretty_type(t)).unwrap();
            }
            if p.pot.is_zero() {
                out.push_str(" |- ");
            } else {
                write!(out, " |{{{}}}- ", pretty_exp(&p.pot)).unwrap();
            }
            write!(out, "({} : {})", p.offer.0, pretty_type(&p.offer.1)).unwrap();
        }
        Decl::Def(p) => {
            write!(out, "proc {} <- {}", p.offered, p.name).unwrap();
            tparams(&mut out, &p.tparams, &p.iparams);
            for a in &p.args {
                write!(out, " {a}").unwrap();
            }
            out.push_str(" =\n  ");
            proc(&mut out, &p.body, 1);
        }
        Decl::EqType(e) => {
            let op = if e.kind == EqKind::Equal { "=" } else { "<=" };
            write!(out, "eqtype {} {op} {}", pretty_type(&e.left), pretty_type(&e.right)).unwrap();
        }
        Decl::Exec(e) => write!(out, "exec {}", e.name).unwrap(),
    }
    out
}

pub fn pretty_signature(sig: &Signature) -> String {
    let mut out = String::new();
    if let Some(p) = pretty_pragma(&sig.pragma) {
        out.push_str(&p);
        out.push('\n');
    }
    for d in &sig.decls {
        out.push_str(&pretty_decl(d));
        out.push_str("\n\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse_prop_str, parse_source, parse_type_str};

    #[test]
    fn bin_definition() {
        let t = Type::Plus(vec![
            ("b0".into(), Type::name("bin", vec![], vec![])),
            ("b1".into(), Type::name("bin", vec![], vec![])),
            ("e".into(), Type::One),
        ]);
        assert_eq!(pretty_type(&t), "+{b0 : bin, b1 : bin, e : 1}");
        assert_eq!(pretty_type(&Type::One), "1");
    }

    #[test]
    fn temporal_round_trip() {
        let src = "!n. [] A -o ({3}) queue[A]{n+1}";
        let t = parse_type_str(src, &["A"]).unwrap();
        let printed = pretty_type(&t);
        assert_eq!(printed, "!n. [] A -o ({3}) queue[A]{n+1}");
        assert_eq!(parse_type_str(&printed, &["A"]).unwrap(), t);
    }

    #[test]
    fn parens_only_where_needed() {
        for src in [
            "(A -o B) -o C",
            "(A * B) * C",
            "A * B * C",
            "(?{n > 0}. A) * B",
            "A * ?{n > 0}. B",
            "A * (?{n > 0}. B) -o C",
            "A * B -o C",
            "A * (B -o C)",
            "<{2*n}| &{ins : A -o <{2}| 1}",
        ] {
            let t = parse_type_str(src, &["A", "B", "C"]).unwrap();
            assert_eq!(pretty_type(&t), src);
        }
        for src in ["n-(k+1) > 0", "(n = 0 \\/ n = 1) /\\ k > 0", "~(n = 0)", "n*(k+1) = n*k+n"] {
            let p = parse_prop_str(src).unwrap();
            assert_eq!(pretty_prop(&p), src);
        }
    }

    #[test]
    fn signature_round_trip() {
        let sig = parse_source(crate::syntax::parser::tests_support::LISTING1).unwrap();
        let printed = pretty_signature(&sig);
        let again = parse_source(&printed).unwrap();
        assert_eq!(pretty_signature(&again), printed);
        assert_eq!(again.decls.len(), sig.decls.len());
    }
}

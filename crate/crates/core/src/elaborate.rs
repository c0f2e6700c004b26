//! Validity checking, internal names for type subexpressions, variance
//! inference and the reverse map used to compress types in messages.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;

use crate::arith::{show_model, Solver, Verdict};
use crate::ast::*;
use crate::diag::Diagnostic;
use crate::syntax::{pretty_exp, pretty_type};

/// Prefix of generated type names; `%` cannot start a user identifier.
pub const INTERNAL_PREFIX: char = '%';

pub fn is_internal(name: &str) -> bool {
    name.starts_with(INTERNAL_PREFIX)
}

// ---------------------------------------------------------------------------
// Validation

struct Validator<'a> {
    sig: &'a Signature,
    solver: &'a Solver,
    diags: Vec<Diagnostic>,
}

/// Scope for checking one type or process.
#[derive(Clone, Default)]
struct Scope {
    tvars: Vec<String>,
    ivars: Vec<String>,
    cons: Vec<Prop>,
}

impl<'a> Validator<'a> {
    fn error(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, msg));
    }

    fn exp(&mut self, e: &Exp, sc: &Scope, span: Span) {
        let mut fv = BTreeSet::new();
        e.free_vars(&mut fv);
        let mut closed = true;
        for v in fv {
            if !sc.ivars.contains(&v) {
                self.error(span, format!("unbound index variable {v} in {}", pretty_exp(e)));
                closed = false;
            }
        }
        if closed {
            self.nonneg(e, sc, span);
        }
    }

    /// Every subtraction `a - b` inside `e` needs `a >= b`.
    fn nonneg(&mut self, e: &Exp, sc: &Scope, span: Span) {
        match e {
            Exp::Nat(_) | Exp::Var(_) => {}
            Exp::Add(a, b) | Exp::Mul(a, b) => {
                self.nonneg(a, sc, span);
                self.nonneg(b, sc, span);
            }
            Exp::Sub(a, b) => {
                self.nonneg(a, sc, span);
                self.nonneg(b, sc, span);
                let goal = Prop::ge((**a).clone(), (**b).clone());
                match self.solver.entails(&sc.ivars, &sc.cons, &goal) {
                    Verdict::Valid => {}
                    Verdict::Invalid(m) => self.error(
                        span,
                        format!("index expression {} may be negative (counterexample {})", pretty_exp(e), show_model(&m)),
                    ),
                    Verdict::Trusted(c) => self.diags.push(Diagnostic::warning(span, format!("trusting: {c}"))),
                }
            }
        }
    }

    fn prop(&mut self, p: &Prop, sc: &Scope, span: Span) {
        let mut fv = BTreeSet::new();
        p.free_vars(&mut fv);
        for v in fv {
            if !sc.ivars.contains(&v) {
                self.error(span, format!("unbound index variable {v} in constraint"));
            }
        }
    }

    fn ty(&mut self, t: &Type, sc: &mut Scope, span: Span) {
        match t {
            Type::Plus(bs) | Type::With(bs) => {
                if bs.is_empty() {
                    self.error(span, "choice type with no labels");
                }
                let mut seen = HashSet::new();
                for (l, b) in bs {
                    if !seen.insert(l.as_str()) {
                        self.error(span, format!("duplicate label {l} in choice type"));
                    }
                    self.ty(b, sc, span);
                }
            }
            Type::Tensor(a, b) | Type::Lolli(a, b) => {
                self.ty(a, sc, span);
                self.ty(b, sc, span);
            }
            Type::One => {}
            Type::Var(a) => {
                if !sc.tvars.contains(a) {
                    self.error(span, format!("unbound type variable {a}"));
                }
            }
            Type::Name(v, tps, es) => {
                match self.sig.types.get(v) {
                    None => self.error(span, format!("undefined type name {v}")),
                    Some(def) => {
                        if def.tparams.len() != tps.len() {
                            self.error(
                                span,
                                format!("type {v} expects {} type argument(s) but got {}", def.tparams.len(), tps.len()),
                            );
                        }
                        if def.iparams.len() != es.len() {
                            self.error(
                                span,
                                format!("type {v} expects {} index argument(s) but got {}", def.iparams.len(), es.len()),
                            );
                        }
                    }
                }
                for a in tps {
                    self.ty(a, sc, span);
                }
                for e in es {
                    self.exp(e, sc, span);
                }
            }
            Type::ExistsTp(a, b) | Type::ForallTp(a, b) => {
                sc.tvars.push(a.clone());
                self.ty(b, sc, span);
                sc.tvars.pop();
            }
            Type::ExistsIx(n, b) | Type::ForallIx(n, b) => {
                sc.ivars.push(n.clone());
                self.ty(b, sc, span);
                sc.ivars.pop();
            }
            Type::Assert(p, b) | Type::Assume(p, b) => {
                self.prop(p, sc, span);
                sc.cons.push(p.clone());
                self.ty(b, sc, span);
                sc.cons.pop();
            }
            Type::Pay(e, b) | Type::Get(e, b) | Type::Next(e, b) => {
                self.exp(e, sc, span);
                self.ty(b, sc, span);
            }
            Type::Box(b) | Type::Dia(b) => self.ty(b, sc, span),
        }
    }

    fn distinct(&mut self, names: &[String], what: &str, span: Span) {
        let mut seen = HashSet::new();
        for n in names {
            if !seen.insert(n) {
                self.error(span, format!("duplicate {what} {n}"));
            }
        }
    }

    fn type_def(&mut self, d: &TypeDef) {
        self.distinct(&d.tparams, "type parameter", d.span);
        self.distinct(&d.iparams, "index parameter", d.span);
        if matches!(d.body, Type::Name(..) | Type::Var(_)) {
            self.error(d.span, format!("definition of {} is not contractive", d.name));
        }
        let mut sc = Scope { tvars: d.tparams.clone(), ivars: d.iparams.clone(), cons: vec![] };
        self.ty(&d.body, &mut sc, d.span);
    }

    fn proc_decl(&mut self, d: &ProcDecl) {
        self.distinct(&d.tparams, "type parameter", d.span);
        self.distinct(&d.iparams, "index parameter", d.span);
        let mut chans: Vec<String> = d.ctx.iter().map(|(c, _)| c.clone()).collect();
        chans.push(d.offer.0.clone());
        self.distinct(&chans, "channel", d.span);
        let mut sc = Scope { tvars: d.tparams.clone(), ivars: d.iparams.clone(), cons: vec![] };
        self.prop(&d.guard, &sc, d.span);
        sc.cons.push(d.guard.clone());
        for (_, t) in &d.ctx {
            self.ty(t, &mut sc, d.span);
        }
        self.ty(&d.offer.1, &mut sc, d.span);
        self.exp(&d.pot, &sc, d.span);
    }

    fn proc_def(&mut self, d: &ProcDef) {
        let Some(decl) = self.sig.procs.get(&d.name) else {
            self.error(d.span, format!("process {} is defined but not declared", d.name));
            return;
        };
        if decl.tparams.len() != d.tparams.len() {
            self.error(d.span, format!("process {} declares {} type parameter(s) but its definition binds {}", d.name, decl.tparams.len(), d.tparams.len()));
        }
        if decl.iparams.len() != d.iparams.len() {
            self.error(d.span, format!("process {} declares {} index parameter(s) but its definition binds {}", d.name, decl.iparams.len(), d.iparams.len()));
        }
        if decl.ctx.len() != d.args.len() {
            self.error(d.span, format!("process {} declares {} channel argument(s) but its definition binds {}", d.name, decl.ctx.len(), d.args.len()));
        }
        let mut chans = d.args.clone();
        chans.push(d.offered.clone());
        self.distinct(&chans, "channel", d.span);
        self.distinct(&d.tparams, "type parameter", d.span);
        self.distinct(&d.iparams, "index parameter", d.span);
        let sc = Scope { tvars: d.tparams.clone(), ivars: d.iparams.clone(), cons: vec![] };
        let mut bound: Vec<String> = chans;
        self.process(&d.body, &sc, &mut bound);
    }

    fn chan(&mut self, ch: &str, bound: &[String], span: Span) {
        if !bound.iter().any(|c| c == ch) {
            self.error(span, format!("unbound channel {ch}"));
        }
    }

    fn scope_exp(&mut self, e: &Exp, sc: &Scope, span: Span) {
        let mut fv = BTreeSet::new();
        e.free_vars(&mut fv);
        for v in fv {
            if !sc.ivars.contains(&v) {
                self.error(span, format!("unbound index variable {v}"));
            }
        }
    }

    fn scope_type(&mut self, t: &Type, sc: &Scope, span: Span) {
        let mut inner = Scope { tvars: sc.tvars.clone(), ivars: sc.ivars.clone(), cons: vec![Prop::False] };
        // Obligations inside process-level types are raised by the checker.
        self.ty(t, &mut inner, span);
    }

    fn process(&mut self, p: &Proc, sc: &Scope, bound: &mut Vec<String>) {
        use ProcKind::*;
        let span = p.span;
        match &p.kind {
            SendLabel { ch, cont, .. } | Wait { ch, cont } | When { ch, cont } | Now { ch, cont } => {
                self.chan(ch, bound, span);
                self.process(cont, sc, bound);
            }
            Case { ch, branches } => {
                self.chan(ch, bound, span);
                let mut seen = HashSet::new();
                for b in branches {
                    if !seen.insert(b.label.as_str()) {
                        self.error(b.span, format!("duplicate branch {}", b.label));
                    }
                    let mut inner = bound.clone();
                    self.process(&b.body, sc, &mut inner);
                }
            }
            SendChan { ch, arg, cont } => {
                self.chan(ch, bound, span);
                self.chan(arg, bound, span);
                self.process(cont, sc, bound);
            }
            RecvChan { ch, var, cont } => {
                self.chan(ch, bound, span);
                bound.push(var.clone());
                self.process(cont, sc, bound);
            }
            Close { ch } => self.chan(ch, bound, span),
            Fwd { x, y } => {
                self.chan(x, bound, span);
                self.chan(y, bound, span);
            }
            Spawn { x, f, tps, idx, args, cont } => {
                match self.sig.procs.get(f) {
                    None => self.error(span, format!("undeclared process {f}")),
                    Some(d) => {
                        if d.tparams.len() != tps.len() {
                            self.error(span, format!("process {f} expects {} type argument(s) but got {}", d.tparams.len(), tps.len()));
                        }
                        if d.iparams.len() != idx.len() {
                            self.error(span, format!("process {f} expects {} index argument(s) but got {}", d.iparams.len(), idx.len()));
                        }
                        if d.ctx.len() != args.len() {
                            self.error(span, format!("process {f} expects {} channel argument(s) but got {}", d.ctx.len(), args.len()));
                        }
                    }
                }
                for t in tps {
                    self.scope_type(t, sc, span);
                }
                for e in idx {
                    self.scope_exp(e, sc, span);
                }
                for a in args {
                    self.chan(a, bound, span);
                }
                match cont {
                    Some(c) => {
                        bound.push(x.clone());
                        self.process(c, sc, bound);
                    }
                    None => self.chan(x, bound, span),
                }
            }
            SendType { ch, tp, cont } => {
                self.chan(ch, bound, span);
                self.scope_type(tp, sc, span);
                self.process(cont, sc, bound);
            }
            RecvType { ch, var, cont } => {
                self.chan(ch, bound, span);
                let mut inner = sc.clone();
                inner.tvars.push(var.clone());
                self.process(cont, &inner, bound);
            }
            SendIdx { ch, e, cont } | Pay { ch, r: e, cont } | Get { ch, r: e, cont } => {
                self.chan(ch, bound, span);
                self.scope_exp(e, sc, span);
                self.process(cont, sc, bound);
            }
            RecvIdx { ch, var, cont } => {
                self.chan(ch, bound, span);
                let mut inner = sc.clone();
                inner.ivars.push(var.clone());
                self.process(cont, &inner, bound);
            }
            Assert { ch, phi, cont } | Assume { ch, phi, cont } => {
                self.chan(ch, bound, span);
                self.prop(phi, sc, span);
                self.process(cont, sc, bound);
            }
            Work { r: e, cont } | Delay { t: e, cont } => {
                self.scope_exp(e, sc, span);
                self.process(cont, sc, bound);
            }
            Impossible => {}
        }
    }

    fn eqtype(&mut self, e: &EqTypeDecl) {
        for side in [&e.left, &e.right] {
            if !matches!(side, Type::Name(..)) {
                self.error(e.span, "eqtype sides must be named types");
            }
            let mut tv = Vec::new();
            side.free_tp_vars(&mut tv);
            let mut iv = BTreeSet::new();
            side.free_idx_vars(&mut iv);
            let mut sc = Scope { tvars: tv, ivars: iv.into_iter().collect(), cons: vec![Prop::False] };
            self.ty(side, &mut sc, e.span);
        }
    }

    fn exec(&mut self, e: &ExecDecl) {
        match self.sig.procs.get(&e.name) {
            None => self.error(e.span, format!("exec of undeclared process {}", e.name)),
            Some(d) => {
                if !d.tparams.is_empty() || !d.iparams.is_empty() {
                    self.error(e.span, format!("exec target {} must not have type or index parameters", e.name));
                }
                if !d.ctx.is_empty() {
                    self.error(e.span, format!("exec target {} must not use any channels", e.name));
                }
            }
        }
    }
}

/// Checks a parsed signature. Reports every violation found.
pub fn validate_signature(sig: &Signature, solver: &Solver) -> Vec<Diagnostic> {
    let mut v = Validator { sig, solver, diags: Vec::new() };
    let mut types = HashSet::new();
    let mut procs = HashSet::new();
    let mut defs = HashSet::new();
    for d in &sig.decls {
        match d {
            Decl::Type(t) => {
                if !types.insert(t.name.as_str()) {
                    v.error(t.span, format!("type {} is defined more than once", t.name));
                }
                v.type_def(t);
            }
            Decl::Proc(p) => {
                if !procs.insert(p.name.as_str()) {
                    v.error(p.span, format!("process {} is declared more than once", p.name));
                }
                v.proc_decl(p);
            }
            Decl::Def(p) => {
                if !defs.insert(p.name.as_str()) {
                    v.error(p.span, format!("process {} is defined more than once", p.name));
                }
                v.proc_def(p);
            }
            Decl::EqType(e) => v.eqtype(e),
            Decl::Exec(e) => v.exec(e),
        }
    }
    for d in sig.procs.values() {
        if !sig.defs.contains_key(&d.name) {
            v.error(d.span, format!("process {} is declared but never defined", d.name));
        }
    }
    v.diags
}

// ---------------------------------------------------------------------------
// Internal names

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InternalDef {
    pub name: String,
    pub tparams: Vec<String>,
    pub iparams: Vec<String>,
    /// One structural layer whose children are names or variables.
    pub body: Type,
}

/// Internal definitions, shared up to renaming of their parameters.
#[derive(Clone, Debug, Default)]
pub struct InternalNames {
    pub defs: IndexMap<String, InternalDef>,
    by_template: HashMap<Type, String>,
}

fn exp_vars_ordered(e: &Exp, out: &mut Vec<String>) {
    match e {
        Exp::Nat(_) => {}
        Exp::Var(v) => {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        Exp::Add(a, b) | Exp::Sub(a, b) | Exp::Mul(a, b) => {
            exp_vars_ordered(a, out);
            exp_vars_ordered(b, out);
        }
    }
}

fn prop_vars_ordered(p: &Prop, out: &mut Vec<String>) {
    match p {
        Prop::True | Prop::False => {}
        Prop::Eq(a, b) | Prop::Gt(a, b) => {
            exp_vars_ordered(a, out);
            exp_vars_ordered(b, out);
        }
        Prop::And(a, b) | Prop::Or(a, b) => {
            prop_vars_ordered(a, out);
            prop_vars_ordered(b, out);
        }
        Prop::Not(a) => prop_vars_ordered(a, out),
        Prop::Exists(v, a) | Prop::Forall(v, a) => {
            let mut inner = Vec::new();
            prop_vars_ordered(a, &mut inner);
            for w in inner {
                if &w != v && !out.contains(&w) {
                    out.push(w);
                }
            }
        }
    }
}

/// Free index variables in order of first occurrence.
pub fn idx_vars_ordered(t: &Type, out: &mut Vec<String>) {
    match t {
        Type::Name(_, tps, es) => {
            for a in tps {
                idx_vars_ordered(a, out);
            }
            for e in es {
                exp_vars_ordered(e, out);
            }
        }
        Type::ExistsIx(v, a) | Type::ForallIx(v, a) => {
            let mut inner = Vec::new();
            idx_vars_ordered(a, &mut inner);
            for w in inner {
                if &w != v && !out.contains(&w) {
                    out.push(w);
                }
            }
        }
        Type::Assert(p, a) | Type::Assume(p, a) => {
            prop_vars_ordered(p, out);
            idx_vars_ordered(a, out);
        }
        Type::Pay(e, a) | Type::Get(e, a) | Type::Next(e, a) => {
            exp_vars_ordered(e, out);
            idx_vars_ordered(a, out);
        }
        _ => {
            for c in t.children() {
                idx_vars_ordered(c, out);
            }
        }
    }
}

/// Renames binders and free variables to positional names so that
/// templates equal up to renaming compare equal.
fn canonical(t: &Type, tvars: &[String], ivars: &[String]) -> Type {
    let tsub: HashMap<String, Type> =
        tvars.iter().enumerate().map(|(i, v)| (v.clone(), Type::Var(format!("'t{i}")))).collect();
    let isub: HashMap<String, Exp> =
        ivars.iter().enumerate().map(|(i, v)| (v.clone(), Exp::Var(format!("'i{i}")))).collect();
    let t = match t {
        Type::ExistsTp(v, b) | Type::ForallTp(v, b) => {
            let mut s = HashMap::new();
            s.insert(v.clone(), Type::Var("'b".into()));
            let b = Box::new(b.subst(&s, &HashMap::new()));
            if matches!(t, Type::ExistsTp(..)) {
                Type::ExistsTp("'b".into(), b)
            } else {
                Type::ForallTp("'b".into(), b)
            }
        }
        Type::ExistsIx(v, b) | Type::ForallIx(v, b) => {
            let mut s = HashMap::new();
            s.insert(v.clone(), Exp::Var("'b".into()));
            let b = Box::new(b.subst(&HashMap::new(), &s));
            if matches!(t, Type::ExistsIx(..)) {
                Type::ExistsIx("'b".into(), b)
            } else {
                Type::ForallIx("'b".into(), b)
            }
        }
        _ => t.clone(),
    };
    t.subst(&tsub, &isub)
}

impl InternalNames {
    /// Replaces `t` by a reference to an internal definition when it is
    /// structural; names and variables are returned unchanged.
    pub fn intern(&mut self, t: &Type) -> Type {
        if !t.is_structural() {
            return match t {
                Type::Name(v, tps, es) => Type::Name(v.clone(), tps.iter().map(|a| self.intern(a)).collect(), es.clone()),
                _ => t.clone(),
            };
        }
        let layer = match t {
            Type::Plus(bs) => Type::Plus(bs.iter().map(|(l, b)| (l.clone(), self.intern(b))).collect()),
            Type::With(bs) => Type::With(bs.iter().map(|(l, b)| (l.clone(), self.intern(b))).collect()),
            Type::Tensor(a, b) => Type::Tensor(Box::new(self.intern(a)), Box::new(self.intern(b))),
            Type::Lolli(a, b) => Type::Lolli(Box::new(self.intern(a)), Box::new(self.intern(b))),
            Type::One => Type::One,
            Type::ExistsTp(v, b) => Type::ExistsTp(v.clone(), Box::new(self.intern(b))),
            Type::ForallTp(v, b) => Type::ForallTp(v.clone(), Box::new(self.intern(b))),
            Type::ExistsIx(v, b) => Type::ExistsIx(v.clone(), Box::new(self.intern(b))),
            Type::ForallIx(v, b) => Type::ForallIx(v.clone(), Box::new(self.intern(b))),
            Type::Assert(p, b) => Type::Assert(p.clone(), Box::new(self.intern(b))),
            Type::Assume(p, b) => Type::Assume(p.clone(), Box::new(self.intern(b))),
            Type::Pay(e, b) => Type::Pay(e.clone(), Box::new(self.intern(b))),
            Type::Get(e, b) => Type::Get(e.clone(), Box::new(self.intern(b))),
            Type::Next(e, b) => Type::Next(e.clone(), Box::new(self.intern(b))),
            Type::Box(b) => Type::Box(Box::new(self.intern(b))),
            Type::Dia(b) => Type::Dia(Box::new(self.intern(b))),
            Type::Name(..) | Type::Var(_) => unreachable!(),
        };
        let mut tvars = Vec::new();
        layer.free_tp_vars(&mut tvars);
        let mut ivars = Vec::new();
        idx_vars_ordered(&layer, &mut ivars);
        let key = canonical(&layer, &tvars, &ivars);
        let name = match self.by_template.get(&key) {
            Some(n) => n.clone(),
            None => {
                let n = format!("{INTERNAL_PREFIX}{}", self.defs.len());
                let def = InternalDef {
                    name: n.clone(),
                    tparams: (0..tvars.len()).map(|i| format!("'t{i}")).collect(),
                    iparams: (0..ivars.len()).map(|i| format!("'i{i}")).collect(),
                    body: key.clone(),
                };
                self.defs.insert(n.clone(), def);
                self.by_template.insert(key, n.clone());
                n
            }
        };
        Type::Name(name, tvars.into_iter().map(Type::Var).collect(), ivars.into_iter().map(Exp::Var).collect())
    }

    /// The body of an internal name instantiated at the given arguments.
    pub fn unfold(&self, name: &str, tps: &[Type], es: &[Exp]) -> Option<Type> {
        let d = self.defs.get(name)?;
        let tsub = d.tparams.iter().cloned().zip(tps.iter().cloned()).collect();
        let isub = d.iparams.iter().cloned().zip(es.iter().cloned()).collect();
        Some(d.body.subst(&tsub, &isub))
    }

    /// Fully expands internal references, leaving user names in place.
    pub fn expand(&self, t: &Type) -> Type {
        match t {
            Type::Name(v, tps, es) if is_internal(v) => {
                let body = self.unfold(v, tps, es).expect("internal name");
                self.expand_children(&body)
            }
            Type::Name(v, tps, es) => Type::Name(v.clone(), tps.iter().map(|a| self.expand(a)).collect(), es.clone()),
            _ => self.expand_children(t),
        }
    }

    fn expand_children(&self, t: &Type) -> Type {
        let go = |a: &Type| Box::new(self.expand(a));
        match t {
            Type::Plus(bs) => Type::Plus(bs.iter().map(|(l, b)| (l.clone(), self.expand(b))).collect()),
            Type::With(bs) => Type::With(bs.iter().map(|(l, b)| (l.clone(), self.expand(b))).collect()),
            Type::Tensor(a, b) => Type::Tensor(go(a), go(b)),
            Type::Lolli(a, b) => Type::Lolli(go(a), go(b)),
            Type::ExistsTp(v, b) => Type::ExistsTp(v.clone(), go(b)),
            Type::ForallTp(v, b) => Type::ForallTp(v.clone(), go(b)),
            Type::ExistsIx(v, b) => Type::ExistsIx(v.clone(), go(b)),
            Type::ForallIx(v, b) => Type::ForallIx(v.clone(), go(b)),
            Type::Assert(p, b) => Type::Assert(p.clone(), go(b)),
            Type::Assume(p, b) => Type::Assume(p.clone(), go(b)),
            Type::Pay(e, b) => Type::Pay(e.clone(), go(b)),
            Type::Get(e, b) => Type::Get(e.clone(), go(b)),
            Type::Next(e, b) => Type::Next(e.clone(), go(b)),
            Type::Box(b) => Type::Box(go(b)),
            Type::Dia(b) => Type::Dia(go(b)),
            Type::One | Type::Var(_) => t.clone(),
            Type::Name(..) => self.expand(t),
        }
    }
}

/// Interns every type occurring in the signature's declarations.
pub fn assign_internal_names(sig: &Signature) -> InternalNames {
    let mut names = InternalNames::default();
    for d in &sig.decls {
        match d {
            Decl::Type(t) => {
                names.intern(&t.body);
            }
            Decl::Proc(p) => {
                for (_, t) in &p.ctx {
                    names.intern(t);
                }
                names.intern(&p.offer.1);
            }
            Decl::EqType(e) => {
                names.intern(&e.left);
                names.intern(&e.right);
            }
            Decl::Def(_) | Decl::Exec(_) => {}
        }
    }
    names
}

// ---------------------------------------------------------------------------
// Variance

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variance {
    Non,
    Co,
    Contra,
    Bi,
}

impl Variance {
    pub fn join(self, other: Variance) -> Variance {
        use Variance::*;
        match (self, other) {
            (Non, v) | (v, Non) => v,
            (a, b) if a == b => a,
            _ => Bi,
        }
    }

    /// Variance of an occurrence at polarity `self` inside a parameter of
    /// variance `inner`.
    pub fn compose(self, inner: Variance) -> Variance {
        use Variance::*;
        match (self, inner) {
            (Non, _) | (_, Non) => Non,
            (Bi, _) | (_, Bi) => Bi,
            (Co, v) => v,
            (Contra, Co) => Contra,
            (Contra, Contra) => Co,
        }
    }

    fn flip(self) -> Variance {
        match self {
            Variance::Co => Variance::Contra,
            Variance::Contra => Variance::Co,
            v => v,
        }
    }
}

impl fmt::Display for Variance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variance::Non => "nonvariant",
            Variance::Co => "covariant",
            Variance::Contra => "contravariant",
            Variance::Bi => "bivariant",
        })
    }
}

/// Variance of every type parameter of every named type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarianceTable {
    pub entries: IndexMap<String, Vec<Variance>>,
}

impl VarianceTable {
    pub fn get(&self, name: &str, pos: usize) -> Variance {
        self.entries.get(name).and_then(|v| v.get(pos).copied()).unwrap_or(Variance::Bi)
    }

    /// Joins into `acc` the variance with which `param` occurs in `t` when
    /// `t` itself sits at polarity `pol`.
    fn occurrences(&self, t: &Type, param: &str, pol: Variance, acc: &mut Variance) {
        match t {
            Type::Var(a) => {
                if a == param {
                    *acc = acc.join(pol);
                }
            }
            Type::Lolli(a, b) => {
                self.occurrences(a, param, pol.flip(), acc);
                self.occurrences(b, param, pol, acc);
            }
            Type::Name(v, tps, _) => {
                for (i, a) in tps.iter().enumerate() {
                    let inner = self.get(v, i);
                    self.occurrences(a, param, pol.compose(inner), acc);
                }
            }
            Type::ExistsTp(v, b) | Type::ForallTp(v, b) => {
                if v != param {
                    self.occurrences(b, param, pol, acc);
                }
            }
            _ => {
                for c in t.children() {
                    self.occurrences(c, param, pol, acc);
                }
            }
        }
    }
}

/// Occurrence analysis iterated to a fixed point, starting from nonvariant.
pub fn compute_variance(sig: &Signature, internal: &InternalNames) -> VarianceTable {
    let mut defs: Vec<(String, Vec<String>, Type)> =
        sig.types.values().map(|d| (d.name.clone(), d.tparams.clone(), d.body.clone())).collect();
    for d in internal.defs.values() {
        defs.push((d.name.clone(), d.tparams.clone(), d.body.clone()));
    }
    let mut table = VarianceTable::default();
    for (name, params, _) in &defs {
        table.entries.insert(name.clone(), vec![Variance::Non; params.len()]);
    }
    loop {
        let mut changed = false;
        for (name, params, body) in &defs {
            for (i, p) in params.iter().enumerate() {
                let mut acc = Variance::Non;
                table.occurrences(body, p, Variance::Co, &mut acc);
                let old = table.entries[name][i];
                let new = old.join(acc);
                if new != old {
                    table.entries.get_mut(name).unwrap()[i] = new;
                    changed = true;
                }
            }
        }
        if !changed {
            return table;
        }
    }
}

// ---------------------------------------------------------------------------
// Compression

/// Reverse map from expanded types to the instantiation they came from.
#[derive(Debug, Default)]
pub struct CompressionMap {
    map: RefCell<HashMap<Type, Type>>,
}

impl CompressionMap {
    pub fn record(&self, expanded: &Type, named: &Type) {
        if let Type::Name(v, ..) = named {
            if is_internal(v) {
                return;
            }
        }
        self.map.borrow_mut().entry(expanded.clone()).or_insert_with(|| named.clone());
    }

    pub fn len(&self) -> usize {
        self.map.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(&self, t: &Type) -> Option<Type> {
        self.map.borrow().get(t).cloned()
    }

    /// Replaces every subterm that has an entry by its named form.
    pub fn compress_type(&self, t: &Type) -> Type {
        if let Some(n) = self.lookup(t) {
            return n;
        }
        let go = |a: &Type| Box::new(self.compress_type(a));
        match t {
            Type::Plus(bs) => Type::Plus(bs.iter().map(|(l, b)| (l.clone(), self.compress_type(b))).collect()),
            Type::With(bs) => Type::With(bs.iter().map(|(l, b)| (l.clone(), self.compress_type(b))).collect()),
            Type::Tensor(a, b) => Type::Tensor(go(a), go(b)),
            Type::Lolli(a, b) => Type::Lolli(go(a), go(b)),
            Type::One | Type::Var(_) => t.clone(),
            Type::Name(v, tps, es) => Type::Name(v.clone(), tps.iter().map(|a| self.compress_type(a)).collect(), es.clone()),
            Type::ExistsTp(v, b) => Type::ExistsTp(v.clone(), go(b)),
            Type::ForallTp(v, b) => Type::ForallTp(v.clone(), go(b)),
            Type::ExistsIx(v, b) => Type::ExistsIx(v.clone(), go(b)),
            Type::ForallIx(v, b) => Type::ForallIx(v.clone(), go(b)),
            Type::Assert(p, b) => Type::Assert(p.clone(), go(b)),
            Type::Assume(p, b) => Type::Assume(p.clone(), go(b)),
            Type::Pay(e, b) => Type::Pay(e.clone(), go(b)),
            Type::Get(e, b) => Type::Get(e.clone(), go(b)),
            Type::Next(e, b) => Type::Next(e.clone(), go(b)),
            Type::Box(b) => Type::Box(go(b)),
            Type::Dia(b) => Type::Dia(go(b)),
        }
    }
}

pub fn compress(t: &Type, cm: &CompressionMap) -> String {
    pretty_type(&cm.compress_type(t))
}

// ---------------------------------------------------------------------------

/// A validated signature with its derived tables.
#[derive(Debug)]
pub struct Env {
    pub sig: Signature,
    pub internal: InternalNames,
    pub variance: VarianceTable,
    pub compression: CompressionMap,
}

impl Env {
    pub fn new(sig: Signature) -> Env {
        let internal = assign_internal_names(&sig);
        let variance = compute_variance(&sig, &internal);
        Env { sig, internal, variance, compression: CompressionMap::default() }
    }

    /// One unfolding step of a user or internal name, recorded for
    /// compression. Other types are returned unchanged.
    pub fn unfold(&self, t: &Type) -> Result<Type, UnfoldError> {
        match t {
            Type::Name(v, tps, es) if is_internal(v) => {
                self.internal.unfold(v, tps, es).ok_or_else(|| UnfoldError::UndefinedType(v.clone()))
            }
            Type::Name(..) => {
                let body = unfold(t, &self.sig)?;
                self.compression.record(&body, t);
                Ok(body)
            }
            _ => Ok(t.clone()),
        }
    }

    /// Unfolds until the head is structural or a type variable.
    pub fn head(&self, t: &Type) -> Result<Type, UnfoldError> {
        let mut t = t.clone();
        let mut fuel = self.sig.types.len() + self.internal.defs.len() + 1;
        while let Type::Name(..) = t {
            t = self.unfold(&t)?;
            fuel -= 1;
            if fuel == 0 {
                return Err(UnfoldError::UndefinedType(pretty_type(&t)));
            }
        }
        Ok(t)
    }

    pub fn show(&self, t: &Type) -> String {
        compress(t, &self.compression)
    }
}

/// Listing of internal names and variances, one entry per line.
pub fn dump_names(env: &Env) -> String {
    let mut out = String::new();
    for d in env.internal.defs.values() {
        let mut head = d.name.clone();
        if !d.tparams.is_empty() {
            head.push_str(&format!("[{}]", d.tparams.join(", ")));
        }
        if !d.iparams.is_empty() {
            head.push_str(&format!("{{{}}}", d.iparams.join(", ")));
        }
        out.push_str(&format!("{head} = {}\n", pretty_type(&d.body)));
    }
    for (name, vs) in &env.variance.entries {
        if is_internal(name) || vs.is_empty() {
            continue;
        }
        let def = &env.sig.types[name];
        let parts: Vec<String> = def.tparams.iter().zip(vs).map(|(p, v)| format!("{p}: {v}")).collect();
        out.push_str(&format!("variance {name}: {}\n", parts.join(", ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_source, parse_type_str};

    fn diags(src: &str) -> Vec<String> {
        let sig = parse_source(src).unwrap();
        validate_signature(&sig, &Solver::new()).into_iter().map(|d| d.message).collect()
    }

    #[test]
    fn listing_is_valid() {
        let sig = parse_source(crate::syntax::parser::tests_support::LISTING1).unwrap();
        assert!(validate_signature(&sig, &Solver::new()).is_empty());
    }

    #[test]
    fn contractivity() {
        let d = diags("type V = V");
        assert!(d.iter().any(|m| m.contains("not contractive")), "{d:?}");
    }

    #[test]
    fn nonnegativity_uses_guard() {
        let base = "type nat{n} = +{z : 1}\n";
        let ok = format!("{base}decl f{{n | n > 0}} : . |- (x : nat{{n-1}})\nproc x <- f{{n}} = x.z ; close x\n");
        assert!(diags(&ok).is_empty(), "{:?}", diags(&ok));
        let bad = format!("{base}decl f{{n}} : . |- (x : nat{{n-1}})\nproc x <- f{{n}} = x.z ; close x\n");
        let d = diags(&bad);
        assert!(d.iter().any(|m| m.contains("may be negative") && m.contains("n = 0")), "{d:?}");
    }

    #[test]
    fn scope_and_arity_errors() {
        let d = diags("type t[a] = +{l : b}\ntype u = t\ndecl f : (y : t[1]) |- (x : 1)\nproc x <- f = wait z ; close x\n");
        assert!(d.iter().any(|m| m.contains("undefined type name b")), "{d:?}");
        assert!(d.iter().any(|m| m.contains("channel argument")), "{d:?}");
        assert!(d.iter().any(|m| m.contains("expects 1 type argument")), "{d:?}");
        assert!(d.iter().any(|m| m.contains("unbound channel z")), "{d:?}");
    }

    #[test]
    fn declared_but_undefined() {
        let d = diags("decl f : . |- (x : 1)\n");
        assert!(d.iter().any(|m| m.contains("never defined")), "{d:?}");
    }

    #[test]
    fn queue_internal_names() {
        let sig = parse_source(crate::syntax::parser::tests_support::LISTING1).unwrap();
        let names = assign_internal_names(&sig);
        let shapes: Vec<&Type> = names.defs.values().map(|d| &d.body).collect();
        assert!(shapes.iter().any(|t| matches!(t, Type::With(_))));
        assert!(shapes.iter().any(|t| matches!(t, Type::Plus(_))));
        assert_eq!(shapes.iter().filter(|t| matches!(t, Type::Assert(..))).count(), 2);
        assert!(shapes.iter().any(|t| matches!(t, Type::Tensor(..))));
        assert!(shapes.iter().any(|t| matches!(t, Type::Lolli(..))));
        // the six named in the queue body, plus the shared unit
        assert_eq!(names.defs.len(), 7);
    }

    #[test]
    fn sharing_up_to_renaming() {
        let mut names = InternalNames::default();
        let a = names.intern(&parse_type_str("a -o 1", &["a"]).unwrap());
        let b = names.intern(&parse_type_str("b -o 1", &["b"]).unwrap());
        let Type::Name(na, ..) = &a else { panic!() };
        let Type::Name(nb, ..) = &b else { panic!() };
        assert_eq!(na, nb);
        assert_eq!(names.expand(&b), parse_type_str("b -o 1", &["b"]).unwrap());
    }

    #[test]
    fn dyck_internal_name_has_parameter() {
        let sig = parse_source("type T[x] = +{L : T[T[x]], R : x}\n").unwrap();
        let names = assign_internal_names(&sig);
        let d = names.defs.values().find(|d| matches!(d.body, Type::Plus(_))).unwrap();
        assert_eq!(d.tparams.len(), 1);
    }

    fn variance_of(src: &str, name: &str) -> Vec<Variance> {
        let sig = parse_source(src).unwrap();
        let env = Env::new(sig);
        env.variance.entries[name].clone()
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance_of("type V[a] = +{l : a * 1}", "V"), vec![Variance::Co]);
        assert_eq!(variance_of("type V[a] = a -o 1", "V"), vec![Variance::Contra]);
        assert_eq!(variance_of("type V[a] = 1", "V"), vec![Variance::Non]);
        assert_eq!(variance_of("type V[a] = a -o a", "V"), vec![Variance::Bi]);
        // through another definition
        assert_eq!(variance_of("type W[b] = b -o 1\ntype V[a] = W[a] -o 1", "V"), vec![Variance::Co]);
        assert_eq!(variance_of("type T[x] = +{L : T[T[x]], R : x}", "T"), vec![Variance::Co]);
    }

    #[test]
    fn variance_is_a_fixed_point() {
        let sig = parse_source("type W[b] = +{l : b -o W[b]}\ntype V[a, c] = &{m : W[a] * V[c, a]}").unwrap();
        let env = Env::new(sig.clone());
        let again = compute_variance(&sig, &env.internal);
        assert_eq!(env.variance, again);
    }

    #[test]
    fn compression_prints_names() {
        let sig = parse_source(crate::syntax::parser::tests_support::LISTING1).unwrap();
        let env = Env::new(sig);
        let q = parse_type_str("queue[A]{n}", &["A"]).unwrap();
        let body = env.unfold(&q).unwrap();
        assert_eq!(env.show(&body), "queue[A]{n}");
        assert_eq!(env.show(&Type::One), "1");
        let partial = Type::Tensor(Box::new(Type::One), Box::new(body));
        assert_eq!(env.show(&partial), "1 * queue[A]{n}");
    }
}

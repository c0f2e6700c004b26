//! Abstract syntax shared by every phase: arithmetic, session types,
//! process expressions and top-level declarations.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use indexmap::IndexMap;

/// Half-open byte range into the source text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exp {
    Nat(u64),
    Var(String),
    Add(Box<Exp>, Box<Exp>),
    Sub(Box<Exp>, Box<Exp>),
    /// Either operand may be a constant; the nonlinear case is allowed
    /// and handled by the multinomial normalizer.
    Mul(Box<Exp>, Box<Exp>),
}

impl Exp {
    pub fn var(name: &str) -> Exp {
        Exp::Var(name.to_string())
    }

    pub fn add(a: Exp, b: Exp) -> Exp {
        Exp::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Exp, b: Exp) -> Exp {
        Exp::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Exp, b: Exp) -> Exp {
        Exp::Mul(Box::new(a), Box::new(b))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Exp::Nat(0))
    }

    /// `self + other`, folding literal zeros.
    pub fn plus(&self, other: &Exp) -> Exp {
        match (self, other) {
            (Exp::Nat(0), e) | (e, Exp::Nat(0)) => e.clone(),
            (Exp::Nat(a), Exp::Nat(b)) => Exp::Nat(a + b),
            _ => Exp::add(self.clone(), other.clone()),
        }
    }

    /// `self - other`, folding literal zeros and syntactic equality.
    pub fn minus(&self, other: &Exp) -> Exp {
        match (self, other) {
            (e, Exp::Nat(0)) => e.clone(),
            (Exp::Nat(a), Exp::Nat(b)) if a >= b => Exp::Nat(a - b),
            _ if self == other => Exp::Nat(0),
            _ => Exp::sub(self.clone(), other.clone()),
        }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Exp::Nat(_) => {}
            Exp::Var(v) => {
                out.insert(v.clone());
            }
            Exp::Add(a, b) | Exp::Sub(a, b) | Exp::Mul(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
        }
    }

    pub fn subst(&self, sigma: &HashMap<String, Exp>) -> Exp {
        if sigma.is_empty() {
            return self.clone();
        }
        match self {
            Exp::Nat(_) => self.clone(),
            Exp::Var(v) => sigma.get(v).cloned().unwrap_or_else(|| self.clone()),
            Exp::Add(a, b) => Exp::add(a.subst(sigma), b.subst(sigma)),
            Exp::Sub(a, b) => Exp::sub(a.subst(sigma), b.subst(sigma)),
            Exp::Mul(a, b) => Exp::mul(a.subst(sigma), b.subst(sigma)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prop {
    True,
    False,
    Eq(Exp, Exp),
    Gt(Exp, Exp),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
    Not(Box<Prop>),
    Exists(String, Box<Prop>),
    Forall(String, Box<Prop>),
}

impl Prop {
    pub fn eq(a: Exp, b: Exp) -> Prop {
        Prop::Eq(a, b)
    }

    pub fn gt(a: Exp, b: Exp) -> Prop {
        Prop::Gt(a, b)
    }

    /// `a >= b`, written as `a + 1 > b`.
    pub fn ge(a: Exp, b: Exp) -> Prop {
        Prop::Gt(a.plus(&Exp::Nat(1)), b)
    }

    pub fn and(a: Prop, b: Prop) -> Prop {
        match (a, b) {
            (Prop::True, p) | (p, Prop::True) => p,
            (a, b) => Prop::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Prop, b: Prop) -> Prop {
        Prop::Or(Box::new(a), Box::new(b))
    }

    pub fn not(a: Prop) -> Prop {
        Prop::Not(Box::new(a))
    }

    pub fn conj(props: &[Prop]) -> Prop {
        props.iter().cloned().fold(Prop::True, Prop::and)
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Prop::True | Prop::False => {}
            Prop::Eq(a, b) | Prop::Gt(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Prop::And(a, b) | Prop::Or(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Prop::Not(a) => a.free_vars(out),
            Prop::Exists(v, body) | Prop::Forall(v, body) => {
                let mut inner = BTreeSet::new();
                body.free_vars(&mut inner);
                inner.remove(v);
                out.extend(inner);
            }
        }
    }

    pub fn subst(&self, sigma: &HashMap<String, Exp>) -> Prop {
        if sigma.is_empty() {
            return self.clone();
        }
        match self {
            Prop::True | Prop::False => self.clone(),
            Prop::Eq(a, b) => Prop::Eq(a.subst(sigma), b.subst(sigma)),
            Prop::Gt(a, b) => Prop::Gt(a.subst(sigma), b.subst(sigma)),
            Prop::And(a, b) => Prop::And(Box::new(a.subst(sigma)), Box::new(b.subst(sigma))),
            Prop::Or(a, b) => Prop::Or(Box::new(a.subst(sigma)), Box::new(b.subst(sigma))),
            Prop::Not(a) => Prop::Not(Box::new(a.subst(sigma))),
            Prop::Exists(v, body) | Prop::Forall(v, body) => {
                let (v2, body2) = subst_binder(v, body.as_ref(), sigma, |p, s| p.subst(s));
                match self {
                    Prop::Exists(..) => Prop::Exists(v2, Box::new(body2)),
                    _ => Prop::Forall(v2, Box::new(body2)),
                }
            }
        }
    }
}

/// Pushes an index substitution under a binder `v`, renaming `v` when it
/// would capture a variable of the substitution's range.
fn subst_binder<T>(
    v: &str,
    body: &T,
    sigma: &HashMap<String, Exp>,
    go: impl Fn(&T, &HashMap<String, Exp>) -> T,
) -> (String, T) {
    let mut inner: HashMap<String, Exp> = sigma.clone();
    inner.remove(v);
    let mut range_vars = BTreeSet::new();
    for e in inner.values() {
        e.free_vars(&mut range_vars);
    }
    if range_vars.contains(v) {
        let fresh = fresh_name(v);
        inner.insert(v.to_string(), Exp::Var(fresh.clone()));
        (fresh, go(body, &inner))
    } else {
        (v.to_string(), go(body, &inner))
    }
}

static FRESH: AtomicUsize = AtomicUsize::new(0);

/// A name derived from `base`, distinct from every name generated before.
pub fn fresh_name(base: &str) -> String {
    let root = base.split('\'').next().unwrap_or(base);
    let k = FRESH.fetch_add(1, Ordering::Relaxed);
    format!("{root}'{k}")
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Plus(Vec<(String, Type)>),
    With(Vec<(String, Type)>),
    Tensor(Box<Type>, Box<Type>),
    Lolli(Box<Type>, Box<Type>),
    One,
    Var(String),
    Name(String, Vec<Type>, Vec<Exp>),
    ExistsTp(String, Box<Type>),
    ForallTp(String, Box<Type>),
    ExistsIx(String, Box<Type>),
    ForallIx(String, Box<Type>),
    Assert(Prop, Box<Type>),
    Assume(Prop, Box<Type>),
    Pay(Exp, Box<Type>),
    Get(Exp, Box<Type>),
    Next(Exp, Box<Type>),
    Box(Box<Type>),
    Dia(Box<Type>),
}

impl Type {
    pub fn name(v: &str, tps: Vec<Type>, idx: Vec<Exp>) -> Type {
        Type::Name(v.to_string(), tps, idx)
    }

    pub fn is_structural(&self) -> bool {
        !matches!(self, Type::Name(..) | Type::Var(_))
    }

    /// Immediate subterms, in order.
    pub fn children(&self) -> Vec<&Type> {
        match self {
            Type::Plus(bs) | Type::With(bs) => bs.iter().map(|(_, t)| t).collect(),
            Type::Tensor(a, b) | Type::Lolli(a, b) => vec![a, b],
            Type::One | Type::Var(_) => vec![],
            Type::Name(_, tps, _) => tps.iter().collect(),
            Type::ExistsTp(_, a)
            | Type::ForallTp(_, a)
            | Type::ExistsIx(_, a)
            | Type::ForallIx(_, a)
            | Type::Assert(_, a)
            | Type::Assume(_, a)
            | Type::Pay(_, a)
            | Type::Get(_, a)
            | Type::Next(_, a)
            | Type::Box(a)
            | Type::Dia(a) => vec![a],
        }
    }

    pub fn free_idx_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Type::Plus(bs) | Type::With(bs) => bs.iter().for_each(|(_, t)| t.free_idx_vars(out)),
            Type::Tensor(a, b) | Type::Lolli(a, b) => {
                a.free_idx_vars(out);
                b.free_idx_vars(out);
            }
            Type::One | Type::Var(_) => {}
            Type::Name(_, tps, es) => {
                tps.iter().for_each(|t| t.free_idx_vars(out));
                es.iter().for_each(|e| e.free_vars(out));
            }
            Type::ExistsIx(v, a) | Type::ForallIx(v, a) => {
                let mut inner = BTreeSet::new();
                a.free_idx_vars(&mut inner);
                inner.remove(v);
                out.extend(inner);
            }
            Type::ExistsTp(_, a) | Type::ForallTp(_, a) | Type::Box(a) | Type::Dia(a) => {
                a.free_idx_vars(out)
            }
            Type::Assert(p, a) | Type::Assume(p, a) => {
                p.free_vars(out);
                a.free_idx_vars(out);
            }
            Type::Pay(e, a) | Type::Get(e, a) | Type::Next(e, a) => {
                e.free_vars(out);
                a.free_idx_vars(out);
            }
        }
    }

    /// Free type variables in order of first occurrence.
    pub fn free_tp_vars(&self, out: &mut Vec<String>) {
        match self {
            Type::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Type::ExistsTp(v, a) | Type::ForallTp(v, a) => {
                let mut inner = Vec::new();
                a.free_tp_vars(&mut inner);
                for w in inner {
                    if &w != v && !out.contains(&w) {
                        out.push(w);
                    }
                }
            }
            _ => {
                for c in self.children() {
                    c.free_tp_vars(out);
                }
            }
        }
    }

    /// Capture-avoiding simultaneous substitution of type and index variables.
    pub fn subst(&self, tps: &HashMap<String, Type>, idx: &HashMap<String, Exp>) -> Type {
        if tps.is_empty() && idx.is_empty() {
            return self.clone();
        }
        let go = |a: &Type| Box::new(a.subst(tps, idx));
        match self {
            Type::Plus(bs) => {
                Type::Plus(bs.iter().map(|(l, t)| (l.clone(), t.subst(tps, idx))).collect())
            }
            Type::With(bs) => {
                Type::With(bs.iter().map(|(l, t)| (l.clone(), t.subst(tps, idx))).collect())
            }
            Type::Tensor(a, b) => Type::Tensor(go(a), go(b)),
            Type::Lolli(a, b) => Type::Lolli(go(a), go(b)),
            Type::One => Type::One,
            Type::Var(v) => tps.get(v).cloned().unwrap_or_else(|| self.clone()),
            Type::Name(v, ts, es) => Type::Name(
                v.clone(),
                ts.iter().map(|t| t.subst(tps, idx)).collect(),
                es.iter().map(|e| e.subst(idx)).collect(),
            ),
            Type::ExistsTp(v, a) | Type::ForallTp(v, a) => {
                let mut inner = tps.clone();
                inner.remove(v);
                let mut range = Vec::new();
                for t in inner.values() {
                    t.free_tp_vars(&mut range);
                }
                let (v2, body) = if range.contains(v) {
                    let fresh = fresh_name(v);
                    inner.insert(v.clone(), Type::Var(fresh.clone()));
                    (fresh, a.subst(&inner, idx))
                } else {
                    (v.clone(), a.subst(&inner, idx))
                };
                match self {
                    Type::ExistsTp(..) => Type::ExistsTp(v2, Box::new(body)),
                    _ => Type::ForallTp(v2, Box::new(body)),
                }
            }
            Type::ExistsIx(v, a) | Type::ForallIx(v, a) => {
                let mut inner = idx.clone();
                inner.remove(v);
                let mut range = BTreeSet::new();
                for e in inner.values() {
                    e.free_vars(&mut range);
                }
                for t in tps.values() {
                    t.free_idx_vars(&mut range);
                }
                let (v2, body) = if range.contains(v) {
                    let fresh = fresh_name(v);
                    inner.insert(v.clone(), Exp::Var(fresh.clone()));
                    (fresh, a.subst(tps, &inner))
                } else {
                    (v.clone(), a.subst(tps, &inner))
                };
                match self {
                    Type::ExistsIx(..) => Type::ExistsIx(v2, Box::new(body)),
                    _ => Type::ForallIx(v2, Box::new(body)),
                }
            }
            Type::Assert(p, a) => Type::Assert(p.subst(idx), go(a)),
            Type::Assume(p, a) => Type::Assume(p.subst(idx), go(a)),
            Type::Pay(e, a) => Type::Pay(e.subst(idx), go(a)),
            Type::Get(e, a) => Type::Get(e.subst(idx), go(a)),
            Type::Next(e, a) => Type::Next(e.subst(idx), go(a)),
            Type::Box(a) => Type::Box(go(a)),
            Type::Dia(a) => Type::Dia(go(a)),
        }
    }
}

/// Free index variables of an expression, proposition or type.
pub enum IdxTerm<'a> {
    Exp(&'a Exp),
    Prop(&'a Prop),
    Type(&'a Type),
}

pub fn free_idx_vars(x: IdxTerm<'_>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    match x {
        IdxTerm::Exp(e) => e.free_vars(&mut out),
        IdxTerm::Prop(p) => p.free_vars(&mut out),
        IdxTerm::Type(t) => t.free_idx_vars(&mut out),
    }
    out
}

pub fn subst_type(a: &Type, tps: &HashMap<String, Type>, idx: &HashMap<String, Exp>) -> Type {
    a.subst(tps, idx)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proc {
    pub span: Span,
    pub kind: ProcKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub label: String,
    pub span: Span,
    pub body: Proc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProcKind {
    SendLabel { ch: String, label: String, cont: Box<Proc> },
    Case { ch: String, branches: Vec<Branch> },
    SendChan { ch: String, arg: String, cont: Box<Proc> },
    RecvChan { ch: String, var: String, cont: Box<Proc> },
    Close { ch: String },
    Wait { ch: String, cont: Box<Proc> },
    Fwd { x: String, y: String },
    /// `x <- f[..]{..} ys ; cont`, or a tail call when `cont` is absent.
    Spawn {
        x: String,
        f: String,
        tps: Vec<Type>,
        idx: Vec<Exp>,
        args: Vec<String>,
        cont: Option<Box<Proc>>,
    },
    SendType { ch: String, tp: Type, cont: Box<Proc> },
    RecvType { ch: String, var: String, cont: Box<Proc> },
    SendIdx { ch: String, e: Exp, cont: Box<Proc> },
    RecvIdx { ch: String, var: String, cont: Box<Proc> },
    Assert { ch: String, phi: Prop, cont: Box<Proc> },
    Assume { ch: String, phi: Prop, cont: Box<Proc> },
    Pay { ch: String, r: Exp, cont: Box<Proc> },
    Get { ch: String, r: Exp, cont: Box<Proc> },
    Work { r: Exp, cont: Box<Proc> },
    Delay { t: Exp, cont: Box<Proc> },
    When { ch: String, cont: Box<Proc> },
    Now { ch: String, cont: Box<Proc> },
    Impossible,
}

impl Proc {
    pub fn new(span: Span, kind: ProcKind) -> Proc {
        Proc { span, kind }
    }

    /// The channel this construct acts on, if any.
    pub fn channel(&self) -> Option<&str> {
        use ProcKind::*;
        match &self.kind {
            SendLabel { ch, .. }
            | Case { ch, .. }
            | SendChan { ch, .. }
            | RecvChan { ch, .. }
            | Close { ch }
            | Wait { ch, .. }
            | SendType { ch, .. }
            | RecvType { ch, .. }
            | SendIdx { ch, .. }
            | RecvIdx { ch, .. }
            | Assert { ch, .. }
            | Assume { ch, .. }
            | Pay { ch, .. }
            | Get { ch, .. }
            | When { ch, .. }
            | Now { ch, .. } => Some(ch),
            Fwd { x, .. } => Some(x),
            Spawn { .. } | Work { .. } | Delay { .. } | Impossible => None,
        }
    }

    /// Substitution of index variables inside a process, renaming index
    /// binders that would capture.
    pub fn subst_idx(&self, sigma: &HashMap<String, Exp>) -> Proc {
        self.subst_all(&HashMap::new(), sigma)
    }

    pub fn subst_all(&self, tps: &HashMap<String, Type>, sigma: &HashMap<String, Exp>) -> Proc {
        use ProcKind::*;
        if tps.is_empty() && sigma.is_empty() {
            return self.clone();
        }
        let k = |p: &Proc| Box::new(p.subst_all(tps, sigma));
        let kind = match &self.kind {
            SendLabel { ch, label, cont } => {
                SendLabel { ch: ch.clone(), label: label.clone(), cont: k(cont) }
            }
            Case { ch, branches } => Case {
                ch: ch.clone(),
                branches: branches
                    .iter()
                    .map(|b| Branch {
                        label: b.label.clone(),
                        span: b.span,
                        body: b.body.subst_all(tps, sigma),
                    })
                    .collect(),
            },
            SendChan { ch, arg, cont } => SendChan { ch: ch.clone(), arg: arg.clone(), cont: k(cont) },
            RecvChan { ch, var, cont } => RecvChan { ch: ch.clone(), var: var.clone(), cont: k(cont) },
            Close { ch } => Close { ch: ch.clone() },
            Wait { ch, cont } => Wait { ch: ch.clone(), cont: k(cont) },
            Fwd { x, y } => Fwd { x: x.clone(), y: y.clone() },
            Spawn { x, f, tps: ts, idx, args, cont } => Spawn {
                x: x.clone(),
                f: f.clone(),
                tps: ts.iter().map(|t| t.subst(tps, sigma)).collect(),
                idx: idx.iter().map(|e| e.subst(sigma)).collect(),
                args: args.clone(),
                cont: cont.as_ref().map(|c| k(c)),
            },
            SendType { ch, tp, cont } => {
                SendType { ch: ch.clone(), tp: tp.subst(tps, sigma), cont: k(cont) }
            }
            RecvType { ch, var, cont } => {
                let mut inner = tps.clone();
                inner.remove(var);
                let mut range = Vec::new();
                for t in inner.values() {
                    t.free_tp_vars(&mut range);
                }
                if range.contains(var) {
                    let fresh = fresh_name(var);
                    inner.insert(var.clone(), Type::Var(fresh.clone()));
                    RecvType { ch: ch.clone(), var: fresh, cont: Box::new(cont.subst_all(&inner, sigma)) }
                } else {
                    RecvType { ch: ch.clone(), var: var.clone(), cont: Box::new(cont.subst_all(&inner, sigma)) }
                }
            }
            SendIdx { ch, e, cont } => SendIdx { ch: ch.clone(), e: e.subst(sigma), cont: k(cont) },
            RecvIdx { ch, var, cont } => {
                let (v2, body) = subst_binder(var, cont.as_ref(), sigma, |p, s| p.subst_all(tps, s));
                RecvIdx { ch: ch.clone(), var: v2, cont: Box::new(body) }
            }
            Assert { ch, phi, cont } => Assert { ch: ch.clone(), phi: phi.subst(sigma), cont: k(cont) },
            Assume { ch, phi, cont } => Assume { ch: ch.clone(), phi: phi.subst(sigma), cont: k(cont) },
            Pay { ch, r, cont } => Pay { ch: ch.clone(), r: r.subst(sigma), cont: k(cont) },
            Get { ch, r, cont } => Get { ch: ch.clone(), r: r.subst(sigma), cont: k(cont) },
            Work { r, cont } => Work { r: r.subst(sigma), cont: k(cont) },
            Delay { t, cont } => Delay { t: t.subst(sigma), cont: k(cont) },
            When { ch, cont } => When { ch: ch.clone(), cont: k(cont) },
            Now { ch, cont } => Now { ch: ch.clone(), cont: k(cont) },
            Impossible => Impossible,
        };
        Proc { span: self.span, kind }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SyntaxMode {
    Implicit,
    #[default]
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum CostModel {
    #[default]
    None,
    Send,
    Recv,
    RecvSend,
}

impl CostModel {
    pub fn parse(s: &str) -> Option<CostModel> {
        match s {
            "none" => Some(CostModel::None),
            "send" => Some(CostModel::Send),
            "recv" => Some(CostModel::Recv),
            "recvsend" => Some(CostModel::RecvSend),
            _ => None,
        }
    }

    pub fn charges_send(self) -> bool {
        matches!(self, CostModel::Send | CostModel::RecvSend)
    }

    pub fn charges_recv(self) -> bool {
        matches!(self, CostModel::Recv | CostModel::RecvSend)
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::None => "none",
            CostModel::Send => "send",
            CostModel::Recv => "recv",
            CostModel::RecvSend => "recvsend",
        })
    }
}

impl fmt::Display for SyntaxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntaxMode::Implicit => "implicit",
            SyntaxMode::Explicit => "explicit",
        })
    }
}

/// Options set by an `#options` pragma; unset fields fall back to defaults.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Pragma {
    pub syntax: Option<SyntaxMode>,
    pub work: Option<CostModel>,
    pub time: Option<CostModel>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDef {
    pub name: String,
    pub tparams: Vec<String>,
    pub iparams: Vec<String>,
    pub body: Type,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcDecl {
    pub name: String,
    pub tparams: Vec<String>,
    pub iparams: Vec<String>,
    pub guard: Prop,
    pub ctx: Vec<(String, Type)>,
    pub pot: Exp,
    pub offer: (String, Type),
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcDef {
    pub name: String,
    pub offered: String,
    pub tparams: Vec<String>,
    pub iparams: Vec<String>,
    pub args: Vec<String>,
    pub body: Proc,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqKind {
    Equal,
    Sub,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqTypeDecl {
    pub left: Type,
    pub right: Type,
    pub kind: EqKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecDecl {
    pub name: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decl {
    Type(TypeDef),
    Proc(ProcDecl),
    Def(ProcDef),
    EqType(EqTypeDecl),
    Exec(ExecDecl),
}

impl Decl {
    pub fn span(&self) -> Span {
        match self {
            Decl::Type(d) => d.span,
            Decl::Proc(d) => d.span,
            Decl::Def(d) => d.span,
            Decl::EqType(d) => d.span,
            Decl::Exec(d) => d.span,
        }
    }
}

/// Global environment of a program. Declarations are kept in source order;
/// the maps index the first declaration of each name.
#[derive(Clone, Debug, Default)]
pub struct Signature {
    pub decls: Vec<Decl>,
    pub pragma: Pragma,
    pub types: IndexMap<String, TypeDef>,
    pub procs: IndexMap<String, ProcDecl>,
    pub defs: IndexMap<String, ProcDef>,
    pub eqtypes: Vec<EqTypeDecl>,
    pub execs: Vec<ExecDecl>,
}

impl Signature {
    pub fn new(decls: Vec<Decl>, pragma: Pragma) -> Signature {
        let mut sig = Signature { pragma, ..Signature::default() };
        for d in &decls {
            match d {
                Decl::Type(t) => {
                    sig.types.entry(t.name.clone()).or_insert_with(|| t.clone());
                }
                Decl::Proc(p) => {
                    sig.procs.entry(p.name.clone()).or_insert_with(|| p.clone());
                }
                Decl::Def(p) => {
                    sig.defs.entry(p.name.clone()).or_insert_with(|| p.clone());
                }
                Decl::EqType(e) => sig.eqtypes.push(e.clone()),
                Decl::Exec(e) => sig.execs.push(e.clone()),
            }
        }
        sig.decls = decls;
        sig
    }

    /// Rebuilds the index maps after `decls` changed.
    pub fn reindex(self) -> Signature {
        Signature::new(self.decls, self.pragma)
    }

    pub fn type_def(&self, name: &str) -> Option<&TypeDef> {
        self.types.get(name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum UnfoldError {
    #[error("undefined type name {0}")]
    UndefinedType(String),
    #[error("type {name} expects {expected} {what} argument(s) but got {got}")]
    ArityMismatch { name: String, what: &'static str, expected: usize, got: usize },
}

/// Replaces a named instantiation by its definition.
pub fn unfold(a: &Type, sig: &Signature) -> Result<Type, UnfoldError> {
    let Type::Name(v, tps, idx) = a else {
        return Ok(a.clone());
    };
    let def = sig.type_def(v).ok_or_else(|| UnfoldError::UndefinedType(v.clone()))?;
    if def.tparams.len() != tps.len() {
        return Err(UnfoldError::ArityMismatch {
            name: v.clone(),
            what: "type",
            expected: def.tparams.len(),
            got: tps.len(),
        });
    }
    if def.iparams.len() != idx.len() {
        return Err(UnfoldError::ArityMismatch {
            name: v.clone(),
            what: "index",
            expected: def.iparams.len(),
            got: idx.len(),
        });
    }
    let tsub: HashMap<String, Type> = def.tparams.iter().cloned().zip(tps.iter().cloned()).collect();
    let isub: HashMap<String, Exp> = def.iparams.iter().cloned().zip(idx.iter().cloned()).collect();
    Ok(def.body.subst(&tsub, &isub))
}

/// The judgment context `V ; C ; v ; Delta |-q`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypingContext {
    pub ivars: Vec<String>,
    pub constraints: Vec<Prop>,
    pub tvars: Vec<String>,
    pub delta: IndexMap<String, Type>,
    pub pot: Exp,
}

impl Default for Exp {
    fn default() -> Exp {
        Exp::Nat(0)
    }
}

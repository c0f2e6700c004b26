//! Bidirectional checking of process definitions against declarations.
//!
//! One traversal serves three stages. `Approx` sees only the structural
//! skeleton. `Recon` follows the full types without verifying arithmetic and
//! inserts the silent constructs an implicit program leaves out. `Strict`
//! verifies every rule.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use indexmap::IndexMap;
use serde::Serialize;

use crate::arith::{normalize_multinomial, show_model, Solver, Verdict};
use crate::ast::*;
use crate::diag::Diagnostic;
use crate::elaborate::{validate_signature, Env};
use crate::reconstruct::{check_alternation, instrument_cost};
use crate::subtype::{check_eqtype_decls, Mode, SubError, Subtyper, DEFAULT_BOUND};
use crate::syntax::{pretty_exp, pretty_prop};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Approx,
    Recon,
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DisplaceError {
    #[error("{0} cannot be delayed")]
    Undefined(String),
    #[error("cannot compare delay {0} with {1}")]
    Incomparable(String, String),
}

/// Options in effect for one file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Options {
    pub syntax: SyntaxMode,
    pub work: CostModel,
    pub time: CostModel,
    pub bound: usize,
}

impl Default for Options {
    fn default() -> Options {
        Options { syntax: SyntaxMode::Explicit, work: CostModel::None, time: CostModel::None, bound: DEFAULT_BOUND }
    }
}

/// Command-line settings; each one set here beats the file pragma.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub syntax: Option<SyntaxMode>,
    pub work: Option<CostModel>,
    pub time: Option<CostModel>,
    pub bound: Option<usize>,
}

impl Options {
    /// Defaults, then the pragma, then the overrides.
    pub fn resolve(p: &Pragma, o: &Overrides) -> Options {
        let d = Options::default();
        Options {
            syntax: o.syntax.or(p.syntax).unwrap_or(d.syntax),
            work: o.work.or(p.work).unwrap_or(d.work),
            time: o.time.or(p.time).unwrap_or(d.time),
            bound: o.bound.unwrap_or(d.bound),
        }
    }
}

#[derive(Clone, Debug)]
struct Ctx {
    vars: Vec<String>,
    cons: Vec<Prop>,
    tvars: Vec<String>,
    delta: IndexMap<String, Type>,
    pot: Exp,
    x: String,
    a: Type,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Provided,
    Used,
}

/// A silent construct inserted during reconstruction.
enum Insert {
    Assert(String, Prop),
    Assume(String, Prop),
    Pay(String, Exp),
    Get(String, Exp),
}

fn wrap(ins: Vec<Insert>, span: Span, p: Proc) -> Proc {
    ins.into_iter().rev().fold(p, |cont, i| {
        let cont = Box::new(cont);
        let kind = match i {
            Insert::Assert(ch, phi) => ProcKind::Assert { ch, phi, cont },
            Insert::Assume(ch, phi) => ProcKind::Assume { ch, phi, cont },
            Insert::Pay(ch, r) => ProcKind::Pay { ch, r, cont },
            Insert::Get(ch, r) => ProcKind::Get { ch, r, cont },
        };
        Proc::new(span, kind)
    })
}

fn simplify(e: &Exp) -> Exp {
    normalize_multinomial(e).to_exp()
}

type CResult = Result<Proc, Diagnostic>;

pub struct Checker<'a> {
    pub env: &'a Env,
    pub solver: &'a Solver,
    pub stage: Stage,
    pub syntax: SyntaxMode,
    pub bound: usize,
}

impl<'a> Checker<'a> {
    pub fn new(env: &'a Env, solver: &'a Solver, stage: Stage, syntax: SyntaxMode) -> Checker<'a> {
        Checker { env, solver, stage, syntax, bound: DEFAULT_BOUND }
    }

    fn strict(&self) -> bool {
        self.stage == Stage::Strict
    }

    fn approx(&self) -> bool {
        self.stage == Stage::Approx
    }

    fn show(&self, t: &Type) -> String {
        self.env.show(t)
    }

    fn head(&self, t: &Type, span: Span) -> Result<Type, Diagnostic> {
        let unfold = |t: &Type| self.env.head(t).map_err(|e| Diagnostic::error(span, e.to_string()));
        let mut t = unfold(t)?;
        while self.approx() {
            match t {
                Type::Assert(_, b) | Type::Assume(_, b) | Type::Pay(_, b) | Type::Get(_, b) | Type::Next(_, b) => {
                    t = unfold(&b)?
                }
                _ => break,
            }
        }
        Ok(t)
    }

    /// Verifies `C |= phi` in the strict stage.
    fn entail(&self, ctx: &Ctx, phi: &Prop, span: Span, what: impl FnOnce() -> String) -> Result<(), Diagnostic> {
        if !self.strict() {
            return Ok(());
        }
        match self.solver.entails(&ctx.vars, &ctx.cons, phi) {
            Verdict::Invalid(m) if m.is_empty() => Err(Diagnostic::error(span, what())),
            Verdict::Invalid(m) => Err(Diagnostic::error(span, format!("{} (counterexample: {})", what(), show_model(&m)))),
            _ => Ok(()),
        }
    }

    /// Every subtraction inside `e` is defined.
    fn nat(&self, ctx: &Ctx, e: &Exp, span: Span) -> Result<(), Diagnostic> {
        match e {
            Exp::Nat(_) | Exp::Var(_) => Ok(()),
            Exp::Add(a, b) | Exp::Mul(a, b) => {
                self.nat(ctx, a, span)?;
                self.nat(ctx, b, span)
            }
            Exp::Sub(a, b) => {
                self.nat(ctx, a, span)?;
                self.nat(ctx, b, span)?;
                self.entail(ctx, &Prop::ge((**a).clone(), (**b).clone()), span, || {
                    format!("index expression {} may be negative", pretty_exp(e))
                })
            }
        }
    }

    fn spend(&self, ctx: &mut Ctx, r: &Exp, span: Span, what: &str) -> Result<(), Diagnostic> {
        if self.approx() {
            return Ok(());
        }
        self.nat(ctx, r, span)?;
        let q = ctx.pot.clone();
        self.entail(ctx, &Prop::ge(q.clone(), r.clone()), span, || {
            format!("insufficient potential for {what}: need {}, have {}", pretty_exp(r), pretty_exp(&q))
        })?;
        ctx.pot = simplify(&Exp::sub(q, r.clone()));
        Ok(())
    }

    fn earn(&self, ctx: &mut Ctx, r: &Exp) {
        if !self.approx() {
            ctx.pot = simplify(&ctx.pot.plus(r));
        }
    }

    fn no_potential(&self, ctx: &Ctx, span: Span, what: &str) -> Result<(), Diagnostic> {
        let q = ctx.pot.clone();
        self.entail(ctx, &Prop::eq(q.clone(), Exp::Nat(0)), span, || {
            format!("{what} with unspent potential {}", pretty_exp(&q))
        })
    }

    fn subtype(&self, ctx: &Ctx, a: &Type, b: &Type, span: Span, what: &str) -> Result<(), Diagnostic> {
        if self.stage == Stage::Recon {
            return Ok(());
        }
        let mode = if self.approx() { Mode::Approx } else { Mode::Strict };
        let mut s = Subtyper::new(self.env, self.solver, mode).with_bound(self.bound);
        for e in &self.env.sig.eqtypes {
            s.assume(&e.left, &e.right);
            if e.kind == EqKind::Equal {
                s.assume(&e.right, &e.left);
            }
        }
        s.subtype(&ctx.vars, &ctx.cons, a, b).map_err(|err| {
            let detail = match &err {
                SubError::Mismatch(m) => format!("{what}: {m}"),
                SubError::BoundExceeded(..) => format!("{what}: {}", err.message()),
            };
            Diagnostic::error(span, detail)
        })
    }

    fn role(&self, ctx: &Ctx, ch: &str, span: Span) -> Result<Role, Diagnostic> {
        if ch == ctx.x {
            Ok(Role::Provided)
        } else if ctx.delta.contains_key(ch) {
            Ok(Role::Used)
        } else {
            Err(Diagnostic::error(span, format!("channel {ch} is not available here")))
        }
    }

    fn type_of(&self, ctx: &Ctx, ch: &str, role: Role) -> Type {
        match role {
            Role::Provided => ctx.a.clone(),
            Role::Used => ctx.delta[ch].clone(),
        }
    }

    fn set_type(&self, ctx: &mut Ctx, ch: &str, role: Role, t: Type) {
        match role {
            Role::Provided => ctx.a = t,
            Role::Used => {
                ctx.delta.insert(ch.to_string(), t);
            }
        }
    }

    fn fresh_channel(&self, ctx: &Ctx, y: &str, span: Span) -> Result<(), Diagnostic> {
        if y == ctx.x || ctx.delta.contains_key(y) {
            Err(Diagnostic::error(span, format!("channel {y} is already in use")))
        } else {
            Ok(())
        }
    }

    /// Moves one silent constructor at the head of `ch` into the context.
    /// `lazy` also admits the constructors that are inserted lazily.
    fn force_one(&self, ctx: &mut Ctx, ch: &str, role: Role, lazy: bool, span: Span) -> Result<Option<Insert>, Diagnostic> {
        let t = self.head(&self.type_of(ctx, ch, role), span)?;
        let (ins, rest) = match (role, t) {
            (Role::Provided, Type::Assume(phi, b)) | (Role::Used, Type::Assert(phi, b)) => {
                ctx.cons.push(phi.clone());
                (Insert::Assume(ch.to_string(), phi), *b)
            }
            (Role::Provided, Type::Get(r, b)) | (Role::Used, Type::Pay(r, b)) => {
                self.earn(ctx, &r);
                (Insert::Get(ch.to_string(), r), *b)
            }
            (Role::Provided, Type::Assert(phi, b)) | (Role::Used, Type::Assume(phi, b)) if lazy => {
                (Insert::Assert(ch.to_string(), phi), *b)
            }
            (Role::Provided, Type::Pay(r, b)) | (Role::Used, Type::Get(r, b)) if lazy => {
                ctx.pot = simplify(&Exp::sub(ctx.pot.clone(), r.clone()));
                (Insert::Pay(ch.to_string(), r), *b)
            }
            _ => return Ok(None),
        };
        self.set_type(ctx, ch, role, rest);
        Ok(Some(ins))
    }

    /// Eager insertion on every channel: context order, provided last.
    fn eager(&self, ctx: &mut Ctx, span: Span) -> Result<Vec<Insert>, Diagnostic> {
        let mut out = Vec::new();
        let mut chans: Vec<(String, Role)> = ctx.delta.keys().map(|c| (c.clone(), Role::Used)).collect();
        chans.push((ctx.x.clone(), Role::Provided));
        for (ch, role) in chans {
            while let Some(i) = self.force_one(ctx, &ch, role, false, span)? {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Lazy insertion before an action on `ch`.
    fn lazy(&self, ctx: &mut Ctx, ch: &str, span: Span) -> Result<Vec<Insert>, Diagnostic> {
        let mut out = Vec::new();
        if self.stage != Stage::Recon {
            return Ok(out);
        }
        let role = self.role(ctx, ch, span)?;
        while let Some(i) = self.force_one(ctx, ch, role, true, span)? {
            out.push(i);
        }
        Ok(out)
    }

    /// Lazy insertion on `ch` while its head differs from that of `target`.
    fn lazy_until(&self, ctx: &mut Ctx, ch: &str, role: Role, target: &Type, span: Span) -> Result<Vec<Insert>, Diagnostic> {
        let mut out = Vec::new();
        if self.stage != Stage::Recon {
            return Ok(out);
        }
        let want = self.head(target, span)?;
        loop {
            let have = self.head(&self.type_of(ctx, ch, role), span)?;
            if std::mem::discriminant(&have) == std::mem::discriminant(&want) {
                break;
            }
            match self.force_one(ctx, ch, role, true, span)? {
                Some(i) => out.push(i),
                None => break,
            }
        }
        Ok(out)
    }

    fn check(&self, ctx: Ctx, p: &Proc) -> CResult {
        let mut ctx = ctx;
        if self.stage == Stage::Recon {
            let pre = self.eager(&mut ctx, p.span)?;
            let body = self.step(ctx, p)?;
            return Ok(wrap(pre, p.span, body));
        }
        self.step(ctx, p)
    }

    fn expected(&self, what: &str, ch: &str, t: &Type, span: Span) -> Diagnostic {
        Diagnostic::error(span, format!("{what} on {ch}, but its type is {}", self.show(t)))
    }

    fn step(&self, mut ctx: Ctx, p: &Proc) -> CResult {
        use ProcKind::*;
        let span = p.span;
        let same = |kind: ProcKind| Ok(Proc::new(span, kind));
        match &p.kind {
            SendLabel { ch, label, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let branches = match (role, &t) {
                    (Role::Provided, Type::Plus(bs)) | (Role::Used, Type::With(bs)) => bs,
                    _ => return Err(self.expected(&format!("sending label {label}"), ch, &t, span)),
                };
                let Some((_, next)) = branches.iter().find(|(l, _)| l == label) else {
                    return Err(Diagnostic::error(span, format!("label {label} is not offered by {}", self.show(&t))));
                };
                self.set_type(&mut ctx, ch, role, next.clone());
                let cont = self.check(ctx, cont)?;
                Ok(wrap(pre, span, Proc::new(span, SendLabel { ch: ch.clone(), label: label.clone(), cont: Box::new(cont) })))
            }
            Case { ch, branches } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let alts = match (role, &t) {
                    (Role::Provided, Type::With(bs)) | (Role::Used, Type::Plus(bs)) => bs.clone(),
                    _ => return Err(self.expected("case", ch, &t, span)),
                };
                let mut out = Vec::new();
                for b in branches {
                    let Some((_, next)) = alts.iter().find(|(l, _)| *l == b.label) else {
                        return Err(Diagnostic::error(b.span, format!("branch {} is not a label of {}", b.label, self.show(&t))));
                    };
                    let mut c = ctx.clone();
                    self.set_type(&mut c, ch, role, next.clone());
                    let body = self.check(c, &b.body)?;
                    out.push(Branch { label: b.label.clone(), span: b.span, body });
                }
                for (l, next) in &alts {
                    if branches.iter().any(|b| &b.label == l) {
                        continue;
                    }
                    match self.stage {
                        Stage::Strict => return Err(Diagnostic::error(span, format!("missing branch {l} in case on {ch}"))),
                        Stage::Approx if self.syntax == SyntaxMode::Explicit => {
                            return Err(Diagnostic::error(span, format!("missing branch {l} in case on {ch}")))
                        }
                        Stage::Approx => {}
                        Stage::Recon => {
                            let mut c = ctx.clone();
                            self.set_type(&mut c, ch, role, next.clone());
                            let body = self.check(c, &Proc::new(span, Impossible))?;
                            out.push(Branch { label: l.clone(), span, body });
                        }
                    }
                }
                Ok(wrap(pre, span, Proc::new(span, Case { ch: ch.clone(), branches: out })))
            }
            SendChan { ch, arg, cont } => {
                let mut pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                if arg == ch || arg == &ctx.x || !ctx.delta.contains_key(arg) {
                    return Err(Diagnostic::error(span, format!("channel {arg} cannot be sent here")));
                }
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let (want, next) = match (role, &t) {
                    (Role::Provided, Type::Tensor(a, b)) | (Role::Used, Type::Lolli(a, b)) => ((**a).clone(), (**b).clone()),
                    _ => return Err(self.expected(&format!("sending channel {arg}"), ch, &t, span)),
                };
                pre.extend(self.lazy_until(&mut ctx, arg, Role::Used, &want, span)?);
                let have = ctx.delta.shift_remove(arg).unwrap();
                self.subtype(&ctx, &have, &want, span, &format!("channel {arg} sent on {ch}"))?;
                self.set_type(&mut ctx, ch, role, next);
                let cont = self.check(ctx, cont)?;
                Ok(wrap(pre, span, Proc::new(span, SendChan { ch: ch.clone(), arg: arg.clone(), cont: Box::new(cont) })))
            }
            RecvChan { ch, var, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                self.fresh_channel(&ctx, var, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let (got, next) = match (role, &t) {
                    (Role::Provided, Type::Lolli(a, b)) | (Role::Used, Type::Tensor(a, b)) => ((**a).clone(), (**b).clone()),
                    _ => return Err(self.expected("receiving a channel", ch, &t, span)),
                };
                self.set_type(&mut ctx, ch, role, next);
                ctx.delta.insert(var.clone(), got);
                let cont = self.check(ctx, cont)?;
                Ok(wrap(pre, span, Proc::new(span, RecvChan { ch: ch.clone(), var: var.clone(), cont: Box::new(cont) })))
            }
            Close { ch } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                if ch != &ctx.x {
                    return Err(Diagnostic::error(span, format!("close {ch}: only the provided channel {} can be closed", ctx.x)));
                }
                let t = self.head(&ctx.a, span)?;
                if t != Type::One {
                    return Err(self.expected("close", ch, &t, span));
                }
                if let Some(y) = ctx.delta.keys().next() {
                    return Err(Diagnostic::error(span, format!("channel {y} is left unused at close {ch}")));
                }
                self.no_potential(&ctx, span, "close")?;
                Ok(wrap(pre, span, p.clone()))
            }
            Wait { ch, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                if role != Role::Used || t != Type::One {
                    return Err(self.expected("wait", ch, &t, span));
                }
                ctx.delta.shift_remove(ch);
                let cont = self.check(ctx, cont)?;
                Ok(wrap(pre, span, Proc::new(span, Wait { ch: ch.clone(), cont: Box::new(cont) })))
            }
            Fwd { x, y } => {
                if x != &ctx.x {
                    return Err(Diagnostic::error(span, format!("forward must provide {}, not {x}", ctx.x)));
                }
                if !ctx.delta.contains_key(y) {
                    return Err(Diagnostic::error(span, format!("channel {y} is not available here")));
                }
                let mut pre = self.lazy(&mut ctx, x, span)?;
                pre.extend(self.lazy(&mut ctx, y, span)?);
                if let Some(z) = ctx.delta.keys().find(|z| *z != y) {
                    return Err(Diagnostic::error(span, format!("channel {z} is left unused at forward")));
                }
                self.no_potential(&ctx, span, "forward")?;
                let have = ctx.delta[y].clone();
                self.subtype(&ctx, &have, &ctx.a, span, &format!("forward {x} <-> {y}"))?;
                Ok(wrap(pre, span, p.clone()))
            }
            Spawn { x, f, tps, idx, args, cont } => self.spawn(ctx, p, x, f, tps, idx, args, cont.as_deref()),
            SendType { ch, tp, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let mut fv = Vec::new();
                tp.free_tp_vars(&mut fv);
                if let Some(v) = fv.iter().find(|v| !ctx.tvars.contains(v)) {
                    return Err(Diagnostic::error(span, format!("type variable {v} is not in scope")));
                }
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let next = match (role, &t) {
                    (Role::Provided, Type::ExistsTp(a, b)) | (Role::Used, Type::ForallTp(a, b)) => {
                        b.subst(&HashMap::from([(a.clone(), tp.clone())]), &HashMap::new())
                    }
                    _ => return Err(self.expected("sending a type", ch, &t, span)),
                };
                self.set_type(&mut ctx, ch, role, next);
                let cont = self.check(ctx, cont)?;
                Ok(wrap(pre, span, Proc::new(span, SendType { ch: ch.clone(), tp: tp.clone(), cont: Box::new(cont) })))
            }
            RecvType { ch, var, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let (a, b) = match (role, &t) {
                    (Role::Provided, Type::ForallTp(a, b)) | (Role::Used, Type::ExistsTp(a, b)) => (a.clone(), (**b).clone()),
                    _ => return Err(self.expected("receiving a type", ch, &t, span)),
                };
                let (v, cont) = if ctx.tvars.contains(var) {
                    let v = fresh_name(var);
                    let c = cont.subst_all(&HashMap::from([(var.clone(), Type::Var(v.clone()))]), &HashMap::new());
                    (v, c)
                } else {
                    (var.clone(), (**cont).clone())
                };
                let next = b.subst(&HashMap::from([(a, Type::Var(v.clone()))]), &HashMap::new());
                self.set_type(&mut ctx, ch, role, next);
                ctx.tvars.push(v.clone());
                let cont = self.check(ctx, &cont)?;
                Ok(wrap(pre, span, Proc::new(span, RecvType { ch: ch.clone(), var: v, cont: Box::new(cont) })))
            }
            SendIdx { ch, e, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let next = match (role, &t) {
                    (Role::Provided, Type::ExistsIx(n, b)) | (Role::Used, Type::ForallIx(n, b)) => {
                        b.subst(&HashMap::new(), &HashMap::from([(n.clone(), e.clone())]))
                    }
                    _ => return Err(self.expected("sending an index", ch, &t, span)),
                };
                self.nat(&ctx, e, span)?;
                self.set_type(&mut ctx, ch, role, next);
                let cont = self.check(ctx, cont)?;
                Ok(wrap(pre, span, Proc::new(span, SendIdx { ch: ch.clone(), e: e.clone(), cont: Box::new(cont) })))
            }
            RecvIdx { ch, var, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let (n, b) = match (role, &t) {
                    (Role::Provided, Type::ForallIx(n, b)) | (Role::Used, Type::ExistsIx(n, b)) => (n.clone(), (**b).clone()),
                    _ => return Err(self.expected("receiving an index", ch, &t, span)),
                };
                let clash = ctx.vars.contains(var) || self.mentions_var(&ctx, var);
                let (v, cont) = if clash {
                    let v = fresh_name(var);
                    (v.clone(), cont.subst_idx(&HashMap::from([(var.clone(), Exp::Var(v))])))
                } else {
                    (var.clone(), (**cont).clone())
                };
                let next = b.subst(&HashMap::new(), &HashMap::from([(n, Exp::Var(v.clone()))]));
                self.set_type(&mut ctx, ch, role, next);
                ctx.vars.push(v.clone());
                let cont = self.check(ctx, &cont)?;
                Ok(wrap(pre, span, Proc::new(span, RecvIdx { ch: ch.clone(), var: v, cont: Box::new(cont) })))
            }
            Assert { ch, phi, cont } | Assume { ch, phi, cont } => {
                let is_assert = matches!(p.kind, Assert { .. });
                let role = self.role(&ctx, ch, span)?;
                if self.approx() {
                    let cont = self.check(ctx, cont)?;
                    return self.rebuild(p, cont);
                }
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let (psi, next) = match (is_assert, role, &t) {
                    (true, Role::Provided, Type::Assert(psi, b))
                    | (true, Role::Used, Type::Assume(psi, b))
                    | (false, Role::Provided, Type::Assume(psi, b))
                    | (false, Role::Used, Type::Assert(psi, b)) => (psi.clone(), (**b).clone()),
                    _ => {
                        let what = if is_assert { "assert" } else { "assume" };
                        return Err(self.expected(what, ch, &t, span));
                    }
                };
                if is_assert {
                    self.entail(&ctx, phi, span, || format!("assertion {} does not hold", pretty_prop(phi)))?;
                    let mut c2 = ctx.clone();
                    c2.cons.push(phi.clone());
                    self.entail(&c2, &psi, span, || {
                        format!("assertion {} does not imply required {}", pretty_prop(phi), pretty_prop(&psi))
                    })?;
                } else {
                    let mut c2 = ctx.clone();
                    c2.cons.push(psi.clone());
                    self.entail(&c2, phi, span, || {
                        format!("assumption {} does not follow from {}", pretty_prop(phi), pretty_prop(&psi))
                    })?;
                    ctx.cons.push(psi);
                    if phi != &Prop::True {
                        ctx.cons.push(phi.clone());
                    }
                }
                self.set_type(&mut ctx, ch, role, next);
                let cont = self.check(ctx, cont)?;
                self.rebuild(p, cont)
            }
            Pay { ch, r, cont } | Get { ch, r, cont } => {
                let is_pay = matches!(p.kind, Pay { .. });
                let role = self.role(&ctx, ch, span)?;
                if self.approx() {
                    let cont = self.check(ctx, cont)?;
                    return self.rebuild(p, cont);
                }
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let (amount, next) = match (is_pay, role, &t) {
                    (true, Role::Provided, Type::Pay(s, b))
                    | (true, Role::Used, Type::Get(s, b))
                    | (false, Role::Provided, Type::Get(s, b))
                    | (false, Role::Used, Type::Pay(s, b)) => (s.clone(), (**b).clone()),
                    _ => return Err(self.expected(if is_pay { "pay" } else { "get" }, ch, &t, span)),
                };
                self.entail(&ctx, &Prop::eq(r.clone(), amount.clone()), span, || {
                    format!("amount {} differs from {} required by the type", pretty_exp(r), pretty_exp(&amount))
                })?;
                if is_pay {
                    self.spend(&mut ctx, r, span, &format!("pay {ch}"))?;
                } else {
                    self.nat(&ctx, r, span)?;
                    self.earn(&mut ctx, r);
                }
                self.set_type(&mut ctx, ch, role, next);
                let cont = self.check(ctx, cont)?;
                self.rebuild(p, cont)
            }
            Work { r, cont } => {
                if self.strict() {
                    self.spend(&mut ctx, r, span, "work")?;
                }
                let cont = self.check(ctx, cont)?;
                self.rebuild(p, cont)
            }
            Delay { t, cont } => {
                if !self.approx() {
                    self.nat(&ctx, t, span)?;
                    let mut delta = IndexMap::new();
                    for (c, ty) in &ctx.delta {
                        let d = self.displace(&ctx, ty, t, Side::Left).map_err(|e| {
                            Diagnostic::error(span, format!("delay {{{}}} on channel {c}: {e}", pretty_exp(t)))
                        })?;
                        delta.insert(c.clone(), d);
                    }
                    let a = self.displace(&ctx, &ctx.a, t, Side::Right).map_err(|e| {
                        Diagnostic::error(span, format!("delay {{{}}} on channel {}: {e}", pretty_exp(t), ctx.x))
                    })?;
                    ctx.delta = delta;
                    ctx.a = a;
                }
                let cont = self.check(ctx, cont)?;
                self.rebuild(p, cont)
            }
            When { ch, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let next = match (role, &t) {
                    (Role::Provided, Type::Box(b)) => {
                        self.patient(&ctx, None, span, "when")?;
                        (**b).clone()
                    }
                    (Role::Used, Type::Dia(b)) => {
                        self.patient(&ctx, Some(ch), span, "when")?;
                        if self.stage != Stage::Recon && !self.eventually(&ctx.a, span)? {
                            return Err(Diagnostic::error(
                                span,
                                format!("when {ch}: the provided type {} must be of the form ()..<> C", self.show(&ctx.a)),
                            ));
                        }
                        (**b).clone()
                    }
                    _ => return Err(self.expected("when", ch, &t, span)),
                };
                self.set_type(&mut ctx, ch, role, next);
                let cont = self.check(ctx, cont)?;
                Ok(wrap(pre, span, Proc::new(span, When { ch: ch.clone(), cont: Box::new(cont) })))
            }
            Now { ch, cont } => {
                let pre = self.lazy(&mut ctx, ch, span)?;
                let role = self.role(&ctx, ch, span)?;
                let t = self.head(&self.type_of(&ctx, ch, role), span)?;
                let next = match (role, &t) {
                    (Role::Provided, Type::Dia(b)) | (Role::Used, Type::Box(b)) => (**b).clone(),
                    _ => return Err(self.expected("now", ch, &t, span)),
                };
                self.set_type(&mut ctx, ch, role, next);
                let cont = self.check(ctx, cont)?;
                Ok(wrap(pre, span, Proc::new(span, Now { ch: ch.clone(), cont: Box::new(cont) })))
            }
            Impossible => {
                if self.strict() && !self.solver.is_unsat(&ctx.vars, &ctx.cons) {
                    let model = match self.solver.entails(&ctx.vars, &ctx.cons, &Prop::False) {
                        Verdict::Invalid(m) => format!(" (satisfied by {})", show_model(&m)),
                        _ => String::new(),
                    };
                    return Err(Diagnostic::error(span, format!("impossible: the constraints are satisfiable{model}")));
                }
                same(Impossible)
            }
        }
    }

    fn mentions_var(&self, ctx: &Ctx, v: &str) -> bool {
        let mut fv = BTreeSet::new();
        for t in ctx.delta.values() {
            t.free_idx_vars(&mut fv);
        }
        ctx.a.free_idx_vars(&mut fv);
        fv.contains(v)
    }

    /// Same construct with a new continuation.
    fn rebuild(&self, p: &Proc, cont: Proc) -> CResult {
        use ProcKind::*;
        let c = Box::new(cont);
        let kind = match &p.kind {
            Assert { ch, phi, .. } => Assert { ch: ch.clone(), phi: phi.clone(), cont: c },
            Assume { ch, phi, .. } => Assume { ch: ch.clone(), phi: phi.clone(), cont: c },
            Pay { ch, r, .. } => Pay { ch: ch.clone(), r: r.clone(), cont: c },
            Get { ch, r, .. } => Get { ch: ch.clone(), r: r.clone(), cont: c },
            Work { r, .. } => Work { r: r.clone(), cont: c },
            Delay { t, .. } => Delay { t: t.clone(), cont: c },
            _ => unreachable!("rebuild of {:?}", p.kind),
        };
        Ok(Proc::new(p.span, kind))
    }

    #[allow(clippy::too_many_arguments)]
    fn spawn(
        &self,
        mut ctx: Ctx,
        p: &Proc,
        x: &str,
        f: &str,
        tps: &[Type],
        idx: &[Exp],
        args: &[String],
        cont: Option<&Proc>,
    ) -> CResult {
        let span = p.span;
        let decl = self.env.sig.procs.get(f).ok_or_else(|| Diagnostic::error(span, format!("undeclared process {f}")))?;
        if decl.tparams.len() != tps.len() || decl.iparams.len() != idx.len() || decl.ctx.len() != args.len() {
            return Err(Diagnostic::error(span, format!("wrong number of arguments to {f}")));
        }
        let tsub: HashMap<String, Type> = decl.tparams.iter().cloned().zip(tps.iter().cloned()).collect();
        let isub: HashMap<String, Exp> = decl.iparams.iter().cloned().zip(idx.iter().cloned()).collect();
        for t in tps {
            let mut fv = Vec::new();
            t.free_tp_vars(&mut fv);
            if let Some(v) = fv.iter().find(|v| !ctx.tvars.contains(v)) {
                return Err(Diagnostic::error(span, format!("type variable {v} is not in scope")));
            }
        }
        for e in idx {
            self.nat(&ctx, e, span)?;
        }
        let guard = decl.guard.subst(&isub);
        self.entail(&ctx, &guard, span, || format!("constraint {} of {f} does not hold", pretty_prop(&guard)))?;
        let mut pre = Vec::new();
        let mut seen = Vec::new();
        for (a, (_, pt)) in args.iter().zip(&decl.ctx) {
            if seen.contains(a) || !ctx.delta.contains_key(a) {
                return Err(Diagnostic::error(span, format!("channel {a} is not available as an argument to {f}")));
            }
            seen.push(a.clone());
            let want = pt.subst(&tsub, &isub);
            pre.extend(self.lazy_until(&mut ctx, a, Role::Used, &want, span)?);
            let have = ctx.delta.shift_remove(a).unwrap();
            self.subtype(&ctx, &have, &want, span, &format!("argument {a} of {f}"))?;
        }
        let pot = decl.pot.subst(&isub);
        let offered = decl.offer.1.subst(&tsub, &isub);
        match cont {
            Some(q) => {
                self.fresh_channel(&ctx, x, span)?;
                self.spend(&mut ctx, &pot, span, &format!("spawning {f}"))?;
                ctx.delta.insert(x.to_string(), offered);
                let q = self.check(ctx, q)?;
                let mut out = p.clone();
                if let ProcKind::Spawn { cont, .. } = &mut out.kind {
                    *cont = Some(Box::new(q));
                }
                Ok(wrap(pre, span, out))
            }
            None => {
                if x != ctx.x {
                    return Err(Diagnostic::error(span, format!("tail call must provide {}, not {x}", ctx.x)));
                }
                pre.extend(self.lazy_until(&mut ctx, x, Role::Provided, &offered, span)?);
                if let Some(z) = ctx.delta.keys().next() {
                    return Err(Diagnostic::error(span, format!("channel {z} is left unused at call of {f}")));
                }
                self.spend(&mut ctx, &pot, span, &format!("calling {f}"))?;
                self.no_potential(&ctx, span, &format!("call of {f}"))?;
                self.subtype(&ctx, &offered, &ctx.a, span, &format!("result of {f}"))?;
                Ok(wrap(pre, span, p.clone()))
            }
        }
    }

    fn delay_prefix(&self, t: &Type, span: Span) -> Result<Type, Diagnostic> {
        let mut t = self.env.head(t).map_err(|e| Diagnostic::error(span, e.to_string()))?;
        for _ in 0..64 {
            match t {
                Type::Next(_, b) => t = self.env.head(&b).map_err(|e| Diagnostic::error(span, e.to_string()))?,
                other => return Ok(other),
            }
        }
        Ok(t)
    }

    /// Every used channel other than `except` has the form ()..[] B.
    fn patient(&self, ctx: &Ctx, except: Option<&str>, span: Span, what: &str) -> Result<(), Diagnostic> {
        if self.stage == Stage::Recon {
            return Ok(());
        }
        for (c, t) in &ctx.delta {
            if Some(c.as_str()) == except {
                continue;
            }
            let h = self.delay_prefix(t, span)?;
            if !matches!(h, Type::Box(_) | Type::Var(_)) {
                return Err(Diagnostic::error(
                    span,
                    format!("{what}: channel {c} of type {} cannot wait indefinitely", self.show(t)),
                ));
            }
        }
        Ok(())
    }

    fn eventually(&self, t: &Type, span: Span) -> Result<bool, Diagnostic> {
        Ok(matches!(self.delay_prefix(t, span)?, Type::Dia(_)))
    }

    /// Removes `by` time units from `t` on the given side.
    fn displace(&self, ctx: &Ctx, t: &Type, by: &Exp, side: Side) -> Result<Type, DisplaceError> {
        displace_in(self.env, self.solver, &ctx.vars, &ctx.cons, t, by, side)
    }
}

/// Temporal displacement `[A]^-t` on the left or right of the turnstile.
pub fn displace_in(
    env: &Env,
    solver: &Solver,
    vars: &[String],
    cons: &[Prop],
    t: &Type,
    by: &Exp,
    side: Side,
) -> Result<Type, DisplaceError> {
    let holds = |phi: Prop| solver.entails(vars, cons, &phi) == Verdict::Valid;
    if by.is_zero() || holds(Prop::eq(by.clone(), Exp::Nat(0))) {
        return Ok(t.clone());
    }
    let undefined = || DisplaceError::Undefined(env.show(t));
    let h = env.head(t).map_err(|_| undefined())?;
    match &h {
        Type::Next(s, b) => {
            if s == by || holds(Prop::eq(s.clone(), by.clone())) {
                Ok((**b).clone())
            } else if holds(Prop::gt(s.clone(), by.clone())) {
                Ok(Type::Next(simplify(&Exp::sub(s.clone(), by.clone())), b.clone()))
            } else if holds(Prop::gt(by.clone(), s.clone())) {
                displace_in(env, solver, vars, cons, b, &simplify(&Exp::sub(by.clone(), s.clone())), side)
            } else {
                Err(DisplaceError::Incomparable(pretty_exp(by), pretty_exp(s)))
            }
        }
        Type::Box(_) if side == Side::Left => Ok(t.clone()),
        Type::Dia(_) if side == Side::Right => Ok(t.clone()),
        Type::Var(_) => Ok(t.clone()),
        _ => Err(undefined()),
    }
}

// ---------------------------------------------------------------------------
// Declarations and whole signatures

/// The starting context of a definition.
fn initial_ctx(decl: &ProcDecl, def: &ProcDef) -> Ctx {
    let tsub: HashMap<String, Type> =
        decl.tparams.iter().cloned().zip(def.tparams.iter().map(|v| Type::Var(v.clone()))).collect();
    let isub: HashMap<String, Exp> = decl.iparams.iter().cloned().zip(def.iparams.iter().map(|v| Exp::var(v))).collect();
    let mut delta = IndexMap::new();
    for (y, (_, t)) in def.args.iter().zip(&decl.ctx) {
        delta.insert(y.clone(), t.subst(&tsub, &isub));
    }
    let guard = decl.guard.subst(&isub);
    Ctx {
        vars: def.iparams.clone(),
        cons: if guard == Prop::True { vec![] } else { vec![guard] },
        tvars: def.tparams.clone(),
        delta,
        pot: decl.pot.subst(&isub),
        x: def.offered.clone(),
        a: decl.offer.1.subst(&tsub, &isub),
    }
}

impl<'a> Checker<'a> {
    /// Checks (or transforms) the body of `def`.
    pub fn check_def(&self, def: &ProcDef) -> CResult {
        let decl = self
            .env
            .sig
            .procs
            .get(&def.name)
            .ok_or_else(|| Diagnostic::error(def.span, format!("process {} is not declared", def.name)))?;
        let ctx = initial_ctx(decl, def);
        self.check(ctx, &def.body)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeclReport {
    pub name: String,
    pub verdict: &'static str,
    pub trusted: usize,
    pub ms: f64,
}

#[derive(Debug, Default)]
pub struct Report {
    pub decls: Vec<DeclReport>,
    pub diagnostics: Vec<Diagnostic>,
    /// The signature after reconstruction and cost instrumentation.
    pub elaborated: Option<Signature>,
    pub trusted: Vec<String>,
}

impl Report {
    pub fn ok(&self) -> bool {
        !self.diagnostics.iter().any(|d| d.is_error())
    }
}

/// Validation, staged checking, reconstruction and instrumentation under
/// fully resolved options.
pub fn check_signature(sig: &Signature, opts: &Options) -> Report {
    let opts = *opts;
    let solver = Solver::new();
    let mut report = Report::default();
    let diags = validate_signature(sig, &solver);
    let invalid = diags.iter().any(|d| d.is_error());
    report.diagnostics.extend(diags);
    if invalid {
        return report;
    }
    let env = Env::new(sig.clone());
    if opts.syntax == SyntaxMode::Implicit {
        let alt = alternation_diags(&env.sig);
        if !alt.is_empty() {
            report.diagnostics.extend(alt);
            return report;
        }
    }
    report.diagnostics.extend(check_eqtype_decls(&env, &solver, opts.bound));
    for c in solver.trusted() {
        report.diagnostics.push(Diagnostic::warning(Span::default(), format!("trusting: {c}")));
    }

    let mut new_decls = Vec::new();
    for d in &env.sig.decls {
        let Decl::Def(def) = d else {
            new_decls.push(d.clone());
            continue;
        };
        let start = Instant::now();
        let before = solver.trusted().len();
        let verdict = check_one(&env, &solver, &opts, def, &mut report.diagnostics).map(|body| {
            let mut def = def.clone();
            def.body = body;
            new_decls.push(Decl::Def(def));
        });
        let fresh = solver.trusted().split_off(before);
        for c in &fresh {
            report.diagnostics.push(Diagnostic::warning(def.span, format!("trusting: {c}")));
        }
        report.decls.push(DeclReport {
            name: def.name.clone(),
            verdict: if verdict.is_ok() { "ok" } else { "error" },
            trusted: fresh.len(),
            ms: start.elapsed().as_secs_f64() * 1000.0,
        });
        if verdict.is_err() {
            new_decls.push(d.clone());
        }
    }
    report.trusted = solver.trusted();
    if report.ok() {
        let mut pragma = sig.pragma.clone();
        pragma.syntax = Some(SyntaxMode::Explicit);
        pragma.work = Some(CostModel::None);
        pragma.time = Some(CostModel::None);
        report.elaborated = Some(Signature::new(new_decls, pragma));
    }
    report
}

fn alternation_diags(sig: &Signature) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for d in &sig.decls {
        let (span, types): (Span, Vec<&Type>) = match d {
            Decl::Type(t) => (t.span, vec![&t.body]),
            Decl::Proc(p) => (p.span, p.ctx.iter().map(|(_, t)| t).chain([&p.offer.1]).collect()),
            _ => continue,
        };
        for t in types {
            if let Err(msg) = check_alternation(t, sig) {
                out.push(Diagnostic::error(span, msg));
            }
        }
    }
    out
}

/// Stage 1, then reconstruction and instrumentation, then stage 2.
fn check_one(env: &Env, solver: &Solver, opts: &Options, def: &ProcDef, diags: &mut Vec<Diagnostic>) -> Result<Proc, ()> {
    let mut approx = Checker::new(env, solver, Stage::Approx, opts.syntax);
    approx.bound = opts.bound;
    if let Err(d) = approx.check_def(def) {
        diags.push(d);
        return Err(());
    }
    let mut body = instrument_cost(&def.body, opts.work, opts.time);
    if opts.syntax == SyntaxMode::Implicit {
        let recon = Checker::new(env, solver, Stage::Recon, opts.syntax);
        let d2 = ProcDef { body, ..def.clone() };
        match recon.check_def(&d2) {
            Ok(b) => body = b,
            Err(d) => {
                diags.push(d);
                return Err(());
            }
        }
    }
    let mut strict = Checker::new(env, solver, Stage::Strict, opts.syntax);
    strict.bound = opts.bound;
    let d3 = ProcDef { body: body.clone(), ..def.clone() };
    match strict.check_def(&d3) {
        Ok(_) => Ok(body),
        Err(d) => {
            diags.push(d);
            Err(())
        }
    }
}

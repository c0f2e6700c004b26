//! Cost instrumentation and implicit-to-explicit reconstruction.

use std::collections::HashSet;

use crate::arith::Solver;
use crate::ast::*;
use crate::diag::Diagnostic;
use crate::elaborate::Env;
use crate::syntax::pretty_type;
use crate::typecheck::{Checker, Stage};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Polarity {
    AssertLike,
    AssumeLike,
}

/// Rejects a run of silent constructors in which an assert-like one
/// (`?{}` or `|>`) follows an assume-like one (`!{}` or `<|`).
pub fn check_alternation(t: &Type, sig: &Signature) -> Result<(), String> {
    let mut seen = HashSet::new();
    walk(t, sig, None, &mut seen)
}

fn walk(t: &Type, sig: &Signature, run: Option<Polarity>, seen: &mut HashSet<(String, Option<bool>)>) -> Result<(), String> {
    let here = match t {
        Type::Assert(..) | Type::Pay(..) => Some(Polarity::AssertLike),
        Type::Assume(..) | Type::Get(..) => Some(Polarity::AssumeLike),
        _ => None,
    };
    if here == Some(Polarity::AssertLike) && run == Some(Polarity::AssumeLike) {
        return Err(format!("alternating constraints in implicit mode: {} follows an assume-like constructor", pretty_type(t)));
    }
    match t {
        Type::Assert(_, b) | Type::Assume(_, b) | Type::Pay(_, b) | Type::Get(_, b) => {
            walk(b, sig, here.max_with(run), seen)
        }
        Type::Next(_, b) | Type::Box(b) | Type::Dia(b) => walk(b, sig, run, seen),
        Type::Name(v, tps, _) => {
            for a in tps {
                walk(a, sig, None, seen)?;
            }
            let key = (v.clone(), run.map(|p| p == Polarity::AssumeLike));
            if !seen.insert(key) {
                return Ok(());
            }
            match sig.type_def(v) {
                Some(def) => walk(&def.body, sig, run, seen),
                None => Ok(()),
            }
        }
        Type::One | Type::Var(_) => Ok(()),
        _ => {
            for c in t.children() {
                walk(c, sig, None, seen)?;
            }
            Ok(())
        }
    }
}

trait Join {
    fn max_with(self, other: Self) -> Self;
}

impl Join for Option<Polarity> {
    fn max_with(self, other: Self) -> Self {
        if self == Some(Polarity::AssumeLike) || other == Some(Polarity::AssumeLike) {
            Some(Polarity::AssumeLike)
        } else {
            self.or(other)
        }
    }
}

fn work1(span: Span, cont: Proc) -> Proc {
    Proc::new(span, ProcKind::Work { r: Exp::Nat(1), cont: Box::new(cont) })
}

fn delay1(span: Span, cont: Proc) -> Proc {
    Proc::new(span, ProcKind::Delay { t: Exp::Nat(1), cont: Box::new(cont) })
}

/// Inserts `work{1}` and `delay{1}` around the constructs charged by the
/// selected cost models.
pub fn instrument_cost(p: &Proc, work: CostModel, time: CostModel) -> Proc {
    if work == CostModel::None && time == CostModel::None {
        return p.clone();
    }
    go(p, work, time)
}

fn go(p: &Proc, work: CostModel, time: CostModel) -> Proc {
    use ProcKind::*;
    let span = p.span;
    let k = |c: &Proc| go(c, work, time);
    // Receives: charge at the start of the continuation.
    let after_recv = |c: &Proc| {
        let mut c = k(c);
        if time.charges_recv() {
            c = delay1(span, c);
        }
        if work.charges_recv() {
            c = work1(span, c);
        }
        c
    };
    let after_send = |c: &Proc| {
        let c = k(c);
        if time.charges_send() {
            delay1(span, c)
        } else {
            c
        }
    };
    let before_send = |q: Proc| if work.charges_send() { work1(span, q) } else { q };
    match &p.kind {
        SendLabel { ch, label, cont } => {
            before_send(Proc::new(span, SendLabel { ch: ch.clone(), label: label.clone(), cont: Box::new(after_send(cont)) }))
        }
        SendChan { ch, arg, cont } => {
            before_send(Proc::new(span, SendChan { ch: ch.clone(), arg: arg.clone(), cont: Box::new(after_send(cont)) }))
        }
        Close { .. } => before_send(p.clone()),
        Now { ch, cont } => before_send(Proc::new(span, Now { ch: ch.clone(), cont: Box::new(k(cont)) })),
        Case { ch, branches } => Proc::new(
            span,
            Case {
                ch: ch.clone(),
                branches: branches
                    .iter()
                    .map(|b| Branch { label: b.label.clone(), span: b.span, body: after_recv(&b.body) })
                    .collect(),
            },
        ),
        RecvChan { ch, var, cont } => Proc::new(span, RecvChan { ch: ch.clone(), var: var.clone(), cont: Box::new(after_recv(cont)) }),
        Wait { ch, cont } => Proc::new(span, Wait { ch: ch.clone(), cont: Box::new(after_recv(cont)) }),
        When { ch, cont } => {
            let mut c = k(cont);
            if work.charges_recv() {
                c = work1(span, c);
            }
            Proc::new(span, When { ch: ch.clone(), cont: Box::new(c) })
        }
        Fwd { .. } | Impossible => p.clone(),
        Spawn { x, f, tps, idx, args, cont } => Proc::new(
            span,
            Spawn {
                x: x.clone(),
                f: f.clone(),
                tps: tps.clone(),
                idx: idx.clone(),
                args: args.clone(),
                cont: cont.as_ref().map(|c| Box::new(k(c))),
            },
        ),
        SendType { ch, tp, cont } => Proc::new(span, SendType { ch: ch.clone(), tp: tp.clone(), cont: Box::new(k(cont)) }),
        RecvType { ch, var, cont } => Proc::new(span, RecvType { ch: ch.clone(), var: var.clone(), cont: Box::new(k(cont)) }),
        SendIdx { ch, e, cont } => Proc::new(span, SendIdx { ch: ch.clone(), e: e.clone(), cont: Box::new(k(cont)) }),
        RecvIdx { ch, var, cont } => Proc::new(span, RecvIdx { ch: ch.clone(), var: var.clone(), cont: Box::new(k(cont)) }),
        Assert { ch, phi, cont } => Proc::new(span, Assert { ch: ch.clone(), phi: phi.clone(), cont: Box::new(k(cont)) }),
        Assume { ch, phi, cont } => Proc::new(span, Assume { ch: ch.clone(), phi: phi.clone(), cont: Box::new(k(cont)) }),
        Pay { ch, r, cont } => Proc::new(span, Pay { ch: ch.clone(), r: r.clone(), cont: Box::new(k(cont)) }),
        Get { ch, r, cont } => Proc::new(span, Get { ch: ch.clone(), r: r.clone(), cont: Box::new(k(cont)) }),
        Work { r, cont } => Proc::new(span, Work { r: r.clone(), cont: Box::new(k(cont)) }),
        Delay { t, cont } => Proc::new(span, Delay { t: t.clone(), cont: Box::new(k(cont)) }),
    }
}

/// Inserts the silent constructs of an implicit definition. The body is
/// expected to pass approximate typing already.
pub fn reconstruct_def(env: &Env, solver: &Solver, def: &ProcDef) -> Result<ProcDef, Diagnostic> {
    let checker = Checker::new(env, solver, Stage::Recon, SyntaxMode::Implicit);
    let body = checker.check_def(def)?;
    Ok(ProcDef { body, ..def.clone() })
}

/// Removes every assert, assume, pay, get and work construct.
pub fn erase_silent(p: &Proc) -> Proc {
    use ProcKind::*;
    let k = |c: &Proc| Box::new(erase_silent(c));
    let span = p.span;
    match &p.kind {
        Assert { cont, .. } | Assume { cont, .. } | Pay { cont, .. } | Get { cont, .. } | Work { cont, .. } => {
            erase_silent(cont)
        }
        SendLabel { ch, label, cont } => Proc::new(span, SendLabel { ch: ch.clone(), label: label.clone(), cont: k(cont) }),
        Case { ch, branches } => Proc::new(
            span,
            Case {
                ch: ch.clone(),
                branches: branches
                    .iter()
                    .map(|b| Branch { label: b.label.clone(), span: b.span, body: erase_silent(&b.body) })
                    .collect(),
            },
        ),
        SendChan { ch, arg, cont } => Proc::new(span, SendChan { ch: ch.clone(), arg: arg.clone(), cont: k(cont) }),
        RecvChan { ch, var, cont } => Proc::new(span, RecvChan { ch: ch.clone(), var: var.clone(), cont: k(cont) }),
        Wait { ch, cont } => Proc::new(span, Wait { ch: ch.clone(), cont: k(cont) }),
        Spawn { x, f, tps, idx, args, cont } => Proc::new(
            span,
            Spawn {
                x: x.clone(),
                f: f.clone(),
                tps: tps.clone(),
                idx: idx.clone(),
                args: args.clone(),
                cont: cont.as_ref().map(|c| k(c)),
            },
        ),
        SendType { ch, tp, cont } => Proc::new(span, SendType { ch: ch.clone(), tp: tp.clone(), cont: k(cont) }),
        RecvType { ch, var, cont } => Proc::new(span, RecvType { ch: ch.clone(), var: var.clone(), cont: k(cont) }),
        SendIdx { ch, e, cont } => Proc::new(span, SendIdx { ch: ch.clone(), e: e.clone(), cont: k(cont) }),
        RecvIdx { ch, var, cont } => Proc::new(span, RecvIdx { ch: ch.clone(), var: var.clone(), cont: k(cont) }),
        Delay { t, cont } => Proc::new(span, Delay { t: t.clone(), cont: k(cont) }),
        When { ch, cont } => Proc::new(span, When { ch: ch.clone(), cont: k(cont) }),
        Now { ch, cont } => Proc::new(span, Now { ch: ch.clone(), cont: k(cont) }),
        Close { .. } | Fwd { .. } | Impossible => p.clone(),
    }
}

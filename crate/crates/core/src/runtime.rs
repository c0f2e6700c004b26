//! Multiset-rewriting interpreter with work counters and local clocks.
//!
//! Messages are objects of their own. A positive message travels from the
//! provider of `on` to its client and continues on `cont`; a negative one
//! travels from the client to the provider.

use std::collections::HashMap;
use std::fmt;

use crate::arith::{eval_exp, eval_prop, Model};
use crate::ast::*;
use crate::syntax::{pretty_exp, pretty_prop, pretty_type};

pub type Chan = usize;
pub type ObjId = usize;

pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("no process named {0} is defined")]
    UnknownExec(String),
    #[error("exec {0} must be closed: no parameters and an empty context")]
    NotClosed(String),
    #[error("step limit of {0} exceeded")]
    StepLimitExceeded(u64),
    #[error("runtime fault: {0}")]
    Fault(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dir {
    Pos,
    Neg,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Label(String),
    Chan(Chan),
    Close,
    Type(Type),
    Idx(u64),
    Assert(Prop),
    Pay(u64),
    Now,
}

#[derive(Clone, Debug)]
struct Frame {
    chans: HashMap<String, Chan>,
    idx: Model,
    tps: HashMap<String, Type>,
}

#[derive(Clone, Debug)]
enum Kind<'a> {
    Proc { provides: Chan, body: &'a Proc, frame: Frame },
    Fwd { provides: Chan, from: Chan },
    Msg { dir: Dir, on: Chan, cont: Chan, payload: Payload },
}

#[derive(Clone, Debug)]
struct Obj<'a> {
    w: u64,
    /// Potential held and not yet spent.
    p: u64,
    t: u64,
    kind: Kind<'a>,
}

/// Which rule fired in one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Send,
    Receive,
    Forward,
    Spawn,
    Work,
    Delay,
    Observe,
}

enum Outcome {
    Stepped(Rule),
    /// Waiting; the object whose progress would help, if known.
    Blocked(Option<ObjId>),
}

/// What the environment saw on the distinguished channel.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Observation {
    pub items: Vec<Item>,
    pub work: u64,
    pub span: u64,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Label(String),
    Close,
    Chan(Vec<Item>),
    Type(String),
    Idx(u64),
    Assert(String),
    Pay(u64),
    Now,
    /// The provider is still waiting for input.
    Blocked,
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Label(k) => write!(f, "{k}"),
            Item::Close => write!(f, "close"),
            Item::Chan(items) => {
                let inner: Vec<String> = items.iter().map(|i| i.to_string()).collect();
                write!(f, "({})", inner.join(" ; "))
            }
            Item::Type(t) => write!(f, "[{t}]"),
            Item::Idx(n) => write!(f, "{{{n}}}"),
            Item::Assert(p) => write!(f, "assert {{{p}}}"),
            Item::Pay(r) => write!(f, "pay {{{r}}}"),
            Item::Now => write!(f, "now"),
            Item::Blocked => write!(f, "-"),
        }
    }
}

impl Observation {
    /// Labels and `close` along the top-level channel, in order.
    pub fn labels(&self) -> Vec<String> {
        self.items
            .iter()
            .filter_map(|i| match i {
                Item::Label(k) => Some(k.clone()),
                Item::Close => Some("close".to_string()),
                _ => None,
            })
            .collect()
    }

    /// One message per line, then the summary line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for i in &self.items {
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s.push_str(&format!("work={} span={} steps={}\n", self.work, self.span, self.steps));
        s
    }
}

/// Scheduling policy. `Random` calls the chooser with the number of
/// candidates and expects an index below it.
pub enum Policy<'p> {
    Sequential,
    Random(&'p mut dyn FnMut(usize) -> usize),
}

enum Slot {
    Item(Item),
    Sub(usize),
}

struct Watch {
    chan: Chan,
    node: usize,
    done: bool,
}

/// A running configuration.
pub struct Machine<'a> {
    sig: &'a Signature,
    objs: Vec<Option<Obj<'a>>>,
    provider: HashMap<Chan, ObjId>,
    neg_on: HashMap<Chan, ObjId>,
    next_chan: Chan,
    /// Work, potential and clock absorbed by the external observer.
    observed_w: u64,
    observed_p: u64,
    max_t: u64,
    steps: u64,
    nodes: Vec<Vec<Slot>>,
    watches: Vec<Watch>,
}

fn fault<T>(msg: impl Into<String>) -> Result<T, RuntimeError> {
    Err(RuntimeError::Fault(msg.into()))
}

impl<'a> Machine<'a> {
    /// The configuration with one process running `exec`.
    pub fn new(sig: &'a Signature, exec: &str) -> Result<Machine<'a>, RuntimeError> {
        let def = sig.defs.get(exec).ok_or_else(|| RuntimeError::UnknownExec(exec.to_string()))?;
        if !def.tparams.is_empty() || !def.iparams.is_empty() || !def.args.is_empty() {
            return Err(RuntimeError::NotClosed(exec.to_string()));
        }
        let mut m = Machine {
            sig,
            objs: Vec::new(),
            provider: HashMap::new(),
            neg_on: HashMap::new(),
            next_chan: 0,
            observed_w: 0,
            observed_p: 0,
            max_t: 0,
            steps: 0,
            nodes: vec![Vec::new()],
            watches: Vec::new(),
        };
        let c = m.fresh();
        let frame = Frame { chans: HashMap::from([(def.offered.clone(), c)]), idx: Model::new(), tps: HashMap::new() };
        let p = match sig.procs.get(exec) {
            Some(d) => m.eval(&d.pot, &frame)?,
            None => 0,
        };
        let id = m.alloc(Obj { w: 0, p, t: 0, kind: Kind::Proc { provides: c, body: &def.body, frame } });
        m.provider.insert(c, id);
        m.watches.push(Watch { chan: c, node: 0, done: false });
        Ok(m)
    }

    fn fresh(&mut self) -> Chan {
        self.next_chan += 1;
        self.next_chan
    }

    fn alloc(&mut self, o: Obj<'a>) -> ObjId {
        self.max_t = self.max_t.max(o.t);
        self.objs.push(Some(o));
        self.objs.len() - 1
    }

    fn live(&self) -> Vec<ObjId> {
        (0..self.objs.len()).filter(|&i| self.objs[i].is_some()).collect()
    }

    /// Work over every object plus what the observer absorbed.
    pub fn total_work(&self) -> u64 {
        self.objs.iter().flatten().map(|o| o.w).sum::<u64>() + self.observed_w
    }

    /// Potential held by every object plus what the observer absorbed.
    pub fn total_potential(&self) -> u64 {
        self.objs.iter().flatten().map(|o| o.p).sum::<u64>() + self.observed_p
    }

    /// Largest local clock seen so far.
    pub fn span(&self) -> u64 {
        self.max_t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn object_count(&self) -> usize {
        self.objs.iter().flatten().count()
    }

    /// Each channel has at most one provider and at most one client.
    pub fn check_linearity(&self) -> Result<(), String> {
        let mut providers: HashMap<Chan, usize> = HashMap::new();
        let mut clients: HashMap<Chan, usize> = HashMap::new();
        for o in self.objs.iter().flatten() {
            let (p, uses): (Chan, Vec<Chan>) = match &o.kind {
                Kind::Proc { provides, frame, .. } => {
                    (*provides, frame.chans.values().copied().filter(|c| c != provides).collect())
                }
                Kind::Fwd { provides, from } => (*provides, vec![*from]),
                Kind::Msg { dir: Dir::Pos, on, cont, payload } => {
                    let mut u = vec![];
                    if *payload != Payload::Close {
                        u.push(*cont);
                    }
                    if let Payload::Chan(d) = payload {
                        u.push(*d);
                    }
                    (*on, u)
                }
                Kind::Msg { dir: Dir::Neg, on, cont, payload } => {
                    let mut u = vec![*on];
                    if let Payload::Chan(d) = payload {
                        u.push(*d);
                    }
                    (*cont, u)
                }
            };
            *providers.entry(p).or_default() += 1;
            for c in uses {
                *clients.entry(c).or_default() += 1;
            }
        }
        for w in self.watches.iter().filter(|w| !w.done) {
            *clients.entry(w.chan).or_default() += 1;
        }
        if let Some((c, _)) = providers.iter().find(|(_, n)| **n > 1) {
            return Err(format!("channel {c} has several providers"));
        }
        if let Some((c, _)) = clients.iter().find(|(_, n)| **n > 1) {
            return Err(format!("channel {c} has several clients"));
        }
        Ok(())
    }

    fn eval(&self, e: &Exp, frame: &Frame) -> Result<u64, RuntimeError> {
        if let Some(v) = closed_value(e) {
            return Ok(v);
        }
        let v = eval_exp(e, &frame.idx).ok_or_else(|| RuntimeError::Fault(format!("cannot evaluate {}", pretty_exp(e))))?;
        u64::try_from(v).or_else(|_| fault(format!("{} is negative", pretty_exp(e))))
    }

    fn close_type(&self, t: &Type, frame: &Frame) -> Type {
        let idx: HashMap<String, Exp> =
            frame.idx.iter().map(|(k, v)| (k.clone(), Exp::Nat(u64::try_from(v).unwrap_or(0)))).collect();
        t.subst(&frame.tps, &idx)
    }

    /// Applies one rule to `id`, or reports what it waits for.
    fn step_obj(&mut self, id: ObjId) -> Result<Outcome, RuntimeError> {
        let Some(obj) = self.objs[id].as_ref() else {
            return Ok(Outcome::Blocked(None));
        };
        match &obj.kind {
            Kind::Msg { dir: Dir::Pos, .. } => Ok(Outcome::Blocked(None)),
            Kind::Msg { dir: Dir::Neg, on, .. } => Ok(Outcome::Blocked(self.provider.get(on).copied())),
            Kind::Fwd { provides, from } => {
                let (c, d) = (*provides, *from);
                self.step_fwd(id, c, d)
            }
            Kind::Proc { .. } => self.step_proc(id),
        }
    }

    fn is_pos_msg_on(&self, c: Chan) -> Option<ObjId> {
        let id = *self.provider.get(&c)?;
        match &self.objs[id].as_ref()?.kind {
            Kind::Msg { dir: Dir::Pos, on, .. } if *on == c => Some(id),
            _ => None,
        }
    }

    /// The object whose progress would let a client of `c` proceed.
    fn blocker_of(&self, c: Chan) -> Option<ObjId> {
        let id = *self.provider.get(&c)?;
        match &self.objs[id].as_ref()?.kind {
            Kind::Msg { dir: Dir::Neg, on, .. } => self.provider.get(on).copied(),
            _ => Some(id),
        }
    }

    fn step_fwd(&mut self, id: ObjId, c: Chan, d: Chan) -> Result<Outcome, RuntimeError> {
        let fwd = self.objs[id].clone().unwrap();
        if let Some(m) = self.is_pos_msg_on(d) {
            self.objs[id] = None;
            self.provider.remove(&d);
            let msg = self.objs[m].as_mut().unwrap();
            msg.w += fwd.w;
            msg.p += fwd.p;
            msg.t = msg.t.max(fwd.t);
            if let Kind::Msg { on, .. } = &mut msg.kind {
                *on = c;
            }
            self.provider.insert(c, m);
            return Ok(Outcome::Stepped(Rule::Forward));
        }
        if let Some(m) = self.neg_on.remove(&c) {
            self.objs[id] = None;
            self.provider.remove(&c);
            let msg = self.objs[m].as_mut().unwrap();
            msg.w += fwd.w;
            msg.p += fwd.p;
            msg.t = msg.t.max(fwd.t);
            if let Kind::Msg { on, .. } = &mut msg.kind {
                *on = d;
            }
            self.neg_on.insert(d, m);
            return Ok(Outcome::Stepped(Rule::Forward));
        }
        Ok(Outcome::Blocked(self.blocker_of(d)))
    }

    fn send_msg(&mut self, id: ObjId, ch: &str, payload: Payload) -> Result<Outcome, RuntimeError> {
        self.send_carrying(id, ch, payload, 0)
    }

    /// Sends a message that holds potential `p`.
    fn send_carrying(&mut self, id: ObjId, ch: &str, payload: Payload, p: u64) -> Result<Outcome, RuntimeError> {
        let c2 = self.fresh();
        let obj = self.objs[id].as_mut().unwrap();
        let t = obj.t;
        let Kind::Proc { provides, frame, .. } = &mut obj.kind else { unreachable!() };
        let c = frame.chans[ch];
        frame.chans.insert(ch.to_string(), c2);
        if c == *provides {
            *provides = c2;
            let m = self.alloc(Obj { w: 0, p, t, kind: Kind::Msg { dir: Dir::Pos, on: c, cont: c2, payload } });
            self.provider.insert(c, m);
            self.provider.insert(c2, id);
        } else {
            let m = self.alloc(Obj { w: 0, p, t, kind: Kind::Msg { dir: Dir::Neg, on: c, cont: c2, payload } });
            self.neg_on.insert(c, m);
            self.provider.insert(c2, m);
        }
        Ok(Outcome::Stepped(Rule::Send))
    }

    /// Takes the message waiting on local channel `ch`, if any.
    fn receive(&mut self, id: ObjId, ch: &str) -> Result<Result<(Payload, u64, u64), Option<ObjId>>, RuntimeError> {
        let obj = self.objs[id].as_ref().unwrap();
        let Kind::Proc { provides, frame, .. } = &obj.kind else { unreachable!() };
        let Some(&c) = frame.chans.get(ch) else {
            return fault(format!("channel {ch} is not bound"));
        };
        let provided = c == *provides;
        let m = if provided { self.neg_on.get(&c).copied() } else { self.is_pos_msg_on(c) };
        let Some(m) = m else {
            return Ok(Err(if provided { None } else { self.blocker_of(c) }));
        };
        let msg = self.objs[m].take().unwrap();
        let Kind::Msg { cont, payload, .. } = msg.kind else { unreachable!() };
        if provided {
            self.neg_on.remove(&c);
            self.provider.insert(cont, id);
        } else {
            self.provider.remove(&c);
        }
        let obj = self.objs[id].as_mut().unwrap();
        let Kind::Proc { provides, frame, .. } = &mut obj.kind else { unreachable!() };
        if provided {
            *provides = cont;
        }
        if payload == Payload::Close {
            frame.chans.remove(ch);
        } else {
            frame.chans.insert(ch.to_string(), cont);
        }
        obj.p += msg.p;
        Ok(Ok((payload, msg.w, msg.t)))
    }

    /// Takes `v` from the potential of `id`.
    fn spend(&mut self, id: ObjId, v: u64, what: &str) -> Result<(), RuntimeError> {
        let obj = self.objs[id].as_mut().unwrap();
        match obj.p.checked_sub(v) {
            Some(rest) => {
                obj.p = rest;
                Ok(())
            }
            None => fault(format!("{what} of {v} exceeds the available potential {}", obj.p)),
        }
    }

    fn absorb(&mut self, id: ObjId, w: u64, t: u64) {
        let obj = self.objs[id].as_mut().unwrap();
        obj.w += w;
        obj.t = obj.t.max(t);
        self.max_t = self.max_t.max(obj.t);
    }

    fn set_body(&mut self, id: ObjId, p: &'a Proc) {
        if let Kind::Proc { body, .. } = &mut self.objs[id].as_mut().unwrap().kind {
            *body = p;
        }
    }

    fn frame(&self, id: ObjId) -> &Frame {
        match &self.objs[id].as_ref().unwrap().kind {
            Kind::Proc { frame, .. } => frame,
            _ => unreachable!(),
        }
    }

    fn frame_mut(&mut self, id: ObjId) -> &mut Frame {
        match &mut self.objs[id].as_mut().unwrap().kind {
            Kind::Proc { frame, .. } => frame,
            _ => unreachable!(),
        }
    }

    fn step_proc(&mut self, id: ObjId) -> Result<Outcome, RuntimeError> {
        use ProcKind::*;
        let Kind::Proc { body, .. } = &self.objs[id].as_ref().unwrap().kind else { unreachable!() };
        let body: &'a Proc = body;
        macro_rules! recv {
            ($ch:expr) => {
                match self.receive(id, $ch)? {
                    Ok(r) => r,
                    Err(dep) => return Ok(Outcome::Blocked(dep)),
                }
            };
        }
        match &body.kind {
            SendLabel { ch, label, cont } => {
                let out = self.send_msg(id, ch, Payload::Label(label.clone()))?;
                self.set_body(id, cont);
                Ok(out)
            }
            SendChan { ch, arg, cont } => {
                let Some(d) = self.frame_mut(id).chans.remove(arg) else {
                    return fault(format!("channel {arg} is not bound"));
                };
                let out = self.send_msg(id, ch, Payload::Chan(d))?;
                self.set_body(id, cont);
                Ok(out)
            }
            SendType { ch, tp, cont } => {
                let tp = self.close_type(tp, self.frame(id));
                let out = self.send_msg(id, ch, Payload::Type(tp))?;
                self.set_body(id, cont);
                Ok(out)
            }
            SendIdx { ch, e, cont } => {
                let v = self.eval(e, self.frame(id))?;
                let out = self.send_msg(id, ch, Payload::Idx(v))?;
                self.set_body(id, cont);
                Ok(out)
            }
            Assert { ch, phi, cont } => {
                let frame = self.frame(id);
                if eval_prop(phi, &frame.idx) != Some(true) {
                    return fault(format!("asserted constraint {} is false", pretty_prop(phi)));
                }
                let phi = phi.subst(&frame.idx.iter().map(|(k, v)| (k.clone(), Exp::Nat(u64::try_from(v).unwrap_or(0)))).collect());
                let out = self.send_msg(id, ch, Payload::Assert(phi))?;
                self.set_body(id, cont);
                Ok(out)
            }
            Pay { ch, r, cont } => {
                let v = self.eval(r, self.frame(id))?;
                self.spend(id, v, "pay")?;
                let out = self.send_carrying(id, ch, Payload::Pay(v), v)?;
                self.set_body(id, cont);
                Ok(out)
            }
            Now { ch, cont } => {
                let out = self.send_msg(id, ch, Payload::Now)?;
                self.set_body(id, cont);
                Ok(out)
            }
            Close { ch } => {
                let obj = self.objs[id].take().unwrap();
                let Kind::Proc { provides, frame, .. } = obj.kind else { unreachable!() };
                let c = frame.chans[ch];
                if c != provides {
                    return fault(format!("close on {ch}, which is not provided"));
                }
                let m = self.alloc(Obj { w: obj.w, p: obj.p, t: obj.t, kind: Kind::Msg { dir: Dir::Pos, on: c, cont: c, payload: Payload::Close } });
                self.provider.insert(c, m);
                Ok(Outcome::Stepped(Rule::Send))
            }
            Case { ch, branches } => {
                let (p, w, t) = recv!(ch);
                let Payload::Label(k) = p else { return fault(format!("case on {ch} received {p:?}")) };
                let Some(b) = branches.iter().find(|b| b.label == k) else {
                    return fault(format!("no branch for label {k} in case on {ch}"));
                };
                self.absorb(id, w, t);
                self.set_body(id, &b.body);
                Ok(Outcome::Stepped(Rule::Receive))
            }
            RecvChan { ch, var, cont } => {
                let (p, w, t) = recv!(ch);
                let Payload::Chan(d) = p else { return fault(format!("expected a channel on {ch}, got {p:?}")) };
                self.frame_mut(id).chans.insert(var.clone(), d);
                self.absorb(id, w, t);
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Receive))
            }
            Wait { ch, cont } => {
                let (p, w, t) = recv!(ch);
                if p != Payload::Close {
                    return fault(format!("wait on {ch} received {p:?}"));
                }
                self.absorb(id, w, t);
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Receive))
            }
            RecvType { ch, var, cont } => {
                let (p, w, t) = recv!(ch);
                let Payload::Type(tp) = p else { return fault(format!("expected a type on {ch}, got {p:?}")) };
                self.frame_mut(id).tps.insert(var.clone(), tp);
                self.absorb(id, w, t);
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Receive))
            }
            RecvIdx { ch, var, cont } => {
                let (p, w, t) = recv!(ch);
                let Payload::Idx(v) = p else { return fault(format!("expected an index on {ch}, got {p:?}")) };
                self.frame_mut(id).idx.insert(var.clone(), v.into());
                self.absorb(id, w, t);
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Receive))
            }
            Assume { ch, cont, .. } => {
                let (p, w, t) = recv!(ch);
                if !matches!(p, Payload::Assert(_)) {
                    return fault(format!("assume on {ch} received {p:?}"));
                }
                self.absorb(id, w, t);
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Receive))
            }
            Get { ch, r, cont } => {
                let want = self.eval(r, self.frame(id))?;
                let (p, w, t) = recv!(ch);
                if p != Payload::Pay(want) {
                    return fault(format!("get {{{want}}} on {ch} received {p:?}"));
                }
                self.absorb(id, w, t);
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Receive))
            }
            When { ch, cont } => {
                let s = self.objs[id].as_ref().unwrap().t;
                let (p, w, t) = recv!(ch);
                if p != Payload::Now {
                    return fault(format!("when on {ch} received {p:?}"));
                }
                if s > t {
                    return fault(format!("when on {ch} at time {s} received a message sent at time {t}"));
                }
                self.absorb(id, w, t);
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Receive))
            }
            Work { r, cont } => {
                let v = self.eval(r, self.frame(id))?;
                self.spend(id, v, "work")?;
                self.objs[id].as_mut().unwrap().w += v;
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Work))
            }
            Delay { t, cont } => {
                let v = self.eval(t, self.frame(id))?;
                self.absorb(id, 0, 0);
                let obj = self.objs[id].as_mut().unwrap();
                obj.t += v;
                self.max_t = self.max_t.max(obj.t);
                self.set_body(id, cont);
                Ok(Outcome::Stepped(Rule::Delay))
            }
            Fwd { x, y } => {
                let frame = self.frame(id);
                let (c, d) = (frame.chans[x], frame.chans[y]);
                let obj = self.objs[id].as_mut().unwrap();
                obj.kind = Kind::Fwd { provides: c, from: d };
                Ok(Outcome::Stepped(Rule::Forward))
            }
            Spawn { x, f, tps, idx, args, cont } => self.spawn(id, x, f, tps, idx, args, cont.as_deref()),
            Impossible => fault("reached an impossible branch"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn spawn(
        &mut self,
        id: ObjId,
        x: &str,
        f: &str,
        tps: &[Type],
        idx: &[Exp],
        args: &[String],
        cont: Option<&'a Proc>,
    ) -> Result<Outcome, RuntimeError> {
        let sig = self.sig;
        let Some(def) = sig.defs.get(f) else { return fault(format!("process {f} is not defined")) };
        let frame = self.frame(id);
        let mut new = Frame { chans: HashMap::new(), idx: Model::new(), tps: HashMap::new() };
        for (v, t) in def.tparams.iter().zip(tps) {
            new.tps.insert(v.clone(), self.close_type(t, frame));
        }
        for (v, e) in def.iparams.iter().zip(idx) {
            new.idx.insert(v.clone(), self.eval(e, frame)?.into());
        }
        let mut moved = Vec::new();
        for (p, a) in def.args.iter().zip(args) {
            let Some(&c) = frame.chans.get(a) else { return fault(format!("channel {a} is not bound")) };
            new.chans.insert(p.clone(), c);
            moved.push(a.clone());
        }
        match cont {
            Some(q) => {
                let pot = match sig.procs.get(f) {
                    Some(d) => self.eval(&d.pot, &new)?,
                    None => 0,
                };
                self.spend(id, pot, "spawn")?;
                let c = self.fresh();
                new.chans.insert(def.offered.clone(), c);
                let t = self.objs[id].as_ref().unwrap().t;
                let child = self.alloc(Obj { w: 0, p: pot, t, kind: Kind::Proc { provides: c, body: &def.body, frame: new } });
                self.provider.insert(c, child);
                let fr = self.frame_mut(id);
                for a in moved {
                    fr.chans.remove(&a);
                }
                fr.chans.insert(x.to_string(), c);
                self.set_body(id, q);
            }
            None => {
                let obj = self.objs[id].as_mut().unwrap();
                let Kind::Proc { provides, body, frame } = &mut obj.kind else { unreachable!() };
                new.chans.insert(def.offered.clone(), *provides);
                *frame = new;
                *body = &def.body;
            }
        }
        Ok(Outcome::Stepped(Rule::Spawn))
    }

    /// The external observer consumes one message if it can.
    fn observe(&mut self) -> Result<Outcome, RuntimeError> {
        let mut dep = None;
        for i in 0..self.watches.len() {
            if self.watches[i].done {
                continue;
            }
            let c = self.watches[i].chan;
            let Some(m) = self.is_pos_msg_on(c) else {
                if dep.is_none() {
                    dep = self.blocker_of(c);
                }
                continue;
            };
            let msg = self.objs[m].take().unwrap();
            self.provider.remove(&c);
            self.observed_w += msg.w;
            self.observed_p += msg.p;
            self.max_t = self.max_t.max(msg.t);
            let Kind::Msg { cont, payload, .. } = msg.kind else { unreachable!() };
            let node = self.watches[i].node;
            let slot = match payload {
                Payload::Label(k) => Slot::Item(Item::Label(k)),
                Payload::Close => {
                    self.watches[i].done = true;
                    Slot::Item(Item::Close)
                }
                Payload::Chan(d) => {
                    self.nodes.push(Vec::new());
                    let n = self.nodes.len() - 1;
                    self.watches.push(Watch { chan: d, node: n, done: false });
                    Slot::Sub(n)
                }
                Payload::Type(t) => Slot::Item(Item::Type(pretty_type(&t))),
                Payload::Idx(v) => Slot::Item(Item::Idx(v)),
                Payload::Assert(p) => Slot::Item(Item::Assert(pretty_prop(&fold_prop(&p)))),
                Payload::Pay(r) => Slot::Item(Item::Pay(r)),
                Payload::Now => Slot::Item(Item::Now),
            };
            self.nodes[node].push(slot);
            self.watches[i].chan = cont;
            return Ok(Outcome::Stepped(Rule::Observe));
        }
        Ok(Outcome::Blocked(dep))
    }

    const OBSERVER: ObjId = usize::MAX;

    fn step_any(&mut self, id: ObjId) -> Result<Outcome, RuntimeError> {
        if id == Self::OBSERVER {
            self.observe()
        } else {
            self.step_obj(id)
        }
    }

    fn tick(&mut self, fuel: u64, rule: Rule) -> Result<(), RuntimeError> {
        if rule != Rule::Observe {
            self.steps += 1;
            if self.steps > fuel {
                return Err(RuntimeError::StepLimitExceeded(fuel));
            }
        }
        Ok(())
    }

    /// Runs until no rule applies.
    pub fn run(&mut self, policy: Policy<'_>, fuel: u64) -> Result<(), RuntimeError> {
        match policy {
            Policy::Sequential => {
                self.run_focus(fuel)?;
                self.run_sweep(fuel)
            }
            Policy::Random(choose) => loop {
                match self.step_random(&mut *choose)? {
                    Some(rule) => self.tick(fuel, rule)?,
                    None => return Ok(()),
                }
            },
        }
    }

    /// One step by a randomly chosen enabled object; None when stuck.
    pub fn step_random(&mut self, choose: &mut dyn FnMut(usize) -> usize) -> Result<Option<Rule>, RuntimeError> {
        let mut cands = self.live();
        cands.push(Self::OBSERVER);
        while !cands.is_empty() {
            let i = choose(cands.len()) % cands.len();
            let id = cands.swap_remove(i);
            if let Outcome::Stepped(rule) = self.step_any(id)? {
                return Ok(Some(rule));
            }
        }
        Ok(None)
    }

    fn run_focus(&mut self, fuel: u64) -> Result<(), RuntimeError> {
        let mut stack = vec![Self::OBSERVER];
        let mut stuck: Vec<ObjId> = Vec::new();
        while let Some(&top) = stack.last() {
            match self.step_any(top)? {
                Outcome::Stepped(rule) => {
                    self.tick(fuel, rule)?;
                    stuck.clear();
                    if top != Self::OBSERVER && self.objs[top].is_none() {
                        stack.pop();
                    }
                }
                Outcome::Blocked(Some(dep)) if !stack.contains(&dep) && !stuck.contains(&dep) => stack.push(dep),
                Outcome::Blocked(_) => {
                    stuck.push(top);
                    stack.pop();
                    if stack.is_empty() && top != Self::OBSERVER {
                        stack.push(Self::OBSERVER);
                    }
                }
            }
        }
        Ok(())
    }

    fn run_sweep(&mut self, fuel: u64) -> Result<(), RuntimeError> {
        loop {
            let mut progress = false;
            for id in self.live().into_iter().chain([Self::OBSERVER]) {
                while let Outcome::Stepped(rule) = self.step_any(id)? {
                    self.tick(fuel, rule)?;
                    progress = true;
                    if id != Self::OBSERVER && self.objs[id].is_none() {
                        break;
                    }
                }
            }
            if !progress {
                return Ok(());
            }
        }
    }

    /// The observation so far; channels still open end in a dash.
    pub fn observation(&self) -> Observation {
        let mut open = vec![false; self.nodes.len()];
        for w in &self.watches {
            if !w.done {
                open[w.node] = true;
            }
        }
        Observation { items: self.build(0, &open), work: self.total_work(), span: self.max_t, steps: self.steps }
    }

    fn build(&self, n: usize, open: &[bool]) -> Vec<Item> {
        let mut out: Vec<Item> = self.nodes[n]
            .iter()
            .map(|s| match s {
                Slot::Item(i) => i.clone(),
                Slot::Sub(k) => Item::Chan(self.build(*k, open)),
            })
            .collect();
        if open[n] {
            out.push(Item::Blocked);
        }
        out
    }
}

/// Replaces closed arithmetic subterms by their values.
fn fold_prop(p: &Prop) -> Prop {
    let fold = |e: &Exp| match eval_exp(e, &Model::new()).and_then(|v| u64::try_from(v).ok()) {
        Some(n) => Exp::Nat(n),
        None => e.clone(),
    };
    match p {
        Prop::Eq(a, b) => Prop::Eq(fold(a), fold(b)),
        Prop::Gt(a, b) => Prop::Gt(fold(a), fold(b)),
        Prop::And(a, b) => Prop::And(Box::new(fold_prop(a)), Box::new(fold_prop(b))),
        Prop::Or(a, b) => Prop::Or(Box::new(fold_prop(a)), Box::new(fold_prop(b))),
        Prop::Not(a) => Prop::Not(Box::new(fold_prop(a))),
        other => other.clone(),
    }
}

fn closed_value(e: &Exp) -> Option<u64> {
    match e {
        Exp::Nat(n) => Some(*n),
        _ => None,
    }
}

/// Runs `exec` under the sequential policy.
pub fn run(sig: &Signature, exec: &str, fuel: u64) -> Result<Observation, RuntimeError> {
    let mut m = Machine::new(sig, exec)?;
    m.run(Policy::Sequential, fuel)?;
    Ok(m.observation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_source;

    fn go(src: &str, exec: &str) -> Observation {
        let sig = parse_source(src).unwrap();
        run(&sig, exec, DEFAULT_FUEL).unwrap()
    }

    #[test]
    fn close_only() {
        let o = go("decl main : . |- (x : 1)\nproc x <- main = close x\n", "main");
        assert_eq!(o.items, vec![Item::Close]);
        assert_eq!((o.work, o.span), (0, 0));
    }

    #[test]
    fn work_and_delay() {
        let o = go("decl main : . |{3}- (x : 1)\nproc x <- main = work {3} ; delay {2} ; close x\n", "main");
        assert_eq!((o.work, o.span), (3, 2));
        assert_eq!(o.steps, 3);
    }

    #[test]
    fn wait_absorbs_and_forward_relays() {
        let src = "decl w : . |{2}- (x : 1)\nproc x <- w = work {2} ; close x\n\
                   decl f : (y : +{a : 1}) |- (x : +{a : 1})\nproc x <- f y = x <-> y\n\
                   decl p : . |- (x : +{a : 1})\nproc x <- p = x.a ; close x\n\
                   decl main : . |{2}- (x : +{a : 1})\nproc x <- main = u <- w ; wait u ; y <- p ; x <- f y\n";
        let o = go(src, "main");
        assert_eq!(o.labels(), ["a", "close"]);
        assert_eq!(o.work, 2);
    }

    #[test]
    fn work_beyond_potential_faults() {
        let sig = parse_source("decl main : . |{1}- (x : 1)\nproc x <- main = work {2} ; close x\n").unwrap();
        assert!(matches!(run(&sig, "main", DEFAULT_FUEL), Err(RuntimeError::Fault(_))));
    }

    #[test]
    fn blocked_shows_dash() {
        let o = go("decl main : . |- (x : &{a : 1})\nproc x <- main = case x (a => close x)\n", "main");
        assert_eq!(o.items, vec![Item::Blocked]);
    }

    #[test]
    fn nested_channels() {
        let src = "decl u : . |- (x : 1)\nproc x <- u = close x\n\
                   decl main : . |- (x : 1 * 1)\nproc x <- main = y <- u ; send x y ; close x\n";
        let o = go(src, "main");
        assert_eq!(o.items, vec![Item::Chan(vec![Item::Close]), Item::Close]);
        assert_eq!(o.items[0].to_string(), "(close)");
    }
}

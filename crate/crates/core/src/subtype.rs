//! Coinductive subtyping by incremental construction of a type simulation.
//!
//! Goals between two named types are cached. A later goal between the same
//! pair of names is closed when a cached goal matches it: type arguments by
//! one-sided matching (cached variables may be instantiated), index
//! arguments by entailment under the goal's constraints.

use std::collections::{BTreeSet, HashMap};

use crate::arith::{Solver, Verdict};
use crate::ast::*;
use crate::diag::Diagnostic;
use crate::elaborate::{Env, Variance};

pub const DEFAULT_BOUND: usize = 8;

/// Structural only (constraints, potentials, delays and index arguments
/// ignored), or the full relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Approx,
    Strict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubError {
    Mismatch(String),
    BoundExceeded(String, String),
}

impl SubError {
    pub fn message(&self) -> String {
        match self {
            SubError::Mismatch(m) => m.clone(),
            SubError::BoundExceeded(v, w) => format!(
                "subtyping gave up on {v} <= {w} after too many distinct instances; consider an eqtype assertion"
            ),
        }
    }
}

type R = Result<(), SubError>;

#[derive(Clone, Debug)]
struct Goal {
    cons: Vec<Prop>,
    left: Type,
    right: Type,
}

/// Index variables and constraints in scope for one goal.
#[derive(Clone, Debug)]
struct St {
    vars: Vec<String>,
    cons: Vec<Prop>,
}

pub struct Subtyper<'a> {
    pub env: &'a Env,
    pub solver: &'a Solver,
    pub bound: usize,
    pub mode: Mode,
    seeds: Vec<Goal>,
    cache: Vec<Goal>,
    counts: HashMap<(String, String), usize>,
}

impl<'a> Subtyper<'a> {
    pub fn new(env: &'a Env, solver: &'a Solver, mode: Mode) -> Subtyper<'a> {
        Subtyper { env, solver, bound: DEFAULT_BOUND, mode, seeds: Vec::new(), cache: Vec::new(), counts: HashMap::new() }
    }

    pub fn with_bound(mut self, bound: usize) -> Self {
        self.bound = bound;
        self
    }

    /// Adds an assumed inequality, abstracted over its free index variables.
    pub fn assume(&mut self, left: &Type, right: &Type) {
        self.seeds.push(Goal { cons: vec![], left: left.clone(), right: right.clone() });
    }

    /// Is `a <= b` for all values of `vars` satisfying `cons`?
    pub fn subtype(&mut self, vars: &[String], cons: &[Prop], a: &Type, b: &Type) -> R {
        self.cache.clear();
        self.counts.clear();
        let st = St { vars: vars.to_vec(), cons: cons.to_vec() };
        self.sub(&st, a, b)
    }

    fn show(&self, t: &Type) -> String {
        self.env.show(t)
    }

    fn mismatch(&self, a: &Type, b: &Type) -> SubError {
        SubError::Mismatch(format!("{} is not a subtype of {}", self.show(a), self.show(b)))
    }

    fn entails(&self, st: &St, phi: &Prop) -> bool {
        // Trusted verdicts count, as everywhere else in checking.
        self.solver.entails(&st.vars, &st.cons, phi).holds()
    }

    fn exp_equal(&self, st: &St, e: &Exp, f: &Exp) -> bool {
        e == f || self.entails(st, &Prop::eq(e.clone(), f.clone()))
    }

    /// Reflexivity up to entailment-equality of index expressions.
    fn equal(&self, st: &St, a: &Type, b: &Type) -> bool {
        let approx = self.mode == Mode::Approx;
        match (a, b) {
            (Type::Name(v, ts, es), Type::Name(w, us, fs)) => {
                v == w
                    && ts.len() == us.len()
                    && ts.iter().zip(us).all(|(t, u)| self.equal(st, t, u))
                    && (approx || es.iter().zip(fs).all(|(e, f)| self.exp_equal(st, e, f)))
            }
            (Type::Var(x), Type::Var(y)) => x == y,
            (Type::One, Type::One) => true,
            (Type::Plus(xs), Type::Plus(ys)) | (Type::With(xs), Type::With(ys)) => {
                xs.len() == ys.len() && xs.iter().zip(ys).all(|((l, t), (k, u))| l == k && self.equal(st, t, u))
            }
            (Type::Tensor(a1, a2), Type::Tensor(b1, b2)) | (Type::Lolli(a1, a2), Type::Lolli(b1, b2)) => {
                self.equal(st, a1, b1) && self.equal(st, a2, b2)
            }
            _ => a == b,
        }
    }

    fn sub(&mut self, st: &St, a: &Type, b: &Type) -> R {
        if self.equal(st, a, b) {
            return Ok(());
        }
        match (a, b) {
            (Type::Name(v, ..), Type::Name(w, ..)) => {
                if self.cached(st, a, b) {
                    return Ok(());
                }
                let key = (v.clone(), w.clone());
                let n = self.counts.entry(key).or_insert(0);
                if *n >= self.bound {
                    return Err(SubError::BoundExceeded(self.env.show(a), self.env.show(b)));
                }
                *n += 1;
                self.cache.push(Goal { cons: st.cons.clone(), left: a.clone(), right: b.clone() });
                let a1 = self.unfold(a)?;
                let b1 = self.unfold(b)?;
                self.structural(st, &a1, &b1)
            }
            (Type::Name(..), _) => {
                let a1 = self.unfold(a)?;
                self.structural(st, &a1, b)
            }
            (_, Type::Name(..)) => {
                let b1 = self.unfold(b)?;
                self.structural(st, a, &b1)
            }
            _ => self.structural(st, a, b),
        }
    }

    fn unfold(&self, t: &Type) -> Result<Type, SubError> {
        self.env.unfold(t).map_err(|e| SubError::Mismatch(e.to_string()))
    }

    /// Strips constructors invisible in approximate mode.
    fn strip(&self, t: &Type) -> Type {
        let mut t = t.clone();
        loop {
            t = match t {
                Type::Assert(_, b) | Type::Assume(_, b) | Type::Pay(_, b) | Type::Get(_, b) | Type::Next(_, b) => *b,
                other => return other,
            }
        }
    }

    /// Total `()` prefix, looking through names whose body starts with one.
    fn next_prefix(&self, t: &Type) -> Result<(Exp, Type), SubError> {
        let mut total = Exp::Nat(0);
        let mut t = t.clone();
        for _ in 0..64 {
            match t {
                Type::Next(e, b) => {
                    total = total.plus(&e);
                    t = *b;
                }
                Type::Name(..) => {
                    let h = self.env.head(&t).map_err(|e| SubError::Mismatch(e.to_string()))?;
                    if matches!(h, Type::Next(..)) {
                        t = h;
                    } else {
                        return Ok((total, t));
                    }
                }
                other => return Ok((total, other)),
            }
        }
        Ok((total, t))
    }

    fn with_cons(&self, st: &St, phi: &Prop) -> St {
        let mut s = st.clone();
        s.cons.push(phi.clone());
        s
    }

    /// Pairs each label of `small` with its branch in `big`, failing before
    /// any recursion if one is missing.
    fn match_labels<'t>(
        &self,
        small: &'t [(String, Type)],
        big: &'t [(String, Type)],
        small_t: &Type,
        big_t: &Type,
    ) -> Result<Vec<(&'t Type, &'t Type)>, SubError> {
        small
            .iter()
            .map(|(l, t)| match big.iter().find(|(k, _)| k == l) {
                Some((_, u)) => Ok((t, u)),
                None => Err(SubError::Mismatch(format!(
                    "label {l} of {} is missing in {}",
                    self.show(small_t),
                    self.show(big_t)
                ))),
            })
            .collect()
    }

    fn structural(&mut self, st: &St, a: &Type, b: &Type) -> R {
        let (a, b) = if self.mode == Mode::Approx {
            let (a, b) = (self.strip(a), self.strip(b));
            if matches!(a, Type::Name(..)) || matches!(b, Type::Name(..)) {
                return self.sub(st, &a, &b);
            }
            (a, b)
        } else {
            (a.clone(), b.clone())
        };
        if self.mode == Mode::Strict && (matches!(a, Type::Next(..)) || matches!(b, Type::Next(..))) {
            let (ea, ra) = self.next_prefix(&a)?;
            let (eb, rb) = self.next_prefix(&b)?;
            if !self.exp_equal(st, &ea, &eb) {
                return Err(self.mismatch(&a, &b));
            }
            if matches!(ra, Type::Next(..)) || matches!(rb, Type::Next(..)) {
                return Err(self.mismatch(&a, &b));
            }
            return self.sub(st, &ra, &rb);
        }
        match (&a, &b) {
            (Type::Plus(xs), Type::Plus(ys)) => {
                let pairs = self.match_labels(xs, ys, &a, &b)?;
                pairs.into_iter().try_for_each(|(t, u)| self.sub(st, t, u))
            }
            (Type::With(xs), Type::With(ys)) => {
                let pairs = self.match_labels(ys, xs, &b, &a)?;
                pairs.into_iter().try_for_each(|(u, t)| self.sub(st, t, u))
            }
            (Type::Tensor(a1, a2), Type::Tensor(b1, b2)) => {
                self.sub(st, a1, b1)?;
                self.sub(st, a2, b2)
            }
            (Type::Lolli(a1, a2), Type::Lolli(b1, b2)) => {
                self.sub(st, b1, a1)?;
                self.sub(st, a2, b2)
            }
            (Type::One, Type::One) => Ok(()),
            (Type::Var(x), Type::Var(y)) if x == y => Ok(()),
            (Type::ExistsTp(x, a1), Type::ExistsTp(y, b1)) | (Type::ForallTp(x, a1), Type::ForallTp(y, b1)) => {
                let z = fresh_name(x);
                let sa = HashMap::from([(x.clone(), Type::Var(z.clone()))]);
                let sb = HashMap::from([(y.clone(), Type::Var(z))]);
                let none = HashMap::new();
                self.sub(st, &a1.subst(&sa, &none), &b1.subst(&sb, &none))
            }
            (Type::ExistsIx(x, a1), Type::ExistsIx(y, b1)) | (Type::ForallIx(x, a1), Type::ForallIx(y, b1)) => {
                let z = fresh_name(x);
                let none = HashMap::new();
                let sa = HashMap::from([(x.clone(), Exp::Var(z.clone()))]);
                let sb = HashMap::from([(y.clone(), Exp::Var(z.clone()))]);
                let mut st2 = st.clone();
                st2.vars.push(z);
                self.sub(&st2, &a1.subst(&none, &sa), &b1.subst(&none, &sb))
            }
            (Type::Assert(phi, a1), Type::Assert(psi, b1)) => {
                let st2 = self.with_cons(st, phi);
                if self.solver.is_unsat(&st2.vars, &st2.cons) {
                    return Ok(());
                }
                if !self.entails(&st2, psi) {
                    return Err(self.mismatch(&a, &b));
                }
                self.sub(&st2, a1, b1)
            }
            (Type::Assume(phi, a1), Type::Assume(psi, b1)) => {
                let st2 = self.with_cons(st, psi);
                if self.solver.is_unsat(&st2.vars, &st2.cons) {
                    return Ok(());
                }
                if !self.entails(&st2, phi) {
                    return Err(self.mismatch(&a, &b));
                }
                self.sub(&st2, a1, b1)
            }
            (Type::Pay(r, a1), Type::Pay(s, b1)) | (Type::Get(r, a1), Type::Get(s, b1)) => {
                if !self.exp_equal(st, r, s) {
                    return Err(self.mismatch(&a, &b));
                }
                self.sub(st, a1, b1)
            }
            (Type::Box(a1), Type::Box(b1)) | (Type::Dia(a1), Type::Dia(b1)) => self.sub(st, a1, b1),
            _ => Err(self.mismatch(&a, &b)),
        }
    }

    /// Does a cached or assumed goal cover `a <= b` under `st`?
    fn cached(&self, st: &St, a: &Type, b: &Type) -> bool {
        let (Type::Name(v, ts, es), Type::Name(w, us, fs)) = (a, b) else { return false };
        for g in self.cache.iter().chain(&self.seeds) {
            let (Type::Name(gv, gts, ges), Type::Name(gw, gus, gfs)) = (&g.left, &g.right) else { continue };
            if gv != v || gw != w {
                continue;
            }
            let mut theta = HashMap::new();
            if !self.match_args(v, gts, ts, &mut theta) || !self.match_args(w, gus, us, &mut theta) {
                continue;
            }
            if self.mode == Mode::Approx {
                return true;
            }
            if ges == es && gfs == fs && g.cons.iter().all(|c| st.cons.contains(c)) {
                return true;
            }
            if self.index_match(st, g, es, fs) {
                return true;
            }
        }
        false
    }

    fn match_args(&self, name: &str, pats: &[Type], ts: &[Type], theta: &mut HashMap<String, Type>) -> bool {
        pats.len() == ts.len()
            && pats.iter().zip(ts).enumerate().all(|(i, (p, t))| {
                self.env.variance.get(name, i) == Variance::Non || match_type(p, t, theta)
            })
    }

    /// `C_goal |= exists V_cached. C_cached /\ args equal`.
    fn index_match(&self, st: &St, g: &Goal, es: &[Exp], fs: &[Exp]) -> bool {
        let (Type::Name(_, _, ges), Type::Name(_, _, gfs)) = (&g.left, &g.right) else { return false };
        let mut used = BTreeSet::new();
        for e in ges.iter().chain(gfs) {
            e.free_vars(&mut used);
        }
        for c in &g.cons {
            c.free_vars(&mut used);
        }
        let ren: HashMap<String, Exp> = used.iter().map(|v| (v.clone(), Exp::Var(fresh_name(v)))).collect();
        let mut parts: Vec<Prop> = g.cons.iter().map(|c| c.subst(&ren)).collect();
        for (ge, e) in ges.iter().zip(es).chain(gfs.iter().zip(fs)) {
            parts.push(Prop::eq(ge.subst(&ren), e.clone()));
        }
        let mut phi = Prop::conj(&parts);
        for v in used.iter().rev() {
            let Exp::Var(z) = &ren[v] else { unreachable!() };
            phi = Prop::Exists(z.clone(), Box::new(phi));
        }
        self.solver.entails(&st.vars, &st.cons, &phi) == Verdict::Valid
    }
}

/// One-sided matching: variables of `pat` may be bound, `t` is fixed.
fn match_type(pat: &Type, t: &Type, theta: &mut HashMap<String, Type>) -> bool {
    match (pat, t) {
        (Type::Var(x), _) => match theta.get(x) {
            Some(bound) => bound == t,
            None => {
                theta.insert(x.clone(), t.clone());
                true
            }
        },
        (Type::Name(v, ps, pe), Type::Name(w, ts, te)) => {
            v == w && pe == te && ps.len() == ts.len() && ps.iter().zip(ts).all(|(p, t)| match_type(p, t, theta))
        }
        _ => {
            let (pc, tc) = (pat.children(), t.children());
            std::mem::discriminant(pat) == std::mem::discriminant(t)
                && pc.len() == tc.len()
                && same_shell(pat, t)
                && pc.iter().zip(tc).all(|(p, t)| match_type(p, t, theta))
        }
    }
}

/// Equal apart from immediate subterms.
fn same_shell(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Plus(xs), Type::Plus(ys)) | (Type::With(xs), Type::With(ys)) => {
            xs.iter().map(|(l, _)| l).eq(ys.iter().map(|(l, _)| l))
        }
        (Type::Assert(p, _), Type::Assert(q, _)) | (Type::Assume(p, _), Type::Assume(q, _)) => p == q,
        (Type::Pay(e, _), Type::Pay(f, _)) | (Type::Get(e, _), Type::Get(f, _)) | (Type::Next(e, _), Type::Next(f, _)) => {
            e == f
        }
        (Type::ExistsTp(x, _), Type::ExistsTp(y, _))
        | (Type::ForallTp(x, _), Type::ForallTp(y, _))
        | (Type::ExistsIx(x, _), Type::ExistsIx(y, _))
        | (Type::ForallIx(x, _), Type::ForallIx(y, _)) => x == y,
        _ => true,
    }
}

/// Checks every eqtype assertion assuming all the others.
pub fn check_eqtype_decls(env: &Env, solver: &Solver, bound: usize) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let eqs = &env.sig.eqtypes;
    for (i, e) in eqs.iter().enumerate() {
        let mut s = Subtyper::new(env, solver, Mode::Strict).with_bound(bound);
        for (j, o) in eqs.iter().enumerate() {
            if i != j {
                s.assume(&o.left, &o.right);
                if o.kind == EqKind::Equal {
                    s.assume(&o.right, &o.left);
                }
            }
        }
        let mut fv = BTreeSet::new();
        e.left.free_idx_vars(&mut fv);
        e.right.free_idx_vars(&mut fv);
        let vars: Vec<String> = fv.into_iter().collect();
        let mut res = s.subtype(&vars, &[], &e.left, &e.right);
        if res.is_ok() && e.kind == EqKind::Equal {
            res = s.subtype(&vars, &[], &e.right, &e.left);
        }
        if let Err(err) = res {
            diags.push(Diagnostic::error(e.span, format!("eqtype assertion does not hold: {}", err.message())));
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_prop_str, parse_source, parse_type_str};

    const LINLAM: &str = "
type exp = +{ lam : exp -o exp, app : exp * exp }
type val = +{ lam : exp -o exp }
";

    fn env(src: &str) -> Env {
        Env::new(parse_source(src).unwrap())
    }

    fn holds(e: &Env, vars: &[&str], cons: &str, a: &str, b: &str) -> bool {
        let solver = Solver::new();
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let cons = vec![parse_prop_str(cons).unwrap()];
        let mut s = Subtyper::new(e, &solver, Mode::Strict);
        s.subtype(&vars, &cons, &parse_type_str(a, &[]).unwrap(), &parse_type_str(b, &[]).unwrap()).is_ok()
    }

    #[test]
    fn val_below_exp() {
        let e = env(LINLAM);
        assert!(holds(&e, &[], "true", "val", "exp"));
        assert!(!holds(&e, &[], "true", "exp", "val"));
        assert!(holds(&e, &[], "true", "exp", "exp"));
    }

    #[test]
    fn external_choice_width() {
        let e = env("");
        assert!(holds(&e, &[], "true", "&{a : 1, b : 1}", "&{a : 1}"));
        assert!(!holds(&e, &[], "true", "&{a : 1}", "&{a : 1, b : 1}"));
    }

    #[test]
    fn constraint_entailment() {
        let e = env("");
        assert!(holds(&e, &["n"], "true", "?{n > 0}. 1", "?{n >= 0}. 1"));
        assert!(!holds(&e, &["n"], "true", "?{n >= 0}. 1", "?{n > 0}. 1"));
        assert!(holds(&e, &["n"], "true", "!{n >= 0}. 1", "!{n > 0}. 1"));
    }

    #[test]
    fn indexed_recursion() {
        let src = "type bin{n} = +{ e : ?{n = 0}. 1, b0 : ?{n > 0}. ?k. ?{n = 2*k}. bin{k}, b1 : ?k. ?{n = 2*k+1}. bin{k} }
type pos{n} = +{ b0 : ?{n > 0}. ?k. ?{n = 2*k}. bin{k}, b1 : ?k. ?{n = 2*k+1}. bin{k} }";
        let e = env(src);
        assert!(holds(&e, &["n"], "true", "bin{n}", "bin{n}"));
        assert!(holds(&e, &["n"], "true", "pos{n}", "bin{n}"));
        assert!(!holds(&e, &["n"], "true", "bin{n}", "pos{n}"));
        assert!(holds(&e, &["n", "m"], "n = m", "bin{n}", "bin{m}"));
        assert!(!holds(&e, &["n", "m"], "true", "bin{n}", "bin{m}"));
    }

    #[test]
    fn next_exponents_are_summed() {
        let e = env("");
        assert!(holds(&e, &[], "true", "()()1", "({2}) 1"));
        assert!(holds(&e, &["n"], "true", "({n+1}) 1", "({1+n}) 1"));
        assert!(!holds(&e, &[], "true", "()1", "({2}) 1"));
        assert!(holds(&e, &[], "true", "({0}) 1", "1"));
    }

    #[test]
    fn approx_ignores_refinements() {
        let e = env("type t{n} = +{a : ?{n > 0}. |{n}> t{n+1}}");
        let solver = Solver::new();
        let mut s = Subtyper::new(&e, &solver, Mode::Approx);
        let a = parse_type_str("t{1}", &[]).unwrap();
        let b = parse_type_str("t{5}", &[]).unwrap();
        assert!(s.subtype(&[], &[], &a, &b).is_ok());
        let mut s = Subtyper::new(&e, &solver, Mode::Strict);
        assert!(s.subtype(&[], &[], &a, &b).is_err());
    }

    #[test]
    fn eqtype_seeding() {
        let src = "type a{n} = +{x : a{n+1}}\ntype b{n} = +{x : b{n+2}}\neqtype a{n} <= b{m}\n";
        let e = env(src);
        let solver = Solver::new();
        assert!(check_eqtype_decls(&e, &solver, DEFAULT_BOUND).is_empty());
        let mut s = Subtyper::new(&e, &solver, Mode::Strict);
        let ta = parse_type_str("a{3}", &[]).unwrap();
        let tb = parse_type_str("b{3}", &[]).unwrap();
        assert!(s.subtype(&[], &[], &ta, &tb).is_err());
        let eq = &e.sig.eqtypes[0];
        s.assume(&eq.left, &eq.right);
        let ta = parse_type_str("a{3}", &[]).unwrap();
        let tb = parse_type_str("b{3}", &[]).unwrap();
        assert!(s.subtype(&[], &[], &ta, &tb).is_ok());
    }

    #[test]
    fn bound_is_reported() {
        // a{n} <= b{2n} generates ever-new instances.
        let src = "type a{n} = +{x : a{n+1}}\ntype b{n} = +{x : b{n+2}}\n";
        let e = env(src);
        let solver = Solver::new();
        let mut s = Subtyper::new(&e, &solver, Mode::Strict);
        let r = s.subtype(&["n".into()], &[], &parse_type_str("a{n}", &[]).unwrap(), &parse_type_str("b{n}", &[]).unwrap());
        assert!(matches!(r, Err(SubError::BoundExceeded(..))), "{r:?}");
    }

    #[test]
    fn nested_polymorphic_reflexive() {
        let e = env("type T[x] = +{L : T[T[x]], R : x}\ntype D = +{L : T[D], $ : 1}");
        let solver = Solver::new();
        let mut s = Subtyper::new(&e, &solver, Mode::Strict);
        let d = parse_type_str("D", &[]).unwrap();
        assert!(s.subtype(&[], &[], &d, &d).is_ok());
        let t = parse_type_str("T[T[D]]", &[]).unwrap();
        assert!(s.subtype(&[], &[], &t, &t).is_ok());
    }
}

//! Entailment between arithmetic constraints over the natural numbers.
//!
//! Linear problems are decided by Cooper's quantifier elimination; the
//! rest go through multinomial normalization heuristics and, failing
//! those, are trusted with a warning.

pub mod linear;
pub mod multinomial;
pub mod oracle;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed};

use crate::ast::{fresh_name, Exp, Prop};
use crate::syntax::pretty_prop;
pub use linear::{cooper_eliminate, find_model, Formula, Lin, NonlinearAtom};
pub use multinomial::{normalize_multinomial, Multinomial};
pub use oracle::{oracle_entails, oracle_eval};

pub type Model = BTreeMap<String, BigInt>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// An assignment under which the context holds and the goal fails.
    Invalid(Model),
    /// Undecided; the residual constraint is assumed to hold.
    Trusted(String),
}

impl Verdict {
    /// True unless a counterexample was found.
    pub fn holds(&self) -> bool {
        !matches!(self, Verdict::Invalid(_))
    }
}

pub fn show_model(m: &Model) -> String {
    if m.is_empty() {
        return "(no variables)".to_string();
    }
    m.iter().map(|(x, v)| format!("{x} = {v}")).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("arithmetic underflow in {0}")]
    Underflow(String),
    #[error("expression is not closed: free variable {0}")]
    NotClosed(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(String),
}

/// Value of a closed expression over the naturals.
pub fn evaluate_closed(e: &Exp) -> Result<u64, EvalError> {
    let show = || crate::syntax::pretty_exp(e);
    match e {
        Exp::Nat(n) => Ok(*n),
        Exp::Var(v) => Err(EvalError::NotClosed(v.clone())),
        Exp::Add(a, b) => evaluate_closed(a)?.checked_add(evaluate_closed(b)?).ok_or_else(|| EvalError::Overflow(show())),
        Exp::Sub(a, b) => evaluate_closed(a)?.checked_sub(evaluate_closed(b)?).ok_or_else(|| EvalError::Underflow(show())),
        Exp::Mul(a, b) => evaluate_closed(a)?.checked_mul(evaluate_closed(b)?).ok_or_else(|| EvalError::Overflow(show())),
    }
}

/// Integer value of `e` under `env`; `None` if a variable is unbound.
pub fn eval_exp(e: &Exp, env: &Model) -> Option<BigInt> {
    Some(match e {
        Exp::Nat(n) => BigInt::from(*n),
        Exp::Var(v) => env.get(v)?.clone(),
        Exp::Add(a, b) => eval_exp(a, env)? + eval_exp(b, env)?,
        Exp::Sub(a, b) => eval_exp(a, env)? - eval_exp(b, env)?,
        Exp::Mul(a, b) => eval_exp(a, env)? * eval_exp(b, env)?,
    })
}

/// Truth of a quantifier-free proposition; `None` on quantifiers or
/// unbound variables.
pub fn eval_prop(p: &Prop, env: &Model) -> Option<bool> {
    Some(match p {
        Prop::True => true,
        Prop::False => false,
        Prop::Eq(a, b) => eval_exp(a, env)? == eval_exp(b, env)?,
        Prop::Gt(a, b) => eval_exp(a, env)? > eval_exp(b, env)?,
        Prop::And(a, b) => eval_prop(a, env)? && eval_prop(b, env)?,
        Prop::Or(a, b) => eval_prop(a, env)? || eval_prop(b, env)?,
        Prop::Not(a) => !eval_prop(a, env)?,
        Prop::Exists(..) | Prop::Forall(..) => return None,
    })
}

pub fn is_quantifier_free(p: &Prop) -> bool {
    match p {
        Prop::True | Prop::False | Prop::Eq(..) | Prop::Gt(..) => true,
        Prop::And(a, b) | Prop::Or(a, b) => is_quantifier_free(a) && is_quantifier_free(b),
        Prop::Not(a) => is_quantifier_free(a),
        Prop::Exists(..) | Prop::Forall(..) => false,
    }
}

pub fn is_linear(p: &Prop) -> bool {
    let exp = |e: &Exp| normalize_multinomial(e).degree() <= 1;
    match p {
        Prop::True | Prop::False => true,
        Prop::Eq(a, b) | Prop::Gt(a, b) => exp(a) && exp(b),
        Prop::And(a, b) | Prop::Or(a, b) => is_linear(a) && is_linear(b),
        Prop::Not(a) | Prop::Exists(_, a) | Prop::Forall(_, a) => is_linear(a),
    }
}

fn flatten_conj(p: &Prop, out: &mut Vec<Prop>) {
    match p {
        Prop::And(a, b) => {
            flatten_conj(a, out);
            flatten_conj(b, out);
        }
        Prop::True => {}
        other => out.push(other.clone()),
    }
}

/// Goal atoms for the nonlinear heuristics: `m = 0` or `m >= 0`.
#[derive(Clone, Debug)]
enum Atom {
    Zero(Multinomial),
    NonNeg(Multinomial),
}

impl Atom {
    fn from_prop(p: &Prop) -> Option<Atom> {
        match p {
            Prop::Eq(a, b) => Some(Atom::Zero(normalize_multinomial(a).sub(&normalize_multinomial(b)))),
            Prop::Gt(a, b) => Some(Atom::NonNeg(
                normalize_multinomial(a).sub(&normalize_multinomial(b)).sub(&Multinomial::constant(1)),
            )),
            _ => None,
        }
    }

    fn subst(&self, x: &str, t: &Multinomial) -> Atom {
        match self {
            Atom::Zero(m) => Atom::Zero(m.subst(x, t)),
            Atom::NonNeg(m) => Atom::NonNeg(m.subst(x, t)),
        }
    }

    fn poly(&self) -> &Multinomial {
        match self {
            Atom::Zero(m) | Atom::NonNeg(m) => m,
        }
    }

    fn holds_syntactically(&self) -> bool {
        match self {
            Atom::Zero(m) => m.is_zero(),
            Atom::NonNeg(m) => m.all_coefficients_nonneg(),
        }
    }
}

type CacheKey = (Vec<String>, Vec<Prop>, Prop);

/// Entailment with memoization and a log of trusted constraints.
#[derive(Default)]
pub struct Solver {
    cache: RefCell<HashMap<CacheKey, Verdict>>,
    trusted: RefCell<Vec<String>>,
    queries: RefCell<usize>,
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Solver({} cached)", self.cache.borrow().len())
    }
}

/// One-shot entailment check with a fresh solver.
pub fn entails(vars: &[String], ctx: &Prop, phi: &Prop) -> Verdict {
    Solver::new().entails(vars, std::slice::from_ref(ctx), phi)
}

/// Nonlinear heuristics only, with a fresh solver.
pub fn nonlinear_check(vars: &[String], ctx: &Prop, phi: &Prop) -> Verdict {
    let s = Solver::new();
    let mut atoms = Vec::new();
    flatten_conj(ctx, &mut atoms);
    let all = s.all_vars(vars, &atoms, phi);
    s.nonlinear(&all, &atoms, phi)
}

impl Solver {
    pub fn new() -> Solver {
        Solver::default()
    }

    /// Distinct trusted constraints, in the order they were first met.
    pub fn trusted(&self) -> Vec<String> {
        self.trusted.borrow().clone()
    }

    pub fn queries(&self) -> usize {
        *self.queries.borrow()
    }

    fn all_vars(&self, vars: &[String], ctx: &[Prop], phi: &Prop) -> Vec<String> {
        let mut all: BTreeSet<String> = vars.iter().cloned().collect();
        for c in ctx {
            c.free_vars(&mut all);
        }
        phi.free_vars(&mut all);
        all.into_iter().collect()
    }

    /// Is `phi` true for every natural assignment satisfying `ctx`?
    pub fn entails(&self, vars: &[String], ctx: &[Prop], phi: &Prop) -> Verdict {
        *self.queries.borrow_mut() += 1;
        let mut atoms = Vec::new();
        for c in ctx {
            flatten_conj(c, &mut atoms);
        }
        if atoms.contains(phi) || *phi == Prop::True {
            return Verdict::Valid;
        }
        let key = (vars.to_vec(), atoms.clone(), phi.clone());
        if let Some(v) = self.cache.borrow().get(&key) {
            return v.clone();
        }
        let all = self.all_vars(vars, &atoms, phi);
        let v = self.decide(&all, &atoms, phi);
        self.cache.borrow_mut().insert(key, v.clone());
        v
    }

    pub fn is_unsat(&self, vars: &[String], ctx: &[Prop]) -> bool {
        self.entails(vars, ctx, &Prop::False) == Verdict::Valid
    }

    fn decide(&self, vars: &[String], ctx: &[Prop], phi: &Prop) -> Verdict {
        let c = Prop::conj(ctx);
        if let Some(m) = quick_counterexample(vars, &c, phi) {
            return Verdict::Invalid(m);
        }
        if let Some(v) = linear_verdict(vars, &c, phi) {
            return v;
        }
        if is_linear(phi) {
            let lin: Vec<Prop> = ctx.iter().filter(|p| is_linear(p)).cloned().collect();
            if linear_verdict(vars, &Prop::conj(&lin), phi) == Some(Verdict::Valid) {
                return Verdict::Valid;
            }
        }
        self.nonlinear(vars, ctx, phi)
    }

    fn nonlinear(&self, vars: &[String], ctx: &[Prop], phi: &Prop) -> Verdict {
        let mut goals = Vec::new();
        flatten_conj(phi, &mut goals);
        let goal_atoms: Option<Vec<Atom>> = goals.iter().map(Atom::from_prop).collect();
        if let Some(mut goal) = goal_atoms {
            // Equalities of the context with a unit-coefficient variable
            // that occurs nowhere else in them are substituted.
            let mut ctx_atoms: Vec<Atom> = ctx.iter().filter_map(Atom::from_prop).collect();
            let mut i = 0;
            while i < ctx_atoms.len() {
                if let Atom::Zero(m) = &ctx_atoms[i] {
                    if let Some((x, t)) = solve_unit(m) {
                        ctx_atoms.remove(i);
                        goal = goal.iter().map(|g| g.subst(&x, &t)).collect();
                        ctx_atoms = ctx_atoms.iter().map(|g| g.subst(&x, &t)).collect();
                        i = 0;
                        continue;
                    }
                }
                i += 1;
            }
            // Lower bounds x >= c become x = y + c.
            let lin_ctx: Vec<Prop> = ctx.iter().filter(|p| is_linear(p)).cloned().collect();
            let mut goal_vars: Vec<String> = goal.iter().flat_map(|g| g.poly().vars()).collect();
            goal_vars.sort();
            goal_vars.dedup();
            for x in goal_vars {
                let mut c = 0u64;
                while c < 16 {
                    let q = Prop::ge(Exp::var(&x), Exp::Nat(c + 1));
                    if linear_verdict(vars, &Prop::conj(&lin_ctx), &q) != Some(Verdict::Valid) {
                        break;
                    }
                    c += 1;
                }
                if c > 0 {
                    let y = fresh_name(&x);
                    let t = Multinomial::var(&y).add(&Multinomial::constant(c));
                    goal = goal.iter().map(|g| g.subst(&x, &t)).collect();
                }
            }
            if goal.iter().all(Atom::holds_syntactically) {
                return Verdict::Valid;
            }
        }
        if let Some(m) = grid_counterexample(vars, &Prop::conj(ctx), phi) {
            return Verdict::Invalid(m);
        }
        let residual = format!("{} |- {}", pretty_prop(&Prop::conj(ctx)), pretty_prop(phi));
        let mut trusted = self.trusted.borrow_mut();
        if !trusted.contains(&residual) {
            trusted.push(residual.clone());
        }
        Verdict::Trusted(residual)
    }
}

/// `m = 0` solved for a variable with coefficient +-1 occurring only linearly.
fn solve_unit(m: &Multinomial) -> Option<(String, Multinomial)> {
    for (mono, c) in &m.terms {
        if let [x] = mono.as_slice() {
            if !c.abs().is_one() {
                continue;
            }
            let elsewhere = m.terms.keys().any(|k| k.len() > 1 && k.contains(x));
            if elsewhere {
                continue;
            }
            let mut rest = m.clone();
            rest.terms.remove(mono);
            // c*x + rest = 0  =>  x = -rest/c
            let t = if c.is_positive() { rest.neg() } else { rest };
            return Some((x.clone(), t));
        }
    }
    None
}

fn quick_counterexample(vars: &[String], c: &Prop, phi: &Prop) -> Option<Model> {
    if vars.len() > 10 || !is_quantifier_free(c) || !is_quantifier_free(phi) {
        return None;
    }
    for mask in 0u32..(1 << vars.len()) {
        let env: Model = vars.iter().enumerate().map(|(i, x)| (x.clone(), BigInt::from((mask >> i) & 1))).collect();
        if eval_prop(c, &env) == Some(true) && eval_prop(phi, &env) == Some(false) {
            return Some(env);
        }
    }
    None
}

fn grid_counterexample(vars: &[String], c: &Prop, phi: &Prop) -> Option<Model> {
    if vars.is_empty() || !is_quantifier_free(c) || !is_quantifier_free(phi) {
        return None;
    }
    let mut top = 1u64;
    while (top + 2).pow(vars.len() as u32) <= 20_000 && top < 12 {
        top += 1;
    }
    let mut idx = vec![0u64; vars.len()];
    loop {
        let env: Model = vars.iter().zip(&idx).map(|(x, v)| (x.clone(), BigInt::from(*v))).collect();
        if eval_prop(c, &env) == Some(true) && eval_prop(phi, &env) == Some(false) {
            return Some(env);
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return None;
            }
            idx[k] += 1;
            if idx[k] <= top {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Decides `vars >= 0 /\ c |= phi` when both are linear.
fn linear_verdict(vars: &[String], c: &Prop, phi: &Prop) -> Option<Verdict> {
    let neg = Prop::and(c.clone(), Prop::not(phi.clone()));
    let f = linear::to_formula(&neg).ok()?;
    let mut parts = vec![f];
    parts.extend(vars.iter().map(|x| Formula::nonneg(x)));
    let f = Formula::and(parts);
    Some(match find_model(vars, &f) {
        None => Verdict::Valid,
        Some(m) => Verdict::Invalid(m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_exp_str, parse_prop_str};
    use num_traits::Zero;

    fn p(s: &str) -> Prop {
        parse_prop_str(s).unwrap()
    }

    fn vs(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn closed_evaluation() {
        assert_eq!(evaluate_closed(&parse_exp_str("2*3+1").unwrap()), Ok(7));
        assert!(matches!(evaluate_closed(&parse_exp_str("0-1").unwrap()), Err(EvalError::Underflow(_))));
        assert!(matches!(evaluate_closed(&parse_exp_str("2*n").unwrap()), Err(EvalError::NotClosed(_))));
    }

    #[test]
    fn basic_entailments() {
        let n = vs(&["n"]);
        let v = entails(&n, &p("n = 0"), &p("n > 0"));
        assert_eq!(v, Verdict::Invalid([("n".to_string(), BigInt::zero())].into()));
        assert_eq!(entails(&n, &p("n = 0 /\\ n > 0"), &Prop::False), Verdict::Valid);
        assert_eq!(entails(&n, &Prop::True, &p("n+1 > 0")), Verdict::Valid);
        assert_eq!(entails(&vs(&["n", "k"]), &p("n = 2*k"), &p("?m. n = 2*m")), Verdict::Valid);
    }

    #[test]
    fn nonlinear_heuristics() {
        assert_eq!(entails(&vs(&["n", "k"]), &Prop::True, &p("n*(k+1) = n*k+n")), Verdict::Valid);
        assert_eq!(entails(&vs(&["n"]), &Prop::True, &p("n*n >= 0")), Verdict::Valid);
        assert_eq!(entails(&vs(&["n"]), &p("n >= 1"), &p("n*n >= n")), Verdict::Valid);
        assert_eq!(nonlinear_check(&vs(&["n"]), &p("n >= 1"), &p("n*n >= n")), Verdict::Valid);
        let v = entails(&vs(&["n"]), &Prop::True, &p("n*n >= 1"));
        assert_eq!(v, Verdict::Invalid([("n".to_string(), BigInt::zero())].into()));
    }

    #[test]
    fn trusted_is_deduplicated() {
        let s = Solver::new();
        let goal = p("n*n*n >= n*n+k");
        let ctx = [p("n > k*k")];
        let v1 = s.entails(&vs(&["n", "k"]), &ctx, &goal);
        let v2 = s.entails(&vs(&["n", "k"]), &ctx, &goal);
        assert!(v1.holds());
        assert_eq!(v1, v2);
        assert!(s.trusted().len() <= 1);
    }
}

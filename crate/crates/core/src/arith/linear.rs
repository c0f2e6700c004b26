//! Linear integer arithmetic and Cooper's quantifier elimination.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::multinomial::normalize_multinomial;
use crate::ast::{fresh_name, Exp, Prop};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("nonlinear term in {0}")]
pub struct NonlinearAtom(pub String);

/// `sum coeffs[x] * x + c`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lin {
    pub coeffs: BTreeMap<String, BigInt>,
    pub c: BigInt,
}

impl Lin {
    pub fn constant(c: impl Into<BigInt>) -> Lin {
        Lin { coeffs: BTreeMap::new(), c: c.into() }
    }

    pub fn var(x: &str) -> Lin {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(x.to_string(), BigInt::one());
        Lin { coeffs, c: BigInt::zero() }
    }

    pub fn from_exp(e: &Exp) -> Result<Lin, NonlinearAtom> {
        let m = normalize_multinomial(e);
        if m.degree() > 1 {
            return Err(NonlinearAtom(crate::syntax::pretty_exp(e)));
        }
        let mut lin = Lin::constant(m.constant_term());
        for (mono, c) in &m.terms {
            if let [x] = mono.as_slice() {
                lin.coeffs.insert(x.clone(), c.clone());
            }
        }
        Ok(lin)
    }

    pub fn coeff(&self, x: &str) -> BigInt {
        self.coeffs.get(x).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn is_const(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, o: &Lin) -> Lin {
        let mut out = self.clone();
        for (x, c) in &o.coeffs {
            let e = out.coeffs.entry(x.clone()).or_insert_with(BigInt::zero);
            *e += c;
        }
        out.coeffs.retain(|_, c| !c.is_zero());
        out.c += &o.c;
        out
    }

    pub fn scale(&self, k: &BigInt) -> Lin {
        if k.is_zero() {
            return Lin::default();
        }
        Lin { coeffs: self.coeffs.iter().map(|(x, c)| (x.clone(), c * k)).collect(), c: &self.c * k }
    }

    pub fn neg(&self) -> Lin {
        self.scale(&-BigInt::one())
    }

    pub fn sub(&self, o: &Lin) -> Lin {
        self.add(&o.neg())
    }

    pub fn plus_const(&self, k: impl Into<BigInt>) -> Lin {
        let mut out = self.clone();
        out.c += k.into();
        out
    }

    pub fn without(&self, x: &str) -> Lin {
        let mut out = self.clone();
        out.coeffs.remove(x);
        out
    }

    pub fn subst(&self, x: &str, t: &Lin) -> Lin {
        let a = self.coeff(x);
        if a.is_zero() {
            return self.clone();
        }
        self.without(x).add(&t.scale(&a))
    }

    pub fn eval(&self, env: &BTreeMap<String, BigInt>) -> Option<BigInt> {
        let mut v = self.c.clone();
        for (x, c) in &self.coeffs {
            v += c * env.get(x)?;
        }
        Some(v)
    }

    fn gcd_coeffs(&self) -> BigInt {
        self.coeffs.values().fold(BigInt::zero(), |g, c| g.gcd(c))
    }
}

impl fmt::Display for Lin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (x, c) in &self.coeffs {
            if !first {
                f.write_str(if c.is_negative() { " - " } else { " + " })?;
            } else if c.is_negative() {
                f.write_str("-")?;
            }
            first = false;
            if !c.abs().is_one() {
                write!(f, "{}*", c.abs())?;
            }
            f.write_str(x)?;
        }
        if first {
            write!(f, "{}", self.c)
        } else if self.c.is_zero() {
            Ok(())
        } else {
            write!(f, " {} {}", if self.c.is_negative() { "-" } else { "+" }, self.c.abs())
        }
    }
}

/// Quantifier-free formulas in negation normal form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    /// `lin > 0`
    Gt0(Lin),
    /// `lin = 0`
    Eq0(Lin),
    /// `d | lin`, with `d >= 1`
    Dvd(BigInt, Lin),
    NDvd(BigInt, Lin),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Gt0(l) => write!(f, "{l} > 0"),
            Formula::Eq0(l) => write!(f, "{l} = 0"),
            Formula::Dvd(d, l) => write!(f, "{d} | {l}"),
            Formula::NDvd(d, l) => write!(f, "~({d} | {l})"),
            Formula::And(fs) | Formula::Or(fs) => {
                let sep = if matches!(self, Formula::And(_)) { " /\\ " } else { " \\/ " };
                f.write_str("(")?;
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{g}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Formula {
    pub fn and(fs: Vec<Formula>) -> Formula {
        simplify(Formula::And(fs))
    }

    pub fn or(fs: Vec<Formula>) -> Formula {
        simplify(Formula::Or(fs))
    }

    /// `x >= 0`
    pub fn nonneg(x: &str) -> Formula {
        Formula::Gt0(Lin::var(x).plus_const(1))
    }

    pub fn mentions(&self, x: &str) -> bool {
        match self {
            Formula::True | Formula::False => false,
            Formula::Gt0(l) | Formula::Eq0(l) | Formula::Dvd(_, l) | Formula::NDvd(_, l) => {
                l.coeffs.contains_key(x)
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().any(|g| g.mentions(x)),
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Gt0(l) | Formula::Eq0(l) | Formula::Dvd(_, l) | Formula::NDvd(_, l) => {
                out.extend(l.coeffs.keys().cloned())
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| g.vars(out)),
        }
    }

    pub fn negate(&self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Gt0(l) => Formula::Gt0(l.neg().plus_const(1)),
            Formula::Eq0(l) => Formula::Or(vec![Formula::Gt0(l.clone()), Formula::Gt0(l.neg())]),
            Formula::Dvd(d, l) => Formula::NDvd(d.clone(), l.clone()),
            Formula::NDvd(d, l) => Formula::Dvd(d.clone(), l.clone()),
            Formula::And(fs) => Formula::Or(fs.iter().map(Formula::negate).collect()),
            Formula::Or(fs) => Formula::And(fs.iter().map(Formula::negate).collect()),
        }
    }

    fn map_lin(&self, f: &impl Fn(&Lin) -> Lin) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Gt0(l) => Formula::Gt0(f(l)),
            Formula::Eq0(l) => Formula::Eq0(f(l)),
            Formula::Dvd(d, l) => Formula::Dvd(d.clone(), f(l)),
            Formula::NDvd(d, l) => Formula::NDvd(d.clone(), f(l)),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.map_lin(f)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.map_lin(f)).collect()),
        }
    }

    pub fn subst(&self, x: &str, t: &Lin) -> Formula {
        simplify(self.map_lin(&|l| l.subst(x, t)))
    }

    pub fn eval(&self, env: &BTreeMap<String, BigInt>) -> Option<bool> {
        Some(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Gt0(l) => l.eval(env)?.is_positive(),
            Formula::Eq0(l) => l.eval(env)?.is_zero(),
            Formula::Dvd(d, l) => l.eval(env)?.mod_floor(d).is_zero(),
            Formula::NDvd(d, l) => !l.eval(env)?.mod_floor(d).is_zero(),
            Formula::And(fs) => {
                for g in fs {
                    if !g.eval(env)? {
                        return Some(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for g in fs {
                    if g.eval(env)? {
                        return Some(true);
                    }
                }
                false
            }
        })
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
            _ => 1,
        }
    }
}

fn simplify_atom(f: Formula) -> Formula {
    match f {
        Formula::Gt0(l) => {
            if l.is_const() {
                return if l.c.is_positive() { Formula::True } else { Formula::False };
            }
            let g = l.gcd_coeffs();
            if g.is_one() {
                return Formula::Gt0(l);
            }
            // g*y + c > 0  <=>  y - floor(-c/g) > 0
            let c = -(-&l.c).div_floor(&g);
            let coeffs = l.coeffs.iter().map(|(x, a)| (x.clone(), a / &g)).collect();
            Formula::Gt0(Lin { coeffs, c })
        }
        Formula::Eq0(l) => {
            if l.is_const() {
                return if l.c.is_zero() { Formula::True } else { Formula::False };
            }
            let g = l.gcd_coeffs();
            if !l.c.mod_floor(&g).is_zero() {
                return Formula::False;
            }
            let mut lin = Lin { coeffs: l.coeffs.iter().map(|(x, a)| (x.clone(), a / &g)).collect(), c: &l.c / &g };
            // Canonical sign: first coefficient positive.
            if lin.coeffs.values().next().is_some_and(|a| a.is_negative()) {
                lin = lin.neg();
            }
            Formula::Eq0(lin)
        }
        other => simplify_dvd(other),
    }
}

// Divisibility atoms: reduce coefficients modulo d, decide constants.
fn simplify_dvd(f: Formula) -> Formula {
    let (d, l, positive) = match f {
        Formula::Dvd(d, l) => (d, l, true),
        Formula::NDvd(d, l) => (d, l, false),
        other => return other,
    };
    let coeffs: BTreeMap<String, BigInt> = l
        .coeffs
        .iter()
        .map(|(x, a)| (x.clone(), a.mod_floor(&d)))
        .filter(|(_, a)| !a.is_zero())
        .collect();
    let c = l.c.mod_floor(&d);
    let holds_trivially = d.is_one() || (coeffs.is_empty() && c.is_zero());
    if holds_trivially {
        return if positive { Formula::True } else { Formula::False };
    }
    if coeffs.is_empty() {
        return if positive { Formula::False } else { Formula::True };
    }
    let g = coeffs.values().fold(d.gcd(&c), |g, a| g.gcd(a));
    let (d, coeffs, c) = if g > BigInt::one() {
        (&d / &g, coeffs.into_iter().map(|(x, a)| (x, a / &g)).collect(), &c / &g)
    } else {
        (d, coeffs, c)
    };
    let l = Lin { coeffs, c };
    if positive {
        Formula::Dvd(d, l)
    } else {
        Formula::NDvd(d, l)
    }
}

pub fn simplify(f: Formula) -> Formula {
    match f {
        Formula::And(fs) => {
            let mut out = Vec::new();
            for g in fs {
                match simplify(g) {
                    Formula::True => {}
                    Formula::False => return Formula::False,
                    Formula::And(hs) => out.extend(hs),
                    h => out.push(h),
                }
            }
            out.sort();
            out.dedup();
            if contradictory_bounds(&out) {
                return Formula::False;
            }
            match out.len() {
                0 => Formula::True,
                1 => out.pop().unwrap(),
                _ => Formula::And(out),
            }
        }
        Formula::Or(fs) => {
            let mut out = Vec::new();
            for g in fs {
                match simplify(g) {
                    Formula::False => {}
                    Formula::True => return Formula::True,
                    Formula::Or(hs) => out.extend(hs),
                    h => out.push(h),
                }
            }
            out.sort();
            out.dedup();
            match out.len() {
                0 => Formula::False,
                1 => out.pop().unwrap(),
                _ => Formula::Or(out),
            }
        }
        Formula::Dvd(..) | Formula::NDvd(..) => simplify_dvd(f),
        atom => simplify_atom(atom),
    }
}

// `l > 0 /\ m > 0` with `l + m` a constant below 2 cannot hold.
fn contradictory_bounds(conj: &[Formula]) -> bool {
    let gts: Vec<&Lin> = conj.iter().filter_map(|g| if let Formula::Gt0(l) = g { Some(l) } else { None }).collect();
    if gts.len() > 64 {
        return false;
    }
    for (i, l) in gts.iter().enumerate() {
        for m in &gts[i + 1..] {
            let sum = l.add(m);
            if sum.is_const() && sum.c < BigInt::from(2) {
                return true;
            }
        }
    }
    false
}

/// Translates a proposition to a quantifier-free formula, eliminating
/// every quantifier. Bound variables range over the naturals.
pub fn to_formula(p: &Prop) -> Result<Formula, NonlinearAtom> {
    translate(p, true)
}

fn translate(p: &Prop, positive: bool) -> Result<Formula, NonlinearAtom> {
    Ok(match p {
        Prop::True => {
            if positive {
                Formula::True
            } else {
                Formula::False
            }
        }
        Prop::False => {
            if positive {
                Formula::False
            } else {
                Formula::True
            }
        }
        Prop::Eq(a, b) => {
            let l = Lin::from_exp(a)?.sub(&Lin::from_exp(b)?);
            let f = Formula::Eq0(l);
            simplify(if positive { f } else { f.negate() })
        }
        Prop::Gt(a, b) => {
            let l = Lin::from_exp(a)?.sub(&Lin::from_exp(b)?);
            let f = Formula::Gt0(l);
            simplify(if positive { f } else { f.negate() })
        }
        Prop::And(a, b) => {
            let fs = vec![translate(a, positive)?, translate(b, positive)?];
            if positive {
                Formula::and(fs)
            } else {
                Formula::or(fs)
            }
        }
        Prop::Or(a, b) => {
            let fs = vec![translate(a, positive)?, translate(b, positive)?];
            if positive {
                Formula::or(fs)
            } else {
                Formula::and(fs)
            }
        }
        Prop::Not(a) => translate(a, !positive)?,
        Prop::Exists(x, body) | Prop::Forall(x, body) => {
            let fresh = fresh_name(x);
            let mut sigma = std::collections::HashMap::new();
            sigma.insert(x.clone(), Exp::Var(fresh.clone()));
            let body = body.subst(&sigma);
            // exists x. B  = elim(B);   forall x. B = ~elim(~B)
            let exists = matches!(p, Prop::Exists(..));
            let inner = translate(&body, exists)?;
            let elim = eliminate(&fresh, inner);
            if exists == positive {
                elim
            } else {
                simplify(elim.negate())
            }
        }
    })
}

/// `exists x >= 0. f`, as an equivalent quantifier-free formula.
pub fn eliminate(x: &str, f: Formula) -> Formula {
    let f = simplify(f);
    if !f.mentions(x) {
        return f;
    }
    if let Formula::Or(fs) = f {
        return Formula::or(fs.into_iter().map(|g| eliminate(x, g)).collect());
    }
    let f = Formula::and(vec![f, Formula::nonneg(x)]);
    // An equality `a*x + r = 0` eliminates x outright: every other atom is
    // scaled by |a| so that `a*x` can be replaced by `-r`, and `a | r`
    // records integrality.
    if let Formula::And(conj) = &f {
        let best = conj
            .iter()
            .filter_map(|g| match g {
                Formula::Eq0(l) if !l.coeff(x).is_zero() => Some(l),
                _ => None,
            })
            .min_by_key(|l| l.coeff(x).abs());
        if let Some(l) = best {
            let a = l.coeff(x);
            let r = l.without(x);
            if a.abs().is_one() {
                let t = r.scale(&-&a);
                return f.subst(x, &t);
            }
            let abs = a.abs();
            let sign = a.signum();
            let replace = |m: &Lin| -> (BigInt, Lin) {
                let b = m.coeff(x);
                if b.is_zero() {
                    return (BigInt::one(), m.clone());
                }
                // |a| * (b x + s) = -b * sign(a) * r + |a| * s
                let out = m.without(x).scale(&abs).add(&r.scale(&(-&b * &sign)));
                (abs.clone(), out)
            };
            let g = map_atoms(&f, &|atom| match atom {
                Formula::Gt0(m) => Formula::Gt0(replace(m).1),
                Formula::Eq0(m) => Formula::Eq0(replace(m).1),
                Formula::Dvd(d, m) => {
                    let (k, m2) = replace(m);
                    Formula::Dvd(d * k, m2)
                }
                Formula::NDvd(d, m) => {
                    let (k, m2) = replace(m);
                    Formula::NDvd(d * k, m2)
                }
                other => other.clone(),
            });
            return Formula::and(vec![g, Formula::Dvd(abs, r)]);
        }
    }
    cooper(x, &f)
}

fn map_atoms(f: &Formula, go: &impl Fn(&Formula) -> Formula) -> Formula {
    match f {
        Formula::And(fs) => Formula::And(fs.iter().map(|g| map_atoms(g, go)).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(|g| map_atoms(g, go)).collect()),
        atom => go(atom),
    }
}

/// Rewrites `f` so that `x` has coefficient +-1, standing for `delta * x`.
fn unitize(x: &str, f: &Formula) -> Formula {
    let mut delta = BigInt::one();
    collect_coeffs(x, f, &mut delta);
    if delta.is_one() {
        return f.clone();
    }
    let scaled = rescale(x, f, &delta);
    Formula::and(vec![scaled, Formula::Dvd(delta, Lin::var(x))])
}

fn collect_coeffs(x: &str, f: &Formula, delta: &mut BigInt) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Gt0(l) | Formula::Eq0(l) | Formula::Dvd(_, l) | Formula::NDvd(_, l) => {
            let a = l.coeff(x);
            if !a.is_zero() {
                *delta = delta.lcm(&a.abs());
            }
        }
        Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| collect_coeffs(x, g, delta)),
    }
}

fn rescale(x: &str, f: &Formula, delta: &BigInt) -> Formula {
    let fix = |l: &Lin| -> (BigInt, Lin) {
        let a = l.coeff(x);
        if a.is_zero() {
            return (BigInt::one(), l.clone());
        }
        let m = delta / a.abs();
        let mut scaled = l.scale(&m);
        scaled.coeffs.insert(x.to_string(), a.signum());
        (m, scaled)
    };
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Gt0(l) => Formula::Gt0(fix(l).1),
        Formula::Eq0(l) => Formula::Eq0(fix(l).1),
        Formula::Dvd(d, l) => {
            let (m, l2) = fix(l);
            Formula::Dvd(d * m, l2)
        }
        Formula::NDvd(d, l) => {
            let (m, l2) = fix(l);
            Formula::NDvd(d * m, l2)
        }
        Formula::And(fs) => Formula::And(fs.iter().map(|g| rescale(x, g, delta)).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(|g| rescale(x, g, delta)).collect()),
    }
}

struct Bounds {
    lower: BTreeSet<Lin>,
    upper: BTreeSet<Lin>,
    modulus: BigInt,
}

// Requires every coefficient of x to be +-1.
fn bounds(x: &str, f: &Formula, b: &mut Bounds) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Gt0(l) => {
            let a = l.coeff(x);
            let r = l.without(x);
            if a.is_one() {
                // x + r > 0  <=>  x > -r
                b.lower.insert(r.neg());
            } else if !a.is_zero() {
                // -x + r > 0  <=>  x < r
                b.upper.insert(r);
            }
        }
        Formula::Eq0(l) => {
            let a = l.coeff(x);
            let r = l.without(x);
            if a.is_zero() {
                return;
            }
            // x = v
            let v = if a.is_one() { r.neg() } else { r };
            b.lower.insert(v.plus_const(-1));
            b.upper.insert(v.plus_const(1));
        }
        Formula::Dvd(d, l) | Formula::NDvd(d, l) => {
            if !l.coeff(x).is_zero() {
                b.modulus = b.modulus.lcm(d);
            }
        }
        Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| bounds(x, g, b)),
    }
}

/// The formula at `x -> -inf` (`minus`) or `x -> +inf`.
fn at_infinity(x: &str, f: &Formula, minus: bool) -> Formula {
    match f {
        Formula::Gt0(l) => {
            let a = l.coeff(x);
            if a.is_zero() {
                f.clone()
            } else if a.is_positive() != minus {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Eq0(l) if !l.coeff(x).is_zero() => Formula::False,
        Formula::And(fs) => Formula::And(fs.iter().map(|g| at_infinity(x, g, minus)).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(|g| at_infinity(x, g, minus)).collect()),
        _ => f.clone(),
    }
}

fn cooper(x: &str, f: &Formula) -> Formula {
    let g = unitize(x, f);
    if !g.mentions(x) {
        return g;
    }
    let mut b = Bounds { lower: BTreeSet::new(), upper: BTreeSet::new(), modulus: BigInt::one() };
    bounds(x, &g, &mut b);
    let mut out = Vec::new();
    let d = b.modulus.clone();
    let use_lower = b.lower.len() <= b.upper.len();
    let inf = simplify(at_infinity(x, &g, use_lower));
    let mut j = BigInt::one();
    while j <= d {
        let (shift, terms) = if use_lower { (j.clone(), &b.lower) } else { (-&j, &b.upper) };
        if inf != Formula::False {
            out.push(inf.subst(x, &Lin::constant(shift.clone())));
        }
        for t in terms {
            let cand = g.subst(x, &t.plus_const(shift.clone()));
            if cand == Formula::True {
                return Formula::True;
            }
            out.push(cand);
        }
        j += 1;
    }
    Formula::or(out)
}

/// Quantifier elimination for a (possibly quantified) linear proposition.
pub fn cooper_eliminate(p: &Prop) -> Result<Formula, NonlinearAtom> {
    to_formula(p)
}

/// Rough cost of eliminating `x` from `f`.
fn elimination_cost(x: &str, f: &Formula) -> BigInt {
    if !f.mentions(x) {
        return BigInt::zero();
    }
    if let Formula::And(conj) = f {
        for g in conj {
            if let Formula::Eq0(l) = g {
                if !l.coeff(x).is_zero() {
                    return BigInt::one();
                }
            }
        }
    }
    let mut delta = BigInt::one();
    collect_coeffs(x, f, &mut delta);
    let g = unitize(x, f);
    let mut b = Bounds { lower: BTreeSet::new(), upper: BTreeSet::new(), modulus: BigInt::one() };
    bounds(x, &g, &mut b);
    BigInt::from(2 + b.lower.len().min(b.upper.len())) * b.modulus
}

/// Finds natural values for `vars` satisfying `f`, if any exist.
pub fn find_model(vars: &[String], f: &Formula) -> Option<BTreeMap<String, BigInt>> {
    let f = simplify(f.clone());
    if vars.is_empty() {
        return if f.eval(&BTreeMap::new()) == Some(true) { Some(BTreeMap::new()) } else { None };
    }
    // Eliminate all but one variable, cheapest first.
    let mut remaining: Vec<String> = vars.to_vec();
    let mut h = f.clone();
    while remaining.len() > 1 {
        let (i, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, y)| (i, elimination_cost(y, &h)))
            .min_by(|a, b| a.1.cmp(&b.1))
            .unwrap();
        let y = remaining.remove(i);
        h = eliminate(&y, h);
        if h == Formula::False {
            return None;
        }
    }
    let x = remaining.pop().unwrap();
    let h = Formula::and(vec![h, Formula::nonneg(&x)]);
    let v = witness(&x, &h)?;
    let f2 = f.subst(&x, &Lin::constant(v.clone()));
    let rest: Vec<String> = vars.iter().filter(|y| **y != x).cloned().collect();
    let mut model = find_model(&rest, &f2)?;
    model.insert(x, v);
    Some(model)
}

/// A value for `x` satisfying `h`, whose only variable is `x`.
fn witness(x: &str, h: &Formula) -> Option<BigInt> {
    if !h.mentions(x) {
        return if h.eval(&BTreeMap::new()) == Some(true) { Some(BigInt::zero()) } else { None };
    }
    let mut delta = BigInt::one();
    collect_coeffs(x, h, &mut delta);
    let g = unitize(x, h);
    let mut b = Bounds { lower: BTreeSet::new(), upper: BTreeSet::new(), modulus: BigInt::one() };
    bounds(x, &g, &mut b);
    let mut cands: Vec<BigInt> = Vec::new();
    let mut j = BigInt::one();
    while j <= b.modulus {
        for t in &b.lower {
            cands.push(&t.c + &j);
        }
        j += 1;
    }
    cands.sort();
    cands.dedup();
    for c in cands {
        let mut env = BTreeMap::new();
        env.insert(x.to_string(), c.clone());
        if g.eval(&env) == Some(true) {
            return Some(c / &delta);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_prop_str;

    fn closed(s: &str) -> Formula {
        to_formula(&parse_prop_str(s).unwrap()).unwrap()
    }

    #[test]
    fn odd_witness() {
        assert_eq!(closed("?k. 13 = 2*k+1"), Formula::True);
        assert_eq!(closed("?k. 12 = 2*k+1"), Formula::False);
        assert_eq!(closed("?n. true"), Formula::True);
    }

    #[test]
    fn parity_contradiction() {
        let f = closed("?k. n = 2*k /\\ n = 2*k+1");
        assert_eq!(f, Formula::False);
        let f = closed("?k. n = 2*k \\/ n = 2*k+1");
        for n in 0..10 {
            let mut env = BTreeMap::new();
            env.insert("n".to_string(), BigInt::from(n));
            assert_eq!(f.eval(&env), Some(true), "n = {n}: {f}");
        }
    }

    #[test]
    fn divisibility_residue() {
        // exists k. n = 3k  is a divisibility constraint on n (for n >= 0).
        let f = closed("?k. n = 3*k");
        for n in 0..12 {
            let mut env = BTreeMap::new();
            env.insert("n".to_string(), BigInt::from(n));
            assert_eq!(f.eval(&env), Some(n % 3 == 0), "{f}");
        }
    }

    #[test]
    fn models_satisfy() {
        let f = closed("n > 3 /\\ 2*k = n + 1 /\\ k < 7");
        let vars = vec!["k".to_string(), "n".to_string()];
        let m = find_model(&vars, &f).unwrap();
        assert_eq!(f.eval(&m), Some(true));
        assert!(find_model(&vars, &closed("n > 3 /\\ n < 4")).is_none());
    }

    #[test]
    fn gcd_tightening() {
        assert_eq!(simplify(Formula::Eq0(Lin::var("x").scale(&BigInt::from(2)).plus_const(1))), Formula::False);
        let f = simplify(Formula::Gt0(Lin::var("x").scale(&BigInt::from(2)).plus_const(1)));
        assert_eq!(f, Formula::Gt0(Lin::var("x").plus_const(1)));
    }
}

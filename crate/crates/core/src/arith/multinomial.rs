use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::ast::Exp;

/// A product of variables, kept sorted; the empty monomial is the constant.
pub type Monomial = Vec<String>;

/// Sum of monomials with nonzero integer coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multinomial {
    pub terms: BTreeMap<Monomial, BigInt>,
}

impl Multinomial {
    pub fn zero() -> Multinomial {
        Multinomial::default()
    }

    pub fn constant(c: impl Into<BigInt>) -> Multinomial {
        let mut m = Multinomial::zero();
        m.add_term(Vec::new(), c.into());
        m
    }

    pub fn var(x: &str) -> Multinomial {
        let mut m = Multinomial::zero();
        m.add_term(vec![x.to_string()], BigInt::one());
        m
    }

    fn add_term(&mut self, mono: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(mono).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Multinomial) -> Multinomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Multinomial {
        Multinomial { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, other: &Multinomial) -> Multinomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Multinomial) -> Multinomial {
        let mut out = Multinomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m: Monomial = m1.iter().chain(m2.iter()).cloned().collect();
                m.sort();
                out.add_term(m, c1 * c2);
            }
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.len()).max().unwrap_or(0)
    }

    pub fn constant_term(&self) -> BigInt {
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn all_coefficients_nonneg(&self) -> bool {
        self.terms.values().all(|c| !c.is_negative())
    }

    /// Replaces `x` by the multinomial `t` everywhere.
    pub fn subst(&self, x: &str, t: &Multinomial) -> Multinomial {
        let mut out = Multinomial::zero();
        for (m, c) in &self.terms {
            let mut term = Multinomial::constant(c.clone());
            for v in m {
                let factor = if v == x { t.clone() } else { Multinomial::var(v) };
                term = term.mul(&factor);
            }
            out = out.add(&term);
        }
        out
    }

    pub fn vars(&self) -> Vec<String> {
        let mut vs: Vec<String> = self.terms.keys().flatten().cloned().collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn to_exp(&self) -> Exp {
        // Only used for printing residual constraints; negative
        // coefficients become subtractions.
        let mut pos = Exp::Nat(0);
        let mut neg = Exp::Nat(0);
        for (m, c) in &self.terms {
            let mag = c.abs();
            let mut t = if m.is_empty() || !mag.is_one() {
                Exp::Nat(u64::try_from(&mag).unwrap_or(u64::MAX))
            } else {
                Exp::var(&m[0])
            };
            let skip = usize::from(!m.is_empty() && mag.is_one());
            for v in &m[skip..] {
                t = Exp::mul(t, Exp::var(v));
            }
            if c.is_negative() {
                neg = neg.plus(&t);
            } else {
                pos = pos.plus(&t);
            }
        }
        pos.minus(&neg)
    }
}

impl fmt::Display for Multinomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(if c.is_negative() { " - " } else { " + " })?;
            } else if c.is_negative() {
                f.write_str("-")?;
            }
            let mag = c.abs();
            if m.is_empty() || !mag.is_one() {
                write!(f, "{mag}")?;
                if !m.is_empty() {
                    f.write_str("*")?;
                }
            }
            f.write_str(&m.join("*"))?;
        }
        Ok(())
    }
}

/// Sum-of-monomials normal form. Subtraction is integer subtraction.
pub fn normalize_multinomial(e: &Exp) -> Multinomial {
    match e {
        Exp::Nat(n) => Multinomial::constant(*n),
        Exp::Var(v) => Multinomial::var(v),
        Exp::Add(a, b) => normalize_multinomial(a).add(&normalize_multinomial(b)),
        Exp::Sub(a, b) => normalize_multinomial(a).sub(&normalize_multinomial(b)),
        Exp::Mul(a, b) => normalize_multinomial(a).mul(&normalize_multinomial(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_exp_str;

    fn norm(s: &str) -> Multinomial {
        normalize_multinomial(&parse_exp_str(s).unwrap())
    }

    #[test]
    fn cancellation() {
        assert!(norm("(n+n) - 2*n").is_zero());
        assert!(norm("n*n - n*n").is_zero());
        assert!(norm("n*(k+1) - (n*k + n)").is_zero());
    }

    #[test]
    fn square_expansion() {
        let m = norm("(n+1)*(n+1)");
        let mut want = BTreeMap::new();
        want.insert(vec!["n".to_string(), "n".to_string()], BigInt::from(1));
        want.insert(vec!["n".to_string()], BigInt::from(2));
        want.insert(vec![], BigInt::from(1));
        assert_eq!(m.terms, want);
        assert_eq!(m.degree(), 2);
        assert_eq!(m.to_string(), "1 + 2*n + n*n");
    }

    #[test]
    fn substitution() {
        // (y+1)^2 - (y+1) = y^2 + y
        let m = norm("n*n - n");
        let t = Multinomial::var("y").add(&Multinomial::constant(1));
        let got = m.subst("n", &t);
        assert_eq!(got, norm("y*y + y"));
        assert!(got.all_coefficients_nonneg());
    }
}

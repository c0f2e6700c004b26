//! Brute-force entailment over a bounded range, used to cross-check the
//! decision procedure.

use std::collections::{BTreeSet, HashMap};

use crate::ast::{Exp, Prop};

fn eval_exp(e: &Exp, env: &HashMap<String, i64>) -> i64 {
    match e {
        Exp::Nat(n) => *n as i64,
        Exp::Var(v) => *env.get(v).unwrap_or_else(|| panic!("oracle: unbound {v}")),
        Exp::Add(a, b) => eval_exp(a, env) + eval_exp(b, env),
        Exp::Sub(a, b) => eval_exp(a, env) - eval_exp(b, env),
        Exp::Mul(a, b) => eval_exp(a, env) * eval_exp(b, env),
    }
}

/// Truth of `p` with quantifiers ranging over `[0, bound]`.
pub fn oracle_eval(p: &Prop, env: &mut HashMap<String, i64>, bound: u64) -> bool {
    match p {
        Prop::True => true,
        Prop::False => false,
        Prop::Eq(a, b) => eval_exp(a, env) == eval_exp(b, env),
        Prop::Gt(a, b) => eval_exp(a, env) > eval_exp(b, env),
        Prop::And(a, b) => oracle_eval(a, env, bound) && oracle_eval(b, env, bound),
        Prop::Or(a, b) => oracle_eval(a, env, bound) || oracle_eval(b, env, bound),
        Prop::Not(a) => !oracle_eval(a, env, bound),
        Prop::Exists(x, body) | Prop::Forall(x, body) => {
            let want = matches!(p, Prop::Exists(..));
            let saved = env.get(x).copied();
            let mut result = !want;
            for v in 0..=bound as i64 {
                env.insert(x.clone(), v);
                if oracle_eval(body, env, bound) == want {
                    result = want;
                    break;
                }
            }
            match saved {
                Some(v) => env.insert(x.clone(), v),
                None => env.remove(x),
            };
            result
        }
    }
}

/// Does `ctx` entail `phi` for every assignment of naturals in `[0, bound]`?
pub fn oracle_entails(vars: &[String], ctx: &Prop, phi: &Prop, bound: u64) -> bool {
    let mut all: BTreeSet<String> = vars.iter().cloned().collect();
    ctx.free_vars(&mut all);
    phi.free_vars(&mut all);
    let all: Vec<String> = all.into_iter().collect();
    let mut env = HashMap::new();
    search(&all, 0, &mut env, ctx, phi, bound)
}

fn search(vars: &[String], i: usize, env: &mut HashMap<String, i64>, ctx: &Prop, phi: &Prop, bound: u64) -> bool {
    if i == vars.len() {
        return !oracle_eval(ctx, env, bound) || oracle_eval(phi, env, bound);
    }
    for v in 0..=bound as i64 {
        env.insert(vars[i].clone(), v);
        if !search(vars, i + 1, env, ctx, phi, bound) {
            return false;
        }
    }
    env.remove(&vars[i]);
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert!(oracle_entails(&[], &Prop::True, &Prop::True, 4));
        assert!(!oracle_entails(&[], &Prop::True, &Prop::False, 4));
        assert!(oracle_entails(&[], &Prop::False, &Prop::False, 4));
    }
}

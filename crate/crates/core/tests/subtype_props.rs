mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rast::arith::Solver;
use rast::ast::{Signature, Type};
use rast::elaborate::Env;
use rast::subtype::{Mode, Subtyper};
use rast::syntax::{parse_type_str, pretty_type};

use common::*;

/// A supertype of `t`: more internal choices, fewer external ones.
fn widen(rng: &mut ChaCha8Rng, t: &Type) -> Type {
    resize(rng, t, true)
}

fn narrow(rng: &mut ChaCha8Rng, t: &Type) -> Type {
    resize(rng, t, false)
}

fn resize(rng: &mut ChaCha8Rng, t: &Type, up: bool) -> Type {
    let same = |rng: &mut ChaCha8Rng, u: &Type| resize(rng, u, up);
    match t {
        Type::Plus(bs) | Type::With(bs) => {
            let plus = matches!(t, Type::Plus(_));
            let mut bs: Vec<(String, Type)> = bs.iter().map(|(l, u)| (l.clone(), same(rng, u))).collect();
            // Adding labels widens a plus and narrows a with.
            if plus == up {
                for l in ["a", "b", "c"] {
                    if !bs.iter().any(|(k, _)| k == l) && rng.gen_bool(0.5) {
                        bs.push((l.to_string(), random_type(rng, 2)));
                    }
                }
            } else if bs.len() > 1 && rng.gen_bool(0.5) {
                let i = rng.gen_range(0..bs.len());
                bs.remove(i);
            }
            if plus {
                Type::Plus(bs)
            } else {
                Type::With(bs)
            }
        }
        Type::Tensor(a, b) => Type::Tensor(Box::new(same(rng, a)), Box::new(same(rng, b))),
        Type::Lolli(a, b) => Type::Lolli(Box::new(resize(rng, a, !up)), Box::new(same(rng, b))),
        other => other.clone(),
    }
}

fn fresh_sub(env: &Env, a: &Type, b: &Type) -> bool {
    subtypes(env, a, b)
}

#[test]
fn values_are_expressions() {
    let sig = elaborated("linlam.rast");
    let env = Env::new(sig);
    let t = |s: &str| parse_type_str(s, &[]).unwrap();
    assert!(fresh_sub(&env, &t("val"), &t("exp")));
    assert!(!fresh_sub(&env, &t("exp"), &t("val")));
    assert!(!fresh_sub(&env, &t("val -o val"), &t("exp -o exp")));
    assert!(fresh_sub(&env, &t("exp -o val"), &t("val -o exp")));
}

#[test]
fn sized_values_are_expressions() {
    let sig = elaborated("linlam_size.rast");
    let env = Env::new(sig);
    let solver = Solver::new();
    let t = |s: &str| parse_type_str(s, &[]).unwrap();
    let n = vec!["n".to_string()];
    let mut s = Subtyper::new(&env, &solver, Mode::Strict);
    assert!(s.subtype(&n, &[], &t("val{n}"), &t("exp{n}")).is_ok());
    assert!(s.subtype(&n, &[], &t("exp{n}"), &t("val{n}")).is_err());
    assert!(s.subtype(&n, &[], &t("val{n}"), &t("exp{n+1}")).is_err());
}

#[test]
fn corpus_definitions_are_reflexive() {
    assert!(corpus_reflexive().unwrap() > 20);
}

#[test]
fn structural_oracle_agrees() {
    let (yes, no) = structural_pairs(0xc0ffee, 200).unwrap();
    assert!(yes > 40 && no > 40, "{yes} related, {no} unrelated");
    structural_pairs(1, 500).unwrap();
}

#[test]
fn corpus_has_no_eqtype() {
    for f in rast_files(&corpus_dir()) {
        assert!(rast::syntax::parse_source(&read(&f)).unwrap().eqtypes.is_empty(), "{}", f.display());
    }
}

#[test]
fn choice_errors_name_the_label() {
    let env = Env::new(Signature::default());
    let solver = Solver::new();
    let t = |s: &str| parse_type_str(s, &[]).unwrap();
    let err = Subtyper::new(&env, &solver, Mode::Strict)
        .subtype(&[], &[], &t("+{a : 1, b : 1}"), &t("+{a : 1}"))
        .unwrap_err();
    assert!(err.message().contains('b'), "{}", err.message());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn oracle_matches(seed in any::<u64>()) {
        let env = Env::new(Signature::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_type(&mut rng, 4);
        let b = perturb(&mut rng, &a);
        prop_assert_eq!(fresh_sub(&env, &a, &b), oracle_sub(&a, &b), "{} <= {}", pretty_type(&a), pretty_type(&b));
    }

    #[test]
    fn reflexive(seed in any::<u64>()) {
        let env = Env::new(Signature::default());
        let a = random_type(&mut ChaCha8Rng::seed_from_u64(seed), 4);
        prop_assert!(fresh_sub(&env, &a, &a));
    }

    #[test]
    fn widening_chains_are_transitive(seed in any::<u64>()) {
        let env = Env::new(Signature::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_type(&mut rng, 4);
        let a = narrow(&mut rng, &b);
        let c = widen(&mut rng, &b);
        prop_assert!(fresh_sub(&env, &a, &b), "{} <= {}", pretty_type(&a), pretty_type(&b));
        prop_assert!(fresh_sub(&env, &b, &c), "{} <= {}", pretty_type(&b), pretty_type(&c));
        prop_assert!(fresh_sub(&env, &a, &c), "{} <= {}", pretty_type(&a), pretty_type(&c));
    }

    #[test]
    fn transitive_on_random_triples(seed in any::<u64>()) {
        let env = Env::new(Signature::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_type(&mut rng, 3);
        let b = perturb(&mut rng, &a);
        let c = perturb(&mut rng, &b);
        if fresh_sub(&env, &a, &b) && fresh_sub(&env, &b, &c) {
            prop_assert!(fresh_sub(&env, &a, &c));
        }
    }

    /// Answers from a long-lived subtyper match fresh ones, in any order.
    #[test]
    fn cache_is_monotone(seed in any::<u64>()) {
        let sig = elaborated("linlam.rast");
        let env = Env::new(sig);
        let solver = Solver::new();
        let names = ["exp", "val", "exp -o val", "val -o exp", "exp * val", "val * exp", "+{lam : exp -o exp}"];
        let t = |s: &str| parse_type_str(s, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shared = Subtyper::new(&env, &solver, Mode::Strict);
        for _ in 0..12 {
            let a = t(names[rng.gen_range(0..names.len())]);
            let b = t(names[rng.gen_range(0..names.len())]);
            let once = shared.subtype(&[], &[], &a, &b).is_ok();
            prop_assert_eq!(once, fresh_sub(&env, &a, &b));
        }
    }
}

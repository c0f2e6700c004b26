#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rast::arith::{entails, evaluate_closed, oracle_entails, oracle_eval, Solver, Verdict};
use rast::ast::{unfold, Exp, Prop, Signature, Type};
use rast::cli::{check_text, reconstructed_text, Checked};
use rast::elaborate::Env;
use rast::runtime::{Machine, Observation, Policy, Rule, RuntimeError, DEFAULT_FUEL};
use rast::subtype::{Mode, Subtyper};
use rast::syntax::{parse_prop_str, parse_source, parse_type_str, pretty_prop, pretty_type};
use rast::typecheck::{displace_in, Overrides, Side};

/// Curated linear entailments `(context, goal)`. Witnesses and periods are
/// below 64 so a bounded search with bound 64 is exact on them.
pub const CURATED: &[(&str, &str)] = &[
    ("true", "true"),
    ("true", "false"),
    ("false", "false"),
    ("true", "n >= 0"),
    ("true", "n > 0"),
    ("n = 0", "n > 0"),
    ("n = 0 /\\ n > 0", "false"),
    ("true", "n+1 > 0"),
    ("n = 2*k", "?m. n = 2*m"),
    ("n = 2*k+1", "?m. n = 2*m"),
    ("n = 2*k+1", "~(?m. n = 2*m)"),
    ("true", "?m. n = 2*m \\/ n = 2*m+1"),
    ("true", "?m. n = 3*m \\/ n = 3*m+1 \\/ n = 3*m+2"),
    ("true", "?m. n = 3*m \\/ n = 3*m+1"),
    ("n > 0", "n-1 >= 0"),
    ("true", "n-1 >= 0"),
    ("n > 0", "?k. n = k+1"),
    ("true", "?k. n = k+1"),
    ("n = k+1", "n > k"),
    ("n >= k", "n-k >= 0"),
    ("n > k", "n >= k+1"),
    ("n > k /\\ k > n", "false"),
    ("n > k", "k > n"),
    ("n = 13", "?k. n = 2*k+1"),
    ("n = 12", "?k. n = 2*k+1"),
    ("true", "?k. 13 = 2*k+1"),
    ("n+k = 0", "n = 0 /\\ k = 0"),
    ("n+k = 1", "n = 0 \\/ k = 0"),
    ("n+k = 2", "n = 1"),
    ("2*n = 2*k", "n = k"),
    ("3*n = 2*k", "?m. n = 2*m"),
    ("3*n = 2*k", "?m. k = 3*m"),
    ("3*n = 2*k", "?m. k = 6*m"),
    ("n < 5", "n <= 4"),
    ("n < 5", "n <= 3"),
    ("n >= 3 /\\ n <= 3", "n = 3"),
    ("n >= 3 /\\ n <= 4", "n = 3"),
    ("n != 0", "n >= 1"),
    ("n != 1", "n >= 2"),
    ("true", "!k. k >= 0"),
    ("true", "!k. k > 0"),
    ("true", "!k. ?m. k = 2*m \\/ k = 2*m+1"),
    ("n > 10", "?k. n = k+11"),
    ("n > 10", "?k. n = k+12"),
    ("n = 2*a /\\ k = 2*b", "?c. n+k = 2*c"),
    ("n = 2*a+1 /\\ k = 2*b+1", "?c. n+k = 2*c"),
    ("n = 2*a+1 /\\ k = 2*b", "?c. n+k = 2*c"),
    ("n = 4*a", "?c. n = 2*c"),
    ("n = 2*a", "?c. n = 4*c"),
    ("n+2 = k", "k >= 2"),
    ("n+2 = k", "k >= 3"),
    ("n >= 2*k /\\ k >= 3", "n >= 6"),
    ("n >= 2*k /\\ k >= 3", "n >= 7"),
    ("5*n = 3*k + 1", "n >= 2"),
    ("5*n = 3*k + 1", "n >= 3"),
    ("7*n + 3 = 4*k", "?m. n = 4*m+3"),
    ("7*n + 3 = 4*k", "?m. n = 4*m+1"),
    ("n = k - 1 /\\ k > 0", "k = n+1"),
    ("k - n > 2", "k > n"),
    ("~(n = 0) /\\ ~(n = 1)", "n > 1"),
    ("n = 0 \\/ n = 5", "n < 6"),
    ("n = 0 \\/ n = 5", "n < 5"),
    ("?k. n = 2*k /\\ k > 3", "n > 7"),
    ("?k. n = 2*k /\\ k > 3", "n > 8"),
    ("!k. n > k \\/ k > 20", "n > 20"),
    ("!k. n > k \\/ k > 20", "n > 21"),
];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("corpus")
}

pub fn negative_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("negative")
}

/// Sorted `.rast` files directly under `dir`.
pub fn rast_files(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "rast"))
        .collect();
    out.sort();
    out
}

/// One file per program family the corpus must cover.
pub const FAMILIES: [&str; 19] = [
    "arith.rast",
    "binary.rast",
    "integers.rast",
    "linlam.rast",
    "linlam_size.rast",
    "linlam_reds.rast",
    "list.rast",
    "queue.rast",
    "queue_plain.rast",
    "queue_brigade.rast",
    "queue_twostack.rast",
    "queue_time.rast",
    "primes.rast",
    "segments.rast",
    "ternary.rast",
    "theorems.rast",
    "trie.rast",
    "dyck.rast",
    "expserver.rast",
];

pub fn corpus_file(name: &str) -> PathBuf {
    corpus_dir().join(name)
}

pub fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Checks a file under its own pragma.
pub fn check_file(p: &Path) -> Checked {
    check_text(&p.display().to_string(), &read(p), &Overrides::default())
}

/// The elaborated explicit signature of a corpus file that must check.
pub fn elaborated(name: &str) -> Signature {
    let c = check_file(&corpus_file(name));
    assert!(c.ok(), "{name}: {:?}", c.rendered());
    c.report.elaborated.unwrap()
}

/// Runs one exec under the sequential policy.
pub fn run_exec(sig: &Signature, exec: &str) -> Result<Observation, RuntimeError> {
    rast::runtime::run(sig, exec, rast::runtime::DEFAULT_FUEL)
}

/// 1-based line of the `% mutated` marker.
pub fn mutated_line(text: &str) -> usize {
    text.lines().position(|l| l.contains("% mutated")).expect("mutant has a marker") + 1
}

/// Line range of a rendered diagnostic `file:l.c-l.c: ...`.
pub fn diag_lines(rendered: &str, file: &str) -> Option<(usize, usize)> {
    let rest = rendered.strip_prefix(file)?.strip_prefix(':')?;
    let range = rest.split(':').next()?;
    let (a, b) = range.split_once('-')?;
    let line = |s: &str| s.split('.').next()?.parse::<usize>().ok();
    Some((line(a)?, line(b)?))
}

/// Implicit-mode files of the corpus.
pub fn is_implicit(text: &str) -> bool {
    text.lines().next().is_some_and(|l| l.starts_with("#options") && l.contains("--syntax=implicit"))
}

pub type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Every corpus file checks, and the whole corpus in under ten seconds.
pub fn corpus_checks() -> Outcome {
    let files = rast_files(&corpus_dir());
    for fam in FAMILIES {
        ensure(corpus_file(fam).exists(), || format!("missing {fam}"))?;
    }
    let start = Instant::now();
    for f in &files {
        let c = check_file(f);
        ensure(c.ok(), || format!("{}: {:?}", f.display(), c.rendered()))?;
        ensure(c.report.trusted.is_empty(), || format!("{}: trusted {:?}", f.display(), c.report.trusted))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("corpus took {secs:.2}s"))?;
    Ok(format!("{} files in {:.0} ms", files.len(), secs * 1000.0))
}

/// Each mutant fails with an error whose span covers the marked line.
pub fn negatives_fail() -> Outcome {
    let files = rast_files(&negative_dir());
    ensure(files.len() >= 15, || format!("only {} mutants", files.len()))?;
    for f in &files {
        let text = read(f);
        let name = f.display().to_string();
        let c = check_text(&name, &text, &Overrides::default());
        ensure(!c.ok(), || format!("{name} checks"))?;
        let line = mutated_line(&text);
        let hit = c
            .errors()
            .iter()
            .filter_map(|d| diag_lines(&c.map.render(d), &name))
            .any(|(a, b)| a <= line && line <= b);
        ensure(hit, || format!("{name}: no error covers line {line}: {:?}", c.rendered()))?;
    }
    Ok(format!("{} mutants rejected at the mutation", files.len()))
}

/// Reconstructed output of every implicit file checks in explicit mode.
pub fn reconstruction_rechecks() -> Outcome {
    let mut n = 0;
    for f in rast_files(&corpus_dir()) {
        let text = read(&f);
        if !is_implicit(&text) {
            continue;
        }
        let c = check_file(&f);
        let out = reconstructed_text(&c).ok_or_else(|| format!("{}: no reconstruction", f.display()))?;
        ensure(!is_implicit(&out) && out.starts_with("#options --syntax=explicit"), || {
            format!("{}: pragma of output", f.display())
        })?;
        let again = check_text("reconstructed", &out, &Overrides::default());
        ensure(again.ok(), || format!("{}: {:?}", f.display(), again.rendered()))?;
        n += 1;
    }
    ensure(n >= 10, || format!("only {n} implicit files"))?;
    Ok(format!("{n} implicit files round-trip"))
}

// ---- arithmetic ----

pub fn prop(s: &str) -> Prop {
    parse_prop_str(s).unwrap_or_else(|e| panic!("{s}: {e:?}"))
}

/// A counterexample must satisfy the context and falsify the goal.
pub fn model_refutes(ctx: &Prop, phi: &Prop, m: &BTreeMap<String, BigInt>) -> bool {
    let mut env: HashMap<String, i64> = m.iter().map(|(k, v)| (k.clone(), v.to_i64().unwrap())).collect();
    oracle_eval(ctx, &mut env, 64) && !oracle_eval(phi, &mut env, 64)
}

pub fn random_exp(rng: &mut ChaCha8Rng, vars: &[&str]) -> Exp {
    let mut e = Exp::Nat(rng.gen_range(0..=6));
    for v in vars {
        let c = rng.gen_range(0..=4u64);
        if c > 0 {
            let t = if c == 1 { Exp::var(v) } else { Exp::mul(Exp::Nat(c), Exp::var(v)) };
            e = if rng.gen_bool(0.5) { Exp::add(e, t) } else { Exp::sub(e, t) };
        }
    }
    e
}

pub fn random_atom(rng: &mut ChaCha8Rng, vars: &[&str]) -> Prop {
    let a = random_exp(rng, vars);
    let b = random_exp(rng, vars);
    match rng.gen_range(0..4) {
        0 => Prop::Eq(a, b),
        1 => Prop::Gt(a, b),
        2 => Prop::not(Prop::Eq(a, b)),
        _ => Prop::ge(a, b),
    }
}

/// A random linear entailment whose counterexamples, if any, lie inside
/// the oracle's range.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Prop, Prop) {
    let vars = ["x", "y", "z"];
    let vs = &vars[..rng.gen_range(1..=3)];
    let mut ctx = Prop::and(random_atom(rng, vs), random_atom(rng, vs));
    for v in vs {
        ctx = Prop::and(ctx, Prop::ge(Exp::Nat(12), Exp::var(v)));
    }
    let phi = if rng.gen_bool(0.3) {
        let mut inner = vs.to_vec();
        inner.push("k");
        let body = Prop::and(random_atom(rng, &inner), Prop::gt(Exp::Nat(20), Exp::var("k")));
        Prop::Exists("k".into(), Box::new(body))
    } else {
        random_atom(rng, vs)
    };
    (ctx, phi)
}

fn agree(i: usize, ctx: &Prop, phi: &Prop) -> Result<(), String> {
    let v = entails(&[], ctx, phi);
    let o = oracle_entails(&[], ctx, phi, 64);
    ensure(!matches!(v, Verdict::Trusted(_)), || format!("#{i}: linear formula trusted"))?;
    ensure((v == Verdict::Valid) == o, || format!("#{i}: {} |= {} gave {v:?}", pretty_prop(ctx), pretty_prop(phi)))?;
    if let Verdict::Invalid(m) = &v {
        ensure(model_refutes(ctx, phi, m), || format!("#{i}: bad counterexample {m:?}"))?;
    }
    Ok(())
}

pub fn arith_curated() -> Result<usize, String> {
    ensure(CURATED.len() >= 60, || format!("only {} curated formulas", CURATED.len()))?;
    for (i, (c, p)) in CURATED.iter().enumerate() {
        agree(i, &prop(c), &prop(p))?;
    }
    Ok(CURATED.len())
}

pub fn arith_random(seed: u64, n: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let (ctx, phi) = random_instance(&mut rng);
        agree(i, &ctx, &phi)?;
    }
    Ok(n)
}

pub fn arith_nonlinear() -> Result<(), String> {
    let vars = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let v = entails(&vars(&["n", "k"]), &prop("true"), &prop("n*(k+1) = n*k+n"));
    ensure(v == Verdict::Valid, || format!("n(k+1) = nk+n gave {v:?}"))?;
    let v = entails(&vars(&["n"]), &prop("n >= 1"), &prop("n*n >= n"));
    ensure(v == Verdict::Valid, || format!("n*n >= n gave {v:?}"))?;
    match entails(&vars(&["n"]), &prop("true"), &prop("n >= 1")) {
        Verdict::Invalid(m) => {
            let n = m.get("n").cloned().unwrap_or_default();
            ensure(n == BigInt::from(0), || format!("counterexample n = {n}"))
        }
        other => Err(format!("unguarded n >= 1 gave {other:?}")),
    }
}

pub fn arith_criterion() -> Outcome {
    let c = arith_curated()?;
    let r = arith_random(0x5eed, 200)?;
    arith_nonlinear()?;
    Ok(format!("{c} curated and {r} random agree; nonlinear goals decided"))
}

// ---- subtyping ----

const LABELS: [&str; 3] = ["a", "b", "c"];

/// A random recursion-free, index-free session type of depth at most `d`.
pub fn random_type(rng: &mut ChaCha8Rng, d: usize) -> Type {
    if d <= 1 {
        return Type::One;
    }
    match rng.gen_range(0..5) {
        0 => Type::One,
        1 | 2 => {
            let mut bs = Vec::new();
            for l in LABELS {
                if rng.gen_bool(0.6) {
                    bs.push((l.to_string(), random_type(rng, d - 1)));
                }
            }
            if bs.is_empty() {
                bs.push(("a".to_string(), Type::One));
            }
            if rng.gen_bool(0.5) {
                Type::Plus(bs)
            } else {
                Type::With(bs)
            }
        }
        3 => Type::Tensor(Box::new(random_type(rng, d - 1)), Box::new(random_type(rng, d - 1))),
        _ => Type::Lolli(Box::new(random_type(rng, d - 1)), Box::new(random_type(rng, d - 1))),
    }
}

/// A small random edit of `t`, so that related pairs are common.
pub fn perturb(rng: &mut ChaCha8Rng, t: &Type) -> Type {
    match t {
        Type::Plus(bs) | Type::With(bs) => {
            let mut bs: Vec<(String, Type)> =
                bs.iter().map(|(l, u)| (l.clone(), if rng.gen_bool(0.3) { perturb(rng, u) } else { u.clone() })).collect();
            match rng.gen_range(0..4) {
                0 if bs.len() > 1 => {
                    let i = rng.gen_range(0..bs.len());
                    bs.remove(i);
                }
                1 => {
                    if let Some(l) = LABELS.iter().find(|l| !bs.iter().any(|(k, _)| k == *l)) {
                        bs.push((l.to_string(), Type::One));
                    }
                }
                _ => {}
            }
            if rng.gen_bool(0.1) {
                return if matches!(t, Type::Plus(_)) { Type::With(bs) } else { Type::Plus(bs) };
            }
            if matches!(t, Type::Plus(_)) {
                Type::Plus(bs)
            } else {
                Type::With(bs)
            }
        }
        Type::Tensor(a, b) => Type::Tensor(Box::new(perturb(rng, a)), Box::new(perturb(rng, b))),
        Type::Lolli(a, b) => Type::Lolli(Box::new(perturb(rng, a)), Box::new(perturb(rng, b))),
        _ if rng.gen_bool(0.1) => Type::Plus(vec![("a".into(), Type::One)]),
        other => other.clone(),
    }
}

fn labels_of(bs: &[(String, Type)]) -> BTreeMap<&str, &Type> {
    bs.iter().map(|(l, t)| (l.as_str(), t)).collect()
}

/// Structural subtyping by direct recursion on finite types.
pub fn oracle_sub(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::One, Type::One) => true,
        (Type::Plus(xs), Type::Plus(ys)) => {
            let ys = labels_of(ys);
            xs.iter().all(|(l, t)| ys.get(l.as_str()).is_some_and(|u| oracle_sub(t, u)))
        }
        (Type::With(xs), Type::With(ys)) => {
            let xs = labels_of(xs);
            ys.iter().all(|(l, u)| xs.get(l.as_str()).is_some_and(|t| oracle_sub(t, u)))
        }
        (Type::Tensor(a1, a2), Type::Tensor(b1, b2)) => oracle_sub(a1, b1) && oracle_sub(a2, b2),
        (Type::Lolli(a1, a2), Type::Lolli(b1, b2)) => oracle_sub(b1, a1) && oracle_sub(a2, b2),
        _ => false,
    }
}

pub fn subtypes(env: &Env, a: &Type, b: &Type) -> bool {
    let solver = Solver::new();
    Subtyper::new(env, &solver, Mode::Strict).subtype(&[], &[], a, b).is_ok()
}

pub fn structural_pairs(seed: u64, n: usize) -> Result<(usize, usize), String> {
    let env = Env::new(Signature::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut yes = 0;
    for i in 0..n {
        let a = random_type(&mut rng, 4);
        let b = if rng.gen_bool(0.8) { perturb(&mut rng, &a) } else { random_type(&mut rng, 4) };
        let want = oracle_sub(&a, &b);
        let got = subtypes(&env, &a, &b);
        ensure(want == got, || format!("#{i}: {} <= {}: oracle {want}, checker {got}", pretty_type(&a), pretty_type(&b)))?;
        yes += want as usize;
    }
    Ok((yes, n - yes))
}

/// Each corpus type definition, applied to variables, is related to itself
/// and to its unfolding in both directions.
pub fn corpus_reflexive() -> Result<usize, String> {
    let mut n = 0;
    for f in rast_files(&corpus_dir()) {
        let sig = parse_source(&read(&f)).map_err(|e| format!("{}: {e:?}", f.display()))?;
        let env = Env::new(sig.clone());
        let solver = Solver::new();
        for def in sig.types.values() {
            let t = Type::Name(
                def.name.clone(),
                def.tparams.iter().map(|v| Type::Var(v.clone())).collect(),
                def.iparams.iter().map(|v| Exp::var(v)).collect(),
            );
            let body = unfold(&t, &sig).map_err(|e| format!("{}: {e:?}", def.name))?;
            for (a, b) in [(&t, &t), (&t, &body), (&body, &t), (&body, &body)] {
                let mut s = Subtyper::new(&env, &solver, Mode::Strict);
                s.subtype(&def.iparams, &[], a, b)
                    .map_err(|e| format!("{}: {} <= {}: {}", f.display(), env.show(a), env.show(b), e.message()))?;
            }
            n += 1;
        }
    }
    Ok(n)
}

pub fn subtype_criterion() -> Outcome {
    let sig = elaborated("linlam.rast");
    let env = Env::new(sig);
    let val = Type::name("val", vec![], vec![]);
    let exp = Type::name("exp", vec![], vec![]);
    ensure(subtypes(&env, &val, &exp), || "val <= exp fails".into())?;
    ensure(!subtypes(&env, &exp, &val), || "exp <= val holds".into())?;
    let refl = corpus_reflexive()?;
    let (yes, no) = structural_pairs(0xc0ffee, 200)?;
    let mut eq = 0;
    for f in rast_files(&corpus_dir()) {
        eq += parse_source(&read(&f)).map(|s| s.eqtypes.len()).unwrap_or(0);
    }
    ensure(eq == 0, || format!("{eq} eqtype declarations in the corpus"))?;
    Ok(format!("{refl} definitions reflexive; 200 pairs agree ({yes} related, {no} not); no eqtype"))
}

// ---- runtime ----

pub fn sieve_criterion() -> Result<String, String> {
    let sig = elaborated("primes.rast");
    let start = Instant::now();
    let o = run_exec(&sig, "upto100").map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let labels = o.labels();
    let primes = labels.iter().filter(|l| *l == "prime").count();
    let composites = labels.iter().filter(|l| *l == "composite").count();
    ensure(primes == 25 && composites == 74, || format!("{primes} primes, {composites} composites"))?;
    ensure(secs < 5.0 && o.steps < 1_000_000, || format!("{secs:.2}s, {} steps", o.steps))?;
    Ok(format!("sieve: 25 primes, 74 composites, {} steps", o.steps))
}

fn closed_pot(sig: &Signature, f: &str) -> u64 {
    evaluate_closed(&sig.procs[f].pot).expect("closed potential")
}

/// Runs `exec` sequentially, checking that work never exceeds the
/// potential supplied to it.
pub fn bounded_work(sig: &Signature, exec: &str) -> Result<u64, String> {
    let supplied = closed_pot(sig, exec);
    let mut m = Machine::new(sig, exec).map_err(|e| e.to_string())?;
    ensure(m.total_potential() == supplied, || format!("{exec}: starts with {}", m.total_potential()))?;
    let mut seed = 0u64;
    let mut chooser = move |n: usize| {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (seed >> 33) as usize % n
    };
    while m.step_random(&mut chooser).map_err(|e| e.to_string())?.is_some() {
        ensure(m.total_work() <= supplied, || format!("{exec}: work {} exceeds {supplied}", m.total_work()))?;
    }
    Ok(m.total_work())
}

pub fn brigade_criterion() -> Result<String, String> {
    let sig = elaborated("queue_brigade.rast");
    let n = 3;
    let three = bounded_work(&sig, "three")?;
    let mk = bounded_work(&sig, "mk")?;
    let grown = bounded_work(&sig, "grown")?;
    bounded_work(&sig, "main")?;
    let insert = grown - three - mk;
    ensure(insert == 2 * n + 2, || format!("insert at n = 3 costs {insert}"))?;
    Ok(format!("insert at n = 3 costs {insert}"))
}

pub fn interpreter_criterion() -> Outcome {
    let sig = elaborated("binary.rast");
    let o = run_exec(&sig, "thirteen").map_err(|e| e.to_string())?;
    let want = ["b1", "b0", "b1", "b1", "e", "close"];
    ensure(o.labels() == want, || format!("thirteen gave {:?}", o.labels()))?;
    let sieve = sieve_criterion()?;
    let brigade = brigade_criterion()?;
    Ok(format!("13 = b1 b0 b1 b1 e; {sieve}; {brigade}"))
}

/// Programs used for the conservation and confluence checks.
pub const CONSERVATION: [(&str, &str); 5] = [
    ("queue_brigade.rast", "main"),
    ("queue_twostack.rast", "main"),
    ("linlam_reds.rast", "main"),
    ("binary.rast", "thirteen"),
    ("primes.rast", "upto100"),
];

/// Up to `steps` random steps, checking the invariants after each one.
pub fn conserve(sig: &Signature, exec: &str, seed: u64, steps: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chooser = |n: usize| rng.gen_range(0..n);
    let mut m = Machine::new(sig, exec).map_err(|e| e.to_string())?;
    let total = m.total_work() + m.total_potential();
    for i in 0..steps {
        let before = m.total_work();
        let Some(rule) = m.step_random(&mut chooser).map_err(|e| e.to_string())? else {
            return Ok(i);
        };
        let now = m.total_work() + m.total_potential();
        ensure(now <= total, || format!("{exec}: step {i}: work plus potential rose to {now}"))?;
        ensure(now == total, || format!("{exec}: step {i}: work plus potential fell to {now}"))?;
        if rule != Rule::Work {
            ensure(m.total_work() == before, || format!("{exec}: step {i}: {rule:?} changed work"))?;
        }
        m.check_linearity().map_err(|e| format!("{exec}: step {i}: {e}"))?;
    }
    Ok(steps)
}

/// Full runs under 20 random schedules match the sequential run.
pub fn confluent(sig: &Signature, exec: &str) -> Result<(), String> {
    let base = run_exec(sig, exec).map_err(|e| e.to_string())?;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chooser = |n: usize| rng.gen_range(0..n);
        let mut m = Machine::new(sig, exec).map_err(|e| e.to_string())?;
        m.run(Policy::Random(&mut chooser), DEFAULT_FUEL).map_err(|e| e.to_string())?;
        let o = m.observation();
        ensure(o.items == base.items && o.work == base.work, || {
            format!("{exec}: seed {seed} observed\n{}instead of\n{}", o.render(), base.render())
        })?;
    }
    Ok(())
}

/// Random runs from fresh seeds until `steps` steps have been checked.
pub fn conserve_for(sig: &Signature, exec: &str, steps: usize) -> Result<usize, String> {
    let mut done = 0;
    let mut runs = 0;
    while done < steps {
        let n = conserve(sig, exec, runs as u64, steps - done)?;
        ensure(n > 0, || format!("{exec}: no step possible"))?;
        done += n;
        runs += 1;
    }
    Ok(runs)
}

pub fn conservation_criterion() -> Outcome {
    let mut runs = 0;
    for (file, exec) in CONSERVATION {
        let sig = elaborated(file);
        runs += conserve_for(&sig, exec, 10_000)?;
        confluent(&sig, exec)?;
    }
    Ok(format!("10000 random steps per program ({runs} runs) conserve work and potential; 20 schedules agree on 5 programs"))
}

// ---- temporal ----

pub fn displacement_table() -> Result<(), String> {
    let env = Env::new(Signature::default());
    let solver = Solver::new();
    let t = |s: &str| parse_type_str(s, &[]).unwrap();
    let d = |ty: &str, by: u64, side| displace_in(&env, &solver, &[], &[], &t(ty), &Exp::Nat(by), side);
    let rows: [(&str, u64, Side, Option<&str>); 10] = [
        ("() 1", 1, Side::Left, Some("1")),
        ("() 1", 1, Side::Right, Some("1")),
        ("[] 1", 1, Side::Left, Some("[] 1")),
        ("[] 1", 1, Side::Right, None),
        ("<> 1", 1, Side::Left, None),
        ("<> 1", 1, Side::Right, Some("<> 1")),
        ("1", 1, Side::Left, None),
        ("+{l : 1}", 1, Side::Right, None),
        ("()({2}) [] 1", 3, Side::Left, Some("[] 1")),
        ("({5}) 1", 3, Side::Left, Some("({2}) 1")),
    ];
    for (ty, by, side, want) in rows {
        let got = d(ty, by, side);
        let ok = match want {
            Some(w) => got.as_ref() == Ok(&t(w)),
            None => got.is_err(),
        };
        ensure(ok, || format!("displacing {ty} by {by} on the {side:?}: {got:?}"))?;
    }
    Ok(())
}

pub fn temporal_criterion() -> Outcome {
    let f = corpus_file("queue_time.rast");
    let text = read(&f);
    let c = check_file(&f);
    ensure(c.ok(), || format!("temporal queue: {:?}", c.rendered()))?;
    ensure(text.contains("()()()queue"), || "temporal queue lost its triple delay".into())?;
    let weak = text.replace("()()()queue", "()()queue");
    let c = check_text("weakened", &weak, &Overrides::default());
    ensure(!c.ok(), || "queue with two delays on enq checks".into())?;
    displacement_table()?;
    Ok("temporal queue checks; two delays instead of three fail; displacement table holds".into())
}

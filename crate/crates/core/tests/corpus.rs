mod common;

use rast::cli::{check_text, reconstructed_text};
use rast::typecheck::Overrides;

use common::*;

#[test]
fn every_family_checks() {
    corpus_checks().unwrap();
}

#[test]
fn mutants_fail_at_the_mutation() {
    negatives_fail().unwrap();
}

#[test]
fn reconstruction_output_rechecks() {
    reconstruction_rechecks().unwrap();
}

#[test]
fn reconstruction_is_stable() {
    // Checking the reconstructed program and printing it again is a fixpoint.
    for f in rast_files(&corpus_dir()) {
        let c = check_file(&f);
        let once = reconstructed_text(&c).unwrap();
        let again = check_text("once", &once, &Overrides::default());
        assert_eq!(reconstructed_text(&again).unwrap(), once, "{}", f.display());
    }
}

#[test]
fn execs_match_expected_output() {
    let cases = [
        ("queue.rast", "main", "(true ; close) (false ; close) close"),
        ("binary.rast", "thirteen", "b1 {6} assert {13 = 13} b0 assert {6 > 0} {3} assert {6 = 6} b1 {1} assert {3 = 3} b1 {0} assert {1 = 1} e assert {0 = 0} close"),
        ("binary.rast", "thirteen'", "b1 {6} assert {13 = 13} b0 assert {6 > 0} {3} assert {6 = 6} b1 {1} assert {3 = 3} b1 {0} assert {1 = 1} e assert {0 = 0} close"),
        ("list.rast", "main", "cons assert {4 > 0} (b0 ; close) cons assert {3 > 0} (b0 ; close) cons assert {2 > 0} (b1 ; close) cons assert {1 > 0} (b1 ; close) nil assert {0 = 0} close"),
        ("dyck.rast", "main", "L L R R L R $ close"),
        ("dyck.rast", "built", "L L R R L R $ close"),
        ("expserver.rast", "main", "(b1 ; b0 ; b1 ; b1 ; e ; close) close"),
        ("integers.rast", "walk", "(neg ; close) (zero ; close) pos close"),
        ("segments.rast", "main", "cons assert {3 > 0} (b1 ; close) cons assert {2 > 0} (b1 ; close) cons assert {1 > 0} (b0 ; close) nil assert {0 = 0} close"),
    ];
    for (file, exec, want) in cases {
        let sig = elaborated(file);
        let o = run_exec(&sig, exec).unwrap();
        let got: Vec<String> = o.items.iter().map(|i| i.to_string()).collect();
        assert_eq!(got.join(" "), want, "{file} {exec}");
    }
}

#[test]
fn work_matches_declared_potential() {
    for (file, exec, work) in [
        ("queue_brigade.rast", "main", 48),
        ("queue_twostack.rast", "main", 58),
        ("linlam_reds.rast", "main", 3),
    ] {
        let sig = elaborated(file);
        assert_eq!(bounded_work(&sig, exec).unwrap(), work, "{file}");
    }
}

#[test]
fn bucket_brigade_insert() {
    brigade_criterion().unwrap();
}

#[test]
fn sieve_counts() {
    sieve_criterion().unwrap();
}

#[test]
fn temporal_queue() {
    temporal_criterion().unwrap();
}

#[test]
fn pretty_printing_rechecks() {
    for f in rast_files(&corpus_dir()) {
        let sig = rast::syntax::parse_source(&read(&f)).unwrap();
        let text = rast::syntax::pretty_signature(&sig);
        let c = check_text("pretty", &text, &Overrides::default());
        assert!(c.ok(), "{}: {:?}", f.display(), c.rendered());
    }
}

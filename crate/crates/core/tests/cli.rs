mod common;

use std::process::Command;

use common::*;

fn rast(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rast")).args(args).output().unwrap()
}

#[test]
fn corpus_exits_zero() {
    let files: Vec<String> = rast_files(&corpus_dir()).iter().map(|p| p.display().to_string()).collect();
    let mut args = vec!["check"];
    args.extend(files.iter().map(String::as_str));
    let out = rast(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn mutants_exit_one() {
    for f in rast_files(&negative_dir()) {
        let out = rast(&["check", &f.display().to_string()]);
        assert_eq!(out.status.code(), Some(1), "{}", f.display());
        assert!(String::from_utf8_lossy(&out.stderr).contains("error:"), "{}", f.display());
    }
}

#[test]
fn machine_format_is_json_lines() {
    let f = corpus_file("queue.rast").display().to_string();
    let out = rast(&["check", "--format=machine", &f]);
    for line in String::from_utf8_lossy(&out.stdout).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["verdict"], "ok", "{line}");
    }
}

#[test]
fn run_prints_observation() {
    let out = rast(&["run", &corpus_file("binary.rast").display().to_string()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("exec thirteen\nb1\n"), "{text}");
}

#[test]
fn fuel_exhaustion_exits_three() {
    let out = rast(&["run", "--fuel", "10", &corpus_file("primes.rast").display().to_string()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_file_exits_two() {
    assert_eq!(rast(&["check", "/nonexistent.rast"]).status.code(), Some(2));
}

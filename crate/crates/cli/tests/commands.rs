use std::path::{Path, PathBuf};
use std::process::{Command as Proc, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use weylpair_cli::{export_heatmap, run_scenario, CliError, Command, Counterexample, RunOptions};

fn write_scenario(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions { out: Some(dir.join("out")), ..Default::default() }
}

fn binary(args: &[&str]) -> Output {
    Proc::new(env!("CARGO_BIN_EXE_weylpair")).args(args).output().unwrap()
}

fn canonical_pair() -> Value {
    json!({ "window": { "lo": [0], "hi": [7] }, "components": [{ "pspace": { "up_set": [[2]] }, "k": 2 }] })
}

#[test]
fn pspace_enum_on_a_chain_lists_eight() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "s.json", &json!({ "window": { "lo": [0], "hi": [7] }, "expect": { "pspace_count": 8 } }));
    let r = run_scenario(Command::PspaceEnum, &s, &opts(dir.path())).unwrap();
    assert!(r.passed);
    assert_eq!(r.data["count"], 8);
    assert!(dir.path().join("out/pspaces.json").exists());
}

#[test]
fn pair_check_on_a_canonical_pair_exits_zero() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "s.json", &json!({ "pair": canonical_pair(), "margin": 2 }));
    let out = dir.path().join("out");
    let o = binary(&["pair-check", "--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    for c in r["checks"].as_array().unwrap() {
        assert!(c["value"].as_f64().unwrap() <= 1e-10, "{c}");
    }
}

#[test]
fn built_pair_round_trips_through_a_file() {
    let dir = TempDir::new().unwrap();
    let pair = json!({ "window": { "dim": 2, "side": 3 }, "components": [{ "pspace": "full" }, { "pspace": { "up_set": [[1, 0], [0, 1]] } }], "scramble": true });
    let s = write_scenario(dir.path(), "build.json", &json!({ "pair": pair, "seed": 3 }));
    run_scenario(Command::PairBuild, &s, &opts(dir.path())).unwrap().into_result().unwrap();
    let check = write_scenario(dir.path(), "check.json", &json!({ "pair": { "file": "out/pair.json" }, "margin": 1 }));
    let r = run_scenario(Command::PairCheck, &check, &opts(dir.path())).unwrap();
    assert!(r.passed, "{}", r.to_json());
    let d = write_scenario(dir.path(), "decompose.json", &json!({ "pair": { "file": "out/pair.json" } }));
    let r = run_scenario(Command::Decompose, &d, &opts(dir.path())).unwrap();
    assert!(r.passed);
    assert_eq!(r.data["components"].as_array().unwrap().len(), 2);
}

#[test]
fn increasing_on_the_demo_writes_a_heatmap() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "s.json", &json!({ "family": { "kind": "demo" }, "grid": { "q": 4, "extent": 3.0, "offset": 0.125 } }));
    let r = run_scenario(Command::Counterexample(Counterexample::Increasing), &s, &opts(dir.path())).unwrap();
    assert!(r.passed);
    // zero up to eigenvalue roundoff
    assert!(r.data["violation"].as_f64().unwrap() <= 1e-12);
    assert_eq!(r.artifacts, vec!["rank_heatmap.csv".to_string()]);
    let csv = std::fs::read_to_string(dir.path().join("out/rank_heatmap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12 * 12);
}

#[test]
fn heatmap_on_a_four_by_four_grid_has_sixteen_rows() {
    let dir = TempDir::new().unwrap();
    let grid = weylpair_core::GridSpec::new(4, 1.0, 0.125).unwrap();
    let field = weylpair_core::counterexample::rank_field(&weylpair_core::ProjectionFamily::default_demo(0), &weylpair_core::EvaluationPoint::demo(), &grid).unwrap();
    let path = dir.path().join("h.csv");
    export_heatmap(&field, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "s,t,value");
    assert_eq!(lines.len(), 17);
    // row-major in (s, t)
    assert!(lines[1].starts_with("1.2500000000000000e-1,1.2500000000000000e-1,"));
    assert!(lines[2].starts_with("1.2500000000000000e-1,3.7500000000000000e-1,"));
}

#[test]
fn empty_heatmap_is_header_only() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("h.csv");
    export_heatmap(&[], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "s,t,value\n");
}

#[test]
fn heatmap_values_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("h.csv");
    let field = vec![(0.1, 1.0 / 3.0, std::f64::consts::PI)];
    export_heatmap(&field, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row, vec![0.1, 1.0 / 3.0, std::f64::consts::PI]);
}

#[test]
fn same_scenario_and_seed_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let pair = json!({ "window": { "lo": [0], "hi": [5] }, "components": [{ "pspace": { "up_set": [[1]] }, "k": 2 }], "scramble": true });
    let s = write_scenario(dir.path(), "s.json", &json!({ "pair": pair }));
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = binary(&["pair-build", "--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "11"]);
        assert!(o.status.success());
        (o.stdout, std::fs::read(out.join("pair.json")).unwrap())
    };
    assert_eq!(run("a"), run("b"));
    let h = write_scenario(dir.path(), "h.json", &json!({ "grid": { "q": 3, "extent": 2.0, "offset": 0.1 }, "seed": 5 }));
    let heat = |sub: &str| {
        let out = dir.path().join(sub);
        let o = binary(&["counterexample", "increasing", "--scenario", h.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        (o.stdout, std::fs::read(out.join("rank_heatmap.csv")).unwrap())
    };
    assert_eq!(heat("c"), heat("d"));
}

#[test]
fn failing_check_is_named_and_exits_one() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "s.json", &json!({ "pair": canonical_pair(), "expect": { "commutant_dim": 1 } }));
    let o = binary(&["commutant", "--scenario", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("check failed: commutant.dimension"));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["passed"], false);
    assert_eq!(r["data"]["summary"]["commutant_dim"], 4);
}

#[test]
fn parse_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "s.json", &json!({ "window": { "lo": [0], "hi": [3] }, "tolerance": -1.0 }));
    let o = binary(&["pspace-enum", "--scenario", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let missing = write_scenario(dir.path(), "m.json", &json!({ "pair": { "file": "nowhere.json" } }));
    assert!(matches!(run_scenario(Command::PairCheck, &missing, &opts(dir.path())), Err(CliError::Parse(_))));
    let wrong = write_scenario(dir.path(), "w.json", &json!({ "command": "dilate", "pair": canonical_pair() }));
    assert!(matches!(run_scenario(Command::PairCheck, &wrong, &opts(dir.path())), Err(CliError::Parse(_))));
    let unknown = write_scenario(dir.path(), "u.json", &json!({ "windw": {} }));
    assert!(matches!(run_scenario(Command::PspaceEnum, &unknown, &opts(dir.path())), Err(CliError::Parse(_))));
}

#[test]
fn commutant_and_equivalence_of_canonical_pairs() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(
        dir.path(),
        "s.json",
        &json!({ "pair": canonical_pair(), "expect": { "commutant_dim": 4, "center_dim": 1, "is_factor": true, "is_irreducible": false } }),
    );
    assert!(run_scenario(Command::Commutant, &s, &opts(dir.path())).unwrap().passed);
    let mut other = canonical_pair();
    other["scramble"] = json!(true);
    let e = write_scenario(dir.path(), "e.json", &json!({ "pair": canonical_pair(), "other": other, "expect": { "equivalent": true } }));
    assert!(run_scenario(Command::Equiv, &e, &opts(dir.path())).unwrap().passed);
    let far = json!({ "window": { "lo": [0], "hi": [7] }, "components": [{ "pspace": { "up_set": [[3]] }, "k": 2 }] });
    let n = write_scenario(dir.path(), "n.json", &json!({ "pair": canonical_pair(), "other": far, "expect": { "equivalent": false } }));
    assert!(run_scenario(Command::Equiv, &n, &opts(dir.path())).unwrap().passed);
}

#[test]
fn dilate_reports_clean_axioms() {
    let dir = TempDir::new().unwrap();
    let pair = json!({ "window": { "lo": [0], "hi": [4] }, "components": [{ "pspace": { "up_set": [[1]] } }, { "pspace": "full" }], "scramble": true });
    let s = write_scenario(dir.path(), "s.json", &json!({ "pair": pair, "depth": 2 }));
    let r = run_scenario(Command::Dilate, &s, &opts(dir.path())).unwrap();
    assert!(r.passed, "{}", r.to_json());
    assert_eq!(r.artifacts, vec!["dilation.json".to_string()]);
}

#[test]
fn counterexample_subcommands_pass_on_the_demo() {
    let dir = TempDir::new().unwrap();
    let grid = json!({ "q": 4, "extent": 6.0, "offset": 0.125 });
    let plateau = write_scenario(dir.path(), "p.json", &json!({ "grid": { "q": 10, "extent": 3.0, "offset": 0.025 }, "cells": [[0, 0], [1, 2], [2, 2]] }));
    let r = run_scenario(Command::Counterexample(Counterexample::Plateau), &plateau, &opts(dir.path())).unwrap();
    assert!(r.passed, "{}", r.to_json());
    let pair = write_scenario(dir.path(), "r.json", &json!({ "grid": { "q": 2, "extent": 3.0, "offset": 0.125 } }));
    let r = run_scenario(Command::Counterexample(Counterexample::Pair), &pair, &opts(dir.path())).unwrap();
    assert!(r.passed, "{}", r.to_json());
    let transfer = write_scenario(dir.path(), "t.json", &json!({ "grid": grid }));
    let r = run_scenario(Command::Counterexample(Counterexample::Transfer), &transfer, &opts(dir.path())).unwrap();
    assert!(r.passed, "{}", r.to_json());
    let spec = write_scenario(
        dir.path(),
        "s.json",
        &json!({ "grid": { "q": 2, "extent": 3.0, "offset": 0.125 }, "family": { "kind": "rotated", "kappa": 3, "seed": 1 }, "other_family": { "kind": "rotated", "kappa": 3, "seed": 2 }, "expect": { "equivalent": false } }),
    );
    let r = run_scenario(Command::Counterexample(Counterexample::Spec), &spec, &opts(dir.path())).unwrap();
    assert!(r.passed, "{}", r.to_json());
}

#[test]
fn commutant_reads_raw_generators() {
    let dir = TempDir::new().unwrap();
    let gens = weylpair_core::RepGens::from_matrices(vec![weylpair_core::CMatrix::identity(3, 3)]).unwrap();
    std::fs::write(dir.path().join("gens.json"), serde_json::to_string(&gens).unwrap()).unwrap();
    let s = write_scenario(dir.path(), "s.json", &json!({ "generators": "gens.json", "expect": { "commutant_dim": 9, "is_factor": true } }));
    let r = run_scenario(Command::Commutant, &s, &opts(dir.path())).unwrap();
    assert!(r.passed, "{}", r.to_json());
}

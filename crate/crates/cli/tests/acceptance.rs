//! CLI acceptance: byte-identical determinism of the diagram outputs
//! (criterion 11), exit-code contract, CSV schema stability, and the verify
//! report schema.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Deserialize;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ccbvp")
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn collect_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(collect_files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_11_diagram_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_body = r#"{
  "problem": { "p": 4.0, "q": 1.5 },
  "task": { "diagram": { "j_max": 1, "lambda_min": -1.0, "include_energy": true, "deadcore_lambda_samples": 4 } },
  "numerics": { "ode_abs_tol": 1e-10, "ode_rel_tol": 1e-9, "min_sup_norm": 0.05 },
  "output": { "dir": "PLACEHOLDER" }
}"#;
    let out1 = tmp.path().join("run1");
    let out2 = tmp.path().join("run2");
    let cfg = write_cfg(tmp.path(), "diagram.json", cfg_body);
    for out in [&out1, &out2] {
        let st = run(&[
            "diagram",
            "--config",
            cfg.to_str().unwrap(),
            "--outdir",
            out.to_str().unwrap(),
        ]);
        assert!(st.status.success(), "diagram run failed: {}", String::from_utf8_lossy(&st.stderr));
    }
    let files1 = collect_files(&out1);
    let files2 = collect_files(&out2);
    assert!(!files1.is_empty());
    assert_eq!(files1.len(), files2.len());
    for (a, b) in files1.iter().zip(&files2) {
        assert_eq!(
            a.strip_prefix(&out1).unwrap(),
            b.strip_prefix(&out2).unwrap(),
            "file sets differ"
        );
        let ba = fs::read(a).unwrap();
        let bb = fs::read(b).unwrap();
        assert_eq!(ba, bb, "bytes differ in {}", a.display());
    }
    println!(
        "criterion 11: PASS  ({} output files byte-identical across two runs)",
        files1.len()
    );
}

#[test]
fn exit_codes_contract() {
    let tmp = tempfile::tempdir().unwrap();
    // unknown key -> config error -> 2
    let bad = write_cfg(
        tmp.path(),
        "bad.json",
        r#"{ "problem": { "p": 4.0, "q": 1.5, "oops": 1 }, "task": { "verify": {} } }"#,
    );
    let st = run(&["verify", "--config", bad.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(2));

    // empty lambda list -> 2
    let empty = write_cfg(
        tmp.path(),
        "empty.json",
        r#"{ "problem": { "p": 4.0, "q": 1.5 },
             "task": { "timemap": { "lambdas": [], "alpha_min": 0.1, "alpha_max": 1.0 } } }"#,
    );
    let st = run(&["timemap", "--config", empty.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(2));

    // subcommand / task mismatch -> 2
    let st = run(&["diagram", "--config", empty.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(2));

    // lambda above the fold -> no solution -> 1, message names the condition
    let nosol = write_cfg(
        tmp.path(),
        "nosol.json",
        &format!(
            r#"{{ "problem": {{ "p": 4.0, "q": 1.5 }},
                 "task": {{ "profiles": {{ "lambda": 50.0, "j": 0, "kind": "nodal" }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            tmp.path().join("o").display()
        ),
    );
    let st = run(&["profiles", "--config", nosol.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&st.stderr);
    assert!(msg.contains("exceeds sup T_lambda"), "message: {msg}");

    // invalid dead-core placement -> 1, message names the violated inequality
    let badplace = write_cfg(
        tmp.path(),
        "badplace.json",
        &format!(
            r#"{{ "problem": {{ "p": 4.0, "q": 1.5 }},
                 "task": {{ "profiles": {{ "lambda": -5000.0, "j": 1, "kind": "deadcore",
                                           "placement": [0.1, 0.2], "sigma": [1, -1] }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            tmp.path().join("o2").display()
        ),
    );
    let st = run(&["profiles", "--config", badplace.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&st.stderr);
    assert!(msg.contains("a_0 + l <= a_1"), "message: {msg}");
}

// The published schema of verify reports, as strict Rust types: parsing with
// deny_unknown_fields is the conformance check.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportSchema {
    suites: Vec<SuiteSchema>,
    passed: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct SuiteSchema {
    name: String,
    items: Vec<ItemSchema>,
    passed: bool,
    min_margin: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct ItemSchema {
    name: String,
    margin: f64,
    band: f64,
    passed: bool,
    monitored_only: bool,
    info: Option<String>,
}

#[test]
fn verify_report_schema_and_candidate_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let outdir = tmp.path().join("out");

    // green verify run -> exit 0, report validates against the schema
    let vcfg = write_cfg(
        tmp.path(),
        "verify.json",
        &format!(
            r#"{{ "problem": {{ "p": 4.0, "q": 1.5 }},
                 "task": {{ "verify": {{ "ratio_samples": 500 }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            outdir.display()
        ),
    );
    let st = run(&["verify", "--config", vcfg.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let report_text = fs::read_to_string(outdir.join("verify/report.json")).unwrap();
    let report: ReportSchema = serde_json::from_str(&report_text).expect("schema-conformant");
    assert!(report.passed);
    assert!(report.suites.iter().all(|s| s.min_margin.is_finite() || s.items.is_empty()));

    // a profile generated by the tool classifies as valid (exit 0) ...
    let pcfg = write_cfg(
        tmp.path(),
        "prof.json",
        &format!(
            r#"{{ "problem": {{ "p": 4.0, "q": 1.5 }},
                 "task": {{ "profiles": {{ "lambda": 1.0, "j": 1, "kind": "nodal" }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            outdir.display()
        ),
    );
    let st = run(&["profiles", "--config", pcfg.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(0));
    let profile = outdir.join("profiles/profile.csv");
    let ccfg = write_cfg(
        tmp.path(),
        "cand.json",
        &format!(
            r#"{{ "problem": {{ "p": 4.0, "q": 1.5 }},
                 "task": {{ "verify": {{ "suites": ["constants"], "candidate_csv": "{}",
                                         "candidate_lambda": 1.0 }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            profile.display(),
            outdir.display()
        ),
    );
    let st = run(&["verify", "--config", ccfg.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));

    // ... and an injected perturbation flips classification to invalid -> exit 1
    let text = fs::read_to_string(&profile).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    for (i, line) in lines.iter_mut().enumerate().skip(1) {
        if i % 7 == 0 {
            let mut cols: Vec<String> = line.split(',').map(String::from).collect();
            let u: f64 = cols[1].parse().unwrap();
            cols[1] = format!("{:.16e}", u + 0.05);
            *line = cols.join(",");
        }
    }
    let perturbed = tmp.path().join("perturbed.csv");
    fs::write(&perturbed, lines.join("\n") + "\n").unwrap();
    let ccfg2 = write_cfg(
        tmp.path(),
        "cand2.json",
        &format!(
            r#"{{ "problem": {{ "p": 4.0, "q": 1.5 }},
                 "task": {{ "verify": {{ "suites": ["constants"], "candidate_csv": "{}",
                                         "candidate_lambda": 1.0 }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            perturbed.display(),
            outdir.display()
        ),
    );
    let st = run(&["verify", "--config", ccfg2.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(1), "perturbed candidate must fail verification");
}

#[test]
fn csv_headers_are_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let outdir = tmp.path().join("out");
    let tcfg = write_cfg(
        tmp.path(),
        "tm.json",
        &format!(
            r#"{{ "problem": {{ "p": 4.0, "q": 1.5 }},
                 "task": {{ "timemap": {{ "lambdas": [1.0, -1.0], "alpha_min": 0.2,
                                          "alpha_max": 3.0, "alpha_count": 16 }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            outdir.display()
        ),
    );
    let st = run(&["timemap", "--config", tcfg.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(0));
    let head = |p: PathBuf| -> String {
        fs::read_to_string(p).unwrap().lines().next().unwrap().to_string()
    };
    assert_eq!(head(outdir.join("timemap/timemap_00.csv")), "lambda,alpha,t,t_prime");
    assert_eq!(head(outdir.join("timemap/markers.csv")), "lambda,alpha,t,kind");
    // negative-lambda curves clip at c_lambda and leave the derivative empty
    let text = fs::read_to_string(outdir.join("timemap/timemap_01.csv")).unwrap();
    let first = text.lines().nth(1).unwrap();
    assert!(first.ends_with(','), "t_prime must be empty for lambda < 0: {first}");
    let alpha: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!(alpha >= 1.48, "alpha range must start at c_lambda, got {alpha}");
}

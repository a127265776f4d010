use std::fs;
use std::path::Path;

use byzopt::harness::runner::{CONFIG_FILE, DECODE_FILE, SUMMARY_FILE, TRACE_FILE};
use byzopt::harness::{
    analyze_dir, apply_override, check_graph, execute, find, run_to_dir, split_override, HarnessError, RunConfig, RunSummary,
    LIBRARY,
};
use serde_json::{json, Value};

fn k5_doc() -> Value {
    json!({
        "name": "k5",
        "algorithm": "alg2",
        "graph": {"kind": "complete", "n": 5},
        "faulty": [4],
        "f": 1,
        "adversary": {"kind": "constant", "value": 1e6},
        "assignment": {"kind": "sparsest", "s": 2, "pattern": {"kind": "cyclic"}},
        "functions": [
            {"kind": "flat_bottom", "params": {"a": 0.4, "b": 0.9, "sl": 1.0, "sr": 1.0}},
            {"kind": "flat_bottom", "params": {"a": 0.1, "b": 0.6, "sl": 1.0, "sr": 1.0}},
            {"kind": "flat_bottom", "params": {"a": 0.3, "b": 0.6, "sl": 1.0, "sr": 1.0}},
            {"kind": "flat_bottom", "params": {"a": 0.4, "b": 0.8, "sl": 1.0, "sr": 1.0}}
        ],
        "schedule": {"kind": "harmonic", "a": 1.0},
        "x0": [-1.0, 0.0, 1.5, 2.0, 0.0],
        "rounds": 300
    })
}

fn fields_of(doc: &Value) -> Vec<String> {
    let err = match RunConfig::from_value(doc) {
        Ok(cfg) => cfg.prepare().unwrap_err(),
        Err(e) => e,
    };
    err.fields().into_iter().map(str::to_string).collect()
}

#[test]
fn handwritten_config_parses_and_prepares() {
    let cfg = RunConfig::from_value(&k5_doc()).unwrap();
    let p = cfg.prepare().unwrap();
    assert_eq!(p.scenario.n(), 5);
    assert_eq!(p.scenario.assignment.k(), 4);
}

#[test]
fn schema_errors_are_listed_together() {
    let mut doc = k5_doc();
    let obj = doc.as_object_mut().unwrap();
    obj.remove("rounds");
    obj.insert("colour".into(), json!("red"));
    obj.insert("f".into(), json!("one"));
    let fields = fields_of(&doc);
    for want in ["rounds", "colour", "f"] {
        assert!(fields.iter().any(|f| f == want), "{want} missing from {fields:?}");
    }
}

#[test]
fn semantic_errors_name_their_fields() {
    let cases: &[(&str, &str, &str)] = &[
        ("assignment", r#"{"kind": "rows", "rows": [[1,1,1,1]], "normalize": true}"#, "assignment"),
        ("x0", "[0, 1]", "x0"),
        ("faulty", "[9]", "faulty[0]"),
        ("faulty", "[3, 4]", "faulty"),
        ("schedule", r#"{"kind": "power", "a": 1.0, "p": 0.3}"#, "schedule"),
        ("adversary", r#"{"kind": "random_uniform", "lo": 2, "hi": 1}"#, "adversary"),
        ("rounds", "0", "rounds"),
        ("graph", r#"{"kind": "star_out", "n": 5}"#, "graph"),
        ("functions", "[]", "functions"),
    ];
    for (path, raw, field) in cases {
        let mut doc = k5_doc();
        apply_override(&mut doc, path, raw).unwrap();
        let fields = fields_of(&doc);
        assert!(fields.iter().any(|f| f == field), "{path}={raw}: got {fields:?}");
    }
    // several at once are all reported
    let mut doc = k5_doc();
    apply_override(&mut doc, "x0", "[0]").unwrap();
    apply_override(&mut doc, "rounds", "0").unwrap();
    apply_override(&mut doc, "functions.0.params.b", "0.1").unwrap();
    let fields = fields_of(&doc);
    for want in ["x0", "rounds", "functions[0]"] {
        assert!(fields.iter().any(|f| f == want), "{want} missing from {fields:?}");
    }
}

#[test]
fn gradient_coding_requirements_are_checked() {
    let mut cfg = find("alg1-repetition-f1").unwrap().config();
    cfg.broadcast_capable = false;
    cfg.x0 = vec![0.0, 1.0, 0.0];
    cfg.analysis.enabled = true;
    let err = cfg.prepare().unwrap_err();
    for want in ["broadcast_capable", "x0", "analysis.enabled"] {
        assert!(err.fields().contains(&want), "{want} missing from {:?}", err.fields());
    }
}

#[test]
fn overrides_edit_nested_values() {
    let mut doc = k5_doc();
    apply_override(&mut doc, "adversary.value", "3.5").unwrap();
    apply_override(&mut doc, "x0.2", "7").unwrap();
    apply_override(&mut doc, "name", "renamed run").unwrap();
    apply_override(&mut doc, "analysis.enabled", "true").unwrap();
    assert_eq!(doc["adversary"]["value"], json!(3.5));
    assert_eq!(doc["x0"][2], json!(7));
    assert_eq!(doc["name"], json!("renamed run"));
    assert_eq!(doc["analysis"]["enabled"], json!(true));
    assert!(apply_override(&mut doc, "x0.9", "1").is_err());
    assert!(apply_override(&mut doc, "rounds.inner", "1").is_err());
    assert!(apply_override(&mut doc, "a..b", "1").is_err());
    assert_eq!(split_override("rounds=5").unwrap(), ("rounds", "5"));
    assert!(split_override("rounds").is_err());
}

#[test]
fn hash_ignores_key_order_defaults_and_output_dir() {
    let a = RunConfig::from_value(&k5_doc()).unwrap();
    let mut doc = k5_doc();
    doc["seed"] = json!(0);
    doc["output_dir"] = json!("/tmp/elsewhere");
    let reordered: serde_json::Map<String, Value> = doc.as_object().unwrap().clone().into_iter().rev().collect();
    let b = RunConfig::from_value(&Value::Object(reordered)).unwrap();
    assert_eq!(a.hash(), b.hash());
    let mut c = a.clone();
    c.seed = 1;
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn every_library_scenario_runs_as_described() {
    for entry in LIBRARY {
        let cfg = entry.config();
        assert_eq!(cfg.name, entry.name);
        // the JSON form round-trips exactly
        assert_eq!(RunConfig::from_value(&cfg.to_value()).unwrap(), cfg);
        let p = cfg.prepare().unwrap_or_else(|e| panic!("{}: {e}", entry.name));
        let exec = execute(&p).unwrap();
        let s = &exec.summary;
        if let Some(o) = &s.oracle {
            assert!(o.matches && o.max_deviation <= 1e-12, "{}: {o:?}", entry.name);
        }
        if cfg.expected_failure {
            assert!(s.final_dist > 0.1 || s.final_spread > 0.1, "{} should miss", entry.name);
        } else if s.oracle.is_none() {
            assert!(s.final_spread < 1e-3, "{}: spread {}", entry.name, s.final_spread);
            assert!(s.final_dist < 1e-2, "{}: dist {}", entry.name, s.final_dist);
        }
    }
}

#[test]
fn impossibility_demo_misses_the_optimum_by_a_margin() {
    let p = find("impossibility-demo").unwrap().config().prepare().unwrap();
    let exec = execute(&p).unwrap();
    assert!(exec.summary.final_dist >= 0.2);
    assert!(exec.summary.expected_failure);
}

#[test]
fn safety_scenario_stays_in_range() {
    let p = find("alg2-safety-random").unwrap().config().prepare().unwrap();
    assert!(execute(&p).unwrap().summary.stayed_in_initial_range);
}

#[test]
fn check_graph_reports_both_conditions() {
    let mut k4 = RunConfig::from_value(&k5_doc()).unwrap();
    k4.graph = serde_json::from_value(json!({"kind": "complete", "n": 4})).unwrap();
    k4.assignment = serde_json::from_value(json!({"kind": "rows", "rows": [[1,1,1,1]], "normalize": true})).unwrap();
    k4.functions.truncate(1);
    k4.faulty = vec![3];
    k4.x0 = vec![0.0; 4];
    let rep = check_graph(&k4.prepare().unwrap()).unwrap();
    assert!(rep.condition1.holds && rep.condition2.unwrap().holds);

    let mut star = k4.clone();
    star.graph = serde_json::from_value(json!({"kind": "star_out", "n": 4})).unwrap();
    star.adversarial_demo = true;
    let rep = check_graph(&star.prepare().unwrap()).unwrap();
    assert!(!rep.condition1.holds && rep.condition1.witness.is_some());
    let c2 = rep.condition2.unwrap();
    assert!(!c2.holds && c2.witness.is_some());
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    fs::read(dir.join(file)).unwrap()
}

#[test]
fn runs_write_identical_files_and_analyze_replays_them() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = find("alg2-k5-constant-lie").unwrap().config();
    cfg.rounds = 1200;
    let p = cfg.prepare().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_to_dir(&p, &a).unwrap();
    run_to_dir(&p, &b).unwrap();
    for file in [CONFIG_FILE, TRACE_FILE, SUMMARY_FILE, "messages.csv", "analysis.json", "y.csv", "spread.csv"] {
        assert_eq!(read(&a, file), read(&b, file), "{file} differs");
    }
    let summary: RunSummary = serde_json::from_slice(&read(&a, SUMMARY_FILE)).unwrap();
    assert_eq!(summary.config_hash, p.hash);

    let out = analyze_dir(&a).unwrap();
    assert_eq!(out.config_hash, p.hash);
    assert!(out.all_pass, "{:?}", out.report.verdicts());
    assert_eq!(read(&a, "analysis.json"), read(&b, "analysis.json"));

    // a tampered trace is caught
    let mut trace = read(&a, TRACE_FILE);
    let last = trace.len() - 2;
    trace[last] = if trace[last] == b'1' { b'2' } else { b'1' };
    fs::write(a.join(TRACE_FILE), trace).unwrap();
    assert!(matches!(analyze_dir(&a), Err(HarnessError::TraceMismatch(_))));

    // so is an edited config
    let mut doc: Value = serde_json::from_slice(&read(&b, CONFIG_FILE)).unwrap();
    doc["seed"] = json!(99);
    fs::write(b.join(CONFIG_FILE), serde_json::to_vec(&doc).unwrap()).unwrap();
    assert!(matches!(analyze_dir(&b), Err(HarnessError::HashMismatch { .. })));

    assert!(matches!(analyze_dir(&tmp.path().join("nothing")), Err(HarnessError::MissingFile(_))));
}

#[test]
fn gradient_coding_runs_write_decode_logs_and_refuse_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let p = find("alg1-repetition-f1").unwrap().config().prepare().unwrap();
    run_to_dir(&p, tmp.path()).unwrap();
    let decode = String::from_utf8(read(tmp.path(), DECODE_FILE)).unwrap();
    assert_eq!(decode.lines().count(), 501);
    assert!(matches!(analyze_dir(tmp.path()), Err(HarnessError::NotAnalyzable(_))));
}

#[test]
fn bundled_scenario_files_match_the_library() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let cfg = RunConfig::from_json_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let lib = find(&cfg.name).unwrap_or_else(|| panic!("{} is not in the library", cfg.name));
        assert_eq!(cfg, lib.config(), "{} is stale; regenerate with list-scenarios --write", path.display());
        seen += 1;
    }
    assert_eq!(seen, LIBRARY.len());
}

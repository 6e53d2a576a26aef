use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agingrates"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Six persons, three components, one day each in 2020-03 (persons are
/// 50 years old). Person P1 also has an absurd c1 value earlier in the month.
fn fixture(dir: &Path, with_outlier: bool) -> (PathBuf, PathBuf, PathBuf) {
    let mut obs = String::from("person_id,component_id,value,unit,date\n");
    if with_outlier {
        obs.push_str("P1,c1,100,u,2020-03-02\n");
    }
    for i in 0..6 {
        let v = [1.0 + 0.1 * i as f64, 10.0 - 0.5 * i as f64, 3.0 + 0.2 * (i % 3) as f64];
        for (c, x) in v.iter().enumerate() {
            obs.push_str(&format!("P{},c{},{x},u,2020-03-10\n", i + 1, c + 1));
        }
    }
    let specs = "component_id,unit,critical_low,critical_high,normal_low,normal_high,zero_allowed,conversions\n\
                 c1,u,,,,,true,\nc2,u,,,,,true,\nc3,u,,,,,true,\n";
    let mut demo = String::from("person_id,birth_date,sex\n");
    for i in 0..6 {
        demo.push_str(&format!("P{},1970-01-01,{}\n", i + 1, i % 2));
    }
    let paths = (dir.join("obs.csv"), dir.join("specs.csv"), dir.join("demo.csv"));
    fs::write(&paths.0, obs).unwrap();
    fs::write(&paths.1, specs).unwrap();
    fs::write(&paths.2, demo).unwrap();
    paths
}

fn clean_into(out: &Path, obs: &Path, specs: &Path, demo: &Path) -> Output {
    run(&[
        "clean",
        "--out",
        p(out),
        "--input",
        p(obs),
        "--specs",
        p(specs),
        "--demographics",
        p(demo),
    ])
}

#[test]
fn clean_output_is_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let (obs, specs, demo) = fixture(tmp.path(), false);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(clean_into(&a, &obs, &specs, &demo).status.success());
    assert!(clean_into(&b, &obs, &specs, &demo).status.success());
    for f in ["cross_section.csv", "scaler.json", "bounds.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let cs = fs::read_to_string(a.join("cross_section.csv")).unwrap();
    assert_eq!(cs.lines().count(), 7);
    assert!(cs.starts_with("person_id,c1,c2,c3,age,sex,window\n"));
}

#[test]
fn one_out_of_bounds_row_is_one_exclusion() {
    let tmp = tempfile::tempdir().unwrap();
    let (obs, specs, demo) = fixture(tmp.path(), true);
    let out = tmp.path().join("out");
    assert!(clean_into(&out, &obs, &specs, &demo).status.success());
    let report = json(&out.join("bounds.json"));
    let excluded: u64 = report["exclusions"]
        .as_object()
        .unwrap()
        .values()
        .map(|e| e["below_lower"].as_u64().unwrap() + e["above_upper"].as_u64().unwrap())
        .sum();
    assert_eq!(excluded, 1);
    assert_eq!(report["exclusions"]["c1"]["above_upper"], 1);
    assert_eq!(report["persons_kept"], 6);
}

#[test]
fn missing_spec_file_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (obs, _, demo) = fixture(tmp.path(), false);
    let out = tmp.path().join("out");
    let res = clean_into(&out, &obs, &tmp.path().join("nope.csv"), &demo);
    assert_eq!(res.status.code(), Some(2));
    let err: Value = serde_json::from_slice(res.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "validation");
    assert_eq!(err["exit_code"], 2);
    assert!(!out.exists());
}

#[test]
fn inputs_are_not_mutated_and_manifest_lists_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (obs, specs, demo) = fixture(tmp.path(), true);
    let before = fs::read(&obs).unwrap();
    let out = tmp.path().join("out");
    assert!(clean_into(&out, &obs, &specs, &demo).status.success());
    assert_eq!(fs::read(&obs).unwrap(), before);
    let manifest = json(&out.join("manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["path"].as_str().unwrap())
        .collect();
    assert_eq!(outputs, ["bounds.json", "cross_section.csv", "scaler.json"]);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["config"]["k_global"], 3.0);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let (obs, specs, demo) = fixture(tmp.path(), false);
    let a = tmp.path().join("a.toml");
    let b = tmp.path().join("b.toml");
    fs::write(&a, "seed = 5\n[clean]\nk_global = 2.5\nk_range = 1.0\n").unwrap();
    fs::write(&b, "[clean]\nk_range = 1.0\nk_global = 2.5\nseed_unused = 1\n").unwrap();
    let base = ["--input", p(&obs), "--specs", p(&specs), "--demographics", p(&demo)];

    let o1 = tmp.path().join("o1");
    ok(&[&["clean", "--config", p(&a), "--out", p(&o1)][..], &base].concat());
    let m1 = json(&o1.join("manifest.json"));
    assert_eq!(m1["seed"], 5);
    assert_eq!(m1["config"]["k_global"], 2.5);

    let o2 = tmp.path().join("o2");
    ok(&[&["clean", "--config", p(&a), "--out", p(&o2), "--k-global", "4", "--seed", "9"][..], &base].concat());
    let m2 = json(&o2.join("manifest.json"));
    assert_eq!(m2["seed"], 9);
    assert_eq!(m2["config"]["k_global"], 4.0);
    assert_eq!(m2["config"]["k_range"], 1.0);

    let bad = run(&[&["clean", "--config", p(&b), "--out", p(&tmp.path().join("o3"))][..], &base].concat());
    assert_eq!(bad.status.code(), Some(2));

    // same settings written in a different key order hash identically
    let c = tmp.path().join("c.toml");
    fs::write(&c, "[clean]\nk_range = 1.0\nk_global = 2.5\n").unwrap();
    let o4 = tmp.path().join("o4");
    ok(&[&["clean", "--config", p(&c), "--seed", "5", "--out", p(&o4)][..], &base].concat());
    assert_eq!(json(&o4.join("manifest.json"))["config_hash"], m1["config_hash"]);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--n-dims", "x"]).status.code(), Some(2));
    assert_eq!(run(&["train"]).status.code(), Some(2));
}

fn synth(dir: &Path, n: &str) -> PathBuf {
    let out = dir.join("synth");
    ok(&["synth", "--out", p(&out), "--n-persons", n, "--n-features", "6", "--seed", "4"]);
    out
}

const GRID: &str = r#"
n_dims = [2]
monotone_counts = [3]
learning_rates = [0.001, 0.002]
architectures = [{ encoder_widths = [6], decoder_widths = [6] }]
[base]
n_dims = 2
sigma_r = 0.1
monotone_count = 3
poly_degrees = [0.5, 1.0, 2.0]
encoder_widths = [6]
decoder_widths = [6]
learning_rate = 0.001
batch_size = 64
max_epochs = 3
seed = 0
"#;

#[test]
fn tune_writes_one_ledger_entry_per_config_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "300").join("cross_section.csv");
    let grid = tmp.path().join("grid.toml");
    fs::write(&grid, GRID).unwrap();
    let out = tmp.path().join("tune");
    let args = [
        "tune", "--out", p(&out), "--data", p(&data), "--grid", p(&grid), "--seeds", "1,2", "--recon-min", "0",
        "--per-dim", "3",
    ];
    ok(&args);
    let ledger: Vec<PathBuf> = fs::read_dir(out.join("ledger")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(ledger.len(), 2);
    let summary = fs::read(out.join("summary.csv")).unwrap();
    let candidates = json(&out.join("candidates.json"));
    assert!(candidates["selected"].as_array().unwrap().len() <= 3);

    // an interrupted sweep leaves part of the ledger behind
    fs::remove_file(&ledger[0]).unwrap();
    fs::remove_file(out.join("summary.csv")).unwrap();
    ok(&args);
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), summary);
    let manifest = json(&out.join("manifest.json"));
    let listed = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|o| o["path"].as_str().unwrap().starts_with("ledger/"))
        .count();
    assert_eq!(listed, 2);

    let sel = tmp.path().join("select");
    ok(&["select", "--out", p(&sel), "--ledger", p(&out.join("ledger")), "--recon-min", "0", "--per-dim", "1"]);
    assert_eq!(json(&sel.join("candidates.json"))["selected"].as_array().unwrap().len(), 1);
}

fn analysis_fixture(dir: &Path, with_clusters: bool) -> PathBuf {
    let a = dir.join("analysis");
    fs::create_dir_all(a.join("sub")).unwrap();
    fs::write(
        a.join("correlations.csv"),
        "component,r1,r2,r3\nc1,0.9,-0.1,0.2\nc2,0.3,0.8,-0.7\nc3,0,0.5,1\nc4,-1,0.4,0.1\n",
    )
    .unwrap();
    fs::write(
        a.join("sub/cost_groups.csv"),
        "cost_type,mode,group,n,mean,median\n\
         medical,fast_vs_slow,fast_r1,10,1200.5,1000\n\
         medical,fast_vs_slow,slow_r1,10,400,350\n\
         medical,across_dims,fast_r1,9,1100,900\n",
    )
    .unwrap();
    if with_clusters {
        fs::write(
            a.join("rates.csv"),
            "person_id,r1,bioage1,age\nA,0.9,0.45,50\nB,1.1,0.55,50\nC,1.0,0.6,60\nD,1.3,0.91,70\n",
        )
        .unwrap();
        fs::write(a.join("clusters.csv"), "person_id,cluster\nA,0\nB,0\nC,1\nD,1\n").unwrap();
    }
    a
}

#[test]
fn report_draws_one_heatmap_cell_per_table_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let a = analysis_fixture(tmp.path(), true);
    let out = tmp.path().join("report");
    ok(&["report", "--analysis-dir", p(&a), "--out", p(&out)]);
    let heat = fs::read_to_string(out.join("correlation_heatmap.svg")).unwrap();
    assert_eq!(heat.matches("class=\"cell\"").count(), 4 * 3);
    assert!(out.join("cost_means.svg").exists());
    let boxes = fs::read_to_string(out.join("rates_by_cluster.svg")).unwrap();
    assert_eq!(boxes.matches("class=\"box\"").count(), 2);
    assert!(json(&out.join("manifest.json"))["warnings"].as_array().unwrap().is_empty());

    let again = tmp.path().join("again");
    ok(&["report", "--analysis-dir", p(&a), "--out", p(&again)]);
    for f in ["correlation_heatmap.svg", "cost_means.svg", "rates_by_cluster.svg"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn report_without_clusters_warns_and_skips_the_figure() {
    let tmp = tempfile::tempdir().unwrap();
    let a = analysis_fixture(tmp.path(), false);
    let out = tmp.path().join("report");
    ok(&["report", "--analysis-dir", p(&a), "--out", p(&out)]);
    assert!(!out.join("rates_by_cluster.svg").exists());
    let warnings = json(&out.join("manifest.json"))["warnings"].clone();
    assert_eq!(warnings.as_array().unwrap().len(), 1);
}

#[test]
fn report_without_required_table_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let a = analysis_fixture(tmp.path(), true);
    fs::remove_file(a.join("correlations.csv")).unwrap();
    let out = tmp.path().join("report");
    let res = run(&["report", "--analysis-dir", p(&a), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        ok(&["synth", "--out", p(d), "--n-persons", "200", "--raw", "--seed", "8"]);
    }
    for f in [
        "cross_section.csv",
        "true_rates.csv",
        "generator.json",
        "outcomes.csv",
        "diagnoses.csv",
        "costs.csv",
        "observations.csv",
        "specs.csv",
        "demographics.csv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    ok(&["synth", "--out", p(&c), "--n-persons", "200", "--seed", "9"]);
    assert_ne!(fs::read(a.join("true_rates.csv")).unwrap(), fs::read(c.join("true_rates.csv")).unwrap());
    assert_eq!(run(&["synth", "--out", p(&c), "--effect-dim", "0"]).status.code(), Some(2));
}

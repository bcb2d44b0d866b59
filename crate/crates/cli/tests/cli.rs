//! End-to-end runs of the `cdimap` binary on small worlds.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cdi_core::io::{load_report, sha256_file, FittedMap, RunManifest, SeedSource};

const WORLD: &str = r#"
version = 1
seed = 4

[grid]
kind = "hexagonal"
center = { x = 0.0, y = 0.0 }
rings = 2
side = 5.0

[base_station]
x = 0.0
y = -30.0

[link]
gamma_tx_db = 110.0

[sweep]
f_min_hz = 2e9
f_max_hz = 10e9
n_points = 1601

[environment]
scatterers = 30
delay_spread_min_s = 100e-9
delay_spread_max_s = 400e-9
distance_exponent = 2.0
shadowing = { mean_db = 0.0, std_db = 4.0, corr_length_m = 20.0 }
k_factor = { mean_db = 0.0, std_db = 3.0, corr_length_m = 20.0 }
"#;

const CAMPAIGN: &str = r#"
version = 1

[campaign]
epsilon = 0.01
delta = 0.05
d_list = [5, 10]
repetitions = 12
baseline_samples = 10
gamma_tx = 1e11
seed = 2
"#;

fn cdimap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdimap")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cdimap(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn synth(dir: &Path, config: &str, name: &str) -> PathBuf {
    let cfg = write(dir, &format!("{name}.toml"), config);
    let out = dir.join(name);
    ok(&["synth", "--config", s(&cfg), "--out", s(&out)]);
    out
}

fn assert_digests_match(manifest: &Path, base: &Path) {
    let m = RunManifest::load(manifest).unwrap();
    assert!(!m.outputs.is_empty());
    assert!(m.stale_outputs(base).unwrap().is_empty(), "stale outputs in {}", manifest.display());
    assert!(m.finished >= m.started);
}

#[test]
fn synth_is_reproducible_and_never_overwrites() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), WORLD, "a");
    let b = synth(dir.path(), WORLD, "b");
    let files: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    // 19 sweeps, the measurement manifest and the run manifest
    assert_eq!(files.len(), 21);
    for f in files.iter().filter(|f| *f != "run_manifest.json") {
        assert_eq!(sha256_file(&a.join(f)).unwrap(), sha256_file(&b.join(f)).unwrap(), "{f:?} differs");
    }
    assert_digests_match(&a.join("run_manifest.json"), &a);
    let m = RunManifest::load(&a.join("run_manifest.json")).unwrap();
    assert_eq!((m.seed, m.seed_source), (4, SeedSource::Explicit));

    let cfg = dir.path().join("a.toml");
    let again = cdimap(&["synth", "--config", s(&cfg), "--out", s(&a)]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("exists"));
}

#[test]
fn synth_reports_missing_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &WORLD.replace("side = 5.0\n", ""));
    let out = cdimap(&["synth", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("side"));
}

#[test]
fn synth_without_seed_records_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), &WORLD.replace("seed = 4\n", ""), "a");
    let m = RunManifest::load(&a.join("run_manifest.json")).unwrap();
    assert_eq!(m.seed_source, SeedSource::Entropy);
}

#[test]
fn validate_los_world_and_corrupt_records() {
    let dir = tempfile::tempdir().unwrap();
    let los = WORLD.replace("scatterers = 30", "scatterers = 0");
    let m = synth(dir.path(), &los, "los");
    let csv = dir.path().join("validation.csv");
    let stdout = ok(&["validate", "--input", s(&m), "--out", s(&csv)]);
    assert!(stdout.contains("median eta"), "{stdout}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let (implied, geometric) = (
        header.iter().position(|h| *h == "implied_distance_m").unwrap(),
        header.iter().position(|h| *h == "geometric_distance_m").unwrap(),
    );
    // one CIR bin of range: c / (N Δf)
    let bin_m = 299_792_458.0 / (1601.0 * 5e6);
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 19);
    for r in &rows {
        assert!((r[implied] - r[geometric]).abs() <= bin_m, "implied {} vs geometric {}", r[implied], r[geometric]);
    }
    assert_digests_match(&dir.path().join("validation.csv.manifest.json"), dir.path());

    // truncate one sweep file
    let victim = std::fs::read_dir(&m).unwrap().map(|e| e.unwrap().path()).find(|p| p.extension().is_some_and(|e| e == "csv")).unwrap();
    let body = std::fs::read_to_string(&victim).unwrap();
    std::fs::write(&victim, &body[..body.len() / 2]).unwrap();
    let out = cdimap(&["validate", "--input", s(&m)]);
    assert!(!out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("corrupt records (1)"), "{stdout}");
    assert!(stdout.contains(victim.file_name().unwrap().to_str().unwrap()));
}

#[test]
fn validate_rejects_empty_measurement_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = cdimap(&["validate", "--input", s(dir.path())]);
    assert!(!out.status.success());
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    write(
        &empty,
        "manifest.toml",
        "version = 1\nformat = \"csv\"\nlocations = []\n[sweep]\nf_min_hz = 2e9\nf_max_hz = 10e9\nn_points = 11\n",
    );
    let out = cdimap(&["validate", "--input", s(&empty)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no locations"));
}

#[test]
fn fit_is_deterministic_and_needs_three_points() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), WORLD, "w");
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    ok(&["fit", "--input", s(&m), "--train", "10", "--seed", "7", "--out", s(&a)]);
    ok(&["fit", "--input", s(&m), "--train", "10", "--seed", "7", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let fitted = FittedMap::load(&a).unwrap();
    assert_eq!(fitted.entries.len(), 10);
    assert_eq!(fitted.held_out.len(), 9);
    fitted.to_map().unwrap();
    assert_digests_match(&dir.path().join("a.json.manifest.json"), dir.path());

    let out = cdimap(&["fit", "--input", s(&m), "--train", "2", "--seed", "7", "--out", s(&dir.path().join("c.json"))]);
    assert!(!out.status.success());
}

#[test]
fn evaluate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth(dir.path(), WORLD, "w");
    let cfg = write(dir.path(), "campaign.toml", CAMPAIGN);
    let rep = dir.path().join("report");
    ok(&["evaluate", "--input", s(&m), "--config", s(&cfg), "--out", s(&rep)]);
    assert_digests_match(&rep.join("run_manifest.json"), &rep);

    // outputs are never replaced
    let again = cdimap(&["evaluate", "--input", s(&m), "--config", s(&cfg), "--out", s(&rep)]);
    assert!(!again.status.success());

    let report = load_report(&rep).unwrap();
    let genie: Vec<_> = report.records.iter().filter(|r| r.method.as_str() == "genie").collect();
    assert!(!genie.is_empty());
    assert!(genie.iter().all(|r| r.normalized_throughput == Some(1.0)));

    let plots = dir.path().join("plots");
    let stdout = ok(&["report", "--input", s(&rep), "--out", s(&plots)]);
    assert_digests_match(&plots.join("run_manifest.json"), &plots);
    let cdi5 = report.summary(5, cdi_core::rateselect::Method::CdiMap).unwrap();
    assert!(stdout.contains(&format!("{:.4}", cdi5.meta_probability)), "{stdout}");

    let cdf = std::fs::read_to_string(plots.join("outage_cdf_d5_cdi_map.csv")).unwrap();
    let ys: Vec<f64> = cdf.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(ys.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*ys.last().unwrap(), 1.0);

    // every test location of the campaign gets a row
    let map = std::fs::read_to_string(plots.join("location_meta_d5_cdi_map.csv")).unwrap();
    let ids: std::collections::BTreeSet<usize> = report.records_for(5, cdi_core::rateselect::Method::CdiMap).iter().map(|r| r.location_id).collect();
    assert_eq!(map.lines().count() - 1, ids.len());

    let summary = std::fs::read_to_string(plots.join("summary.csv")).unwrap();
    let row = summary.lines().find(|l| l.starts_with("5,cdi_map,")).unwrap();
    let meta: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(meta, cdi5.meta_probability);
}

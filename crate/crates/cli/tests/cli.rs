use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn prva(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prva"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("prva runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file in the directory except the manifest is listed in it.
fn assert_no_orphans(dir: &Path) {
    let listed: BTreeSet<String> = manifest(dir)["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let present: BTreeSet<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    assert_eq!(listed, present);
}

const TWO_CURVES: &str = "v_gs,i_ds,v_ds,branch,unit_i
-2,3.0e-4,0.8,F,A
-1,1.0e-4,0.8,F,A
0,2.0e-4,0.8,F,A
1,4.0e-4,0.8,F,A
-2,4.0e-4,1.0,F,A
-1,1.2e-4,1.0,F,A
0,2.5e-4,1.0,F,A
1,5.0e-4,1.0,F,A
";

#[test]
fn characterize_two_curve_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("curves.csv");
    fs::write(&csv, TWO_CURVES).unwrap();
    let out = tmp.path().join("run");
    let o = prva(&out, &["characterize", "--input", csv.to_str().unwrap(), "--resample-points", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("2 curves"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().nth(1).unwrap().starts_with("0.8,F,4,-2,1,"));
    assert!(out.join("resampled.csv").exists());
    assert_no_orphans(&out);
}

#[test]
fn characterize_synthetic_minimum_at_dirac_point() {
    let tmp = tempfile::tempdir().unwrap();
    let o = prva(tmp.path(), &["characterize", "--synthetic", "--biases", "0.5,0.8,1.0", "--svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row.split(',').nth(7).unwrap(), "-1");
    }
    assert!(fs::read_to_string(tmp.path().join("curves.svg")).unwrap().starts_with("<svg"));
    assert_no_orphans(tmp.path());
}

#[test]
fn characterize_malformed_csv_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    fs::write(&csv, "v_gs,i_ds,v_ds,branch,unit_i\n-1,1e-4,1,F,A\n0,oops,1,F,A\n").unwrap();
    let o = prva(&tmp.path().join("run"), &["characterize", "--input", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn characterize_needs_a_source() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(prva(tmp.path(), &["characterize"]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = prva(dir, &["--seed", "42", "simulate", "--preset", "paper-run-1", "--n", "100000"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["samples.csv", "histogram.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert!(summary["output"]["chi_square_p"].as_f64().unwrap() < 0.01);
    assert_no_orphans(&a);
}

#[test]
fn simulate_ccdf_emits_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = prva(tmp.path(), &["simulate", "--preset", "paper-run-2", "--n", "5000", "--ccdf", "--svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["ccdf_samples.csv", "ccdf_histogram.csv", "histogram.svg", "ccdf_histogram.svg"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["lognormal_fit"]["mu"].is_f64());
    assert!(summary["lognormal_fit"]["sigma"].as_f64().unwrap() > 0.0);
    assert!((summary["ccdf"]["mean"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_no_orphans(tmp.path());
}

#[test]
fn simulate_zero_samples_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = prva(tmp.path(), &["simulate", "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_unknown_preset_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(prva(tmp.path(), &["simulate", "--preset", "paper-run-9"]).status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
seed = 5
out = "from-config"

[simulate]
n = 1000
bins = 16

[simulate.chain]
source_lo = -4.0
source_hi = 4.0
stages = [{ v_ds_bias = 1.0, resistance_ohms = 1500.0 }]
"#,
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_prva"))
        .args(["--config", cfg.to_str().unwrap(), "--seed", "7", "simulate"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("from-config");
    let m = manifest(&out);
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["n"], 1000);
    assert_eq!(m["config"]["chain_name"], "custom");
    assert_eq!(fs::read_to_string(out.join("histogram.csv")).unwrap().lines().count(), 17);
    assert!(fs::read_to_string(out.join("samples.csv")).unwrap().contains("# seed: 7"));
}

#[test]
fn bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[simulate]\nsamples = 3\n").unwrap();
    let o = prva(tmp.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml"));
}

#[test]
fn wavelet_budgets_and_full_reconstruction() {
    let tmp = tempfile::tempdir().unwrap();
    let o = prva(tmp.path(), &["wavelet", "--lognormal", "--samples", "200000", "--k", "8,16,32,full", "--svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("kl_summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[2].parse::<f64>().unwrap() >= -1e-12);
    }
    assert_eq!(rows[3][0], "full");
    assert!(rows[3][2].parse::<f64>().unwrap().abs() < 1e-9);
    for k in ["8", "16", "32", "full"] {
        assert!(tmp.path().join(format!("reconstruction_k{k}.csv")).exists());
    }
    assert_no_orphans(tmp.path());
}

#[test]
fn wavelet_rejects_non_power_of_two() {
    let tmp = tempfile::tempdir().unwrap();
    let hist = tmp.path().join("h.csv");
    let mut text = String::from("bin_lo,bin_hi,count\n");
    for i in 0..12 {
        text.push_str(&format!("{},{},{}\n", i, i + 1, 10 + i));
    }
    fs::write(&hist, text).unwrap();
    let o = prva(&tmp.path().join("run"), &["wavelet", "--histogram", hist.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("run").join("manifest.json").exists());
}

#[test]
fn wavelet_reads_histogram_file() {
    let tmp = tempfile::tempdir().unwrap();
    let hist = tmp.path().join("h.csv");
    let mut text = String::from("bin_lo,bin_hi,count\n");
    for i in 0..16 {
        text.push_str(&format!("{},{},{}\n", i, i + 1, (i as i64 - 8).pow(2) + 1));
    }
    fs::write(&hist, text).unwrap();
    let out = tmp.path().join("run");
    let o = prva(&out, &["wavelet", "--histogram", hist.to_str().unwrap(), "--k", "4,full"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("kl_summary.csv")).unwrap().lines().count(), 3);
}

#[test]
fn wavelet_missing_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(prva(tmp.path(), &["wavelet"]).status.code(), Some(2));
    let o = prva(tmp.path(), &["wavelet", "--histogram", tmp.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn without_timing(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.split(',').take(5).collect::<Vec<_>>().join(",")).collect()
}

#[test]
fn mcbench_sweep_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "mcbench",
        "--samplers",
        "uniform:0:3,lognormal,hwbuffer",
        "--n-grid",
        "100,1000,10000,100000,1000000",
        "--repeats",
        "50",
        "--svg",
    ];
    let o = prva(tmp.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sampler,n,repeats,mean_error,error_ci90,mean_time_s,time_ci90");
    assert_eq!(lines.len(), 1 + 15);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
    assert!(tmp.path().join("error.svg").exists() && tmp.path().join("time.svg").exists());
    assert_no_orphans(tmp.path());
}

#[test]
fn mcbench_repeatable_apart_from_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = prva(dir, &["--seed", "3", "mcbench", "--n-grid", "100,2000", "--repeats", "8", "--hw-source", "circuit"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &Path| without_timing(&fs::read_to_string(d.join("sweep.csv")).unwrap());
    assert_eq!(read(&a), read(&b));
    assert!(read(&a).iter().any(|l| l.starts_with("hwbuffer-samples(len=2000)")));
}

#[test]
fn mcbench_rejects_unknown_sampler() {
    let tmp = tempfile::tempdir().unwrap();
    let o = prva(tmp.path(), &["mcbench", "--samplers", "gaussian"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mcbench_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = prva(tmp.path(), &["mcbench", "--check", "--repeats", "100"]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).matches("[PASS]").count(), 5);
    assert_no_orphans(tmp.path());
}

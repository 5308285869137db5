//! End-to-end runs of the `ruleshap` binary: exit codes, artifact layout,
//! rerun determinism, and the schema errors a caller is most likely to hit.

use std::path::Path;
use std::process::{Command, Output};

use ruleshap::dataset::{fit_preprocessing, ColumnKind};
use ruleshap::rulegen::{Condition, Rule};
use ruleshap::{Dataset, FittedModel};
use tempfile::TempDir;

fn ruleshap_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruleshap"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_ok(args: &[&str]) -> Output {
    let out = ruleshap_bin(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    let out1_arg = out1.display().to_string();
    let out2_arg = out2.display().to_string();
    let base = ["simulate", "--seed", "7", "--n", "120", "--p", "5", "--out"];

    let mut first = base.to_vec();
    first.push(&out1_arg);
    run_ok(&first);
    let dataset = read(&out1.join("dataset.csv"));
    let manifest = read(&out1.join("manifest.json"));
    assert!(out1.join("timings.json").exists());

    // Rerunning into the same directory must reproduce every byte.
    run_ok(&first);
    assert_eq!(read(&out1.join("dataset.csv")), dataset);
    assert_eq!(read(&out1.join("manifest.json")), manifest);

    // A different output directory changes the manifest's recorded config
    // but not the data.
    let mut second = base.to_vec();
    second.push(&out2_arg);
    run_ok(&second);
    assert_eq!(read(&out2.join("dataset.csv")), dataset);

    let header = dataset.lines().next().unwrap();
    assert_eq!(header, "x1,x2,x3,x4,x5,y");
    assert_eq!(dataset.lines().count(), 121);
}

#[test]
fn simulate_rejects_too_few_features() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bad");
    let out_arg = out.display().to_string();
    let result = ruleshap_bin(&["simulate", "--p", "4", "--out", &out_arg]);
    assert_eq!(exit_code(&result), 1);
    assert!(stderr_of(&result).starts_with("error:"));
}

#[test]
fn unknown_flags_and_help_use_the_documented_exit_codes() {
    let help = ruleshap_bin(&["--help"]);
    assert_eq!(exit_code(&help), 0);
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("simulate") && text.contains("explain"));

    let bad = ruleshap_bin(&["simulate", "--definitely-not-a-flag"]);
    assert_eq!(exit_code(&bad), 1);
}

#[test]
fn fit_explain_report_chain_produces_consistent_artifacts() {
    let dir = TempDir::new().unwrap();
    let data_dir = dir.path().join("data");
    let fit_dir = dir.path().join("fit");
    let explain_dir = dir.path().join("explain");
    let report_dir = dir.path().join("report");
    let data_arg = data_dir.display().to_string();
    run_ok(&[
        "simulate", "--seed", "3", "--n", "120", "--p", "5", "--out", &data_arg,
    ]);
    let dataset_path = data_dir.join("dataset.csv").display().to_string();

    // A desk-scale profile: a small forest and a short chain keep the test
    // quick while still exercising every stage.
    let config_path = dir.path().join("small.json");
    std::fs::write(
        &config_path,
        "{\"smoothing\": {\"n_trees\": 24, \"max_rules\": 80},\n \
         \"gibbs\": {\"total_iters\": 300, \"burn_in\": 100}}\n",
    )
    .unwrap();
    let config_arg = config_path.display().to_string();
    let fit_arg = fit_dir.display().to_string();
    let fit_args = [
        "fit",
        "--data",
        &dataset_path,
        "--outcome",
        "y",
        "--config",
        &config_arg,
        "--seed",
        "11",
        "--out",
        &fit_arg,
    ];
    let fit_out = run_ok(&fit_args);
    let stdout = String::from_utf8_lossy(&fit_out.stdout);
    for name in ["model.json", "rules.jsonl", "draws.csv", "manifest.json"] {
        assert!(fit_dir.join(name).exists(), "missing artifact {name}");
        assert!(stdout.contains(name), "stdout should announce {name}");
    }

    // The whole fit is seeded, so rerunning rewrites identical bytes.
    let snapshot: Vec<String> = ["model.json", "rules.jsonl", "draws.csv", "manifest.json"]
        .iter()
        .map(|name| read(&fit_dir.join(name)))
        .collect();
    run_ok(&fit_args);
    for (name, before) in ["model.json", "rules.jsonl", "draws.csv", "manifest.json"]
        .iter()
        .zip(&snapshot)
    {
        assert_eq!(&read(&fit_dir.join(name)), before, "{name} changed on rerun");
    }

    let explain_arg = explain_dir.display().to_string();
    run_ok(&[
        "explain",
        "--data",
        &dataset_path,
        "--outcome",
        "y",
        "--fit",
        &fit_arg,
        "--out",
        &explain_arg,
    ]);
    let effects = read(&explain_dir.join("effects.csv"));
    let mut lines = effects.lines();
    assert_eq!(
        lines.next().unwrap(),
        "row_id,feature,mean,lower,upper,significant"
    );
    // Default probes are the 120 training rows; five features per probe.
    assert_eq!(lines.count(), 120 * 5);
    let interactions = read(&explain_dir.join("interactions.csv"));
    assert_eq!(
        interactions.lines().next().unwrap(),
        "row_id,feature_a,feature_b,mean,lower,upper,significant"
    );
    assert_eq!((interactions.lines().count() - 1) % 120, 0);

    let grouping_path = dir.path().join("grouping.csv");
    std::fs::write(
        &grouping_path,
        "feature,group\nx1,signal\nx2,signal\nx3,signal\nx4,signal\nx5,noise\n",
    )
    .unwrap();
    let grouping_arg = grouping_path.display().to_string();
    let effects_arg = explain_dir.join("effects.csv").display().to_string();
    let interactions_arg = explain_dir.join("interactions.csv").display().to_string();
    let report_arg = report_dir.display().to_string();
    run_ok(&[
        "report",
        "--effects",
        &effects_arg,
        "--interactions",
        &interactions_arg,
        "--grouping",
        &grouping_arg,
        "--out",
        &report_arg,
    ]);
    let rates = read(&report_dir.join("rates.csv"));
    let rows: Vec<&str> = rates.lines().collect();
    assert_eq!(rows[0], "group,rejection_rate");
    assert_eq!(rows.len(), 3, "one row per group: {rates}");
    for row in &rows[1..] {
        let rate: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&rate), "rate out of range in {row}");
    }
    assert!(report_dir.join("interaction_summary.csv").exists());

    // A grouping that misses a reported feature is a usage error.
    let partial_path = dir.path().join("partial.csv");
    std::fs::write(&partial_path, "feature,group\nx1,signal\n").unwrap();
    let partial_arg = partial_path.display().to_string();
    let missing = ruleshap_bin(&[
        "report",
        "--effects",
        &effects_arg,
        "--grouping",
        &partial_arg,
        "--out",
        &report_arg,
    ]);
    assert_eq!(exit_code(&missing), 1);
    assert!(stderr_of(&missing).contains("x2"));
}

/// A two-column dataset, a one-rule model, and a draws file with every
/// coefficient at zero, written straight to a directory the binary can load.
fn write_null_fit(dir: &Path) -> std::path::PathBuf {
    let x1: Vec<f64> = (0..8).map(|i| i as f64).collect();
    let x2: Vec<f64> = (0..8).map(|i| f64::from(i % 2 == 0) * 3.0 - 1.0).collect();
    let data = Dataset::new(
        vec!["x1".into(), "x2".into()],
        vec![ColumnKind::Continuous, ColumnKind::Continuous],
        vec![x1, x2],
        vec![0.0; 8],
        "y".into(),
    )
    .unwrap();
    let prep = fit_preprocessing(&data, 0.025, 0.975).unwrap();
    let rule = Rule {
        conditions: vec![Condition::at_least(0, 4.0)],
        support: 0.5,
        depth: 1,
        scale: 1.0,
    };
    let model = FittedModel::new(&data, prep, vec![rule]).unwrap();
    model.save(&dir.join("model.json")).unwrap();

    let mut draws = String::from("a_1,b_1,b_2,sigma2,tau,tau_L,tau_R\n");
    for _ in 0..4 {
        draws.push_str("0,0,0,1,1,1,1\n");
    }
    std::fs::write(dir.join("draws.csv"), draws).unwrap();

    data.write_csv(&dir.join("dataset.csv")).unwrap();
    dir.join("dataset.csv")
}

#[test]
fn a_zero_coefficient_model_reports_no_effects() {
    let dir = TempDir::new().unwrap();
    let dataset_path = write_null_fit(dir.path());
    let probes_path = dir.path().join("probes.csv");
    std::fs::write(&probes_path, "x1,x2\n1,2\n5,-1\n").unwrap();

    let out_dir = dir.path().join("explain");
    let data_arg = dataset_path.display().to_string();
    let fit_arg = dir.path().display().to_string();
    let probes_arg = probes_path.display().to_string();
    let out_arg = out_dir.display().to_string();
    run_ok(&[
        "explain",
        "--data",
        &data_arg,
        "--outcome",
        "y",
        "--fit",
        &fit_arg,
        "--probes",
        &probes_arg,
        "--out",
        &out_arg,
    ]);
    let effects = read(&out_dir.join("effects.csv"));
    let rows: Vec<&str> = effects.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 2);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        for value in &fields[2..5] {
            assert_eq!(value.parse::<f64>().unwrap(), 0.0, "nonzero cell in {row}");
        }
        assert_eq!(fields[5], "false");
    }
}

#[test]
fn explain_names_the_missing_probe_column() {
    let dir = TempDir::new().unwrap();
    let dataset_path = write_null_fit(dir.path());
    let probes_path = dir.path().join("probes.csv");
    std::fs::write(&probes_path, "x1\n1\n").unwrap();

    let data_arg = dataset_path.display().to_string();
    let fit_arg = dir.path().display().to_string();
    let probes_arg = probes_path.display().to_string();
    let out_arg = dir.path().join("explain").display().to_string();
    let result = ruleshap_bin(&[
        "explain",
        "--data",
        &data_arg,
        "--outcome",
        "y",
        "--fit",
        &fit_arg,
        "--probes",
        &probes_arg,
        "--out",
        &out_arg,
    ]);
    assert_eq!(exit_code(&result), 1);
    assert!(
        stderr_of(&result).contains("x2 (in probes file)"),
        "stderr was: {}",
        stderr_of(&result)
    );
}

#[test]
fn fit_expands_factor_columns_into_dummies() {
    let dir = TempDir::new().unwrap();
    let data_path = dir.path().join("mixed.csv");
    let mut csv = String::from("x1,x2,color,y\n");
    for i in 0..60 {
        let x1 = (i * 7 % 13) as f64;
        let x2 = (i * 5 % 11) as f64;
        let color = ["a", "b", "c", "d", "e"][i % 5];
        let y = x1 - x2 + (i % 3) as f64;
        csv.push_str(&format!("{x1},{x2},{color},{y}\n"));
    }
    std::fs::write(&data_path, csv).unwrap();

    let config_path = dir.path().join("tiny.json");
    std::fs::write(
        &config_path,
        "{\"smoothing\": {\"n_trees\": 12, \"max_rules\": 60}}\n",
    )
    .unwrap();

    let out_dir = dir.path().join("fit");
    let data_arg = data_path.display().to_string();
    let config_arg = config_path.display().to_string();
    let out_arg = out_dir.display().to_string();
    run_ok(&[
        "fit",
        "--data",
        &data_arg,
        "--outcome",
        "y",
        "--config",
        &config_arg,
        "--iters",
        "200",
        "--burnin",
        "50",
        "--out",
        &out_arg,
    ]);
    let model = read(&out_dir.join("model.json"));
    for level in ["a", "b", "c", "d", "e"] {
        assert!(
            model.contains(&format!("color={level}")),
            "model.json lacks the color={level} dummy"
        );
    }
}

#[test]
fn a_missing_input_file_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let out_arg = dir.path().join("fit").display().to_string();
    let result = ruleshap_bin(&[
        "fit",
        "--data",
        "/definitely/not/here.csv",
        "--outcome",
        "y",
        "--out",
        &out_arg,
    ]);
    assert_eq!(exit_code(&result), 2);
    assert!(stderr_of(&result).contains("not/here.csv"));
}

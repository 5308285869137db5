//! Pipeline orchestration behind the `ruleshap` binary: resolved run
//! configuration, the four commands, and the manifest/timing artifacts
//! that make every run reproducible from its output directory alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use ruleshap::dataset::{
    fit_preprocessing, friedman_generate, load_csv, load_grouping, FriedmanConfig,
};
use ruleshap::error::{Error, Result};
use ruleshap::horseshoe::{gibbs_fit, GibbsConfig, PosteriorDraws};
use ruleshap::inference::{effect_report, interaction_report};
use ruleshap::model::{build_design, FittedModel};
use ruleshap::rulegen::{
    extract_rules, residualize, smoothing_forest, write_rules_jsonl, SmoothingConfig,
};
use ruleshap::shapley::model_shapley;

/// Winsorization quantiles for linear-term preprocessing.
const WINSOR_LOWER: f64 = 0.025;
const WINSOR_UPPER: f64 = 0.975;

/// Everything a run depends on, serialized verbatim into the manifest.
/// The master `seed` overrides the per-stage seeds before any compute, so
/// one value governs the whole pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    /// Input dataset CSV (fit and explain).
    pub input: Option<PathBuf>,
    /// Outcome column name in the input dataset.
    pub outcome: String,
    /// Synthetic-data settings (simulate only).
    pub friedman: Option<FriedmanConfig>,
    pub smoothing: SmoothingConfig,
    pub gibbs: GibbsConfig,
    /// Interval miscoverage level for significance flags.
    pub alpha: f64,
    /// Output directory; every artifact lands under it.
    pub out: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            input: None,
            outcome: "y".into(),
            friedman: if command == "simulate" {
                Some(FriedmanConfig {
                    n: 1000,
                    p: 10,
                    rho: 0.3,
                    sigma2: 100.0,
                    seed: 0,
                    binary: false,
                })
            } else {
                None
            },
            smoothing: SmoothingConfig::default(),
            gibbs: GibbsConfig::default(),
            alpha: 0.05,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }

    /// Push the master seed into every seeded stage, overriding any
    /// per-stage seed from a config file.
    pub fn propagate_seed(&mut self) {
        self.smoothing.seed = self.seed;
        self.gibbs.seed = self.seed;
        if let Some(friedman) = &mut self.friedman {
            friedman.seed = self.seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.command.as_str() {
            "simulate" | "fit" | "explain" | "report" => {}
            other => {
                return Err(Error::InvalidConfig(format!("unknown command {other:?}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        self.gibbs.validate()?;
        if let Some(friedman) = &self.friedman {
            friedman.validate()?;
        }
        Ok(())
    }
}

/// Overlay a JSON config file onto the current configuration: objects merge
/// key by key, scalars replace. Keys absent from the defaults are rejected
/// so typos fail loudly instead of being ignored.
pub fn apply_config_file(cfg: &RunConfig, path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    let overlay: serde_json::Value = serde_json::from_str(&text)?;
    let mut base = serde_json::to_value(cfg)?;
    merge_value(&mut base, overlay, "")?;
    Ok(serde_json::from_value(base)?)
}

fn merge_value(base: &mut serde_json::Value, overlay: serde_json::Value, at: &str) -> Result<()> {
    let serde_json::Value::Object(fields) = overlay else {
        return Err(Error::InvalidConfig(format!(
            "config {} must be a JSON object",
            if at.is_empty() { "file" } else { at }
        )));
    };
    let serde_json::Value::Object(target) = base else {
        return Err(Error::InvalidConfig(format!("config key {at} is not overridable")));
    };
    for (key, value) in fields {
        let path = if at.is_empty() { key.clone() } else { format!("{at}.{key}") };
        match target.get_mut(&key) {
            Some(slot) if slot.is_object() && value.is_object() => {
                merge_value(slot, value, &path)?;
            }
            Some(slot) => *slot = value,
            None => {
                return Err(Error::InvalidConfig(format!("unknown config key {path}")));
            }
        }
    }
    Ok(())
}

/// Artifacts written by a command plus warnings for the user; warnings are
/// also recorded in the manifest.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Per-stage wall-clock times. These land in `timings.json`, kept apart
/// from the manifest so the manifest stays byte-identical across reruns.
#[derive(Default)]
struct Timings {
    stages: Vec<(String, f64)>,
}

impl Timings {
    /// Run one pipeline stage, recording its duration and attaching its
    /// name to any error.
    fn stage<T>(&mut self, name: &str, body: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let result = body().map_err(|e| e.in_stage(name));
        self.stages.push((name.to_string(), start.elapsed().as_secs_f64()));
        result
    }

    fn write(&self, dir: &Path) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Entry<'a> {
            stage: &'a str,
            seconds: f64,
        }
        let entries: Vec<Entry> = self
            .stages
            .iter()
            .map(|(stage, seconds)| Entry { stage, seconds: *seconds })
            .collect();
        let path = dir.join("timings.json");
        let mut text = serde_json::to_string_pretty(&entries)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    inputs: BTreeMap<&'static str, String>,
    artifacts: Vec<String>,
    warnings: &'a [String],
}

fn write_manifest(
    cfg: &RunConfig,
    inputs: BTreeMap<&'static str, String>,
    artifacts: &[PathBuf],
    warnings: &[String],
) -> Result<PathBuf> {
    let manifest = Manifest {
        tool: "ruleshap",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        inputs,
        artifacts: artifacts
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string())
            })
            .collect(),
        warnings,
    };
    let path = cfg.out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| Error::io(format!("creating {}", cfg.out.display()), e))
}

/// Generate a synthetic benchmark dataset and write it as CSV.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    let friedman = cfg
        .friedman
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("simulate needs synthetic-data settings".into()))?;
    ensure_out_dir(cfg)?;
    let mut timings = Timings::default();
    let data = timings.stage("generate", || friedman_generate(friedman))?;
    let dataset_path = cfg.out.join("dataset.csv");
    timings.stage("persist", || data.write_csv(&dataset_path))?;
    let mut artifacts = vec![dataset_path];
    artifacts.push(write_manifest(cfg, BTreeMap::new(), &artifacts, &[])?);
    artifacts.push(timings.write(&cfg.out)?);
    Ok(CommandOutput {
        artifacts,
        warnings: Vec::new(),
    })
}

/// Fit the full pipeline on a dataset: preprocessing, residualized
/// smoothing forest, rule extraction, and the horseshoe sampler. Persists
/// the model, the rules, and the posterior draws.
pub fn cmd_fit(cfg: &RunConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::InvalidConfig("fit needs an input dataset (--data)".into()))?;
    ensure_out_dir(cfg)?;
    let mut timings = Timings::default();
    let mut warnings = Vec::new();

    let (data, load_report) = timings.stage("load-data", || load_csv(&input, &cfg.outcome))?;
    if let Some(warning) = load_report.warning() {
        warnings.push(warning);
    }
    let prep = timings.stage("preprocess", || {
        cfg.smoothing.validate(data.p())?;
        fit_preprocessing(&data, WINSOR_LOWER, WINSOR_UPPER)
    })?;
    let residuals = timings.stage("residualize", || residualize(&data, &prep, &cfg.gibbs))?;
    let forest = timings.stage("smoothing-forest", || {
        smoothing_forest(&data, &residuals[..], &cfg.smoothing)
    })?;
    let rules = timings.stage("extract-rules", || {
        Ok(extract_rules(forest.trees(), &data, &cfg.smoothing))
    })?;
    if rules.is_empty() {
        warnings.push("no rules were extracted; fitting linear terms only".into());
    }
    let model = FittedModel::new(&data, prep, rules)?;
    let (design, _) = timings.stage("design", || {
        build_design(&data, &model.preprocessing, &model.rules)
    })?;
    let draws = timings.stage("gibbs", || gibbs_fit(&design, &cfg.gibbs))?;

    let model_path = cfg.out.join("model.json");
    let rules_path = cfg.out.join("rules.jsonl");
    let draws_path = cfg.out.join("draws.csv");
    timings.stage("persist", || {
        model.save(&model_path)?;
        write_rules_jsonl(&model.rules, &rules_path)?;
        draws.write_csv(&draws_path)
    })?;
    let mut artifacts = vec![model_path, rules_path, draws_path];
    let inputs = BTreeMap::from([("data", input.display().to_string())]);
    artifacts.push(write_manifest(cfg, inputs, &artifacts, &warnings)?);
    artifacts.push(timings.write(&cfg.out)?);
    Ok(CommandOutput { artifacts, warnings })
}

fn check_schema(expected: &[String], found: &[String], what: &str) -> Result<()> {
    for name in expected {
        if !found.contains(name) {
            return Err(Error::MissingColumn(format!("{name} (in {what})")));
        }
    }
    for name in found {
        if !expected.contains(name) {
            return Err(Error::InvalidConfig(format!(
                "{what} has unexpected column {name:?}"
            )));
        }
    }
    Ok(())
}

/// Read a probe matrix: a headed CSV carrying at least the model's feature
/// columns, in any order. Unparsable entries become NaN so the Shapley
/// stage records them as skipped probes instead of aborting the run.
fn load_probes(path: &Path, columns: &[String]) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading probes {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let position: Vec<usize> = columns
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(format!("{name} (in probes file)")))
        })
        .collect::<Result<_>>()?;
    let mut probes = Vec::new();
    for record in reader.records() {
        let record = record?;
        probes.push(
            position
                .iter()
                .map(|&idx| record.get(idx).and_then(|v| v.trim().parse().ok()).unwrap_or(f64::NAN))
                .collect(),
        );
    }
    Ok(probes)
}

/// Compute posterior Shapley reports for a fitted model. Reads the model
/// and draws from `fit_dir`, evaluates at the probe file's rows (or, by
/// default, at the training rows), and writes the effect and interaction
/// report CSVs.
pub fn cmd_explain(
    cfg: &RunConfig,
    fit_dir: &Path,
    probes_path: Option<&Path>,
    with_interactions: bool,
) -> Result<CommandOutput> {
    cfg.validate()?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::InvalidConfig("explain needs the training dataset (--data)".into()))?;
    ensure_out_dir(cfg)?;
    let mut timings = Timings::default();
    let mut warnings = Vec::new();

    let model = timings.stage("load-model", || FittedModel::load(&fit_dir.join("model.json")))?;
    let draws = timings.stage("load-draws", || {
        PosteriorDraws::read_csv(&fit_dir.join("draws.csv"))
    })?;
    let data = timings.stage("load-data", || {
        let (data, report) = load_csv(&input, &cfg.outcome)?;
        if let Some(warning) = report.warning() {
            warnings.push(warning);
        }
        check_schema(&model.column_names, data.names(), "dataset")?;
        Ok(data)
    })?;
    let probes = timings.stage("load-probes", || match probes_path {
        Some(path) => load_probes(path, &model.column_names),
        None => Ok((0..data.n()).map(|i| data.row(i)).collect()),
    })?;
    let cube = timings.stage("shapley", || {
        model_shapley(&model, &draws, &data, &probes, with_interactions)
    })?;

    let effects_path = cfg.out.join("effects.csv");
    let mut artifacts = Vec::new();
    timings.stage("report", || {
        let effects = effect_report(&cube, cfg.alpha)?;
        warnings.extend(effects.warnings().iter().cloned());
        effects.write_csv(&effects_path)?;
        artifacts.push(effects_path.clone());
        if with_interactions {
            let interactions = interaction_report(&cube, cfg.alpha)?;
            let interactions_path = cfg.out.join("interactions.csv");
            interactions.write_csv(&interactions_path)?;
            artifacts.push(interactions_path);
        }
        Ok(())
    })?;
    let mut inputs = BTreeMap::from([
        ("data", input.display().to_string()),
        ("fit", fit_dir.display().to_string()),
    ]);
    if let Some(path) = probes_path {
        inputs.insert("probes", path.display().to_string());
    }
    artifacts.push(write_manifest(cfg, inputs, &artifacts, &warnings)?);
    artifacts.push(timings.write(&cfg.out)?);
    Ok(CommandOutput { artifacts, warnings })
}

fn read_report_csv(path: &Path, expected_header: &[&str]) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading report {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<&str> = reader.headers()?.iter().collect();
    if header != expected_header {
        return Err(Error::InvalidConfig(format!(
            "{} has header {header:?}, expected {expected_header:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(String::from).collect());
    }
    Ok(rows)
}

/// Aggregate explain outputs: per-group rejection rates from the effect
/// report and, when an interaction report is given, per-pair significance
/// counts. Rates here treat every CSV row as one evaluated probe.
pub fn cmd_report(
    cfg: &RunConfig,
    effects_path: &Path,
    interactions_path: Option<&Path>,
    grouping_path: &Path,
) -> Result<CommandOutput> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let mut timings = Timings::default();

    let grouping = timings.stage("load-grouping", || load_grouping(grouping_path))?;
    let rows = timings.stage("load-effects", || {
        read_report_csv(
            effects_path,
            &["row_id", "feature", "mean", "lower", "upper", "significant"],
        )
    })?;
    let rates_path = cfg.out.join("rates.csv");
    timings.stage("rates", || {
        let mut per_feature: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for row in &rows {
            let entry = per_feature.entry(&row[1]).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += usize::from(row[5] == "true");
        }
        let mut per_group: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for (feature, (total, hits)) in &per_feature {
            let group = grouping.get(*feature).ok_or_else(|| {
                Error::InvalidConfig(format!("feature {feature} is missing from the grouping"))
            })?;
            let entry = per_group.entry(group).or_insert((0.0, 0));
            entry.0 += *hits as f64 / *total as f64;
            entry.1 += 1;
        }
        let mut out = String::from("group,rejection_rate\n");
        for (group, (sum, count)) in per_group {
            out.push_str(&format!("{group},{}\n", sum / count as f64));
        }
        fs::write(&rates_path, out).map_err(|e| Error::io(rates_path.display().to_string(), e))
    })?;
    let mut artifacts = vec![rates_path];

    if let Some(path) = interactions_path {
        let rows = timings.stage("load-interactions", || {
            read_report_csv(
                path,
                &["row_id", "feature_a", "feature_b", "mean", "lower", "upper", "significant"],
            )
        })?;
        let heat_path = cfg.out.join("interaction_summary.csv");
        timings.stage("heat", || {
            let mut per_pair: BTreeMap<(&str, &str), (usize, f64)> = BTreeMap::new();
            for row in &rows {
                let entry = per_pair.entry((&row[1], &row[2])).or_insert((0, 0.0));
                if row[5] == "true" {
                    let mean: f64 = row[3].parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad mean value {:?} in {}", row[3], path.display()))
                    })?;
                    entry.0 += 1;
                    entry.1 += mean.abs();
                }
            }
            let mut out = String::from("feature_a,feature_b,significant_count,mean_abs_significant\n");
            for ((a, b), (count, sum)) in per_pair {
                let mean_abs = if count > 0 { sum / count as f64 } else { 0.0 };
                out.push_str(&format!("{a},{b},{count},{mean_abs}\n"));
            }
            fs::write(&heat_path, out).map_err(|e| Error::io(heat_path.display().to_string(), e))
        })?;
        artifacts.push(heat_path);
    }

    let mut inputs = BTreeMap::from([
        ("effects", effects_path.display().to_string()),
        ("grouping", grouping_path.display().to_string()),
    ]);
    if let Some(path) = interactions_path {
        inputs.insert("interactions", path.display().to_string());
    }
    artifacts.push(write_manifest(cfg, inputs, &artifacts, &[])?);
    artifacts.push(timings.write(&cfg.out)?);
    Ok(CommandOutput {
        artifacts,
        warnings: Vec::new(),
    })
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ruleshap::error::Result;
use ruleshap_cli::{
    apply_config_file, cmd_explain, cmd_fit, cmd_report, cmd_simulate, CommandOutput, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "ruleshap",
    version,
    about = "Rule-ensemble regression with posterior Shapley attribution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset
    Simulate(SimulateArgs),
    /// Fit the rule ensemble and the horseshoe posterior on a dataset
    Fit(FitArgs),
    /// Compute posterior Shapley effect and interaction reports
    Explain(ExplainArgs),
    /// Aggregate report CSVs into grouped summary tables
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Master seed applied to every random stage
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interval miscoverage level for significance flags
    #[arg(long)]
    alpha: Option<f64>,
    /// Total Gibbs iterations
    #[arg(long)]
    iters: Option<usize>,
    /// Gibbs burn-in iterations
    #[arg(long)]
    burnin: Option<usize>,
    /// Short chain (2000 iterations, 500 burn-in) for desk-scale runs
    #[arg(long)]
    fast: bool,
}

impl CommonArgs {
    /// Defaults, then the config file, then --fast, then explicit flags.
    fn resolve(&self, command: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(command);
        if let Some(path) = &self.config {
            cfg = apply_config_file(&cfg, path)?;
        }
        if self.fast {
            cfg.gibbs.total_iters = 2000;
            cfg.gibbs.burn_in = 500;
        }
        if let Some(v) = self.iters {
            cfg.gibbs.total_iters = v;
        }
        if let Some(v) = self.burnin {
            cfg.gibbs.burn_in = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.propagate_seed();
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Rows to generate
    #[arg(long)]
    n: Option<usize>,
    /// Feature count (at least 5)
    #[arg(long)]
    p: Option<usize>,
    /// Pairwise feature correlation
    #[arg(long)]
    rho: Option<f64>,
    /// Outcome noise variance
    #[arg(long)]
    sigma2: Option<f64>,
    /// Emit the binary-outcome variant
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training dataset CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Outcome column name
    #[arg(long)]
    outcome: Option<String>,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training dataset CSV (interventional background)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Outcome column name
    #[arg(long)]
    outcome: Option<String>,
    /// Directory holding model.json and draws.csv (defaults to --out)
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Probe rows CSV; defaults to the training rows
    #[arg(long)]
    probes: Option<PathBuf>,
    /// Skip the pairwise interaction report
    #[arg(long)]
    no_interactions: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Effect report CSV from explain (defaults to <out>/effects.csv)
    #[arg(long)]
    effects: Option<PathBuf>,
    /// Interaction report CSV from explain
    #[arg(long)]
    interactions: Option<PathBuf>,
    /// CSV mapping feature names to group labels
    #[arg(long)]
    grouping: PathBuf,
}

fn run(cli: Cli) -> Result<CommandOutput> {
    match cli.command {
        Command::Simulate(args) => {
            let mut cfg = args.common.resolve("simulate")?;
            let friedman = cfg.friedman.as_mut().expect("simulate defaults include friedman");
            if let Some(v) = args.n {
                friedman.n = v;
            }
            if let Some(v) = args.p {
                friedman.p = v;
            }
            if let Some(v) = args.rho {
                friedman.rho = v;
            }
            if let Some(v) = args.sigma2 {
                friedman.sigma2 = v;
            }
            if args.binary {
                friedman.binary = true;
            }
            cmd_simulate(&cfg)
        }
        Command::Fit(args) => {
            let mut cfg = args.common.resolve("fit")?;
            if let Some(v) = args.data {
                cfg.input = Some(v);
            }
            if let Some(v) = args.outcome {
                cfg.outcome = v;
            }
            cmd_fit(&cfg)
        }
        Command::Explain(args) => {
            let mut cfg = args.common.resolve("explain")?;
            if let Some(v) = args.data {
                cfg.input = Some(v);
            }
            if let Some(v) = args.outcome {
                cfg.outcome = v;
            }
            let fit_dir = args.fit.unwrap_or_else(|| cfg.out.clone());
            cmd_explain(&cfg, &fit_dir, args.probes.as_deref(), !args.no_interactions)
        }
        Command::Report(args) => {
            let cfg = args.common.resolve("report")?;
            let effects = args.effects.unwrap_or_else(|| cfg.out.join("effects.csv"));
            cmd_report(&cfg, &effects, args.interactions.as_deref(), &args.grouping)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage problem, which the pipeline classes as exit code 1.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(output) => {
            for warning in &output.warnings {
                eprintln!("warning: {warning}");
            }
            for artifact in &output.artifacts {
                println!("wrote {}", artifact.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

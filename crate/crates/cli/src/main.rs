use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use byzopt::analysis::Verdict;
use byzopt::harness::runner::default_output_dir;
use byzopt::harness::{
    analyze_dir, apply_override, check_graph, find, run_to_dir, split_override, HarnessError, RunConfig, LIBRARY,
};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "byzopt", version, about = "Run and verify Byzantine fault-tolerant optimization scenarios")]
struct Cli {
    /// Directory that holds run directories when --out is not given.
    #[arg(long, global = true, env = "BYZOPT_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace and summary.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (default: <output-root>/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report Conditions 1 and 2 for a scenario's graph, with witnesses.
    CheckGraph {
        #[command(flatten)]
        source: Source,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the matrix-analysis battery on an existing run directory.
    Analyze { dir: PathBuf },
    /// List the built-in scenarios.
    ListScenarios {
        /// Also write each scenario's config to <dir>/<name>.json.
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// JSON config file.
    #[arg(required_unless_present = "scenario", conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario name instead of a file.
    #[arg(long)]
    scenario: Option<String>,
    /// Override a config field, e.g. --set rounds=500 --set adversary.value=3.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

/// Exit code for configuration errors; other failures use 1.
const EXIT_CONFIG: u8 = 2;

fn load(source: &Source) -> Result<RunConfig> {
    let mut doc: Value = match (&source.config, &source.scenario) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(name)) => match find(name) {
            Some(entry) => entry.config().to_value(),
            None => bail!("unknown scenario {name:?}; see list-scenarios"),
        },
        (None, None) => bail!("give a config file or --scenario"),
    };
    for spec in &source.overrides {
        let (path, raw) = split_override(spec).map_err(anyhow::Error::msg)?;
        apply_override(&mut doc, path, raw).map_err(anyhow::Error::msg)?;
    }
    Ok(RunConfig::from_value(&doc)?)
}

fn run(root: Option<&Path>, source: &Source, out: Option<PathBuf>) -> Result<()> {
    let config = load(source)?;
    let dir = out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| default_output_dir(root, &config.name));
    let prepared = config.prepare()?;
    let exec = run_to_dir(&prepared, &dir)?;
    let s = &exec.summary;
    println!("{} ({}, {} rounds) -> {}", s.name, s.algorithm, s.rounds, dir.display());
    println!("  config hash    {}", s.config_hash);
    println!("  optimum        [{}, {}]", s.optimum.lo, s.optimum.hi);
    println!("  final spread   {:e}", s.final_spread);
    println!("  final dist     {:e}", s.final_dist);
    if let Some(o) = &s.oracle {
        println!("  oracle gap     {:e} ({})", o.max_deviation, if o.matches { "identical" } else { "DIFFERS" });
    }
    if s.degenerate_rounds > 0 {
        println!("  {} round(s) where some agent heard at most 2f values", s.degenerate_rounds);
    }
    if s.expected_failure {
        println!("  expected failure: this scenario demonstrates the algorithm missing the optimum");
    }
    if prepared.config.analysis.enabled {
        println!("  analysis written to {}", dir.join(byzopt::harness::runner::ANALYSIS_FILE).display());
    }
    Ok(())
}

fn check(source: &Source, json: bool) -> Result<()> {
    let mut config = load(source)?;
    // the graph report is wanted precisely when condition 1 may fail
    config.adversarial_demo = true;
    let report = check_graph(&config.prepare()?)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    let c1 = &report.condition1;
    println!("n = {}, f = {}, sp(A) = {}", report.n, report.f, report.sparsity);
    println!("condition 1 (source component >= {}): {}", c1.required, c1.holds);
    if let Some(w) = &c1.witness {
        println!("  faulty set {}", w.faulty);
        println!("  reduced graph edges {:?}", w.reduced.edges());
        println!("  source component {}", w.source);
        println!("  {}", serde_json::to_string(&w.deficit)?);
    }
    match &report.condition2 {
        Some(c2) => {
            println!("condition 2: {}", c2.holds);
            if let Some(p) = &c2.witness {
                println!("  L = {}, R = {}, C = {}, F = {}", p.left, p.right, p.center, p.faulty);
            }
        }
        None => println!("condition 2: not checked (graph too large)"),
    }
    Ok(())
}

fn analyze(dir: &Path) -> Result<bool> {
    let out = analyze_dir(dir)?;
    let r = &out.report;
    println!("{} (config {})", out.name, out.config_hash);
    println!(
        "  beta = {:e}, tau = {}, nu = {}, ln beta^nu = {:.3}",
        r.mixing.beta, r.mixing.tau, r.mixing.nu, r.mixing.ln_beta_nu
    );
    for (name, verdict) in r.verdicts() {
        println!("  {name:<15} {verdict:?}");
    }
    println!(
        "  uub bound at t = {} is {:e}, at t = {} is {:e} ({})",
        r.uub.decay_from,
        r.uub.bound_at_decay_from,
        r.uub.t_max,
        r.uub.bound_at_t_max,
        if r.uub.decays { "decaying" } else { "not decaying" }
    );
    println!("  written to {}", dir.join(byzopt::harness::runner::ANALYSIS_FILE).display());
    Ok(!r.verdicts().iter().any(|(_, v)| *v == Verdict::Fail))
}

fn list(write: Option<&Path>) -> Result<()> {
    for entry in LIBRARY {
        println!("{:<28} {}", entry.name, entry.description);
    }
    if let Some(dir) = write {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for entry in LIBRARY {
            let path = dir.join(format!("{}.json", entry.name));
            let text = serde_json::to_string_pretty(&entry.config().to_value())? + "\n";
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let root = cli.output_root.as_deref();
    let result = match &cli.command {
        Command::Run { source, out } => run(root, source, out.clone()).map(|_| true),
        Command::CheckGraph { source, json } => check(source, *json).map(|_| true),
        Command::Analyze { dir } => analyze(dir),
        Command::ListScenarios { write } => list(write.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.downcast_ref::<byzopt::harness::ConfigErrors>().is_some()
                || matches!(e.downcast_ref::<HarnessError>(), Some(HarnessError::Config(_)));
            if config_error {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

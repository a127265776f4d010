//! Executes prepared configurations and reads and writes run directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze, AnalysisError, AnalysisReport};
use crate::assignment::sparsity_by_row_zeros;
use crate::consensus::{run_scenario, spread, RunError, Trace};
use crate::decoding::{centralized_descent, run_algorithm1, Algorithm1Error, DecodeReport};
use crate::graph::{
    check_condition1, check_condition2, Condition1Report, Condition2Report, GraphError, MAX_CONDITION2_AGENTS,
};
use crate::objective::{optimum_set_global, Interval, ObjectiveError, Redundancy};

use super::config::{Algorithm, ConfigErrors, Prepared, RunConfig};

/// Bumped whenever a CSV column or summary key changes.
pub const FORMAT_VERSION: u32 = 1;
/// Largest allowed gap between a gradient-coding run and the centralized
/// reference trajectory.
pub const ORACLE_TOL: f64 = 1e-12;

pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const MESSAGES_FILE: &str = "messages.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DECODE_FILE: &str = "decode.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const Y_FILE: &str = "y.csv";
pub const SPREAD_FILE: &str = "spread.csv";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("missing {0}")]
    MissingFile(PathBuf),
    #[error("{0} does not match a fresh run of its config")]
    TraceMismatch(PathBuf),
    #[error("config hash {found} in {path} differs from the config's hash {expected}")]
    HashMismatch { path: PathBuf, expected: String, found: String },
    #[error("the matrix analysis needs an alg2 run, not {0}")]
    NotAnalyzable(Algorithm),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Algorithm1(#[from] Algorithm1Error),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    /// Largest per-round gap to centralized gradient descent.
    pub max_deviation: f64,
    pub matches: bool,
}

/// `summary.json`; keys are fixed for a given [`FORMAT_VERSION`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub name: String,
    pub config_hash: String,
    pub algorithm: Algorithm,
    pub n: usize,
    pub f: usize,
    pub faulty: Vec<usize>,
    pub rounds: usize,
    pub seed: u64,
    pub sparsity: usize,
    pub redundancy: Redundancy,
    /// `X = argmin Σ h_j`.
    pub optimum: Interval<f64>,
    /// False when `X` was located by bisection rather than exactly.
    pub optimum_exact: bool,
    pub final_states: Vec<f64>,
    pub final_spread: f64,
    pub final_dist: f64,
    /// Non-faulty estimates never left their initial `[min, max]`.
    pub stayed_in_initial_range: bool,
    /// Rounds where some agent received at most `2f` values.
    pub degenerate_rounds: usize,
    pub expected_failure: bool,
    /// Gradient-coding runs only.
    pub oracle: Option<OracleSummary>,
    /// Gradient-coding runs only: rounds where decoding flagged errors.
    pub rounds_with_detected_errors: Option<usize>,
}

/// An executed configuration.
#[derive(Clone, Debug)]
pub struct Execution {
    pub prepared: Prepared,
    pub trace: Trace<f64>,
    pub decodes: Option<Vec<DecodeReport<f64>>>,
    pub summary: RunSummary,
}

/// Runs a prepared configuration in memory.
pub fn execute(prepared: &Prepared) -> Result<Execution, HarnessError> {
    let s = &prepared.scenario;
    let cfg = &prepared.config;
    let (trace, decodes, oracle) = match cfg.algorithm {
        Algorithm::Alg2 => (run_scenario(s)?, None, None),
        Algorithm::Alg1 => {
            let run = run_algorithm1(s, &cfg.decoding_options())?;
            let reference = centralized_descent(s, s.x0[0])?;
            let nonfaulty = run.trace.nonfaulty();
            let max_deviation = run
                .trace
                .states
                .iter()
                .zip(&reference)
                .flat_map(|(row, &r)| nonfaulty.iter().map(move |i| (row[i] - r).abs()))
                .fold(0.0, f64::max);
            let oracle = OracleSummary { max_deviation, matches: max_deviation <= ORACLE_TOL };
            (run.trace, Some(run.decodes), Some(oracle))
        }
    };
    let redundancy = optimum_set_global(&s.functions).case;
    let optimum = s.optimum();
    let nonfaulty = trace.nonfaulty();
    let last = trace.states.last().expect("initial state present");
    let init = &trace.states[0];
    let (lo, hi) = nonfaulty.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), i| (l.min(init[i]), h.max(init[i])));
    let stayed = trace.states.iter().all(|row| nonfaulty.iter().all(|i| row[i] >= lo && row[i] <= hi));
    let mut degenerate: Vec<usize> = trace.warnings.iter().map(|w| w.round).collect();
    degenerate.dedup();
    let summary = RunSummary {
        format_version: FORMAT_VERSION,
        name: cfg.name.clone(),
        config_hash: prepared.hash.clone(),
        algorithm: cfg.algorithm,
        n: s.n(),
        f: s.faulty.bound,
        faulty: s.faulty.members.to_vec(),
        rounds: s.rounds,
        seed: s.seed,
        sparsity: sparsity_by_row_zeros(&s.assignment).value,
        redundancy,
        optimum,
        optimum_exact: s.functions.all_piecewise_linear(),
        final_states: nonfaulty.iter().map(|i| last[i]).collect(),
        final_spread: spread(last, nonfaulty),
        final_dist: crate::consensus::dist_to_interval(last, nonfaulty, &optimum),
        stayed_in_initial_range: stayed,
        degenerate_rounds: degenerate.len(),
        expected_failure: cfg.expected_failure,
        rounds_with_detected_errors: decodes.as_ref().map(|d| d.iter().filter(|r| !r.support.is_empty()).count()),
        oracle,
    };
    Ok(Execution { prepared: prepared.clone(), trace, decodes, summary })
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `round,agent,value,is_faulty`, one row per agent per round from 0.
pub fn trace_csv(trace: &Trace<f64>) -> Vec<u8> {
    let rows = trace.states.iter().enumerate().flat_map(|(t, row)| {
        row.iter().enumerate().map(move |(i, &v)| {
            vec![t.to_string(), i.to_string(), num(v), trace.faulty.contains(i).to_string()]
        })
    });
    csv_bytes(&["round", "agent", "value", "is_faulty"], rows)
}

/// `round,sender,receiver,value`; an empty value means nothing was sent.
pub fn messages_csv(trace: &Trace<f64>) -> Vec<u8> {
    let rows = trace.messages.iter().enumerate().flat_map(|(t, msgs)| {
        trace.links.iter().zip(msgs).map(move |(&(i, j), m)| {
            vec![(t + 1).to_string(), i.to_string(), j.to_string(), m.map(num).unwrap_or_default()]
        })
    });
    csv_bytes(&["round", "sender", "receiver", "value"], rows)
}

/// `round,error_support,residual` with the support as `;`-joined ids.
pub fn decode_csv(decodes: &[DecodeReport<f64>]) -> Vec<u8> {
    let rows = decodes.iter().map(|d| {
        let support: Vec<String> = d.support.iter().map(ToString::to_string).collect();
        vec![d.round.to_string(), support.join(";"), num(d.residual)]
    });
    csv_bytes(&["round", "error_support", "residual"], rows)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json { path: path.into(), source })?;
    text.push('\n');
    write(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })
}

fn read_text(path: &Path) -> Result<String, HarnessError> {
    if !path.exists() {
        return Err(HarnessError::MissingFile(path.into()));
    }
    fs::read_to_string(path).map_err(io_err(path))
}

/// Runs a configuration and writes `config.json`, `trace.csv`,
/// `messages.csv`, `summary.json` (and `decode.csv` for gradient coding)
/// into `dir`. If the configuration enables analysis, the analysis outputs
/// are written as well.
pub fn run_to_dir(prepared: &Prepared, dir: &Path) -> Result<Execution, HarnessError> {
    let exec = execute(prepared)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut cfg = prepared.config.to_value();
    if let Some(obj) = cfg.as_object_mut() {
        obj.remove("output_dir");
    }
    write_json(&dir.join(CONFIG_FILE), &cfg)?;
    write(&dir.join(TRACE_FILE), &trace_csv(&exec.trace))?;
    write(&dir.join(MESSAGES_FILE), &messages_csv(&exec.trace))?;
    if let Some(decodes) = &exec.decodes {
        write(&dir.join(DECODE_FILE), &decode_csv(decodes))?;
    }
    write_json(&dir.join(SUMMARY_FILE), &exec.summary)?;
    if prepared.config.analysis.enabled {
        let out = analyze_execution(&exec)?;
        write_analysis(dir, &exec, &out)?;
    }
    Ok(exec)
}

/// `analysis.json`
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisOutput {
    pub format_version: u32,
    pub name: String,
    pub config_hash: String,
    pub all_pass: bool,
    pub report: AnalysisReport,
}

fn analyze_execution(exec: &Execution) -> Result<AnalysisOutput, HarnessError> {
    let cfg = &exec.prepared.config;
    if cfg.algorithm != Algorithm::Alg2 {
        return Err(HarnessError::NotAnalyzable(cfg.algorithm));
    }
    let report = analyze(&exec.prepared.scenario, &exec.trace, &cfg.analysis.options())?;
    Ok(AnalysisOutput {
        format_version: FORMAT_VERSION,
        name: cfg.name.clone(),
        config_hash: exec.prepared.hash.clone(),
        all_pass: report.all_pass(),
        report,
    })
}

fn write_analysis(dir: &Path, exec: &Execution, out: &AnalysisOutput) -> Result<(), HarnessError> {
    write_json(&dir.join(ANALYSIS_FILE), out)?;
    let y = out.report.y.iter().enumerate().map(|(t, &v)| vec![t.to_string(), num(v)]);
    write(&dir.join(Y_FILE), &csv_bytes(&["t", "y"], y))?;
    let nonfaulty = exec.trace.nonfaulty();
    let optimum = exec.summary.optimum;
    let rows = exec.trace.states.iter().enumerate().map(|(t, row)| {
        vec![
            t.to_string(),
            num(spread(row, nonfaulty)),
            num(crate::consensus::dist_to_interval(row, nonfaulty, &optimum)),
        ]
    });
    write(&dir.join(SPREAD_FILE), &csv_bytes(&["t", "spread", "dist"], rows))
}

/// Runs the analysis battery on an existing run directory.
///
/// The stored configuration is replayed and the replay must reproduce
/// `trace.csv` byte for byte; the stored summary must carry the same
/// configuration hash.
pub fn analyze_dir(dir: &Path) -> Result<AnalysisOutput, HarnessError> {
    let cfg_path = dir.join(CONFIG_FILE);
    let trace_path = dir.join(TRACE_FILE);
    let summary_path = dir.join(SUMMARY_FILE);
    let cfg_text = read_text(&cfg_path)?;
    let stored_trace = read_text(&trace_path)?;
    let summary: RunSummary = read_json(&summary_path)?;
    let prepared = RunConfig::from_json_str(&cfg_text)?.prepare()?;
    if summary.config_hash != prepared.hash {
        return Err(HarnessError::HashMismatch { path: summary_path, expected: prepared.hash, found: summary.config_hash });
    }
    let exec = execute(&prepared)?;
    if trace_csv(&exec.trace) != stored_trace.as_bytes() {
        return Err(HarnessError::TraceMismatch(trace_path));
    }
    let out = analyze_execution(&exec)?;
    write_analysis(dir, &exec, &out)?;
    Ok(out)
}

/// Output of `check-graph`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphCheck {
    pub n: usize,
    pub f: usize,
    pub sparsity: usize,
    pub condition1: Condition1Report,
    /// Skipped above the enumeration limit.
    pub condition2: Option<Condition2Report>,
}

pub fn check_graph(prepared: &Prepared) -> Result<GraphCheck, HarnessError> {
    let s = &prepared.scenario;
    let sparsity = sparsity_by_row_zeros(&s.assignment).value;
    let f = s.faulty.bound;
    let condition1 = check_condition1(&s.graph, f, sparsity.min(s.n() + 1))?;
    let condition2 = if s.n() <= MAX_CONDITION2_AGENTS { Some(check_condition2(&s.graph, f)?) } else { None };
    Ok(GraphCheck { n: s.n(), f, sparsity, condition1, condition2 })
}

/// Where a run named `name` goes when no directory is given: under
/// `root` if set, else under `runs/`.
pub fn default_output_dir(root: Option<&Path>, name: &str) -> PathBuf {
    root.map_or_else(|| PathBuf::from("runs"), Path::to_path_buf).join(name)
}

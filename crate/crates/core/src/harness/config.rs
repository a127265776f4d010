//! Run configuration: one JSON document per scenario, validated field by
//! field so that every problem is reported at once.

use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::adversary::Adversary;
use crate::analysis::{AnalysisOptions, MAX_ANALYSIS_AGENTS, MAX_ANALYSIS_FAULTS};
use crate::assignment::{
    construct_sparsest, decoding_capability, sparsity_by_row_zeros, AssignmentError, AssignmentMatrix, ZeroPattern,
    RANK_TOL,
};
use crate::consensus::Scenario;
use crate::decoding::{DecodingOptions, DECODE_TOL};
use crate::graph::{check_condition1, AgentSet, DiGraph, FaultySet, GraphError, MAX_CONDITION1_AGENTS};
use crate::objective::{FnCollection, FnKind, ScalarConvexFn, SubgradientRule};
use crate::schedule::StepSchedule;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Complete { n: usize },
    Cycle { n: usize },
    /// Agent 0 points at everyone else.
    StarOut { n: usize },
    Edges { n: usize, edges: Vec<(usize, usize)> },
    /// `out[i]` lists the out-neighbors of agent `i`.
    Adjacency { out: Vec<Vec<usize>> },
}

impl GraphSpec {
    pub fn build(&self) -> Result<DiGraph, GraphError> {
        match self {
            GraphSpec::Complete { n } => DiGraph::complete(*n),
            GraphSpec::Cycle { n } => DiGraph::cycle(*n),
            GraphSpec::StarOut { n } => DiGraph::star_out(*n),
            GraphSpec::Edges { n, edges } => DiGraph::new(*n, edges),
            GraphSpec::Adjacency { out } => DiGraph::from_adjacency(out),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssignmentSpec {
    /// `A = I`, needs `k = n`.
    Identity,
    /// Agent `i` holds function `i / copies`; needs `k · copies = n`.
    Repetition { copies: usize },
    /// Exactly `s − 1` zeros per row, giving `sp(A) = s`.
    Sparsest { s: usize, pattern: ZeroPattern },
    /// Explicit `k × n` rows; columns are rescaled to sum to one when
    /// `normalize` is set.
    Rows {
        rows: Vec<Vec<f64>>,
        #[serde(default)]
        normalize: bool,
    },
}

impl AssignmentSpec {
    /// Builds `A` for `k` functions and `n` agents. The result may still
    /// have the wrong shape for explicit rows; callers check.
    pub fn build(&self, k: usize, n: usize) -> Result<AssignmentMatrix<f64>, String> {
        let err = |e: AssignmentError| e.to_string();
        match self {
            AssignmentSpec::Identity => AssignmentMatrix::identity(k).map_err(err),
            AssignmentSpec::Repetition { copies } => {
                if *copies == 0 || !n.is_multiple_of(*copies) {
                    return Err(format!("copies = {copies} does not divide n = {n}"));
                }
                AssignmentMatrix::repetition(n / copies, *copies).map_err(err)
            }
            AssignmentSpec::Sparsest { s, pattern } => construct_sparsest(k, n, *s, *pattern).map_err(err),
            AssignmentSpec::Rows { rows, normalize: true } => AssignmentMatrix::normalized(rows).map_err(err),
            AssignmentSpec::Rows { rows, normalize: false } => AssignmentMatrix::new(rows).map_err(err),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Gradient coding over Byzantine broadcast.
    Alg1,
    /// Trimmed-mean consensus with subgradient steps.
    Alg2,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    pub enabled: bool,
    pub t_max: usize,
    pub window_start: usize,
    pub window_len: usize,
    pub decay_from: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        let o = AnalysisOptions::default();
        AnalysisSpec {
            enabled: false,
            t_max: o.t_max,
            window_start: o.window_start,
            window_len: o.window_len,
            decay_from: o.decay_from,
        }
    }
}

impl AnalysisSpec {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            t_max: self.t_max,
            window_start: self.window_start,
            window_len: self.window_len,
            decay_from: self.decay_from,
        }
    }
}

/// A complete scenario description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub name: String,
    pub description: String,
    pub algorithm: Algorithm,
    pub graph: GraphSpec,
    /// Faulty agent ids.
    pub faulty: Vec<usize>,
    /// Fault bound `f`.
    pub f: usize,
    pub adversary: Adversary<f64>,
    pub assignment: AssignmentSpec,
    pub functions: Vec<FnKind<f64>>,
    pub schedule: StepSchedule<f64>,
    pub x0: Vec<f64>,
    pub rounds: usize,
    pub seed: u64,
    pub default_value: f64,
    pub subgradient_rule: SubgradientRule,
    /// Skip the condition-1 check (counterexample scenarios).
    pub adversarial_demo: bool,
    /// Whether the gradient-coding run may assume reliable broadcast.
    pub broadcast_capable: bool,
    pub decode_tolerance: f64,
    /// The scenario is meant to show the algorithm missing the optimum.
    pub expected_failure: bool,
    pub analysis: AnalysisSpec,
    /// Not part of the scenario identity; excluded from the hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// One problem with a configuration, tied to the offending field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every issue found in a configuration.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.0.len())?;
        for issue in &self.0 {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    pub fn fields(&self) -> Vec<&str> {
        self.0.iter().map(|i| i.field.as_str()).collect()
    }
}

#[derive(Default)]
struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, field: impl Into<String>, message: impl fmt::Display) {
        self.0.push(ConfigIssue { field: field.into(), message: message.to_string() });
    }

    fn finish(self) -> Result<(), ConfigErrors> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(self.0))
        }
    }
}

const FIELDS: &[&str] = &[
    "name",
    "description",
    "algorithm",
    "graph",
    "faulty",
    "f",
    "adversary",
    "assignment",
    "functions",
    "schedule",
    "x0",
    "rounds",
    "seed",
    "default_value",
    "subgradient_rule",
    "adversarial_demo",
    "broadcast_capable",
    "decode_tolerance",
    "expected_failure",
    "analysis",
    "output_dir",
];

struct Reader<'a> {
    obj: &'a Map<String, Value>,
    issues: Issues,
}

impl Reader<'_> {
    fn required<T: DeserializeOwned>(&mut self, key: &str) -> Option<T> {
        match self.obj.get(key) {
            None => {
                self.issues.push(key, "missing required field");
                None
            }
            Some(v) => self.parse(key, v),
        }
    }

    fn optional<T: DeserializeOwned>(&mut self, key: &str, default: T) -> T {
        match self.obj.get(key) {
            None | Some(Value::Null) => default,
            Some(v) => self.parse(key, v).unwrap_or(default),
        }
    }

    fn parse<T: DeserializeOwned>(&mut self, key: &str, v: &Value) -> Option<T> {
        match T::deserialize(v) {
            Ok(x) => Some(x),
            Err(e) => {
                self.issues.push(key, e);
                None
            }
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigErrors> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| ConfigErrors(vec![ConfigIssue { field: "<document>".into(), message: e.to_string() }]))?;
        Self::from_value(&value)
    }

    /// Reads every field independently, so schema problems are all listed.
    /// Semantic checks are in [`RunConfig::prepare`].
    pub fn from_value(value: &Value) -> Result<Self, ConfigErrors> {
        let Some(obj) = value.as_object() else {
            return Err(ConfigErrors(vec![ConfigIssue {
                field: "<document>".into(),
                message: "expected a JSON object".into(),
            }]));
        };
        let mut r = Reader { obj, issues: Issues::default() };
        for key in obj.keys().filter(|k| !FIELDS.contains(&k.as_str())) {
            r.issues.push(key.clone(), "unknown field");
        }
        let name = r.optional("name", "unnamed".to_string());
        let description = r.optional("description", String::new());
        let algorithm = r.required("algorithm");
        let graph = r.required("graph");
        let faulty = r.optional("faulty", Vec::new());
        let f = r.required("f");
        let adversary = r.optional("adversary", Adversary::Crash { at_round: 0 });
        let assignment = r.required("assignment");
        let functions = r.required("functions");
        let schedule = r.required("schedule");
        let x0 = r.required("x0");
        let rounds = r.required("rounds");
        let seed = r.optional("seed", 0);
        let default_value = r.optional("default_value", 0.0);
        let subgradient_rule = r.optional("subgradient_rule", SubgradientRule::default());
        let adversarial_demo = r.optional("adversarial_demo", false);
        let broadcast_capable = r.optional("broadcast_capable", true);
        let decode_tolerance = r.optional("decode_tolerance", DECODE_TOL);
        let expected_failure = r.optional("expected_failure", false);
        let analysis = r.optional("analysis", AnalysisSpec::default());
        let output_dir = r.optional("output_dir", None);
        r.issues.finish()?;
        let missing = "checked by finish";
        Ok(RunConfig {
            name,
            description,
            algorithm: algorithm.expect(missing),
            graph: graph.expect(missing),
            faulty,
            f: f.expect(missing),
            adversary,
            assignment: assignment.expect(missing),
            functions: functions.expect(missing),
            schedule: schedule.expect(missing),
            x0: x0.expect(missing),
            rounds: rounds.expect(missing),
            seed,
            default_value,
            subgradient_rule,
            adversarial_demo,
            broadcast_capable,
            decode_tolerance,
            expected_failure,
            analysis,
            output_dir,
        })
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form (sorted keys, defaults filled
    /// in, output path dropped).
    pub fn hash(&self) -> String {
        let mut v = self.to_value();
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        let text = serde_json::to_string(&v).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Checks every cross-field constraint and builds the scenario. All
    /// failing checks are reported together.
    pub fn prepare(&self) -> Result<Prepared, ConfigErrors> {
        let mut issues = Issues::default();
        let graph = self.graph.build().map_err(|e| issues.push("graph", e)).ok();
        let n = graph.as_ref().map(DiGraph::n);

        let mut members = AgentSet::EMPTY;
        for (pos, &i) in self.faulty.iter().enumerate() {
            match n {
                Some(n) if i >= n => issues.push(format!("faulty[{pos}]"), format!("agent {i} out of range for n = {n}")),
                _ if members.contains(i) => issues.push(format!("faulty[{pos}]"), format!("agent {i} listed twice")),
                _ if i < crate::graph::MAX_AGENTS => members.insert(i),
                _ => issues.push(format!("faulty[{pos}]"), format!("agent {i} out of range")),
            }
        }
        if self.faulty.len() > self.f {
            issues.push("faulty", format!("{} faulty agents exceed f = {}", self.faulty.len(), self.f));
        }

        let mut fns = Vec::new();
        for (j, kind) in self.functions.iter().enumerate() {
            match ScalarConvexFn::new(*kind) {
                Ok(h) => fns.push(h),
                Err(e) => issues.push(format!("functions[{j}]"), e),
            }
        }
        let functions = if self.functions.is_empty() {
            issues.push("functions", "at least one input function is required");
            None
        } else if fns.len() == self.functions.len() {
            FnCollection::new(fns).ok()
        } else {
            None
        };
        let k = self.functions.len();

        let assignment = match n {
            Some(n) if k > 0 => match self.assignment.build(k, n) {
                Ok(a) if a.n() != n => {
                    issues.push("assignment", format!("A has {} columns but the graph has n = {n} agents", a.n()));
                    None
                }
                Ok(a) if a.k() != k => {
                    issues.push("assignment", format!("A has {} rows but there are k = {k} functions", a.k()));
                    None
                }
                Ok(a) => Some(a),
                Err(e) => {
                    issues.push("assignment", e);
                    None
                }
            },
            _ => None,
        };

        let schedule = self.schedule.validated().map_err(|e| issues.push("schedule", e)).ok();
        let adversary = self.adversary.validated().map_err(|e| issues.push("adversary", e)).ok();
        if let Some(n) = n {
            if self.x0.len() != n {
                issues.push("x0", format!("length {} but n = {n}", self.x0.len()));
            }
        }
        if let Some(i) = self.x0.iter().position(|x| !x.is_finite()) {
            issues.push(format!("x0[{i}]"), "must be finite");
        }
        if self.rounds == 0 {
            issues.push("rounds", "must be at least 1");
        }
        if !self.default_value.is_finite() {
            issues.push("default_value", "must be finite");
        }
        if !(self.decode_tolerance.is_finite() && self.decode_tolerance > 0.0) {
            issues.push("decode_tolerance", "must be positive and finite");
        }

        match self.algorithm {
            Algorithm::Alg1 => {
                if !self.broadcast_capable {
                    issues.push("broadcast_capable", "gradient coding needs a broadcast-capable network");
                }
                if self.x0.first().is_some_and(|&x0| self.x0.iter().any(|&x| x != x0)) {
                    issues.push("x0", "gradient coding needs a common initial estimate");
                }
                if let Some(fc) = &functions {
                    if !fc.all_differentiable() {
                        issues.push("functions", "gradient coding needs differentiable (smooth_abs) functions");
                    }
                }
                if let Some(a) = &assignment {
                    if !decoding_capability(a, self.f, RANK_TOL) {
                        issues.push("assignment", format!("A cannot correct f = {} errors", self.f));
                    }
                }
                if self.analysis.enabled {
                    issues.push("analysis.enabled", "the matrix analysis applies to alg2 runs only");
                }
            }
            Algorithm::Alg2 => {
                if let (Some(g), Some(a), false) = (&graph, &assignment, self.adversarial_demo) {
                    let s = sparsity_by_row_zeros(a).value;
                    if g.n() <= MAX_CONDITION1_AGENTS {
                        match check_condition1(g, self.f, s) {
                            Ok(rep) if !rep.holds => issues.push(
                                "graph",
                                format!(
                                    "condition 1 fails for f = {}, sp(A) = {s}; set adversarial_demo to run anyway",
                                    self.f
                                ),
                            ),
                            Ok(_) => {}
                            Err(e) => issues.push("graph", e),
                        }
                    }
                }
            }
        }
        if self.analysis.enabled {
            if n.is_some_and(|n| n > MAX_ANALYSIS_AGENTS) || self.f > MAX_ANALYSIS_FAULTS {
                issues.push(
                    "analysis.enabled",
                    format!("analysis supports n <= {MAX_ANALYSIS_AGENTS} and f <= {MAX_ANALYSIS_FAULTS}"),
                );
            }
            if self.analysis.window_len == 0 {
                issues.push("analysis.window_len", "must be at least 1");
            }
            if self.rounds < 2 || self.analysis.t_max >= self.rounds {
                issues.push("analysis.t_max", format!("must be below rounds = {}", self.rounds));
            }
        }
        issues.finish()?;

        let graph = graph.expect("validated");
        let n = graph.n();
        let scenario = Scenario {
            faulty: FaultySet::new(members, self.f, n).expect("validated"),
            graph,
            adversary: adversary.expect("validated"),
            assignment: assignment.expect("validated"),
            functions: functions.expect("validated"),
            schedule: schedule.expect("validated"),
            x0: self.x0.clone(),
            rounds: self.rounds,
            default_value: self.default_value,
            seed: self.seed,
            subgradient_rule: self.subgradient_rule,
            adversarial_demo: self.adversarial_demo,
        };
        Ok(Prepared { config: self.clone(), hash: self.hash(), scenario })
    }

    pub fn decoding_options(&self) -> DecodingOptions<f64> {
        DecodingOptions { broadcast_capable: self.broadcast_capable, tolerance: self.decode_tolerance }
    }
}

/// A validated configuration with its built scenario.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub hash: String,
    pub scenario: Scenario<f64>,
}

/// Sets `path` (dot separated, numeric segments index arrays) in `doc` to
/// `raw`, parsed as JSON when possible and taken as a string otherwise.
/// Missing object keys are created.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<(), String> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(format!("bad override path {path:?}"));
    }
    let mut cur = doc;
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        let here = segments[..=depth].join(".");
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert_with(|| Value::Object(Map::new()))
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| format!("{here}: expected an array index"))?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| format!("{here}: index out of range (len {len})"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(format!("{here}: cannot descend into a scalar")),
        };
    }
    unreachable!("loop returns on the last segment")
}

/// Parses `key=value` override syntax.
pub fn split_override(spec: &str) -> Result<(&str, &str), String> {
    spec.split_once('=').ok_or_else(|| format!("override {spec:?} is not of the form path=value"))
}

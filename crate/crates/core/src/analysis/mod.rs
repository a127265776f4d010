//! Numerical verification of the matrix-product analysis on a completed
//! trimmed-consensus trace: transition matrices, backward products and
//! their limits, and the bounds on the consensus value `y(t)`.

pub mod bounds;
pub mod products;
pub mod transition;

use serde::Serialize;
use thiserror::Error;

use crate::assignment::sparsity_by_row_zeros;
use crate::consensus::{Scenario, Trace};
use crate::graph::reduced_graph_count;
use crate::objective::ObjectiveError;
use crate::scalar::Scalar;

pub use bounds::{check_basic_iter, check_uub, uub_bound, y_sequence, BasicIterReport, UubReport, YSequence};
pub use products::{
    check_lemma_lb, check_pi_lower, check_rate, estimate_pi, estimate_pi_range, phi_product, LemmaLbReport, Mixing,
    PiEstimate, PiLowerReport, RateReport,
};
pub use transition::{
    build_m, build_record, check_properties, empirical_beta, find_reduced_witness, reconstruction_residual,
    PropertyReport, TransitionRecord,
};

/// Analysis enumerates reduced graphs exactly; keep it small.
pub const MAX_ANALYSIS_AGENTS: usize = 6;
pub const MAX_ANALYSIS_FAULTS: usize = 1;
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
pub const RATE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("analysis supports n <= {MAX_ANALYSIS_AGENTS} and f <= {MAX_ANALYSIS_FAULTS}, got n = {n}, f = {f}")]
    TooLarge { n: usize, f: usize },
    #[error("M({t}) needs round {} but the trace has {rounds} rounds", t + 1)]
    RoundOutOfRange { t: usize, rounds: usize },
    #[error("round {round}: no trim record for non-faulty agent {agent}")]
    MissingTrim { round: usize, agent: usize },
    #[error("round {round}: kept faulty value from {faulty} at agent {agent} has no non-faulty bracket")]
    NoBracket { round: usize, agent: usize, faulty: usize },
    #[error("trace needs at least 2 rounds for analysis")]
    ShortTrace,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A needed limit `π(r)` had not converged within the trace.
    Inconclusive,
}

impl Verdict {
    /// A check that leans on an unconverged limit is never a failure.
    fn from_checks(pass: bool, conclusive: bool) -> Self {
        match (conclusive, pass) {
            (false, _) => Verdict::Inconclusive,
            (true, true) => Verdict::Pass,
            (true, false) => Verdict::Fail,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    /// Last time index for `y(t)`, uniform-bound and basic-iteration checks.
    pub t_max: usize,
    /// First `r` of the window for the product and limit checks.
    pub window_start: usize,
    pub window_len: usize,
    /// Earlier time whose uniform bound is compared with the bound at
    /// `t_max` (decay check).
    pub decay_from: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { t_max: 200, window_start: 0, window_len: 30, decay_from: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionSummary {
    pub max_residual: f64,
    pub worst_round: usize,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertySummary {
    pub stochastic: bool,
    pub diagonal: bool,
    pub support: bool,
    pub lower_bound: bool,
    /// First few failures, with round numbers.
    pub failures: Vec<String>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessSummary {
    pub found: usize,
    pub missing_rounds: Vec<usize>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateSummary {
    pub min_margin: f64,
    pub checked_pairs: usize,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowSummary<R> {
    pub reports: Vec<R>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YSummary {
    pub t_max: usize,
    pub recurrence_gap: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UubSummary {
    pub reports: Vec<UubReport>,
    pub min_margin: f64,
    pub verdict: Verdict,
    pub decay_from: usize,
    pub bound_at_decay_from: f64,
    pub t_max: usize,
    pub bound_at_t_max: f64,
    /// Whether the bound at `t_max` is below the bound at `decay_from`.
    pub decays: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasicIterSummary {
    pub x_ref: f64,
    pub failures: Vec<usize>,
    pub verdict: Verdict,
    /// Partial sums of the supermartingale terms; diagnostic only.
    pub sum_b: f64,
    pub sum_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsensusSummary {
    pub t: usize,
    pub deviation: f64,
    pub bound: f64,
    pub bound_at_half: f64,
    /// `deviation ≤ bound` and `deviation < 10 · bound(t/2)`.
    pub verdict: Verdict,
}

/// Everything the analysis battery found, ready for JSON.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub nonfaulty: Vec<usize>,
    pub rounds: usize,
    pub mixing: Mixing,
    pub required_columns: usize,
    pub reconstruction: ReconstructionSummary,
    pub properties: PropertySummary,
    pub witnesses: WitnessSummary,
    /// Needs at least `window_start + window_len + ν` rounds; shorter
    /// traces make it inconclusive.
    pub lemma_lb: WindowSummary<LemmaLbReport>,
    pub rate: RateSummary,
    pub pi_lower: WindowSummary<PiLowerReport>,
    pub pi_diameters: Vec<f64>,
    pub y_sequence: YSummary,
    pub y: Vec<f64>,
    pub uub: UubSummary,
    pub basic_iter: BasicIterSummary,
    pub consensus: ConsensusSummary,
}

impl AnalysisReport {
    /// Every bound check that has a verdict passed. The decay comparison is
    /// reported separately and is not part of this.
    pub fn verdicts(&self) -> [(&'static str, Verdict); 10] {
        [
            ("reconstruction", self.reconstruction.verdict),
            ("properties", self.properties.verdict),
            ("witnesses", self.witnesses.verdict),
            ("lemma_lb", self.lemma_lb.verdict),
            ("rate", self.rate.verdict),
            ("pi_lower", self.pi_lower.verdict),
            ("y_sequence", self.y_sequence.verdict),
            ("uub", self.uub.verdict),
            ("basic_iter", self.basic_iter.verdict),
            ("consensus", self.consensus.verdict),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts().iter().all(|(_, v)| *v == Verdict::Pass)
    }

    pub fn any_fail(&self) -> bool {
        self.verdicts().iter().any(|(_, v)| *v == Verdict::Fail)
    }
}

/// Runs the full verification battery on a trimmed-consensus trace.
pub fn analyze<T: Scalar>(s: &Scenario<T>, trace: &Trace<T>, opts: &AnalysisOptions) -> Result<AnalysisReport, AnalysisError> {
    let n = s.n();
    if n > MAX_ANALYSIS_AGENTS || s.faulty.bound > MAX_ANALYSIS_FAULTS {
        return Err(AnalysisError::TooLarge { n, f: s.faulty.bound });
    }
    if trace.rounds() < 2 {
        return Err(AnalysisError::ShortTrace);
    }
    let rec = build_record(s, trace)?;
    let ms = &rec.matrices;
    let idx = &rec.indexing;
    let m = idx.len();
    let horizon = ms.len() - 1;
    let tau = reduced_graph_count(&s.graph, &s.faulty);
    let mix = Mixing::new(rec.beta.to_f64_lossy(), tau, m);
    let sp = sparsity_by_row_zeros(&s.assignment).value;
    let required = sp.max(s.faulty.bound + 1);

    let (worst_round, max_residual) = rec
        .residuals
        .iter()
        .enumerate()
        .map(|(t, r)| (t, r.to_f64_lossy()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let reconstruction = ReconstructionSummary {
        max_residual,
        worst_round,
        verdict: Verdict::from_checks(max_residual < RECONSTRUCTION_TOL, true),
    };

    let mut failures = Vec::new();
    for (t, p) in rec.properties.iter().enumerate() {
        for f in &p.failures {
            if failures.len() < 10 {
                failures.push(format!("M({t}): {f}"));
            }
        }
    }
    let all = |f: fn(&PropertyReport) -> bool| rec.properties.iter().all(f);
    let (stochastic, diagonal, support, lower_bound) =
        (all(|p| p.stochastic), all(|p| p.diagonal), all(|p| p.support), all(|p| p.lower_bound));
    let properties = PropertySummary {
        stochastic,
        diagonal,
        support,
        lower_bound,
        failures,
        verdict: Verdict::from_checks(stochastic && diagonal && support && lower_bound, true),
    };

    let missing_rounds: Vec<usize> =
        rec.witnesses.iter().enumerate().filter(|(_, w)| w.is_none()).map(|(t, _)| t).collect();
    let witnesses = WitnessSummary {
        found: rec.witnesses.len() - missing_rounds.len(),
        verdict: Verdict::from_checks(missing_rounds.is_empty(), true),
        missing_rounds,
    };

    let window_end = (opts.window_start + opts.window_len).min(horizon + 1);
    let t_max = opts.t_max.min(horizon);
    let r_max = (t_max + 1).max(window_end).min(horizon);
    let pis = estimate_pi_range(ms, horizon, r_max);

    let lb_reports: Vec<LemmaLbReport> =
        (opts.window_start..window_end).map(|r| check_lemma_lb(ms, &mix, r, required)).collect();
    let lemma_lb = WindowSummary {
        verdict: Verdict::from_checks(
            lb_reports.iter().all(|r| r.pass || r.insufficient_horizon),
            lb_reports.iter().all(|r| !r.insufficient_horizon),
        ),
        reports: lb_reports,
    };
    let mut rate_min = f64::INFINITY;
    let mut rate_pairs = 0;
    let mut rate_conclusive = true;
    for (r, pi) in pis.iter().enumerate().take(window_end).skip(opts.window_start) {
        for t in r..window_end {
            let rep = check_rate(ms, &mix, t, r, pi);
            rate_min = rate_min.min(rep.margin);
            rate_conclusive &= rep.conclusive;
            rate_pairs += 1;
        }
    }
    let rate = RateSummary {
        min_margin: rate_min,
        checked_pairs: rate_pairs,
        verdict: Verdict::from_checks(rate_min >= -RATE_TOL, rate_conclusive),
    };
    let pl_reports: Vec<PiLowerReport> =
        (opts.window_start..window_end).map(|r| check_pi_lower(&mix, &pis[r], required)).collect();
    let pi_lower = WindowSummary {
        verdict: Verdict::from_checks(
            pl_reports.iter().all(|r| r.pass),
            pl_reports.iter().all(|r| r.conclusive),
        ),
        reports: pl_reports,
    };

    // y(t), uniform bound, basic iteration
    let x0 = idx.restrict(&trace.states[0]);
    let d: Vec<Vec<T>> = (0..=t_max)
        .map(|t| s.local_subgradients(&trace.states[t]).map(|g| idx.restrict(&g)))
        .collect::<Result<_, _>>()?;
    let alpha: Vec<T> = (0..=t_max).map(|t| s.schedule.alpha(t)).collect();
    let alpha_f: Vec<f64> = alpha.iter().map(|a| a.to_f64_lossy()).collect();
    let ys = y_sequence(&pis, &x0, &d, &alpha, t_max);
    let y_summary = YSummary {
        t_max,
        recurrence_gap: ys.recurrence_gap.to_f64_lossy(),
        verdict: Verdict::from_checks(ys.recurrence_gap.to_f64_lossy() < 1e-9, ys.conclusive),
    };

    let init_abs_max = x0.iter().fold(0.0f64, |a, v| a.max(v.abs().to_f64_lossy()));
    let lip = s.functions.lipschitz();
    let bound = |t: usize| uub_bound(&mix, m, init_abs_max, lip.to_f64_lossy(), &alpha_f, t);
    let uub_reports: Vec<UubReport> =
        (1..=t_max).map(|t| check_uub(ys.y[t], &idx.restrict(&trace.states[t]), t, bound(t))).collect();
    let uub_min = uub_reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let uub_pass = uub_reports.iter().all(|r| r.pass);
    let decay_from = opts.decay_from.clamp(1, t_max.max(1));
    let (b_early, b_late) = (bound(decay_from), bound(t_max.max(1)));
    let uub = UubSummary {
        reports: uub_reports,
        min_margin: uub_min,
        verdict: Verdict::from_checks(uub_pass, ys.conclusive),
        decay_from,
        bound_at_decay_from: b_early,
        t_max: t_max.max(1),
        bound_at_t_max: b_late,
        decays: b_late < b_early,
    };

    let optimum = s.optimum();
    let x_ref = optimum.lo + (optimum.hi - optimum.lo) / T::lit(2.0);
    let objectives: Vec<_> = idx.agents.iter().map(|&i| s.local_objective(i)).collect();
    let mut bi_failures = Vec::new();
    let (mut sum_b, mut sum_c) = (0.0, 0.0);
    for t in 0..t_max {
        let x_t = idx.restrict(&trace.states[t]);
        let inp = bounds::BasicIterInput {
            t,
            y_t: ys.y[t],
            y_next: ys.y[t + 1],
            pi_next: &pis[t + 1].pi,
            x_t: &x_t,
            d_t: &d[t],
            alpha_t: alpha[t],
            lipschitz: lip,
            objectives: &objectives,
        };
        let rep = check_basic_iter(&inp, x_ref);
        sum_b += rep.b;
        sum_c += rep.c;
        if !rep.pass {
            bi_failures.push(t);
        }
    }
    let basic_iter = BasicIterSummary {
        x_ref: x_ref.to_f64_lossy(),
        verdict: Verdict::from_checks(bi_failures.is_empty(), ys.conclusive),
        failures: bi_failures,
        sum_b,
        sum_c,
    };

    let t_end = t_max.max(1);
    let end_dev = idx
        .restrict(&trace.states[t_end])
        .iter()
        .map(|&x| (ys.y[t_end] - x).abs().to_f64_lossy())
        .fold(0.0, f64::max);
    let (bound_end, bound_half) = (bound(t_end), bound((t_end / 2).max(1)));
    let consensus = ConsensusSummary {
        t: t_end,
        deviation: end_dev,
        bound: bound_end,
        bound_at_half: bound_half,
        verdict: Verdict::from_checks(end_dev <= bound_end && end_dev < 10.0 * bound_half, ys.conclusive),
    };

    Ok(AnalysisReport {
        nonfaulty: idx.agents.clone(),
        rounds: trace.rounds(),
        mixing: mix,
        required_columns: required,
        reconstruction,
        properties,
        witnesses,
        lemma_lb,
        rate,
        pi_lower,
        pi_diameters: pis.iter().map(|p| p.diameter.to_f64_lossy()).collect(),
        y_sequence: y_summary,
        y: ys.y.iter().map(|v| v.to_f64_lossy()).collect(),
        uub,
        basic_iter,
        consensus,
    })
}

//! Scenario-game consensus ADMM.
//!
//! Each outer iteration solves the `S` augmented scenario subgames in
//! parallel, averages them into the consensus iterate
//!
//! ```text
//! x <- (1/S) sum_j (lambda^j / rho + w^j)
//! ```
//!
//! and updates `lambda^j <- lambda^j + rho (w^j - x)`. The loop stops once
//! `sum_j |w^j(k+1) - x(k)|^2 <= tol`.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::ScenarioSet;
use crate::error::{Error, Result};
use crate::game::{GameSpec, JointDecision};
use crate::inner::{solve_subgame, InnerOptions, KktPoint, KktResidual, ScenarioSubproblem};
use crate::oracle::ReferenceSolution;

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "SCENARIO_GAME_THREADS";

/// The ADMM iterate `(w, x, lambda)` at outer iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    /// `w^j`, one joint decision per scenario.
    pub w: Vec<DVector<f64>>,
    pub x: JointDecision,
    /// `lambda^j`, one stacked multiplier per scenario.
    pub lambda: Vec<DVector<f64>>,
    pub iteration: usize,
}

impl ConsensusState {
    /// `x = 0`, `w^j = 0`, `lambda^j = 0`.
    pub fn zeros(spec: &GameSpec, num_scenarios: usize) -> Self {
        let p = spec.dims().joint_dim();
        Self {
            w: vec![DVector::zeros(p); num_scenarios],
            x: JointDecision::zeros(spec.dims()),
            lambda: vec![DVector::zeros(p); num_scenarios],
            iteration: 0,
        }
    }

    pub fn num_scenarios(&self) -> usize {
        self.w.len()
    }

    fn validate(&self, spec: &GameSpec, num_scenarios: usize) -> Result<()> {
        let p = spec.dims().joint_dim();
        if self.w.len() != num_scenarios || self.lambda.len() != num_scenarios {
            return Err(Error::Dimension {
                what: "initial state scenario count".into(),
                expected: num_scenarios,
                actual: self.w.len().min(self.lambda.len()),
            });
        }
        if self.x.len() != p {
            return Err(Error::Dimension {
                what: "initial consensus iterate".into(),
                expected: p,
                actual: self.x.len(),
            });
        }
        for v in self.w.iter().chain(&self.lambda) {
            if v.len() != p {
                return Err(Error::Dimension {
                    what: "initial scenario block".into(),
                    expected: p,
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }

    /// `max_i |sum_j lambda_i^j|_inf`.
    pub fn multiplier_imbalance(&self) -> f64 {
        pairwise_sum(&self.lambda, &|v| v.clone()).amax()
    }

    /// `|lambda|_inf` over every scenario.
    pub fn multiplier_max(&self) -> f64 {
        self.lambda.iter().fold(0.0, |m, l| m.max(l.amax()))
    }
}

/// Outer-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    pub rho: f64,
    /// Stopping threshold on the squared consensus residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub inner: InnerOptions,
    pub record_trace: bool,
    /// Keep every intermediate state (needed by the invariant checks).
    pub record_iterates: bool,
    /// Wall-time safeguard in seconds.
    pub max_wall_secs: Option<f64>,
    /// Write phase timings into the trace CSV.
    pub record_timing: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 5.0,
            tol: 1e-8,
            max_iter: 5000,
            workers: None,
            inner: InnerOptions::default(),
            record_trace: true,
            record_iterates: false,
            max_wall_secs: None,
            record_timing: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        self.inner.validate()
    }

    /// Explicit setting, else the environment override, else all cores.
    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| {
                std::env::var(THREADS_ENV)
                    .ok()?
                    .parse()
                    .ok()
                    .filter(|&w: &usize| w > 0)
            })
            .unwrap_or_else(rayon::current_num_threads)
    }
}

/// One outer iteration; values refer to the state after the update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    /// `|w(k+1) - M x(k)|^2`.
    pub consensus_residual: f64,
    /// `|lambda(k+1) - lambda(k)|`.
    pub dual_change: f64,
    /// `V(k+1)` against the supplied reference.
    pub lyapunov: Option<f64>,
    /// `rho S |x(k+1) - x*|^2`.
    pub primal_term: Option<f64>,
    pub inner_iter_min: usize,
    pub inner_iter_mean: f64,
    pub inner_iter_max: usize,
    pub phase_ms_inner: f64,
    pub phase_ms_outer: f64,
    /// Worst residuals over this iteration's subgame solves.
    pub inner_worst: KktResidual,
    pub min_multiplier: f64,
    /// `max_j max h(w^j(k+1); theta^j)`.
    pub max_constraint: f64,
    pub multiplier_imbalance: f64,
    pub multiplier_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverTrace {
    /// `V(0)`, present with a reference.
    pub initial_lyapunov: Option<f64>,
    pub rows: Vec<TraceRow>,
}

impl SolverTrace {
    /// `V(0), V(1), ...` when a reference was supplied.
    pub fn lyapunov_series(&self) -> Option<Vec<f64>> {
        let mut out = vec![self.initial_lyapunov?];
        for r in &self.rows {
            out.push(r.lyapunov?);
        }
        Some(out)
    }

    /// CSV in the documented column order; timing columns are left empty
    /// unless `timing` is set so that traces stay byte-reproducible.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "k",
            "consensus_residual",
            "dual_change",
            "lyapunov",
            "inner_iter_min",
            "inner_iter_mean",
            "inner_iter_max",
            "phase_ms_inner",
            "phase_ms_outer",
        ])?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            let time = |v: f64| if timing { v.to_string() } else { String::new() };
            wtr.write_record([
                r.k.to_string(),
                r.consensus_residual.to_string(),
                r.dual_change.to_string(),
                opt(r.lyapunov),
                r.inner_iter_min.to_string(),
                r.inner_iter_mean.to_string(),
                r.inner_iter_max.to_string(),
                time(r.phase_ms_inner),
                time(r.phase_ms_outer),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, timing: bool) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timing)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum AdmmStatus {
    Converged,
    MaxIter,
    WallTimeExceeded,
    InnerFailure {
        scenario: usize,
        iteration: usize,
        message: String,
    },
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub x: JointDecision,
    pub state: ConsensusState,
    pub trace: SolverTrace,
    pub status: AdmmStatus,
    /// Subgame solutions of the last completed iteration.
    pub kkt: Vec<KktPoint>,
    /// States `0..=k` when `record_iterates` is set.
    pub history: Vec<ConsensusState>,
    pub wall_ms: f64,
    pub workers: usize,
}

impl AdmmOutcome {
    pub fn iterations(&self) -> usize {
        self.state.iteration
    }
}

/// Machine-readable end-of-run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmmSummary {
    pub status: AdmmStatus,
    pub iterations: usize,
    pub num_scenarios: usize,
    pub constraint_rows: usize,
    pub rho: f64,
    pub tol: f64,
    pub workers: usize,
    pub final_consensus_residual: Option<f64>,
    pub vi_residual: Option<ViResidual>,
    pub wall_ms: f64,
    pub x: Vec<f64>,
}

pub fn summarize(
    spec: &GameSpec,
    scenarios: &ScenarioSet,
    cfg: &AdmmConfig,
    outcome: &AdmmOutcome,
) -> Result<AdmmSummary> {
    let vi_residual = if outcome.kkt.len() == scenarios.len() {
        Some(vi_optimality_residual(
            spec,
            scenarios,
            &outcome.state,
            &outcome.kkt,
            cfg.rho,
        )?)
    } else {
        None
    };
    Ok(AdmmSummary {
        status: outcome.status.clone(),
        iterations: outcome.iterations(),
        num_scenarios: scenarios.len(),
        constraint_rows: scenarios.len() * spec.dims().total_constraints(),
        rho: cfg.rho,
        tol: cfg.tol,
        workers: outcome.workers,
        final_consensus_residual: outcome.trace.rows.last().map(|r| r.consensus_residual),
        vi_residual,
        wall_ms: outcome.wall_ms,
        x: outcome.x.as_slice().to_vec(),
    })
}

/// Sum of `map(item)` by recursive halving in index order; independent of
/// thread count.
fn pairwise_sum<T, F>(items: &[T], map: &F) -> DVector<f64>
where
    F: Fn(&T) -> DVector<f64>,
{
    match items.len() {
        0 => panic!("pairwise_sum of an empty slice"),
        1 => map(&items[0]),
        n => {
            let (a, b) = items.split_at(n / 2);
            pairwise_sum(a, map) + pairwise_sum(b, map)
        }
    }
}

fn pairwise_scalar(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_scalar(a) + pairwise_scalar(b)
        }
    }
}

/// `x = (1/S) sum_j (lambda^j / rho + w^j)`.
pub fn consensus_update(state: &ConsensusState, rho: f64) -> Result<JointDecision> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let s = state.num_scenarios();
    if s == 0 || state.lambda.len() != s {
        return Err(Error::InvalidArgument(
            "consensus update needs matching, non-empty w and lambda".into(),
        ));
    }
    let pairs: Vec<(&DVector<f64>, &DVector<f64>)> = state.w.iter().zip(&state.lambda).collect();
    let total = pairwise_sum(&pairs, &|(w, l)| *l / rho + *w);
    JointDecision::new(
        state.x.num_players(),
        state.x.decision_dim(),
        (total / s as f64).as_slice().to_vec(),
    )
}

/// `lambda^j += rho (w^j - x_new)`; returns `|lambda(k+1) - lambda(k)|`.
pub fn dual_update(state: &mut ConsensusState, x_new: &JointDecision, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let mut change = Vec::with_capacity(state.num_scenarios());
    for (l, w) in state.lambda.iter_mut().zip(&state.w) {
        let step = (w - x_new.as_vector()) * rho;
        change.push(step.norm_squared());
        *l += step;
    }
    Ok(pairwise_scalar(&change).sqrt())
}

/// `sum_j |w^j - x_prev|^2`.
pub fn consensus_residual(state: &ConsensusState, x_prev: &JointDecision) -> f64 {
    let parts: Vec<f64> = state
        .w
        .iter()
        .map(|w| (w - x_prev.as_vector()).norm_squared())
        .collect();
    pairwise_scalar(&parts)
}

fn check_reference(state: &ConsensusState, reference: &ReferenceSolution) -> Result<()> {
    if reference.lambda_star.len() != state.num_scenarios()
        || reference.x_star.len() != state.x.len()
    {
        return Err(Error::Dimension {
            what: "reference solution".into(),
            expected: state.num_scenarios(),
            actual: reference.lambda_star.len(),
        });
    }
    Ok(())
}

/// `V = (1/rho) |lambda - lambda*|^2 + rho S |x - x*|^2`.
pub fn lyapunov(state: &ConsensusState, reference: &ReferenceSolution, rho: f64) -> Result<f64> {
    check_reference(state, reference)?;
    let (dual, primal) = lyapunov_terms(state, reference, rho);
    Ok(dual + primal)
}

fn lyapunov_terms(state: &ConsensusState, reference: &ReferenceSolution, rho: f64) -> (f64, f64) {
    let parts: Vec<f64> = state
        .lambda
        .iter()
        .zip(&reference.lambda_star)
        .map(|(l, ls)| (l - ls).norm_squared())
        .collect();
    let dual = pairwise_scalar(&parts) / rho;
    let dx = (state.x.as_vector() - reference.x_star.as_vector()).norm_squared();
    (dual, rho * state.num_scenarios() as f64 * dx)
}

/// Norms of the three blocks of the stacked optimality operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViResidual {
    /// `max_j |F(w^j)/S + J^T v^j + lambda^j|_inf`.
    pub stationarity: f64,
    /// `|sum_j lambda^j|_inf`.
    pub multiplier_balance: f64,
    /// `rho |w - M x|_2`.
    pub consensus: f64,
    pub max: f64,
}

/// Evaluates the optimality residual at `state` with subgame multipliers
/// `kkt[j].v` (the primal part `kkt[j].w` must equal `state.w[j]`).
pub fn vi_optimality_residual(
    spec: &GameSpec,
    scenarios: &ScenarioSet,
    state: &ConsensusState,
    kkt: &[KktPoint],
    rho: f64,
) -> Result<ViResidual> {
    let s = scenarios.len();
    if kkt.len() != s || state.num_scenarios() != s {
        return Err(Error::Dimension {
            what: "scenario count of state and multipliers".into(),
            expected: s,
            actual: kkt.len().min(state.num_scenarios()),
        });
    }
    let inv_s = 1.0 / s as f64;
    let mut stationarity = 0.0_f64;
    for (j, theta) in scenarios.iter().enumerate() {
        let w = state.w[j].as_slice();
        let mut r = spec.pseudogradient(w, theta)? * inv_s + &state.lambda[j];
        if spec.dims().total_constraints() > 0 {
            r += spec.joint_constraint_jacobian(w, theta)?.transpose() * &kkt[j].v;
        }
        stationarity = stationarity.max(r.amax());
    }
    let multiplier_balance = state.multiplier_imbalance();
    let consensus = rho * consensus_residual(state, &state.x).sqrt();
    Ok(ViResidual {
        stationarity,
        multiplier_balance,
        consensus,
        max: stationarity.max(multiplier_balance).max(consensus),
    })
}

/// Both sides of the key per-step inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks
/// `(1/rho)(lambda(k+1) - lambda*)^T (lambda(k+1) - lambda(k)) <= rho (w(k+1) - w*)^T (M x(k) - M x(k+1))`
/// for consecutive states `prev = k` and `next = k+1`.
pub fn lemma3_check(
    prev: &ConsensusState,
    next: &ConsensusState,
    reference: &ReferenceSolution,
    rho: f64,
) -> Result<Lemma3Report> {
    check_reference(next, reference)?;
    if prev.num_scenarios() != next.num_scenarios() {
        return Err(Error::Dimension {
            what: "consecutive states".into(),
            expected: prev.num_scenarios(),
            actual: next.num_scenarios(),
        });
    }
    let dx = prev.x.as_vector() - next.x.as_vector();
    let mut lhs_parts = Vec::with_capacity(next.num_scenarios());
    let mut rhs_parts = Vec::with_capacity(next.num_scenarios());
    for j in 0..next.num_scenarios() {
        let dl = &next.lambda[j] - &prev.lambda[j];
        lhs_parts.push((&next.lambda[j] - &reference.lambda_star[j]).dot(&dl));
        rhs_parts.push((&next.w[j] - &reference.w_star[j]).dot(&dx));
    }
    let lhs = pairwise_scalar(&lhs_parts) / rho;
    let rhs = rho * pairwise_scalar(&rhs_parts);
    Ok(Lemma3Report {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-8 * (1.0 + rhs.abs()),
    })
}

/// `1 - 1/(2 kappa^(0.5 + |e|))` with `kappa = L/m`, `e = log_kappa(rho / sqrt(mL))`.
///
/// Written as `1 - 1/(2 sqrt(kappa) max(r, 1/r))`, `r = rho / sqrt(mL)`, which is
/// the same for `kappa > 1` and its limit at `kappa = 1`.
pub fn rate_bound(m: f64, l: f64, rho: f64) -> Result<f64> {
    if !(m > 0.0 && l >= m && rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < m <= L and rho > 0, got m={m}, L={l}, rho={rho}"
        )));
    }
    let kappa = l / m;
    let r = rho / (m * l).sqrt();
    Ok(1.0 - 1.0 / (2.0 * kappa.sqrt() * r.max(1.0 / r)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub bound: f64,
    /// `V(k)/V(k-1)` for `k = 1, 2, ...` (None where `V(k-1) = 0`).
    pub ratios: Vec<Option<f64>>,
    /// Steps with a binding constraint, checked against plain descent.
    pub exempt_steps: Vec<usize>,
    /// Steps breaking the rate (or, if exempt, the descent inequality).
    pub violations: Vec<usize>,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays `trace` against the linear-rate bound. A step counts as binding
/// when some scenario constraint exceeds `-margin`.
pub fn linear_rate_check(
    trace: &SolverTrace,
    m: f64,
    l: f64,
    rho: f64,
    margin: f64,
) -> Result<RateReport> {
    let bound = rate_bound(m, l, rho)?;
    let series = trace.lyapunov_series().ok_or_else(|| {
        Error::InvalidArgument("trace has no Lyapunov values; supply a reference".into())
    })?;
    let mut ratios = Vec::with_capacity(trace.rows.len());
    let mut exempt_steps = Vec::new();
    let mut violations = Vec::new();
    for (k, row) in trace.rows.iter().enumerate() {
        let (prev, next) = (series[k], series[k + 1]);
        let ratio = (prev > 0.0).then(|| next / prev);
        ratios.push(ratio);
        if row.max_constraint > -margin {
            exempt_steps.push(k + 1);
            if next > prev - rho * row.consensus_residual + 1e-8 * (1.0 + prev) {
                violations.push(k + 1);
            }
        } else if next > bound * prev + 1e-9 {
            violations.push(k + 1);
        }
    }
    Ok(RateReport {
        bound,
        ratios,
        exempt_steps,
        violations,
    })
}

/// Runs the consensus ADMM loop.
pub fn run(
    spec: &GameSpec,
    scenarios: &ScenarioSet,
    cfg: &AdmmConfig,
    init: Option<ConsensusState>,
    reference: Option<&ReferenceSolution>,
) -> Result<AdmmOutcome> {
    cfg.validate()?;
    let s = scenarios.len();
    let d = spec.dims().param_dim;
    if let Some(theta) = scenarios.iter().find(|t| t.len() != d) {
        return Err(Error::Dimension {
            what: "scenario parameter".into(),
            expected: d,
            actual: theta.len(),
        });
    }
    let mut state = match init {
        Some(st) => {
            st.validate(spec, s)?;
            st
        }
        None => ConsensusState::zeros(spec, s),
    };
    if let Some(r) = reference {
        check_reference(&state, r)?;
    }
    let workers = cfg.resolved_workers();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;

    let start = Instant::now();
    let mut trace = SolverTrace {
        initial_lyapunov: reference
            .map(|r| lyapunov_terms(&state, r, cfg.rho))
            .map(|(a, b)| a + b),
        rows: Vec::new(),
    };
    let mut history = Vec::new();
    if cfg.record_iterates {
        history.push(state.clone());
    }
    let mut kkt: Vec<KktPoint> = Vec::new();
    let mut status = AdmmStatus::MaxIter;

    for k in 0..cfg.max_iter {
        if let Some(limit) = cfg.max_wall_secs {
            if start.elapsed().as_secs_f64() > limit {
                status = AdmmStatus::WallTimeExceeded;
                break;
            }
        }
        let t_inner = Instant::now();
        let x_k = state.x.clone();
        let lambda_k = &state.lambda;
        let warm = &kkt;
        let results: Vec<Result<(KktPoint, KktResidual, f64)>> = pool.install(|| {
            (0..s)
                .into_par_iter()
                .map(|j| {
                    let theta = scenarios.get(j);
                    let p = ScenarioSubproblem::new(spec, theta, &x_k, &lambda_k[j], cfg.rho, s)?;
                    let point = solve_subgame(&p, warm.get(j), &cfg.inner)?;
                    let res = KktResidual {
                        stationarity: point.stationarity_residual,
                        feasibility: point.feasibility_violation,
                        complementarity: point.complementarity_residual,
                    };
                    let hmax = spec
                        .joint_constraint(point.w.as_slice(), theta)?
                        .iter()
                        .fold(f64::NEG_INFINITY, |m, &h| m.max(h));
                    Ok((point, res, hmax))
                })
                .collect()
        });
        let phase_ms_inner = t_inner.elapsed().as_secs_f64() * 1e3;

        let t_outer = Instant::now();
        let mut points = Vec::with_capacity(s);
        let mut worst = KktResidual {
            stationarity: 0.0,
            feasibility: 0.0,
            complementarity: 0.0,
        };
        let mut min_multiplier = f64::INFINITY;
        let mut max_constraint = f64::NEG_INFINITY;
        let mut failure = None;
        for (j, r) in results.into_iter().enumerate() {
            match r {
                Ok((point, res, hmax)) => {
                    worst.stationarity = worst.stationarity.max(res.stationarity);
                    worst.feasibility = worst.feasibility.max(res.feasibility);
                    worst.complementarity = worst.complementarity.max(res.complementarity);
                    min_multiplier = min_multiplier.min(point.v.min());
                    max_constraint = max_constraint.max(hmax);
                    points.push(point);
                }
                Err(e) => {
                    failure = Some((j, e));
                    break;
                }
            }
        }
        if let Some((scenario, e)) = failure {
            status = AdmmStatus::InnerFailure {
                scenario,
                iteration: k,
                message: e.to_string(),
            };
            break;
        }

        let iters: Vec<usize> = points.iter().map(|p| p.iterations).collect();
        state.w = points.iter().map(|p| p.w.as_vector().clone()).collect();
        let residual = consensus_residual(&state, &x_k);
        let x_new = consensus_update(&state, cfg.rho)?;
        let dual_change = dual_update(&mut state, &x_new, cfg.rho)?;
        state.x = x_new;
        state.iteration = k + 1;
        if !residual.is_finite()
            || state.x.as_slice().iter().any(|v| !v.is_finite())
            || state
                .lambda
                .iter()
                .any(|l| l.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFiniteIterate { iteration: k });
        }
        kkt = points;
        let phase_ms_outer = t_outer.elapsed().as_secs_f64() * 1e3;

        if cfg.record_trace {
            let terms = reference.map(|r| lyapunov_terms(&state, r, cfg.rho));
            trace.rows.push(TraceRow {
                k,
                consensus_residual: residual,
                dual_change,
                lyapunov: terms.map(|(a, b)| a + b),
                primal_term: terms.map(|(_, b)| b),
                inner_iter_min: iters.iter().copied().min().unwrap_or(0),
                inner_iter_mean: iters.iter().sum::<usize>() as f64 / s as f64,
                inner_iter_max: iters.iter().copied().max().unwrap_or(0),
                phase_ms_inner,
                phase_ms_outer,
                inner_worst: worst,
                min_multiplier,
                max_constraint,
                multiplier_imbalance: state.multiplier_imbalance(),
                multiplier_max: state.multiplier_max(),
            });
        }
        if cfg.record_iterates {
            history.push(state.clone());
        }
        if residual <= cfg.tol {
            status = AdmmStatus::Converged;
            break;
        }
    }

    Ok(AdmmOutcome {
        x: state.x.clone(),
        state,
        trace,
        status,
        kkt,
        history,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{sample_scenarios, Sampler};
    use crate::fixtures::{decoupled_quadratic, self_quadratic};

    fn state_from(w: Vec<Vec<f64>>, lambda: Vec<Vec<f64>>, x: Vec<f64>) -> ConsensusState {
        let p = x.len();
        ConsensusState {
            w: w.into_iter().map(DVector::from_vec).collect(),
            lambda: lambda.into_iter().map(DVector::from_vec).collect(),
            x: JointDecision::new(1, p, x).unwrap(),
            iteration: 0,
        }
    }

    #[test]
    fn single_scenario_consensus_is_the_copy() {
        let st = state_from(vec![vec![1.5, -2.0]], vec![vec![0.0, 0.0]], vec![0.0, 0.0]);
        assert_eq!(consensus_update(&st, 5.0).unwrap().as_slice(), &[1.5, -2.0]);
    }

    #[test]
    fn identical_copies_with_zero_sum_multipliers() {
        let st = state_from(
            vec![vec![0.7], vec![0.7], vec![0.7]],
            vec![vec![1.0], vec![-3.0], vec![2.0]],
            vec![0.0],
        );
        let x = consensus_update(&st, 5.0).unwrap();
        assert!((x.as_slice()[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn consensus_matches_plain_mean() {
        let w = vec![vec![0.3, -1.2], vec![2.5, 0.1], vec![-0.4, 0.9]];
        let l = vec![vec![0.5, 0.25], vec![-1.0, 2.0], vec![0.5, -2.25]];
        let st = state_from(w.clone(), l.clone(), vec![0.0, 0.0]);
        let rho = 2.0;
        let x = consensus_update(&st, rho).unwrap();
        for c in 0..2 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += l[j][c] / rho + w[j][c];
            }
            assert!((x.as_slice()[c] - acc / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dual_update_on_symmetric_copies() {
        let a = 0.25;
        let mut st = state_from(
            vec![vec![a], vec![-a]],
            vec![vec![0.0], vec![0.0]],
            vec![0.0],
        );
        let x = JointDecision::new(1, 1, vec![0.0]).unwrap();
        dual_update(&mut st, &x, 5.0).unwrap();
        assert_eq!(st.lambda[0][0], 5.0 * a);
        assert_eq!(st.lambda[1][0], -5.0 * a);
        assert_eq!(st.multiplier_imbalance(), 0.0);

        let mut still = state_from(
            vec![vec![1.0], vec![1.0]],
            vec![vec![0.3], vec![-0.3]],
            vec![1.0],
        );
        let before = still.lambda.clone();
        let x = JointDecision::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(dual_update(&mut still, &x, 5.0).unwrap(), 0.0);
        assert_eq!(still.lambda, before);
    }

    #[test]
    fn residual_definitions() {
        let st = state_from(vec![vec![1.0, 0.0]], vec![vec![0.0, 0.0]], vec![0.0, 0.0]);
        let x0 = JointDecision::new(1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(consensus_residual(&st, &x0), 1.0);
        let x1 = JointDecision::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert_eq!(consensus_residual(&st, &x1), 0.0);
    }

    #[test]
    fn lyapunov_replicates_across_scenarios() {
        let p = 2;
        let st = ConsensusState {
            w: vec![DVector::zeros(p); 10],
            x: JointDecision::new(1, p, vec![1.0, 0.0]).unwrap(),
            lambda: vec![DVector::zeros(p); 10],
            iteration: 0,
        };
        let reference = ReferenceSolution::from_parts(
            JointDecision::new(1, p, vec![0.0, 0.0]).unwrap(),
            vec![DVector::zeros(p); 10],
        );
        assert_eq!(lyapunov(&st, &reference, 5.0).unwrap(), 50.0);
        let at_ref = ReferenceSolution::from_parts(st.x.clone(), st.lambda.clone());
        assert_eq!(lyapunov(&st, &at_ref, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn rate_bound_arithmetic() {
        assert!((rate_bound(1.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        // kappa = 4, rho = 2 sqrt(mL): e = log_4 2 = 0.5 -> 1 - 1/(2 * 4)
        assert!((rate_bound(1.0, 4.0, 4.0).unwrap() - (1.0 - 1.0 / 8.0)).abs() < 1e-15);
        let direct = |m: f64, l: f64, rho: f64| {
            let kappa: f64 = l / m;
            let e = (rho / (m * l).sqrt()).ln() / kappa.ln();
            1.0 - 1.0 / (2.0 * kappa.powf(0.5 + e.abs()))
        };
        for (m, l, rho) in [(0.1, 0.7, 5.0), (2.0, 3.0, 0.5), (0.02, 0.02 * 9.0, 1.0)] {
            assert!((rate_bound(m, l, rho).unwrap() - direct(m, l, rho)).abs() < 1e-12);
        }
        assert!(rate_bound(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn single_scenario_keeps_multipliers_zero() {
        let spec = self_quadratic(2, 1);
        let set = ScenarioSet::from_vectors(vec![vec![0.0]]).unwrap();
        let cfg = AdmmConfig {
            workers: Some(1),
            record_iterates: true,
            ..Default::default()
        };
        let out = run(&spec, &set, &cfg, None, None).unwrap();
        assert_eq!(out.status, AdmmStatus::Converged);
        for st in &out.history {
            assert!(st.lambda[0].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn decoupled_quadratic_reaches_the_sample_mean() {
        let spec = decoupled_quadratic(2, 2, 1.0);
        let set = sample_scenarios(spec.param_sampler(), 7, 21).unwrap();
        let cfg = AdmmConfig {
            workers: Some(2),
            tol: 1e-14,
            ..Default::default()
        };
        let out = run(&spec, &set, &cfg, None, None).unwrap();
        assert_eq!(out.status, AdmmStatus::Converged);
        for c in 0..4 {
            let mean: f64 = set.iter().map(|t| t[c]).sum::<f64>() / 7.0;
            assert!((out.x.as_slice()[c] - mean).abs() < 1e-6);
        }
    }

    #[test]
    fn trace_csv_header_and_empty_timing() {
        let spec = decoupled_quadratic(1, 1, 1.0);
        let sampler = Sampler::uniform("u", vec![(-1.0, 1.0)]).unwrap();
        let set = sample_scenarios(&sampler, 3, 1).unwrap();
        let cfg = AdmmConfig {
            workers: Some(1),
            ..Default::default()
        };
        let out = run(&spec, &set, &cfg, None, None).unwrap();
        let csv = out.trace.to_csv_string(false).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,consensus_residual,dual_change,lyapunov,inner_iter_min,inner_iter_mean,inner_iter_max,phase_ms_inner,phase_ms_outer"
        );
        assert!(lines.next().unwrap().ends_with(",,"));
    }
}

//! Scenario sampling and sample-complexity certificates.
//!
//! For `S` i.i.d. scenarios the scenario game's empirical objectives are
//! `eps_tilde`-accurate and every solution of the sampled constraints is
//! `eps`-level chance-feasible, simultaneously for all players, with
//! probability at least `1 - delta`, where
//!
//! ```text
//! delta_1 = 2N exp(-S eps_tilde^2 / (4 D^2)) +   sum_{l=0}^{N n - 1} C(S, l) eps^l (1 - eps)^(S - l)
//! delta_2 = 2N exp(-S eps_tilde^2 / (4 D^2)) + N sum_{l=0}^{n - 1}   C(S, l) eps^l (1 - eps)^(S - l)
//! ```
//!
//! `delta_2` applies only when each player's constraint depends on its own
//! decision block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, JointDecision};

/// Closed interval for one coordinate of a uniform box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

/// A coordinate-wise uniform distribution over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    id: String,
    ranges: Vec<UniformRange>,
}

impl Sampler {
    pub fn uniform(id: impl Into<String>, ranges: Vec<(f64, f64)>) -> Result<Self> {
        let ranges = ranges
            .into_iter()
            .enumerate()
            .map(|(k, (lo, hi))| {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "coordinate {k}: non-finite range [{lo}, {hi}]"
                    )));
                }
                if lo > hi {
                    return Err(Error::InvalidArgument(format!(
                        "coordinate {k}: empty range [{lo}, {hi}]"
                    )));
                }
                Ok(UniformRange { lo, hi })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            id: id.into(),
            ranges,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[UniformRange] {
        &self.ranges
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.ranges
            .iter()
            .map(|r| r.lo + (r.hi - r.lo) * rng.gen::<f64>())
            .collect()
    }
}

/// `S` parameter draws together with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    scenarios: Vec<Vec<f64>>,
    seed: u64,
    sampler_id: String,
}

impl ScenarioSet {
    /// Wraps explicit parameter vectors (seed recorded as 0).
    pub fn from_vectors(scenarios: Vec<Vec<f64>>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::InvalidArgument("a scenario set needs S >= 1".into()));
        }
        let d = scenarios[0].len();
        for (j, s) in scenarios.iter().enumerate() {
            if s.len() != d {
                return Err(Error::Dimension {
                    what: format!("scenario {j}"),
                    expected: d,
                    actual: s.len(),
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "scenario {j} is not finite"
                )));
            }
        }
        Ok(Self {
            scenarios,
            seed: 0,
            sampler_id: "explicit".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.scenarios[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.scenarios.iter().map(Vec::as_slice)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sampler_id(&self) -> &str {
        &self.sampler_id
    }

    /// The first `count` scenarios.
    pub fn truncated(&self, count: usize) -> Self {
        Self {
            scenarios: self.scenarios[..count.min(self.len())].to_vec(),
            seed: self.seed,
            sampler_id: self.sampler_id.clone(),
        }
    }
}

/// Draws `S` i.i.d. scenarios; identical `(sampler, S, seed)` give identical sets.
pub fn sample_scenarios(sampler: &Sampler, sample_size: usize, seed: u64) -> Result<ScenarioSet> {
    if sample_size == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenarios = (0..sample_size).map(|_| sampler.draw(&mut rng)).collect();
    Ok(ScenarioSet {
        scenarios,
        seed,
        sampler_id: sampler.id.clone(),
    })
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `sum_{l=0}^{k_max} C(S, l) eps^l (1 - eps)^(S - l)`, evaluated in log space.
pub fn binomial_tail(sample_size: u64, eps: f64, k_max: u64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if k_max > sample_size {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} exceeds S = {sample_size}"
        )));
    }
    let s = sample_size as f64;
    let ln_eps = eps.ln();
    let ln_comp = (-eps).ln_1p();
    let mut ln_choose = 0.0;
    let mut log_terms = Vec::with_capacity(k_max as usize + 1);
    for l in 0..=k_max {
        if l > 0 {
            let lf = l as f64;
            ln_choose += ((s - lf + 1.0) / lf).ln();
        }
        let lf = l as f64;
        log_terms.push(ln_choose + lf * ln_eps + (s - lf) * ln_comp);
    }
    let peak = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let scaled = compensated_sum(log_terms.iter().map(|t| (t - peak).exp()));
    Ok((peak.exp() * scaled).clamp(0.0, 1.0))
}

/// Which sample-complexity bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proposition {
    /// Coupled constraints: tail over `N n` support dimensions.
    Coupled,
    /// Per-player independent constraints: `N` tails over `n` dimensions each.
    Separable,
}

/// Inputs to the certificate formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateQuery {
    pub sample_size: u64,
    pub failure_prob: f64,
    pub objective_tol: f64,
    pub objective_bound: f64,
    pub num_players: u64,
    pub decision_dim: u64,
    pub separable: bool,
}

impl CertificateQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.failure_prob > 0.0 && self.failure_prob < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "failure probability must lie in (0, 1), got {}",
                self.failure_prob
            )));
        }
        if !(self.objective_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "objective tolerance must be > 0".into(),
            ));
        }
        if !(self.objective_bound > 0.0) {
            return Err(Error::InvalidArgument("objective bound must be > 0".into()));
        }
        if self.sample_size == 0 || self.num_players == 0 || self.decision_dim == 0 {
            return Err(Error::InvalidArgument("S, N and n must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_sample_size(&self, sample_size: u64) -> Self {
        Self {
            sample_size,
            ..self.clone()
        }
    }

    /// `2N exp(-S eps_tilde^2 / (4 D^2))`.
    pub fn exp_term(&self) -> f64 {
        let s = self.sample_size as f64;
        let d = self.objective_bound;
        2.0 * self.num_players as f64
            * (-s * self.objective_tol * self.objective_tol / (4.0 * d * d)).exp()
    }

    /// Binomial-tail term of the chosen bound.
    pub fn tail_term(&self, proposition: Proposition) -> Result<f64> {
        let support = match proposition {
            Proposition::Coupled => self.num_players * self.decision_dim,
            Proposition::Separable => self.decision_dim,
        };
        // C(S, l) = 0 for l > S, so the sum saturates at the full support.
        let k_max = (support - 1).min(self.sample_size);
        let tail = binomial_tail(self.sample_size, self.failure_prob, k_max)?;
        Ok(match proposition {
            Proposition::Coupled => tail,
            Proposition::Separable => self.num_players as f64 * tail,
        })
    }
}

pub fn delta_prop1(q: &CertificateQuery) -> Result<f64> {
    q.validate()?;
    Ok(q.exp_term() + q.tail_term(Proposition::Coupled)?)
}

pub fn delta_prop2(q: &CertificateQuery) -> Result<f64> {
    q.validate()?;
    if !q.separable {
        return Err(Error::NotSeparable);
    }
    Ok(q.exp_term() + q.tail_term(Proposition::Separable)?)
}

pub fn delta(q: &CertificateQuery, proposition: Proposition) -> Result<f64> {
    match proposition {
        Proposition::Coupled => delta_prop1(q),
        Proposition::Separable => delta_prop2(q),
    }
}

/// Largest sample size searched by [`min_samples`].
pub const MAX_SAMPLES: u64 = 100_000_000;

/// Smallest `S` with `delta(S) <= target`. `template.sample_size` is ignored.
pub fn min_samples(
    target: f64,
    template: &CertificateQuery,
    proposition: Proposition,
) -> Result<u64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target delta must lie in (0, 1], got {target}"
        )));
    }
    let eval = |s: u64| delta(&template.with_sample_size(s), proposition);
    if eval(1)? <= target {
        return Ok(1);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    loop {
        if eval(hi)? <= target {
            break;
        }
        if hi == MAX_SAMPLES {
            return Err(Error::CertificateUnreachable {
                target,
                limit: MAX_SAMPLES,
                achieved: eval(MAX_SAMPLES)?,
            });
        }
        lo = hi;
        hi = (hi * 2).min(MAX_SAMPLES);
    }
    // invariant: delta(lo) > target >= delta(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if eval(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    debug_assert!(eval(hi)? <= target && eval(hi - 1)? > target);
    Ok(hi)
}

/// `(1/S) sum_j f_i(x; theta^j)`, summed in ascending scenario order.
pub fn empirical_objective(
    spec: &GameSpec,
    x: &JointDecision,
    scenarios: &ScenarioSet,
    player: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (j, theta) in scenarios.iter().enumerate() {
        let value = spec
            .objective(x.as_slice(), theta, player)
            .map_err(|e| match e {
                Error::NonFinite {
                    callback, player, ..
                } => Error::NonFinite {
                    callback,
                    player,
                    context: format!("scenario {j}"),
                },
                other => other,
            })?;
        total += value;
    }
    Ok(total / scenarios.len() as f64)
}

/// Serializable certificate summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    #[serde(rename = "S")]
    pub sample_size: u64,
    pub eps: f64,
    pub eps_tilde: f64,
    #[serde(rename = "D")]
    pub objective_bound: f64,
    #[serde(rename = "N")]
    pub num_players: u64,
    pub n: u64,
    pub delta_prop1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_prop2: Option<f64>,
    pub exp_term: f64,
    pub tail_term: f64,
}

pub fn certify(q: &CertificateQuery) -> Result<CertificateReport> {
    let delta_prop1 = delta_prop1(q)?;
    let delta_prop2 = if q.separable {
        Some(delta_prop2(q)?)
    } else {
        None
    };
    Ok(CertificateReport {
        sample_size: q.sample_size,
        eps: q.failure_prob,
        eps_tilde: q.objective_tol,
        objective_bound: q.objective_bound,
        num_players: q.num_players,
        n: q.decision_dim,
        delta_prop1,
        delta_prop2,
        exp_term: q.exp_term(),
        tail_term: q.tail_term(Proposition::Coupled)?,
    })
}

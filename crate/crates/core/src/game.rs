//! Parametric N-player games: objectives, pseudogradient, coupled constraints.
//!
//! A [`GameSpec`] wraps user callbacks behind dimension and finiteness checks.
//! Callbacks always receive the full joint decision `x = (x_1, .., x_N)` and a
//! parameter vector `theta`; the library assembles the joint constraint
//! `h(x; theta)` by stacking the per-player vectors `h_i`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certificates::Sampler;
use crate::error::{Error, Result};

/// Central-difference step for coordinate value `c`.
pub fn fd_step(c: f64) -> f64 {
    f64::EPSILON.cbrt() * c.abs().max(1.0)
}

/// Problem dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GameDims {
    pub num_players: usize,
    pub decision_dim: usize,
    pub param_dim: usize,
    /// Number of constraint rows contributed by each player.
    pub constraint_dims: Vec<usize>,
}

impl GameDims {
    pub fn new(num_players: usize, decision_dim: usize, param_dim: usize) -> Self {
        Self {
            num_players,
            decision_dim,
            param_dim,
            constraint_dims: vec![0; num_players],
        }
    }

    /// Same number of constraint rows `rows` for every player.
    pub fn with_uniform_constraints(mut self, rows: usize) -> Self {
        self.constraint_dims = vec![rows; self.num_players];
        self
    }

    pub fn with_constraint_dims(mut self, dims: Vec<usize>) -> Self {
        self.constraint_dims = dims;
        self
    }

    pub fn joint_dim(&self) -> usize {
        self.num_players * self.decision_dim
    }

    pub fn total_constraints(&self) -> usize {
        self.constraint_dims.iter().sum()
    }

    /// First row of player `i`'s block in the stacked constraint vector.
    pub fn constraint_offset(&self, player: usize) -> usize {
        self.constraint_dims[..player].iter().sum()
    }

    pub fn block_range(&self, player: usize) -> std::ops::Range<usize> {
        player * self.decision_dim..(player + 1) * self.decision_dim
    }

    fn validate(&self) -> Result<()> {
        if self.num_players == 0 || self.decision_dim == 0 {
            return Err(Error::InvalidArgument(
                "num_players and decision_dim must be positive".into(),
            ));
        }
        if self.constraint_dims.len() != self.num_players {
            return Err(Error::Dimension {
                what: "constraint_dims".into(),
                expected: self.num_players,
                actual: self.constraint_dims.len(),
            });
        }
        Ok(())
    }
}

/// The joint decision `x = (x_1, .., x_N)`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDecision {
    data: DVector<f64>,
    num_players: usize,
    decision_dim: usize,
}

impl JointDecision {
    pub fn new(num_players: usize, decision_dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_players * decision_dim {
            return Err(Error::Dimension {
                what: "joint decision".into(),
                expected: num_players * decision_dim,
                actual: data.len(),
            });
        }
        Ok(Self {
            data: DVector::from_vec(data),
            num_players,
            decision_dim,
        })
    }

    pub fn zeros(dims: &GameDims) -> Self {
        Self {
            data: DVector::zeros(dims.joint_dim()),
            num_players: dims.num_players,
            decision_dim: dims.decision_dim,
        }
    }

    pub fn from_vector(dims: &GameDims, data: DVector<f64>) -> Result<Self> {
        Self::new(dims.num_players, dims.decision_dim, data.data.into())
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn decision_dim(&self) -> usize {
        self.decision_dim
    }

    pub fn block(&self, player: usize) -> &[f64] {
        let n = self.decision_dim;
        &self.data.as_slice()[player * n..(player + 1) * n]
    }

    pub fn block_mut(&mut self, player: usize) -> &mut [f64] {
        let n = self.decision_dim;
        &mut self.data.as_mut_slice()[player * n..(player + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// User-supplied game callbacks. Implementations must be pure functions of
/// their arguments; they are evaluated concurrently from many threads.
pub trait GameCallbacks: Send + Sync {
    /// `f_i(x; theta)`.
    fn objective(&self, x: &[f64], theta: &[f64], player: usize) -> f64;

    /// `grad_{x_i} f_i(x; theta)`, length `decision_dim`.
    fn objective_gradient(&self, x: &[f64], theta: &[f64], player: usize) -> Vec<f64>;

    /// `h_i(x; theta)`; feasible iff every entry is `<= 0`.
    fn constraint(&self, _x: &[f64], _theta: &[f64], _player: usize) -> Vec<f64> {
        Vec::new()
    }

    /// Jacobian of `h_i` with respect to the whole joint decision, `l_i x (N n)`.
    fn constraint_jacobian(&self, x: &[f64], _theta: &[f64], _player: usize) -> DMatrix<f64> {
        DMatrix::zeros(0, x.len())
    }

    /// Jacobian of the pseudogradient, `(N n) x (N n)`. `None` falls back to
    /// finite differences.
    fn pseudogradient_jacobian(&self, _x: &[f64], _theta: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// `sum_k weights_k * hess h_{i,k}(x)`, `(N n) x (N n)`. `None` falls back
    /// to finite differences of the weighted Jacobian.
    fn constraint_curvature(
        &self,
        _x: &[f64],
        _theta: &[f64],
        _player: usize,
        _weights: &[f64],
    ) -> Option<DMatrix<f64>> {
        None
    }
}

type ScalarFn = dyn Fn(&[f64], &[f64], usize) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64], &[f64], usize) -> Vec<f64> + Send + Sync;
type MatrixFn = dyn Fn(&[f64], &[f64], usize) -> DMatrix<f64> + Send + Sync;

/// Closure-backed [`GameCallbacks`], convenient for small games and tests.
pub struct ClosureGame {
    objective: Arc<ScalarFn>,
    gradient: Arc<VectorFn>,
    constraint: Option<Arc<VectorFn>>,
    jacobian: Option<Arc<MatrixFn>>,
}

impl ClosureGame {
    pub fn new<F, G>(objective: F, gradient: G) -> Self
    where
        F: Fn(&[f64], &[f64], usize) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], usize) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            constraint: None,
            jacobian: None,
        }
    }

    pub fn with_constraints<H, J>(mut self, constraint: H, jacobian: J) -> Self
    where
        H: Fn(&[f64], &[f64], usize) -> Vec<f64> + Send + Sync + 'static,
        J: Fn(&[f64], &[f64], usize) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.constraint = Some(Arc::new(constraint));
        self.jacobian = Some(Arc::new(jacobian));
        self
    }
}

impl GameCallbacks for ClosureGame {
    fn objective(&self, x: &[f64], theta: &[f64], player: usize) -> f64 {
        (self.objective)(x, theta, player)
    }

    fn objective_gradient(&self, x: &[f64], theta: &[f64], player: usize) -> Vec<f64> {
        (self.gradient)(x, theta, player)
    }

    fn constraint(&self, x: &[f64], theta: &[f64], player: usize) -> Vec<f64> {
        match &self.constraint {
            Some(h) => h(x, theta, player),
            None => Vec::new(),
        }
    }

    fn constraint_jacobian(&self, x: &[f64], theta: &[f64], player: usize) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(x, theta, player),
            None => DMatrix::zeros(0, x.len()),
        }
    }
}

/// An immutable N-player parametric game.
#[derive(Clone)]
pub struct GameSpec {
    dims: GameDims,
    callbacks: Arc<dyn GameCallbacks>,
    objective_bound: f64,
    separable_constraints: bool,
    param_sampler: Sampler,
    probe_radius: f64,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("dims", &self.dims)
            .field("objective_bound", &self.objective_bound)
            .field("separable_constraints", &self.separable_constraints)
            .field("param_sampler", &self.param_sampler.id())
            .finish()
    }
}

impl GameSpec {
    pub fn new(dims: GameDims, callbacks: impl GameCallbacks + 'static) -> Result<Self> {
        Self::from_arc(dims, Arc::new(callbacks))
    }

    pub fn from_arc(dims: GameDims, callbacks: Arc<dyn GameCallbacks>) -> Result<Self> {
        dims.validate()?;
        let param_sampler = Sampler::uniform("unit-box", vec![(0.0, 1.0); dims.param_dim])?;
        Ok(Self {
            dims,
            callbacks,
            objective_bound: 1.0,
            separable_constraints: false,
            param_sampler,
            probe_radius: 1.0,
        })
    }

    /// Declares `sup |f_i| <= bound`.
    pub fn with_objective_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "objective bound must be positive, got {bound}"
            )));
        }
        self.objective_bound = bound;
        Ok(self)
    }

    /// Declares that each `h_i` depends on `x_i` only.
    pub fn with_separable_constraints(mut self, separable: bool) -> Self {
        self.separable_constraints = separable;
        self
    }

    /// Distribution used by the validation probes to draw `theta`.
    pub fn with_param_sampler(mut self, sampler: Sampler) -> Result<Self> {
        if sampler.dim() != self.dims.param_dim {
            return Err(Error::Dimension {
                what: "param sampler".into(),
                expected: self.dims.param_dim,
                actual: sampler.dim(),
            });
        }
        self.param_sampler = sampler;
        Ok(self)
    }

    /// Validation probes draw decisions uniformly from `[-radius, radius]^(N n)`.
    pub fn with_probe_radius(mut self, radius: f64) -> Self {
        self.probe_radius = radius;
        self
    }

    pub fn dims(&self) -> &GameDims {
        &self.dims
    }

    pub fn objective_bound(&self) -> f64 {
        self.objective_bound
    }

    pub fn separable_constraints(&self) -> bool {
        self.separable_constraints
    }

    pub fn param_sampler(&self) -> &Sampler {
        &self.param_sampler
    }

    pub fn probe_radius(&self) -> f64 {
        self.probe_radius
    }

    fn check_inputs(&self, x: &[f64], theta: &[f64]) -> Result<()> {
        if x.len() != self.dims.joint_dim() {
            return Err(Error::Dimension {
                what: "joint decision".into(),
                expected: self.dims.joint_dim(),
                actual: x.len(),
            });
        }
        if theta.len() != self.dims.param_dim {
            return Err(Error::Dimension {
                what: "parameter vector".into(),
                expected: self.dims.param_dim,
                actual: theta.len(),
            });
        }
        Ok(())
    }

    fn non_finite(callback: &'static str, player: usize, x: &[f64]) -> Error {
        Error::NonFinite {
            callback,
            player,
            context: format!("x = {x:?}"),
        }
    }

    pub fn objective(&self, x: &[f64], theta: &[f64], player: usize) -> Result<f64> {
        self.check_inputs(x, theta)?;
        let value = self.callbacks.objective(x, theta, player);
        if !value.is_finite() {
            return Err(Self::non_finite("objective", player, x));
        }
        Ok(value)
    }

    /// `grad_{x_i} f_i`, checked for length and finiteness.
    pub fn player_gradient(&self, x: &[f64], theta: &[f64], player: usize) -> Result<Vec<f64>> {
        self.check_inputs(x, theta)?;
        let g = self.callbacks.objective_gradient(x, theta, player);
        if g.len() != self.dims.decision_dim {
            return Err(Error::Dimension {
                what: format!("gradient block of player {player}"),
                expected: self.dims.decision_dim,
                actual: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Self::non_finite("objective_gradient", player, x));
        }
        Ok(g)
    }

    /// Stacked own-block gradients `F(x; theta) = [grad_{x_i} f_i]_i`.
    pub fn pseudogradient(&self, x: &[f64], theta: &[f64]) -> Result<DVector<f64>> {
        let n = self.dims.decision_dim;
        let mut out = DVector::zeros(self.dims.joint_dim());
        for i in 0..self.dims.num_players {
            let g = self.player_gradient(x, theta, i)?;
            out.as_mut_slice()[i * n..(i + 1) * n].copy_from_slice(&g);
        }
        Ok(out)
    }

    pub fn player_constraint(&self, x: &[f64], theta: &[f64], player: usize) -> Result<Vec<f64>> {
        self.check_inputs(x, theta)?;
        let h = self.callbacks.constraint(x, theta, player);
        if h.len() != self.dims.constraint_dims[player] {
            return Err(Error::Dimension {
                what: format!("constraint block of player {player}"),
                expected: self.dims.constraint_dims[player],
                actual: h.len(),
            });
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Self::non_finite("constraint", player, x));
        }
        Ok(h)
    }

    /// Stacked joint constraint `h(x; theta) = [h_i(x; theta)]_i`.
    pub fn joint_constraint(&self, x: &[f64], theta: &[f64]) -> Result<DVector<f64>> {
        let mut out = Vec::with_capacity(self.dims.total_constraints());
        for i in 0..self.dims.num_players {
            out.extend(self.player_constraint(x, theta, i)?);
        }
        Ok(DVector::from_vec(out))
    }

    pub fn player_constraint_jacobian(
        &self,
        x: &[f64],
        theta: &[f64],
        player: usize,
    ) -> Result<DMatrix<f64>> {
        self.check_inputs(x, theta)?;
        let jac = self.callbacks.constraint_jacobian(x, theta, player);
        let rows = self.dims.constraint_dims[player];
        if jac.nrows() != rows || jac.ncols() != self.dims.joint_dim() {
            return Err(Error::Dimension {
                what: format!(
                    "constraint jacobian of player {player} ({rows} x {})",
                    x.len()
                ),
                expected: rows * x.len(),
                actual: jac.nrows() * jac.ncols(),
            });
        }
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Self::non_finite("constraint_jacobian", player, x));
        }
        Ok(jac)
    }

    /// Jacobian of the stacked joint constraint, `m x (N n)`.
    pub fn joint_constraint_jacobian(&self, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.dims.total_constraints();
        let mut out = DMatrix::zeros(m, self.dims.joint_dim());
        for i in 0..self.dims.num_players {
            let rows = self.dims.constraint_dims[i];
            if rows == 0 {
                continue;
            }
            let jac = self.player_constraint_jacobian(x, theta, i)?;
            let off = self.dims.constraint_offset(i);
            out.view_mut((off, 0), (rows, x.len())).copy_from(&jac);
        }
        Ok(out)
    }

    /// Jacobian of the pseudogradient: analytic when the callbacks provide
    /// it, central differences otherwise.
    pub fn pseudogradient_jacobian(&self, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_inputs(x, theta)?;
        if let Some(jac) = self.callbacks.pseudogradient_jacobian(x, theta) {
            let p = self.dims.joint_dim();
            if jac.nrows() != p || jac.ncols() != p {
                return Err(Error::Dimension {
                    what: "pseudogradient jacobian".into(),
                    expected: p * p,
                    actual: jac.nrows() * jac.ncols(),
                });
            }
            if jac.iter().any(|v| !v.is_finite()) {
                return Err(Self::non_finite("pseudogradient_jacobian", 0, x));
            }
            return Ok(jac);
        }
        central_difference_jacobian(x, |y| self.pseudogradient(y, theta))
    }

    /// `sum_k v_k * hess h_k(x)` over all stacked rows.
    pub fn constraint_curvature(
        &self,
        x: &[f64],
        theta: &[f64],
        weights: &[f64],
    ) -> Result<DMatrix<f64>> {
        self.check_inputs(x, theta)?;
        let p = self.dims.joint_dim();
        let mut total = DMatrix::zeros(p, p);
        for i in 0..self.dims.num_players {
            let rows = self.dims.constraint_dims[i];
            if rows == 0 {
                continue;
            }
            let off = self.dims.constraint_offset(i);
            let w = &weights[off..off + rows];
            if w.iter().all(|&v| v == 0.0) {
                continue;
            }
            match self.callbacks.constraint_curvature(x, theta, i, w) {
                Some(c) => {
                    if c.nrows() != p || c.ncols() != p {
                        return Err(Error::Dimension {
                            what: format!("constraint curvature of player {i}"),
                            expected: p * p,
                            actual: c.nrows() * c.ncols(),
                        });
                    }
                    total += c;
                }
                None => {
                    let wv = DVector::from_column_slice(w);
                    let fd = central_difference_jacobian(x, |y| {
                        Ok(self.player_constraint_jacobian(y, theta, i)?.transpose() * &wv)
                    })?;
                    // symmetrize the finite-difference Hessian
                    total += (&fd + fd.transpose()) * 0.5;
                }
            }
        }
        if total.iter().any(|v| !v.is_finite()) {
            return Err(Self::non_finite("constraint_curvature", 0, x));
        }
        Ok(total)
    }

    fn probe_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let r = self.probe_radius;
        (0..self.dims.joint_dim())
            .map(|_| -r + 2.0 * r * rng.gen::<f64>())
            .collect()
    }
}

/// Pseudogradient `F(x; theta)`.
pub fn pseudogradient(spec: &GameSpec, x: &JointDecision, theta: &[f64]) -> Result<DVector<f64>> {
    if x.num_players() != spec.dims.num_players || x.decision_dim() != spec.dims.decision_dim {
        return Err(Error::Dimension {
            what: "joint decision blocks".into(),
            expected: spec.dims.joint_dim(),
            actual: x.len(),
        });
    }
    spec.pseudogradient(x.as_slice(), theta)
}

/// Central-difference Jacobian of a vector map.
pub(crate) fn central_difference_jacobian<F>(x: &[f64], mut map: F) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<DVector<f64>>,
{
    let mut probe = x.to_vec();
    let mut columns = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = fd_step(x[k]);
        probe[k] = x[k] + h;
        let plus = map(&probe)?;
        probe[k] = x[k] - h;
        let minus = map(&probe)?;
        probe[k] = x[k];
        columns.push((plus - minus) / (2.0 * h));
    }
    if columns.is_empty() {
        let rows = map(x)?.len();
        return Ok(DMatrix::zeros(rows, 0));
    }
    Ok(DMatrix::from_columns(&columns))
}

/// Outcome of [`check_monotonicity`].
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub min_inner_product: f64,
    pub num_pairs: usize,
    pub tolerance: f64,
    /// `(x, y, theta)` of the worst pair when it falls below `-tolerance`.
    pub violating_pair: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.violating_pair.is_none()
    }
}

/// Default tolerance below which a negative inner product counts as a violation.
pub const MONOTONICITY_TOL: f64 = 1e-10;

/// Samples `(x, y, theta)` triples and records the minimum of
/// `(x - y)^T (F(x; theta) - F(y; theta))`.
pub fn check_monotonicity(
    spec: &GameSpec,
    num_pairs: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    check_monotonicity_with_tol(spec, num_pairs, seed, MONOTONICITY_TOL)
}

pub fn check_monotonicity_with_tol(
    spec: &GameSpec,
    num_pairs: usize,
    seed: u64,
    tolerance: f64,
) -> Result<MonotonicityReport> {
    if num_pairs == 0 {
        return Err(Error::InvalidArgument("num_pairs must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = f64::INFINITY;
    let mut worst = None;
    for _ in 0..num_pairs {
        let theta = spec.param_sampler.draw(&mut rng);
        let x = spec.probe_point(&mut rng);
        let y = spec.probe_point(&mut rng);
        let fx = spec.pseudogradient(&x, &theta)?;
        let fy = spec.pseudogradient(&y, &theta)?;
        let diff = DVector::from_iterator(x.len(), x.iter().zip(&y).map(|(a, b)| a - b));
        let inner = diff.dot(&(fx - fy));
        if inner < min {
            min = inner;
            worst = Some((x, y, theta));
        }
    }
    let violating_pair = if min < -tolerance { worst } else { None };
    Ok(MonotonicityReport {
        min_inner_product: min,
        num_pairs,
        tolerance,
        violating_pair,
    })
}

/// Outcome of [`gradient_consistency_check`].
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub max_gradient_deviation: f64,
    pub max_jacobian_deviation: f64,
    /// `(player, point)` where the largest deviation occurred.
    pub worst_player: usize,
    pub threshold: f64,
}

impl ConsistencyReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_gradient_deviation.max(self.max_jacobian_deviation)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= self.threshold
    }
}

pub const CONSISTENCY_THRESHOLD: f64 = 1e-4;

fn relative_deviation(supplied: &[f64], reference: &[f64]) -> f64 {
    let diff = supplied
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = supplied
        .iter()
        .chain(reference)
        .map(|v| v.abs())
        .fold(1e-6, f64::max);
    diff / scale
}

/// Compares supplied gradients and constraint Jacobians against central
/// differences of the objective and constraint callbacks.
pub fn gradient_consistency_check(
    spec: &GameSpec,
    num_points: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    let dims = spec.dims();
    let n = dims.decision_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_grad = 0.0_f64;
    let mut max_jac = 0.0_f64;
    let mut worst_player = 0;
    for _ in 0..num_points {
        let theta = spec.param_sampler.draw(&mut rng);
        let x = spec.probe_point(&mut rng);
        for i in 0..dims.num_players {
            let g = spec.player_gradient(&x, &theta, i)?;
            let mut probe = x.clone();
            let mut fd = vec![0.0; n];
            for (k, slot) in fd.iter_mut().enumerate() {
                let idx = i * n + k;
                let h = fd_step(x[idx]);
                probe[idx] = x[idx] + h;
                let plus = spec.objective(&probe, &theta, i)?;
                probe[idx] = x[idx] - h;
                let minus = spec.objective(&probe, &theta, i)?;
                probe[idx] = x[idx];
                *slot = (plus - minus) / (2.0 * h);
            }
            let dev = relative_deviation(&g, &fd);
            if dev > max_grad {
                max_grad = dev;
                worst_player = i;
            }
            if dims.constraint_dims[i] > 0 {
                let jac = spec.player_constraint_jacobian(&x, &theta, i)?;
                let fd_jac = central_difference_jacobian(&x, |y| {
                    Ok(DVector::from_vec(spec.player_constraint(y, &theta, i)?))
                })?;
                let dev = relative_deviation(jac.as_slice(), fd_jac.as_slice());
                if dev > max_jac {
                    max_jac = dev;
                    if dev > max_grad {
                        worst_player = i;
                    }
                }
            }
        }
    }
    Ok(ConsistencyReport {
        max_gradient_deviation: max_grad,
        max_jacobian_deviation: max_jac,
        worst_player,
        threshold: CONSISTENCY_THRESHOLD,
    })
}

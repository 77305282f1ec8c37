//! Centralized reference solvers.
//!
//! [`solve_centralized`] solves the scenario game as one variational KKT
//! system in `x` with every scenario's constraints stacked, then recovers
//! the consensus multipliers that make `(M x*, x*, lambda*)` a fixed point
//! of the ADMM iteration. [`extragradient_reference`] is an independent
//! projection method for unconstrained or box-constrained games.

use nalgebra::{DMatrix, DVector};

use crate::certificates::ScenarioSet;
use crate::error::{Error, InnerSolveError, Result};
use crate::game::{GameSpec, JointDecision};
use crate::inner::InnerOptions;
use crate::interior_point::{self, KktSystem};

/// Largest stacked constraint count the dense solver accepts.
pub const MAX_CENTRALIZED_ROWS: usize = 100_000;

/// The optimal triple `z* = (w*, x*, lambda*)` plus scenario multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: JointDecision,
    /// `M x*`: one copy of `x*` per scenario.
    pub w_star: Vec<DVector<f64>>,
    /// Zero-sum consensus multipliers.
    pub lambda_star: Vec<DVector<f64>>,
    /// Constraint multipliers `v^j*` per scenario.
    pub v_star: Vec<DVector<f64>>,
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub iterations: usize,
}

impl ReferenceSolution {
    /// A reference from a known `(x*, lambda*)`; residual fields are zero and
    /// the constraint multipliers are empty.
    pub fn from_parts(x_star: JointDecision, lambda_star: Vec<DVector<f64>>) -> Self {
        let w_star = vec![x_star.as_vector().clone(); lambda_star.len()];
        Self {
            v_star: vec![DVector::zeros(0); lambda_star.len()],
            x_star,
            w_star,
            lambda_star,
            stationarity: 0.0,
            feasibility: 0.0,
            complementarity: 0.0,
            iterations: 0,
        }
    }

    /// Per-scenario KKT points at the reference, for residual evaluation.
    pub fn kkt_points(&self) -> Vec<crate::inner::KktPoint> {
        self.v_star
            .iter()
            .map(|v| crate::inner::KktPoint {
                w: self.x_star.clone(),
                v: v.clone(),
                stationarity_residual: self.stationarity,
                complementarity_residual: self.complementarity,
                feasibility_violation: self.feasibility,
                iterations: self.iterations,
            })
            .collect()
    }

    /// The ADMM state sitting exactly at the reference.
    pub fn as_state(&self) -> crate::admm::ConsensusState {
        crate::admm::ConsensusState {
            w: self.w_star.clone(),
            x: self.x_star.clone(),
            lambda: self.lambda_star.clone(),
            iteration: 0,
        }
    }
}

struct Stacked<'a> {
    spec: &'a GameSpec,
    scenarios: &'a ScenarioSet,
    rows: usize,
}

impl Stacked<'_> {
    fn block(&self, j: usize) -> std::ops::Range<usize> {
        j * self.rows..(j + 1) * self.rows
    }
}

impl KktSystem for Stacked<'_> {
    fn dim(&self) -> usize {
        self.spec.dims().joint_dim()
    }

    fn num_constraints(&self) -> usize {
        self.rows * self.scenarios.len()
    }

    fn operator(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(self.dim());
        for theta in self.scenarios.iter() {
            g += self.spec.pseudogradient(w.as_slice(), theta)?;
        }
        Ok(g / self.scenarios.len() as f64)
    }

    fn operator_jacobian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.dim();
        let mut jac = DMatrix::zeros(p, p);
        for theta in self.scenarios.iter() {
            jac += self.spec.pseudogradient_jacobian(w.as_slice(), theta)?;
        }
        Ok(jac / self.scenarios.len() as f64)
    }

    fn constraints(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let mut h = DVector::zeros(self.num_constraints());
        for (j, theta) in self.scenarios.iter().enumerate() {
            h.rows_mut(j * self.rows, self.rows)
                .copy_from(&self.spec.joint_constraint(w.as_slice(), theta)?);
        }
        Ok(h)
    }

    fn constraint_jacobian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.num_constraints(), self.dim());
        for (j, theta) in self.scenarios.iter().enumerate() {
            jac.view_mut((j * self.rows, 0), (self.rows, self.dim()))
                .copy_from(&self.spec.joint_constraint_jacobian(w.as_slice(), theta)?);
        }
        Ok(jac)
    }

    fn curvature(&self, w: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.dim();
        let mut c = DMatrix::zeros(p, p);
        for (j, theta) in self.scenarios.iter().enumerate() {
            let vj = v.rows(j * self.rows, self.rows);
            if vj.iter().all(|&x| x == 0.0) {
                continue;
            }
            c += self
                .spec
                .constraint_curvature(w.as_slice(), theta, vj.as_slice())?;
        }
        Ok(c)
    }
}

/// Solves the stacked scenario game for `x*` and recovers `lambda*`.
pub fn solve_centralized(
    spec: &GameSpec,
    scenarios: &ScenarioSet,
    opts: &InnerOptions,
) -> Result<ReferenceSolution> {
    opts.validate()?;
    let rows = spec.dims().total_constraints();
    let total = rows * scenarios.len();
    if total > MAX_CENTRALIZED_ROWS {
        return Err(Error::InstanceTooLarge {
            rows: total,
            limit: MAX_CENTRALIZED_ROWS,
        });
    }
    if let Some(theta) = scenarios.iter().find(|t| t.len() != spec.dims().param_dim) {
        return Err(Error::Dimension {
            what: "scenario parameter".into(),
            expected: spec.dims().param_dim,
            actual: theta.len(),
        });
    }
    let sys = Stacked {
        spec,
        scenarios,
        rows,
    };
    let x0 = DVector::zeros(spec.dims().joint_dim());
    let ip = InnerOptions {
        max_iter: opts.max_iter.max(200),
        ..*opts
    };
    let sol = match interior_point::solve(&sys, x0, None, &ip.ip_options()) {
        Ok(sol) => sol,
        Err(Error::Inner(InnerSolveError::Infeasible { .. })) => {
            return Err(Error::EmptyFeasibleSet)
        }
        Err(e) => return Err(e),
    };

    let s = scenarios.len();
    let x_star = JointDecision::from_vector(spec.dims(), sol.w.clone())?;
    let v_star: Vec<DVector<f64>> = (0..s)
        .map(|j| sol.v.rows_range(sys.block(j)).into_owned())
        .collect();
    let mut lambda_star = Vec::with_capacity(s);
    for (j, theta) in scenarios.iter().enumerate() {
        let mut l = spec.pseudogradient(x_star.as_slice(), theta)? / s as f64;
        if rows > 0 {
            l += spec
                .joint_constraint_jacobian(x_star.as_slice(), theta)?
                .transpose()
                * &v_star[j];
        }
        lambda_star.push(-l);
    }
    // remove the stationarity residual so the stack is exactly zero-sum
    let mut mean = DVector::zeros(sol.w.len());
    for l in &lambda_star {
        mean += l;
    }
    mean /= s as f64;
    for l in &mut lambda_star {
        *l -= &mean;
    }
    Ok(ReferenceSolution {
        w_star: vec![sol.w.clone(); s],
        x_star,
        lambda_star,
        v_star,
        stationarity: sol.stationarity,
        feasibility: sol.feasibility,
        complementarity: sol.complementarity,
        iterations: sol.iterations,
    })
}

/// Optional box `lo <= x <= hi` for the extragradient projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    fn project(&self, x: &mut DVector<f64>) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[k], self.hi[k]);
        }
    }
}

/// Divergence threshold on `|x|_inf`.
pub const EXTRAGRADIENT_BLOWUP: f64 = 1e6;

/// Projected extragradient on the empirical pseudogradient
/// `(1/S) sum_j F(x; theta^j)`, started at `x = 0`.
pub fn extragradient_reference(
    spec: &GameSpec,
    scenarios: &ScenarioSet,
    step: f64,
    iters: usize,
    bounds: Option<&BoxBounds>,
) -> Result<JointDecision> {
    let x0 = JointDecision::zeros(spec.dims());
    extragradient_from(spec, scenarios, &x0, step, iters, bounds)
}

/// [`extragradient_reference`] from an arbitrary start.
pub fn extragradient_from(
    spec: &GameSpec,
    scenarios: &ScenarioSet,
    x0: &JointDecision,
    step: f64,
    iters: usize,
    bounds: Option<&BoxBounds>,
) -> Result<JointDecision> {
    if spec.dims().total_constraints() > 0 {
        return Err(Error::InvalidArgument(
            "extragradient reference handles only unconstrained or box-constrained games".into(),
        ));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {step}"
        )));
    }
    let p = spec.dims().joint_dim();
    if let Some(b) = bounds {
        if b.lo.len() != p || b.hi.len() != p || b.lo.iter().zip(&b.hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument(
                "box bounds must have length N n with lo <= hi".into(),
            ));
        }
    }
    let empirical = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let mut g = DVector::zeros(p);
        for theta in scenarios.iter() {
            g += spec.pseudogradient(x.as_slice(), theta)?;
        }
        Ok(g / scenarios.len() as f64)
    };
    if x0.len() != p {
        return Err(Error::Dimension {
            what: "extragradient start".into(),
            expected: p,
            actual: x0.len(),
        });
    }
    let mut x = x0.as_vector().clone();
    if let Some(b) = bounds {
        b.project(&mut x);
    }
    for iteration in 0..iters {
        let mut half = &x - empirical(&x)? * step;
        if let Some(b) = bounds {
            b.project(&mut half);
        }
        let mut next = &x - empirical(&half)? * step;
        if let Some(b) = bounds {
            b.project(&mut next);
        }
        let norm = next.amax();
        if !norm.is_finite() || norm > EXTRAGRADIENT_BLOWUP {
            return Err(Error::Diverged { iteration, norm });
        }
        let moved = (&next - &x).amax();
        x = next;
        if moved == 0.0 {
            break;
        }
    }
    JointDecision::from_vector(spec.dims(), x)
}

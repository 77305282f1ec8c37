//! Per-scenario subgame: every player minimizes its partial augmented
//! Lagrangian
//!
//! ```text
//! L_i^j(w) = f_i(w; theta^j) / S + lambda_i^T (w_i - x_i) + rho/2 |w_i - x_i|^2
//! ```
//!
//! subject to the scenario's joint constraint `h(w; theta^j) <= 0`. The
//! solution is the variational equilibrium: one multiplier per stacked
//! constraint row, shared by every player whose block the row touches.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{GameSpec, JointDecision};
use crate::interior_point::{self, IpOptions, KktSystem};

/// One scenario's augmented subgame at the current consensus iterate.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioSubproblem<'a> {
    pub spec: &'a GameSpec,
    pub theta: &'a [f64],
    pub x_ref: &'a JointDecision,
    /// Stacked `lambda_i^j`, length `N n`.
    pub lambda_ref: &'a DVector<f64>,
    pub rho: f64,
    /// `S`, the divisor of the objective.
    pub num_scenarios: usize,
}

impl<'a> ScenarioSubproblem<'a> {
    pub fn new(
        spec: &'a GameSpec,
        theta: &'a [f64],
        x_ref: &'a JointDecision,
        lambda_ref: &'a DVector<f64>,
        rho: f64,
        num_scenarios: usize,
    ) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rho must be positive, got {rho}"
            )));
        }
        if num_scenarios == 0 {
            return Err(Error::InvalidArgument("num_scenarios must be >= 1".into()));
        }
        let p = spec.dims().joint_dim();
        for (what, len) in [
            ("consensus iterate", x_ref.len()),
            ("multiplier block", lambda_ref.len()),
        ] {
            if len != p {
                return Err(Error::Dimension {
                    what: what.into(),
                    expected: p,
                    actual: len,
                });
            }
        }
        if theta.len() != spec.dims().param_dim {
            return Err(Error::Dimension {
                what: "scenario parameter".into(),
                expected: spec.dims().param_dim,
                actual: theta.len(),
            });
        }
        Ok(Self {
            spec,
            theta,
            x_ref,
            lambda_ref,
            rho,
            num_scenarios,
        })
    }

    fn scale(&self) -> f64 {
        1.0 / self.num_scenarios as f64
    }
}

impl KktSystem for ScenarioSubproblem<'_> {
    fn dim(&self) -> usize {
        self.spec.dims().joint_dim()
    }

    fn num_constraints(&self) -> usize {
        self.spec.dims().total_constraints()
    }

    fn operator(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.spec.pseudogradient(w.as_slice(), self.theta)?;
        Ok(f * self.scale() + self.lambda_ref + (w - self.x_ref.as_vector()) * self.rho)
    }

    fn operator_jacobian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut jac = self
            .spec
            .pseudogradient_jacobian(w.as_slice(), self.theta)?
            * self.scale();
        for i in 0..jac.nrows() {
            jac[(i, i)] += self.rho;
        }
        Ok(jac)
    }

    fn constraints(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.spec.joint_constraint(w.as_slice(), self.theta)
    }

    fn constraint_jacobian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.spec
            .joint_constraint_jacobian(w.as_slice(), self.theta)
    }

    fn curvature(&self, w: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.spec
            .constraint_curvature(w.as_slice(), self.theta, v.as_slice())
    }
}

/// A primal-dual point of one scenario subgame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktPoint {
    #[serde(serialize_with = "serialize_joint")]
    pub w: JointDecision,
    /// Multipliers of the stacked constraint rows, `v >= 0`.
    #[serde(serialize_with = "serialize_vector")]
    pub v: DVector<f64>,
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
    pub feasibility_violation: f64,
    pub iterations: usize,
}

fn serialize_joint<S: serde::Serializer>(x: &JointDecision, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(x.as_slice())
}

fn serialize_vector<S: serde::Serializer>(x: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(x.iter())
}

/// Inner solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerOptions {
    pub tol: f64,
    pub feas_tol: f64,
    pub comp_tol: f64,
    pub max_iter: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            feas_tol: 1e-9,
            comp_tol: 1e-8,
            max_iter: 100,
        }
    }
}

impl InnerOptions {
    pub(crate) fn ip_options(&self) -> IpOptions {
        IpOptions {
            tol: self.tol,
            feas_tol: self.feas_tol,
            comp_tol: self.comp_tol,
            max_iter: self.max_iter,
            ..IpOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.feas_tol > 0.0 && self.comp_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "inner tolerances and max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Solves one scenario subgame to a joint KKT point. A warm start supplies
/// the initial primal point and multipliers; the cold start begins at `x_ref`.
pub fn solve_subgame(
    p: &ScenarioSubproblem<'_>,
    warm_start: Option<&KktPoint>,
    opts: &InnerOptions,
) -> Result<KktPoint> {
    opts.validate()?;
    let dims = p.spec.dims();
    let (w0, v0) = match warm_start {
        Some(k) if k.w.len() == dims.joint_dim() && k.v.len() == dims.total_constraints() => {
            (k.w.as_vector().clone(), Some(&k.v))
        }
        _ => (p.x_ref.as_vector().clone(), None),
    };
    let sol = interior_point::solve(p, w0, v0, &opts.ip_options())?;
    Ok(KktPoint {
        w: JointDecision::from_vector(dims, sol.w)?,
        v: sol.v,
        stationarity_residual: sol.stationarity,
        complementarity_residual: sol.complementarity,
        feasibility_violation: sol.feasibility,
        iterations: sol.iterations,
    })
}

/// Stationarity, feasibility and complementarity of a candidate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResidual {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

/// Infinity norms of the stacked stationarity equations, `max(h, 0)` and `v . h`.
pub fn kkt_residual(p: &ScenarioSubproblem<'_>, point: &KktPoint) -> Result<KktResidual> {
    let r = interior_point::kkt_residuals(p, point.w.as_vector(), &point.v)?;
    Ok(KktResidual {
        stationarity: r.stationarity,
        feasibility: r.feasibility,
        complementarity: r.complementarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::InnerSolveError;
    use crate::game::{ClosureGame, GameDims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_game(constrained: bool) -> GameSpec {
        // single player, f = 1/2 w^2 scaled by theta[0]
        let game = ClosureGame::new(
            |x, t, _| 0.5 * t[0] * x[0] * x[0],
            |x, t, _| vec![t[0] * x[0]],
        );
        let game = if constrained {
            game.with_constraints(
                |x, _, _| vec![x[0]],
                |_, _, _| DMatrix::from_element(1, 1, 1.0),
            )
        } else {
            game
        };
        let dims = GameDims::new(1, 1, 1).with_uniform_constraints(usize::from(constrained));
        GameSpec::new(dims, game).unwrap()
    }

    fn sym_pair() -> GameSpec {
        // f_i = 1/2 w_i^2, shared constraint 1 - w_1 - w_2 <= 0
        let game = ClosureGame::new(|x, _, i| 0.5 * x[i] * x[i], |x, _, i| vec![x[i]])
            .with_constraints(
                |x, _, i| {
                    if i == 0 {
                        vec![1.0 - x[0] - x[1]]
                    } else {
                        vec![]
                    }
                },
                |_, _, i| {
                    if i == 0 {
                        DMatrix::from_row_slice(1, 2, &[-1.0, -1.0])
                    } else {
                        DMatrix::zeros(0, 2)
                    }
                },
            );
        GameSpec::new(
            GameDims::new(2, 1, 0).with_constraint_dims(vec![1, 0]),
            game,
        )
        .unwrap()
    }

    fn solve(spec: &GameSpec, theta: &[f64], x: &[f64], rho: f64) -> KktPoint {
        let x = JointDecision::new(spec.dims().num_players, 1, x.to_vec()).unwrap();
        let lambda = DVector::zeros(x.len());
        let p = ScenarioSubproblem::new(spec, theta, &x, &lambda, rho, 1).unwrap();
        solve_subgame(&p, None, &InnerOptions::default()).unwrap()
    }

    #[test]
    fn unconstrained_quadratic() {
        let k = solve(&scalar_game(false), &[1.0], &[0.0], 1.0);
        assert!(k.w.as_slice()[0].abs() < 1e-12);
        assert_eq!(k.v.len(), 0);
    }

    #[test]
    fn projection_onto_halfline() {
        // minimize rho/2 (w - 1)^2 s.t. w <= 0 with f = 0: w = 0, v = rho
        let k = solve(&scalar_game(true), &[0.0], &[1.0], 2.0);
        assert!(k.w.as_slice()[0].abs() < 1e-8, "{k:?}");
        assert!((k.v[0] - 2.0).abs() < 1e-7, "{k:?}");
        assert!(k.stationarity_residual <= 1e-8);
        assert!(k.feasibility_violation <= 1e-9);
        assert!(k.complementarity_residual <= 1e-8);
    }

    #[test]
    fn symmetric_shared_constraint() {
        let spec = sym_pair();
        let k = solve(&spec, &[], &[0.0, 0.0], 1.0);
        let w = k.w.as_slice();
        assert!(
            (w[0] - 0.5).abs() < 1e-8 && (w[1] - 0.5).abs() < 1e-8,
            "{w:?}"
        );
        assert!((k.v[0] - 1.0).abs() < 1e-7);

        // The game is a potential game with potential sum_i (1/2 w_i^2 + rho/2 w_i^2),
        // so the variational equilibrium minimizes it over the feasible set.
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for a in 0..=400 {
            for b in 0..=400 {
                let (w1, w2) = (-0.5 + a as f64 * 0.005, -0.5 + b as f64 * 0.005);
                if 1.0 - w1 - w2 > 1e-12 {
                    continue;
                }
                let potential = w1 * w1 + w2 * w2;
                if potential < best.0 {
                    best = (potential, [w1, w2]);
                }
            }
        }
        assert!((best.1[0] - w[0]).abs() <= 0.005 && (best.1[1] - w[1]).abs() <= 0.005);
    }

    #[test]
    fn residuals_at_exact_and_perturbed_points() {
        let spec = scalar_game(true);
        let x = JointDecision::new(1, 1, vec![1.0]).unwrap();
        let lambda = DVector::zeros(1);
        let p = ScenarioSubproblem::new(&spec, &[0.0], &x, &lambda, 2.0, 1).unwrap();
        let exact = KktPoint {
            w: JointDecision::new(1, 1, vec![0.0]).unwrap(),
            v: DVector::from_element(1, 2.0),
            stationarity_residual: 0.0,
            complementarity_residual: 0.0,
            feasibility_violation: 0.0,
            iterations: 0,
        };
        let r = kkt_residual(&p, &exact).unwrap();
        assert!(r.stationarity <= 1e-9 && r.feasibility <= 1e-9 && r.complementarity <= 1e-9);

        let interior = KktPoint {
            w: JointDecision::new(1, 1, vec![-0.4]).unwrap(),
            v: DVector::zeros(1),
            ..exact.clone()
        };
        assert_eq!(kkt_residual(&p, &interior).unwrap().complementarity, 0.0);

        let outside = KktPoint {
            w: JointDecision::new(1, 1, vec![0.3]).unwrap(),
            ..exact
        };
        assert_eq!(kkt_residual(&p, &outside).unwrap().feasibility, 0.3);
    }

    #[test]
    fn infeasible_subproblem_is_reported() {
        // w <= -1 and -w <= -1
        let game = ClosureGame::new(|x, _, _| 0.5 * x[0] * x[0], |x, _, _| vec![x[0]])
            .with_constraints(
                |x, _, _| vec![x[0] + 1.0, 1.0 - x[0]],
                |_, _, _| DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            );
        let spec = GameSpec::new(GameDims::new(1, 1, 0).with_uniform_constraints(2), game).unwrap();
        let x = JointDecision::new(1, 1, vec![0.0]).unwrap();
        let lambda = DVector::zeros(1);
        let p = ScenarioSubproblem::new(&spec, &[], &x, &lambda, 1.0, 1).unwrap();
        let err = solve_subgame(&p, None, &InnerOptions::default()).unwrap_err();
        assert!(
            matches!(err, Error::Inner(InnerSolveError::Infeasible { .. })),
            "{err:?}"
        );
    }

    #[test]
    fn max_iter_carries_best_iterate() {
        let spec = sym_pair();
        let x = JointDecision::new(2, 1, vec![0.0, 0.0]).unwrap();
        let lambda = DVector::zeros(2);
        let p = ScenarioSubproblem::new(&spec, &[], &x, &lambda, 1.0, 1).unwrap();
        let opts = InnerOptions {
            max_iter: 2,
            ..Default::default()
        };
        match solve_subgame(&p, None, &opts).unwrap_err() {
            Error::Inner(InnerSolveError::MaxIter {
                best_w, iterations, ..
            }) => {
                assert_eq!(best_w.len(), 2);
                assert_eq!(iterations, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn random_starts_agree() {
        let spec = sym_pair();
        let x = JointDecision::new(2, 1, vec![0.3, -0.2]).unwrap();
        let lambda = DVector::from_vec(vec![0.1, -0.4]);
        let p = ScenarioSubproblem::new(&spec, &[], &x, &lambda, 0.7, 3).unwrap();
        let opts = InnerOptions::default();
        let reference = solve_subgame(&p, None, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let start = KktPoint {
                w: JointDecision::new(
                    2,
                    1,
                    vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
                )
                .unwrap(),
                v: DVector::from_element(1, rng.gen_range(0.0..5.0)),
                ..reference.clone()
            };
            let k = solve_subgame(&p, Some(&start), &opts).unwrap();
            assert!((k.w.as_vector() - reference.w.as_vector()).amax() <= 10.0 * opts.tol);
            assert!(k.v.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rejects_non_positive_rho() {
        let spec = scalar_game(false);
        let x = JointDecision::new(1, 1, vec![0.0]).unwrap();
        let lambda = DVector::zeros(1);
        assert!(ScenarioSubproblem::new(&spec, &[1.0], &x, &lambda, 0.0, 1).is_err());
    }
}

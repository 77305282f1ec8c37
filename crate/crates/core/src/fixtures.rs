//! Small reference games with closed-form equilibria, shared by tests,
//! benchmarks and the CLI's `custom` problem selector.

use nalgebra::DMatrix;

use crate::certificates::Sampler;
use crate::game::{ClosureGame, GameCallbacks, GameDims, GameSpec};

/// `f_i = 1/2 |x_i - c_i(theta)|^2` where `theta` packs `c = (c_1, .., c_N)`.
///
/// The empirical-mean equilibrium is `x_i = mean_j c_i(theta^j)`.
#[derive(Debug, Clone)]
pub struct DecoupledQuadratic {
    pub num_players: usize,
    pub decision_dim: usize,
}

impl GameCallbacks for DecoupledQuadratic {
    fn objective(&self, x: &[f64], theta: &[f64], player: usize) -> f64 {
        let r = player * self.decision_dim..(player + 1) * self.decision_dim;
        0.5 * x[r.clone()]
            .iter()
            .zip(&theta[r])
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
    }

    fn objective_gradient(&self, x: &[f64], theta: &[f64], player: usize) -> Vec<f64> {
        let r = player * self.decision_dim..(player + 1) * self.decision_dim;
        x[r.clone()]
            .iter()
            .zip(&theta[r])
            .map(|(a, c)| a - c)
            .collect()
    }

    fn pseudogradient_jacobian(&self, x: &[f64], _theta: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(x.len(), x.len()))
    }
}

/// Decoupled quadratic game with `c` drawn uniformly from `[-scale, scale]`.
pub fn decoupled_quadratic(num_players: usize, decision_dim: usize, scale: f64) -> GameSpec {
    let dims = GameDims::new(num_players, decision_dim, num_players * decision_dim);
    let sampler = Sampler::uniform("decoupled-quadratic", vec![(-scale, scale); dims.param_dim])
        .expect("valid range");
    let bound = 0.5 * (2.0 * scale).powi(2) * decision_dim as f64 + 1.0;
    GameSpec::new(
        dims,
        DecoupledQuadratic {
            num_players,
            decision_dim,
        },
    )
    .and_then(|s| s.with_param_sampler(sampler))
    .and_then(|s| s.with_objective_bound(bound))
    .expect("valid fixture")
    .with_separable_constraints(true)
    .with_probe_radius(scale.max(1.0))
}

/// `f_i = 1/2 |x_i|^2`, independent of the (one-dimensional) parameter.
pub fn self_quadratic(num_players: usize, decision_dim: usize) -> GameSpec {
    let n = decision_dim;
    let game = ClosureGame::new(
        move |x, _t, i| 0.5 * x[i * n..(i + 1) * n].iter().map(|v| v * v).sum::<f64>(),
        move |x, _t, i| x[i * n..(i + 1) * n].to_vec(),
    );
    GameSpec::new(GameDims::new(num_players, decision_dim, 1), game)
        .expect("valid fixture")
        .with_separable_constraints(true)
}

/// Zero-sum bilinear game `f_1 = x_1 x_2`, `f_2 = -x_1 x_2`, so `F(x) = (x_2, -x_1)`.
pub fn bilinear_zero_sum() -> GameSpec {
    let game = ClosureGame::new(
        |x, _t, i| if i == 0 { x[0] * x[1] } else { -x[0] * x[1] },
        |x, _t, i| if i == 0 { vec![x[1]] } else { vec![-x[0]] },
    );
    GameSpec::new(GameDims::new(2, 1, 1), game).expect("valid fixture")
}

/// Two scalar players `f_i = 1/2 (x_i - theta_i)^2` sharing the affine
/// constraint `x_1 + x_2 <= theta_3`, carried in player 0's block.
pub fn shared_budget_pair() -> GameSpec {
    let game = ClosureGame::new(
        |x, t, i| 0.5 * (x[i] - t[i]).powi(2),
        |x, t, i| vec![x[i] - t[i]],
    )
    .with_constraints(
        |x, t, i| {
            if i == 0 {
                vec![x[0] + x[1] - t[2]]
            } else {
                vec![]
            }
        },
        |_x, _t, i| {
            if i == 0 {
                DMatrix::from_row_slice(1, 2, &[1.0, 1.0])
            } else {
                DMatrix::zeros(0, 2)
            }
        },
    );
    let dims = GameDims::new(2, 1, 3).with_constraint_dims(vec![1, 0]);
    let sampler =
        Sampler::uniform("shared-budget", vec![(0.5, 1.5), (0.5, 1.5), (0.5, 1.0)]).expect("range");
    GameSpec::new(dims, game)
        .and_then(|s| s.with_param_sampler(sampler))
        .and_then(|s| s.with_objective_bound(2.0))
        .expect("valid fixture")
}

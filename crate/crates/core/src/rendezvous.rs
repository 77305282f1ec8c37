//! Two-spacecraft rendezvous game with double-integrator dynamics.
//!
//! Each player `i` picks its acceleration sequence `u_i(0..T-1)` (length
//! `T q`, time-major, `q = 2`). States are `[x, v_x, y, v_y]` and evolve as
//! `xi(t+1) = A xi(t) + B u(t)`. Player `i` pays
//!
//! ```text
//! f_i = (1/T) [ sum_{t=0}^{T} 1/2 xi_i(t)^T Q_i xi_i(t) + sum_{t=0}^{T-1} 1/2 |u_i(t)|^2 ],
//! Q_i = I_4 + P_i^T P_i.
//! ```
//!
//! Per scenario the joint constraint has `7 T` rows:
//!
//! * player 0 block: `d(t) - min(b_1, b_2) <= 0` for `t = 1..T` (2 rows each),
//!   then `u_0(t)_a^2 - 1 <= 0` per axis;
//! * player 1 block: `|d(t)|^2 - 1 <= 0` for `t = 1..T`, then
//!   `u_1(t)_a^2 - 1 <= 0` per axis;
//!
//! where `d(t)` is the relative position `pos_1(t) - pos_2(t)`. Imposing both
//! players' sampled offsets `b_1`, `b_2` on the same relative position is the
//! single row set `d(t) <= min(b_1, b_2)`.
//!
//! Parameter layout (`d = 40`): `P_1` row-major, `P_2` row-major, `b_1`,
//! `b_2`, initial position of player 1, initial position of player 2. Initial
//! velocities are zero.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificates::Sampler;
use crate::error::{Error, Result};
use crate::game::{GameCallbacks, GameDims, GameSpec};

pub const NUM_PLAYERS: usize = 2;
pub const CONTROL_DIM: usize = 2;
pub const STATE_DIM: usize = 4;
/// `P_1, P_2, b_1, b_2, p_1(0), p_2(0)`.
pub const PARAM_DIM: usize = 2 * 16 + 2 * 2 + 2 * 2;

const OFFSET_P: [usize; 2] = [0, 16];
const OFFSET_B: [usize; 2] = [32, 34];
const OFFSET_POS: [usize; 2] = [36, 38];

/// Rendezvous parameters; keys mirror the CLI config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RendezvousConfig {
    pub horizon: usize,
    pub dt: f64,
    pub pos_range_p1: (f64, f64),
    pub pos_range_p2: (f64, f64),
    pub p_entry_range: (f64, f64),
    pub b_entry_range: (f64, f64),
    pub objective_bound: f64,
}

impl Default for RendezvousConfig {
    fn default() -> Self {
        Self {
            horizon: 5,
            dt: 0.05,
            pos_range_p1: (-0.15, 0.0),
            pos_range_p2: (0.0, 0.15),
            p_entry_range: (0.0, 1.0),
            b_entry_range: (0.0, 0.01),
            objective_bound: 3.0,
        }
    }
}

impl RendezvousConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.objective_bound > 0.0) {
            return Err(Error::InvalidArgument(
                "objective_bound must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn decision_dim(&self) -> usize {
        self.horizon * CONTROL_DIM
    }

    /// Constraint rows per scenario.
    pub fn rows_per_scenario(&self) -> usize {
        7 * self.horizon
    }

    pub fn sampler(&self) -> Result<Sampler> {
        let mut ranges = Vec::with_capacity(PARAM_DIM);
        ranges.extend(std::iter::repeat_n(self.p_entry_range, 32));
        ranges.extend(std::iter::repeat_n(self.b_entry_range, 4));
        ranges.extend(std::iter::repeat_n(self.pos_range_p1, 2));
        ranges.extend(std::iter::repeat_n(self.pos_range_p2, 2));
        Sampler::uniform("rendezvous", ranges)
    }
}

/// State-transition and input matrices for time step `dt`.
pub fn dynamics(dt: f64) -> (Matrix4<f64>, DMatrix<f64>) {
    #[rustfmt::skip]
    let a = Matrix4::new(
        1.0, dt,  0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, dt,
        0.0, 0.0, 0.0, 1.0,
    );
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        0.5 * dt * dt, 0.0,
        dt,            0.0,
        0.0,           0.5 * dt * dt,
        0.0,           dt,
    ]);
    (a, b)
}

/// States `xi(0..=T)` from `initial` under `controls` (length `T q`).
pub fn rollout(
    cfg: &RendezvousConfig,
    initial: [f64; 4],
    controls: &[f64],
) -> Result<Vec<[f64; 4]>> {
    let t_len = cfg.horizon;
    if controls.len() != t_len * CONTROL_DIM {
        return Err(Error::Dimension {
            what: "control sequence".into(),
            expected: t_len * CONTROL_DIM,
            actual: controls.len(),
        });
    }
    let (a, b) = dynamics(cfg.dt);
    let mut xi = Vector4::from(initial);
    let mut out = Vec::with_capacity(t_len + 1);
    out.push(initial);
    for t in 0..t_len {
        let u = &controls[t * CONTROL_DIM..(t + 1) * CONTROL_DIM];
        let bu = &b * DVector::from_column_slice(u);
        xi = a * xi + Vector4::new(bu[0], bu[1], bu[2], bu[3]);
        out.push([xi[0], xi[1], xi[2], xi[3]]);
    }
    Ok(out)
}

/// Game callbacks; holds the stacked controllability maps.
///
/// With zero initial velocity `xi(t) = xi(0) + G_t u`, so every derivative
/// is a fixed linear map of the controls.
#[derive(Debug, Clone)]
pub struct RendezvousDynamics {
    cfg: RendezvousConfig,
    n: usize,
    a: [[f64; 4]; 4],
    b: [[f64; 2]; 4],
    /// `G_t` rows, flat `[(t * 4 + r) * n + c]` for `t = 0..=T`.
    g: Vec<f64>,
    /// `K_ab = sum_{t>=1} G_t[a]^T G_t[b]`, flat `[(a * 4 + b) * n * n + i * n + j]`.
    k: Vec<f64>,
    /// `E_t^T E_t` for the position rows, flat `[(t - 1) * n * n + i * n + j]`.
    ete: Vec<f64>,
}

impl RendezvousDynamics {
    pub fn new(cfg: RendezvousConfig) -> Result<Self> {
        cfg.validate()?;
        let t_len = cfg.horizon;
        let n = t_len * CONTROL_DIM;
        let (a_mat, b_mat) = dynamics(cfg.dt);
        let a: [[f64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| a_mat[(r, c)]));
        let b: [[f64; 2]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| b_mat[(r, c)]));

        let mut g = vec![0.0; (t_len + 1) * 4 * n];
        for t in 0..t_len {
            for r in 0..4 {
                for c in 0..n {
                    let mut acc = 0.0;
                    for m in 0..4 {
                        acc += a[r][m] * g[(t * 4 + m) * n + c];
                    }
                    g[((t + 1) * 4 + r) * n + c] = acc;
                }
                for q in 0..CONTROL_DIM {
                    g[((t + 1) * 4 + r) * n + t * CONTROL_DIM + q] = b[r][q];
                }
            }
        }
        let row = |t: usize, r: usize| &g[(t * 4 + r) * n..(t * 4 + r + 1) * n];
        let mut k = vec![0.0; 16 * n * n];
        let mut ete = vec![0.0; t_len * n * n];
        for t in 1..=t_len {
            for ra in 0..4 {
                for rb in 0..4 {
                    let (ga, gb) = (row(t, ra), row(t, rb));
                    let block = &mut k[(ra * 4 + rb) * n * n..(ra * 4 + rb + 1) * n * n];
                    for i in 0..n {
                        for j in 0..n {
                            block[i * n + j] += ga[i] * gb[j];
                        }
                    }
                }
            }
            let (ex, ey) = (row(t, 0), row(t, 2));
            let block = &mut ete[(t - 1) * n * n..t * n * n];
            for i in 0..n {
                for j in 0..n {
                    block[i * n + j] = ex[i] * ex[j] + ey[i] * ey[j];
                }
            }
        }
        Ok(Self {
            cfg,
            n,
            a,
            b,
            g,
            k,
            ete,
        })
    }

    pub fn config(&self) -> &RendezvousConfig {
        &self.cfg
    }

    fn g_row(&self, t: usize, r: usize) -> &[f64] {
        &self.g[(t * 4 + r) * self.n..(t * 4 + r + 1) * self.n]
    }

    fn cost_matrix(theta: &[f64], player: usize) -> [[f64; 4]; 4] {
        let p = &theta[OFFSET_P[player]..OFFSET_P[player] + 16];
        std::array::from_fn(|r| {
            std::array::from_fn(|c| {
                let ptp: f64 = (0..4).map(|m| p[m * 4 + r] * p[m * 4 + c]).sum();
                ptp + if r == c { 1.0 } else { 0.0 }
            })
        })
    }

    fn controls<'a>(&self, x: &'a [f64], player: usize) -> &'a [f64] {
        &x[player * self.n..(player + 1) * self.n]
    }

    /// `xi(0..=T)` by the linear recursion.
    fn states(&self, x: &[f64], theta: &[f64], player: usize) -> Vec<[f64; 4]> {
        let u = self.controls(x, player);
        let pos = &theta[OFFSET_POS[player]..OFFSET_POS[player] + 2];
        let mut xi = [pos[0], 0.0, pos[1], 0.0];
        let mut out = Vec::with_capacity(self.cfg.horizon + 1);
        out.push(xi);
        for t in 0..self.cfg.horizon {
            let ut = &u[t * CONTROL_DIM..(t + 1) * CONTROL_DIM];
            xi = std::array::from_fn(|r| {
                (0..4).map(|m| self.a[r][m] * xi[m]).sum::<f64>()
                    + self.b[r][0] * ut[0]
                    + self.b[r][1] * ut[1]
            });
            out.push(xi);
        }
        out
    }

    /// Relative position `pos_1(t) - pos_2(t)` for `t = 0..=T`.
    fn relative_positions(&self, x: &[f64], theta: &[f64]) -> Vec<[f64; 2]> {
        let s1 = self.states(x, theta, 0);
        let s2 = self.states(x, theta, 1);
        s1.iter()
            .zip(&s2)
            .map(|(a, b)| [a[0] - b[0], a[2] - b[2]])
            .collect()
    }

    /// `(1/T) (I + sum_t G_t^T Q G_t)`, row-major.
    fn own_hessian(&self, theta: &[f64], player: usize) -> Vec<f64> {
        let q = Self::cost_matrix(theta, player);
        let n = self.n;
        let mut h = vec![0.0; n * n];
        for (ra, q_row) in q.iter().enumerate() {
            for (rb, &qab) in q_row.iter().enumerate() {
                let block = &self.k[(ra * 4 + rb) * n * n..(ra * 4 + rb + 1) * n * n];
                for (hv, kv) in h.iter_mut().zip(block) {
                    *hv += qab * kv;
                }
            }
        }
        let inv_t = 1.0 / self.cfg.horizon as f64;
        for i in 0..n {
            h[i * n + i] += 1.0;
        }
        h.iter_mut().for_each(|v| *v *= inv_t);
        h
    }
}

impl GameCallbacks for RendezvousDynamics {
    fn objective(&self, x: &[f64], theta: &[f64], player: usize) -> f64 {
        let q = Self::cost_matrix(theta, player);
        let u = self.controls(x, player);
        let state_cost: f64 = self
            .states(x, theta, player)
            .iter()
            .map(|xi| {
                let mut acc = 0.0;
                for r in 0..4 {
                    for c in 0..4 {
                        acc += xi[r] * q[r][c] * xi[c];
                    }
                }
                0.5 * acc
            })
            .sum();
        let control_cost: f64 = 0.5 * u.iter().map(|v| v * v).sum::<f64>();
        (state_cost + control_cost) / self.cfg.horizon as f64
    }

    fn objective_gradient(&self, x: &[f64], theta: &[f64], player: usize) -> Vec<f64> {
        let q = Self::cost_matrix(theta, player);
        let states = self.states(x, theta, player);
        let mut grad = self.controls(x, player).to_vec();
        for (t, xi) in states.iter().enumerate().skip(1) {
            for (r, q_row) in q.iter().enumerate() {
                let w: f64 = (0..4).map(|c| q_row[c] * xi[c]).sum();
                for (gv, e) in grad.iter_mut().zip(self.g_row(t, r)) {
                    *gv += w * e;
                }
            }
        }
        let inv_t = 1.0 / self.cfg.horizon as f64;
        grad.iter_mut().for_each(|v| *v *= inv_t);
        grad
    }

    fn constraint(&self, x: &[f64], theta: &[f64], player: usize) -> Vec<f64> {
        let t_len = self.cfg.horizon;
        let d = self.relative_positions(x, theta);
        let mut rows = Vec::with_capacity(if player == 0 { 4 * t_len } else { 3 * t_len });
        if player == 0 {
            let b1 = &theta[OFFSET_B[0]..OFFSET_B[0] + 2];
            let b2 = &theta[OFFSET_B[1]..OFFSET_B[1] + 2];
            for dt in &d[1..] {
                rows.push(dt[0] - b1[0].min(b2[0]));
                rows.push(dt[1] - b1[1].min(b2[1]));
            }
        } else {
            for dt in &d[1..] {
                rows.push(dt[0] * dt[0] + dt[1] * dt[1] - 1.0);
            }
        }
        rows.extend(self.controls(x, player).iter().map(|u| u * u - 1.0));
        rows
    }

    fn constraint_jacobian(&self, x: &[f64], theta: &[f64], player: usize) -> DMatrix<f64> {
        let t_len = self.cfg.horizon;
        let n = self.n;
        let coupled_rows = if player == 0 { 2 * t_len } else { t_len };
        let mut jac = DMatrix::zeros(coupled_rows + n, 2 * n);
        let d = self.relative_positions(x, theta);
        for t in 1..=t_len {
            let (ex, ey) = (self.g_row(t, 0), self.g_row(t, 2));
            if player == 0 {
                for (a, e) in [ex, ey].into_iter().enumerate() {
                    let r = 2 * (t - 1) + a;
                    for c in 0..n {
                        jac[(r, c)] = e[c];
                        jac[(r, n + c)] = -e[c];
                    }
                }
            } else {
                let r = t - 1;
                for c in 0..n {
                    let g = 2.0 * (d[t][0] * ex[c] + d[t][1] * ey[c]);
                    jac[(r, c)] = g;
                    jac[(r, n + c)] = -g;
                }
            }
        }
        for (k, u) in self.controls(x, player).iter().enumerate() {
            jac[(coupled_rows + k, player * n + k)] = 2.0 * u;
        }
        jac
    }

    fn pseudogradient_jacobian(&self, _x: &[f64], theta: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.n;
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..NUM_PLAYERS {
            let h = self.own_hessian(theta, i);
            for r in 0..n {
                for c in 0..n {
                    jac[(i * n + r, i * n + c)] = h[r * n + c];
                }
            }
        }
        Some(jac)
    }

    fn constraint_curvature(
        &self,
        _x: &[f64],
        _theta: &[f64],
        player: usize,
        weights: &[f64],
    ) -> Option<DMatrix<f64>> {
        let t_len = self.cfg.horizon;
        let n = self.n;
        let mut c = DMatrix::zeros(2 * n, 2 * n);
        let coupled_rows = if player == 0 { 2 * t_len } else { t_len };
        if player == 1 {
            // |d(t)|^2 has hessian 2 [E_t, -E_t]^T [E_t, -E_t]
            let mut m = vec![0.0; n * n];
            for t in 1..=t_len {
                let wt = 2.0 * weights[t - 1];
                if wt != 0.0 {
                    let block = &self.ete[(t - 1) * n * n..t * n * n];
                    m.iter_mut().zip(block).for_each(|(mv, b)| *mv += wt * b);
                }
            }
            for r in 0..n {
                for col in 0..n {
                    let v = m[r * n + col];
                    c[(r, col)] = v;
                    c[(n + r, n + col)] = v;
                    c[(r, n + col)] = -v;
                    c[(n + r, col)] = -v;
                }
            }
        }
        for k in 0..n {
            c[(player * n + k, player * n + k)] += 2.0 * weights[coupled_rows + k];
        }
        Some(c)
    }
}

/// A built rendezvous instance.
#[derive(Debug, Clone)]
pub struct RendezvousGame {
    pub spec: GameSpec,
    pub sampler: Sampler,
}

pub fn build_game(cfg: &RendezvousConfig) -> Result<RendezvousGame> {
    let sampler = cfg.sampler()?;
    let t_len = cfg.horizon;
    let n = cfg.decision_dim();
    let dims = GameDims::new(NUM_PLAYERS, n, PARAM_DIM)
        .with_constraint_dims(vec![2 * t_len + n, t_len + n]);
    let spec = GameSpec::new(dims, RendezvousDynamics::new(cfg.clone())?)?
        .with_objective_bound(cfg.objective_bound)?
        .with_param_sampler(sampler.clone())?
        .with_separable_constraints(false)
        .with_probe_radius(1.0);
    Ok(RendezvousGame { spec, sampler })
}

/// Result of an objective-bound audit.
#[derive(Debug, Clone, Serialize)]
pub struct BoundAudit {
    pub max_observed: f64,
    pub bound: f64,
    pub samples: usize,
    pub exceeded: bool,
}

/// Largest `|f_i|` over random parameters and random controls with
/// `|u|_inf <= 1`.
pub fn verify_objective_bound(
    cfg: &RendezvousConfig,
    num_samples: usize,
    seed: u64,
) -> Result<BoundAudit> {
    let game = build_game(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = game.spec.dims().joint_dim();
    let mut max_observed = 0.0_f64;
    for _ in 0..num_samples {
        let theta = game.sampler.draw(&mut rng);
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        for i in 0..NUM_PLAYERS {
            max_observed = max_observed.max(game.spec.objective(&x, &theta, i)?.abs());
        }
    }
    Ok(BoundAudit {
        max_observed,
        bound: cfg.objective_bound,
        samples: num_samples,
        exceeded: max_observed > cfg.objective_bound,
    })
}

/// Largest objective over every saturated control pattern, with all cost
/// entries at the top of their range and initial positions at the corners
/// of their boxes.
pub fn corner_objective_bound(cfg: &RendezvousConfig) -> Result<BoundAudit> {
    let game = build_game(cfg)?;
    let n = cfg.decision_dim();
    let mut theta = vec![0.0; PARAM_DIM];
    theta[..32].fill(cfg.p_entry_range.1);
    theta[32..36].fill(cfg.b_entry_range.1);
    let corners = |r: (f64, f64)| [r.0, r.1];
    let mut max_observed = 0.0_f64;
    let mut count = 0;
    for &px in &corners(cfg.pos_range_p1) {
        for &py in &corners(cfg.pos_range_p1) {
            theta[OFFSET_POS[0]] = px;
            theta[OFFSET_POS[0] + 1] = py;
            theta[OFFSET_POS[1]] = cfg.pos_range_p2.1;
            theta[OFFSET_POS[1] + 1] = cfg.pos_range_p2.1;
            for pattern in 0u32..(1 << n) {
                let u: Vec<f64> = (0..n)
                    .map(|k| if pattern >> k & 1 == 1 { 1.0 } else { -1.0 })
                    .collect();
                let mut x = u.clone();
                x.extend(u.iter().map(|v| -v));
                for i in 0..NUM_PLAYERS {
                    max_observed = max_observed.max(game.spec.objective(&x, &theta, i)?.abs());
                }
                count += 1;
            }
        }
    }
    // player 2's corners mirror player 1's through the sign of the controls
    for &px in &corners(cfg.pos_range_p2) {
        for &py in &corners(cfg.pos_range_p2) {
            theta[OFFSET_POS[1]] = px;
            theta[OFFSET_POS[1] + 1] = py;
            for pattern in 0u32..(1 << n) {
                let mut x = vec![0.0; n];
                x.extend((0..n).map(|k| if pattern >> k & 1 == 1 { 1.0 } else { -1.0 }));
                max_observed = max_observed.max(game.spec.objective(&x, &theta, 1)?.abs());
                count += 1;
            }
        }
    }
    Ok(BoundAudit {
        max_observed,
        bound: cfg.objective_bound,
        samples: count,
        exceeded: max_observed > cfg.objective_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::sample_scenarios;
    use crate::game::{check_monotonicity, gradient_consistency_check};

    #[test]
    fn literal_dynamics_matrices() {
        let (a, b) = dynamics(0.1);
        assert_eq!(a[(0, 1)], 0.1);
        assert_eq!(a[(2, 3)], 0.1);
        assert_eq!(a[(1, 0)], 0.0);
        assert_eq!(a.diagonal(), Vector4::new(1.0, 1.0, 1.0, 1.0));
        assert!((b[(0, 0)] - 0.005).abs() < 1e-18);
        assert_eq!(b[(1, 0)], 0.1);
        assert!((b[(2, 1)] - 0.005).abs() < 1e-18);
        assert_eq!(b[(3, 1)], 0.1);
        assert_eq!(b[(0, 1)], 0.0);
    }

    #[test]
    fn unit_step_matches_input_column() {
        let cfg = RendezvousConfig {
            horizon: 1,
            dt: 1.0,
            ..Default::default()
        };
        let traj = rollout(&cfg, [0.0; 4], &[1.0, 0.0]).unwrap();
        assert_eq!(traj[1], [0.5, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_acceleration_follows_closed_form() {
        let cfg = RendezvousConfig {
            horizon: 3,
            dt: 1.0,
            ..Default::default()
        };
        let traj = rollout(&cfg, [0.0; 4], &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let positions: Vec<f64> = traj.iter().map(|s| s[0]).collect();
        assert_eq!(positions, vec![0.0, 0.5, 2.0, 4.5]);

        let still = rollout(&cfg, [0.3, 0.0, -0.2, 0.0], &[0.0; 6]).unwrap();
        assert!(still.iter().all(|s| *s == [0.3, 0.0, -0.2, 0.0]));
    }

    #[test]
    fn one_step_objective_by_hand() {
        let cfg = RendezvousConfig {
            horizon: 1,
            dt: 1.0,
            ..Default::default()
        };
        let dynamics = RendezvousDynamics::new(cfg).unwrap();
        let mut theta = vec![0.0; PARAM_DIM];
        theta[OFFSET_POS[0]] = 0.2;
        theta[OFFSET_POS[0] + 1] = -0.1;
        // xi(0) = (0.2, 0, -0.1, 0); u = (0.4, -0.6)
        // xi(1) = (0.2 + 0.2, 0.4, -0.1 - 0.3, -0.6)
        let x = [0.4, -0.6, 0.0, 0.0];
        let s0 = 0.04 + 0.01;
        let s1 = 0.16 + 0.16 + 0.16 + 0.36;
        let want = 0.5 * s0 + 0.5 * s1 + 0.5 * (0.16 + 0.36);
        let got = dynamics.objective(&x, &theta, 0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn zero_controls_from_origin_are_feasible() {
        let game = build_game(&RendezvousConfig::default()).unwrap();
        let mut theta = vec![0.0; PARAM_DIM];
        theta[OFFSET_B[0]..OFFSET_B[1] + 2].copy_from_slice(&[0.004, 0.002, 0.003, 0.007]);
        let x = vec![0.0; 20];
        let h = game.spec.joint_constraint(&x, &theta).unwrap();
        assert_eq!(h.len(), 35);
        assert!(h.iter().all(|&v| v <= 0.0));
        // norm rows have slack exactly 1
        let norm_rows = &h.as_slice()[20..25];
        assert!(norm_rows.iter().all(|&v| v == -1.0));
        // relative-position rows use the tighter offset per axis
        assert_eq!(h[0], -0.003);
        assert_eq!(h[1], -0.002);
    }

    #[test]
    fn dimensions_and_row_count() {
        let cfg = RendezvousConfig::default();
        let game = build_game(&cfg).unwrap();
        let dims = game.spec.dims();
        assert_eq!(dims.decision_dim, 10);
        assert_eq!(dims.joint_dim(), 20);
        assert_eq!(dims.param_dim, 40);
        assert_eq!(dims.total_constraints(), 35);
        assert_eq!(cfg.rows_per_scenario(), 35);
        assert!(!game.spec.separable_constraints());
    }

    #[test]
    fn callbacks_are_consistent() {
        let game = build_game(&RendezvousConfig::default()).unwrap();
        let report = gradient_consistency_check(&game.spec, 50, 3).unwrap();
        assert!(report.max_deviation() <= 1e-6, "{report:?}");
    }

    #[test]
    fn analytic_second_derivatives_match_finite_differences() {
        let game = build_game(&RendezvousConfig::default()).unwrap();
        let dynamics = RendezvousDynamics::new(RendezvousConfig::default()).unwrap();
        let set = sample_scenarios(&game.sampler, 3, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for theta in set.iter() {
            let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let analytic = dynamics.pseudogradient_jacobian(&x, theta).unwrap();
            let fd = crate::game::central_difference_jacobian(&x, |y| {
                game.spec.pseudogradient(y, theta)
            })
            .unwrap();
            assert!((&analytic - &fd).amax() < 1e-7);

            let weights: Vec<f64> = (0..35).map(|_| rng.gen_range(0.0..2.0)).collect();
            let total = game.spec.constraint_curvature(&x, theta, &weights).unwrap();
            let wv = DVector::from_vec(weights.clone());
            let fd = crate::game::central_difference_jacobian(&x, |y| {
                Ok(game.spec.joint_constraint_jacobian(y, theta)?.transpose() * &wv)
            })
            .unwrap();
            assert!((&total - &fd).amax() < 1e-6);
        }
    }

    #[test]
    fn pseudogradient_is_monotone() {
        let game = build_game(&RendezvousConfig::default()).unwrap();
        let report = check_monotonicity(&game.spec, 1000, 12).unwrap();
        assert!(report.min_inner_product >= -1e-10, "{report:?}");
    }

    #[test]
    fn objective_bound_holds() {
        let cfg = RendezvousConfig::default();
        let audit = verify_objective_bound(&cfg, 10_000, 5).unwrap();
        assert!(audit.max_observed < 3.0 && !audit.exceeded, "{audit:?}");
        let corner = corner_objective_bound(&cfg).unwrap();
        assert!(corner.max_observed <= 3.0, "{corner:?}");
        assert!(corner.max_observed >= audit.max_observed);
    }

    #[test]
    fn zero_state_zero_control_cost_is_zero() {
        let game = build_game(&RendezvousConfig::default()).unwrap();
        let theta = vec![0.0; PARAM_DIM];
        for i in 0..2 {
            assert_eq!(game.spec.objective(&[0.0; 20], &theta, i).unwrap(), 0.0);
        }
    }
}

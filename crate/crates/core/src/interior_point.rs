//! Primal-dual interior-point method for monotone variational KKT systems
//!
//! ```text
//! G(w) + J(w)^T v = 0,   h(w) <= 0,   v >= 0,   v . h(w) = 0
//! ```
//!
//! where `G` is a monotone operator (not necessarily a gradient) and `h` is
//! convex. Slacks `s = -h(w)` carry the perturbed complementarity
//! `s . v = mu`; Newton steps are taken on the reduced system
//! `(dG + sum_k v_k hess h_k + J^T diag(v/s) J) dw = rhs` and the barrier
//! parameter shrinks geometrically once the current barrier problem is
//! solved to `10 mu`.

use nalgebra::{DMatrix, DVector};

use crate::error::{InnerSolveError, Result};

/// Callbacks describing one KKT system.
pub(crate) trait KktSystem {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn operator(&self, w: &DVector<f64>) -> Result<DVector<f64>>;
    fn operator_jacobian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn constraints(&self, w: &DVector<f64>) -> Result<DVector<f64>>;
    fn constraint_jacobian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// `sum_k v_k hess h_k(w)`.
    fn curvature(&self, w: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Termination and step-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpOptions {
    /// Stationarity tolerance (infinity norm).
    pub tol: f64,
    /// Constraint violation tolerance.
    pub feas_tol: f64,
    /// Complementarity tolerance on `v . h`.
    pub comp_tol: f64,
    pub max_iter: usize,
    pub mu_decrease: f64,
    pub fraction_to_boundary: f64,
}

impl Default for IpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            feas_tol: 1e-9,
            comp_tol: 1e-8,
            max_iter: 100,
            mu_decrease: 0.2,
            fraction_to_boundary: 0.995,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct IpSolution {
    pub w: DVector<f64>,
    pub v: DVector<f64>,
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub iterations: usize,
}

const COLD_SLACK_FLOOR: f64 = 1e-2;
const WARM_FLOOR: f64 = 1e-12;
const MULTIPLIER_BLOWUP: f64 = 1e10;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Clone, Copy)]
pub(crate) struct Residuals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

/// True KKT residuals at `(w, v)`, independent of any slack.
pub(crate) fn kkt_residuals<K: KktSystem>(
    sys: &K,
    w: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<Residuals> {
    let g = sys.operator(w)?;
    let h = sys.constraints(w)?;
    let r_d = if sys.num_constraints() > 0 {
        g + sys.constraint_jacobian(w)?.transpose() * v
    } else {
        g
    };
    Ok(Residuals {
        stationarity: inf_norm(&r_d),
        feasibility: h.iter().fold(0.0, |m, &x| m.max(x.max(0.0))),
        complementarity: h
            .iter()
            .zip(v.iter())
            .fold(0.0, |m, (a, b)| m.max((a * b).abs())),
    })
}

struct Point {
    w: DVector<f64>,
    s: DVector<f64>,
    v: DVector<f64>,
}

struct Eval {
    h: DVector<f64>,
    jac: DMatrix<f64>,
    r_d: DVector<f64>,
    r_p: DVector<f64>,
}

fn evaluate<K: KktSystem>(sys: &K, pt: &Point) -> Result<Eval> {
    let g = sys.operator(&pt.w)?;
    let h = sys.constraints(&pt.w)?;
    let jac = sys.constraint_jacobian(&pt.w)?;
    let r_d = if sys.num_constraints() > 0 {
        g + jac.transpose() * &pt.v
    } else {
        g
    };
    let r_p = &h + &pt.s;
    Ok(Eval { h, jac, r_d, r_p })
}

fn merit(e: &Eval, pt: &Point, mu: f64) -> f64 {
    let rc: f64 =
        pt.s.iter()
            .zip(pt.v.iter())
            .map(|(s, v)| (s * v - mu).powi(2))
            .sum();
    (e.r_d.norm_squared() + e.r_p.norm_squared() + rc).sqrt()
}

fn fraction_to_boundary(x: &DVector<f64>, dx: &DVector<f64>, tau: f64) -> f64 {
    x.iter().zip(dx.iter()).fold(1.0, |alpha, (&xi, &dxi)| {
        if dxi < 0.0 {
            alpha.min(-tau * xi / dxi)
        } else {
            alpha
        }
    })
}

fn solve_regularized(a: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let p = a.nrows();
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut m = a.clone();
        for i in 0..p {
            m[(i, i)] += shift;
        }
        let lu = m.lu();
        if let Some(sol) = lu.solve(rhs) {
            if sol.iter().all(|x| x.is_finite()) {
                return Some(sol);
            }
        }
        shift = if shift == 0.0 { 1e-8 } else { shift * 100.0 };
    }
    None
}

/// Runs the interior-point iteration from `w0` (and optional multipliers).
pub(crate) fn solve<K: KktSystem>(
    sys: &K,
    w0: DVector<f64>,
    v0: Option<&DVector<f64>>,
    opts: &IpOptions,
) -> Result<IpSolution> {
    let m = sys.num_constraints();
    let h0 = sys.constraints(&w0)?;
    let (s, v, mut mu) = match v0 {
        Some(v0) if v0.len() == m => {
            let s = h0.map(|h| (-h).max(WARM_FLOOR));
            let v = v0.map(|v| v.max(WARM_FLOOR));
            let mu = if m > 0 { s.dot(&v) / m as f64 } else { 0.0 };
            (s, v, mu)
        }
        _ => {
            let s = h0.map(|h| (-h).max(COLD_SLACK_FLOOR));
            let v = DVector::from_element(m, 1.0);
            let mu = if m > 0 {
                0.2 * s.dot(&v) / m as f64
            } else {
                0.0
            };
            (s, v, mu)
        }
    };
    let mu_floor = 0.1 * opts.comp_tol.min(opts.tol);
    mu = mu.max(mu_floor);
    let mut pt = Point { w: w0, s, v };
    let mut best: Option<(f64, DVector<f64>, Residuals)> = None;

    let mut cached: Option<Eval> = None;
    for iter in 0..opts.max_iter {
        let e = match cached.take() {
            Some(e) => e,
            None => evaluate(sys, &pt)?,
        };
        let res = Residuals {
            stationarity: inf_norm(&e.r_d),
            feasibility: e.h.iter().fold(0.0, |a, &x| a.max(x.max(0.0))),
            complementarity: e
                .h
                .iter()
                .zip(pt.v.iter())
                .fold(0.0, |a, (h, v)| a.max((h * v).abs())),
        };
        if res.stationarity <= opts.tol
            && res.feasibility <= opts.feas_tol
            && res.complementarity <= opts.comp_tol
        {
            return Ok(IpSolution {
                w: pt.w,
                v: pt.v,
                stationarity: res.stationarity,
                feasibility: res.feasibility,
                complementarity: res.complementarity,
                iterations: iter,
            });
        }
        let score = (res.stationarity / opts.tol)
            .max(res.feasibility / opts.feas_tol)
            .max(res.complementarity / opts.comp_tol);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, pt.w.clone(), res));
        }
        if m > 0 && inf_norm(&pt.v) > MULTIPLIER_BLOWUP {
            let feas = inf_norm(&e.r_p.zip_map(&pt.s, |r, s| r - s).map(|h| h.max(0.0)));
            if feas > opts.feas_tol {
                return Err(InnerSolveError::Infeasible { violation: feas }.into());
            }
        }

        // barrier update
        if m > 0 {
            loop {
                let rc =
                    pt.s.iter()
                        .zip(pt.v.iter())
                        .fold(0.0, |a: f64, (s, v)| a.max((s * v - mu).abs()));
                let barrier_err = inf_norm(&e.r_d).max(inf_norm(&e.r_p)).max(rc);
                if barrier_err <= 10.0 * mu && mu > mu_floor {
                    mu = (mu * opts.mu_decrease).max(mu_floor);
                } else {
                    break;
                }
            }
        }

        // Newton direction on the reduced system
        let mut k = sys.operator_jacobian(&pt.w)?;
        let dw;
        let ds;
        let dv;
        if m > 0 {
            k += sys.curvature(&pt.w, &pt.v)?;
            let d = pt.v.component_div(&pt.s);
            let scaled_j = DMatrix::from_fn(m, e.jac.ncols(), |r, c| d[r] * e.jac[(r, c)]);
            let a = k + e.jac.transpose() * scaled_j;
            let r_c = pt.s.component_mul(&pt.v).add_scalar(-mu);
            let inner = (-&r_c + pt.v.component_mul(&e.r_p)).component_div(&pt.s);
            let rhs = -&e.r_d - e.jac.transpose() * inner;
            dw = solve_regularized(a, &rhs).ok_or(InnerSolveError::Singular)?;
            ds = -&e.r_p - &e.jac * &dw;
            dv = (-r_c - pt.v.component_mul(&ds)).component_div(&pt.s);
        } else {
            let rhs = -&e.r_d;
            dw = solve_regularized(k, &rhs).ok_or(InnerSolveError::Singular)?;
            ds = DVector::zeros(0);
            dv = DVector::zeros(0);
        }

        let tau = opts.fraction_to_boundary;
        let alpha_max =
            fraction_to_boundary(&pt.s, &ds, tau).min(fraction_to_boundary(&pt.v, &dv, tau));
        let phi0 = merit(&e, &pt, mu);
        let mut alpha = alpha_max;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = Point {
                w: &pt.w + &dw * alpha,
                s: &pt.s + &ds * alpha,
                v: &pt.v + &dv * alpha,
            };
            if let Ok(te) = evaluate(sys, &trial) {
                let sufficient = merit(&te, &trial, mu) <= (1.0 - 1e-4 * alpha) * phi0;
                accepted = Some((trial, te));
                if sufficient {
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, te)) => {
                pt = trial;
                cached = Some(te);
            }
            None => break,
        }
    }

    let (_, best_w, res) = best.unwrap_or_else(|| {
        (
            f64::INFINITY,
            pt.w.clone(),
            Residuals {
                stationarity: f64::INFINITY,
                feasibility: f64::INFINITY,
                complementarity: f64::INFINITY,
            },
        )
    });
    if m > 0 && res.feasibility > opts.feas_tol && inf_norm(&pt.v) > 1e6 {
        return Err(InnerSolveError::Infeasible {
            violation: res.feasibility,
        }
        .into());
    }
    Err(InnerSolveError::MaxIter {
        iterations: opts.max_iter,
        best_w: best_w.as_slice().to_vec(),
        stationarity: res.stationarity,
        feasibility: res.feasibility,
        complementarity: res.complementarity,
    }
    .into())
}

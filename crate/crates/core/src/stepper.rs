//! Fully implicit time marching of the semidiscrete system.
//!
//! Each step solves `u - u_n - dt * rhs(u, t_{n+1}) = 0` with damped Newton
//! iteration on the analytic tridiagonal Jacobian; when Newton stalls the
//! step falls back to Picard sweeps with the diffusion coefficient frozen at
//! the previous iterate. A failed step is retried with halved substeps, up to
//! ten halvings. Backward Euler is deliberate: first-order monotone marching
//! is the safe choice when the target is a viscosity solution, and no value
//! is ever clipped into range; violations are reported, not hidden.

use crate::error::Error;
use crate::fv::{jacobian, semidiscrete_rhs, Tridiagonal};
use crate::grid::{Grid, SolutionField};
use crate::model::{diffusion_coeff, MarketParams, RegularizationParams};
use crate::smoothing::InitialProfile;

/// Time-marching options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Number of uniform macro steps over `[0, T]`.
    pub nt: usize,
    /// Snapshot cadence in time units.
    pub dt_out: f64,
    /// Max-norm residual tolerance for an accepted step.
    pub tol_newton: f64,
    /// Iteration budget for Newton and again for the Picard fallback.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            nt: 500,
            dt_out: 0.02,
            tol_newton: 1e-10,
            max_iter: 20,
        }
    }
}

/// Per-macro-step solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub t_end: f64,
    pub newton_iters: usize,
    pub picard_iters: usize,
    /// Final nonlinear residual max-norm (worst substep).
    pub residual: f64,
    /// Time-step halvings needed inside this macro step.
    pub halvings: usize,
    /// Most negative forward difference of the accepted field.
    pub min_forward_diff: f64,
}

/// Ordered snapshots plus step metadata.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub snapshots: Vec<SolutionField>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn final_field(&self) -> &SolutionField {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }
}

struct StepStats {
    newton_iters: usize,
    picard_iters: usize,
    residual: f64,
}

fn residual_vec(x: &[f64], u: &[f64], u_prev: &[f64], t_new: f64, dt: f64, market: &MarketParams, eps: f64) -> Vec<f64> {
    let rate = semidiscrete_rhs(x, u, t_new, market, eps);
    let n = x.len();
    let mut res = vec![0.0; n];
    for i in 1..n - 1 {
        res[i] = u[i] - u_prev[i] - dt * rate[i];
    }
    res[0] = u[0];
    res[n - 1] = u[n - 1] - 1.0;
    res
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// One backward-Euler step from `u_n` at `t_n` to `t_n + dt`.
pub fn step_implicit(
    x: &[f64],
    u_n: &[f64],
    t_n: f64,
    dt: f64,
    market: &MarketParams,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, StepStats), Error> {
    let t_new = t_n + dt;
    let n = x.len();
    let mut u = u_n.to_vec();
    u[0] = 0.0;
    u[n - 1] = 1.0;

    let mut res = residual_vec(x, &u, u_n, t_new, dt, market, eps);
    let mut rn = max_norm(&res);
    let mut damping_failures = 0usize;
    let mut newton_iters = 0usize;

    while newton_iters < max_iter {
        if rn <= tol {
            return Ok((
                u,
                StepStats {
                    newton_iters,
                    picard_iters: 0,
                    residual: rn,
                },
            ));
        }
        if damping_failures >= max_iter / 2 {
            break; // hand over to Picard
        }
        let jac = jacobian(x, &u, t_new, market, eps);
        let mut sys = Tridiagonal::zeros(n);
        for i in 1..n - 1 {
            sys.lower[i] = -dt * jac.lower[i];
            sys.diag[i] = 1.0 - dt * jac.diag[i];
            sys.upper[i] = -dt * jac.upper[i];
        }
        sys.diag[0] = 1.0;
        sys.diag[n - 1] = 1.0;
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = sys.solve(&neg_res)?;
        // halve the update until the residual decreases
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(&ui, &di)| ui + lambda * di).collect();
            let trial_res = residual_vec(x, &trial, u_n, t_new, dt, market, eps);
            let trial_rn = max_norm(&trial_res);
            if trial_rn < rn {
                u = trial;
                res = trial_res;
                rn = trial_rn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            damping_failures += 1;
        }
        newton_iters += 1;
    }

    // Picard fallback: freeze the diffusion coefficient at the current
    // iterate, solve the resulting linear system, repeat.
    let rq = market.r - market.q;
    let mut picard_iters = 0usize;
    while picard_iters < max_iter {
        let mut sys = Tridiagonal::zeros(n);
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h = 0.5 * (x[i + 1] - x[i - 1]);
            let dxp = x[i + 1] - x[i];
            let dxm = x[i] - x[i - 1];
            let sp = (u[i + 1] - u[i]) / dxp;
            let sm = (u[i] - u[i - 1]) / dxm;
            let xfp = 0.5 * (x[i] + x[i + 1]);
            let xfm = 0.5 * (x[i] + x[i - 1]);
            let ap = diffusion_coeff(xfp, t_new, sp, market, eps);
            let am = diffusion_coeff(xfm, t_new, sm, market, eps);
            let mut lo = am / (dxm * h);
            let mut di = -(ap / dxp + am / dxm) / h - market.q;
            let mut up = ap / (dxp * h);
            let c = rq * x[i];
            if c >= 0.0 {
                up += c / dxp;
                di -= c / dxp;
            } else {
                di += c / dxm;
                lo -= c / dxm;
            }
            sys.lower[i] = -dt * lo;
            sys.diag[i] = 1.0 - dt * di;
            sys.upper[i] = -dt * up;
            rhs[i] = u_n[i];
        }
        sys.diag[0] = 1.0;
        sys.diag[n - 1] = 1.0;
        rhs[0] = 0.0;
        rhs[n - 1] = 1.0;
        u = sys.solve(&rhs)?;
        picard_iters += 1;
        res = residual_vec(x, &u, u_n, t_new, dt, market, eps);
        rn = max_norm(&res);
        if rn <= tol {
            return Ok((
                u,
                StepStats {
                    newton_iters,
                    picard_iters,
                    residual: rn,
                },
            ));
        }
    }
    Err(Error::NonlinearSolve {
        t: t_new,
        dt,
        residual: rn,
    })
}

fn min_forward_diff(u: &[f64]) -> (f64, usize) {
    let mut worst = f64::INFINITY;
    let mut at = 0;
    for i in 0..u.len() - 1 {
        let d = u[i + 1] - u[i];
        if d < worst {
            worst = d;
            at = i;
        }
    }
    (worst, at)
}

/// Marches the smoothed initial profile from `t = 0` to `t = T`.
///
/// Macro steps are `T / nt`; a failing step is re-tried with halved substeps
/// (up to ten halvings) before giving up. Snapshots are recorded at `t = 0`,
/// every `dt_out`, and at `T`.
pub fn solve(
    market: &MarketParams,
    reg: &RegularizationParams,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<Trajectory, Error> {
    solve_from(
        market,
        reg,
        grid,
        opts,
        &InitialProfile::Smoothed {
            strike: market.strike,
            half_width: reg.smoothing_width,
        },
    )
}

/// [`solve`] from an explicit initial profile (used by comparison tests).
pub fn solve_from(
    market: &MarketParams,
    reg: &RegularizationParams,
    grid: &Grid,
    opts: &SolverOptions,
    initial: &InitialProfile,
) -> Result<Trajectory, Error> {
    let x = grid.nodes();
    let mut field = SolutionField::new(initial.sample(x), 0.0);
    field.pin_boundaries();

    let mut snapshots = vec![field.clone()];
    let mut diagnostics = Vec::new();
    let t_end = market.horizon;
    if t_end <= 0.0 || opts.nt == 0 {
        return Ok(Trajectory {
            grid: grid.clone(),
            snapshots,
            diagnostics,
        });
    }

    let dt_macro = t_end / opts.nt as f64;
    let mut u = field.values;
    let mut next_out = opts.dt_out;
    for k in 0..opts.nt {
        let t_start = k as f64 * dt_macro;
        let t_target = (k + 1) as f64 * dt_macro;
        let mut t = t_start;
        let mut halvings = 0usize;
        let mut sub_dt = dt_macro;
        let mut newton_total = 0usize;
        let mut picard_total = 0usize;
        let mut worst_res = 0.0f64;
        while t < t_target - 1e-14 * t_end {
            let dt = sub_dt.min(t_target - t);
            match step_implicit(x, &u, t, dt, market, reg.eps, opts.tol_newton, opts.max_iter) {
                Ok((next, stats)) => {
                    u = next;
                    t += dt;
                    newton_total += stats.newton_iters;
                    picard_total += stats.picard_iters;
                    worst_res = worst_res.max(stats.residual);
                }
                Err(Error::NonlinearSolve { .. }) => {
                    halvings += 1;
                    if halvings > 10 {
                        return Err(Error::StepHalvingExhausted { t, halvings });
                    }
                    sub_dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        let (mfd, _) = min_forward_diff(&u);
        diagnostics.push(StepDiagnostics {
            t_end: t_target,
            newton_iters: newton_total,
            picard_iters: picard_total,
            residual: worst_res,
            halvings,
            min_forward_diff: mfd,
        });
        let is_last = k + 1 == opts.nt;
        if t_target >= next_out - 1e-12 * t_end || is_last {
            snapshots.push(SolutionField::new(u.clone(), t_target));
            while next_out <= t_target + 1e-12 * t_end {
                next_out += opts.dt_out;
            }
        }
    }
    Ok(Trajectory {
        grid: grid.clone(),
        snapshots,
        diagnostics,
    })
}

/// One row per snapshot: the most negative forward difference and where.
#[derive(Debug, Clone)]
pub struct MonotonicityRow {
    pub time: f64,
    pub min_forward_diff: f64,
    pub at_x: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub rows: Vec<MonotonicityRow>,
}

impl MonotonicityReport {
    pub fn clean(&self) -> bool {
        self.rows.iter().all(|r| !r.flagged)
    }
}

/// Scans every snapshot for spatial monotonicity violations below `-1e-8`.
pub fn monotonicity_report(traj: &Trajectory) -> MonotonicityReport {
    let x = traj.grid.nodes();
    let rows = traj
        .snapshots
        .iter()
        .map(|snap| {
            let (worst, at) = min_forward_diff(&snap.values);
            MonotonicityRow {
                time: snap.time,
                min_forward_diff: worst,
                at_x: x[at],
                flagged: worst < -1e-8,
            }
        })
        .collect();
    MonotonicityReport { rows }
}

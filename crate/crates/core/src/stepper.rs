//! Implicit two-step discrete Euler-Lagrange stepper.
//!
//! Each step solves D2 L(z_prev, z_cur, t - tau) + D1 L(z_cur, z_next, t) = 0
//! for z_next by damped Newton with a finite-difference Jacobian. The second
//! initial condition of a trajectory can come from the reference oracle
//! (the constructive stand-in for the smooth modified system), from the
//! unperturbed flow, or from the caller.

use nalgebra::{DMatrix, DVector};

use crate::error::{PviError, Result};
use crate::lagrangian::DiscreteLagrangian;
use crate::oracle::{oracle_flow, OracleConfig};
use crate::phase::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    /// Push the current point along the unperturbed flow (default).
    UnperturbedPush,
    /// Linear extrapolation from the previous pair.
    PreviousStepExtrapolation,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Initial Newton damping factor in (0, 1].
    pub damping: f64,
    /// Accept a stagnated iterate whose residual is below this bound.
    /// Finite-difference noise in the Lagrangian gradients puts a floor
    /// under the achievable residual, so refusing to stop slightly above
    /// `residual_tol` would turn noise into hard failures.
    pub stagnation_tol: f64,
    pub predictor: Predictor,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            residual_tol: 1e-12,
            max_iterations: 50,
            damping: 1.0,
            stagnation_tol: 1e-10,
            predictor: Predictor::UnperturbedPush,
        }
    }
}

/// How the second initial condition is produced.
#[derive(Debug, Clone)]
pub enum InitMode {
    OracleFlow(OracleConfig),
    UnperturbedFlow,
    UserSupplied(DVector<f64>),
}

/// Per-step solver metadata.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub final_residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<PhasePoint>,
    /// One entry per Newton-solved point (points\[2..\]).
    pub stats: Vec<StepStats>,
}

/// Result of `integrate`: the (possibly partial) trajectory plus the error
/// that stopped it, if any.
pub struct IntegrationOutcome {
    pub trajectory: Trajectory,
    pub failure: Option<(usize, PviError)>,
}

/// DEL residual D2 L(z_prev, z_cur, t_prev) + D1 L(z_cur, z_next, t_prev + tau).
pub fn del_residual(
    dl: &DiscreteLagrangian,
    z_prev: &DVector<f64>,
    z_cur: &DVector<f64>,
    z_next: &DVector<f64>,
    t_prev: f64,
) -> Result<DVector<f64>> {
    for z in [z_prev, z_cur, z_next] {
        if !z.iter().all(|v| v.is_finite()) {
            return Err(PviError::NonFinite("del_residual"));
        }
    }
    let (_, d2) = dl.partial_gradients(z_prev, z_cur, t_prev)?;
    let (d1, _) = dl.partial_gradients(z_cur, z_next, t_prev + dl.tau)?;
    Ok(d2 + d1)
}

/// Solve one step of the DEL equations for z_next, given the pair
/// (z_prev, z_cur) with z_prev at time t_prev.
pub fn step(
    dl: &DiscreteLagrangian,
    cfg: &SolverConfig,
    z_prev: &DVector<f64>,
    z_cur: &DVector<f64>,
    t_prev: f64,
) -> Result<(DVector<f64>, StepStats)> {
    let t_cur = t_prev + dl.tau;
    let (_, d2_fixed) = dl.partial_gradients(z_prev, z_cur, t_prev)?;

    let mut z = match cfg.predictor {
        Predictor::UnperturbedPush => dl.sys.flow(z_cur, t_cur + dl.tau, t_cur),
        Predictor::PreviousStepExtrapolation => z_cur * 2.0 - z_prev,
    };

    let residual_of = |z_next: &DVector<f64>| -> Result<DVector<f64>> {
        let (d1, _) = dl.partial_gradients(z_cur, z_next, t_cur)?;
        Ok(&d2_fixed + d1)
    };

    let mut res = residual_of(&z)?;
    let mut res_norm = res.norm();
    let mut iterations = 0usize;

    while res_norm > cfg.residual_tol {
        if iterations >= cfg.max_iterations {
            return Err(PviError::NonConvergence {
                iterations,
                residual: res_norm,
                best: z,
            });
        }
        iterations += 1;

        let jac = residual_jacobian(&residual_of, &z)?;
        let lu = jac.lu();
        let delta = lu
            .solve(&res)
            .ok_or(PviError::SingularJacobian { iteration: iterations })?;

        // Damped update: halve on residual increase, up to 8 halvings.
        let mut factor = cfg.damping;
        let mut accepted = false;
        for _ in 0..=8 {
            let trial = &z - &delta * factor;
            match residual_of(&trial) {
                Ok(r) => {
                    let n = r.norm();
                    if n < res_norm || factor < cfg.damping / 200.0 {
                        z = trial;
                        res = r;
                        res_norm = n;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            factor *= 0.5;
        }
        if !accepted {
            if res_norm <= cfg.stagnation_tol {
                break;
            }
            return Err(PviError::NonConvergence {
                iterations,
                residual: res_norm,
                best: z,
            });
        }
    }

    Ok((
        z,
        StepStats {
            newton_iterations: iterations,
            final_residual_norm: res_norm,
        },
    ))
}

fn residual_jacobian<F>(residual: &F, z: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = z.len();
    let h0 = 1e-6;
    let mut jac = DMatrix::zeros(n, n);
    let mut zp = z.clone();
    for j in 0..n {
        let h = h0 * z[j].abs().max(1.0);
        zp[j] = z[j] + h;
        let rp = residual(&zp)?;
        zp[j] = z[j] - h;
        let rm = residual(&zp)?;
        zp[j] = z[j];
        for i in 0..n {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Produce the second initial condition at t0 + tau.
pub fn initialize_second_point(
    dl: &DiscreteLagrangian,
    z0: &DVector<f64>,
    t0: f64,
    mode: &InitMode,
) -> Result<DVector<f64>> {
    if !z0.iter().all(|v| v.is_finite()) {
        return Err(PviError::NonFinite("initialize_second_point"));
    }
    match mode {
        InitMode::OracleFlow(cfg) => oracle_flow(&dl.sys, cfg, z0, t0, t0 + dl.tau),
        InitMode::UnperturbedFlow => Ok(dl.sys.flow(z0, t0 + dl.tau, t0)),
        InitMode::UserSupplied(z1) => Ok(z1.clone()),
    }
}

/// Iterate the DEL equations for n_steps intervals of tau starting at t0.
/// The trajectory holds n_steps + 1 points; the point at t0 + tau comes from
/// the initialization mode, the rest from Newton solves. On a step failure
/// the partial trajectory is returned together with the error.
pub fn integrate(
    dl: &DiscreteLagrangian,
    cfg: &SolverConfig,
    z0: &DVector<f64>,
    t0: f64,
    mode: &InitMode,
    n_steps: usize,
) -> IntegrationOutcome {
    assert!(n_steps >= 1, "need at least one step");
    let mut points = vec![PhasePoint::new(z0.clone(), t0)];
    let mut stats = Vec::new();

    let z1 = match initialize_second_point(dl, z0, t0, mode) {
        Ok(z) => z,
        Err(e) => {
            return IntegrationOutcome {
                trajectory: Trajectory { points, stats },
                failure: Some((1, e)),
            }
        }
    };
    points.push(PhasePoint::new(z1, t0 + dl.tau));

    for k in 2..=n_steps {
        let t_prev = t0 + (k as f64 - 2.0) * dl.tau;
        let z_prev = points[k - 2].z.clone();
        let z_cur = points[k - 1].z.clone();
        match step(dl, cfg, &z_prev, &z_cur, t_prev) {
            Ok((z_next, st)) => {
                points.push(PhasePoint::new(z_next, t0 + k as f64 * dl.tau));
                stats.push(st);
            }
            Err(e) => {
                return IntegrationOutcome {
                    trajectory: Trajectory { points, stats },
                    failure: Some((k, e)),
                }
            }
        }
    }
    IntegrationOutcome {
        trajectory: Trajectory { points, stats },
        failure: None,
    }
}

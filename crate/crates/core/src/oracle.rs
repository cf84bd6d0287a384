//! High-accuracy conventional reference integrator.
//!
//! A one-step adaptive embedded Dormand-Prince 5(4) pair, free of parasitic
//! modes by construction, used as ground truth for convergence studies and
//! for the oracle-flow initialization of the two-step schemes.

use nalgebra::DVector;

use crate::error::{PviError, Result};
use crate::phase::SystemSpec;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step_rejections: usize,
    pub initial_step: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_step_rejections: 10_000,
            initial_step: 1e-2,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate z' = X_{H_t + eps h_t}(z) from t0 to t1 (either direction) and
/// return z(t1).
pub fn oracle_flow(
    sys: &SystemSpec,
    cfg: &OracleConfig,
    z0: &DVector<f64>,
    t0: f64,
    t1: f64,
) -> Result<DVector<f64>> {
    if !z0.iter().all(|v| v.is_finite()) {
        return Err(PviError::NonFinite("oracle_flow"));
    }
    if t0 == t1 {
        return Ok(z0.clone());
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut z = z0.clone();
    let mut h = cfg.initial_step.abs().min(span).max(1e-12) * dir;
    let mut k0 = sys.full_vector_field(&z, t)?;
    let mut rejections = 0usize;

    while (t1 - t) * dir > 0.0 {
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let mut k = [
            k0.clone(),
            DVector::zeros(sys.n),
            DVector::zeros(sys.n),
            DVector::zeros(sys.n),
            DVector::zeros(sys.n),
            DVector::zeros(sys.n),
            DVector::zeros(sys.n),
        ];
        for i in 0..6 {
            let mut zi = z.clone();
            for (j, kj) in k.iter().enumerate().take(i + 1) {
                if A[i][j] != 0.0 {
                    zi += kj * (h * A[i][j]);
                }
            }
            k[i + 1] = sys.full_vector_field(&zi, t + C[i] * h)?;
        }
        // 5th-order solution is the stage-7 point (FSAL).
        let mut z5 = z.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[5][j] != 0.0 {
                z5 += kj * (h * A[5][j]);
            }
        }
        let mut err = DVector::zeros(sys.n);
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err += kj * (h * E[j]);
            }
        }
        let mut errnorm = 0.0f64;
        for i in 0..sys.n {
            let sc = cfg.abs_tol + cfg.rel_tol * z[i].abs().max(z5[i].abs());
            errnorm += (err[i] / sc).powi(2);
        }
        let errnorm = (errnorm / sys.n as f64).sqrt();

        if errnorm <= 1.0 {
            t += h;
            z = z5;
            k0 = k[6].clone();
            rejections = 0;
            let fac = (0.9 * errnorm.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            h *= fac;
        } else {
            rejections += 1;
            if rejections > cfg.max_step_rejections || h.abs() < 1e-14 * span.max(1.0) {
                return Err(PviError::StepFailure { t });
            }
            let fac = (0.9 * errnorm.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{make_builtin, rotor_exact_flow, BuiltinName};
    use nalgebra::dvector;

    #[test]
    fn sho_quarter_period() {
        let sys = make_builtin(BuiltinName::RotorOscillator, 1.0).unwrap();
        let cfg = OracleConfig::default();
        let z = oracle_flow(&sys, &cfg, &dvector![0.0, 1.0], 0.0, std::f64::consts::FRAC_PI_2)
            .unwrap();
        assert!((z[0] - 1.0).abs() < 1e-10 && z[1].abs() < 1e-10, "{z}");
    }

    #[test]
    fn fieldline_unperturbed_rotation() {
        let sys = make_builtin(BuiltinName::Fieldline, 0.0).unwrap();
        let cfg = OracleConfig::default();
        let z = oracle_flow(&sys, &cfg, &dvector![1.0, 0.0], 0.0, 3.0).unwrap();
        assert!((z[0] - 1.0f64.cos()).abs() < 1e-9, "{z}");
        assert!((z[1] + 1.0f64.sin()).abs() < 1e-9, "{z}");
    }

    #[test]
    fn zero_span_is_identity() {
        let sys = make_builtin(BuiltinName::Fieldline, 0.3).unwrap();
        let z0 = dvector![0.9, 0.2];
        let z = oracle_flow(&sys, &OracleConfig::default(), &z0, 1.5, 1.5).unwrap();
        assert_eq!(z, z0);
    }

    #[test]
    fn self_convergence_under_tolerance_halving() {
        let sys = make_builtin(BuiltinName::Fieldline, 0.05).unwrap();
        let z0 = dvector![1.2, 0.0];
        let loose = OracleConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            ..Default::default()
        };
        let tight = OracleConfig {
            abs_tol: 5e-11,
            rel_tol: 5e-11,
            ..Default::default()
        };
        let a = oracle_flow(&sys, &loose, &z0, 0.0, 6.0).unwrap();
        let b = oracle_flow(&sys, &tight, &z0, 0.0, 6.0).unwrap();
        assert!((a - b).norm() < 10.0 * 5e-11);
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let sys = make_builtin(BuiltinName::Fieldline, 0.0075).unwrap();
        let cfg = OracleConfig::default();
        let z0 = dvector![1.2, 0.0];
        let fwd = oracle_flow(&sys, &cfg, &z0, 0.0, 2.0 * std::f64::consts::PI).unwrap();
        let back = oracle_flow(&sys, &cfg, &fwd, 2.0 * std::f64::consts::PI, 0.0).unwrap();
        assert!((back - z0).norm() < 100.0 * cfg.abs_tol);
    }

    #[test]
    fn matches_rotor_exact_flow() {
        let eps = 0.1;
        let sys = make_builtin(BuiltinName::RotorOscillator, eps).unwrap();
        let z0 = dvector![1.0, 0.0];
        let got = oracle_flow(&sys, &OracleConfig::default(), &z0, 0.0, 1.0).unwrap();
        let want = rotor_exact_flow(&z0, 1.0, 0.0, eps);
        assert!((got - want).norm() < 1e-10);
    }
}

//! Built-in example systems with closed-form ingredients.

use nalgebra::{dvector, DMatrix, DVector};

use crate::error::{PviError, Result};
use crate::phase::SystemSpec;

/// Names of the built-in systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinName {
    /// Harmonic oscillator regarded as a perturbed rigid rotor:
    /// theta = y dx, H = y^2/2, h = x^2/2. The full dynamics is a harmonic
    /// oscillator of frequency sqrt(epsilon), with a known closed-form
    /// discrete Lagrangian.
    RotorOscillator,
    /// Magnetic field-line flow in a nominally axisymmetric geometry:
    /// theta = (x^2+y^2)(y dx - x dy), H = (2/9)(x^2+y^2)^3,
    /// h_t = x sin t + x^2 sin t, period 2 pi.
    Fieldline,
}

impl BuiltinName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rotor-oscillator" => Ok(BuiltinName::RotorOscillator),
            "fieldline" => Ok(BuiltinName::Fieldline),
            other => Err(PviError::UnknownSystem(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BuiltinName::RotorOscillator => "rotor-oscillator",
            BuiltinName::Fieldline => "fieldline",
        }
    }

    pub fn all() -> &'static [&'static str] {
        &["rotor-oscillator", "fieldline"]
    }
}

/// Construct a fully populated built-in system.
pub fn make_builtin(name: BuiltinName, epsilon: f64) -> Result<SystemSpec> {
    if epsilon < 0.0 {
        return Err(PviError::InvalidConfig(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    Ok(match name {
        BuiltinName::RotorOscillator => rotor(epsilon),
        BuiltinName::Fieldline => fieldline(epsilon),
    })
}

pub fn make_builtin_by_name(name: &str, epsilon: f64) -> Result<SystemSpec> {
    make_builtin(BuiltinName::parse(name)?, epsilon)
}

fn rotor(epsilon: f64) -> SystemSpec {
    SystemSpec::builder(
        2,
        epsilon,
        |z| dvector![z[1], 0.0],
        |z, _| z[1] * z[1] / 2.0,
        |z, _| z[0] * z[0] / 2.0,
        |z, t, s| dvector![z[0] + (t - s) * z[1], z[1]],
    )
    .theta_jac(|_| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]))
    .grad_hamiltonian(|z, _| dvector![0.0, z[1]])
    .grad_perturbation(|z, _| dvector![z[0], 0.0])
    .flow_jac(|_, t, s| DMatrix::from_row_slice(2, 2, &[1.0, t - s, 0.0, 1.0]))
    .pairing(|z1, z2| 0.5 * (z2[0] - z1[0]) * (z1[1] + z2[1]))
    .pairing_grads(|z1, z2| {
        (
            dvector![-0.5 * (z1[1] + z2[1]), 0.5 * (z2[0] - z1[0])],
            dvector![0.5 * (z1[1] + z2[1]), 0.5 * (z2[0] - z1[0])],
        )
    })
    .build()
}

fn fieldline(epsilon: f64) -> SystemSpec {
    SystemSpec::builder(
        2,
        epsilon,
        |z| {
            let r2 = z[0] * z[0] + z[1] * z[1];
            dvector![r2 * z[1], -r2 * z[0]]
        },
        |z, _| {
            let r2 = z[0] * z[0] + z[1] * z[1];
            2.0 / 9.0 * r2.powi(3)
        },
        |z, t| (z[0] + z[0] * z[0]) * t.sin(),
        |z, t, s| {
            let r2 = z[0] * z[0] + z[1] * z[1];
            let phi = r2 / 3.0 * (t - s);
            let (sin, cos) = phi.sin_cos();
            dvector![z[0] * cos + z[1] * sin, -z[0] * sin + z[1] * cos]
        },
    )
    .theta_jac(|z| {
        let (x, y) = (z[0], z[1]);
        // T[(i, j)] = d theta_j / d z_i with theta = (r^2 y, -r^2 x).
        DMatrix::from_row_slice(
            2,
            2,
            &[
                2.0 * x * y,
                -3.0 * x * x - y * y,
                x * x + 3.0 * y * y,
                -2.0 * x * y,
            ],
        )
    })
    .grad_hamiltonian(|z, _| {
        let r2 = z[0] * z[0] + z[1] * z[1];
        let c = 4.0 / 3.0 * r2 * r2;
        dvector![c * z[0], c * z[1]]
    })
    .grad_perturbation(|z, t| dvector![(1.0 + 2.0 * z[0]) * t.sin(), 0.0])
    .flow_jac(|z, t, s| {
        let (x, y) = (z[0], z[1]);
        let r2 = x * x + y * y;
        let phi = r2 / 3.0 * (t - s);
        let (sin, cos) = phi.sin_cos();
        let fx = x * cos + y * sin;
        let fy = -x * sin + y * cos;
        let c = 2.0 / 3.0 * (t - s);
        // d/dphi (fx, fy) = (fy, -fx); dphi/dz = (2/3)(t - s) z.
        DMatrix::from_row_slice(
            2,
            2,
            &[
                cos + fy * c * x,
                sin + fy * c * y,
                -sin - fx * c * x,
                cos - fx * c * y,
            ],
        )
    })
    .pairing(|z1, z2| {
        let (x1, y1, x2, y2) = (z1[0], z1[1], z2[0], z2[1]);
        (x2 * y1 - x1 * y2) / 3.0
            * (x1 * x1 + x1 * x2 + x2 * x2 + y1 * y1 + y1 * y2 + y2 * y2)
    })
    .pairing_grads(|z1, z2| {
        let (x1, y1, x2, y2) = (z1[0], z1[1], z2[0], z2[1]);
        let a = x2 * y1 - x1 * y2;
        let b = x1 * x1 + x1 * x2 + x2 * x2 + y1 * y1 + y1 * y2 + y2 * y2;
        (
            dvector![
                (-y2 * b + a * (2.0 * x1 + x2)) / 3.0,
                (x2 * b + a * (2.0 * y1 + y2)) / 3.0
            ],
            dvector![
                (y1 * b + a * (x1 + 2.0 * x2)) / 3.0,
                (-x1 * b + a * (y1 + 2.0 * y2)) / 3.0
            ],
        )
    })
    .build()
}

/// Exact flow of the full rotor-oscillator system (harmonic oscillator of
/// frequency sqrt(epsilon)).
pub fn rotor_exact_flow(z: &DVector<f64>, t: f64, s: f64, epsilon: f64) -> DVector<f64> {
    let w = epsilon.sqrt();
    if w == 0.0 {
        return dvector![z[0] + (t - s) * z[1], z[1]];
    }
    let (sin, cos) = (w * (t - s)).sin_cos();
    dvector![
        z[0] * cos + z[1] / w * sin,
        z[1] * cos - w * z[0] * sin
    ]
}

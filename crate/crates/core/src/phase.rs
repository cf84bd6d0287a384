//! Phase-space chart, one-form, Hamiltonian vector fields and the scalar
//! building blocks of the discrete Lagrangians.
//!
//! The chart is a single global R^n with the flat connection; geodesics are
//! straight segments, so the pairing function integrates the one-form along
//! the segment between two points.

use nalgebra::{DMatrix, DVector};

use crate::error::{PviError, Result};
use crate::fd;
use crate::quad::QuadratureRule;

/// A point of the chart together with its time tag.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub z: DVector<f64>,
    pub t: f64,
}

impl PhasePoint {
    pub fn new(z: DVector<f64>, t: f64) -> Self {
        PhasePoint { z, t }
    }
}

type CovectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type ScalarFieldFn = dyn Fn(&DVector<f64>, f64) -> f64 + Send + Sync;
type GradFieldFn = dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync;
type FlowFn = dyn Fn(&DVector<f64>, f64, f64) -> DVector<f64> + Send + Sync;
type PairingFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync;
type FlowJacFn = dyn Fn(&DVector<f64>, f64, f64) -> DMatrix<f64> + Send + Sync;
type PairingGradFn =
    dyn Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>) + Send + Sync;

/// A perturbed Hamiltonian system: one-form, unperturbed Hamiltonian and its
/// analytic flow, perturbation, and optional analytic derivatives.
///
/// Immutable after construction; all evaluation methods are pure.
pub struct SystemSpec {
    pub n: usize,
    pub epsilon: f64,
    theta: Box<CovectorFn>,
    theta_jac: Option<Box<MatrixFn>>,
    hamiltonian: Box<ScalarFieldFn>,
    perturbation: Box<ScalarFieldFn>,
    grad_hamiltonian: Option<Box<GradFieldFn>>,
    grad_perturbation: Option<Box<GradFieldFn>>,
    flow: Box<FlowFn>,
    flow_jac: Option<Box<FlowJacFn>>,
    pairing: Option<Box<PairingFn>>,
    pairing_grads: Option<Box<PairingGradFn>>,
}

/// Below this reciprocal condition number the form matrix is treated as
/// singular.
pub const RCOND_FLOOR: f64 = 1e-12;

pub struct SystemSpecBuilder {
    spec: SystemSpec,
}

impl SystemSpecBuilder {
    pub fn theta_jac(
        mut self,
        j: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.spec.theta_jac = Some(Box::new(j));
        self
    }

    pub fn grad_hamiltonian(
        mut self,
        g: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.spec.grad_hamiltonian = Some(Box::new(g));
        self
    }

    pub fn grad_perturbation(
        mut self,
        g: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.spec.grad_perturbation = Some(Box::new(g));
        self
    }

    pub fn pairing(
        mut self,
        f: impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.spec.pairing = Some(Box::new(f));
        self
    }

    /// Spatial Jacobian of the flow, J[(i, j)] = d F_i / d z_j.
    pub fn flow_jac(
        mut self,
        j: impl Fn(&DVector<f64>, f64, f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.spec.flow_jac = Some(Box::new(j));
        self
    }

    /// Closed-form slot gradients (D1 f, D2 f) of the pairing.
    pub fn pairing_grads(
        mut self,
        g: impl Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>)
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.spec.pairing_grads = Some(Box::new(g));
        self
    }

    pub fn build(self) -> SystemSpec {
        self.spec
    }
}

impl SystemSpec {
    /// Required ingredients: dimension, one-form, unperturbed Hamiltonian,
    /// perturbation, perturbation strength, and the analytic unperturbed
    /// flow F(z, t, s).
    pub fn builder(
        n: usize,
        epsilon: f64,
        theta: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        hamiltonian: impl Fn(&DVector<f64>, f64) -> f64 + Send + Sync + 'static,
        perturbation: impl Fn(&DVector<f64>, f64) -> f64 + Send + Sync + 'static,
        flow: impl Fn(&DVector<f64>, f64, f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> SystemSpecBuilder {
        assert!(n >= 2 && n % 2 == 0, "chart dimension must be even, >= 2");
        assert!(epsilon >= 0.0, "epsilon must be non-negative");
        SystemSpecBuilder {
            spec: SystemSpec {
                n,
                epsilon,
                theta: Box::new(theta),
                theta_jac: None,
                hamiltonian: Box::new(hamiltonian),
                perturbation: Box::new(perturbation),
                grad_hamiltonian: None,
                grad_perturbation: None,
                flow: Box::new(flow),
                flow_jac: None,
                pairing: None,
                pairing_grads: None,
            },
        }
    }

    pub fn theta(&self, z: &DVector<f64>) -> DVector<f64> {
        (self.theta)(z)
    }

    /// Jacobian T with T[(i, j)] = d theta_j / d z_i.
    pub fn theta_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        match &self.theta_jac {
            Some(j) => j(z),
            None => fd::jac_central(|w| (self.theta)(w), z).transpose(),
        }
    }

    pub fn hamiltonian(&self, z: &DVector<f64>, t: f64) -> f64 {
        (self.hamiltonian)(z, t)
    }

    pub fn perturbation(&self, z: &DVector<f64>, t: f64) -> f64 {
        (self.perturbation)(z, t)
    }

    /// Full Hamiltonian H_t + epsilon h_t.
    pub fn total_hamiltonian(&self, z: &DVector<f64>, t: f64) -> f64 {
        self.hamiltonian(z, t) + self.epsilon * self.perturbation(z, t)
    }

    pub fn grad_hamiltonian(&self, z: &DVector<f64>, t: f64) -> DVector<f64> {
        match &self.grad_hamiltonian {
            Some(g) => g(z, t),
            None => fd::grad_central(|w| (self.hamiltonian)(w, t), z),
        }
    }

    pub fn grad_perturbation(&self, z: &DVector<f64>, t: f64) -> DVector<f64> {
        match &self.grad_perturbation {
            Some(g) => g(z, t),
            None => fd::grad_central(|w| (self.perturbation)(w, t), z),
        }
    }

    /// Unperturbed flow F_{t,s}(z).
    pub fn flow(&self, z: &DVector<f64>, t: f64, s: f64) -> DVector<f64> {
        (self.flow)(z, t, s)
    }

    /// Spatial Jacobian of the flow, analytic when installed.
    pub fn flow_jacobian(&self, z: &DVector<f64>, t: f64, s: f64) -> DMatrix<f64> {
        match &self.flow_jac {
            Some(j) => j(z, t, s),
            None => fd::jac_central(|w| (self.flow)(w, t, s), z),
        }
    }

    pub fn has_closed_pairing(&self) -> bool {
        self.pairing.is_some()
    }

    /// Coordinate matrix of d(theta): Omega_ij = d theta_j/d z_i - d theta_i/d z_j.
    pub fn omega_matrix(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        if !z.iter().all(|v| v.is_finite()) {
            return Err(PviError::NonFinite("omega_matrix"));
        }
        let t = self.theta_jacobian(z);
        let omega = &t - t.transpose();
        let rcond = rcond(&omega);
        if rcond < RCOND_FLOOR {
            return Err(PviError::SingularForm {
                point: z.iter().copied().collect(),
                rcond,
            });
        }
        Ok(omega)
    }

    /// Hamiltonian vector field of an arbitrary gradient: solves
    /// X^i Omega_ij = -(grad g)_j, i.e. Omega X = grad g.
    pub fn vector_field_from_grad(
        &self,
        z: &DVector<f64>,
        grad_g: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let omega = self.omega_matrix(z)?;
        let lu = omega.lu();
        lu.solve(grad_g).ok_or_else(|| PviError::SingularForm {
            point: z.iter().copied().collect(),
            rcond: 0.0,
        })
    }

    /// X of the full Hamiltonian H_t + epsilon h_t.
    pub fn full_vector_field(&self, z: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let grad =
            self.grad_hamiltonian(z, t) + self.grad_perturbation(z, t) * self.epsilon;
        self.vector_field_from_grad(z, &grad)
    }

    /// X of the unperturbed Hamiltonian alone.
    pub fn unperturbed_vector_field(&self, z: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let grad = self.grad_hamiltonian(z, t);
        self.vector_field_from_grad(z, &grad)
    }

    /// Pairing function f(z1, z2): integral of theta along the straight
    /// segment from z1 to z2, or the installed closed form.
    pub fn pairing_f(
        &self,
        z1: &DVector<f64>,
        z2: &DVector<f64>,
        quad: &QuadratureRule,
    ) -> f64 {
        if let Some(p) = &self.pairing {
            return p(z1, z2);
        }
        self.pairing_quadrature(z1, z2, quad)
    }

    /// Quadrature pairing, always along the flat-chart segment (ignores any
    /// installed closed form; used to cross-check it).
    pub fn pairing_quadrature(
        &self,
        z1: &DVector<f64>,
        z2: &DVector<f64>,
        quad: &QuadratureRule,
    ) -> f64 {
        let dz = z2 - z1;
        quad.integrate(0.0, 1.0, |lambda| {
            let c = z1 + &dz * lambda;
            self.theta(&c).dot(&dz)
        })
    }

    /// Slot gradient of the pairing function (slot = 1 or 2). Uses the
    /// installed closed-form gradients, or differentiates under the
    /// segment integral via the theta Jacobian — no finite differencing
    /// of the pairing value itself, which would put noise under the outer
    /// Lagrangian stencils.
    pub fn pairing_slot_grad(
        &self,
        z1: &DVector<f64>,
        z2: &DVector<f64>,
        slot: usize,
        quad: &QuadratureRule,
    ) -> DVector<f64> {
        assert!(slot == 1 || slot == 2, "slot must be 1 or 2");
        if let Some(g) = &self.pairing_grads {
            let (d1, d2) = g(z1, z2);
            return if slot == 1 { d1 } else { d2 };
        }
        // d/dz1_j f = int [ (1-lambda) dz_k dtheta_k/dz_j (c) - theta_j(c) ]
        // d/dz2_j f = int [ lambda    dz_k dtheta_k/dz_j (c) + theta_j(c) ]
        let dz = z2 - z1;
        let mut grad = DVector::zeros(self.n);
        for (node, weight) in quad.nodes.iter().zip(&quad.weights) {
            let lambda = 0.5 * (node + 1.0);
            let c = z1 + &dz * lambda;
            let jac = self.theta_jacobian(&c);
            let th = self.theta(&c);
            let chain = jac * &dz;
            let term = if slot == 1 {
                chain * (1.0 - lambda) - th
            } else {
                chain * lambda + th
            };
            grad += term * (0.5 * weight);
        }
        grad
    }

    /// Scalar script-L at (z, s): theta(X_{H_s}) - H_s.
    pub fn script_l(&self, z: &DVector<f64>, s: f64) -> Result<f64> {
        let x = self.unperturbed_vector_field(z, s)?;
        Ok(self.theta(z).dot(&x) - self.hamiltonian(z, s))
    }

    /// Pulled-back perturbation K^u_s(z) = h_s(F(z, s, u)).
    pub fn k_pulled(&self, z: &DVector<f64>, s: f64, u: f64) -> f64 {
        self.perturbation(&self.flow(z, s, u), s)
    }

    /// Hamiltonian vector field of z -> K^u_s(z). The gradient goes through
    /// the chain rule DF^T grad h when a flow Jacobian is installed, and
    /// falls back to central differences of the composite map.
    pub fn x_k_pulled(&self, z: &DVector<f64>, s: f64, u: f64) -> Result<DVector<f64>> {
        let grad = match &self.flow_jac {
            Some(j) => {
                let w = self.flow(z, s, u);
                j(z, s, u).transpose() * self.grad_perturbation(&w, s)
            }
            None => fd::grad_central(|w| self.k_pulled(w, s, u), z),
        };
        self.vector_field_from_grad(z, &grad)
    }

    /// little-l^u_s(z) = theta(X_{K^u_s}) - K^u_s.
    pub fn little_l(&self, z: &DVector<f64>, s: f64, u: f64) -> Result<f64> {
        let x = self.x_k_pulled(z, s, u)?;
        Ok(self.theta(z).dot(&x) - self.k_pulled(z, s, u))
    }
}

/// Reciprocal condition number from explicit inversion; chart dimensions
/// here are small.
fn rcond(m: &DMatrix<f64>) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) => 1.0 / (m.norm() * inv.norm()),
        None => 0.0,
    }
}

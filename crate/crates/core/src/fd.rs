//! Finite-difference helpers shared across the crate.
//!
//! Step sizes follow the usual truncation/round-off balance: first
//! derivatives use h ~ eps^(1/3), second (nested) derivatives h ~ eps^(1/4),
//! both scaled by max(1, |z_i|). Slot gradients of discrete Lagrangians use
//! a five-point fourth-order stencil so that Newton residuals can resolve
//! O(eps^3) local errors.

use nalgebra::DVector;

/// Step for first-order central differences, eps^(1/3).
pub fn step_first() -> f64 {
    f64::EPSILON.powf(1.0 / 3.0)
}

/// Step for nested (second-derivative) central differences, eps^(1/4).
pub fn step_second() -> f64 {
    f64::EPSILON.powf(1.0 / 4.0)
}

/// Step for the five-point fourth-order stencil, eps^(1/5).
pub fn step_fourth_order() -> f64 {
    f64::EPSILON.powf(1.0 / 5.0)
}

/// Step for the seven-point sixth-order stencil. The extra factor of two
/// keeps truncation below round-off for flow composites, whose high-order
/// derivatives grow like powers of the rotation rate.
pub fn step_sixth_order() -> f64 {
    f64::EPSILON.powf(1.0 / 7.0) / 2.0
}

fn scaled(h: f64, x: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Central-difference gradient of a scalar field.
pub fn grad_central<F: FnMut(&DVector<f64>) -> f64>(mut f: F, z: &DVector<f64>) -> DVector<f64> {
    let h0 = step_first();
    let mut g = DVector::zeros(z.len());
    let mut zp = z.clone();
    for i in 0..z.len() {
        let h = scaled(h0, z[i]);
        zp[i] = z[i] + h;
        let fp = f(&zp);
        zp[i] = z[i] - h;
        let fm = f(&zp);
        zp[i] = z[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference gradient with a caller-chosen base step.
pub fn grad_central_with_step<F: FnMut(&DVector<f64>) -> f64>(
    mut f: F,
    z: &DVector<f64>,
    h0: f64,
) -> DVector<f64> {
    let mut g = DVector::zeros(z.len());
    let mut zp = z.clone();
    for i in 0..z.len() {
        let h = scaled(h0, z[i]);
        zp[i] = z[i] + h;
        let fp = f(&zp);
        zp[i] = z[i] - h;
        let fm = f(&zp);
        zp[i] = z[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Five-point fourth-order gradient, (-f2 + 8f1 - 8fm1 + fm2) / 12h.
pub fn grad_central4<F: FnMut(&DVector<f64>) -> f64>(mut f: F, z: &DVector<f64>) -> DVector<f64> {
    let h0 = step_fourth_order();
    let mut g = DVector::zeros(z.len());
    let mut zp = z.clone();
    for i in 0..z.len() {
        let h = scaled(h0, z[i]);
        let mut sample = |x: f64| {
            zp[i] = x;
            let v = f(&zp);
            v
        };
        let f2 = sample(z[i] + 2.0 * h);
        let f1 = sample(z[i] + h);
        let fm1 = sample(z[i] - h);
        let fm2 = sample(z[i] - 2.0 * h);
        zp[i] = z[i];
        g[i] = (-f2 + 8.0 * f1 - 8.0 * fm1 + fm2) / (12.0 * h);
    }
    g
}

/// Seven-point sixth-order gradient,
/// (-fm3 + 9 fm2 - 45 fm1 + 45 f1 - 9 f2 + f3) / 60h.
pub fn grad_central6<F: FnMut(&DVector<f64>) -> f64>(mut f: F, z: &DVector<f64>) -> DVector<f64> {
    let h0 = step_sixth_order();
    let mut g = DVector::zeros(z.len());
    let mut zp = z.clone();
    for i in 0..z.len() {
        let h = scaled(h0, z[i]);
        let mut sample = |x: f64| {
            zp[i] = x;
            f(&zp)
        };
        let f3 = sample(z[i] + 3.0 * h);
        let f2 = sample(z[i] + 2.0 * h);
        let f1 = sample(z[i] + h);
        let fm1 = sample(z[i] - h);
        let fm2 = sample(z[i] - 2.0 * h);
        let fm3 = sample(z[i] - 3.0 * h);
        zp[i] = z[i];
        g[i] = (-fm3 + 9.0 * fm2 - 45.0 * fm1 + 45.0 * f1 - 9.0 * f2 + f3) / (60.0 * h);
    }
    g
}

/// Central-difference Jacobian of a vector field, J[(i, j)] = d f_i / d z_j.
pub fn jac_central<F: FnMut(&DVector<f64>) -> DVector<f64>>(
    mut f: F,
    z: &DVector<f64>,
) -> nalgebra::DMatrix<f64> {
    let h0 = step_first();
    let m = f(z).len();
    let mut jac = nalgebra::DMatrix::zeros(m, z.len());
    let mut zp = z.clone();
    for j in 0..z.len() {
        let h = scaled(h0, z[j]);
        zp[j] = z[j] + h;
        let fp = f(&zp);
        zp[j] = z[j] - h;
        let fm = f(&zp);
        zp[j] = z[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Directional derivative of a scalar field along `v`, via central
/// differences in the unit direction. Returns 0 for a zero direction.
pub fn directional<F: FnMut(&DVector<f64>) -> f64>(
    mut f: F,
    z: &DVector<f64>,
    v: &DVector<f64>,
    h0: f64,
) -> f64 {
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let unit = v / norm;
    let h = h0 * z.norm().max(1.0);
    let zp = z + &unit * h;
    let zm = z - &unit * h;
    norm * (f(&zp) - f(&zm)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn gradient_of_quadratic() {
        let f = |z: &DVector<f64>| z[0] * z[0] + 3.0 * z[0] * z[1];
        let z = dvector![1.5, -0.5];
        let g = grad_central(f, &z);
        assert!((g[0] - (2.0 * 1.5 - 1.5)).abs() < 1e-9);
        assert!((g[1] - 4.5).abs() < 1e-9);
        let g4 = grad_central4(f, &z);
        assert!((g4[0] - 1.5).abs() < 1e-11);
    }

    #[test]
    fn directional_matches_gradient_dot() {
        let f = |z: &DVector<f64>| (z[0] * z[1]).sin();
        let z = dvector![0.7, 1.3];
        let v = dvector![0.4, -2.0];
        let d = directional(f, &z, &v, step_second());
        let g = grad_central(f, &z);
        assert!((d - g.dot(&v)).abs() < 1e-7);
    }

    #[test]
    fn richardson_consistency_first_order() {
        // Halving the base step must not move a smooth gradient by more
        // than the stated cross-validation tolerance.
        let f = |z: &DVector<f64>| (z[0].powi(3) + z[1]).exp().ln_1p();
        let z = dvector![0.3, 0.9];
        let g1 = grad_central_with_step(f, &z, step_first());
        let g2 = grad_central_with_step(f, &z, step_first() / 2.0);
        assert!((&g1 - &g2).norm() / g1.norm() < 1e-6);
    }
}

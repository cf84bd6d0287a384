//! Gauss-Legendre quadrature on [-1, 1].

/// Nodes and weights of an n-point Gauss-Legendre rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Build an n-point rule (n >= 2). Roots of P_n found by Newton
    /// iteration from the Chebyshev-like initial guess.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 2, "quadrature rule needs at least 2 points");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and P_n'(x).
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        QuadratureRule { nodes, weights }
    }

    /// Integrate f over [a, b] with a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Integrate g over the triangle {a <= s <= b, lo(s) <= u <= hi(s)} by
    /// collapsing the inner interval onto [0, 1] and applying the tensor
    /// product of this rule with itself.
    pub fn integrate_triangle<F, L, H>(&self, a: f64, b: f64, lo: L, hi: H, mut g: F) -> f64
    where
        F: FnMut(f64, f64) -> f64,
        L: Fn(f64) -> f64,
        H: Fn(f64) -> f64,
    {
        self.integrate(a, b, |s| {
            let (l, h) = (lo(s), hi(s));
            self.integrate(0.0, 1.0, |u| g(s, l + u * (h - l))) * (h - l)
        })
    }

    /// Tensor-product integral over the rectangle [a, b] x [c, d].
    pub fn integrate_rect<F: FnMut(f64, f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        mut g: F,
    ) -> f64 {
        let inner: Vec<(f64, f64)> = {
            let half = 0.5 * (d - c);
            let mid = 0.5 * (c + d);
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| (mid + half * x, w * half))
                .collect()
        };
        self.integrate(a, b, |s| inner.iter().map(|&(u, w)| w * g(s, u)).sum())
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        // 8 points per panel drive quadrature error far below the
        // epsilon-truncation error under study.
        QuadratureRule::gauss_legendre(8)
    }
}

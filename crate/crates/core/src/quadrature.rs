//! Gauss-Legendre rules and a substitution rule for integrands with
//! algebraic singularities at both ends of the interval.

use std::sync::OnceLock;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on P_n from the Chebyshev-like initial guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 64-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(64))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(c + r * x))
            .sum();
        r * s
    }

    /// Mapped nodes and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + r * x, r * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Rule for `int_a^b f(s) ds` where `f` may blow up like `(s-a)^-alpha`
/// and `(b-s)^-beta` with `alpha, beta < 1`.
///
/// Each half is mapped by `s = a + (m-a) w^2` (resp. `s = b - (b-m) w^2`),
/// which cancels an inverse square root exactly, and the `w` range is split
/// into geometrically graded panels toward `w = 0`.
#[derive(Debug, Clone)]
pub struct SingularRule {
    base: GaussLegendre,
    /// Panel breakpoints in `w`, ascending from 0 to 1.
    breaks: Vec<f64>,
}

impl SingularRule {
    pub fn new(nodes_per_panel: usize, graded_panels: usize, ratio: f64) -> Self {
        assert!(ratio > 0.0 && ratio < 1.0);
        let mut breaks = vec![0.0];
        for k in (0..graded_panels).rev() {
            breaks.push(ratio.powi(k as i32 + 1));
        }
        breaks.push(1.0);
        Self {
            base: GaussLegendre::new(nodes_per_panel),
            breaks,
        }
    }

    /// One 64-node panel per half, no grading.
    pub fn plain() -> Self {
        Self::new(64, 0, 0.5)
    }

    pub fn n_nodes(&self) -> usize {
        2 * (self.breaks.len() - 1) * self.base.nodes.len()
    }

    /// Nodes for `[a, b]`; distances to both ends are exact, not `s - a`.
    pub fn nodes(&self, a: f64, b: f64) -> Vec<Node> {
        let m = 0.5 * (a + b);
        let (left, right) = (m - a, b - m);
        let mut out = Vec::with_capacity(self.n_nodes());
        for pair in self.breaks.windows(2) {
            for (w, wt) in self.base.mapped(pair[0], pair[1]) {
                let jac = 2.0 * w * wt;
                let d = left * w * w;
                out.push(Node {
                    s: a + d,
                    from_a: d,
                    from_b: (b - a) - d,
                    weight: left * jac,
                });
                let d = right * w * w;
                out.push(Node {
                    s: b - d,
                    from_a: (b - a) - d,
                    from_b: d,
                    weight: right * jac,
                });
            }
        }
        out
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes(a, b).into_iter().map(|n| n.weight * f(n.s)).sum()
    }

    /// Integrates `f(s - a, b - s)` with both gaps computed exactly.
    pub fn integrate_gaps(&self, a: f64, b: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes(a, b)
            .into_iter()
            .map(|n| n.weight * f(n.from_a, n.from_b))
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub s: f64,
    pub from_a: f64,
    pub from_b: f64,
    pub weight: f64,
}

impl Default for SingularRule {
    fn default() -> Self {
        Self::new(64, 8, 0.1)
    }
}

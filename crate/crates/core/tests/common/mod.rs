//! Quadrature truths for the gaussian generative model, computed without the
//! library's samplers or integrators.

#![allow(dead_code)]

pub mod props;

use std::f64::consts::{PI, SQRT_2};

use iqlearn::simgen::GenerativeConfig;
use iqlearn::Treatment;
use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::erf::erfc;

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn big_phi(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Nodes and weights of a Gauss rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Golub-Welsch: eigen-decomposition of the Jacobi matrix with the given
/// off-diagonal entries; `mass` is the integral of the weight function.
fn golub_welsch(offdiag: &[f64], mass: f64) -> Rule {
    let n = offdiag.len() + 1;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for (k, b) in offdiag.iter().enumerate() {
        j[(k, k + 1)] = *b;
        j[(k + 1, k)] = *b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Rule { nodes, weights }
}

/// Gauss-Legendre on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    let off: Vec<f64> = (1..n).map(|k| k as f64 / ((4 * k * k - 1) as f64).sqrt()).collect();
    golub_welsch(&off, 2.0)
}

/// Gauss-Hermite for `E f(Z)`, `Z ~ N(0, 1)`.
pub fn gauss_hermite(n: usize) -> Rule {
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    golub_welsch(&off, 1.0)
}

impl Rule {
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
        h * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
    }
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Exact laws of the gaussian variant: given `(x1, a1)`, `X2` is normal, so
/// `(m, c)` is bivariate normal and `pr(Y <= y)` under the optimal second
/// stage is a one-dimensional integral over `c`.
pub struct GaussTruth {
    pub cfg: GenerativeConfig,
    inner: Rule,
    outer: Rule,
}

const Z_RANGE: f64 = 10.0;

impl GaussTruth {
    pub fn new(cfg: &GenerativeConfig) -> Self {
        GaussTruth {
            cfg: cfg.clone(),
            inner: gauss_legendre(64),
            outer: gauss_hermite(80),
        }
    }

    fn eta(&self, x1: [f64; 2], a1: Treatment) -> f64 {
        let (g0, g1) = (self.cfg.gamma0, self.cfg.gamma1);
        let a = a1.value();
        let lin = (g0[0] + a * g1[0]) + (g0[1] + a * g1[1]) * x1[0] + (g0[2] + a * g1[2]) * x1[1];
        (0.5 * self.cfg.c * lin).exp()
    }

    /// `pr(Y <= y | x1, a1)` with `a2 = sgn(c)`.
    pub fn arm_cdf(&self, x1: [f64; 2], a1: Treatment, y: f64) -> f64 {
        let b = match a1 {
            Treatment::Plus => self.cfg.b_plus,
            Treatment::Minus => self.cfg.b_minus,
        };
        let mu = [b[0][0] * x1[0] + b[0][1] * x1[1], b[1][0] * x1[0] + b[1][1] * x1[1]];
        let eta = self.eta(x1, a1);
        let (bm, bc) = (self.cfg.beta20, self.cfg.beta21);
        let mu_m = bm[0] + bm[1] * mu[0] + bm[2] * mu[1];
        let mu_c = bc[0] + bc[1] * mu[0] + bc[2] * mu[1];
        let var_m = eta * eta * (bm[1] * bm[1] + bm[2] * bm[2]);
        let var_c = eta * eta * (bc[1] * bc[1] + bc[2] * bc[2]);
        let cov = eta * eta * (bm[1] * bc[1] + bm[2] * bc[2]);
        let sc = var_c.sqrt();
        let slope = cov / sc;
        let s = (1.0 + (var_m - cov * cov / var_c).max(0.0)).sqrt();
        let f = |z: f64| phi(z) * big_phi((y - mu_m - slope * z - (mu_c + sc * z).abs()) / s);
        let kink = (-mu_c / sc).clamp(-Z_RANGE, Z_RANGE);
        self.inner.integrate(-Z_RANGE, kink, f) + self.inner.integrate(kink, Z_RANGE, f)
    }

    pub fn optimal_action(&self, x1: [f64; 2], y: f64) -> Treatment {
        let (minus, plus) = (
            self.arm_cdf(x1, Treatment::Minus, y),
            self.arm_cdf(x1, Treatment::Plus, y),
        );
        Treatment::from_score(minus - plus)
    }

    fn over_x1(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        let rho = self.cfg.rho;
        let r = (1.0 - rho * rho).sqrt();
        let mut total = 0.0;
        for (z0, w0) in self.outer.nodes.iter().zip(&self.outer.weights) {
            for (z1, w1) in self.outer.nodes.iter().zip(&self.outer.weights) {
                total += w0 * w1 * f([1.0 + z0, 1.0 + rho * z0 + r * z1]);
            }
        }
        total
    }

    /// `E_{X1} min_{a1} pr(Y <= y | X1, a1)`.
    pub fn optimal_cdf(&self, y: f64) -> f64 {
        self.over_x1(|x1| {
            self.arm_cdf(x1, Treatment::Minus, y)
                .min(self.arm_cdf(x1, Treatment::Plus, y))
        })
    }

    /// Largest achievable `pr(Y > λ)`.
    pub fn optimal_value(&self, lambda: f64) -> f64 {
        1.0 - self.optimal_cdf(lambda)
    }

    /// Largest achievable `τ`-quantile.
    pub fn optimal_quantile(&self, tau: f64) -> f64 {
        let (mut lo, mut hi) = (-30.0, 30.0);
        while hi - lo > 1e-7 {
            let mid = 0.5 * (lo + hi);
            if self.optimal_cdf(mid) >= tau {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// `Σ d_j / J` and its standard error for paired per-replication differences.
pub fn paired(a: &[(usize, f64)], b: &[(usize, f64)]) -> (f64, f64, usize) {
    let diffs: Vec<f64> = a
        .iter()
        .filter_map(|(j, x)| b.iter().find(|(k, _)| k == j).map(|(_, y)| x - y))
        .collect();
    mean_se(&diffs)
}

pub fn mean_se(v: &[f64]) -> (f64, f64, usize) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt(), v.len())
}

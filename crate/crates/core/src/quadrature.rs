//! Gauss–Legendre rules, adaptive 1-D integration and polar grids for the
//! normalized area measure `dA = d²z/π`.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d.is_finite() {
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

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|t| mid + half * t).collect();
        let w = self.weights.iter().map(|w| half * w).collect();
        (x, w)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive integration by recursive bisection with a 20-point Gauss–Legendre
/// panel. Stops when the panel and its two halves agree to
/// `max(abs_tol, rel_tol * |estimate|)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let rule = GaussLegendre::new(20);
    let whole = rule.integrate(a, b, &f);
    adaptive_step(&rule, &f, a, b, whole, abs_tol, rel_tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: usize,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    let refined = left + right;
    let tol = abs_tol.max(rel_tol * refined.abs());
    if (refined - whole).abs() <= tol || depth >= 40 {
        return refined;
    }
    adaptive_step(rule, f, a, mid, left, 0.5 * abs_tol, rel_tol, depth + 1)
        + adaptive_step(rule, f, mid, b, right, 0.5 * abs_tol, rel_tol, depth + 1)
}

/// Polar product grid: Gauss–Legendre in the radius on `[r_inner, r_outer]`
/// and `n_theta` uniform angles, around `center`. The weights integrate
/// against `dA = d²z/π`, so `Σ w_a = r_outer² − r_inner²`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    center: Complex64,
    radii: Vec<f64>,
    radial_weights: Vec<f64>,
    n_theta: usize,
    r_inner: f64,
    r_outer: f64,
}

impl QuadratureGrid {
    pub fn disk(center: Complex64, radius: f64, n_radial: usize, n_theta: usize) -> Self {
        Self::annulus(center, 0.0, radius, n_radial, n_theta)
    }

    pub fn annulus(center: Complex64, r_inner: f64, r_outer: f64, n_radial: usize, n_theta: usize) -> Self {
        assert!(
            r_outer > r_inner && r_inner >= 0.0,
            "annulus radii must satisfy 0 <= inner < outer"
        );
        assert!(n_theta > 0);
        let (radii, w) = GaussLegendre::new(n_radial).on_interval(r_inner, r_outer);
        // ∫∫ f r dr dθ / π with the uniform angular rule 2π/N_θ.
        let radial_weights = radii.iter().zip(&w).map(|(r, w)| 2.0 * r * w).collect();
        Self {
            center,
            radii,
            radial_weights,
            n_theta,
            r_inner,
            r_outer,
        }
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Per-ring weight `W_r`; a node on ring `r` carries `W_r / n_theta`.
    pub fn ring_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_radial(&self) -> usize {
        self.radii.len()
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn outer_radius(&self) -> f64 {
        self.r_outer
    }

    pub fn inner_radius(&self) -> f64 {
        self.r_inner
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }

    /// Iterates over `(z_a, w_a)` in ring-major order.
    pub fn nodes(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        let nt = self.n_theta;
        self.radii.iter().zip(&self.radial_weights).flat_map(move |(&r, &wr)| {
            (0..nt).map(move |j| {
                let th = 2.0 * PI * j as f64 / nt as f64;
                (self.center + Complex64::from_polar(r, th), wr / nt as f64)
            })
        })
    }

    pub fn integrate<F: Fn(Complex64) -> f64>(&self, f: F) -> f64 {
        self.nodes().map(|(z, w)| w * f(z)).sum()
    }

    pub fn integrate_complex<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Complex64 {
        self.nodes().map(|(z, w)| f(z) * w).sum()
    }
}

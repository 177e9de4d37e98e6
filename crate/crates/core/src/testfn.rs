//! Smooth test functions `g: ℂ → ℝ` with closed-form gradients and classical
//! Laplacians.
//!
//! `laplacian_std` is the classical `∂²_x + ∂²_y`; the operator `Δ = ∂∂̄` used
//! elsewhere in the crate is one quarter of it.

use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

type ValueFn = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(Complex64) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Disk { center: Complex64, radius: f64 },
    Global,
}

impl Support {
    /// Smallest origin-centred annulus `[inner, outer]` containing the support.
    pub fn radial_extent(&self) -> Option<(f64, f64)> {
        match *self {
            Support::Disk { center, radius } => Some(((center.norm() - radius).max(0.0), center.norm() + radius)),
            Support::Global => None,
        }
    }

    fn union(self, other: Support) -> Support {
        match (self, other) {
            (Support::Disk { center: c1, radius: r1 }, Support::Disk { center: c2, radius: r2 }) => {
                // smallest disk around c1 covering both
                let radius = r1.max((c2 - c1).norm() + r2);
                Support::Disk { center: c1, radius }
            }
            _ => Support::Global,
        }
    }

    fn intersect(self, other: Support) -> Support {
        match (self, other) {
            (Support::Global, s) | (s, Support::Global) => s,
            (a @ Support::Disk { radius: r1, .. }, b @ Support::Disk { radius: r2, .. }) => {
                if r1 <= r2 {
                    a
                } else {
                    b
                }
            }
        }
    }
}

#[derive(Clone)]
pub struct TestFunction {
    value: ValueFn,
    gradient: GradFn,
    laplacian_std: ValueFn,
    support: Support,
    tag: String,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("tag", &self.tag)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn new<V, G, L>(tag: &str, support: Support, value: V, gradient: G, laplacian_std: L) -> Self
    where
        V: Fn(Complex64) -> f64 + Send + Sync + 'static,
        G: Fn(Complex64) -> [f64; 2] + Send + Sync + 'static,
        L: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            laplacian_std: Arc::new(laplacian_std),
            support,
            tag: tag.to_string(),
        }
    }

    /// `exp(1 − 1/(1 − |z−c|²/r²))` inside the disk, `0` outside.
    pub fn bump(center: Complex64, radius: f64) -> Self {
        assert!(radius > 0.0, "bump radius must be positive");
        let r2 = radius * radius;
        let inside = move |z: Complex64| {
            let s = (z - center).norm_sqr() / r2;
            if s < 1.0 {
                let u = 1.0 / (1.0 - s);
                Some((s, u, (1.0 - u).exp()))
            } else {
                None
            }
        };
        TestFunction::new(
            &format!("bump({},{},{})", center.re, center.im, radius),
            Support::Disk { center, radius },
            move |z| inside(z).map_or(0.0, |(_, _, g)| g),
            move |z| match inside(z) {
                Some((_, u, g)) => {
                    let d = z - center;
                    let f = -g * u * u * 2.0 / r2;
                    [f * d.re, f * d.im]
                }
                None => [0.0, 0.0],
            },
            move |z| match inside(z) {
                Some((s, u, g)) => 4.0 / r2 * g * ((u.powi(4) - 2.0 * u.powi(3)) * s - u * u),
                None => 0.0,
            },
        )
    }

    /// `Re z`.
    pub fn real_part() -> Self {
        TestFunction::new("re", Support::Global, |z| z.re, |_| [1.0, 0.0], |_| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        TestFunction::new(
            &format!("const({c})"),
            Support::Global,
            move |_| c,
            |_| [0.0, 0.0],
            |_| 0.0,
        )
    }

    pub fn zero() -> Self {
        TestFunction::new(
            "zero",
            Support::Disk {
                center: Complex64::new(0.0, 0.0),
                radius: 0.0,
            },
            |_| 0.0,
            |_| [0.0, 0.0],
            |_| 0.0,
        )
    }

    /// Radial smooth step: `1` for `|z| <= inner`, `0` for `|z| >= outer`.
    pub fn radial_cutoff(inner: f64, outer: f64) -> Self {
        assert!(outer > inner && inner >= 0.0);
        let w = outer - inner;
        let radial = move |r: f64| -> (f64, f64, f64) {
            let t = (r - inner) / w;
            let (s, ds, d2s) = smooth_step(t);
            (1.0 - s, -ds / w, -d2s / (w * w))
        };
        TestFunction::new(
            &format!("cutoff({inner},{outer})"),
            Support::Disk {
                center: Complex64::new(0.0, 0.0),
                radius: outer,
            },
            move |z| radial(z.norm()).0,
            move |z| {
                let r = z.norm();
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let d = radial(r).1 / r;
                [d * z.re, d * z.im]
            },
            move |z| {
                let r = z.norm();
                let (_, d1, d2) = radial(r);
                if r == 0.0 {
                    0.0
                } else {
                    d2 + d1 / r
                }
            },
        )
    }

    /// `Re z` near the closed unit disk, smoothly cut off beyond radius 3.
    pub fn real_part_cutoff() -> Self {
        Self::real_part()
            .product(&Self::radial_cutoff(3.0, 4.0))
            .with_tag("re_cutoff")
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tag = tag.to_string();
        self
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn value(&self, z: Complex64) -> f64 {
        (self.value)(z)
    }

    pub fn gradient(&self, z: Complex64) -> [f64; 2] {
        (self.gradient)(z)
    }

    pub fn laplacian_std(&self, z: Complex64) -> f64 {
        (self.laplacian_std)(z)
    }

    /// `Δg = ∂∂̄g`, one quarter of [`laplacian_std`](Self::laplacian_std).
    pub fn laplacian(&self, z: Complex64) -> f64 {
        0.25 * self.laplacian_std(z)
    }

    /// `∂̄g = (g_x + i g_y)/2`.
    pub fn dbar(&self, z: Complex64) -> Complex64 {
        let [gx, gy] = self.gradient(z);
        Complex64::new(0.5 * gx, 0.5 * gy)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let (v, g, l) = (self.value.clone(), self.gradient.clone(), self.laplacian_std.clone());
        TestFunction::new(
            &format!("{a}*{}", self.tag),
            self.support,
            move |z| a * v(z),
            move |z| {
                let [x, y] = g(z);
                [a * x, a * y]
            },
            move |z| a * l(z),
        )
    }

    pub fn add(&self, other: &TestFunction) -> Self {
        let (v1, g1, l1) = (self.value.clone(), self.gradient.clone(), self.laplacian_std.clone());
        let (v2, g2, l2) = (other.value.clone(), other.gradient.clone(), other.laplacian_std.clone());
        TestFunction::new(
            &format!("{}+{}", self.tag, other.tag),
            self.support.union(other.support),
            move |z| v1(z) + v2(z),
            move |z| {
                let (a, b) = (g1(z), g2(z));
                [a[0] + b[0], a[1] + b[1]]
            },
            move |z| l1(z) + l2(z),
        )
    }

    /// `g + c`.
    pub fn shifted(&self, c: f64) -> Self {
        self.add(&TestFunction::constant(c))
    }

    pub fn product(&self, other: &TestFunction) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let (a3, b3) = (self.clone(), other.clone());
        TestFunction::new(
            &format!("{}*{}", self.tag, other.tag),
            self.support.intersect(other.support),
            move |z| a.value(z) * b.value(z),
            move |z| {
                let (f, g) = (a2.value(z), b2.value(z));
                let (df, dg) = (a2.gradient(z), b2.gradient(z));
                [f * dg[0] + g * df[0], f * dg[1] + g * df[1]]
            },
            move |z| {
                let (f, g) = (a3.value(z), b3.value(z));
                let (df, dg) = (a3.gradient(z), b3.gradient(z));
                f * b3.laplacian_std(z) + g * a3.laplacian_std(z) + 2.0 * (df[0] * dg[0] + df[1] * dg[1])
            },
        )
    }

    /// Central-difference gradient, for consistency checks.
    pub fn gradient_fd(&self, z: Complex64, h: f64) -> [f64; 2] {
        let dx = Complex64::new(h, 0.0);
        let dy = Complex64::new(0.0, h);
        [
            (self.value(z + dx) - self.value(z - dx)) / (2.0 * h),
            (self.value(z + dy) - self.value(z - dy)) / (2.0 * h),
        ]
    }
}

// ψ(t) = e^{-1/t}: value, first and second derivative
fn psi(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let p = (-1.0 / t).exp();
    (p, p / (t * t), p * (1.0 / t.powi(4) - 2.0 / t.powi(3)))
}

// S(t) = ψ(t) / (ψ(t) + ψ(1−t)) with two derivatives
fn smooth_step(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, da, d2a) = psi(t);
    let (b, db1, d2b1) = psi(1.0 - t);
    let (db, d2b) = (-db1, d2b1);
    let d = a + b;
    let dd = da + db;
    let d2d = d2a + d2b;
    let s = a / d;
    let ds = (da * d - a * dd) / (d * d);
    // (a/d)'' = a''/d − 2a'd'/d² − a d''/d² + 2a d'²/d³
    let d2s = d2a / d - 2.0 * da * dd / (d * d) - a * d2d / (d * d) + 2.0 * a * dd * dd / (d * d * d);
    (s, ds, d2s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn laplacian_fd(g: &TestFunction, z: Complex64, h: f64) -> f64 {
        let dx = c(h, 0.0);
        let dy = c(0.0, h);
        (g.value(z + dx) + g.value(z - dx) + g.value(z + dy) + g.value(z - dy) - 4.0 * g.value(z)) / (h * h)
    }

    #[test]
    fn bump_values() {
        let g = TestFunction::bump(c(0.1, -0.2), 0.5);
        assert_abs_diff_eq!(g.value(c(0.1, -0.2)), 1.0);
        assert_eq!(g.value(c(0.6, -0.2)), 0.0);
        let near = c(0.1 + 0.4999, -0.2);
        assert!(g.value(near) < 1e-100);
        let [gx, gy] = g.gradient(near);
        assert!(gx.abs() < 1e-90 && gy.abs() < 1e-90);
    }

    #[test]
    fn smooth_step_is_monotone_and_flat() {
        let (s0, d0, _) = smooth_step(1e-3);
        assert!(s0 < 1e-100 && d0 < 1e-100);
        let (s, _, _) = smooth_step(0.5);
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-15);
        let mut prev = 0.0;
        for i in 1..100 {
            let v = smooth_step(i as f64 / 100.0).0;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn real_part_cutoff_equals_re_near_disk() {
        let f = TestFunction::real_part_cutoff();
        for &z in &[c(0.3, 0.1), c(-2.0, 1.0), c(0.0, 2.9)] {
            assert_abs_diff_eq!(f.value(z), z.re, epsilon = 1e-15);
            assert_abs_diff_eq!(f.laplacian_std(z), 0.0, epsilon = 1e-15);
        }
        assert_eq!(f.value(c(4.5, 0.0)), 0.0);
    }

    #[test]
    fn algebra_of_test_functions() {
        let f = TestFunction::bump(c(0.0, 0.0), 0.5);
        let g = TestFunction::bump(c(0.2, 0.1), 0.3);
        let z = c(0.15, 0.05);
        assert_abs_diff_eq!(f.add(&g).value(z), f.value(z) + g.value(z), epsilon = 1e-15);
        assert_abs_diff_eq!(f.scaled(2.0).value(z), 2.0 * f.value(z), epsilon = 1e-15);
        assert_abs_diff_eq!(f.shifted(1.5).value(z), f.value(z) + 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.product(&g).value(z), f.value(z) * g.value(z), epsilon = 1e-15);
        assert_eq!(f.shifted(1.0).support(), Support::Global);
    }

    fn family() -> Vec<TestFunction> {
        let b = TestFunction::bump(c(0.1, 0.05), 0.45);
        vec![
            b.clone(),
            TestFunction::bump(c(-0.2, 0.3), 0.3),
            TestFunction::radial_cutoff(0.5, 1.5),
            TestFunction::real_part_cutoff(),
            b.product(&TestFunction::real_part()),
            b.add(&TestFunction::bump(c(0.3, 0.0), 0.2)).scaled(-0.7),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn gradients_match_finite_differences(re in -1.8f64..1.8, im in -1.8f64..1.8) {
            let z = c(re, im);
            for g in family() {
                let exact = g.gradient(z);
                let fd = g.gradient_fd(z, 1e-6);
                for i in 0..2 {
                    let scale = exact[i].abs().max(1e-3);
                    prop_assert!((exact[i] - fd[i]).abs() <= 1e-6 * scale + 1e-9, "{}: {:?} vs {:?}", g.tag(), exact, fd);
                }
            }
        }

        #[test]
        fn laplacians_match_finite_differences(re in -1.8f64..1.8, im in -1.8f64..1.8) {
            let z = c(re, im);
            for g in family() {
                let exact = g.laplacian_std(z);
                let fd = laplacian_fd(&g, z, 1e-4);
                prop_assert!((exact - fd).abs() <= 1e-4 * exact.abs().max(1.0), "{}: {} vs {}", g.tag(), exact, fd);
            }
        }

        #[test]
        fn compact_support_is_respected(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let z = c(re, im);
            for g in family() {
                if let Support::Disk { center, radius } = g.support() {
                    if (z - center).norm() >= radius {
                        prop_assert_eq!(g.value(z), 0.0);
                    }
                }
            }
        }
    }
}

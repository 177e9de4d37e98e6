//! Exact composition combinatorics, the Gaussian pair integrals and the
//! trace-formula engine for the finite-n cumulants of a linear statistic.
//!
//! The cumulant of order `k` of `trace_n g` is
//!
//! ```text
//! C_k = Σ_j (−1)^{j−1}/j Σ_{k_1+…+k_j=k} k!/(k_1!⋯k_j!) tr(M_{g^{k_1}} K ⋯ M_{g^{k_j}} K)
//! ```
//!
//! and each trace is evaluated on compressed `n × n` matrices.

use crate::error::{Error, Result};
use crate::kernel::{NystromOperator, WeightedKernel};
use crate::quadrature::{GaussLegendre, QuadratureGrid};
use crate::testfn::{Support, TestFunction};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use std::f64::consts::PI;

pub const MAX_ORDER: usize = 6;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn factorial(k: usize) -> BigInt {
    (1..=k as u64).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn binomial(n: usize, k: usize) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Stirling number of the second kind by the alternating sum
/// `S(k,j) = (1/j!) Σ_r (−1)^r C(j,r) (j−r)^k`.
pub fn stirling2(k: usize, j: usize) -> BigRational {
    assert!(j <= k, "stirling2 needs j <= k");
    let mut acc = BigInt::zero();
    for r in 0..=j {
        let term = binomial(j, r) * BigInt::from(j - r).pow(k as u32);
        if r % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    BigRational::new(acc, factorial(j))
}

/// All compositions `(k_1, …, k_j)` of `k` with positive parts, ordered by
/// the number of parts and then lexicographically.
pub fn compositions(k: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for first in 1..=rest.saturating_sub(parts - 1) {
            cur.push(first);
            rec(rest - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for j in 1..=k {
        rec(k, j, &mut Vec::new(), &mut out);
    }
    out
}

/// One term of the composition expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionTerm {
    pub parts: Vec<usize>,
    /// `(−1)^{j−1}/j · k!/(k_1!⋯k_j!)`.
    pub coefficient: BigRational,
}

impl CompositionTerm {
    pub fn j(&self) -> usize {
        self.parts.len()
    }
}

pub fn composition_terms(k: usize) -> Vec<CompositionTerm> {
    let kf = factorial(k);
    compositions(k)
        .into_iter()
        .map(|parts| {
            let j = parts.len();
            let denom = parts.iter().fold(BigInt::one(), |acc, p| acc * factorial(*p));
            let sign = if j % 2 == 1 { 1 } else { -1 };
            let coefficient = BigRational::new(kf.clone(), denom) / int(j as i64) * int(sign);
            CompositionTerm { parts, coefficient }
        })
        .collect()
}

/// `Σ_j (−1)^{j−1}/j Σ 1/(k_1!⋯k_j!)`; zero for every `k >= 2`.
pub fn zero_sum_identity(k: usize) -> BigRational {
    let kf = BigRational::from_integer(factorial(k));
    composition_terms(k)
        .into_iter()
        .map(|t| t.coefficient / kf.clone())
        .sum()
}

/// `S_k = Σ_j (−1)^{j−1}/j Σ k!(Σ k_i(k_i−1))/(k_1!⋯k_j!)`.
pub fn s_k(k: usize) -> BigRational {
    composition_terms(k)
        .into_iter()
        .map(|t| {
            let w: usize = t.parts.iter().map(|p| p * (p - 1)).sum();
            t.coefficient * int(w as i64)
        })
        .sum()
}

/// `G_k(λ_1, …, λ_k)` with exact coefficients and floating function values.
pub fn g_k_eval(g: &TestFunction, points: &[Complex64]) -> f64 {
    let k = points.len();
    assert!(k >= 1);
    let values: Vec<f64> = points.iter().map(|z| g.value(*z)).collect();
    composition_terms(k)
        .iter()
        .map(|t| {
            let c = t.coefficient.to_f64().unwrap_or(f64::NAN);
            c * t
                .parts
                .iter()
                .zip(&values)
                .map(|(p, v)| v.powi(*p as i32))
                .product::<f64>()
        })
        .sum()
}

const FD_STEP: f64 = 1e-4;

// second difference of G_k along real direction (coord, axis) at the diagonal,
// with one Richardson step
fn second_partial(
    g: &TestFunction,
    lambda: Complex64,
    k: usize,
    i: usize,
    axis_i: usize,
    j: usize,
    axis_j: usize,
) -> f64 {
    let unit = |axis: usize| {
        if axis == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        }
    };
    let eval = |di: f64, dj: f64| {
        let mut pts = vec![lambda; k];
        pts[i] += unit(axis_i) * di;
        pts[j] += unit(axis_j) * dj;
        g_k_eval(g, &pts)
    };
    let stencil = |h: f64| {
        if i == j && axis_i == axis_j {
            let mut pts = vec![lambda; k];
            let base = g_k_eval(g, &pts);
            pts[i] += unit(axis_i) * h;
            let plus = g_k_eval(g, &pts);
            pts[i] -= unit(axis_i) * (2.0 * h);
            let minus = g_k_eval(g, &pts);
            (plus - 2.0 * base + minus) / (h * h)
        } else {
            (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h)
        }
    };
    let coarse = stencil(FD_STEP);
    let fine = stencil(0.5 * FD_STEP);
    (4.0 * fine - coarse) / 3.0
}

/// `Σ_i ∂_i G_k` and `Σ_i ∂̄_i G_k` at `λ1_k`, by central differences.
pub fn diagonal_first_derivatives(g: &TestFunction, lambda: Complex64, k: usize) -> (Complex64, Complex64) {
    let h = FD_STEP;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for i in 0..k {
        for (axis, acc) in [
            (Complex64::new(h, 0.0), &mut sum_x),
            (Complex64::new(0.0, h), &mut sum_y),
        ] {
            let mut p = vec![lambda; k];
            p[i] += axis;
            let plus = g_k_eval(g, &p);
            p[i] -= axis * 2.0;
            let minus = g_k_eval(g, &p);
            *acc += (plus - minus) / (2.0 * h);
        }
    }
    let d = Complex64::new(0.5 * sum_x, -0.5 * sum_y);
    (d, d.conj())
}

/// `(Δ_k G_k)(λ1_k)` with `Δ_k = Σ ∂_i∂̄_i`.
pub fn diagonal_laplacian(g: &TestFunction, lambda: Complex64, k: usize) -> f64 {
    (0..k)
        .map(|i| 0.25 * (second_partial(g, lambda, k, i, 0, i, 0) + second_partial(g, lambda, k, i, 1, i, 1)))
        .sum()
}

/// Diagonal Laplacian together with its predicted value: `|∇g|²/2` for
/// `k = 2`, zero for `k >= 3`.
pub fn diagonal_laplacian_check(g: &TestFunction, lambda: Complex64, k: usize) -> (f64, f64) {
    let predicted = if k == 2 {
        let [gx, gy] = g.gradient(lambda);
        0.5 * (gx * gx + gy * gy)
    } else {
        0.0
    };
    (diagonal_laplacian(g, lambda, k), predicted)
}

/// `Z_k(λ) = Σ_{i<j} (∂_i ∂̄_j G_k)(λ1_k)`.
pub fn z_k(g: &TestFunction, lambda: Complex64, k: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..k {
        for j in (i + 1)..k {
            let xx = second_partial(g, lambda, k, i, 0, j, 0);
            let yy = second_partial(g, lambda, k, i, 1, j, 1);
            let xy = second_partial(g, lambda, k, i, 0, j, 1);
            let yx = second_partial(g, lambda, k, i, 1, j, 0);
            acc += Complex64::new(xx + yy, xy - yx) * 0.25;
        }
    }
    acc
}

/// The Gaussian pair integrals over `ℂ²` against `e^{ξ₁ξ̄₂ − |ξ₁|² − |ξ₂|²} dA₂`
/// with weights `ξ₁ξ₂`, `ξ̄₁ξ̄₂`, `ξ₁ξ̄₂` and `ξ̄₁ξ₂`.
#[derive(Debug, Clone, Copy)]
pub struct PairIntegrals {
    pub j: Complex64,
    pub j_prime: Complex64,
    pub l_prime: Complex64,
    pub l_second: Complex64,
}

/// Polar × polar quadrature: 60 Gauss–Legendre radii on `[0, 9]` and 96
/// uniform angles per factor.
pub fn gaussian_pair_integrals() -> PairIntegrals {
    pair_integrals_with(60, 9.0, 96)
}

pub fn pair_integrals_with(n_radial: usize, r_max: f64, n_angle: usize) -> PairIntegrals {
    let (radii, rw) = GaussLegendre::new(n_radial).on_interval(0.0, r_max);
    let angles: Vec<Complex64> = (0..n_angle)
        .map(|a| Complex64::from_polar(1.0, 2.0 * PI * a as f64 / n_angle as f64))
        .collect();
    // dA = r dr dθ / π, uniform angle weight 2π/N
    let ang_w = 2.0 / n_angle as f64;
    let sums: Vec<[Complex64; 4]> = (0..n_radial)
        .into_par_iter()
        .map(|i| {
            let r = radii[i];
            let mut acc = [Complex64::new(0.0, 0.0); 4];
            for (rho, wrho) in radii.iter().zip(&rw) {
                let radial = rw[i] * r * wrho * rho * ang_w * ang_w * (-r * r - rho * rho).exp();
                for ea in &angles {
                    let x1 = ea * r;
                    for eb in &angles {
                        let x2 = eb * *rho;
                        let e = (x1 * x2.conj()).exp() * radial;
                        acc[0] += x1 * x2 * e;
                        acc[1] += x1.conj() * x2.conj() * e;
                        acc[2] += x1 * x2.conj() * e;
                        acc[3] += x1.conj() * x2 * e;
                    }
                }
            }
            acc
        })
        .collect();
    let mut tot = [Complex64::new(0.0, 0.0); 4];
    for s in &sums {
        for q in 0..4 {
            tot[q] += s[q];
        }
    }
    PairIntegrals {
        j: tot[0],
        j_prime: tot[1],
        l_prime: tot[2],
        l_second: tot[3],
    }
}

#[derive(Debug, Clone)]
pub struct CumulantOptions {
    pub max_order: usize,
    /// Lifts the order cap of 6.
    pub allow_high_order: bool,
    pub radial_nodes: usize,
    /// Angular nodes; `None` means `max(256, 4n)`.
    pub angular_nodes: Option<usize>,
}

impl Default for CumulantOptions {
    fn default() -> Self {
        Self {
            max_order: 4,
            allow_high_order: false,
            radial_nodes: 200,
            angular_nodes: None,
        }
    }
}

/// Exact finite-n cumulants `C_1, …, C_K` of `trace_n g` for the
/// determinantal process of `kernel`.
pub fn dpp_cumulants(kernel: &WeightedKernel, g: &TestFunction, opts: &CumulantOptions) -> Result<Vec<f64>> {
    let kmax = opts.max_order;
    if kmax == 0 {
        return Err(Error::Config("cumulant order must be >= 1".into()));
    }
    if kmax > MAX_ORDER && !opts.allow_high_order {
        return Err(Error::OrderCap(kmax));
    }
    let n = kernel.n();
    let full = NystromOperator::new(kernel, kernel.default_grid(None));
    let trace = full.trace();
    if (trace - n as f64).abs() > 1e-4 {
        return Err(Error::GridTooCoarse { trace, n });
    }
    let n_theta = opts.angular_nodes.unwrap_or((4 * n).max(256));
    let origin = Complex64::new(0.0, 0.0);
    let grid = match g.support() {
        Support::Disk { .. } => {
            let (inner, outer) = g.support().radial_extent().expect("disk support");
            let outer = outer.min(kernel.tail_radius().max(inner + 1e-9));
            if outer <= inner {
                return Ok(vec![0.0; kmax]);
            }
            QuadratureGrid::annulus(origin, inner, outer, opts.radial_nodes, n_theta)
        }
        Support::Global => QuadratureGrid::disk(origin, kernel.tail_radius(), opts.radial_nodes.max(400), n_theta),
    };
    let op = NystromOperator::new(kernel, grid);
    let mats: Vec<DMatrix<Complex64>> = (1..=kmax).map(|p| op.compress(|z| g.value(z).powi(p as i32))).collect();
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let terms = composition_terms(k);
        let traces: Vec<f64> = terms
            .par_iter()
            .map(|t| {
                let mut prod = mats[t.parts[0] - 1].clone();
                for p in &t.parts[1..] {
                    prod = &prod * &mats[p - 1];
                }
                prod.trace().re
            })
            .collect();
        let ck = terms
            .iter()
            .zip(&traces)
            .map(|(t, tr)| t.coefficient.to_f64().unwrap_or(f64::NAN) * tr)
            .sum();
        out.push(ck);
    }
    Ok(out)
}

pub fn dpp_cumulant(kernel: &WeightedKernel, g: &TestFunction, k: usize) -> Result<f64> {
    let opts = CumulantOptions {
        max_order: k,
        ..CumulantOptions::default()
    };
    Ok(dpp_cumulants(kernel, g, &opts)?[k - 1])
}

/// `true` if the value is exactly zero.
pub fn is_exact_zero(x: &BigRational) -> bool {
    x.is_zero()
}

/// Absolute value of an exact rational as `f64`.
pub fn abs_f64(x: &BigRational) -> f64 {
    x.abs().to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn stirling_recurrence(k: usize, j: usize) -> BigInt {
        let mut t = vec![vec![BigInt::zero(); k + 1]; k + 1];
        t[0][0] = BigInt::one();
        for a in 1..=k {
            for b in 1..=a {
                t[a][b] = BigInt::from(b) * &t[a - 1][b] + &t[a - 1][b - 1];
            }
        }
        t[k][j].clone()
    }

    // number of partitions of {0..k} into exactly j blocks, by restricted growth strings
    fn brute_force_partitions(k: usize, j: usize) -> usize {
        fn rec(pos: usize, k: usize, used: usize, j: usize) -> usize {
            if pos == k {
                return (used == j) as usize;
            }
            (0..=used.min(j - 1)).map(|b| rec(pos + 1, k, used.max(b + 1), j)).sum()
        }
        if j == 0 {
            return (k == 0) as usize;
        }
        rec(0, k, 0, j)
    }

    #[test]
    fn stirling_values_and_cross_checks() {
        assert_eq!(stirling2(4, 2), int(7));
        assert_eq!(stirling2(3, 3), int(1));
        for k in 1..=10 {
            assert_eq!(stirling2(k, 0), int(0));
        }
        for k in 0..=10 {
            for j in 0..=k {
                let s = stirling2(k, j);
                assert!(s.is_integer());
                assert_eq!(s.to_integer(), stirling_recurrence(k, j));
                if k <= 8 {
                    assert_eq!(s.to_integer(), BigInt::from(brute_force_partitions(k, j)));
                }
            }
        }
    }

    #[test]
    fn composition_sums_are_surjection_counts() {
        for k in 1..=8 {
            for j in 1..=k {
                let total: BigInt = compositions(k)
                    .into_iter()
                    .filter(|p| p.len() == j)
                    .map(|p| factorial(k) / p.iter().fold(BigInt::one(), |a, x| a * factorial(*x)))
                    .sum();
                let expected = (BigRational::from_integer(factorial(j)) * stirling2(k, j)).to_integer();
                assert_eq!(total, expected);
            }
            assert_eq!(compositions(k).len(), 1 << (k - 1));
        }
    }

    #[test]
    fn zero_sum_identity_values() {
        assert_eq!(zero_sum_identity(1), int(1));
        for k in 2..=10 {
            assert!(zero_sum_identity(k).is_zero(), "k = {k}");
        }
    }

    // k!·[t^k] t²(1 − (1 − e^t)^k), with exact power series
    fn s_k_generating(k: usize) -> BigRational {
        let len = k + 1;
        let mut one_minus_exp = vec![BigRational::zero(); len];
        let mut fact = BigInt::one();
        for (l, coeff) in one_minus_exp.iter_mut().enumerate().skip(1) {
            fact *= BigInt::from(l);
            *coeff = -BigRational::new(BigInt::one(), fact.clone());
        }
        let mul = |a: &[BigRational], b: &[BigRational]| {
            let mut out = vec![BigRational::zero(); len];
            for i in 0..len {
                for j in 0..len - i {
                    out[i + j] += &a[i] * &b[j];
                }
            }
            out
        };
        let mut pw = vec![BigRational::zero(); len];
        pw[0] = BigRational::one();
        for _ in 0..k {
            pw = mul(&pw, &one_minus_exp);
        }
        // coefficient of t^{k-2} in 1 − (1−e^t)^k
        let inner = if k >= 2 {
            let base = if k == 2 {
                BigRational::one()
            } else {
                BigRational::zero()
            };
            base - pw[k - 2].clone()
        } else {
            BigRational::zero()
        };
        inner * BigRational::from_integer(factorial(k))
    }

    #[test]
    fn s_k_values() {
        assert_eq!(s_k(2), int(2));
        for k in 3..=10 {
            assert!(s_k(k).is_zero(), "k = {k}");
        }
        for k in 2..=10 {
            assert_eq!(s_k(k), s_k_generating(k), "k = {k}");
        }
    }

    #[test]
    fn g2_closed_form() {
        let g = TestFunction::bump(c(0.0, 0.0), 0.5);
        for &(a, b) in &[(c(0.1, 0.2), c(-0.1, 0.05)), (c(0.3, 0.0), c(0.0, 0.3))] {
            let expected = g.value(a).powi(2) - g.value(a) * g.value(b);
            assert_abs_diff_eq!(g_k_eval(&g, &[a, b]), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn diagonal_laplacian_values() {
        let g = TestFunction::bump(c(0.0, 0.0), 0.5);
        let lambda = c(0.2, 0.0);
        let (v, p) = diagonal_laplacian_check(&g, lambda, 2);
        assert!((v - p).abs() <= 1e-5 * p.abs(), "{v} vs {p}");
        let (v3, p3) = diagonal_laplacian_check(&g, lambda, 3);
        assert_eq!(p3, 0.0);
        assert!(v3.abs() < 1e-6, "{v3}");
    }

    #[test]
    fn z2_is_minus_dbar_squared() {
        let g = TestFunction::bump(c(0.05, -0.1), 0.5);
        for &lambda in &[c(0.2, 0.0), c(-0.1, 0.15)] {
            let z2 = z_k(&g, lambda, 2);
            let expected = -g.dbar(lambda).norm_sqr();
            assert!(
                (z2.re - expected).abs() < 1e-6 * expected.abs().max(1e-3),
                "{z2} vs {expected}"
            );
            assert!(z2.im.abs() < 1e-6);
        }
        // k >= 3: real part vanishes
        let z3 = z_k(&g, c(0.2, 0.1), 3);
        assert!(z3.re.abs() < 1e-5, "{z3}");
    }

    #[test]
    fn pair_integrals_values() {
        let p = gaussian_pair_integrals();
        assert!(p.j.norm() < 1e-8, "{}", p.j);
        assert!(p.j_prime.norm() < 1e-8);
        assert!(p.l_prime.norm() < 1e-8);
        assert!((p.l_second - 1.0).norm() < 1e-8, "{}", p.l_second);
    }

    #[test]
    fn order_cap_is_enforced() {
        let k = WeightedKernel::radial(&Potential::ginibre(), 4.0, 4).unwrap();
        let g = TestFunction::bump(c(0.0, 0.0), 0.5);
        let opts = CumulantOptions {
            max_order: 7,
            ..CumulantOptions::default()
        };
        assert!(matches!(dpp_cumulants(&k, &g, &opts), Err(Error::OrderCap(7))));
    }

    #[test]
    fn first_cumulant_is_mean_trace() {
        let kern = WeightedKernel::radial(&Potential::ginibre(), 16.0, 16).unwrap();
        let g = TestFunction::bump(c(0.0, 0.0), 0.5);
        let c1 = dpp_cumulant(&kern, &g, 1).unwrap();
        // radial reduction: ∫ g R¹ dA = ∫ 2 r g(r) R¹(r) dr
        let rule = GaussLegendre::new(300);
        let direct = rule.integrate(0.0, 0.5, |r| {
            2.0 * r * g.value(c(r, 0.0)) * kern.one_point(c(r, 0.0)).unwrap()
        });
        assert_abs_diff_eq!(c1, direct, epsilon = 1e-8);
    }

    #[test]
    fn shift_and_homogeneity() {
        let kern = WeightedKernel::radial(&Potential::ginibre(), 12.0, 12).unwrap();
        let g = TestFunction::bump(c(0.1, 0.0), 0.4);
        let opts = CumulantOptions {
            max_order: 4,
            ..CumulantOptions::default()
        };
        let base = dpp_cumulants(&kern, &g, &opts).unwrap();
        let scaled = dpp_cumulants(&kern, &g.scaled(1.7), &opts).unwrap();
        for k in 0..4 {
            let expected = 1.7f64.powi(k as i32 + 1) * base[k];
            assert!(
                (scaled[k] - expected).abs() < 1e-10 * expected.abs().max(1e-3),
                "k = {}",
                k + 1
            );
        }
        let shifted = dpp_cumulants(&kern, &g.shifted(0.5), &opts).unwrap();
        assert_abs_diff_eq!(shifted[0], base[0] + 12.0 * 0.5, epsilon = 1e-8);
        for k in 1..4 {
            assert_abs_diff_eq!(shifted[k], base[k], epsilon = 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn g_k_vanishes_on_diagonal(k in 2usize..=6, re in -0.45f64..0.45, im in -0.45f64..0.45) {
            let g = TestFunction::bump(c(0.0, 0.0), 0.5);
            let lambda = c(re, im);
            prop_assert!(g_k_eval(&g, &vec![lambda; k]).abs() < 1e-12);
            let (d, db) = diagonal_first_derivatives(&g, lambda, k);
            prop_assert!(d.norm() < 1e-6 && db.norm() < 1e-6);
        }

        #[test]
        fn g2_symmetrization_is_a_square(ra in 0.0f64..0.6, ta in 0.0f64..6.3, rb in 0.0f64..0.6, tb in 0.0f64..6.3) {
            let g = TestFunction::bump(c(0.0, 0.0), 0.6);
            let (a, b) = (Complex64::from_polar(ra, ta), Complex64::from_polar(rb, tb));
            let s = g_k_eval(&g, &[a, b]) + g_k_eval(&g, &[b, a]);
            let d = g.value(a) - g.value(b);
            prop_assert!((s - d * d).abs() < 1e-14);
        }
    }
}

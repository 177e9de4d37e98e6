use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rnm_core::kernel::{gram_schmidt_basis, identity_deviation, NystromOperator, WeightedKernel};
use rnm_core::potential::{Droplet, Potential};
use rnm_core::quadrature::QuadratureGrid;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn reproducing_property_at_random_points() {
    let pot = Potential::radial_power(2).unwrap();
    let k = WeightedKernel::radial(&pot, 12.0, 12).unwrap();
    let grid = k.default_grid(None);
    let nodes: Vec<(Vec<Complex64>, f64)> = grid.nodes().map(|(w, wt)| (k.features(w), wt)).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..5 {
        let z = Complex64::from_polar(rng.random::<f64>() * 0.9, rng.random::<f64>() * 6.3);
        let fz = k.features(z);
        for j in [0usize, 5, 11] {
            let mut acc = c(0.0, 0.0);
            for (fw, wt) in &nodes {
                let kzw: Complex64 = fz.iter().zip(fw).map(|(a, b)| a * b.conj()).sum();
                acc += kzw * fw[j] * wt;
            }
            assert!((acc - fz[j]).norm() <= 1e-7, "j={j} z={z}: {}", (acc - fz[j]).norm());
        }
    }
}

#[test]
fn nystrom_matrix_is_a_projection() {
    let k = WeightedKernel::radial(&Potential::ginibre(), 6.0, 6).unwrap();
    let grid = QuadratureGrid::disk(c(0.0, 0.0), k.tail_radius(), 48, 24);
    let op = NystromOperator::new(&k, grid);
    let kt = op.dense_matrix();
    let sq = &kt * &kt;
    let dev = (&sq - &kt).iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!(dev <= 1e-6, "{dev}");
    assert_abs_diff_eq!(kt.trace().re, 6.0, epsilon = 1e-6);
    assert_abs_diff_eq!(op.trace(), 6.0, epsilon = 1e-6);
}

#[test]
fn gram_schmidt_agrees_with_radial_norms_for_power_potential() {
    let pot = Potential::radial_power(2).unwrap();
    let radial = WeightedKernel::radial(&pot, 10.0, 10).unwrap();
    let grid = radial.default_grid(None);
    let general = WeightedKernel::new(gram_schmidt_basis(&pot, 10.0, 10, &grid).unwrap(), pot.clone());
    for z in [c(0.0, 0.0), c(0.3, 0.4), c(-0.8, 0.2), c(1.1, -0.5)] {
        for w in [c(0.2, 0.0), c(-0.5, -0.6)] {
            let a = radial.eval(z, w);
            let b = general.eval(z, w);
            assert!((a - b).norm() <= 1e-8 * (1.0 + a.norm()), "{a} vs {b}");
        }
    }
    assert!(identity_deviation(&NystromOperator::new(&general, grid).gram()) < 1e-8);
}

#[test]
fn ginibre_offdiagonal_shape_is_gaussian() {
    let n = 64;
    let k = WeightedKernel::radial(&Potential::ginibre(), n as f64, n).unwrap();
    let z = c(0.1, -0.2);
    for h in [0.0, 0.05, 0.1, 0.2] {
        for t in [0.0, 1.0, 2.5] {
            let w = z + Complex64::from_polar(h, t);
            let modulus = k.eval(z, w).norm() / n as f64;
            let target = (-(n as f64) * h * h / 2.0).exp();
            assert!((modulus - target).abs() <= 1e-8, "h={h}: {modulus} vs {target}");
            // connected two-point function |K|² ≈ m²ΔQ² e^{−mΔQ|h|²}
            let r2c = k.eval(z, w).norm_sqr();
            let target2 = (n * n) as f64 * (-(n as f64) * h * h).exp();
            assert!((r2c - target2).abs() <= 1e-8 * (n * n) as f64);
        }
    }
}

#[test]
fn power_offdiagonal_shape_within_window() {
    let n = 64;
    let m = n as f64;
    let pot = Potential::radial_power(2).unwrap();
    let k = WeightedKernel::radial(&pot, m, n).unwrap();
    let z = c(0.5, 0.0);
    let lap = pot.laplacian(z);
    let window = m.ln() / m.sqrt();
    for i in 0..=8 {
        let h = window * i as f64 / 8.0;
        for t in [0.0, FRAC_PI_2, PI] {
            let w = z + Complex64::from_polar(h, t);
            let modulus = k.eval(z, w).norm() / (m * lap);
            let target = (-m * lap * h * h / 2.0).exp();
            assert!((modulus - target).abs() <= 0.1, "h={h} t={t}: {modulus} vs {target}");
        }
    }
}

#[test]
fn one_point_integrates_to_n() {
    for pot in [Potential::ginibre(), Potential::radial_power(3).unwrap()] {
        let k = WeightedKernel::radial(&pot, 20.0, 20).unwrap();
        let d = Droplet::compute(&pot, 1.0).unwrap();
        let total = k.default_grid(Some(&d)).integrate(|z| k.one_point(z).unwrap());
        assert_abs_diff_eq!(total, 20.0, epsilon = 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_is_hermitian(zr in 0.0f64..1.5, zt in 0.0f64..6.3, wr in 0.0f64..1.5, wt in 0.0f64..6.3) {
        let k = WeightedKernel::radial(&Potential::radial_power(2).unwrap(), 16.0, 16).unwrap();
        let z = Complex64::from_polar(zr, zt);
        let w = Complex64::from_polar(wr, wt);
        let a = k.eval(z, w);
        let b = k.eval(w, z).conj();
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        // Cauchy–Schwarz: |K(z,w)|² <= R¹(z) R¹(w)
        prop_assert!(a.norm_sqr() <= k.one_point(z).unwrap() * k.one_point(w).unwrap() * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn one_point_is_nonnegative_and_log_consistent(r in 0.0f64..3.0, t in 0.0f64..6.3) {
        let k = WeightedKernel::radial(&Potential::ginibre(), 32.0, 32).unwrap();
        let z = Complex64::from_polar(r, t);
        let v = k.one_point(z).unwrap();
        prop_assert!(v >= 0.0);
        if v > 1e-250 {
            prop_assert!((k.log_one_point(z) - v.ln()).abs() <= 1e-9);
        }
    }
}

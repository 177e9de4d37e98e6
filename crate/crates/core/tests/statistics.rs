use num_complex::Complex64;
use proptest::prelude::*;
use rnm_core::cumulants::dpp_cumulants;
use rnm_core::cumulants::CumulantOptions;
use rnm_core::htest::{covariance, SampleMoments};
use rnm_core::kernel::WeightedKernel;
use rnm_core::potential::{Droplet, Potential};
use rnm_core::sampler::{sample_dpp_many, sample_ginibre_many, PointConfiguration, SamplerConfig};
use rnm_core::statistics::{
    boundary_statistics, clt_report, covariance_check, fluct_value, fluct_values, predicted_variance, tilting_table,
    FluctuationContext,
};
use rnm_core::testfn::TestFunction;
use rnm_core::Error;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ginibre() -> (Potential, Droplet) {
    let p = Potential::ginibre();
    let d = Droplet::compute(&p, 1.0).unwrap();
    (p, d)
}

fn dpp_samples(n: usize, seed: u64, count: usize) -> Vec<PointConfiguration> {
    let k = WeightedKernel::radial(&Potential::ginibre(), n as f64, n).unwrap();
    sample_dpp_many(&k, &SamplerConfig::with_seed(seed), count).unwrap()
}

#[test]
fn fluctuations_are_order_one_and_gaussian() {
    let (_, d) = ginibre();
    let g = TestFunction::bump(c(0.0, 0.0), 0.5);
    let v16 = fluct_values(&dpp_samples(16, 21, 1000), &FluctuationContext::new(&g, &d, 16));
    let v64 = fluct_values(
        &sample_ginibre_many(64, 22, 2000).unwrap(),
        &FluctuationContext::new(&g, &d, 64),
    );
    let m16 = SampleMoments::new(&v16);
    let m64 = SampleMoments::new(&v64);
    let ratio = m64.variance / m16.variance;
    assert!((1.0 / 1.5..=1.5).contains(&ratio), "variance ratio {ratio}");
    // 1% critical value of χ²(2)
    assert!(m64.jarque_bera() < 9.2103, "JB {}", m64.jarque_bera());
}

#[test]
fn empirical_variance_matches_exact_finite_n_variance() {
    let (_, d) = ginibre();
    let g = TestFunction::bump(c(0.0, 0.0), 0.5);
    let k = WeightedKernel::radial(&Potential::ginibre(), 16.0, 16).unwrap();
    let exact = dpp_cumulants(&k, &g, &CumulantOptions::default()).unwrap();
    let r = clt_report(&dpp_samples(16, 23, 4000), &g, &d).unwrap();
    assert!(
        (r.variance - exact[1]).abs() <= 3.0 * r.mcse_variance,
        "{} vs {}",
        r.variance,
        exact[1]
    );
    assert!(r.mean_ok());
}

#[test]
fn disjoint_bumps_are_uncorrelated() {
    let (_, d) = ginibre();
    let f = TestFunction::bump(c(-0.4, 0.0), 0.3);
    let g = TestFunction::bump(c(0.4, 0.0), 0.3);
    let samples = dpp_samples(16, 24, 2000);
    let chk = covariance_check(&samples, &f, &g, &d).unwrap();
    assert_eq!(chk.predicted, 0.0);
    assert!(chk.within(4.0), "{chk:?}");
}

#[test]
fn empirical_covariance_is_bilinear_and_symmetric() {
    let (_, d) = ginibre();
    let f = TestFunction::bump(c(0.0, 0.0), 0.5);
    let g = TestFunction::bump(c(0.2, 0.2), 0.4);
    let samples = dpp_samples(12, 25, 200);
    let xf = fluct_values(&samples, &FluctuationContext::new(&f, &d, 12));
    let xg = fluct_values(&samples, &FluctuationContext::new(&g, &d, 12));
    let xh = fluct_values(&samples, &FluctuationContext::new(&f.scaled(3.0).add(&g), &d, 12));
    let cfg = covariance(&xf, &xg).covariance;
    assert!((cfg - covariance(&xg, &xf).covariance).abs() < 1e-14);
    let lhs = covariance(&xh, &xg).covariance;
    let rhs = 3.0 * cfg + covariance(&xg, &xg).covariance;
    assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
}

#[test]
fn tilting_slope_tracks_finite_n_variance() {
    let (_, d) = ginibre();
    let g = TestFunction::bump(c(0.0, 0.0), 0.5);
    let k = WeightedKernel::radial(&Potential::ginibre(), 16.0, 16).unwrap();
    let exact = dpp_cumulants(&k, &g, &CumulantOptions::default()).unwrap();
    let values = fluct_values(&dpp_samples(16, 26, 8000), &FluctuationContext::new(&g, &d, 16));
    let lambdas: Vec<f64> = (-4..=4).map(|i| 0.125 * i as f64).collect();
    let t = tilting_table(&values, &lambdas, 0.0, predicted_variance(&g).unwrap());
    assert!(
        (t.slope - exact[1]).abs() <= 0.15 * exact[1],
        "slope {} vs C2 {}",
        t.slope,
        exact[1]
    );
    assert!(t.rows.iter().all(|r| r.warning.is_none()));
    assert!((t.predicted_slope - 0.5).abs() < 1e-8);
}

#[test]
fn tilting_warns_on_small_effective_sample() {
    let values: Vec<f64> = (0..200).map(|i| (i as f64 / 20.0).powi(2)).collect();
    let t = tilting_table(&values, &[10.0], 0.0, 0.5);
    assert!(t.rows[0].warning.is_some());
}

#[test]
fn bulk_support_and_family_errors() {
    let (_, d) = ginibre();
    let samples = dpp_samples(8, 27, 10);
    let edge = TestFunction::bump(c(0.7, 0.0), 0.3);
    assert!(matches!(
        clt_report(&samples, &edge, &d),
        Err(Error::NotBulkSupported(_))
    ));
    let d2 = Droplet::compute(&Potential::radial_power(2).unwrap(), 1.0).unwrap();
    assert!(matches!(
        boundary_statistics(&TestFunction::real_part(), &d2),
        Err(Error::UnsupportedPotential(_))
    ));
}

#[test]
fn hele_shaw_mean_for_radial_statistic() {
    // Σ|λ|² − n/2 has mean exactly 1/2 at every n
    let (_, d) = ginibre();
    let f = TestFunction::new(
        "abs2",
        rnm_core::testfn::Support::Global,
        |z| z.norm_sqr(),
        |z| [2.0 * z.re, 2.0 * z.im],
        |_| 4.0,
    );
    let p = boundary_statistics(&f, &d).unwrap();
    assert!((p.e_f - 0.5).abs() < 1e-12);
    let m = SampleMoments::new(&fluct_values(
        &dpp_samples(16, 28, 2000),
        &FluctuationContext::new(&f, &d, 16),
    ));
    assert!(
        (m.mean - p.e_f).abs() <= 4.0 * m.mcse_mean,
        "{} ± {}",
        m.mean,
        m.mcse_mean
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fluctuation_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..500) {
        let (_, d) = ginibre();
        let s = &dpp_samples(10, seed, 1)[0];
        let f = TestFunction::bump(c(0.1, 0.0), 0.4);
        let g = TestFunction::bump(c(-0.2, 0.3), 0.3);
        let lhs = fluct_value(s, &f.scaled(a).add(&g.scaled(b)), &d);
        let rhs = a * fluct_value(s, &f, &d) + b * fluct_value(s, &g, &d);
        prop_assert!((lhs - rhs).abs() <= 1e-8);
    }
}

//! Sample moments with Monte Carlo standard errors, and the classical
//! goodness-of-fit tests used by the checks: two-sample Kolmogorov–Smirnov,
//! binned χ², Jarque–Bera.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Moments of a sample with their Monte Carlo standard errors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased variance.
    pub variance: f64,
    /// `m3 / m2^{3/2}`.
    pub skewness: f64,
    /// `m4 / m2² − 3`.
    pub excess_kurtosis: f64,
    pub mcse_mean: f64,
    pub mcse_variance: f64,
    pub se_skewness: f64,
    pub se_kurtosis: f64,
}

impl SampleMoments {
    pub fn new(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 4, "need at least four samples");
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        let variance = m2 * nf / (nf - 1.0);
        let se_skewness = (6.0 * nf * (nf - 1.0) / ((nf - 2.0) * (nf + 1.0) * (nf + 3.0))).sqrt();
        let se_kurtosis = (4.0 * (nf * nf - 1.0) * se_skewness * se_skewness / ((nf - 3.0) * (nf + 5.0))).sqrt();
        Self {
            n,
            mean,
            variance,
            skewness: if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 },
            excess_kurtosis: if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 },
            mcse_mean: (variance / nf).sqrt(),
            mcse_variance: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
            se_skewness,
            se_kurtosis,
        }
    }

    /// Jarque–Bera statistic `N/6 (S² + K²/4)`.
    pub fn jarque_bera(&self) -> f64 {
        self.n as f64 / 6.0 * (self.skewness.powi(2) + 0.25 * self.excess_kurtosis.powi(2))
    }

    /// Upper-tail probability of the Jarque–Bera statistic under `χ²(2)`.
    pub fn jarque_bera_p_value(&self) -> f64 {
        (-0.5 * self.jarque_bera()).exp()
    }
}

/// Sample covariance with a Monte Carlo standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleCovariance {
    pub covariance: f64,
    pub mcse: f64,
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> SampleCovariance {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let covariance = prods.iter().sum::<f64>() / (n - 1.0);
    let pm = prods.iter().sum::<f64>() / n;
    let pv = prods.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (n - 1.0);
    SampleCovariance {
        covariance,
        mcse: (pv / n).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

/// Asymptotic Kolmogorov tail `Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the Stephens small-sample
/// correction of the asymptotic tail.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestOutcome {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n1, n2) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = x[i].min(y[j]);
        while i < n1 && x[i] <= v {
            i += 1;
        }
        while j < n2 && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sq = ne.sqrt();
    TestOutcome {
        statistic: d,
        p_value: kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d),
    }
}

/// Binned χ² goodness of fit. Adjacent bins are merged until every expected
/// count is at least 5; `expected_probs` need not sum to one (the remainder is
/// treated as an overflow bin with zero observations).
pub fn chi_square_gof(observed: &[usize], expected_probs: &[f64]) -> TestOutcome {
    assert_eq!(observed.len(), expected_probs.len());
    let total: usize = observed.iter().sum();
    let tf = total as f64;
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, p) in observed.iter().zip(expected_probs) {
        o_acc += *o as f64;
        e_acc += p * tf;
        if e_acc >= 5.0 {
            merged.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => merged.push((o_acc, e_acc)),
        }
    }
    let stat: f64 = merged.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = merged.len().saturating_sub(1).max(1) as f64;
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    TestOutcome {
        statistic: stat,
        p_value: 1.0 - dist.cdf(stat),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn moments_of_known_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = SampleMoments::new(&xs);
        assert_abs_diff_eq!(m.mean, 3.0);
        assert_abs_diff_eq!(m.variance, 2.5);
        assert_abs_diff_eq!(m.skewness, 0.0);
        // m4/m2² − 3 = 6.8/4 − 3
        assert_abs_diff_eq!(m.excess_kurtosis, -1.3, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_sample_passes_jarque_bera() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..4000).map(|_| rng.sample(StandardNormal)).collect();
        let m = SampleMoments::new(&xs);
        assert!(m.jarque_bera_p_value() > 0.01);
        assert!(m.mean.abs() < 3.0 * m.mcse_mean);
        assert!((m.variance - 1.0).abs() < 3.0 * m.mcse_variance);
        let ex: Vec<f64> = (0..4000).map(|_| -(rng.random::<f64>()).ln()).collect();
        assert!(SampleMoments::new(&ex).jarque_bera_p_value() < 1e-6);
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &b).passes(0.01));
        assert!(!ks_two_sample(&a, &c).passes(0.01));
        assert_abs_diff_eq!(ks_two_sample(&a, &a).statistic, 0.0);
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098
        assert_abs_diff_eq!(kolmogorov_tail(1.36), 0.0494, epsilon = 5e-4);
        assert_abs_diff_eq!(kolmogorov_tail(1.63), 0.0098, epsilon = 3e-4);
    }

    #[test]
    fn chi_square_uniform_bins() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut counts = vec![0usize; 10];
        for _ in 0..5000 {
            counts[(rng.random::<f64>() * 10.0) as usize] += 1;
        }
        let probs = vec![0.1; 10];
        assert!(chi_square_gof(&counts, &probs).passes(0.01));
        let skewed: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 50.0).collect();
        assert!(!chi_square_gof(&counts, &skewed).passes(0.01));
    }

    #[test]
    fn covariance_is_bilinear_and_symmetric() {
        let xs = [0.3, -1.2, 2.0, 0.7, 0.1];
        let ys = [1.0, 0.4, -0.3, 2.2, -1.0];
        let c = covariance(&xs, &ys).covariance;
        assert_abs_diff_eq!(c, covariance(&ys, &xs).covariance, epsilon = 1e-15);
        let x2: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        assert_abs_diff_eq!(covariance(&x2, &ys).covariance, 2.0 * c, epsilon = 1e-14);
        let v = SampleMoments::new(&xs).variance;
        assert_abs_diff_eq!(covariance(&xs, &xs).covariance, v, epsilon = 1e-14);
    }
}

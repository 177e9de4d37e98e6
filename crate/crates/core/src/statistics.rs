//! Linear statistics `trace_n g = Σ g(λ_j)` and their fluctuations
//! `fluct_n g = trace_n g − n ∫ g dσ_τ`, with the Gaussian-limit predictions
//! `e_g = ∫ g dν`, `v_g² = ¼ ∫ |∇g|² dA`, covariance and tilting checks, and
//! the boundary (Hele–Shaw) predictions for globally supported statistics.

use crate::error::{Error, Result};
use crate::htest::{covariance, SampleCovariance, SampleMoments};
use crate::potential::Droplet;
use crate::quadrature::QuadratureGrid;
use crate::sampler::PointConfiguration;
use crate::testfn::{Support, TestFunction};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;

fn origin() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `true` if the support of `g` lies in `|z| <= 0.9 R` and avoids the zeros of
/// `ΔQ`.
pub fn check_bulk_support(g: &TestFunction, droplet: &Droplet) -> Result<()> {
    match g.support() {
        Support::Global => Err(Error::NotBulkSupported(format!("{} has global support", g.tag()))),
        Support::Disk { center, radius } => {
            let limit = 0.9 * droplet.radius();
            if center.norm() + radius > limit {
                return Err(Error::NotBulkSupported(format!(
                    "support |c| + r = {:.4} exceeds 0.9 R = {limit:.4}",
                    center.norm() + radius
                )));
            }
            if droplet.potential().laplacian(origin()) <= 0.0 && center.norm() < radius {
                return Err(Error::NotBulkSupported(
                    "support contains the origin, where the Laplacian of Q vanishes".into(),
                ));
            }
            Ok(())
        }
    }
}

/// The fixed droplet grid used for `∫ g dσ_τ` and `∫ g dν`; being
/// independent of `g`, it keeps the mean term exactly linear in `g`.
pub fn droplet_grid(droplet: &Droplet) -> QuadratureGrid {
    droplet.grid(400, 512)
}

/// `∫ g dσ_τ`.
pub fn equilibrium_integral(g: &TestFunction, droplet: &Droplet) -> f64 {
    droplet_grid(droplet).integrate(|z| g.value(z) * droplet.equilibrium_density(z))
}

/// `e_g = ∫ g dν` with `dν = ½ Δ log ΔQ 1_S dA`.
pub fn predicted_mean(g: &TestFunction, droplet: &Droplet) -> f64 {
    droplet_grid(droplet).integrate(|z| g.value(z) * droplet.nu_density(z))
}

/// `v_g² = ¼ ∫ |∇g|² dA` for compactly supported `g`.
pub fn predicted_variance(g: &TestFunction) -> Result<f64> {
    match g.support() {
        Support::Disk { center, radius } => {
            if radius == 0.0 {
                return Ok(0.0);
            }
            let grid = QuadratureGrid::disk(center, radius, 200, 128);
            Ok(0.25 * grid.integrate(|z| grad_sq(g, z)))
        }
        Support::Global => Err(Error::NotBulkSupported(format!(
            "{} has global support; use the boundary predictions",
            g.tag()
        ))),
    }
}

/// `¼ ∫ ∇f·∇g dA`.
pub fn predicted_covariance(f: &TestFunction, g: &TestFunction) -> Result<f64> {
    let both = match (f.support(), g.support()) {
        (Support::Disk { center: c1, radius: r1 }, Support::Disk { center: c2, radius: r2 }) => {
            if (c1 - c2).norm() >= r1 + r2 {
                return Ok(0.0);
            }
            let radius = r1.max((c2 - c1).norm() + r2);
            QuadratureGrid::disk(c1, radius, 300, 192)
        }
        _ => return Err(Error::NotBulkSupported("covariance needs compact supports".into())),
    };
    Ok(0.25
        * both.integrate(|z| {
            let (a, b) = (f.gradient(z), g.gradient(z));
            a[0] * b[0] + a[1] * b[1]
        }))
}

fn grad_sq(g: &TestFunction, z: Complex64) -> f64 {
    let [x, y] = g.gradient(z);
    x * x + y * y
}

/// `n ∫ g dσ_τ`, computed once per `(g, droplet, n)`.
#[derive(Debug, Clone)]
pub struct FluctuationContext {
    g: TestFunction,
    mean_term: f64,
}

impl FluctuationContext {
    pub fn new(g: &TestFunction, droplet: &Droplet, n: usize) -> Self {
        Self {
            g: g.clone(),
            mean_term: n as f64 * equilibrium_integral(g, droplet),
        }
    }

    pub fn mean_term(&self) -> f64 {
        self.mean_term
    }

    pub fn test_function(&self) -> &TestFunction {
        &self.g
    }

    /// `Σ g(λ_j) − n ∫ g dσ_τ`.
    pub fn fluct(&self, points: &[Complex64]) -> f64 {
        points.iter().map(|z| self.g.value(*z)).sum::<f64>() - self.mean_term
    }
}

pub fn fluct_value(cfg: &PointConfiguration, g: &TestFunction, droplet: &Droplet) -> f64 {
    FluctuationContext::new(g, droplet, cfg.len()).fluct(&cfg.points)
}

pub fn fluct_values(samples: &[PointConfiguration], ctx: &FluctuationContext) -> Vec<f64> {
    samples.iter().map(|c| ctx.fluct(&c.points)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FluctuationReport {
    pub n_samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub mcse_mean: f64,
    pub mcse_variance: f64,
    pub se_skewness: f64,
    pub se_kurtosis: f64,
    pub jarque_bera: f64,
    pub jarque_bera_p_value: f64,
}

impl FluctuationReport {
    pub fn from_values(values: &[f64], predicted_mean: f64, predicted_variance: f64) -> Self {
        let m = SampleMoments::new(values);
        Self {
            n_samples: m.n,
            mean: m.mean,
            variance: m.variance,
            skewness: m.skewness,
            excess_kurtosis: m.excess_kurtosis,
            predicted_mean,
            predicted_variance,
            mcse_mean: m.mcse_mean,
            mcse_variance: m.mcse_variance,
            se_skewness: m.se_skewness,
            se_kurtosis: m.se_kurtosis,
            jarque_bera: m.jarque_bera(),
            jarque_bera_p_value: m.jarque_bera_p_value(),
        }
    }

    pub fn mean_ok(&self) -> bool {
        (self.mean - self.predicted_mean).abs() <= 3.0 * self.mcse_mean
    }

    /// `|var − v²| <= max(3 MCSE, rel · v²)`.
    pub fn variance_ok(&self, rel: f64) -> bool {
        (self.variance - self.predicted_variance).abs() <= (3.0 * self.mcse_variance).max(rel * self.predicted_variance)
    }

    pub fn skewness_ok(&self) -> bool {
        self.skewness.abs() <= 3.0 * self.se_skewness
    }

    pub fn kurtosis_ok(&self) -> bool {
        self.excess_kurtosis.abs() <= 3.0 * self.se_kurtosis
    }
}

/// Fluctuation report for a bulk-supported statistic.
pub fn clt_report(samples: &[PointConfiguration], g: &TestFunction, droplet: &Droplet) -> Result<FluctuationReport> {
    check_bulk_support(g, droplet)?;
    let n = samples.first().map(|c| c.len()).unwrap_or(0);
    let ctx = FluctuationContext::new(g, droplet, n);
    let values = fluct_values(samples, &ctx);
    Ok(FluctuationReport::from_values(
        &values,
        predicted_mean(g, droplet),
        predicted_variance(g)?,
    ))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CovarianceCheck {
    pub empirical: f64,
    pub predicted: f64,
    pub mcse: f64,
}

impl CovarianceCheck {
    pub fn within(&self, k: f64) -> bool {
        (self.empirical - self.predicted).abs() <= k * self.mcse
    }
}

/// Empirical covariance of `fluct f` and `fluct g` against `¼ ∫ ∇f·∇g dA`.
pub fn covariance_check(
    samples: &[PointConfiguration],
    f: &TestFunction,
    g: &TestFunction,
    droplet: &Droplet,
) -> Result<CovarianceCheck> {
    check_bulk_support(f, droplet)?;
    check_bulk_support(g, droplet)?;
    let n = samples.first().map(|c| c.len()).unwrap_or(0);
    let xf = fluct_values(samples, &FluctuationContext::new(f, droplet, n));
    let xg = fluct_values(samples, &FluctuationContext::new(g, droplet, n));
    let SampleCovariance { covariance, mcse } = covariance(&xf, &xg);
    Ok(CovarianceCheck {
        empirical: covariance,
        predicted: predicted_covariance(f, g)?,
        mcse,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltRow {
    pub lambda: f64,
    /// Reweighted mean `F'(λ)`.
    pub f_prime: f64,
    /// Reweighted variance `F''(λ)`.
    pub f_second: f64,
    pub predicted: f64,
    pub ess: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltTable {
    pub rows: Vec<TiltRow>,
    /// Least-squares slope of `F'` against `λ`.
    pub slope: f64,
    pub intercept: f64,
    pub predicted_slope: f64,
    pub predicted_intercept: f64,
}

/// Exponential tilting: for each `λ`, reweights the fluctuation sample by
/// `e^{λx}` to estimate `F'(λ)` and `F''(λ)` of `F(λ) = log E e^{λ fluct}`,
/// and compares with the affine law `e_g + λ v_g²`.
pub fn tilting_table(values: &[f64], lambdas: &[f64], e_g: f64, v2: f64) -> TiltTable {
    let n = values.len() as f64;
    let rows: Vec<TiltRow> = lambdas
        .iter()
        .map(|&lambda| {
            let mx = values.iter().map(|x| lambda * x).fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = values.iter().map(|x| (lambda * x - mx).exp()).collect();
            let sw: f64 = w.iter().sum();
            let sw2: f64 = w.iter().map(|x| x * x).sum();
            let mean = w.iter().zip(values).map(|(w, x)| w * x).sum::<f64>() / sw;
            let var = w.iter().zip(values).map(|(w, x)| w * (x - mean).powi(2)).sum::<f64>() / sw;
            let ess = sw * sw / sw2;
            let warning =
                (ess < 0.05 * n).then(|| format!("effective sample size {ess:.0} below 5% of {n}; enlarge the sample"));
            TiltRow {
                lambda,
                f_prime: mean,
                f_second: var,
                predicted: e_g + lambda * v2,
                ess,
                warning,
            }
        })
        .collect();
    let k = rows.len() as f64;
    let mx = rows.iter().map(|r| r.lambda).sum::<f64>() / k;
    let my = rows.iter().map(|r| r.f_prime).sum::<f64>() / k;
    let sxy: f64 = rows.iter().map(|r| (r.lambda - mx) * (r.f_prime - my)).sum();
    let sxx: f64 = rows.iter().map(|r| (r.lambda - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    TiltTable {
        intercept: my - slope * mx,
        slope,
        rows,
        predicted_slope: v2,
        predicted_intercept: e_g,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryPrediction {
    pub e_f: f64,
    pub v_f2: f64,
    /// `∫_S |∇f|² dA`.
    pub interior_energy: f64,
    /// `∫_{ℂ∖S} |∇f^{∂S}|² dA`.
    pub exterior_energy: f64,
}

/// Number of boundary nodes for the Fourier analysis of `f|∂S`.
pub const BOUNDARY_NODES: usize = 512;

/// Hele–Shaw predictions `e_f = ¼ ∫_{∂S} ∂_n f ds` (ds = arclength/2π) and
/// `v_f² = ¼ (∫_S |∇f|² + ∫_{ℂ∖S} |∇ f^{∂S}|²) dA`, where `f^{∂S}` is the
/// bounded harmonic extension of `f|∂S` to the exterior.
pub fn boundary_statistics(f: &TestFunction, droplet: &Droplet) -> Result<BoundaryPrediction> {
    if !droplet.potential().is_hele_shaw() {
        return Err(Error::UnsupportedPotential(format!(
            "boundary predictions need constant Laplacian near the droplet; {} is not Hele-Shaw",
            droplet.potential().tag()
        )));
    }
    let r = droplet.radius();
    let nt = BOUNDARY_NODES;
    let mut buf: Vec<Complex64> = (0..nt)
        .map(|j| Complex64::new(f.value(Complex64::from_polar(r, 2.0 * PI * j as f64 / nt as f64)), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(nt).process(&mut buf);
    // c_k = (1/N) Σ f e^{-ikθ}; exterior energy 2 Σ |k| |c_k|²
    let mut exterior = 0.0;
    for (idx, c) in buf.iter().enumerate() {
        let k = if idx <= nt / 2 { idx as f64 } else { (nt - idx) as f64 };
        exterior += 2.0 * k * (c / nt as f64).norm_sqr();
    }
    let interior = droplet.grid(200, 256).integrate(|z| grad_sq(f, z));
    let flux: f64 = (0..nt)
        .map(|j| {
            let u = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / nt as f64);
            let [gx, gy] = f.gradient(u * r);
            gx * u.re + gy * u.im
        })
        .sum::<f64>()
        / nt as f64;
    Ok(BoundaryPrediction {
        e_f: 0.25 * flux * r,
        v_f2: 0.25 * (interior + exterior),
        interior_energy: interior,
        exterior_energy: exterior,
    })
}

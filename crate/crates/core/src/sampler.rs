//! Eigenvalue configurations drawn by three independent routes: exact
//! sequential sampling of the projection process, eigenvalues of a Ginibre
//! matrix, and a Metropolis–Hastings chain on the Coulomb-gas density
//! `|V_n(λ)|² e^{-m Σ Q(λ_j)}`.

use crate::error::{Error, Result};
use crate::kernel::WeightedKernel;
use crate::potential::{Droplet, Potential};
use crate::quadrature::QuadratureGrid;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Independent random stream for chain `chain_index` of a run seeded by
/// `master_seed`: `ChaCha20Rng::seed_from_u64(master_seed)` moved to stream
/// `chain_index`.
pub fn rng_stream(master_seed: u64, chain_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(chain_index);
    rng
}

/// Runs `count` independent jobs, job `i` on stream `i`, and returns the
/// results in index order regardless of scheduling.
pub fn run_streams<T, F>(master_seed: u64, first_stream: u64, count: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha20Rng) -> Result<T> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let idx = first_stream + i as u64;
            let mut rng = rng_stream(master_seed, idx);
            job(idx, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Dpp,
    Matrix,
    Mcmc,
}

impl SamplerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerKind::Dpp => "dpp",
            SamplerKind::Matrix => "matrix",
            SamplerKind::Mcmc => "mcmc",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub master_seed: u64,
    pub burn_in_sweeps: usize,
    pub thin_stride: usize,
    pub proposal_scale: f64,
    pub rejection_envelope_margin: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            burn_in_sweeps: 2000,
            thin_stride: 20,
            proposal_scale: 1.0,
            rejection_envelope_margin: 1.2,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            master_seed: seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin_stride < 1 {
            return Err(Error::Config("thin stride must be >= 1".into()));
        }
        if !(self.proposal_scale > 0.0) {
            return Err(Error::Config("proposal scale must be positive".into()));
        }
        if !(self.rejection_envelope_margin >= 1.0) {
            return Err(Error::Config("envelope margin must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigMeta {
    pub potential: String,
    pub m: f64,
    pub n: usize,
    pub sampler: SamplerKind,
    pub master_seed: u64,
    pub chain_index: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// One sampled configuration of `n` points.
#[derive(Debug, Clone)]
pub struct PointConfiguration {
    pub points: Vec<Complex64>,
    pub meta: ConfigMeta,
}

impl PointConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.points.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Σ f(λ_j)`.
    pub fn trace<F: Fn(Complex64) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|z| f(*z)).sum()
    }

    /// Adds a warning if some point lies beyond `2R`.
    fn soft_radius_check(&mut self, droplet_radius: f64) {
        let mx = self.max_modulus();
        if mx > 2.0 * droplet_radius {
            self.meta.warnings.push(format!(
                "max |lambda| = {mx:.4} exceeds twice the droplet radius {droplet_radius:.4}"
            ));
        }
    }
}

fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    let t = 2.0 * PI * rng.random::<f64>();
    Complex64::from_polar(r, t)
}

/// Exact sampler for the determinantal projection process of a kernel.
///
/// Step `i` draws from `p_i(z) = ‖P_i^⊥ u(z)‖² / (n − i)`, where `P_i^⊥`
/// removes the span of the features of the points already drawn, by rejection
/// from the uniform law on `|z| <= r_cut`.
#[derive(Debug, Clone)]
pub struct DppSampler<'a> {
    kernel: &'a WeightedKernel,
    r_cut: f64,
    max_r1: f64,
    margin: f64,
    droplet_radius: f64,
}

const MAX_RESTARTS: usize = 10;

impl<'a> DppSampler<'a> {
    pub fn new(kernel: &'a WeightedKernel, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let r_cut = kernel.tail_radius();
        let n = kernel.n();
        let grid = QuadratureGrid::disk(Complex64::new(0.0, 0.0), r_cut, 200, (4 * n).max(128));
        let max_r1 = kernel.max_one_point(&grid);
        let tau = n as f64 / kernel.m();
        let droplet_radius = Droplet::compute(kernel.potential(), tau)
            .map(|d| d.radius())
            .unwrap_or(r_cut);
        Ok(Self {
            kernel,
            r_cut,
            max_r1,
            margin: cfg.rejection_envelope_margin,
            droplet_radius,
        })
    }

    pub fn envelope_base(&self) -> f64 {
        self.max_r1
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        master_seed: u64,
        chain_index: u64,
    ) -> Result<PointConfiguration> {
        let mut envelope_scale = self.margin;
        let mut restarts = 0usize;
        loop {
            match self.attempt(rng, envelope_scale) {
                Ok(points) => {
                    let mut cfg = PointConfiguration {
                        points,
                        meta: ConfigMeta {
                            potential: self.kernel.potential().tag(),
                            m: self.kernel.m(),
                            n: self.kernel.n(),
                            sampler: SamplerKind::Dpp,
                            master_seed,
                            chain_index,
                            acceptance_rate: None,
                            envelope_restarts: Some(restarts),
                            warnings: Vec::new(),
                        },
                    };
                    cfg.soft_radius_check(self.droplet_radius);
                    return Ok(cfg);
                }
                Err(observed) => {
                    restarts += 1;
                    if restarts > MAX_RESTARTS {
                        return Err(Error::EnvelopeExhausted(restarts - 1));
                    }
                    envelope_scale = (observed / self.max_r1).max(envelope_scale) * self.margin;
                }
            }
        }
    }

    // Err carries the density (times n − i) that broke the envelope
    fn attempt<R: Rng + ?Sized>(&self, rng: &mut R, envelope_scale: f64) -> std::result::Result<Vec<Complex64>, f64> {
        let n = self.kernel.n();
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        let mut points = Vec::with_capacity(n);
        // p_i(z) (n − i) <= R¹(z) <= max R¹, and the uniform law has density 1/r_cut²
        let bound = envelope_scale * self.max_r1;
        for _ in 0..n {
            loop {
                let z = uniform_in_disk(rng, self.r_cut);
                let mut v = self.kernel.features(z);
                for e in &basis {
                    let c: Complex64 = e.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (x, y) in v.iter_mut().zip(e) {
                        *x -= c * y;
                    }
                }
                let resid: f64 = v.iter().map(|x| x.norm_sqr()).sum();
                if resid > bound {
                    return Err(resid);
                }
                if rng.random::<f64>() * bound < resid {
                    let nrm = resid.sqrt();
                    basis.push(v.into_iter().map(|x| x / nrm).collect());
                    points.push(z);
                    break;
                }
            }
        }
        Ok(points)
    }
}

/// One-shot DPP sample on stream `chain_index`.
pub fn sample_dpp(kernel: &WeightedKernel, cfg: &SamplerConfig, chain_index: u64) -> Result<PointConfiguration> {
    let sampler = DppSampler::new(kernel, cfg)?;
    let mut rng = rng_stream(cfg.master_seed, chain_index);
    sampler.sample(&mut rng, cfg.master_seed, chain_index)
}

/// `count` DPP samples on streams `0..count`.
pub fn sample_dpp_many(kernel: &WeightedKernel, cfg: &SamplerConfig, count: usize) -> Result<Vec<PointConfiguration>> {
    let sampler = DppSampler::new(kernel, cfg)?;
    run_streams(cfg.master_seed, 0, count, |idx, rng| {
        sampler.sample(rng, cfg.master_seed, idx)
    })
}

/// Eigenvalues of an `n × n` matrix with independent entries
/// `(N(0,1) + i N(0,1)) / √(2n)`.
pub fn sample_ginibre_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let s = 1.0 / (2.0 * n as f64).sqrt();
    let mat = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    });
    let schur = nalgebra::Schur::try_new(mat, 1e-14, 10_000).ok_or(Error::EigenSolver(n))?;
    let ev = schur.eigenvalues().ok_or(Error::EigenSolver(n))?;
    Ok(ev.iter().cloned().collect())
}

pub fn sample_ginibre_many(n: usize, master_seed: u64, count: usize) -> Result<Vec<PointConfiguration>> {
    run_streams(master_seed, 0, count, |idx, rng| {
        let mut cfg = PointConfiguration {
            points: sample_ginibre_matrix(n, rng)?,
            meta: ConfigMeta {
                potential: "ginibre".into(),
                m: n as f64,
                n,
                sampler: SamplerKind::Matrix,
                master_seed,
                chain_index: idx,
                acceptance_rate: None,
                envelope_restarts: None,
                warnings: Vec::new(),
            },
        };
        cfg.soft_radius_check(1.0);
        Ok(cfg)
    })
}

/// Metropolis–Hastings chain for `|V_n|² e^{-m Σ Q}`.
///
/// A sweep moves each particle once with an isotropic Gaussian proposal of
/// per-coordinate standard deviation `scale / √(m ΔQ(λ))`; the position
/// dependence of the step is compensated by the Hastings factor.
#[derive(Debug, Clone)]
pub struct McmcChain {
    potential: Potential,
    m: f64,
    scale: f64,
    lap_floor: f64,
    droplet_radius: f64,
    points: Vec<Complex64>,
    accepted: u64,
    proposed: u64,
}

impl McmcChain {
    pub fn new<R: Rng + ?Sized>(pot: &Potential, m: f64, n: usize, cfg: &SamplerConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        let tau = n as f64 / m;
        if !(tau < pot.growth_exponent()) {
            return Err(Error::Config(format!(
                "the Coulomb gas is integrable only when m/n > 1/rho (n/m = {tau}, rho = {})",
                pot.growth_exponent()
            )));
        }
        let droplet = Droplet::compute(pot, tau)?;
        let r = droplet.radius();
        let points = (0..n).map(|_| uniform_in_disk(rng, r)).collect();
        Ok(Self {
            potential: pot.clone(),
            m,
            scale: cfg.proposal_scale,
            lap_floor: 0.05 * tau / (r * r),
            droplet_radius: r,
            points,
            accepted: 0,
            proposed: 0,
        })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    pub fn step_size(&self, z: Complex64) -> f64 {
        self.scale / (self.m * self.potential.laplacian(z).max(self.lap_floor)).sqrt()
    }

    fn log_proposal(&self, from: Complex64, to: Complex64) -> f64 {
        let s = self.step_size(from);
        -(2.0 * PI * s * s).ln() - (to - from).norm_sqr() / (2.0 * s * s)
    }

    /// Log Metropolis–Hastings ratio for moving particle `j` to `proposal`;
    /// `-∞` if the proposal coincides with another particle.
    pub fn log_acceptance_ratio(&self, j: usize, proposal: Complex64) -> f64 {
        let old = self.points[j];
        let mut log_vdm = 0.0;
        for (k, &p) in self.points.iter().enumerate() {
            if k == j {
                continue;
            }
            let dn = (proposal - p).norm();
            if dn == 0.0 {
                return f64::NEG_INFINITY;
            }
            log_vdm += dn.ln() - (old - p).norm().ln();
        }
        let energy = self.m * (self.potential.evaluate(proposal) - self.potential.evaluate(old));
        2.0 * log_vdm - energy + self.log_proposal(proposal, old) - self.log_proposal(old, proposal)
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for j in 0..self.points.len() {
            let old = self.points[j];
            let s = self.step_size(old);
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let prop = old + Complex64::new(s * dx, s * dy);
            let lr = self.log_acceptance_ratio(j, prop);
            self.proposed += 1;
            if lr >= 0.0 || rng.random::<f64>().ln() < lr {
                self.points[j] = prop;
                self.accepted += 1;
            }
        }
    }

    /// Burn-in, then `count` configurations spaced `thin_stride` sweeps apart.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        cfg: &SamplerConfig,
        count: usize,
        chain_index: u64,
    ) -> Vec<PointConfiguration> {
        for _ in 0..cfg.burn_in_sweeps {
            self.sweep(rng);
        }
        self.reset_counters();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            for _ in 0..cfg.thin_stride {
                self.sweep(rng);
            }
            let acc = self.acceptance_rate();
            let mut warnings = Vec::new();
            if !(0.1..=0.7).contains(&acc) {
                warnings.push(format!("acceptance rate {acc:.3} outside [0.1, 0.7]"));
            }
            let mut c = PointConfiguration {
                points: self.points.clone(),
                meta: ConfigMeta {
                    potential: self.potential.tag(),
                    m: self.m,
                    n: self.points.len(),
                    sampler: SamplerKind::Mcmc,
                    master_seed: cfg.master_seed,
                    chain_index,
                    acceptance_rate: Some(acc),
                    envelope_restarts: None,
                    warnings,
                },
            };
            c.soft_radius_check(self.droplet_radius);
            out.push(c);
        }
        out
    }
}

/// `chains` independent chains, chain `c` on stream `c`, each emitting
/// `per_chain` configurations; results concatenated in chain order.
pub fn sample_mcmc(
    pot: &Potential,
    m: f64,
    n: usize,
    cfg: &SamplerConfig,
    chains: usize,
    per_chain: usize,
) -> Result<Vec<PointConfiguration>> {
    let per: Vec<Vec<PointConfiguration>> = run_streams(cfg.master_seed, 0, chains, |idx, rng| {
        let mut chain = McmcChain::new(pot, m, n, cfg, rng)?;
        Ok(chain.run(rng, cfg, per_chain, idx))
    })?;
    Ok(per.into_iter().flatten().collect())
}

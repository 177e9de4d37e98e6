//! Orthonormal polynomial bases for the weight `e^{-mQ}`, the weighted
//! correlation kernel and its near/off-diagonal diagnostics, and the Nyström
//! compression used by the trace formulas.
//!
//! Every basis element is carried as a *weighted feature*
//! `u_k(z) = φ_k(z) e^{-mQ(z)/2}`, evaluated in log-magnitude form so that no
//! intermediate `e^{mψ}`-sized factor is ever formed.

use crate::error::{Error, Result};
use crate::potential::{Droplet, Potential};
use crate::quadrature::{integrate_adaptive, QuadratureGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Log-window kept around the peak of a radial moment integrand. `e^{-40}`
/// is below `1e-17`, so the discarded tails are under the `1e-14` budget.
const LOG_WINDOW: f64 = 40.0;

/// Result of [`log_radial_moment`].
#[derive(Debug, Clone, Copy)]
pub struct RadialMoment {
    /// `ln ∫_0^∞ 2 r^a e^{-m q(r)} dr`.
    pub log_value: f64,
    pub r_low: f64,
    pub r_high: f64,
}

/// `ln ∫_0^∞ 2 r^a e^{-m q(r)} dr`, integrated adaptively over the window where
/// the integrand is within `e^{-40}` of its peak.
pub fn log_radial_moment(pot: &Potential, m: f64, a: f64) -> Option<RadialMoment> {
    let prof = pot.radial_profile();
    let phi = |r: f64| (2.0f64).ln() + a * r.ln() - m * prof.q(r);
    let (lo_exp, hi_exp, samples) = (-10.0f64, 4.0f64, 2800);
    let mut best = (f64::NEG_INFINITY, 0usize);
    let radius_at = |i: usize| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / samples as f64);
    for i in 0..=samples {
        let v = phi(radius_at(i));
        if v > best.0 {
            best = (v, i);
        }
    }
    if !best.0.is_finite() || best.1 == samples {
        return None;
    }
    // golden-section refinement of the peak
    let (mut lo, mut hi) = (radius_at(best.1.saturating_sub(1)), radius_at(best.1 + 1));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if phi(x1) < phi(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    let r_peak = 0.5 * (lo + hi);
    let peak = phi(r_peak).max(best.0);

    let below = |r: f64| phi(r) - peak + LOG_WINDOW;
    let r_low = if below(radius_at(0)) > 0.0 {
        radius_at(0)
    } else {
        bisect(below, radius_at(0), r_peak)
    };
    let r_top = radius_at(samples);
    if below(r_top) > 0.0 {
        return None;
    }
    let r_high = bisect(below, r_top, r_peak);
    let integral = integrate_adaptive(|r| (phi(r) - peak).exp(), r_low, r_high, 0.0, 1e-14);
    Some(RadialMoment {
        log_value: peak + integral.ln(),
        r_low,
        r_high,
    })
}

// root of a function that is negative at `outside` and positive at `inside`
fn bisect<F: Fn(f64) -> f64>(f: F, outside: f64, inside: f64) -> f64 {
    let (mut a, mut b) = (outside, inside);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if f(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
        if (b - a).abs() < 1e-14 * b.abs().max(a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone)]
enum Mode {
    /// `φ_k = z^k / √h_k`; stores `ln h_k`.
    Radial { log_norms: Vec<f64> },
    /// `φ_j = Σ_k C_{jk} z^k / σ_k`, `ln σ_k` stored separately.
    General {
        coeffs: DMatrix<Complex64>,
        log_scales: Vec<f64>,
    },
}

/// Orthonormal basis of weighted polynomials of degree `< n`.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    m: f64,
    n: usize,
    weight_power: u32,
    mode: Mode,
    r_cut: f64,
}

/// Radial norms `h_k = ∫ |z|^{2k} e^{-mQ} dA`, `k < n`.
pub fn radial_norms(pot: &Potential, m: f64, n: usize) -> Result<OrthonormalBasis> {
    radial_norms_weighted(pot, m, n, 0)
}

/// Radial norms for the weight `|z|^{2s} e^{-mQ}`: `h̃_k = ∫ |z|^{2k+2s} e^{-mQ} dA`.
pub fn radial_norms_weighted(pot: &Potential, m: f64, n: usize, s: u32) -> Result<OrthonormalBasis> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    if !(m > 0.0) {
        return Err(Error::Config(format!("m must be positive, got {m}")));
    }
    let mut log_norms = Vec::with_capacity(n);
    let mut r_cut: f64 = 0.0;
    for k in 0..n {
        let a = (2 * k + 1 + 2 * s as usize) as f64;
        let mom = log_radial_moment(pot, m, a).ok_or(Error::DivergentNorm {
            degree: k,
            ratio: n as f64 / m,
            rho: pot.growth_exponent(),
        })?;
        r_cut = r_cut.max(mom.r_high);
        log_norms.push(mom.log_value);
    }
    Ok(OrthonormalBasis {
        m,
        n,
        weight_power: s,
        mode: Mode::Radial { log_norms },
        r_cut,
    })
}

/// Modified Gram–Schmidt on monomials under the grid inner product.
pub fn gram_schmidt_basis(pot: &Potential, m: f64, n: usize, grid: &QuadratureGrid) -> Result<OrthonormalBasis> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let nodes: Vec<(Complex64, f64)> = grid.nodes().collect();
    let log_q: Vec<f64> = nodes.iter().map(|(z, _)| m * pot.evaluate(*z)).collect();

    // ln σ_k: grid norm of z^k e^{-mQ/2}, by log-sum-exp
    let log_scales: Vec<f64> = (0..n)
        .map(|k| {
            let terms: Vec<f64> = nodes
                .iter()
                .zip(&log_q)
                .filter(|((z, w), _)| *w > 0.0 && (k == 0 || z.norm() > 0.0))
                .map(|((z, w), lq)| w.ln() + 2.0 * k as f64 * z.norm().ln() - lq)
                .collect();
            0.5 * log_sum_exp(&terms)
        })
        .collect();

    let g = nodes.len();
    // columns: √w_a μ_k(z_a)
    let mut vecs: Vec<Vec<Complex64>> = (0..n)
        .map(|k| {
            (0..g)
                .map(|a| {
                    let (z, w) = nodes[a];
                    w.sqrt() * scaled_monomial(z, k, 0.5 * log_q[a] + log_scales[k])
                })
                .collect()
        })
        .collect();
    let mut coeffs = DMatrix::<Complex64>::zeros(n, n);
    let mut leading = 0.0f64;
    for j in 0..n {
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        c[j] = Complex64::new(1.0, 0.0);
        let start_norm = norm(&vecs[j]);
        leading = leading.max(start_norm);
        // two passes of MGS
        for _ in 0..2 {
            for i in 0..j {
                let proj = dot(&vecs[i], &vecs[j]);
                let (done, cur) = vecs.split_at_mut(j);
                for (x, y) in cur[0].iter_mut().zip(&done[i]) {
                    *x -= proj * y;
                }
                for k in 0..n {
                    c[k] -= proj * coeffs[(i, k)];
                }
            }
        }
        let nrm = norm(&vecs[j]);
        if nrm < 1e-13 * leading {
            return Err(Error::RankLoss {
                degree: j,
                pivot: nrm,
                leading,
            });
        }
        for x in vecs[j].iter_mut() {
            *x /= nrm;
        }
        for k in 0..n {
            coeffs[(j, k)] = c[k] / nrm;
        }
    }
    let r_cut = grid.outer_radius();
    Ok(OrthonormalBasis {
        m,
        n,
        weight_power: 0,
        mode: Mode::General { coeffs, log_scales },
        r_cut,
    })
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}

// z^k e^{-log_shift}
fn scaled_monomial(z: Complex64, k: usize, log_shift: f64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return if k == 0 {
            Complex64::new((-log_shift).exp(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    Complex64::from_polar((k as f64 * r.ln() - log_shift).exp(), k as f64 * z.arg())
}

impl OrthonormalBasis {
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight_power(&self) -> u32 {
        self.weight_power
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.mode, Mode::Radial { .. })
    }

    /// Radius beyond which every weighted basis element is below `e^{-20}` of
    /// its peak modulus.
    pub fn tail_radius(&self) -> f64 {
        self.r_cut
    }

    /// `ln h_k` for a radial basis.
    pub fn log_norms(&self) -> Option<&[f64]> {
        match &self.mode {
            Mode::Radial { log_norms } => Some(log_norms),
            Mode::General { .. } => None,
        }
    }

    /// Coefficient of `z^k` in `φ_j` (lower triangular).
    pub fn monomial_coefficient(&self, j: usize, k: usize) -> Complex64 {
        match &self.mode {
            Mode::Radial { log_norms } => {
                if j == k {
                    Complex64::new((-0.5 * log_norms[k]).exp(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Mode::General { coeffs, log_scales } => coeffs[(j, k)] * (-log_scales[k]).exp(),
        }
    }

    // feature values with an extra `e^{-shift}`; `half_mq = mQ(z)/2`
    fn features_shifted(&self, z: Complex64, half_mq: f64, shift: f64) -> Vec<Complex64> {
        let s = self.weight_power as f64;
        let r = z.norm();
        match &self.mode {
            Mode::Radial { log_norms } => {
                let theta = z.arg();
                log_norms
                    .iter()
                    .enumerate()
                    .map(|(k, lh)| {
                        let power = k as f64 + s;
                        if r == 0.0 {
                            if power == 0.0 {
                                Complex64::new((-half_mq - 0.5 * lh - shift).exp(), 0.0)
                            } else {
                                Complex64::new(0.0, 0.0)
                            }
                        } else {
                            let logmod = power * r.ln() - half_mq - 0.5 * lh - shift;
                            Complex64::from_polar(logmod.exp(), k as f64 * theta)
                        }
                    })
                    .collect()
            }
            Mode::General { coeffs, log_scales } => {
                let mono: Vec<Complex64> = (0..self.n)
                    .map(|k| scaled_monomial(z, k, half_mq + log_scales[k] + shift))
                    .collect();
                (0..self.n)
                    .map(|j| (0..=j).map(|k| coeffs[(j, k)] * mono[k]).sum())
                    .collect()
            }
        }
    }

    /// Largest log-modulus among the raw feature terms at `z`, used to
    /// renormalize features far from the droplet.
    fn log_feature_scale(&self, z: Complex64, half_mq: f64) -> f64 {
        let s = self.weight_power as f64;
        let r = z.norm();
        match &self.mode {
            Mode::Radial { log_norms } => log_norms
                .iter()
                .enumerate()
                .map(|(k, lh)| {
                    let power = k as f64 + s;
                    if r == 0.0 {
                        if power == 0.0 {
                            -half_mq - 0.5 * lh
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        power * r.ln() - half_mq - 0.5 * lh
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max),
            Mode::General { coeffs, log_scales } => (0..self.n)
                .map(|k| {
                    let cmax = (k..self.n).map(|j| coeffs[(j, k)].norm()).fold(0.0, f64::max);
                    let lr = if r == 0.0 {
                        if k == 0 {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        k as f64 * r.ln()
                    };
                    cmax.ln() + lr - half_mq - log_scales[k]
                })
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// The weighted correlation kernel `K_{m,n}(z,w) e^{-m(Q(z)+Q(w))/2}`.
#[derive(Debug, Clone)]
pub struct WeightedKernel {
    basis: OrthonormalBasis,
    potential: Potential,
}

impl WeightedKernel {
    pub fn new(basis: OrthonormalBasis, potential: Potential) -> Self {
        Self { basis, potential }
    }

    /// Radial kernel for `e^{-mQ}` with `n` polynomials.
    pub fn radial(pot: &Potential, m: f64, n: usize) -> Result<Self> {
        Ok(Self::new(radial_norms(pot, m, n)?, pot.clone()))
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn m(&self) -> f64 {
        self.basis.m
    }

    pub fn n(&self) -> usize {
        self.basis.n
    }

    pub fn tail_radius(&self) -> f64 {
        self.basis.r_cut
    }

    /// Weighted features `u_k(z)`; `K_w(z,w) = Σ u_k(z) conj(u_k(w))`.
    pub fn features(&self, z: Complex64) -> Vec<Complex64> {
        let half_mq = 0.5 * self.m() * self.potential.evaluate(z);
        self.basis.features_shifted(z, half_mq, 0.0)
    }

    /// Features divided by `e^{L}`, together with `L`; bounded even where the
    /// raw features underflow.
    pub fn log_normalized_features(&self, z: Complex64) -> (Vec<Complex64>, f64) {
        let half_mq = 0.5 * self.m() * self.potential.evaluate(z);
        let shift = self.basis.log_feature_scale(z, half_mq);
        (self.basis.features_shifted(z, half_mq, shift), shift)
    }

    /// `K(z,w) e^{-m(Q(z)+Q(w))/2}`.
    pub fn eval(&self, z: Complex64, w: Complex64) -> Complex64 {
        let a = self.features(z);
        let b = self.features(w);
        a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum()
    }

    /// `R¹(z) = K(z,z) e^{-mQ(z)}`.
    pub fn one_point(&self, z: Complex64) -> Result<f64> {
        let v: f64 = self.features(z).iter().map(|u| u.norm_sqr()).sum();
        if v < 0.0 {
            if v > -1e-12 {
                return Ok(0.0);
            }
            return Err(Error::NegativeDensity { z, value: v });
        }
        Ok(v)
    }

    /// `ln R¹(z)`, finite even where `R¹` underflows.
    pub fn log_one_point(&self, z: Complex64) -> f64 {
        let (u, shift) = self.log_normalized_features(z);
        let s: f64 = u.iter().map(|x| x.norm_sqr()).sum();
        s.ln() + 2.0 * shift
    }

    /// `|R¹(z) − mΔQ(z) − ½Δ log ΔQ(z)|`.
    pub fn diagonal_expansion_residual(&self, z: Complex64) -> Result<f64> {
        let r1 = self.one_point(z)?;
        let lap = self.potential.laplacian(z);
        let correction = self.potential.half_laplacian_log_laplacian(z.norm(), 1.0);
        Ok((r1 - self.m() * lap - correction).abs())
    }

    /// `max_θ |K_w(z0, z0 + h e^{iθ})|` for each `h` in `radii` (64 angles).
    pub fn offdiagonal_decay_profile(&self, z0: Complex64, radii: &[f64]) -> Vec<f64> {
        let anchor = self.features(z0);
        radii
            .iter()
            .map(|&h| {
                (0..64)
                    .map(|j| {
                        let w = z0 + Complex64::from_polar(h, 2.0 * PI * j as f64 / 64.0);
                        let fw = self.features(w);
                        anchor
                            .iter()
                            .zip(&fw)
                            .map(|(x, y)| x * y.conj())
                            .sum::<Complex64>()
                            .norm()
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// `max |R¹|` over a grid, used for rejection envelopes.
    pub fn max_one_point(&self, grid: &QuadratureGrid) -> f64 {
        let nodes: Vec<Complex64> = grid.nodes().map(|(z, _)| z).collect();
        nodes
            .par_iter()
            .map(|z| self.one_point(*z).unwrap_or(0.0))
            .reduce(|| 0.0, f64::max)
    }

    /// Default grid: 400 Gauss–Legendre radii on `[0, max(2R, r_cut)]` and
    /// `max(256, 4n)` angles.
    pub fn default_grid(&self, droplet: Option<&Droplet>) -> QuadratureGrid {
        let r = droplet.map(|d| 2.0 * d.radius()).unwrap_or(0.0);
        let outer = r.max(self.tail_radius());
        QuadratureGrid::disk(Complex64::new(0.0, 0.0), outer, 400, (4 * self.n()).max(256))
    }
}

/// Least-squares fit `ln profile(h) ≈ c − rate · h`.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// `rate / √m`.
    pub epsilon: f64,
}

pub fn fit_decay_rate(radii: &[f64], profile: &[f64], m: f64) -> DecayFit {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(profile)
        .filter(|(_, p)| **p > 0.0)
        .map(|(h, p)| (*h, p.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    DecayFit {
        rate: -slope,
        intercept: my - slope * mx,
        epsilon: -slope / m.sqrt(),
    }
}

/// First-order approximating Bergman kernel, weighted:
/// `(m b0 + b1) e^{m(ψ(z,w̄) − (Q(z)+Q(w))/2)}`.
pub fn bergman_approx(pot: &Potential, m: f64, z: Complex64, w: Complex64) -> Result<Complex64> {
    let ext = pot
        .analytic_extension()
        .ok_or_else(|| Error::UnsupportedPotential(format!("{} has no closed-form polarization", pot.tag())))?;
    let wb = w.conj();
    let exponent = (ext.psi(z, wb) - 0.5 * (pot.evaluate(z) + pot.evaluate(w))) * m;
    Ok((ext.b0(z, wb) * m + ext.b1(z, wb)) * exponent.exp())
}

/// Compressed Nyström representation of the kernel on a grid.
///
/// With `U_{ak} = √w_a u_k(z_a)` the symmetrized Nyström matrix is
/// `K̃ = U U*`, so every trace of products of `M_f K̃` reduces to traces of the
/// `n × n` matrices `A_f = U* M_f U`.
#[derive(Debug, Clone)]
pub struct NystromOperator<'a> {
    kernel: &'a WeightedKernel,
    grid: QuadratureGrid,
    // per ring, per degree: radial factor of the (monomial or radial) feature
    radial: Vec<Vec<f64>>,
}

impl<'a> NystromOperator<'a> {
    pub fn new(kernel: &'a WeightedKernel, grid: QuadratureGrid) -> Self {
        let m = kernel.m();
        let basis = &kernel.basis;
        let pot = &kernel.potential;
        let s = basis.weight_power as f64;
        let radial = grid
            .radii()
            .iter()
            .map(|&r| {
                let half_mq = 0.5 * m * pot.evaluate_radial(r);
                (0..basis.n)
                    .map(|k| {
                        let shift = match &basis.mode {
                            Mode::Radial { log_norms } => 0.5 * log_norms[k],
                            Mode::General { log_scales, .. } => log_scales[k],
                        };
                        let power = match basis.mode {
                            Mode::Radial { .. } => k as f64 + s,
                            Mode::General { .. } => k as f64,
                        };
                        (power * r.ln() - half_mq - shift).exp()
                    })
                    .collect()
            })
            .collect();
        Self { kernel, grid, radial }
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// `trace K̃ = Σ_a w_a R¹(z_a)`.
    pub fn trace(&self) -> f64 {
        self.grid
            .ring_weights()
            .iter()
            .zip(&self.radial)
            .map(|(w, rho)| w * self.contract(rho))
            .sum()
    }

    fn contract(&self, rho: &[f64]) -> f64 {
        match &self.kernel.basis.mode {
            Mode::Radial { .. } => rho.iter().map(|x| x * x).sum(),
            // ring average of |Σ_k C_jk ρ_k e^{ikθ}|² = Σ_k |C_jk|² ρ_k²
            Mode::General { coeffs, .. } => {
                let n = rho.len();
                (0..n)
                    .map(|j| {
                        (0..=j)
                            .map(|k| coeffs[(j, k)].norm_sqr() * rho[k] * rho[k])
                            .sum::<f64>()
                    })
                    .sum()
            }
        }
    }

    /// `A_f = U* M_f U` as an `n × n` Hermitian matrix (for real `f`).
    pub fn compress<F: Fn(Complex64) -> f64 + Sync>(&self, f: F) -> DMatrix<Complex64> {
        let n = self.kernel.n();
        let nt = self.grid.n_theta();
        let center = self.grid.center();
        let fft = FftPlanner::new().plan_fft_forward(nt);
        let rings: Vec<(usize, Vec<Complex64>)> = (0..self.grid.n_radial())
            .into_par_iter()
            .map(|i| {
                let r = self.grid.radii()[i];
                let mut buf: Vec<Complex64> = (0..nt)
                    .map(|j| Complex64::new(f(center + Complex64::from_polar(r, self.grid.angle(j))), 0.0))
                    .collect();
                fft.process(&mut buf);
                for x in buf.iter_mut() {
                    *x /= nt as f64;
                }
                (i, buf)
            })
            .collect();
        let mut mono = DMatrix::<Complex64>::zeros(n, n);
        for (i, fhat) in &rings {
            let w = self.grid.ring_weights()[*i];
            let rho = &self.radial[*i];
            for k in 0..n {
                for l in 0..n {
                    let d = (k as isize - l as isize).rem_euclid(nt as isize) as usize;
                    mono[(k, l)] += fhat[d] * (w * rho[k] * rho[l]);
                }
            }
        }
        match &self.kernel.basis.mode {
            Mode::Radial { .. } => mono,
            Mode::General { coeffs, .. } => coeffs.conjugate() * mono * coeffs.transpose(),
        }
    }

    /// `U* U`; equals the identity exactly when `K̃` is a projection.
    pub fn gram(&self) -> DMatrix<Complex64> {
        self.compress(|_| 1.0)
    }

    /// Dense `K̃_{ab} = √w_a K_w(z_a, z_b) √w_b` (small grids only).
    pub fn dense_matrix(&self) -> DMatrix<Complex64> {
        let nodes: Vec<(Complex64, f64)> = self.grid.nodes().collect();
        let feats: Vec<Vec<Complex64>> = nodes
            .iter()
            .map(|(z, w)| self.kernel.features(*z).into_iter().map(|u| u * w.sqrt()).collect())
            .collect();
        let g = nodes.len();
        DMatrix::from_fn(g, g, |a, b| {
            feats[a].iter().zip(&feats[b]).map(|(x, y)| x * y.conj()).sum()
        })
    }
}

/// `max_{j,k} |(A − I)_{jk}|`.
pub fn identity_deviation(a: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.nrows() {
        for k in 0..a.ncols() {
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((a[(j, k)] - target).norm());
        }
    }
    worst
}

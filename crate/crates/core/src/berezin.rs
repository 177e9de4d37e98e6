//! Berezin kernels `B^{⟨z0⟩}(w) = |K(z0,w)|² / R¹(z0)` and transforms, the
//! conditional one-point identity at a radial anchor, the top-degree
//! wavefunction and exterior harmonic measure, and the Ginibre(∞) scaling
//! limit.

use crate::error::{Error, Result};
use crate::kernel::{radial_norms, radial_norms_weighted, WeightedKernel};
use crate::potential::{Droplet, Potential};
use crate::quadrature::{GaussLegendre, QuadratureGrid};
use crate::testfn::{Support, TestFunction};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Angular nodes for harmonic-measure comparisons.
pub const HARMONIC_NODES: usize = 512;

/// Anchors closer than this fraction of `R` to `∂S` are refused.
pub const BOUNDARY_EXCLUSION: f64 = 0.05;

fn origin() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Berezin density at a fixed anchor, evaluated with log-normalized features
/// so that anchors far outside the droplet stay finite.
#[derive(Debug, Clone)]
pub struct BerezinKernel<'a> {
    kernel: &'a WeightedKernel,
    anchor: Complex64,
    anchor_features: Vec<Complex64>,
    anchor_norm: f64,
    log_one_point: f64,
}

impl<'a> BerezinKernel<'a> {
    pub fn new(kernel: &'a WeightedKernel, anchor: Complex64) -> Result<Self> {
        let (anchor_features, shift) = kernel.log_normalized_features(anchor);
        let anchor_norm: f64 = anchor_features.iter().map(|u| u.norm_sqr()).sum();
        let log_one_point = 2.0 * shift + anchor_norm.ln();
        if !(anchor_norm > 0.0) || !log_one_point.is_finite() {
            return Err(Error::AnchorUnderflow(anchor));
        }
        Ok(Self {
            kernel,
            anchor,
            anchor_features,
            anchor_norm,
            log_one_point,
        })
    }

    pub fn anchor(&self) -> Complex64 {
        self.anchor
    }

    pub fn kernel(&self) -> &WeightedKernel {
        self.kernel
    }

    /// `ln R¹(z0)`.
    pub fn log_one_point(&self) -> f64 {
        self.log_one_point
    }

    /// `B^{⟨z0⟩}(w)`.
    pub fn density(&self, w: Complex64) -> f64 {
        let (fw, shift) = self.kernel.log_normalized_features(w);
        if !shift.is_finite() {
            return 0.0;
        }
        let k: Complex64 = self.anchor_features.iter().zip(&fw).map(|(a, b)| a * b.conj()).sum();
        let ratio = k.norm_sqr() / self.anchor_norm;
        if ratio > 0.0 {
            (ratio.ln() + 2.0 * shift).exp()
        } else {
            0.0
        }
    }

    /// `∫ B dA` on `grid`.
    pub fn mass(&self, grid: &QuadratureGrid) -> f64 {
        grid.integrate(|w| self.density(w))
    }

    /// `B f(z0) = ∫ f B dA`, integrated over the support of `f` when compact.
    pub fn transform(&self, f: &TestFunction) -> f64 {
        self.transform_on(f, &transform_grid(self.kernel, f))
    }

    pub fn transform_on(&self, f: &TestFunction, grid: &QuadratureGrid) -> f64 {
        grid.integrate(|w| {
            let v = f.value(w);
            if v == 0.0 {
                0.0
            } else {
                v * self.density(w)
            }
        })
    }
}

fn transform_grid(kernel: &WeightedKernel, f: &TestFunction) -> QuadratureGrid {
    let n_theta = (4 * kernel.n()).max(256);
    match f.support() {
        Support::Disk { center, radius } => QuadratureGrid::disk(center, radius, 200, n_theta),
        Support::Global => kernel.default_grid(None),
    }
}

/// `B^{⟨z0⟩}(w)`.
pub fn berezin_density(kernel: &WeightedKernel, z0: Complex64, w: Complex64) -> Result<f64> {
    Ok(BerezinKernel::new(kernel, z0)?.density(w))
}

/// `∫ B^{⟨z0⟩} dA` on the kernel's default grid.
pub fn berezin_mass(kernel: &WeightedKernel, z0: Complex64) -> Result<f64> {
    let b = BerezinKernel::new(kernel, z0)?;
    Ok(b.mass(&kernel.default_grid(None)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BerezinTransform {
    pub anchor_re: f64,
    pub anchor_im: f64,
    pub value: f64,
    pub f_at_anchor: f64,
    /// `Δf(z0) / ΔQ(z0)`.
    pub predicted: f64,
    /// `n (B f(z0) − f(z0)) − Δf(z0)/ΔQ(z0)`.
    pub residual: f64,
}

impl BerezinTransform {
    /// `|residual| / |Δf/ΔQ|`.
    pub fn relative_residual(&self) -> f64 {
        self.residual.abs() / self.predicted.abs()
    }
}

/// `B f(z0)` with its expansion residual against `f + Δf/(nΔQ)`.
pub fn berezin_transform(kernel: &WeightedKernel, f: &TestFunction, z0: Complex64) -> Result<BerezinTransform> {
    let b = BerezinKernel::new(kernel, z0)?;
    let value = b.transform(f);
    let fz = f.value(z0);
    let lap_q = kernel.potential().laplacian(z0);
    let predicted = if lap_q > 0.0 { f.laplacian(z0) / lap_q } else { f64::NAN };
    let n = kernel.n() as f64;
    Ok(BerezinTransform {
        anchor_re: z0.re,
        anchor_im: z0.im,
        value,
        f_at_anchor: fz,
        predicted,
        residual: n * (value - fz) - predicted,
    })
}

/// The conditional `(n−1)`-point kernel for the weight `|z|² e^{-mQ}`,
/// i.e. the process conditioned on an eigenvalue at the origin.
pub fn conditional_kernel(pot: &Potential, m: f64, n: usize) -> Result<Option<WeightedKernel>> {
    if n < 2 {
        return Ok(None);
    }
    let basis = radial_norms_weighted(pot, m, n - 1, 1)?;
    Ok(Some(WeightedKernel::new(basis, pot.clone())))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionalIdentity {
    /// `max |B^{⟨0⟩} − (R¹ − R̃¹)|` over the grid.
    pub residual: f64,
    /// `max |B^{⟨0⟩} − e^{-mQ}/h_0|` over the grid.
    pub closed_form_residual: f64,
    pub grid_points: usize,
}

/// Checks `B^{⟨0⟩} = R¹ − R̃¹` on a polar grid for a radial potential.
pub fn conditional_identity_check(pot: &Potential, m: f64, n: usize) -> Result<ConditionalIdentity> {
    let kernel = WeightedKernel::radial(pot, m, n)?;
    let cond = conditional_kernel(pot, m, n)?;
    let b = BerezinKernel::new(&kernel, origin())?;
    let log_h0 = kernel.basis().log_norms().expect("radial basis")[0];
    let grid = QuadratureGrid::disk(origin(), kernel.tail_radius(), 60, 16);
    let mut residual: f64 = 0.0;
    let mut closed: f64 = 0.0;
    for (z, _) in grid.nodes() {
        let bz = b.density(z);
        let r1 = kernel.one_point(z)?;
        let r1c = match &cond {
            Some(c) => c.one_point(z)?,
            None => 0.0,
        };
        residual = residual.max((bz - (r1 - r1c)).abs());
        let direct = (-m * pot.evaluate(z) - log_h0).exp();
        closed = closed.max((bz - direct).abs());
    }
    Ok(ConditionalIdentity {
        residual,
        closed_form_residual: closed,
        grid_points: grid.len(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BefCheck {
    /// `B f(0)`.
    pub transform: f64,
    /// `∫ f R¹ dA − ∫ f R̃¹ dA`.
    pub difference_of_expectations: f64,
    pub residual: f64,
}

/// `B f(0) = E_n trace f − Ẽ_{n−1} trace f` for the conditional process at
/// the origin.
pub fn bef_check(pot: &Potential, m: f64, n: usize, f: &TestFunction) -> Result<BefCheck> {
    let kernel = WeightedKernel::radial(pot, m, n)?;
    let cond = conditional_kernel(pot, m, n)?;
    let grid = transform_grid(&kernel, f);
    let transform = BerezinKernel::new(&kernel, origin())?.transform_on(f, &grid);
    let e_full = grid.integrate(|z| f.value(z) * kernel.one_point(z).unwrap_or(0.0));
    let e_cond = match &cond {
        Some(c) => grid.integrate(|z| f.value(z) * c.one_point(z).unwrap_or(0.0)),
        None => 0.0,
    };
    let difference_of_expectations = e_full - e_cond;
    Ok(BefCheck {
        transform,
        difference_of_expectations,
        residual: (transform - difference_of_expectations).abs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WavefunctionMeasure {
    pub n: usize,
    pub droplet_radius: f64,
    pub width: f64,
    pub total_mass: f64,
    /// Mass in `||z| − R| < width`.
    pub annulus_mass: f64,
    /// Relative spread of the density over the circle `|z| = R`.
    pub angular_deviation: f64,
    /// `(r, 2r·p(r))`: radial marginal density.
    pub radial_profile: Vec<(f64, f64)>,
}

/// The probability density `|P_{n−1}|² e^{-mQ} = |z|^{2(n−1)} e^{-mQ}/h_{n−1}`.
pub fn wavefunction_measure(pot: &Potential, m: f64, n: usize, tau: f64, width: f64) -> Result<WavefunctionMeasure> {
    let droplet = Droplet::compute(pot, tau)?;
    let basis = radial_norms(pot, m, n)?;
    let log_h = basis.log_norms().expect("radial basis")[n - 1];
    let k = (n - 1) as f64;
    let log_radial = |r: f64| {
        if r == 0.0 {
            if n == 1 {
                (2.0f64).ln() - m * pot.evaluate_radial(0.0) - log_h
            } else {
                f64::NEG_INFINITY
            }
        } else {
            (2.0f64).ln() + (2.0 * k + 1.0) * r.ln() - m * pot.evaluate_radial(r) - log_h
        }
    };
    let radial = |r: f64| log_radial(r).exp();
    let r_max = basis.tail_radius().max(2.0 * droplet.radius());
    let rule = GaussLegendre::new(64);
    let panels = 200;
    let h = r_max / panels as f64;
    let total_mass: f64 = (0..panels)
        .map(|i| rule.integrate(i as f64 * h, (i + 1) as f64 * h, radial))
        .sum();
    let big = droplet.radius();
    let lo = (big - width).max(0.0);
    let hi = big + width;
    let sub = 40;
    let hs = (hi - lo) / sub as f64;
    let annulus_mass: f64 = (0..sub)
        .map(|i| rule.integrate(lo + i as f64 * hs, lo + (i + 1) as f64 * hs, radial))
        .sum();
    let kernel = WeightedKernel::new(basis, pot.clone());
    let ring: Vec<f64> = (0..64)
        .map(|j| {
            let z = Complex64::from_polar(big, 2.0 * PI * j as f64 / 64.0);
            kernel.features(z)[n - 1].norm_sqr()
        })
        .collect();
    let mean = ring.iter().sum::<f64>() / ring.len() as f64;
    let angular_deviation = ring.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean;
    let radial_profile = (0..=200)
        .map(|i| {
            let r = r_max * i as f64 / 200.0;
            (r, radial(r))
        })
        .collect();
    Ok(WavefunctionMeasure {
        n,
        droplet_radius: big,
        width,
        total_mass,
        annulus_mass,
        angular_deviation,
        radial_profile,
    })
}

/// Exterior Poisson kernel of the disk `|z| < R` at `z0`, as a density with
/// respect to `dθ/2π`.
pub fn exterior_poisson_kernel(z0: Complex64, radius: f64, theta: f64) -> f64 {
    (z0.norm_sqr() - radius * radius) / (z0 - Complex64::from_polar(radius, theta)).norm_sqr()
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicMeasureCheck {
    pub anchor_re: f64,
    pub anchor_im: f64,
    /// `(1/2π) ∫ |μ − P| dθ` between the angular marginal and the Poisson kernel.
    pub l1_distance: f64,
    /// Berezin mass at distance greater than `0.1` from `∂S`.
    pub mass_away_from_boundary: f64,
    /// Berezin mass in `|w| > R`.
    pub mass_outside_droplet: f64,
    pub total_mass: f64,
    /// `(θ, marginal, Poisson)`.
    pub profile: Vec<(f64, f64, f64)>,
    pub warnings: Vec<String>,
}

/// Compares the angular marginal of `B^{⟨z0⟩}` for an exterior anchor with
/// the harmonic measure of `ℂ∖S` at `z0`.
pub fn exterior_harmonic_measure_check(
    kernel: &WeightedKernel,
    droplet: &Droplet,
    z0: Complex64,
) -> Result<HarmonicMeasureCheck> {
    let big = droplet.radius();
    let distance = z0.norm() - big;
    if distance.abs() < BOUNDARY_EXCLUSION * big {
        return Err(Error::AnchorNearBoundary { anchor: z0, distance });
    }
    if distance < 0.0 {
        return Err(Error::Config(format!("anchor {z0} lies inside the droplet")));
    }
    let mut warnings = Vec::new();
    if z0.norm() <= 1.1 * big {
        warnings.push(format!(
            "anchor |z0| = {:.4} within 1.1 R; the limit is approached slowly",
            z0.norm()
        ));
    }
    if kernel.n() < 128 {
        warnings.push(format!(
            "n = {} below 128; the harmonic-measure limit is coarse",
            kernel.n()
        ));
    }
    let b = BerezinKernel::new(kernel, z0)?;
    let r_max = (2.0 * big).max(kernel.tail_radius()).max(z0.norm() + 1.0);
    let rule = GaussLegendre::new(64);
    let panels = 40;
    let h = r_max / panels as f64;
    let mut nodes = Vec::with_capacity(panels * rule.len());
    for p in 0..panels {
        let (x, w) = rule.on_interval(p as f64 * h, (p + 1) as f64 * h);
        nodes.extend(x.into_iter().zip(w));
    }
    let nt = HARMONIC_NODES;
    let mut profile = Vec::with_capacity(nt);
    let (mut l1, mut away, mut outside, mut total) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..nt {
        let theta = 2.0 * PI * j as f64 / nt as f64;
        let u = Complex64::from_polar(1.0, theta);
        let mut marginal = 0.0;
        for (r, w) in &nodes {
            // density with respect to dθ/2π: 2 ∫ B r dr
            let c = 2.0 * w * r * b.density(u * *r);
            marginal += c;
            if (r - big).abs() > 0.1 {
                away += c;
            }
            if *r > big {
                outside += c;
            }
        }
        let poisson = exterior_poisson_kernel(z0, big, theta);
        l1 += (marginal - poisson).abs();
        total += marginal;
        profile.push((theta, marginal, poisson));
    }
    let nf = nt as f64;
    Ok(HarmonicMeasureCheck {
        anchor_re: z0.re,
        anchor_im: z0.im,
        l1_distance: l1 / nf,
        mass_away_from_boundary: away / nf,
        mass_outside_droplet: outside / nf,
        total_mass: total / nf,
        profile,
        warnings,
    })
}

/// Ginibre(∞) kernel `e^{z w̄ − (|z|² + |w|²)/2}`.
pub fn ginibre_infinity_kernel(z: Complex64, w: Complex64) -> Complex64 {
    (z * w.conj() - 0.5 * (z.norm_sqr() + w.norm_sqr())).exp()
}

/// Microscopic rescaling at a bulk anchor: `k(z,w) = K(z0 + z/s, z0 + w/s)/s²`
/// with `s = √(m ΔQ(z0))`.
#[derive(Debug, Clone)]
pub struct ScalingProbe<'a> {
    kernel: &'a WeightedKernel,
    anchor: Complex64,
    scale: f64,
    pub warnings: Vec<String>,
}

impl<'a> ScalingProbe<'a> {
    pub fn new(kernel: &'a WeightedKernel, droplet: &Droplet, anchor: Complex64) -> Result<Self> {
        let lap = kernel.potential().laplacian(anchor);
        if !(lap > 0.0) {
            return Err(Error::NotBulkSupported(format!("Laplacian of Q vanishes at {anchor}")));
        }
        let scale = (kernel.m() * lap).sqrt();
        let mut warnings = Vec::new();
        let dist = droplet.radius() - anchor.norm();
        let guard = 9.0 / (kernel.n() as f64).sqrt();
        if dist < guard {
            warnings.push(format!(
                "anchor at distance {dist:.4} from the droplet boundary, below {guard:.4}; the bulk limit does not apply"
            ));
        }
        Ok(Self {
            kernel,
            anchor,
            scale,
            warnings,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn point(&self, z: Complex64) -> Complex64 {
        self.anchor + z / self.scale
    }

    /// `k_n(z, w)`.
    pub fn kernel(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.kernel.eval(self.point(z), self.point(w)) / (self.scale * self.scale)
    }

    /// `R̂¹(z) − B̂^{⟨z0⟩}(z)`: the rescaled one-point function of the process
    /// conditioned on an eigenvalue at the anchor.
    pub fn conditioned_one_point(&self, berezin: &BerezinKernel, z: Complex64) -> Result<f64> {
        let p = self.point(z);
        let s2 = self.scale * self.scale;
        Ok((self.kernel.one_point(p)? - berezin.density(p)) / s2)
    }
}

/// `rescaled_kernel(kernel, z0, z, w)`.
pub fn rescaled_kernel(
    kernel: &WeightedKernel,
    droplet: &Droplet,
    z0: Complex64,
    z: Complex64,
    w: Complex64,
) -> Result<(Complex64, Vec<String>)> {
    let probe = ScalingProbe::new(kernel, droplet, z0)?;
    Ok((probe.kernel(z, w), probe.warnings))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingCheck {
    /// `sup ||k_n(z,w)| − e^{−|z−w|²/2}|` over the lattice pairs.
    pub sup_deviation: f64,
    pub pairs: usize,
    pub warnings: Vec<String>,
}

/// Lattice points of `[−extent, extent]²` with `side` points per axis, kept
/// when `|z| <= extent`.
pub fn lattice(extent: f64, side: usize) -> Vec<Complex64> {
    let step = 2.0 * extent / (side - 1) as f64;
    let mut pts = Vec::new();
    for i in 0..side {
        for j in 0..side {
            let z = Complex64::new(-extent + i as f64 * step, -extent + j as f64 * step);
            if z.norm() <= extent + 1e-12 {
                pts.push(z);
            }
        }
    }
    pts
}

/// Compares `|k_n|` with `|K_∞|` over all pairs of a 9×9 lattice in `|z| <= 2`.
pub fn scaling_limit_check(kernel: &WeightedKernel, droplet: &Droplet, z0: Complex64) -> Result<ScalingCheck> {
    let probe = ScalingProbe::new(kernel, droplet, z0)?;
    let pts = lattice(2.0, 9);
    let feats: Vec<Vec<Complex64>> = pts.iter().map(|z| kernel.features(probe.point(*z))).collect();
    let s2 = probe.scale * probe.scale;
    let mut sup: f64 = 0.0;
    for (i, z) in pts.iter().enumerate() {
        for (j, w) in pts.iter().enumerate() {
            let k: Complex64 = feats[i].iter().zip(&feats[j]).map(|(a, b)| a * b.conj()).sum();
            let target = (-0.5 * (z - w).norm_sqr()).exp();
            sup = sup.max((k.norm() / s2 - target).abs());
        }
    }
    Ok(ScalingCheck {
        sup_deviation: sup,
        pairs: pts.len() * pts.len(),
        warnings: probe.warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionedProfile {
    /// `(|z − z0|, mean over angles, 1 − e^{−|z−z0|²})`.
    pub rows: Vec<(f64, f64, f64)>,
    /// Largest deviation from the prediction over all radii and angles.
    pub sup_deviation: f64,
    pub warnings: Vec<String>,
}

/// Rescaled one-point function conditioned on an eigenvalue at `z0`, sampled
/// on `radii` (in microscopic units) and 16 angles.
pub fn conditioned_onepoint_profile(
    kernel: &WeightedKernel,
    droplet: &Droplet,
    z0: Complex64,
    radii: &[f64],
) -> Result<ConditionedProfile> {
    let probe = ScalingProbe::new(kernel, droplet, z0)?;
    let berezin = BerezinKernel::new(kernel, z0)?;
    let mut sup: f64 = 0.0;
    let mut rows = Vec::with_capacity(radii.len());
    for &rho in radii {
        let target = 1.0 - (-rho * rho).exp();
        let mut acc = 0.0;
        for j in 0..16 {
            let z = Complex64::from_polar(rho, 2.0 * PI * j as f64 / 16.0);
            let v = probe.conditioned_one_point(&berezin, z)?;
            sup = sup.max((v - target).abs());
            acc += v;
        }
        rows.push((rho, acc / 16.0, target));
    }
    Ok(ConditionedProfile {
        rows,
        sup_deviation: sup,
        warnings: probe.warnings,
    })
}

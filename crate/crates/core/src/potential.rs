//! External fields `Q`, their droplets and the equilibrium / correction
//! measures for the radially symmetric family.
//!
//! Conventions: `Δ = ∂∂̄` is one quarter of the classical Laplacian, and all
//! areas are measured in `dA = d²z/π`. For a radial profile `Q(z) = q(|z|)`
//! this gives `ΔQ = (q'' + q'/r) / 4`.

use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;
use num_complex::Complex64;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial profile `q` with its first two derivatives.
#[derive(Clone)]
pub struct RadialProfile {
    q: RealFn,
    dq: RealFn,
    d2q: RealFn,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile").finish_non_exhaustive()
    }
}

impl RadialProfile {
    pub fn new<Q, D1, D2>(q: Q, dq: D1, d2q: D2) -> Self
    where
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            q: Arc::new(q),
            dq: Arc::new(dq),
            d2q: Arc::new(d2q),
        }
    }

    pub fn q(&self, r: f64) -> f64 {
        (self.q)(r)
    }

    pub fn dq(&self, r: f64) -> f64 {
        (self.dq)(r)
    }

    pub fn d2q(&self, r: f64) -> f64 {
        (self.d2q)(r)
    }

    /// Reads a tabulated profile from CSV with columns `r,q,q',q''`.
    ///
    /// `q` and `q'` are interpolated by cubic Hermite splines (using `q'` and
    /// `q''` as the slopes), `q''` linearly. Beyond the last row the profile is
    /// continued by its second-order Taylor polynomial.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Config(format!(
                    "profile line {}: expected 4 columns r,q,q',q''",
                    lineno + 1
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|s| s.parse::<f64>()).collect();
            match parsed {
                Ok(v) => rows.push([v[0], v[1], v[2], v[3]]),
                // header row
                Err(_) if rows.is_empty() => continue,
                Err(e) => return Err(Error::Config(format!("profile line {}: {e}", lineno + 1))),
            }
        }
        if rows.len() < 2 {
            return Err(Error::Config("profile needs at least two rows".into()));
        }
        if rows.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::Config("profile radii must be strictly increasing".into()));
        }
        let table = Arc::new(rows);
        let (t0, t1, t2) = (table.clone(), table.clone(), table);
        Ok(Self::new(
            move |r| tabulated(&t0, r, 1, 2, 3),
            move |r| tabulated(&t1, r, 2, 3, usize::MAX),
            move |r| tabulated_linear(&t2, r, 3),
        ))
    }
}

fn locate(rows: &[[f64; 4]], r: f64) -> usize {
    match rows.binary_search_by(|row| row[0].partial_cmp(&r).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(rows.len() - 2),
        Err(i) => i.saturating_sub(1).min(rows.len() - 2),
    }
}

// Hermite interpolation of column `v` with slopes in column `dv`; `d2v`
// (if present) is used for the Taylor continuation outside the table.
fn tabulated(rows: &[[f64; 4]], r: f64, v: usize, dv: usize, d2v: usize) -> f64 {
    let last = rows[rows.len() - 1];
    let first = rows[0];
    let curv = |row: &[f64; 4]| if d2v == usize::MAX { 0.0 } else { row[d2v] };
    if r > last[0] {
        let h = r - last[0];
        return last[v] + last[dv] * h + 0.5 * curv(&last) * h * h;
    }
    if r < first[0] {
        let h = r - first[0];
        return first[v] + first[dv] * h + 0.5 * curv(&first) * h * h;
    }
    let i = locate(rows, r);
    let (a, b) = (rows[i], rows[i + 1]);
    let h = b[0] - a[0];
    let t = (r - a[0]) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * a[v] + h10 * h * a[dv] + h01 * b[v] + h11 * h * b[dv]
}

fn tabulated_linear(rows: &[[f64; 4]], r: f64, v: usize) -> f64 {
    let last = rows[rows.len() - 1];
    if r >= last[0] {
        return last[v];
    }
    if r <= rows[0][0] {
        return rows[0][v];
    }
    let i = locate(rows, r);
    let (a, b) = (rows[i], rows[i + 1]);
    let t = (r - a[0]) / (b[0] - a[0]);
    a[v] + t * (b[v] - a[v])
}

/// Family tag, used in reports and configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `Q = |z|^{2p}`; `p = 1` is the Ginibre potential.
    Power(u32),
    Custom(String),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Power(1) => write!(f, "ginibre"),
            Family::Power(p) => write!(f, "power({p})"),
            Family::Custom(name) => write!(f, "custom({name})"),
        }
    }
}

/// Closed-form polarization data near the anti-diagonal: `ψ(z, w̄)` with
/// `ψ(z, z̄) = Q(z)`, and the holomorphic extensions `b0`, `b1` of `ΔQ` and
/// `½ Δ log ΔQ`.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticExtension {
    power: u32,
}

impl AnalyticExtension {
    pub fn psi(&self, z: Complex64, w_bar: Complex64) -> Complex64 {
        (z * w_bar).powu(self.power)
    }

    pub fn b0(&self, z: Complex64, w_bar: Complex64) -> Complex64 {
        let p = self.power;
        (z * w_bar).powu(p - 1) * (p * p) as f64
    }

    pub fn b1(&self, _z: Complex64, _w_bar: Complex64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
}

/// Working radius used to validate custom profiles when none is given.
pub const DEFAULT_WORKING_RADIUS: f64 = 4.0;

/// Growth exponent attached to the power family. `|z|^{2p}` beats every
/// logarithm; this constant is the declared `ρ` used for integrability checks.
pub const POWER_GROWTH_EXPONENT: f64 = 2.5;

/// A radially symmetric external field `Q(z) = q(|z|)`.
#[derive(Debug, Clone)]
pub struct Potential {
    family: Family,
    profile: RadialProfile,
    growth_exponent: f64,
}

impl Potential {
    /// `Q = |z|²`.
    pub fn ginibre() -> Self {
        Self::radial_power(1).expect("p = 1 is valid")
    }

    /// `Q = |z|^{2p}`, `ΔQ = p²|z|^{2p−2}`.
    pub fn radial_power(p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("power potential needs p >= 1".into()));
        }
        let pf = p as f64;
        let profile = RadialProfile::new(
            move |r| r.powi(2 * p as i32),
            move |r| 2.0 * pf * r.powi(2 * p as i32 - 1),
            move |r| 2.0 * pf * (2.0 * pf - 1.0) * r.powi(2 * p as i32 - 2),
        );
        Ok(Self {
            family: Family::Power(p),
            profile,
            growth_exponent: POWER_GROWTH_EXPONENT,
        })
    }

    /// A custom radial profile, validated for strict subharmonicity on
    /// `0 < r <= working_radius`.
    pub fn custom_radial(name: &str, profile: RadialProfile, rho: f64, working_radius: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Config(format!("growth exponent must be positive, got {rho}")));
        }
        let pot = Self {
            family: Family::Custom(name.to_string()),
            profile,
            growth_exponent: rho,
        };
        let samples = 2000;
        for i in 1..=samples {
            let r = working_radius * i as f64 / samples as f64;
            let lap = pot.laplacian_radial(r);
            if !(lap > 1e-12) {
                return Err(Error::NotSubharmonic { radius: r, value: lap });
            }
        }
        Ok(pot)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn tag(&self) -> String {
        self.family.to_string()
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn radial_profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn analytic_extension(&self) -> Option<AnalyticExtension> {
        match self.family {
            Family::Power(p) => Some(AnalyticExtension { power: p }),
            Family::Custom(_) => None,
        }
    }

    /// `true` when `ΔQ` is constant (Hele–Shaw type).
    pub fn is_hele_shaw(&self) -> bool {
        matches!(self.family, Family::Power(1))
    }

    pub fn evaluate(&self, z: Complex64) -> f64 {
        self.profile.q(z.norm())
    }

    pub fn evaluate_radial(&self, r: f64) -> f64 {
        self.profile.q(r)
    }

    /// `ΔQ` with `Δ = ∂∂̄`.
    pub fn laplacian(&self, z: Complex64) -> f64 {
        self.laplacian_radial(z.norm())
    }

    pub fn laplacian_radial(&self, r: f64) -> f64 {
        if let Family::Power(p) = self.family {
            let pf = p as f64;
            return pf * pf * r.powi(2 * p as i32 - 2);
        }
        if r < 1e-12 {
            // q'(r)/r → q''(0)
            return 0.5 * self.profile.d2q(0.0);
        }
        0.25 * (self.profile.d2q(r) + self.profile.dq(r) / r)
    }

    /// Classical gradient `(∂_x Q, ∂_y Q)`.
    pub fn gradient(&self, z: Complex64) -> [f64; 2] {
        let r = z.norm();
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let d = self.profile.dq(r) / r;
        [d * z.re, d * z.im]
    }

    /// `½ Δ log ΔQ` at radius `r`. Closed form for the power family; central
    /// differences with one Richardson step (base step `1e-4 · scale`) for
    /// custom profiles.
    pub fn half_laplacian_log_laplacian(&self, r: f64, scale: f64) -> f64 {
        match self.family {
            Family::Power(_) => 0.0,
            Family::Custom(_) => {
                let log_lap = |s: f64| self.laplacian_radial(s).ln();
                let h0 = (1e-4 * scale).min(0.5 * r);
                let stencil = |h: f64| {
                    let (lp, l0, lm) = (log_lap(r + h), log_lap(r), log_lap(r - h));
                    let second = (lp - 2.0 * l0 + lm) / (h * h);
                    let first = (lp - lm) / (2.0 * h);
                    0.25 * (second + first / r)
                };
                let coarse = stencil(h0);
                let fine = stencil(0.5 * h0);
                0.5 * (4.0 * fine - coarse) / 3.0
            }
        }
    }
}

/// Disk droplet `S_τ = {|z| <= R}` with `R q'(R) = 2τ`.
#[derive(Debug, Clone)]
pub struct Droplet {
    potential: Potential,
    tau: f64,
    radius: f64,
}

impl Droplet {
    /// Solves the radial balance `R q'(R) = 2τ` by bisection on
    /// `[1e-9, r_max]`, `r_max = 10 (2τ)^{1/2}`.
    pub fn compute(potential: &Potential, tau: f64) -> Result<Self> {
        let rho = potential.growth_exponent();
        if !(tau > 0.0 && tau < rho) {
            return Err(Error::Config(format!(
                "tau must satisfy 0 < tau < rho = {rho}, got {tau}"
            )));
        }
        let prof = potential.radial_profile();
        let balance = |r: f64| r * prof.dq(r);
        let r_min = 1e-9;
        let r_max = 10.0 * (2.0 * tau).sqrt();
        let samples = 4000;
        let mut prev = balance(r_min);
        for i in 1..=samples {
            let r = r_min + (r_max - r_min) * i as f64 / samples as f64;
            let cur = balance(r);
            if !(cur > prev) {
                return Err(Error::UnsupportedDroplet { radius: r });
            }
            prev = cur;
        }
        let target = 2.0 * tau;
        if balance(r_min) >= target || balance(r_max) < target {
            return Err(Error::Config(format!(
                "no droplet radius in ({r_min}, {r_max}) for tau = {tau}"
            )));
        }
        let (mut lo, mut hi) = (r_min, r_max);
        while hi - lo > 1e-15 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if balance(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self {
            potential: potential.clone(),
            tau,
            radius: 0.5 * (lo + hi),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() <= self.radius
    }

    /// Density of `σ_τ` with respect to `dA`: `τ⁻¹ ΔQ` on the droplet.
    pub fn equilibrium_density(&self, z: Complex64) -> f64 {
        if self.contains(z) {
            self.potential.laplacian(z) / self.tau
        } else {
            0.0
        }
    }

    /// Density of `ν`: `½ Δ log ΔQ` on the droplet.
    pub fn nu_density(&self, z: Complex64) -> f64 {
        if self.contains(z) {
            self.potential.half_laplacian_log_laplacian(z.norm(), self.radius)
        } else {
            0.0
        }
    }

    /// Polar grid covering the droplet.
    pub fn grid(&self, n_radial: usize, n_theta: usize) -> QuadratureGrid {
        QuadratureGrid::disk(Complex64::new(0.0, 0.0), self.radius, n_radial, n_theta)
    }

    /// `∫ dσ_τ` by quadrature; equals one for a correctly solved droplet.
    pub fn equilibrium_mass(&self) -> f64 {
        self.grid(400, 8).integrate(|z| self.equilibrium_density(z))
    }

    /// `min (Q(z) − ρ log|z|²)` over radii in `[3R, 10R]`.
    pub fn growth_margin(&self) -> f64 {
        let rho = self.potential.growth_exponent();
        (0..=200)
            .map(|i| {
                let r = self.radius * (3.0 + 7.0 * i as f64 / 200.0);
                self.potential.evaluate_radial(r) - rho * (r * r).ln()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rnm_core::potential::{Droplet, Potential, RadialProfile, DEFAULT_WORKING_RADIUS};
use rnm_core::sampler::{SamplerConfig, SamplerKind};
use rnm_core::testfn::TestFunction;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Experiment configuration, read from a TOML file with dotted sections.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub potential: PotentialSection,
    pub ensemble: EnsembleSection,
    pub sampler: SamplerSection,
    pub statistic: StatisticSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<StatisticSection>,
    pub tilting: TiltingSection,
    pub cumulants: CumulantSection,
    pub grid: GridSection,
    pub kernel: KernelSection,
    pub berezin: BerezinSection,
    pub scaling: ScalingSection,
    pub boundary: BoundarySection,
    #[serde(skip_serializing)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub family: String,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub working_radius: f64,
    pub name: String,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            family: "ginibre".into(),
            tau: 1.0,
            profile: None,
            rho: None,
            working_radius: DEFAULT_WORKING_RADIUS,
            name: "custom".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub kind: SamplerKind,
    pub samples: usize,
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_scale: f64,
    pub envelope_margin: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            kind: SamplerKind::Dpp,
            samples: 2000,
            chains: 4,
            burn_in: d.burn_in_sweeps,
            thin: d.thin_stride,
            proposal_scale: d.proposal_scale,
            envelope_margin: d.rejection_envelope_margin,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatisticSection {
    pub kind: String,
    pub center: [f64; 2],
    pub radius: f64,
}

impl Default for StatisticSection {
    fn default() -> Self {
        Self {
            kind: "bump".into(),
            center: [0.0, 0.0],
            radius: 0.5,
        }
    }
}

impl StatisticSection {
    pub fn build(&self) -> Result<TestFunction, CliError> {
        match self.kind.as_str() {
            "bump" => {
                if !(self.radius > 0.0) {
                    return Err(CliError::Config("statistic.radius must be positive".into()));
                }
                Ok(TestFunction::bump(complex(self.center), self.radius))
            }
            "real_part" => Ok(TestFunction::real_part()),
            "real_part_cutoff" => Ok(TestFunction::real_part_cutoff()),
            other => Err(CliError::Config(format!(
                "unknown statistic kind '{other}' (expected bump, real_part or real_part_cutoff)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltingSection {
    pub lambdas: Vec<f64>,
}

impl Default for TiltingSection {
    fn default() -> Self {
        Self {
            lambdas: (-4..=4).map(|i| 0.125 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CumulantSection {
    pub max_order: usize,
    pub allow_high_order: bool,
    pub n_list: Vec<i64>,
}

impl Default for CumulantSection {
    fn default() -> Self {
        Self {
            max_order: 4,
            allow_high_order: false,
            n_list: vec![32, 64, 128],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub anchor: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_inner: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_outer: Option<f64>,
    pub probe_points: usize,
    pub budget: f64,
    pub shape_tolerance: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            anchor: [0.0, 0.0],
            probe_inner: None,
            probe_outer: None,
            probe_points: 41,
            budget: 3.0,
            shape_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerezinSection {
    pub anchor: [f64; 2],
    pub mass_anchors: Vec<[f64; 2]>,
    pub n_list: Vec<i64>,
    pub expansion_tolerance: f64,
    pub harmonic_anchor: [f64; 2],
    pub harmonic_n: i64,
    pub width: f64,
}

impl Default for BerezinSection {
    fn default() -> Self {
        Self {
            anchor: [0.1, 0.0],
            mass_anchors: vec![[0.0, 0.0], [0.5, 0.0], [1.2, 0.0]],
            n_list: vec![64, 128, 256],
            expansion_tolerance: 0.15,
            harmonic_anchor: [1.5, 0.0],
            harmonic_n: 256,
            width: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub anchor: [f64; 2],
    pub n: i64,
    pub tolerance: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            anchor: [0.0, 0.0],
            n: 128,
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub statistic: String,
    pub variance_tolerance: f64,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self {
            statistic: "real_part".into(),
            variance_tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("rnm-out"),
        }
    }
}

pub fn complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads the file; a relative `potential.profile` is resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(profile) = &cfg.potential.profile {
            if profile.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.potential.profile = Some(base.join(profile));
            }
        }
        Ok(cfg)
    }

    pub fn build_potential(&self) -> Result<Potential, CliError> {
        let family = self.potential.family.trim();
        if family == "ginibre" {
            return Ok(Potential::ginibre());
        }
        if let Some(p) = family.strip_prefix("power(").and_then(|s| s.strip_suffix(')')) {
            let p: u32 = p
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("invalid power exponent in '{family}'")))?;
            return Ok(Potential::radial_power(p)?);
        }
        if family == "custom" {
            let path = self
                .potential
                .profile
                .as_ref()
                .ok_or_else(|| CliError::Config("potential.profile is required for the custom family".into()))?;
            let rho = self
                .potential
                .rho
                .ok_or_else(|| CliError::Config("potential.rho is required for the custom family".into()))?;
            let profile = RadialProfile::from_csv(path)?;
            return Ok(Potential::custom_radial(
                &self.potential.name,
                profile,
                rho,
                self.potential.working_radius,
            )?);
        }
        Err(CliError::Config(format!(
            "unknown potential family '{family}' (expected ginibre, power(p) or custom)"
        )))
    }

    pub fn droplet(&self, pot: &Potential) -> Result<Droplet, CliError> {
        Ok(Droplet::compute(pot, self.potential.tau)?)
    }

    /// `(m, n)` from `ensemble.n` and `ensemble.m`; `n = round(mτ)` unless both are given.
    pub fn ensemble(&self) -> Result<(f64, usize), CliError> {
        let tau = self.potential.tau;
        match (self.ensemble.n, self.ensemble.m) {
            (Some(n), Some(m)) => Ok((positive_m(m)?, checked_n(n)?)),
            (Some(n), None) => {
                let n = checked_n(n)?;
                Ok((n as f64 / tau, n))
            }
            (None, Some(m)) => {
                let m = positive_m(m)?;
                Ok((m, checked_n((m * tau).round() as i64)?))
            }
            (None, None) => Ok((64.0 / tau, 64)),
        }
    }

    /// `(m, n)` pairs for a list of `n`, with `m = n/τ`.
    pub fn ensemble_list(&self, list: &[i64]) -> Result<Vec<(f64, usize)>, CliError> {
        if list.is_empty() {
            return Err(CliError::Config("n list must not be empty".into()));
        }
        list.iter()
            .map(|&n| checked_n(n).map(|n| (n as f64 / self.potential.tau, n)))
            .collect()
    }

    pub fn sampler_config(&self, seed: u64) -> Result<SamplerConfig, CliError> {
        let cfg = SamplerConfig {
            master_seed: seed,
            burn_in_sweeps: self.sampler.burn_in,
            thin_stride: self.sampler.thin,
            proposal_scale: self.sampler.proposal_scale,
            rejection_envelope_margin: self.sampler.envelope_margin,
        };
        cfg.validate()?;
        if self.sampler.samples < 4 {
            return Err(CliError::Config("sampler.samples must be >= 4".into()));
        }
        if self.sampler.chains < 1 {
            return Err(CliError::Config("sampler.chains must be >= 1".into()));
        }
        Ok(cfg)
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("a master seed is required (set `seed` or pass --seed)".into()))
    }
}

fn checked_n(n: i64) -> Result<usize, CliError> {
    if n < 1 {
        return Err(CliError::Config("n must be ≥ 1".into()));
    }
    Ok(n as usize)
}

fn positive_m(m: f64) -> Result<f64, CliError> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(CliError::Config("m must be positive".into()));
    }
    Ok(m)
}

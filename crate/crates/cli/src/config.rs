//! Experiment configuration: the reference defaults merged with a user file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use imlab_core::nonlinearity::{gradient_presets, presets, CutoffGradient, CutoffNonlinearity};
use imlab_core::Grid;
use serde::{Deserialize, Serialize};

/// The reference file, also the source of every default.
pub const DEFAULTS: &str = include_str!("../imlab.defaults.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Roundtrip,
    KScaling,
    GapTable,
    BuildManifold,
    Tracking,
    Invariance,
    Equivalence,
    NeumannPipeline,
    UpsilonAudit,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::Roundtrip,
        Scenario::KScaling,
        Scenario::GapTable,
        Scenario::BuildManifold,
        Scenario::Tracking,
        Scenario::Invariance,
        Scenario::Equivalence,
        Scenario::NeumannPipeline,
        Scenario::UpsilonAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Roundtrip => "roundtrip",
            Scenario::KScaling => "k-scaling",
            Scenario::GapTable => "gap-table",
            Scenario::BuildManifold => "build-manifold",
            Scenario::Tracking => "tracking",
            Scenario::Invariance => "invariance",
            Scenario::Equivalence => "equivalence",
            Scenario::NeumannPipeline => "neumann-pipeline",
            Scenario::UpsilonAudit => "upsilon-audit",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|x| x.name() == s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(Scenario),
    Many(Vec<Scenario>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<Scenario> {
        match self {
            OneOrMany::One(s) => vec![*s],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "burgers-cutoff")]
    BurgersCutoff,
    #[serde(rename = "coupled-2d-system")]
    Coupled2d,
    #[serde(rename = "general-f(u,ux)")]
    GeneralGradient,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::BurgersCutoff => "burgers-cutoff",
            Preset::Coupled2d => "coupled-2d-system",
            Preset::GeneralGradient => "general-f(u,ux)",
        }
    }

    /// Component count fixed by the preset, if any.
    pub fn fixed_m(self) -> Option<usize> {
        match self {
            Preset::BurgersCutoff => Some(1),
            Preset::Coupled2d => Some(2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub preset: Preset,
    pub length: f64,
    pub m: Option<usize>,
    pub n_total: usize,
    pub dt: f64,
    pub k: Option<usize>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripConfig {
    pub fields: usize,
    pub radius: f64,
    pub max_mode: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KScalingConfig {
    pub n_total: usize,
    pub ks: Vec<usize>,
    pub samples: usize,
    pub radius: f64,
    pub slope_min: f64,
    pub slope_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapTableConfig {
    pub ks: Vec<usize>,
    pub n_max: usize,
    pub lipschitz_pairs: usize,
    pub radius: f64,
    pub arithmetic_n: usize,
    pub resolvent_levels: Vec<usize>,
    pub resolvent_iterations: usize,
    pub resolvent_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub absorb_runs: usize,
    pub absorb_time: f64,
    pub absorb_norm: f64,
    pub k_start: usize,
    pub lipschitz_pairs: usize,
    pub base_points: usize,
    pub tracking_runs: usize,
    pub tracking_time: f64,
    pub tracking_every: f64,
    pub dissipativity_runs: usize,
    pub dissipativity_time: f64,
    pub contraction_slack: f64,
    pub invariance_tol: f64,
    pub linear_modes: usize,
    pub linear_level: usize,
    pub linear_scale: f64,
    pub linear_perron_dt: f64,
    pub linear_invariance_tol: f64,
    pub linear_oracle_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub t_final: f64,
    pub norm: f64,
    pub radius: f64,
    pub max_deviation: f64,
    pub max_halving_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannConfig {
    pub drift_time: f64,
    pub drift_c: f64,
    pub absorb_time: f64,
    pub lipschitz_pairs: usize,
    pub base_points: usize,
    pub tracking_runs: usize,
    pub tracking_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpsilonConfig {
    pub pairs: usize,
    pub scale: f64,
    pub max_newton: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: OneOrMany,
    pub seed: u64,
    pub out: PathBuf,
    pub problem: Problem,
    pub roundtrip: RoundtripConfig,
    pub k_scaling: KScalingConfig,
    pub gap_table: GapTableConfig,
    pub manifold: ManifoldConfig,
    pub equivalence: EquivalenceConfig,
    pub neumann: NeumannConfig,
    pub upsilon: UpsilonConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Parses `text` on top of [`DEFAULTS`] and validates the result.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut table: toml::Table = DEFAULTS.parse().map_err(|e| ConfigError(format!("defaults: {e}")))?;
        let user: toml::Table = text.parse().map_err(|e| ConfigError(format!("config: {e}")))?;
        merge(&mut table, user);
        let cfg: ExperimentConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn defaults() -> Self {
        Self::from_toml("").expect("reference defaults are valid")
    }

    pub fn m(&self) -> usize {
        self.problem.preset.fixed_m().or(self.problem.m).unwrap_or(1)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.problem;
        let err = |s: String| Err(ConfigError(s));
        if !(p.length > 0.0) || !p.length.is_finite() {
            return err(format!("problem.length must be positive, got {}", p.length));
        }
        if !(p.dt > 0.0) || p.dt > 0.1 {
            return err(format!("problem.dt must lie in (0, 0.1], got {}", p.dt));
        }
        if p.n_total < 8 {
            return err(format!("problem.n_total must be at least 8, got {}", p.n_total));
        }
        if let (Some(fixed), Some(m)) = (p.preset.fixed_m(), p.m) {
            if fixed != m {
                return err(format!("preset {} has m = {fixed}, config asks for m = {m}", p.preset.name()));
            }
        }
        if p.m == Some(0) {
            return err("problem.m must be positive".into());
        }
        if let Some(k) = p.k {
            if k == 0 || k > p.n_total {
                return err(format!("problem.k = {k} outside 1..={}", p.n_total));
            }
        }
        if let Some(n) = p.n {
            if n == 0 || 2 * n >= p.n_total {
                return err(format!("problem.n = {n} outside 1..{}", p.n_total / 2));
            }
        }
        if self.roundtrip.max_mode == 0 || self.roundtrip.max_mode > p.n_total {
            return err(format!("roundtrip.max_mode outside 1..={}", p.n_total));
        }
        let ks = &self.k_scaling;
        if ks.ks.len() < 2 || ks.ks.iter().any(|&k| k == 0 || k > ks.n_total) {
            return err(format!("k_scaling.ks needs at least two values in 1..={}", ks.n_total));
        }
        if self.gap_table.ks.iter().any(|&k| k == 0 || k > p.n_total) {
            return err(format!("gap_table.ks outside 1..={}", p.n_total));
        }
        let m = &self.manifold;
        if m.linear_level == 0 || m.linear_level >= m.linear_modes {
            return err("manifold.linear_level must lie in 1..linear_modes".into());
        }
        if !(m.tracking_every >= p.dt) {
            return err("manifold.tracking_every must be at least problem.dt".into());
        }
        Ok(())
    }
}

/// Nonlinearity of a semilinear preset.
pub fn semilinear(preset: Preset, m: usize) -> Option<CutoffNonlinearity<f64>> {
    match preset {
        Preset::Zero => Some(presets::zero(m)),
        Preset::BurgersCutoff => Some(presets::burgers_cutoff()),
        Preset::Coupled2d => Some(presets::coupled_2d()),
        Preset::GeneralGradient => None,
    }
}

/// Gradient nonlinearity `f(u, ∂ₓu)` of a preset, if it has one.
pub fn gradient(preset: Preset, m: usize) -> Option<CutoffGradient<f64>> {
    match preset {
        Preset::Zero => Some(gradient_presets::zero(m)),
        Preset::GeneralGradient => Some(gradient_presets::general(m)),
        _ => None,
    }
}

pub fn grid(length: f64, n_total: usize) -> Result<Arc<Grid<f64>>, ConfigError> {
    Grid::new(n_total, length).map_err(|e| ConfigError(e.to_string()))
}

use std::path::Path;

use anyhow::{bail, Context, Result};
use confint::series::{SeriesPotential, SeriesTable, TruncationOrder};
use confint::variational::{LagrangianKind, ReferenceConfig, StepperConfig};
use confint::PhaseState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "particle-harmonic")]
    ParticleHarmonic,
    #[serde(rename = "particle-free")]
    ParticleFree,
}

impl Model {
    pub fn potential(self) -> SeriesPotential {
        match self {
            Model::ParticleHarmonic => SeriesPotential::Harmonic,
            Model::ParticleFree => SeriesPotential::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Cell600,
    Sphere5000,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    pub center: [f64; 4],
    pub radius: f64,
    pub shape: Shape,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0, 1.0, 1.0],
            radius: 0.01,
            shape: Shape::Cell600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeaConfig {
    pub base_h: f64,
    pub levels: usize,
}

impl Default for BeaConfig {
    fn default() -> Self {
        Self { base_h: 1e-2, levels: 8 }
    }
}

/// Columns for `plot`. An empty `y` plots every column except `x` and `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    pub x: String,
    pub y: Vec<String>,
    pub title: Option<String>,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self {
            x: "t".into(),
            y: Vec::new(),
            title: None,
        }
    }
}

/// Experiment description. Every field has a default, so `{}` is a valid
/// config: harmonic particle, kind M, `l = 2`, `h = 0.25` from `(0, 0, 1, 1)`
/// over 200 steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub kind: LagrangianKind,
    pub ell: u8,
    pub h: f64,
    pub steps: usize,
    pub initial: [f64; 4],
    pub cloud: Option<CloudConfig>,
    pub seed: u64,
    pub mc_samples: u64,
    /// Volume records are taken every `record_every` steps.
    pub record_every: usize,
    /// RK4 substeps per step of the reference flow.
    pub reference_substeps: usize,
    pub bea: BeaConfig,
    pub plot: PlotConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: Model::ParticleHarmonic,
            kind: LagrangianKind::M,
            ell: 2,
            h: 0.25,
            steps: 200,
            initial: [0.0, 0.0, 1.0, 1.0],
            cloud: None,
            seed: 7,
            mc_samples: 1_000_000,
            record_every: 4,
            reference_substeps: 1000,
            bea: BeaConfig::default(),
            plot: PlotConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        StepperConfig::new(self.h)?;
        TruncationOrder::new(self.ell)?;
        if !self.initial.iter().all(|v| v.is_finite()) {
            bail!("initial state must be finite");
        }
        if self.record_every == 0 {
            bail!("record_every must be >= 1");
        }
        if self.reference_substeps == 0 {
            bail!("reference_substeps must be >= 1");
        }
        if let Some(c) = &self.cloud {
            if !(c.radius > 0.0 && c.radius.is_finite()) || !c.center.iter().all(|v| v.is_finite()) {
                bail!("cloud needs a finite center and a positive radius");
            }
        }
        if !(self.bea.base_h > 0.0) {
            bail!("bea.base_h must be positive");
        }
        Ok(())
    }

    /// Single-line JSON with every field spelled out.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn table(&self) -> SeriesTable {
        SeriesTable::new(self.model.potential(), self.kind)
    }

    pub fn order(&self) -> TruncationOrder {
        TruncationOrder::new(self.ell).expect("validated")
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig::new(self.h).expect("validated")
    }

    pub fn reference(&self) -> ReferenceConfig {
        ReferenceConfig {
            substeps: self.reference_substeps,
        }
    }

    pub fn initial_state(&self) -> PhaseState {
        let [x, y, px, py] = self.initial;
        PhaseState::planar(x, y, px, py)
    }

    pub fn cloud_or_default(&self) -> CloudConfig {
        self.cloud.clone().unwrap_or_default()
    }
}

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use snls::experiments::RunConfig;
use snls::noise::NoiseKind;
use snls::schemes::SchemeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Single,
    Ensemble,
    RateFit,
    Table,
}

/// A recipe file: the run configuration plus what to do with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub run: RunConfig,
}

impl Recipe {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let recipe: Recipe = toml::from_str(text)?;
        recipe.run.validate()?;
        Ok(recipe)
    }

    /// The recipe with every default written out.
    pub fn echo(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Mec,
    Cn,
    Le,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Mec => SchemeKind::Mec,
            SchemeArg::Cn => SchemeKind::Cn,
            SchemeArg::Le => SchemeKind::Le,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Det,
    Add,
    Mult,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Det => NoiseKind::Deterministic,
            NoiseArg::Add => NoiseKind::Additive,
            NoiseArg::Mult => NoiseKind::Multiplicative,
        }
    }
}

/// Command-line settings that take precedence over the recipe.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Base seed of the noise streams
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record diagnostics every K steps
    #[arg(long, value_name = "K")]
    pub stride: Option<u64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Noise strength
    #[arg(long, value_name = "F")]
    pub eps: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.noise.seed = seed;
        }
        if let Some(stride) = self.stride {
            cfg.stride = stride;
        }
        if let Some(scheme) = self.scheme {
            cfg.scheme = scheme.into();
        }
        if let Some(noise) = self.noise {
            cfg.noise.kind = noise.into();
        }
        if let Some(eps) = self.eps {
            cfg.noise.eps = eps;
        }
        cfg.validate()?;
        Ok(())
    }
}

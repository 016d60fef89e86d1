//! Run configuration: TOML schema, validation, dataset loading and
//! seeded data generation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::Deserialize;

use laplace_audit::certificates::BoundTarget;
use laplace_audit::model::{
    gen_exponential, gen_logistic, gen_weibull, logistic_gaussian_model, logistic_t_model,
    poisson_gamma_model, weibull_invgamma_model, ModelDescriptor,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for data generation and Monte Carlo ground truth. Mandatory
    /// whenever either is reachable.
    pub seed: Option<u64>,
    pub model: ModelConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    PoissonGamma { alpha: f64, beta: f64 },
    WeibullInverseGamma { k: f64, alpha: f64, beta: f64 },
    LogisticT { d: usize, nu: f64 },
    LogisticGaussian { d: usize },
}

impl ModelConfig {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelConfig::PoissonGamma { .. } => "poisson-gamma",
            ModelConfig::WeibullInverseGamma { .. } => "weibull-inverse-gamma",
            ModelConfig::LogisticT { .. } => "logistic-t",
            ModelConfig::LogisticGaussian { .. } => "logistic-gaussian",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ModelConfig::LogisticT { d, .. } | ModelConfig::LogisticGaussian { d } => *d,
            _ => 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Delimiter-separated numeric table. Scalar families: one value per
    /// row. Logistic: the response followed by the covariates.
    pub path: Option<PathBuf>,
    /// Seeded generator with the prefix property: growing `n` extends the
    /// stream rather than resampling it.
    pub generate: Option<GenerateConfig>,
    /// Sample size when the dataset is generated (audit / oracle-compare).
    pub n: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GenerateConfig {
    Exponential { rate: f64 },
    Weibull { k: f64, scale: f64 },
    Logistic { theta_star: Vec<f64> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// "map", "mle" or "both" (default "map").
    pub centric: Option<String>,
    /// "tv", "w1", "cov" or "all" (default "all").
    pub bounds: Option<String>,
    /// "auto" (default) or `{ delta = ..., delta_bar = ... }`.
    pub radius: Option<RadiusPolicy>,
    /// Sample sizes for `sweep`; must be strictly increasing.
    pub n_grid: Option<Vec<usize>>,
    /// Inclusive dimension range `[lo, hi]` for `min-n`.
    pub d_range: Option<[usize; 2]>,
    /// Importance-sampling budget for multivariate ground truth.
    pub samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum RadiusPolicy {
    Named(String),
    Fixed { delta: f64, delta_bar: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentricChoice {
    Map,
    Mle,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundChoice {
    Tv,
    W1,
    Cov,
    All,
}

impl BoundChoice {
    /// Which bound the automatic radius search minimises.
    pub fn target(self) -> BoundTarget {
        match self {
            BoundChoice::W1 => BoundTarget::W1,
            BoundChoice::Cov => BoundTarget::Cov,
            BoundChoice::Tv | BoundChoice::All => BoundTarget::Tv,
        }
    }
}

/// Fully validated configuration with CLI overrides applied.
pub struct Resolved {
    pub config: RunConfig,
    pub seed: u64,
    pub centric: CentricChoice,
    pub bounds: BoundChoice,
}

pub fn load(path: &Path, seed: Option<u64>, centric: Option<&str>, bounds: Option<&str>) -> Result<Resolved> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: RunConfig = toml::from_str(&text).context("cannot parse config")?;

    if config.data.path.is_some() == config.data.generate.is_some() {
        bail!("config must set exactly one of data.path and data.generate");
    }
    if let Some(grid) = &config.run.n_grid {
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            bail!("run.n_grid must be strictly increasing");
        }
    }
    if let Some(RadiusPolicy::Named(name)) = &config.run.radius {
        if name != "auto" {
            bail!("run.radius must be \"auto\" or a table with delta / delta_bar");
        }
    }
    if let Some(RadiusPolicy::Fixed { delta, delta_bar }) = &config.run.radius {
        if !(*delta > 0.0) || delta_bar.is_some_and(|v| !(v > 0.0)) {
            bail!("fixed radii must be positive");
        }
    }
    match &config.data.generate {
        Some(GenerateConfig::Exponential { .. }) => {
            if !matches!(config.model, ModelConfig::PoissonGamma { .. }) {
                bail!("exponential generator pairs with the poisson-gamma family");
            }
        }
        Some(GenerateConfig::Weibull { .. }) => {
            if !matches!(config.model, ModelConfig::WeibullInverseGamma { .. }) {
                bail!("weibull generator pairs with the weibull-inverse-gamma family");
            }
        }
        Some(GenerateConfig::Logistic { theta_star }) => {
            if theta_star.is_empty() {
                bail!("logistic generator needs a nonempty theta_star");
            }
            if !matches!(
                config.model,
                ModelConfig::LogisticT { .. } | ModelConfig::LogisticGaussian { .. }
            ) {
                bail!("logistic generator pairs with a logistic family");
            }
        }
        None => {}
    }

    let seed = seed.or(config.seed);
    let monte_carlo_reachable = config.data.generate.is_some() || config.model.dimension() > 1;
    let seed = match seed {
        Some(s) => s,
        None if monte_carlo_reachable => {
            bail!("a seed is required when data are generated or ground truth is sampled")
        }
        None => 0,
    };

    let centric = match centric.or(config.run.centric.as_deref()).unwrap_or("map") {
        "map" => CentricChoice::Map,
        "mle" => CentricChoice::Mle,
        "both" => CentricChoice::Both,
        other => bail!("unknown centring convention {other:?} (expected map, mle or both)"),
    };
    let bounds = match bounds.or(config.run.bounds.as_deref()).unwrap_or("all") {
        "tv" => BoundChoice::Tv,
        "w1" => BoundChoice::W1,
        "cov" => BoundChoice::Cov,
        "all" => BoundChoice::All,
        other => bail!("unknown bound selection {other:?} (expected tv, w1, cov or all)"),
    };

    Ok(Resolved { config, seed, centric, bounds })
}

/// Parsed dataset: scalar observations or a logistic design.
pub enum Dataset {
    Scalar(Vec<f64>),
    Logistic { x: Vec<Vec<f64>>, y: Vec<f64> },
}

pub fn load_dataset(path: &Path, model: &ModelConfig) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read dataset {}", path.display()))?;
    let d = model.dimension();
    let logistic =
        matches!(model, ModelConfig::LogisticT { .. } | ModelConfig::LogisticGaussian { .. });
    let mut scalars = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Result<Vec<f64>> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .with_context(|| format!("dataset row {row}: cannot parse {f:?} as a number"))
            })
            .collect();
        let fields = fields?;
        if !logistic {
            if fields.len() != 1 {
                bail!("dataset row {row}: expected 1 value, found {}", fields.len());
            }
            scalars.push(fields[0]);
        } else {
            if fields.len() != d + 1 {
                bail!("dataset row {row}: expected response + {d} covariates, found {} values", fields.len());
            }
            ys.push(fields[0]);
            xs.push(fields[1..].to_vec());
        }
    }
    if logistic {
        Ok(Dataset::Logistic { x: xs, y: ys })
    } else {
        Ok(Dataset::Scalar(scalars))
    }
}

/// `theta_star` adjusted to dimension `d`: truncated, or padded by
/// repeating its last entry (used by min-n dimension sweeps).
fn theta_star_for(theta_star: &[f64], d: usize) -> Vec<f64> {
    let last = *theta_star.last().unwrap_or(&1.0);
    (0..d).map(|i| theta_star.get(i).copied().unwrap_or(last)).collect()
}

/// Generate the first `n` observations of the seeded data stream and
/// build the model, optionally overriding the configured dimension.
pub fn build_generated_model(
    resolved: &Resolved,
    n: usize,
    d_override: Option<usize>,
) -> Result<ModelDescriptor> {
    let gen = resolved
        .config
        .data
        .generate
        .as_ref()
        .context("this command regenerates data per n and needs data.generate")?;
    let seed = resolved.seed;
    let dataset = match gen {
        GenerateConfig::Exponential { rate } => Dataset::Scalar(gen_exponential(n, *rate, seed)),
        GenerateConfig::Weibull { k, scale } => Dataset::Scalar(gen_weibull(n, *k, *scale, seed)),
        GenerateConfig::Logistic { theta_star } => {
            let d = d_override.unwrap_or(resolved.config.model.dimension());
            let (x, y) = gen_logistic(n, d, &theta_star_for(theta_star, d), seed);
            Dataset::Logistic { x, y }
        }
    };
    build_model(&resolved.config.model, &dataset, d_override)
}

/// Load the configured dataset (from disk or the generator) and build
/// the model.
pub fn build_configured_model(resolved: &Resolved) -> Result<ModelDescriptor> {
    if let Some(path) = &resolved.config.data.path {
        let dataset = load_dataset(path, &resolved.config.model)?;
        build_model(&resolved.config.model, &dataset, None)
    } else {
        let n = resolved.config.data.n.context("data.n is required with a generated dataset")?;
        build_generated_model(resolved, n, None)
    }
}

pub fn build_model(
    model: &ModelConfig,
    dataset: &Dataset,
    d_override: Option<usize>,
) -> Result<ModelDescriptor> {
    let descriptor = match (model, dataset) {
        (ModelConfig::PoissonGamma { alpha, beta }, Dataset::Scalar(data)) => {
            poisson_gamma_model(data, *alpha, *beta)?
        }
        (ModelConfig::WeibullInverseGamma { k, alpha, beta }, Dataset::Scalar(data)) => {
            weibull_invgamma_model(data, *k, *alpha, *beta)?
        }
        (ModelConfig::LogisticT { d, nu }, Dataset::Logistic { x, y }) => {
            let d = d_override.unwrap_or(*d);
            logistic_t_model(x, y, &vec![0.0; d], &DMatrix::identity(d, d), *nu)?
        }
        (ModelConfig::LogisticGaussian { .. }, Dataset::Logistic { x, y }) => {
            logistic_gaussian_model(x, y)?
        }
        _ => bail!("dataset shape does not match the model family"),
    };
    Ok(descriptor)
}

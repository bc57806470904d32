//! TOML configuration: corpus file locations, training parameters, and
//! service settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, GEO_SOURCES};
use crate::dtree::TreeParams;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::pipeline::TrainingConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub corpus: CorpusPaths,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub service: ServiceSection,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    /// Directory holding one `<source>.csv` per configured source; a
    /// missing file leaves that source's feature UNKNOWN everywhere.
    pub snapshot_dir: PathBuf,
    pub as_data: PathBuf,
    pub ground_truth: PathBuf,
    pub aliases: Option<PathBuf>,
    pub boundaries: PathBuf,
    pub measurements: Option<PathBuf>,
    pub continents: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    /// 0 selects marginal-gain stopping instead of a fixed member count.
    pub member_count: usize,
    pub gain_threshold: f64,
    pub instance_grid: Vec<usize>,
    pub equal_candidates: usize,
    pub convergence_fraction: f64,
    pub iteration_cap: usize,
    /// 0 means unbounded depth.
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub cone_split: bool,
    pub slack_km: f64,
    pub densify_km: f64,
    pub refresh_period_days: u32,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let defaults = TrainingConfig::default();
        TrainingSection {
            member_count: defaults.member_count.unwrap_or(0),
            gain_threshold: defaults.gain_threshold,
            instance_grid: defaults.instance_grid,
            equal_candidates: defaults.equal_candidates,
            convergence_fraction: defaults.convergence_fraction,
            iteration_cap: defaults.iteration_cap,
            max_depth: 0,
            min_samples_split: 2,
            cone_split: false,
            slack_km: defaults.slack_km,
            densify_km: corpus::boundary::DENSIFY_SPACING_KM,
            refresh_period_days: defaults.refresh_period_days,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceSection {
    pub port: u16,
    pub cache_ttl_secs: u64,
    pub workers: usize,
    pub detail_capacity: usize,
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection {
            port: 8080,
            cache_ttl_secs: 24 * 60 * 60,
            workers: 8,
            detail_capacity: 10_000,
        }
    }
}

impl AppConfig {
    /// Parse a config file; relative corpus paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<AppConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut config: AppConfig =
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.corpus.resolve_against(base);
        Ok(config)
    }

    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.training;
        TrainingConfig {
            seed: self.seed,
            tree: TreeParams {
                max_depth: (t.max_depth > 0).then_some(t.max_depth),
                min_samples_split: t.min_samples_split,
            },
            features: FeatureConfig {
                cone_split: t.cone_split,
            },
            member_count: (t.member_count > 0).then_some(t.member_count),
            gain_threshold: t.gain_threshold,
            instance_grid: t.instance_grid.clone(),
            equal_candidates: t.equal_candidates,
            convergence_fraction: t.convergence_fraction,
            iteration_cap: t.iteration_cap,
            slack_km: t.slack_km,
            refresh_period_days: t.refresh_period_days,
        }
    }

    /// Service port, overridable through `PASSPORT_PORT`.
    pub fn port(&self) -> u16 {
        std::env::var("PASSPORT_PORT")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(self.service.port)
    }
}

impl CorpusPaths {
    fn resolve_against(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.snapshot_dir);
        fix(&mut self.as_data);
        fix(&mut self.ground_truth);
        if let Some(p) = &mut self.aliases {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        fix(&mut self.boundaries);
        if let Some(p) = &mut self.measurements {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(p) = &mut self.continents {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }
}

/// Load the full corpus named by a configuration.
pub fn load_corpus(config: &AppConfig) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for source in GEO_SOURCES {
        let path = config.corpus.snapshot_dir.join(format!("{source}.csv"));
        if path.exists() {
            corpus
                .snapshots
                .insert(source.to_string(), corpus::snapshot::load_snapshot(&path, source)?);
        }
    }
    corpus.as_data = corpus::asdata::load_as_data(&config.corpus.as_data)?;
    corpus.ground_truth = corpus::ground_truth::load_ground_truth(&config.corpus.ground_truth)?;
    if let Some(path) = &config.corpus.aliases {
        corpus.aliases = corpus::alias::load_aliases(path)?;
    }
    corpus.boundaries =
        corpus::boundary::load_boundaries(&config.corpus.boundaries, config.training.densify_km)?;
    if let Some(path) = &config.corpus.measurements {
        corpus.measurements = corpus::measurement::load_measurements(path)?;
    }
    if let Some(path) = &config.corpus.continents {
        corpus.continents = corpus::load_continents(path)?;
    }
    Ok(corpus)
}

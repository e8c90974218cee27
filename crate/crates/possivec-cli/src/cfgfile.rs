//! Optional TOML configuration. Resolution order everywhere:
//! explicit flag, then config file value, then built-in default.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub gen: GenSection,
    #[serde(default)]
    pub vectorize: VectorizeSection,
    #[serde(default)]
    pub hmm: HmmSection,
    #[serde(default)]
    pub crf: CrfSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSection {
    pub per_task: Option<usize>,
    pub duration_min: Option<u32>,
    pub duration_max: Option<u32>,
    pub ds: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorizeSection {
    pub omega: Option<f64>,
    pub fuzzifier: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmSection {
    pub n_states: Option<usize>,
    pub restarts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrfSection {
    pub sigma2: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}

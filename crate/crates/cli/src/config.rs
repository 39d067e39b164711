//! The JSON run configuration shared by `train` and `eval`.
//!
//! ```json
//! {
//!   "tweets": "tweets.jsonl",
//!   "timelines": "timelines.jsonl",
//!   "scheme": "fused-binary",
//!   "mode": "timeline",
//!   "split": "by-user",
//!   "k": 10,
//!   "seed": 7,
//!   "out_dir": "out",
//!   "recurrent": { "embed_dim": 200, "epochs": 10 },
//!   "gbdt": { "n_rounds": 100 }
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.
//! `scheme` is a builtin scheme name or `{"name": ..., "classes": [...]}`;
//! when omitted, classes are taken from the tweet file in order of first use.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use userprior::corpus::{infer_scheme, load_dataset, load_timelines, Dataset, LabelScheme};
use userprior::eval::ExperimentConfig;
use userprior::profile::ProfileMode;
use userprior::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeSpec {
    Builtin(String),
    Custom { name: String, classes: Vec<String> },
}

impl SchemeSpec {
    pub fn resolve(&self) -> Result<LabelScheme> {
        match self {
            SchemeSpec::Builtin(name) => LabelScheme::builtin(name),
            SchemeSpec::Custom { name, classes } => LabelScheme::new(name.clone(), classes.clone()),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tweets: PathBuf,
    #[serde(default)]
    pub timelines: Option<PathBuf>,
    #[serde(default)]
    pub scheme: Option<SchemeSpec>,
    pub mode: ProfileMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Also write the training feature matrix when running `train`.
    #[serde(default)]
    pub export_features: bool,
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    /// Parses `path` and makes every relative path absolute against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.tweets);
        resolve(&mut cfg.out_dir);
        if let Some(p) = cfg.timelines.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.experiment.embeddings.as_mut() {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.experiment.k)));
        }
        let mut inputs = vec![&self.tweets];
        inputs.extend(self.timelines.as_ref());
        inputs.extend(self.experiment.embeddings.as_ref());
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let scheme = match &self.scheme {
            Some(spec) => spec.resolve()?,
            None => infer_scheme(&self.tweets, "inferred")?,
        };
        let dataset = load_dataset(&self.tweets, &scheme)?;
        Ok(match &self.timelines {
            Some(p) => dataset.with_timelines(load_timelines(p)?),
            None => dataset,
        })
    }
}

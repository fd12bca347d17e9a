//! Experiment configuration, read from a TOML file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. The config hash is the SHA-256 of the config re-serialized with all
//! defaults filled in, so two files that differ only in formatting or in
//! spelling out a default hash the same. The output directory is not part of
//! the hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expand::DEFAULT_MAX_ENTRIES;
use crate::metapath::{validate_metapath, MetaPath, DEFAULT_MAX_STEPS};
use crate::pruning::{PruningPolicy, DEFAULT_THRESHOLD};
use crate::relation::GenerationMethod;
use crate::schema::NetworkSchema;
use crate::walk::{SampleBudget, DEFAULT_MAX_RETRIES, DEFAULT_WALKS_PER_START};

pub const ALGORITHMS: [&str; 7] = ["dmf", "dmf2", "dmf3", "dmf-ig", "p3", "rp3", "hl"];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub metapaths: MetaPathConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub pruning: PruningConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub schema: PathBuf,
    /// Name of the weighted user-item edge type that is split and predicted.
    pub rating: String,
    /// P-core threshold on the rating edges; 0 disables filtering.
    #[serde(default)]
    pub kcore: usize,
    /// Edge list file per edge type.
    pub edges: BTreeMap<String, PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Holdout,
    Kfold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub mode: SplitMode,
    pub folds: usize,
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            mode: SplitMode::Kfold,
            folds: 5,
            train_fraction: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaPathConfig {
    /// Meta-path literals such as `um,>mg`. Two-step paths feed `dmf2`,
    /// two- and three-step paths feed `dmf3` and `dmf-ig`.
    pub paths: Vec<String>,
    /// Whether every non-rating edge type joins the models as a direct
    /// relation.
    pub include_direct: bool,
}

impl Default for MetaPathConfig {
    fn default() -> Self {
        MetaPathConfig {
            paths: Vec::new(),
            include_direct: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub method: String,
    pub walks_per_start: usize,
    pub max_retries: usize,
    pub max_entries: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            method: "sampled".into(),
            walks_per_start: DEFAULT_WALKS_PER_START,
            max_retries: DEFAULT_MAX_RETRIES,
            max_entries: DEFAULT_MAX_ENTRIES,
        }
    }
}

impl GenerationConfig {
    pub fn method(&self) -> Result<GenerationMethod> {
        self.method.parse().map_err(|_| cfg_err(format!("unknown generation method `{}`", self.method)))
    }

    pub fn budget(&self) -> Result<SampleBudget> {
        SampleBudget::new(self.walks_per_start, self.max_retries).map_err(|e| cfg_err(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruningConfig {
    /// `threshold` or `keep_top`.
    pub policy: String,
    pub threshold: f64,
    pub keep_top: usize,
}

impl Default for PruningConfig {
    fn default() -> Self {
        PruningConfig {
            policy: "threshold".into(),
            threshold: DEFAULT_THRESHOLD,
            keep_top: 3,
        }
    }
}

impl PruningConfig {
    pub fn policy(&self) -> Result<PruningPolicy> {
        let p = match self.policy.as_str() {
            "threshold" => PruningPolicy::Threshold(self.threshold),
            "keep_top" => PruningPolicy::KeepTop(self.keep_top),
            other => return Err(cfg_err(format!("unknown pruning policy `{other}`"))),
        };
        p.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub algos: Vec<String>,
    pub dim: usize,
    pub lr: f64,
    pub reg: f64,
    pub epochs: usize,
    pub neg_samples: usize,
    pub default_weight: f64,
    pub weights: BTreeMap<String, f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let hp = crate::dmf::Hyperparams::default();
        ModelConfig {
            algos: ALGORITHMS.iter().map(|s| s.to_string()).collect(),
            dim: hp.dim,
            lr: hp.lr,
            reg: hp.reg,
            epochs: hp.epochs,
            neg_samples: hp.neg_samples,
            default_weight: hp.default_weight,
            weights: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// Grid-search parameters on a validation split of each training fold.
    pub tune: bool,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Share of a fold's training ratings kept for fitting while tuning.
    pub validation_train_fraction: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            tune: true,
            alpha: 1.0,
            beta: 0.5,
            lambda: 0.5,
            validation_train_fraction: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub max_k: usize,
    /// When set, satisfaction-thresholded metrics are reported too.
    pub threshold: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_k: crate::eval::DEFAULT_MAX_K,
            threshold: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Also time full expansion against sampling for every meta-path.
    pub bench: bool,
    pub bench_reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bench: false,
            bench_reps: 3,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        ExperimentConfig::from_toml(&text, &base).map_err(|e| cfg_err(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn config_hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Header line written at the top of every artifact.
    pub fn stamp(&self) -> String {
        format!("config_hash={} seed={}", self.config_hash(), self.seed)
    }

    pub fn schema(&self) -> Result<NetworkSchema> {
        crate::io::read_schema(&self.resolve(&self.data.schema)).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn edge_files(&self) -> Vec<(String, PathBuf)> {
        self.data
            .edges
            .iter()
            .map(|(et, p)| (et.clone(), self.resolve(p)))
            .collect()
    }

    pub fn metapaths(&self, schema: &NetworkSchema) -> Result<Vec<MetaPath>> {
        let mut out: Vec<MetaPath> = Vec::new();
        for lit in &self.metapaths.paths {
            let mp = MetaPath::parse(lit, schema).map_err(|e| cfg_err(format!("meta-path `{lit}`: {e}")))?;
            validate_metapath(&mp, schema, DEFAULT_MAX_STEPS).map_err(|e| cfg_err(format!("meta-path `{lit}`: {e}")))?;
            if out.iter().any(|m| m.label() == mp.label()) {
                return Err(cfg_err(format!("two meta-paths share the label `{}`", mp.label())));
            }
            out.push(mp);
        }
        Ok(out)
    }

    pub fn hyperparams(&self) -> crate::dmf::Hyperparams {
        let m = &self.model;
        crate::dmf::Hyperparams {
            dim: m.dim,
            lr: m.lr,
            reg: m.reg,
            epochs: m.epochs,
            neg_samples: m.neg_samples,
            relation_weights: m.weights.clone(),
            default_weight: m.default_weight,
            seed: self.seed,
        }
    }

    /// Checks everything that can be checked before any stage runs.
    pub fn validate(&self) -> Result<NetworkSchema> {
        let schema = self.schema()?;
        let rating = schema
            .edge_type(&self.data.rating)
            .map_err(|_| cfg_err(format!("rating edge type `{}` not in schema", self.data.rating)))?;
        if !rating.weighted() {
            return Err(cfg_err(format!("rating edge type `{}` must be weighted", rating.name)));
        }
        if !self.data.edges.contains_key(&self.data.rating) {
            return Err(cfg_err("no edge file for the rating edge type"));
        }
        for (et, p) in self.edge_files() {
            schema.edge_type(&et).map_err(|_| cfg_err(format!("edge file given for unknown edge type `{et}`")))?;
            if !p.is_file() {
                return Err(cfg_err(format!("edge file {} does not exist", p.display())));
            }
        }
        let s = &self.split;
        match s.mode {
            SplitMode::Holdout if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) => {
                return Err(cfg_err("split.train_fraction must lie in (0, 1)"))
            }
            SplitMode::Kfold if s.folds < 2 => return Err(cfg_err("split.folds must be at least 2")),
            _ => {}
        }
        self.metapaths(&schema)?;
        self.generation.method()?;
        self.generation.budget()?;
        self.pruning.policy()?;
        for a in &self.model.algos {
            if !ALGORITHMS.contains(&a.as_str()) {
                return Err(cfg_err(format!("unknown algorithm `{a}`; expected one of {}", ALGORITHMS.join(", "))));
            }
        }
        self.hyperparams()
            .validate(&self.data.rating)
            .map_err(|e| cfg_err(e.to_string()))?;
        let b = &self.baseline;
        if !(b.validation_train_fraction > 0.0 && b.validation_train_fraction < 1.0) {
            return Err(cfg_err("baseline.validation_train_fraction must lie in (0, 1)"));
        }
        if self.eval.max_k == 0 {
            return Err(cfg_err("eval.max_k must be at least 1"));
        }
        if self.run.bench_reps < 3 {
            return Err(cfg_err("run.bench_reps must be at least 3"));
        }
        Ok(schema)
    }
}

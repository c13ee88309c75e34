//! Run configuration: one JSON file, every field optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arch_graph::{SimilarityMode, DEFAULT_NODE_CAP};
use crate::error::{Error, Result};
use crate::evaluator::{CostModel, GroundTruth, GroundTruthParams, SyntheticSupernet};
use crate::gcn::GcnConfig;
use crate::search::SearchConfig;
use crate::search_space::{Architecture, SearchSpaceSpec, DEFAULT_CHOICE_LABELS};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    pub num_layers: usize,
    pub choices_per_layer: usize,
    /// Defaults to kernel/expansion labels when there are six choices.
    pub choice_labels: Option<Vec<String>>,
    /// Starting architecture in text form.
    pub initial_arch: Option<String>,
}

impl Default for SpaceSection {
    fn default() -> Self {
        Self {
            num_layers: 19,
            choices_per_layer: 6,
            choice_labels: None,
            initial_arch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub m_samples: usize,
    pub train_split: usize,
    pub top_pool: usize,
    pub k_preserve: usize,
    pub similarity: SimilarityMode,
    pub gcn: GcnConfig,
    pub constraint_budget: Option<u64>,
    pub advance_checkpoint: bool,
    pub node_cap: usize,
    pub record_timings: bool,
    pub dump_predictions: bool,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self {
            m_samples: d.m_samples,
            train_split: d.train_split,
            top_pool: d.top_pool,
            k_preserve: d.k_preserve,
            similarity: d.similarity,
            gcn: d.gcn,
            constraint_budget: d.constraint_budget,
            advance_checkpoint: d.advance_checkpoint,
            node_cap: DEFAULT_NODE_CAP,
            record_timings: d.record_timings,
            dump_predictions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSection {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub base: f64,
    pub utility_spread: f64,
    pub pair_fraction: f64,
    pub truth_seed: Option<u64>,
    pub checkpoint_seed: Option<u64>,
    /// Explicit `L x O` utilities; replaces the random draw.
    pub cell_utility: Option<Vec<Vec<f64>>>,
}

impl Default for SimulatorSection {
    fn default() -> Self {
        Self {
            a: 0.95,
            b: 0.0025,
            sigma: 0.01,
            base: 0.85,
            utility_spread: 0.004,
            pair_fraction: 0.1,
            truth_seed: None,
            checkpoint_seed: None,
            cell_utility: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSection {
    /// `"bundled"`.
    Named(String),
    Table(CostModel),
}

impl Default for CostSection {
    fn default() -> Self {
        CostSection::Named("bundled".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub search_space: SpaceSection,
    pub plan: Vec<usize>,
    pub search: SearchSection,
    pub simulator: SimulatorSection,
    pub cost_model: CostSection,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            search_space: SpaceSection::default(),
            plan: SearchConfig::default().plan,
            search: SearchSection::default(),
            simulator: SimulatorSection::default(),
            cost_model: CostSection::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn check(ok: bool, path: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, message))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "$".to_string() } else { format!("$.{path}") };
            Error::config(path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.search_space;
        check(s.num_layers >= 1, "$.search_space.num_layers", "must be at least 1")?;
        check(s.choices_per_layer >= 2, "$.search_space.choices_per_layer", "must be at least 2")?;
        if let Some(labels) = &s.choice_labels {
            check(
                labels.len() == s.choices_per_layer,
                "$.search_space.choice_labels",
                format!("expected {} labels, got {}", s.choices_per_layer, labels.len()),
            )?;
        }
        let spec = self.spec().map_err(|e| Error::config("$.search_space", e.to_string()))?;
        if let Some(text) = &s.initial_arch {
            Architecture::parse(text, &spec).map_err(|e| Error::config("$.search_space.initial_arch", e.to_string()))?;
        }
        let sum: usize = self.plan.iter().sum();
        check(
            sum == s.num_layers && !self.plan.contains(&0),
            "$.plan",
            format!("segment sizes must be positive and sum to {}, got {:?}", s.num_layers, self.plan),
        )?;

        let q = &self.search;
        check(q.m_samples >= 2, "$.search.m_samples", "must be at least 2")?;
        check(
            q.train_split >= 1 && q.train_split < q.m_samples,
            "$.search.train_split",
            format!("must lie in [1, {})", q.m_samples),
        )?;
        check(q.k_preserve >= 1, "$.search.k_preserve", "must be at least 1")?;
        check(q.top_pool >= q.k_preserve, "$.search.top_pool", "must be at least k_preserve")?;
        q.similarity.validate().map_err(|e| Error::config("$.search.similarity", e.to_string()))?;
        q.gcn.validate().map_err(|e| Error::config("$.search.gcn", e.to_string()))?;

        let m = &self.simulator;
        check(m.a.is_finite() && m.a > 0.0, "$.simulator.a", "must be positive")?;
        check(m.b.is_finite(), "$.simulator.b", "must be finite")?;
        check(m.sigma.is_finite() && m.sigma >= 0.0, "$.simulator.sigma", "must be non-negative")?;
        check(m.utility_spread.is_finite() && m.utility_spread >= 0.0, "$.simulator.utility_spread", "must be non-negative")?;
        check(m.pair_fraction.is_finite() && m.pair_fraction >= 0.0, "$.simulator.pair_fraction", "must be non-negative")?;
        if let Some(u) = &m.cell_utility {
            check(
                u.len() == s.num_layers && u.iter().all(|r| r.len() == s.choices_per_layer),
                "$.simulator.cell_utility",
                format!("must be {} x {}", s.num_layers, s.choices_per_layer),
            )?;
        }
        self.cost_model(&spec)?;
        Ok(())
    }

    pub fn spec(&self) -> Result<SearchSpaceSpec> {
        let s = &self.search_space;
        let spec = SearchSpaceSpec::new(s.num_layers, s.choices_per_layer)?;
        match &s.choice_labels {
            Some(labels) => spec.with_labels(labels.clone()),
            None if s.choices_per_layer == DEFAULT_CHOICE_LABELS.len() => {
                spec.with_labels(DEFAULT_CHOICE_LABELS.iter().map(|l| l.to_string()).collect())
            }
            None => Ok(spec),
        }
    }

    pub fn cost_model(&self, spec: &SearchSpaceSpec) -> Result<CostModel> {
        match &self.cost_model {
            CostSection::Named(name) if name == "bundled" => Ok(CostModel::bundled(spec)),
            CostSection::Named(name) => Err(Error::config("$.cost_model", format!("unknown table {name:?}"))),
            CostSection::Table(t) => {
                t.validate(spec).map_err(|e| Error::config("$.cost_model", e.to_string()))?;
                Ok(t.clone())
            }
        }
    }

    pub fn search_config(&self) -> Result<SearchConfig> {
        let spec = self.spec()?;
        let q = &self.search;
        Ok(SearchConfig {
            m_samples: q.m_samples,
            train_split: q.train_split,
            top_pool: q.top_pool,
            k_preserve: q.k_preserve,
            plan: self.plan.clone(),
            similarity: q.similarity.clone(),
            gcn: q.gcn.clone(),
            seed: derive_seed(self.seed, "search", 0),
            constraint_budget: q.constraint_budget,
            advance_checkpoint: q.advance_checkpoint,
            node_cap: q.node_cap,
            record_timings: q.record_timings,
            initial: self
                .search_space
                .initial_arch
                .as_deref()
                .map(|t| Architecture::parse(t, &spec))
                .transpose()?,
        })
    }

    pub fn supernet(&self) -> Result<SyntheticSupernet> {
        let spec = self.spec()?;
        let m = &self.simulator;
        let truth_seed = m.truth_seed.unwrap_or_else(|| derive_seed(self.seed, "truth", 0));
        let mut params = GroundTruthParams::random(&spec, truth_seed, m.base, m.utility_spread, m.pair_fraction);
        if let Some(u) = &m.cell_utility {
            params.cell_utility = u.clone();
        }
        let checkpoint = m.checkpoint_seed.unwrap_or_else(|| derive_seed(self.seed, "checkpoint", 0));
        SyntheticSupernet::new(GroundTruth::new(params)?, m.a, m.b, m.sigma, checkpoint)
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(&RunConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        })?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_json(&text)
}

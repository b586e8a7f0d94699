// SPDX-License-Identifier: Apache-2.0

//! Graph attention classifier over embedded commit graphs: three
//! attention layers, mean+max pooling, and a one-hidden-layer MLP with a
//! sigmoid output. Gradients are computed by hand.

mod forward;
mod params;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbeddedGraph, DEFAULT_EMBED_DIM};

pub use forward::{backward, forward, Attn, ForwardPass, GraphInput};
pub use params::{HeadDoc, LayerParams, HeadParams, ModelParams, ParamsDoc};

/// Number of attention layers. Not configurable.
pub const LAYERS: usize = 3;
/// Width of an edge attribute row: two version flags, three edge kinds.
pub const EDGE_ATTR_DIM: usize = 5;
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad model configuration: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sample {0} has no label")]
    UnlabeledSample(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::BadConfig(_) => "BadConfig",
            ModelError::ShapeMismatch(_) => "ShapeMismatch",
            ModelError::UnlabeledSample(_) => "UnlabeledSample",
            ModelError::EmptyDataset => "EmptyDataset",
            ModelError::Checkpoint(_) => "BadCheckpoint",
            ModelError::Io(_) => "Io",
        }
    }
}

/// How attention sees the edge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    /// One attention pass over all edges, edge attributes in the score.
    #[default]
    Shared,
    /// Separate parameters and attention per edge kind (CDG, DDG, AST);
    /// the per-kind outputs are summed before the activation.
    PerEdgeType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub mlp_hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub threshold: f64,
    pub leaky_slope: f64,
    pub attention: AttentionMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: 64,
            heads: 4,
            mlp_hidden: 32,
            learning_rate: 0.01,
            epochs: 300,
            seed: 0,
            threshold: 0.5,
            leaky_slope: 0.2,
            attention: AttentionMode::Shared,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadConfig(m.to_string()));
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.heads == 0 || self.mlp_hidden == 0 {
            return bad("dimensions and head count must be positive");
        }
        if !self.hidden_dim.is_multiple_of(self.heads) {
            return bad("hidden_dim must be divisible by heads");
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad("learning_rate must be finite and non-negative");
        }
        if !self.leaky_slope.is_finite() || !self.threshold.is_finite() {
            return bad("leaky_slope and threshold must be finite");
        }
        Ok(())
    }

    pub(crate) fn relations(&self) -> usize {
        match self.attention {
            AttentionMode::Shared => 1,
            AttentionMode::PerEdgeType => 3,
        }
    }
}

pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams, ModelError> {
    ModelParams::init(cfg, seed)
}

/// Probability that the graph is a security fix.
pub fn predict(p: &ModelParams, g: &EmbeddedGraph, cfg: &ModelConfig) -> Result<f64, ModelError> {
    let input = GraphInput::new(g, cfg)?;
    Ok(forward(p, &input, cfg).probability)
}

/// Binary cross-entropy with the probability clamped to [1e-7, 1 − 1e-7].
pub fn loss(probability: f64, label: u8) -> f64 {
    let p = probability.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label != 0 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Derivative of [`loss`] with respect to the pre-sigmoid logit.
fn loss_grad_logit(probability: f64, label: u8) -> f64 {
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&probability) {
        return 0.0;
    }
    probability - f64::from(label.min(1))
}

/// Loss and parameter gradient for one labelled graph.
pub fn loss_and_grad(p: &ModelParams, input: &GraphInput, label: u8, cfg: &ModelConfig) -> (f64, ModelParams) {
    let fp = forward(p, input, cfg);
    let l = loss(fp.probability, label);
    let g = backward(p, input, cfg, &fp, loss_grad_logit(fp.probability, label));
    (l, g)
}

/// Full-batch gradient descent for `cfg.epochs` epochs. The history holds
/// the mean loss of each epoch, measured before that epoch's update.
pub fn train(params: &ModelParams, dataset: &[EmbeddedGraph], cfg: &ModelConfig) -> Result<(ModelParams, Vec<f64>), ModelError> {
    cfg.validate()?;
    let mut samples = Vec::with_capacity(dataset.len());
    for g in dataset {
        let label = g.label.ok_or_else(|| ModelError::UnlabeledSample(g.commit_id.clone()))?;
        samples.push((GraphInput::new(g, cfg)?, label));
    }
    let mut p = params.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok((p, history));
    }
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let n = samples.len() as f64;
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        let mut grad = ModelParams::zeros(cfg);
        for (input, label) in &samples {
            let (l, g) = loss_and_grad(&p, input, *label, cfg);
            total += l;
            grad.axpy(1.0, &g);
        }
        p.axpy(-cfg.learning_rate / n, &grad);
        history.push(total / n);
        log::debug!("epoch {epoch}: mean loss {:.6}", total / n);
    }
    Ok((p, history))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictedLabel {
    Security,
    NonSecurity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub commit_id: String,
    pub probability: f64,
    pub label: PredictedLabel,
}

/// Label is `security` iff `probability >= threshold`.
pub fn label_for(probability: f64, threshold: f64) -> PredictedLabel {
    if probability >= threshold {
        PredictedLabel::Security
    } else {
        PredictedLabel::NonSecurity
    }
}

pub fn classify(p: &ModelParams, g: &EmbeddedGraph, cfg: &ModelConfig, threshold: f64) -> Result<Prediction, ModelError> {
    let probability = predict(p, g, cfg)?;
    Ok(Prediction {
        commit_id: g.commit_id.clone(),
        probability,
        label: label_for(probability, threshold),
    })
}

/// Serialized model: configuration, parameters, seed and loss history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub params: ParamsDoc,
    pub seed: u64,
    pub training_history: Vec<f64>,
}

impl Checkpoint {
    pub fn new(config: &ModelConfig, params: &ModelParams, history: &[f64]) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: config.clone(),
            params: params.to_doc(),
            seed: config.seed,
            training_history: history.to_vec(),
        }
    }

    /// Configuration and validated parameters.
    pub fn into_model(self) -> Result<(ModelConfig, ModelParams), ModelError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(ModelError::Checkpoint(format!("unsupported format_version {}", self.format_version)));
        }
        self.config.validate()?;
        let params = ModelParams::from_doc(&self.config, &self.params)?;
        Ok((self.config, params))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

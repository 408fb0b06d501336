//! Enrichment predictors mapping a product to `(R_target, R_NTC, p_adjust)`.
//!
//! Two interchangeable models share the same head structure: a
//! building-block embedding model and a message-passing graph network.

pub mod checkpoint;
mod embed;
mod heads;
mod mpnn;

use std::sync::Arc;

use crate::diffengine::{Matrix, NodeId, ParamSet, Tape};
use crate::library::ProductKind;
use crate::molgraph::{featurize, MolGraph, MolGraphError, BOND_FEATURES};

pub use checkpoint::Checkpoint;
pub use embed::{EmbedConfig, EmbedPredictor};
pub use mpnn::{MpnnConfig, MpnnPredictor};

#[derive(Debug, thiserror::Error)]
pub enum PredictorError {
    #[error("unknown building block `{0}`")]
    UnknownBuildingBlock(String),
    #[error("product has no assembled graph; the graph predictor needs one")]
    MissingGraph,
    #[error(transparent)]
    Graph(#[from] MolGraphError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// One product's predicted enrichments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorOutput {
    pub r_target: f64,
    pub r_ntc: f64,
    /// Present only when the adjustment head is enabled.
    pub p_adjust: Option<f64>,
}

/// Featurized graph with both directions of every bond as message edges.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphTensors {
    pub atom_features: Matrix,
    pub edge_features: Matrix,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
}

impl GraphTensors {
    pub fn from_graph(g: &MolGraph) -> Result<Self, MolGraphError> {
        let fm = featurize(g)?;
        let mut edge_features = Matrix::zeros(2 * g.n_bonds(), BOND_FEATURES);
        let mut src = Vec::with_capacity(2 * g.n_bonds());
        let mut dst = Vec::with_capacity(2 * g.n_bonds());
        for (k, b) in g.bonds().iter().enumerate() {
            for (d, (s, t)) in [(b.i, b.j), (b.j, b.i)].into_iter().enumerate() {
                edge_features.row_mut(2 * k + d).copy_from_slice(fm.bond_features.row(k));
                src.push(s);
                dst.push(t);
            }
        }
        Ok(Self { atom_features: fm.atom_features, edge_features, src, dst })
    }

    pub fn n_atoms(&self) -> usize {
        self.atom_features.rows()
    }
}

/// What a predictor sees of a product.
#[derive(Clone, Debug)]
pub struct ProductInput {
    pub kind: ProductKind,
    pub bb_ids: Vec<String>,
    pub graph: Option<Arc<GraphTensors>>,
}

impl ProductInput {
    pub fn new(kind: ProductKind, bb_ids: Vec<String>, graph: Option<&MolGraph>) -> Result<Self, MolGraphError> {
        let graph = graph.map(GraphTensors::from_graph).transpose()?.map(Arc::new);
        Ok(Self { kind, bb_ids, graph })
    }
}

#[derive(Clone, Debug)]
pub enum Predictor {
    Embed(EmbedPredictor),
    Mpnn(MpnnPredictor),
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Embed(_) => "embed",
            Predictor::Mpnn(_) => "mpnn",
        }
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            Predictor::Embed(p) => p.params(),
            Predictor::Mpnn(p) => p.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Predictor::Embed(p) => p.params_mut(),
            Predictor::Mpnn(p) => p.params_mut(),
        }
    }

    pub fn has_adjust(&self) -> bool {
        match self {
            Predictor::Embed(p) => p.has_adjust(),
            Predictor::Mpnn(p) => p.has_adjust(),
        }
    }

    pub fn needs_graphs(&self) -> bool {
        matches!(self, Predictor::Mpnn(_))
    }

    /// Records the forward pass for a batch; returns an `n × (2|3)` node
    /// with columns `[r_target, r_ntc, (p_adjust)]`.
    pub fn forward(&self, tape: &mut Tape, leaves: &[NodeId], batch: &[&ProductInput]) -> Result<NodeId, PredictorError> {
        match self {
            Predictor::Embed(p) => p.forward(tape, leaves, batch),
            Predictor::Mpnn(p) => p.forward(tape, leaves, batch),
        }
    }

    /// Forward pass without gradients.
    pub fn predict(&self, batch: &[&ProductInput]) -> Result<Vec<PredictorOutput>, PredictorError> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let leaves = self.params().record(&mut tape);
        let out = self.forward(&mut tape, &leaves, batch)?;
        let m = tape.value(out);
        Ok((0..m.rows())
            .map(|r| PredictorOutput {
                r_target: m.get(r, 0),
                r_ntc: m.get(r, 1),
                p_adjust: (m.cols() > 2).then(|| m.get(r, 2)),
            })
            .collect())
    }

    pub fn to_checkpoint(&self, ck: &mut Checkpoint) {
        ck.set("predictor", self.name());
        match self {
            Predictor::Embed(p) => {
                let c = &p.config;
                ck.set("predictor.dim", c.dim);
                ck.set("predictor.head_hidden", c.head_hidden);
                ck.set("predictor.adjust_head", c.adjust_head);
                ck.set("predictor.seed", c.seed);
                ck.set("predictor.vocab", p.vocab().join(","));
            }
            Predictor::Mpnn(p) => {
                let c = &p.config;
                ck.set("predictor.hidden_dim", c.hidden_dim);
                ck.set("predictor.message_steps", c.message_steps);
                ck.set("predictor.readout_dim", c.readout_dim);
                ck.set("predictor.head_hidden", c.head_hidden);
                ck.set("predictor.adjust_head", c.adjust_head);
                ck.set("predictor.seed", c.seed);
            }
        }
        for (name, m) in self.params().iter() {
            ck.params.push(name, m.clone());
        }
    }

    /// Rebuilds a predictor from a checkpoint; parameters not owned by the
    /// predictor (prefixed `model.`) are ignored.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, PredictorError> {
        let mut params = ParamSet::new();
        for (name, m) in ck.params.iter().filter(|(n, _)| !n.starts_with("model.")) {
            params.push(name, m.clone());
        }
        match ck.require("predictor")? {
            "embed" => {
                let config = EmbedConfig {
                    dim: ck.parse_meta("predictor.dim")?,
                    head_hidden: ck.parse_meta("predictor.head_hidden")?,
                    adjust_head: ck.parse_meta("predictor.adjust_head")?,
                    seed: ck.parse_meta("predictor.seed")?,
                };
                let vocab_s = ck.require("predictor.vocab")?;
                let vocab = if vocab_s.is_empty() { Vec::new() } else { vocab_s.split(',').map(str::to_string).collect() };
                Ok(Predictor::Embed(EmbedPredictor::from_parts(config, vocab, params)?))
            }
            "mpnn" => {
                let config = MpnnConfig {
                    hidden_dim: ck.parse_meta("predictor.hidden_dim")?,
                    message_steps: ck.parse_meta("predictor.message_steps")?,
                    readout_dim: ck.parse_meta("predictor.readout_dim")?,
                    head_hidden: ck.parse_meta("predictor.head_hidden")?,
                    adjust_head: ck.parse_meta("predictor.adjust_head")?,
                    seed: ck.parse_meta("predictor.seed")?,
                };
                Ok(Predictor::Mpnn(MpnnPredictor::from_parts(config, params)?))
            }
            other => Err(PredictorError::Checkpoint(format!("unknown predictor `{other}`"))),
        }
    }
}

/// Runs the graph network on a single assembled graph.
pub fn mpnn_forward(g: &MolGraph, predictor: &MpnnPredictor) -> Result<PredictorOutput, PredictorError> {
    let input = ProductInput::new(ProductKind::Tri, Vec::new(), Some(g))?;
    let p = Predictor::Mpnn(predictor.clone());
    Ok(p.predict(&[&input])?[0])
}

/// Runs the embedding model on one product's building-block ids.
pub fn embed_forward(kind: ProductKind, bb_ids: &[String], predictor: &EmbedPredictor) -> Result<PredictorOutput, PredictorError> {
    let input = ProductInput { kind, bb_ids: bb_ids.to_vec(), graph: None };
    let p = Predictor::Embed(predictor.clone());
    Ok(p.predict(&[&input])?[0])
}

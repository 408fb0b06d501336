//! Building-block embedding predictor: a product is encoded as the sum of
//! its blocks' embeddings plus a product-kind embedding.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::heads::Heads;
use super::{PredictorError, ProductInput};
use crate::diffengine::{Matrix, NodeId, ParamSet, Tape};
use crate::library::ProductKind;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedConfig {
    pub dim: usize,
    pub head_hidden: usize,
    pub adjust_head: bool,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { dim: 32, head_hidden: 32, adjust_head: false, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct EmbedPredictor {
    pub config: EmbedConfig,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    params: ParamSet,
    bb_embed: usize,
    kind_embed: usize,
    heads: Heads,
}

impl EmbedPredictor {
    /// Block embeddings start at zero, so a block never seen in training
    /// contributes nothing to a product's encoding.
    pub fn new(config: EmbedConfig, vocab: Vec<String>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let bb_embed = params.push("embed.bb", Matrix::zeros(vocab.len(), config.dim));
        let kind_embed = params.push_uniform("embed.kind", ProductKind::ALL.len(), config.dim, 1, &mut rng);
        let heads = Heads::init(&mut params, config.dim, config.head_hidden, config.adjust_head, &mut rng);
        Self::assemble(config, vocab, params, bb_embed, kind_embed, heads)
    }

    fn assemble(config: EmbedConfig, vocab: Vec<String>, params: ParamSet, bb_embed: usize, kind_embed: usize, heads: Heads) -> Self {
        let index = vocab.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Self { config, vocab, index, params, bb_embed, kind_embed, heads }
    }

    pub fn from_parts(config: EmbedConfig, vocab: Vec<String>, params: ParamSet) -> Result<Self, PredictorError> {
        let missing = |n: &str| PredictorError::Checkpoint(format!("missing parameter `{n}`"));
        let bb_embed = params.index_of("embed.bb").ok_or_else(|| missing("embed.bb"))?;
        let kind_embed = params.index_of("embed.kind").ok_or_else(|| missing("embed.kind"))?;
        let heads = Heads::bind(&params, config.adjust_head).ok_or_else(|| missing("head.*"))?;
        if params.get(bb_embed).shape() != (vocab.len(), config.dim) {
            return Err(PredictorError::Checkpoint("embedding table does not match vocabulary".into()));
        }
        Ok(Self::assemble(config, vocab, params, bb_embed, kind_embed, heads))
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn has_adjust(&self) -> bool {
        self.config.adjust_head
    }

    pub fn forward(&self, tape: &mut Tape, leaves: &[NodeId], batch: &[&ProductInput]) -> Result<NodeId, PredictorError> {
        let mut rows = Vec::new();
        let mut owner = Vec::new();
        for (p, input) in batch.iter().enumerate() {
            for id in &input.bb_ids {
                let &row = self.index.get(id).ok_or_else(|| PredictorError::UnknownBuildingBlock(id.clone()))?;
                rows.push(row);
                owner.push(p);
            }
        }
        let kinds: Vec<usize> = batch.iter().map(|p| p.kind.index()).collect();
        let kind_rows = tape.gather_rows(leaves[self.kind_embed], kinds);
        let enc = if rows.is_empty() {
            kind_rows
        } else {
            let bb_rows = tape.gather_rows(leaves[self.bb_embed], rows);
            let bb_sum = tape.segment_sum(bb_rows, owner, batch.len());
            tape.add(bb_sum, kind_rows)
        };
        Ok(self.heads.forward(tape, leaves, enc))
    }
}

//! Two-layer fully connected heads on a shared graph encoding.

use rand::Rng;

use crate::diffengine::{NodeId, ParamSet, Tape};

#[derive(Clone, Debug)]
struct Head {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

/// Target and NTC heads, plus the proportion-adjust head when enabled.
/// Output columns: `[r_target, r_ntc, (p_adjust)]`.
#[derive(Clone, Debug)]
pub struct Heads {
    heads: Vec<Head>,
}

pub const HEAD_NAMES: [&str; 3] = ["target", "ntc", "adjust"];

impl Heads {
    pub fn init<R: Rng>(params: &mut ParamSet, enc_dim: usize, hidden: usize, adjust: bool, rng: &mut R) -> Self {
        let n = if adjust { 3 } else { 2 };
        let heads = HEAD_NAMES[..n]
            .iter()
            .map(|name| Head {
                w1: params.push_uniform(format!("head.{name}.w1"), enc_dim, hidden, enc_dim, rng),
                b1: params.push_uniform(format!("head.{name}.b1"), 1, hidden, enc_dim, rng),
                w2: params.push_uniform(format!("head.{name}.w2"), hidden, 1, hidden, rng),
                b2: params.push_uniform(format!("head.{name}.b2"), 1, 1, hidden, rng),
            })
            .collect();
        Self { heads }
    }

    /// Rebinds head parameters by name after loading a checkpoint.
    pub fn bind(params: &ParamSet, adjust: bool) -> Option<Self> {
        let n = if adjust { 3 } else { 2 };
        let heads = HEAD_NAMES[..n]
            .iter()
            .map(|name| {
                Some(Head {
                    w1: params.index_of(&format!("head.{name}.w1"))?,
                    b1: params.index_of(&format!("head.{name}.b1"))?,
                    w2: params.index_of(&format!("head.{name}.w2"))?,
                    b2: params.index_of(&format!("head.{name}.b2"))?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self { heads })
    }

    pub fn forward(&self, tape: &mut Tape, leaves: &[NodeId], enc: NodeId) -> NodeId {
        let cols: Vec<NodeId> = self
            .heads
            .iter()
            .map(|h| {
                let z = tape.matmul(enc, leaves[h.w1]);
                let z = tape.add_row(z, leaves[h.b1]);
                let z = tape.tanh(z);
                let o = tape.matmul(z, leaves[h.w2]);
                tape.add_row(o, leaves[h.b2])
            })
            .collect();
        tape.concat_cols(&cols)
    }
}

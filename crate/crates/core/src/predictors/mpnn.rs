//! Edge-conditioned message-passing network with gated attention readout.
//!
//! ```text
//! h⁰_v   = x_v W_in + b_in
//! m_vw   = h_w W_msg + e_vw W_bond + b_msg          (w → v along bond e_vw)
//! a_v    = Σ_w m_vw
//! z_v    = σ(a_v W_z + h_v U_z + b_z)
//! ĥ_v    = tanh(a_v W_c + h_v U_c + b_c)
//! h_v   ← h_v + z_v ⊙ (ĥ_v − h_v)                   (repeated `message_steps` times)
//! enc_G  = Σ_{v∈G} σ(h_v w_gate + b_gate) · (h_v W_proj + b_proj)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::heads::Heads;
use super::{GraphTensors, PredictorError, ProductInput};
use crate::diffengine::{Matrix, NodeId, ParamSet, Tape};
use crate::molgraph::{ATOM_FEATURES, BOND_FEATURES};

#[derive(Clone, Debug, PartialEq)]
pub struct MpnnConfig {
    pub hidden_dim: usize,
    pub message_steps: usize,
    pub readout_dim: usize,
    pub head_hidden: usize,
    pub adjust_head: bool,
    pub seed: u64,
}

impl Default for MpnnConfig {
    fn default() -> Self {
        Self { hidden_dim: 32, message_steps: 3, readout_dim: 32, head_hidden: 32, adjust_head: false, seed: 0 }
    }
}

const NAMES: [&str; 15] = [
    "mpnn.w_in", "mpnn.b_in", "mpnn.w_msg", "mpnn.w_bond", "mpnn.b_msg", "mpnn.w_z", "mpnn.u_z", "mpnn.b_z",
    "mpnn.w_c", "mpnn.u_c", "mpnn.b_c", "mpnn.w_gate", "mpnn.b_gate", "mpnn.w_proj", "mpnn.b_proj",
];

#[derive(Clone, Debug)]
struct Slots {
    w_in: usize,
    b_in: usize,
    w_msg: usize,
    w_bond: usize,
    b_msg: usize,
    w_z: usize,
    u_z: usize,
    b_z: usize,
    w_c: usize,
    u_c: usize,
    b_c: usize,
    w_gate: usize,
    b_gate: usize,
    w_proj: usize,
    b_proj: usize,
}

impl Slots {
    fn from_indices(ix: &[usize]) -> Self {
        Self {
            w_in: ix[0],
            b_in: ix[1],
            w_msg: ix[2],
            w_bond: ix[3],
            b_msg: ix[4],
            w_z: ix[5],
            u_z: ix[6],
            b_z: ix[7],
            w_c: ix[8],
            u_c: ix[9],
            b_c: ix[10],
            w_gate: ix[11],
            b_gate: ix[12],
            w_proj: ix[13],
            b_proj: ix[14],
        }
    }
}

#[derive(Clone, Debug)]
pub struct MpnnPredictor {
    pub config: MpnnConfig,
    params: ParamSet,
    slots: Slots,
    heads: Heads,
}

impl MpnnPredictor {
    pub fn new(config: MpnnConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut p = ParamSet::new();
        let (h, d, fa, fb) = (config.hidden_dim, config.readout_dim, ATOM_FEATURES, BOND_FEATURES);
        // (rows, cols, fan_in) per entry of NAMES
        let shapes = [
            (fa, h, fa),
            (1, h, fa),
            (h, h, h + fb),
            (fb, h, h + fb),
            (1, h, h + fb),
            (h, h, 2 * h),
            (h, h, 2 * h),
            (1, h, 2 * h),
            (h, h, 2 * h),
            (h, h, 2 * h),
            (1, h, 2 * h),
            (h, 1, h),
            (1, 1, h),
            (h, d, h),
            (1, d, h),
        ];
        let ix: Vec<usize> = shapes
            .iter()
            .zip(NAMES)
            .map(|(&(r, c, fan), name)| p.push_uniform(name, r, c, fan, &mut rng))
            .collect();
        let heads = Heads::init(&mut p, d, config.head_hidden, config.adjust_head, &mut rng);
        Self { config, params: p, slots: Slots::from_indices(&ix), heads }
    }

    pub fn from_parts(config: MpnnConfig, params: ParamSet) -> Result<Self, PredictorError> {
        let ix = NAMES
            .iter()
            .map(|n| params.index_of(n).ok_or_else(|| PredictorError::Checkpoint(format!("missing parameter `{n}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let heads = Heads::bind(&params, config.adjust_head)
            .ok_or_else(|| PredictorError::Checkpoint("missing head parameters".into()))?;
        Ok(Self { config, params, slots: Slots::from_indices(&ix), heads })
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

    /// Batches the graphs into one disjoint union and runs the network.
    pub fn forward(&self, tape: &mut Tape, leaves: &[NodeId], batch: &[&ProductInput]) -> Result<NodeId, PredictorError> {
        let graphs: Vec<&GraphTensors> = batch
            .iter()
            .map(|p| p.graph.as_deref().ok_or(PredictorError::MissingGraph))
            .collect::<Result<_, _>>()?;
        let n_atoms: usize = graphs.iter().map(|g| g.n_atoms()).sum();
        let n_edges: usize = graphs.iter().map(|g| g.src.len()).sum();

        let mut x = Matrix::zeros(n_atoms, ATOM_FEATURES);
        let mut e = Matrix::zeros(n_edges, BOND_FEATURES);
        let mut src = Vec::with_capacity(n_edges);
        let mut dst = Vec::with_capacity(n_edges);
        let mut graph_of = Vec::with_capacity(n_atoms);
        let (mut a_off, mut e_off) = (0, 0);
        for (gi, g) in graphs.iter().enumerate() {
            for r in 0..g.n_atoms() {
                x.row_mut(a_off + r).copy_from_slice(g.atom_features.row(r));
                graph_of.push(gi);
            }
            for k in 0..g.src.len() {
                e.row_mut(e_off + k).copy_from_slice(g.edge_features.row(k));
                src.push(g.src[k] + a_off);
                dst.push(g.dst[k] + a_off);
            }
            a_off += g.n_atoms();
            e_off += g.src.len();
        }

        let s = &self.slots;
        let l = |i: usize| leaves[i];
        let x = tape.leaf(x);
        let h0 = tape.matmul(x, l(s.w_in));
        let mut h = tape.add_row(h0, l(s.b_in));

        // bond contribution to messages is the same every step
        let bond_msg = if n_edges > 0 {
            let e = tape.leaf(e);
            let be = tape.matmul(e, l(s.w_bond));
            Some(tape.add_row(be, l(s.b_msg)))
        } else {
            None
        };

        for _ in 0..self.config.message_steps {
            let agg = match bond_msg {
                Some(bm) => {
                    let hs = tape.gather_rows(h, src.clone());
                    let m = tape.matmul(hs, l(s.w_msg));
                    let m = tape.add(m, bm);
                    tape.segment_sum(m, dst.clone(), n_atoms)
                }
                None => tape.leaf(Matrix::zeros(n_atoms, self.config.hidden_dim)),
            };
            let z = self.gate_term(tape, agg, h, l(s.w_z), l(s.u_z), l(s.b_z));
            let z = tape.sigmoid(z);
            let c = self.gate_term(tape, agg, h, l(s.w_c), l(s.u_c), l(s.b_c));
            let c = tape.tanh(c);
            let diff = tape.sub(c, h);
            let step = tape.mul(z, diff);
            h = tape.add(h, step);
        }

        let g = tape.matmul(h, l(s.w_gate));
        let g = tape.add_row(g, l(s.b_gate));
        let gate = tape.sigmoid(g);
        let proj = tape.matmul(h, l(s.w_proj));
        let proj = tape.add_row(proj, l(s.b_proj));
        let weighted = tape.mul_col(proj, gate);
        let enc = tape.segment_sum(weighted, graph_of, batch.len());
        Ok(self.heads.forward(tape, leaves, enc))
    }

    fn gate_term(&self, tape: &mut Tape, agg: NodeId, h: NodeId, w: NodeId, u: NodeId, b: NodeId) -> NodeId {
        let a = tape.matmul(agg, w);
        let hu = tape.matmul(h, u);
        let s = tape.add(a, hu);
        tape.add_row(s, b)
    }
}

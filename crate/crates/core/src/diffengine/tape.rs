//! Reverse-mode differentiation over a tape of small dense matrix operations.
//!
//! Nodes are appended in evaluation order, so the tape is topologically
//! sorted by construction and the backward sweep is a single reverse pass.

use super::matrix::Matrix;
use super::nonlinear::{sigmoid, softplus};
use super::DiffError;
use crate::countmodel::nb::{nb_nll, nb_nll_dmu};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulCol(NodeId, NodeId),
    Affine(NodeId, f64),
    Sigmoid(NodeId),
    Softplus(NodeId),
    Tanh(NodeId),
    Square(NodeId),
    GatherRows(NodeId, Vec<usize>),
    SegmentSum(NodeId, Vec<usize>),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize),
    SumAll(NodeId),
    NbNll(NodeId, Vec<f64>, f64),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Append-only record of a forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Adjoints produced by [`Tape::backward`]. Only leaves keep their adjoint.
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Adjoint of a leaf; zeros if the output does not depend on it.
    pub fn get(&self, node: NodeId) -> Matrix {
        match &self.adjoints[node.0] {
            Some(m) => m.clone(),
            None => {
                let (r, c) = self.shapes[node.0];
                Matrix::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, node: NodeId) -> Matrix {
        match self.adjoints[node.0].take() {
            Some(m) => m,
            None => {
                let (r, c) = self.shapes[node.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Records an input (parameter or constant). Every leaf receives an adjoint.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "sub shape mismatch");
        let data = va.as_slice().iter().zip(vb.as_slice()).map(|(x, y)| x - y).collect();
        let v = Matrix::from_vec(va.rows(), va.cols(), data);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "mul shape mismatch");
        let data = va.as_slice().iter().zip(vb.as_slice()).map(|(x, y)| x * y).collect();
        let v = Matrix::from_vec(va.rows(), va.cols(), data);
        self.push(Op::Mul(a, b), v)
    }

    /// Adds a 1×c row vector to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!((1, va.cols()), vr.shape(), "add_row shape mismatch");
        let mut v = va.clone();
        for r in 0..v.rows() {
            for (x, b) in v.row_mut(r).iter_mut().zip(vr.as_slice()) {
                *x += b;
            }
        }
        self.push(Op::AddRow(a, row), v)
    }

    /// Scales row i of `a` by `col[i]` (col is n×1).
    pub fn mul_col(&mut self, a: NodeId, col: NodeId) -> NodeId {
        let (va, vc) = (self.value(a), self.value(col));
        assert_eq!((va.rows(), 1), vc.shape(), "mul_col shape mismatch");
        let mut v = va.clone();
        for r in 0..v.rows() {
            let s = vc.get(r, 0);
            v.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        self.push(Op::MulCol(a, col), v)
    }

    /// `scale·a + shift`
    pub fn affine(&mut self, a: NodeId, scale: f64, shift: f64) -> NodeId {
        let v = self.value(a).map(|x| scale * x + shift);
        self.push(Op::Affine(a, scale), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(softplus);
        self.push(Op::Softplus(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), v)
    }

    pub fn gather_rows(&mut self, a: NodeId, idx: Vec<usize>) -> NodeId {
        let va = self.value(a);
        let mut v = Matrix::zeros(idx.len(), va.cols());
        for (o, &i) in idx.iter().enumerate() {
            v.row_mut(o).copy_from_slice(va.row(i));
        }
        self.push(Op::GatherRows(a, idx), v)
    }

    /// Sums row i of `a` into output row `segment[i]`; output has `n_out` rows.
    pub fn segment_sum(&mut self, a: NodeId, segment: Vec<usize>, n_out: usize) -> NodeId {
        let va = self.value(a);
        assert_eq!(segment.len(), va.rows(), "segment_sum length mismatch");
        let mut v = Matrix::zeros(n_out, va.cols());
        for (i, &s) in segment.iter().enumerate() {
            for (o, x) in v.row_mut(s).iter_mut().zip(va.row(i)) {
                *o += x;
            }
        }
        self.push(Op::SegmentSum(a, segment), v)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let vp = self.value(p);
            assert_eq!(vp.rows(), rows, "concat_cols row mismatch");
            for r in 0..rows {
                v.row_mut(r)[off..off + vp.cols()].copy_from_slice(vp.row(r));
            }
            off += vp.cols();
        }
        self.push(Op::ConcatCols(parts.to_vec()), v)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let va = self.value(a);
        assert!(start + len <= va.cols(), "slice_cols out of range");
        let mut v = Matrix::zeros(va.rows(), len);
        for r in 0..va.rows() {
            v.row_mut(r).copy_from_slice(&va.row(r)[start..start + len]);
        }
        self.push(Op::SliceCols(a, start), v)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), v)
    }

    /// Elementwise negative-binomial NLL of observed `counts` under means `mu` (n×1).
    pub fn nb_nll(&mut self, mu: NodeId, counts: Vec<f64>, alpha: f64) -> NodeId {
        let vm = self.value(mu);
        assert_eq!((counts.len(), 1), vm.shape(), "nb_nll shape mismatch");
        let data = counts
            .iter()
            .zip(vm.as_slice())
            .map(|(&c, &m)| nb_nll(c, m, alpha).unwrap_or(f64::NAN))
            .collect();
        let v = Matrix::column(data);
        self.push(Op::NbNll(mu, counts, alpha), v)
    }

    /// Propagates adjoints from the scalar `output` back to every node.
    ///
    /// The tape is consumed: a second call without re-recording is an error.
    pub fn backward(&mut self, output: NodeId) -> Result<Gradients, DiffError> {
        if self.consumed {
            return Err(DiffError::TapeConsumed);
        }
        let shape = self.value(output).shape();
        if shape != (1, 1) {
            return Err(DiffError::NonScalarOutput { rows: shape.0, cols: shape.1 });
        }
        self.consumed = true;

        let n = self.nodes.len();
        let mut adj: Vec<Option<Matrix>> = (0..n).map(|_| None).collect();
        adj[output.0] = Some(Matrix::scalar(1.0));

        for i in (0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            // keep adjoints of leaves for the caller
            if matches!(node.op, Op::Leaf) {
                adj[i] = Some(g);
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *b, g.clone());
                    accumulate(&mut adj, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *b, g.map(|x| -x));
                    accumulate(&mut adj, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = zip_map(&g, self.value(*b), |x, y| x * y);
                    let gb = zip_map(&g, self.value(*a), |x, y| x * y);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, x) in gr.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut adj, *row, gr);
                    accumulate(&mut adj, *a, g);
                }
                Op::MulCol(a, col) => {
                    let va = self.value(*a);
                    let vc = self.value(*col);
                    let mut gc = Matrix::zeros(g.rows(), 1);
                    let mut ga = g.clone();
                    for r in 0..g.rows() {
                        let s = vc.get(r, 0);
                        gc.set(r, 0, g.row(r).iter().zip(va.row(r)).map(|(x, y)| x * y).sum());
                        ga.row_mut(r).iter_mut().for_each(|x| *x *= s);
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *col, gc);
                }
                Op::Affine(a, scale) => {
                    let s = *scale;
                    accumulate(&mut adj, *a, g.map(|x| x * s));
                }
                Op::Sigmoid(a) => {
                    let ga = zip_map(&g, &node.value, |x, s| x * s * (1.0 - s));
                    accumulate(&mut adj, *a, ga);
                }
                Op::Softplus(a) => {
                    let ga = zip_map(&g, self.value(*a), |x, z| x * sigmoid(z));
                    accumulate(&mut adj, *a, ga);
                }
                Op::Tanh(a) => {
                    let ga = zip_map(&g, &node.value, |x, t| x * (1.0 - t * t));
                    accumulate(&mut adj, *a, ga);
                }
                Op::Square(a) => {
                    let ga = zip_map(&g, self.value(*a), |x, z| 2.0 * x * z);
                    accumulate(&mut adj, *a, ga);
                }
                Op::GatherRows(a, idx) => {
                    let va = self.value(*a);
                    let mut ga = Matrix::zeros(va.rows(), va.cols());
                    for (o, &src) in idx.iter().enumerate() {
                        for (t, x) in ga.row_mut(src).iter_mut().zip(g.row(o)) {
                            *t += x;
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::SegmentSum(a, segment) => {
                    let mut ga = Matrix::zeros(segment.len(), g.cols());
                    for (r, &s) in segment.iter().enumerate() {
                        ga.row_mut(r).copy_from_slice(g.row(s));
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut gp = Matrix::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        off += w;
                        accumulate(&mut adj, p, gp);
                    }
                }
                Op::SliceCols(a, start) => {
                    let va = self.value(*a);
                    let mut ga = Matrix::zeros(va.rows(), va.cols());
                    for r in 0..g.rows() {
                        ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::SumAll(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut adj, *a, Matrix::filled(r, c, g.item()));
                }
                Op::NbNll(mu, counts, alpha) => {
                    let vm = self.value(*mu);
                    let data = counts
                        .iter()
                        .zip(vm.as_slice())
                        .zip(g.as_slice())
                        .map(|((&c, &m), &x)| x * nb_nll_dmu(c, m, *alpha))
                        .collect();
                    accumulate(&mut adj, *mu, Matrix::column(data));
                }
            }
        }

        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

fn accumulate(adj: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
    match &mut adj[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| f(x, y)).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

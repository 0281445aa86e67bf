//! The autodiff tape: forward-computed values plus recorded ops.

use ndarray::{concatenate, s, Array2, Axis};

pub type VarId = usize;

enum Op {
    Leaf,
    MatMul(VarId, VarId),
    Add(VarId, VarId),
    /// Broadcast a 1 x d row over every row of the left operand.
    AddRow(VarId, VarId),
    Sub(VarId, VarId),
    Mul(VarId, VarId),
    Scale(VarId, f64),
    Sigmoid(VarId),
    Tanh(VarId),
    Relu(VarId),
    ConcatCols(Vec<VarId>),
    ConcatRows(Vec<VarId>),
    SliceCols(VarId, usize, usize),
    /// Row gather; used for embedding lookups.
    SelectRows(VarId, Vec<usize>),
    /// Column-wise max over rows; argmax row per column recorded at forward.
    MaxRows(VarId, Vec<usize>),
    /// out[dst] += coeff * src[src_row] for each (dst, src_row, coeff).
    ScatterRows {
        src: VarId,
        pairs: Vec<(usize, usize, f64)>,
    },
    /// Mean cross-entropy of one row of logits against a class label;
    /// softmax probabilities cached for the backward pass.
    SoftmaxCrossEntropy {
        logits: VarId,
        label: usize,
        probs: Array2<f64>,
    },
    /// Elementwise product with a fixed mask (dropout).
    MulConst(VarId, Array2<f64>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> VarId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn value(&self, v: VarId) -> &Array2<f64> {
        &self.nodes[v].value
    }

    pub fn scalar(&self, v: VarId) -> f64 {
        self.nodes[v].value[[0, 0]]
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> VarId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.nodes[a].value.dot(&self.nodes[b].value);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let v = &self.nodes[a].value + &self.nodes[b].value;
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: VarId, row: VarId) -> VarId {
        let v = &self.nodes[a].value + &self.nodes[row].value;
        self.push(v, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        let v = &self.nodes[a].value - &self.nodes[b].value;
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        let v = &self.nodes[a].value * &self.nodes[b].value;
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: VarId, c: f64) -> VarId {
        let v = &self.nodes[a].value * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: VarId) -> VarId {
        let v = self.nodes[a].value.mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: VarId) -> VarId {
        let v = self.nodes[a].value.mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: VarId) -> VarId {
        let v = self.nodes[a].value.mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn concat_cols(&mut self, parts: &[VarId]) -> VarId {
        let views: Vec<_> = parts.iter().map(|&p| self.nodes[p].value.view()).collect();
        let v = concatenate(Axis(1), &views).expect("column concat");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[VarId]) -> VarId {
        let views: Vec<_> = parts.iter().map(|&p| self.nodes[p].value.view()).collect();
        let v = concatenate(Axis(0), &views).expect("row concat");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: VarId, start: usize, end: usize) -> VarId {
        let v = self.nodes[a].value.slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start, end))
    }

    pub fn select_rows(&mut self, a: VarId, indices: &[usize]) -> VarId {
        let src = &self.nodes[a].value;
        let mut v = Array2::zeros((indices.len(), src.ncols()));
        for (k, &i) in indices.iter().enumerate() {
            v.row_mut(k).assign(&src.row(i));
        }
        self.push(v, Op::SelectRows(a, indices.to_vec()))
    }

    pub fn max_rows(&mut self, a: VarId) -> VarId {
        let src = &self.nodes[a].value;
        assert!(src.nrows() > 0, "max over zero rows");
        let mut v = Array2::zeros((1, src.ncols()));
        let mut argmax = vec![0usize; src.ncols()];
        for j in 0..src.ncols() {
            let mut best = f64::NEG_INFINITY;
            for i in 0..src.nrows() {
                if src[[i, j]] > best {
                    best = src[[i, j]];
                    argmax[j] = i;
                }
            }
            v[[0, j]] = best;
        }
        self.push(v, Op::MaxRows(a, argmax))
    }

    /// Scatter-add rows of `src` into a fresh `rows x d` matrix.
    pub fn scatter_rows(&mut self, src: VarId, pairs: &[(usize, usize, f64)], rows: usize) -> VarId {
        let s = &self.nodes[src].value;
        let mut v = Array2::zeros((rows, s.ncols()));
        for &(dst, src_row, coeff) in pairs {
            let mut out = v.row_mut(dst);
            out += &(&s.row(src_row) * coeff);
        }
        self.push(
            v,
            Op::ScatterRows {
                src,
                pairs: pairs.to_vec(),
            },
        )
    }

    /// Cross-entropy of a single 1 x k logits row against `label`.
    pub fn softmax_cross_entropy(&mut self, logits: VarId, label: usize) -> VarId {
        let row = &self.nodes[logits].value;
        assert_eq!(row.nrows(), 1, "logits must be a single row");
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps = row.mapv(|x| (x - max).exp());
        let sum: f64 = exps.sum();
        let probs = exps / sum;
        let loss = -probs[[0, label]].ln();
        let v = Array2::from_elem((1, 1), loss);
        self.push(
            v,
            Op::SoftmaxCrossEntropy {
                logits,
                label,
                probs,
            },
        )
    }

    /// Softmax probabilities of a 1 x k logits row (no gradient path; use for
    /// inference readout).
    pub fn softmax_value(&self, logits: VarId) -> Vec<f64> {
        let row = &self.nodes[logits].value;
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    pub fn mul_const(&mut self, a: VarId, mask: Array2<f64>) -> VarId {
        let v = &self.nodes[a].value * &mask;
        self.push(v, Op::MulConst(a, mask))
    }

    /// Backward sweep from `root` (seeded with `seed`), returning one
    /// gradient slot per tape node.
    pub fn backward(&self, root: VarId, seed: f64) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root] = Some(Array2::from_elem(self.nodes[root].value.dim(), seed));

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            match &self.nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.nodes[*b].value.t());
                    let db = self.nodes[*a].value.t().dot(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    let drow = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *row, drow);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, -g);
                }
                Op::Mul(a, b) => {
                    let da = &g * &self.nodes[*b].value;
                    let db = &g * &self.nodes[*a].value;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g * *c),
                Op::Sigmoid(a) => {
                    let y = &self.nodes[id].value;
                    accumulate(&mut grads, *a, &g * &(y * &(1.0 - y)));
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[id].value;
                    accumulate(&mut grads, *a, &g * &(1.0 - y * y));
                }
                Op::Relu(a) => {
                    let y = &self.nodes[id].value;
                    accumulate(&mut grads, *a, &g * &y.mapv(|v| (v > 0.0) as u8 as f64));
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.ncols();
                        let dp = g.slice(s![.., start..start + w]).to_owned();
                        accumulate(&mut grads, p, dp);
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.nodes[p].value.nrows();
                        let dp = g.slice(s![start..start + h, ..]).to_owned();
                        accumulate(&mut grads, p, dp);
                        start += h;
                    }
                }
                Op::SliceCols(a, sidx, eidx) => {
                    let mut da = Array2::zeros(self.nodes[*a].value.dim());
                    da.slice_mut(s![.., *sidx..*eidx]).assign(&g);
                    accumulate(&mut grads, *a, da);
                }
                Op::SelectRows(a, indices) => {
                    let mut da = Array2::zeros(self.nodes[*a].value.dim());
                    for (k, &i) in indices.iter().enumerate() {
                        let mut row = da.row_mut(i);
                        row += &g.row(k);
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MaxRows(a, argmax) => {
                    let mut da = Array2::zeros(self.nodes[*a].value.dim());
                    for (j, &i) in argmax.iter().enumerate() {
                        da[[i, j]] += g[[0, j]];
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ScatterRows { src, pairs } => {
                    let mut da = Array2::zeros(self.nodes[*src].value.dim());
                    for &(dst, src_row, coeff) in pairs {
                        let mut row = da.row_mut(src_row);
                        row += &(&g.row(dst) * coeff);
                    }
                    accumulate(&mut grads, *src, da);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    label,
                    probs,
                } => {
                    let mut dl = probs.clone();
                    dl[[0, *label]] -= 1.0;
                    accumulate(&mut grads, *logits, dl * g[[0, 0]]);
                }
                Op::MulConst(a, mask) => {
                    accumulate(&mut grads, *a, &g * mask);
                }
            }
        }
        grads
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], id: VarId, delta: Array2<f64>) {
    match &mut grads[id] {
        Some(g) => *g += &delta,
        slot => *slot = Some(delta),
    }
}

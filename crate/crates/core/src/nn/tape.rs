use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{concatenate, s, Array2, Axis};

use super::conv::{col2im, im2col, ConvGeom};
use super::params::{Gradients, ParamId, ParamStore};
use super::sparse::SpOp;

/// Clamp applied to probabilities inside the cross-entropy.
pub const PROB_EPS: f64 = 1e-12;

/// Node handle on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    MulScalar(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather(Var, Arc<Vec<usize>>),
    Spmm(Arc<SpOp>, Var),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    SegmentSum(Var, Arc<Vec<usize>>),
    Im2col(Var, ConvGeom),
    Bce(Var, Arc<Array2<f64>>),
    Mse(Var, Arc<Array2<f64>>),
}

/// Reverse-mode autodiff record over dense f64 matrices.
#[derive(Debug, Default)]
pub struct Tape {
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
    params: HashMap<ParamId, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.values[v.0]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let x = &self.values[v.0];
        debug_assert_eq!(x.dim(), (1, 1));
        x[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.values[v.0].dim()
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf bound to a stored parameter; one node per parameter per tape.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) - self.value(b);
        self.push(out, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b))
    }

    /// `a + 1·row` for a `1 × c` row.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1, "add_row expects a single row");
        let out = self.value(a) + self.value(row);
        self.push(out, Op::AddRow(a, row))
    }

    /// Scales row `i` of `a` by `col[i]`, `col` being `n × 1`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        assert_eq!(self.shape(col).1, 1, "mul_col expects a single column");
        let out = self.value(a) * self.value(col);
        self.push(out, Op::MulCol(a, col))
    }

    /// `a · s` for a `1 × 1` variable `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        let k = self.scalar(s);
        let out = self.value(a) * k;
        self.push(out, Op::MulScalar(a, s))
    }

    /// `alpha · a + beta`.
    pub fn affine(&mut self, a: Var, alpha: f64, beta: f64) -> Var {
        let out = self.value(a).mapv(|x| alpha * x + beta);
        self.push(out, Op::Affine(a, alpha))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        self.push(out, Op::Concat(parts.to_vec()))
    }

    /// Stacks blocks vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = concatenate(Axis(0), &views).expect("concat_rows column mismatch");
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn gather_rows(&mut self, a: Var, idx: Arc<Vec<usize>>) -> Var {
        let out = self.value(a).select(Axis(0), &idx);
        self.push(out, Op::Gather(a, idx))
    }

    /// Sparse-times-dense with a constant operator.
    pub fn spmm(&mut self, op: Arc<SpOp>, a: Var) -> Var {
        let out = op.fwd.matmul(self.value(a));
        self.push(out, Op::Spmm(op, a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Array2::from_elem((1, 1), x.sum() / x.len() as f64);
        self.push(out, Op::Mean(a))
    }

    /// Column means, `n × c → 1 × c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("mean_rows of empty matrix")
            .insert_axis(Axis(0));
        self.push(out, Op::MeanRows(a))
    }

    /// Sums rows into `segments` buckets; `seg[i]` names the bucket of row `i`.
    pub fn segment_sum(&mut self, a: Var, seg: Arc<Vec<usize>>, segments: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.nrows(), seg.len(), "segment ids per row");
        let mut out = Array2::zeros((segments, x.ncols()));
        for (i, &s) in seg.iter().enumerate() {
            let mut r = out.row_mut(s);
            r += &x.row(i);
        }
        self.push(out, Op::SegmentSum(a, seg))
    }

    pub fn im2col(&mut self, a: Var, geom: ConvGeom) -> Var {
        let out = im2col(self.value(a), &geom);
        self.push(out, Op::Im2col(a, geom))
    }

    /// Mean binary cross-entropy of probabilities `p` against 0/1 labels.
    pub fn bce(&mut self, p: Var, labels: Arc<Array2<f64>>) -> Var {
        let x = self.value(p);
        assert_eq!(x.dim(), labels.dim(), "bce shape mismatch");
        let loss = bce_value(x.iter().copied(), labels.iter().copied());
        self.push(Array2::from_elem((1, 1), loss), Op::Bce(p, labels))
    }

    pub fn mse(&mut self, a: Var, target: Arc<Array2<f64>>) -> Var {
        let x = self.value(a);
        assert_eq!(x.dim(), target.dim(), "mse shape mismatch");
        let loss = (x - &*target).mapv(|d| d * d).mean().unwrap_or(0.0);
        self.push(Array2::from_elem((1, 1), loss), Op::Mse(a, target))
    }

    /// Gradients of scalar `loss` with respect to every parameter on the tape.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.values.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));
        let mut out = Gradients::default();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let mut acc = |v: Var, d: Array2<f64>| match &mut grads[v.0] {
                Some(x) => *x += &d,
                slot => *slot = Some(d),
            };
            let val = |v: Var| &self.values[v.0];
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.by_param.insert(*id, g);
                }
                Op::MatMul(a, b) => {
                    acc(*a, g.dot(&val(*b).t()));
                    acc(*b, val(*a).t().dot(&g));
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, -&g);
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    acc(*a, &g * val(*b));
                    acc(*b, &g * val(*a));
                }
                Op::AddRow(a, r) => {
                    acc(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, g);
                }
                Op::MulCol(a, c) => {
                    acc(*c, (&g * val(*a)).sum_axis(Axis(1)).insert_axis(Axis(1)));
                    acc(*a, &g * val(*c));
                }
                Op::MulScalar(a, s) => {
                    let k = val(*s)[[0, 0]];
                    acc(*s, Array2::from_elem((1, 1), (&g * val(*a)).sum()));
                    acc(*a, g * k);
                }
                Op::Affine(a, alpha) => acc(*a, g * *alpha),
                Op::Relu(a) => {
                    let y = &self.values[i];
                    acc(*a, ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| if y > 0.0 { g } else { 0.0 }));
                }
                Op::Sigmoid(a) => {
                    let y = &self.values[i];
                    acc(*a, ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| g * y * (1.0 - y)));
                }
                Op::Concat(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = val(p).ncols();
                        acc(p, g.slice(s![.., at..at + w]).to_owned());
                        at += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let h = val(p).nrows();
                        acc(p, g.slice(s![at..at + h, ..]).to_owned());
                        at += h;
                    }
                }
                Op::Gather(a, idx) => {
                    let mut d = Array2::zeros(val(*a).dim());
                    for (r, &src) in idx.iter().enumerate() {
                        let mut row = d.row_mut(src);
                        row += &g.row(r);
                    }
                    acc(*a, d);
                }
                Op::Spmm(op, a) => acc(*a, op.bwd.matmul(&g)),
                Op::Sum(a) => acc(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]])),
                Op::Mean(a) => {
                    let x = val(*a);
                    acc(*a, Array2::from_elem(x.dim(), g[[0, 0]] / x.len() as f64));
                }
                Op::MeanRows(a) => {
                    let n = val(*a).nrows() as f64;
                    let row = g.row(0).mapv(|x| x / n);
                    let d = row.broadcast(val(*a).dim()).unwrap().to_owned();
                    acc(*a, d);
                }
                Op::SegmentSum(a, seg) => acc(*a, g.select(Axis(0), seg)),
                Op::Im2col(a, geom) => acc(*a, col2im(&g, geom)),
                Op::Bce(p, y) => {
                    let x = val(*p);
                    let n = x.len() as f64;
                    let k = g[[0, 0]] / n;
                    let d = ndarray::Zip::from(x).and(&**y).map_collect(|&p, &y| {
                        let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
                        k * ((1.0 - y) / (1.0 - p) - y / p)
                    });
                    acc(*p, d);
                }
                Op::Mse(a, t) => {
                    let x = val(*a);
                    let k = 2.0 * g[[0, 0]] / x.len() as f64;
                    acc(*a, (x - &**t) * k);
                }
            }
        }
        out
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy with probabilities clamped to `[ε, 1-ε]`.
pub fn bce_value(p: impl Iterator<Item = f64>, y: impl Iterator<Item = f64>) -> f64 {
    let (mut total, mut n) = (0.0, 0usize);
    for (p, y) in p.zip(y) {
        let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        n += 1;
    }
    total / n as f64
}

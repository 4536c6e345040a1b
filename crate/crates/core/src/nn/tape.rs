use std::collections::HashMap;

use super::matrix::Matrix;
use super::params::ParamSet;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Normalize(Var),
    Gather(Var, Vec<usize>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

const NORM_EPS: f64 = 1e-5;

/// Reverse-mode autodiff tape over small dense matrices.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<usize, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records parameter `id`; repeated calls within one tape share a node.
    pub fn param(&mut self, params: &ParamSet, id: usize) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(params.value(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_bt(self.value(b));
        self.push(v, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        assert!(v.same_shape(self.value(b)), "add shape mismatch");
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds row vector `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let bv = self.value(b);
        assert_eq!(bv.rows, 1);
        let mut v = self.value(a).clone();
        assert_eq!(v.cols, bv.cols, "add_row width mismatch");
        let brow = bv.data.clone();
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&brow) {
                *x += y;
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    /// Multiplies every row of `a` elementwise by row vector `b`.
    pub fn mul_row(&mut self, a: Var, b: Var) -> Var {
        let brow = self.value(b).data.clone();
        let mut v = self.value(a).clone();
        assert_eq!(v.cols, brow.len(), "mul_row width mismatch");
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&brow) {
                *x *= y;
            }
        }
        self.push(v, Op::MulRow(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Row-wise softmax. With `causal`, row `i` only sees columns `0..=i`.
    pub fn softmax(&mut self, a: Var, causal: bool) -> Var {
        let x = self.value(a);
        let mut v = Matrix::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let limit = if causal { (r + 1).min(x.cols) } else { x.cols };
            let row = &x.row(r)[..limit];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = &mut v.row_mut(r)[..limit];
            let mut z = 0.0;
            for (o, &xi) in out.iter_mut().zip(row) {
                *o = (xi - m).exp();
                z += *o;
            }
            out.iter_mut().for_each(|o| *o /= z);
        }
        self.push(v, Op::Softmax(a))
    }

    /// Row-wise standardization (layer norm without affine terms).
    pub fn normalize(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = Matrix::zeros(x.rows, x.cols);
        let n = x.cols as f64;
        for r in 0..x.rows {
            let row = x.row(r);
            let mu = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / n;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            for (o, y) in v.row_mut(r).iter_mut().zip(row) {
                *o = (y - mu) * inv;
            }
        }
        self.push(v, Op::Normalize(a))
    }

    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut v = Matrix::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            v.row_mut(r).copy_from_slice(t.row(id));
        }
        self.push(v, Op::Gather(table, ids.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        let v = Matrix::from_vec(len, x.cols, x.data[start * x.cols..(start + len) * x.cols].to_vec());
        self.push(v, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        let mut v = Matrix::zeros(x.rows, len);
        for r in 0..x.rows {
            v.row_mut(r).copy_from_slice(&x.row(r)[start..start + len]);
        }
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let x = self.value(*p);
            for r in 0..rows {
                v.row_mut(r)[off..off + x.cols].copy_from_slice(x.row(r));
            }
            off += x.cols;
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for p in parts {
            assert_eq!(self.value(*p).cols, cols);
            data.extend_from_slice(&self.value(*p).data);
        }
        let rows = data.len() / cols.max(1);
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    /// Back-propagates the given output gradients and accumulates parameter
    /// gradients into `grads`.
    pub fn backward(&self, seeds: &[(Var, Matrix)], grads: &mut ParamSet) {
        let mut g: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        for (v, s) in seeds {
            accumulate(&mut g, *v, s.clone());
        }
        for i in (0..self.nodes.len()).rev() {
            let Some(dy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => grads.value_mut(*id).add_assign(&dy),
                Op::MatMul(a, b) => {
                    let da = dy.matmul_bt(self.value(*b));
                    let db = self.value(*a).matmul_at(&dy);
                    accumulate(&mut g, *a, da);
                    accumulate(&mut g, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let da = dy.matmul(self.value(*b));
                    let db = dy.matmul_at(self.value(*a));
                    accumulate(&mut g, *a, da);
                    accumulate(&mut g, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut g, *a, dy.clone());
                    accumulate(&mut g, *b, dy);
                }
                Op::AddRow(a, b) => {
                    let db = Matrix::row_vector(dy.col_sums());
                    accumulate(&mut g, *a, dy);
                    accumulate(&mut g, *b, db);
                }
                Op::MulRow(a, b) => {
                    let brow = &self.value(*b).data;
                    let x = self.value(*a);
                    let mut da = dy.clone();
                    let mut db = vec![0.0; brow.len()];
                    for r in 0..dy.rows {
                        for c in 0..dy.cols {
                            da.data[r * dy.cols + c] *= brow[c];
                            db[c] += dy.get(r, c) * x.get(r, c);
                        }
                    }
                    accumulate(&mut g, *a, da);
                    accumulate(&mut g, *b, Matrix::row_vector(db));
                }
                Op::Scale(a, s) => accumulate(&mut g, *a, dy.map(|x| x * s)),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut d = dy;
                    for (di, xi) in d.data.iter_mut().zip(&x.data) {
                        if *xi <= 0.0 {
                            *di = 0.0;
                        }
                    }
                    accumulate(&mut g, *a, d);
                }
                Op::Tanh(a) => {
                    let mut d = dy;
                    for (di, yi) in d.data.iter_mut().zip(&node.value.data) {
                        *di *= 1.0 - yi * yi;
                    }
                    accumulate(&mut g, *a, d);
                }
                Op::Sigmoid(a) => {
                    let mut d = dy;
                    for (di, yi) in d.data.iter_mut().zip(&node.value.data) {
                        *di *= yi * (1.0 - yi);
                    }
                    accumulate(&mut g, *a, d);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut d = Matrix::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let yr = y.row(r);
                        let dr = dy.row(r);
                        let dot: f64 = yr.iter().zip(dr).map(|(p, q)| p * q).sum();
                        for (o, (p, q)) in d.row_mut(r).iter_mut().zip(yr.iter().zip(dr)) {
                            *o = p * (q - dot);
                        }
                    }
                    accumulate(&mut g, *a, d);
                }
                Op::Normalize(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let n = x.cols as f64;
                    let mut d = Matrix::zeros(x.rows, x.cols);
                    for r in 0..x.rows {
                        let row = x.row(r);
                        let mu = row.iter().sum::<f64>() / n;
                        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
                        let inv = 1.0 / (var + NORM_EPS).sqrt();
                        let yr = y.row(r);
                        let dr = dy.row(r);
                        let mean_d = dr.iter().sum::<f64>() / n;
                        let mean_dy: f64 = dr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
                        for ((o, di), yi) in d.row_mut(r).iter_mut().zip(dr).zip(yr) {
                            *o = inv * (di - mean_d - yi * mean_dy);
                        }
                    }
                    accumulate(&mut g, *a, d);
                }
                Op::Gather(t, ids) => {
                    let tv = self.value(*t);
                    let mut d = Matrix::zeros(tv.rows, tv.cols);
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, v) in d.row_mut(id).iter_mut().zip(dy.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut g, *t, d);
                }
                Op::SliceRows(a, start) => {
                    let x = self.value(*a);
                    let mut d = Matrix::zeros(x.rows, x.cols);
                    d.data[start * x.cols..start * x.cols + dy.data.len()].copy_from_slice(&dy.data);
                    accumulate(&mut g, *a, d);
                }
                Op::SliceCols(a, start) => {
                    let x = self.value(*a);
                    let mut d = Matrix::zeros(x.rows, x.cols);
                    for r in 0..x.rows {
                        d.row_mut(r)[*start..start + dy.cols].copy_from_slice(dy.row(r));
                    }
                    accumulate(&mut g, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let cols = self.value(*p).cols;
                        let mut d = Matrix::zeros(dy.rows, cols);
                        for r in 0..dy.rows {
                            d.row_mut(r).copy_from_slice(&dy.row(r)[off..off + cols]);
                        }
                        off += cols;
                        accumulate(&mut g, *p, d);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let x = self.value(*p);
                        let n = x.rows * x.cols;
                        let d = Matrix::from_vec(x.rows, x.cols, dy.data[off..off + n].to_vec());
                        off += n;
                        accumulate(&mut g, *p, d);
                    }
                }
            }
        }
    }
}

fn accumulate(g: &mut [Option<Matrix>], v: Var, d: Matrix) {
    match &mut g[v.0] {
        Some(existing) => existing.add_assign(&d),
        slot @ None => *slot = Some(d),
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

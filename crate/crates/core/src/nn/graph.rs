//! Tape of matrix operations with reverse-mode differentiation.

use super::params::ModelParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    LayerNorm(Var, Vec<f64>),
    Softmax(Var),
    Transpose(Var),
    Cols(Var, usize, usize),
    Concat(Vec<Var>),
    BroadcastRows(Var),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(usize, Var)>,
}

impl Gradients {
    pub fn of(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Adds parameter gradients into the parameter store.
    pub fn accumulate(&self, params: &mut ModelParams) {
        for &(id, v) in &self.params {
            if let Some(g) = &self.grads[v.0] {
                params.grads[id].add_assign(g);
            }
        }
    }
}

fn shape_err(what: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape(format!("{what}: {:?} vs {:?}", a.shape, b.shape))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, params: &ModelParams, name: &str) -> Result<Var> {
        let id = params.id(name)?;
        Ok(self.push(params.values[id].clone(), Op::Param(id)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Adds a 1 x m row to every row of an n x m matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err("add_row", x, r));
        }
        let mut v = x.clone();
        let c = x.cols();
        for i in 0..x.rows() {
            for (d, b) in v.data[i * c..(i + 1) * c].iter_mut().zip(&r.data) {
                *d += b;
            }
        }
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x / (1.0 + (-x).exp()));
        self.push(v, Op::Silu(a))
    }

    /// Row-wise standardization with population variance; no affine part.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let x = self.value(a);
        let c = x.cols();
        if c < 2 {
            return Err(Error::Shape(format!("layer norm over width {c}")));
        }
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let row = out.row_mut(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + eps).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * s);
            inv_std.push(s);
        }
        Ok(self.push(out, Op::LayerNorm(a, inv_std)))
    }

    /// Row softmax. Columns flagged `false` in `key_mask` get zero weight.
    pub fn softmax_rows(&mut self, a: Var, key_mask: Option<&[bool]>) -> Result<Var> {
        let x = self.value(a);
        let c = x.cols();
        if let Some(m) = key_mask {
            if m.len() != c {
                return Err(Error::Shape(format!("mask of {} for {c} keys", m.len())));
            }
        }
        let keep = |j: usize| key_mask.is_none_or(|m| m[j]);
        let mut out = x.clone();
        for i in 0..x.rows() {
            let row = out.row_mut(i);
            let max = (0..c)
                .filter(|&j| keep(j))
                .map(|j| row[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::Masking(format!("query row {i} has no unmasked key")));
            }
            let mut z = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                *v = if keep(j) { (*v - max).exp() } else { 0.0 };
                z += *v;
            }
            row.iter_mut().for_each(|v| *v /= z);
        }
        Ok(self.push(out, Op::Softmax(a)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let x = self.value(a);
        let c = x.cols();
        if start >= end || end > c {
            return Err(Error::Shape(format!("columns {start}..{end} of {c}")));
        }
        let w = end - start;
        let mut data = Vec::with_capacity(x.rows() * w);
        for i in 0..x.rows() {
            data.extend_from_slice(&x.row(i)[start..end]);
        }
        let v = Tensor::matrix(x.rows(), w, data)?;
        Ok(self.push(v, Op::Cols(a, start, end)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let n = self.value(parts[0]).rows();
        if parts.iter().any(|p| self.value(*p).rows() != n) {
            return Err(Error::Shape("concat of differing row counts".into()));
        }
        let width: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(n * width);
        for i in 0..n {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(i));
            }
        }
        let v = Tensor::matrix(n, width, data)?;
        Ok(self.push(v, Op::Concat(parts.to_vec())))
    }

    /// Repeats a 1 x m row n times.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let x = self.value(a);
        if x.rows() != 1 {
            return Err(Error::Shape(format!("broadcast of {} rows", x.rows())));
        }
        let v = Tensor::matrix(n, x.cols(), x.data.repeat(n))?;
        Ok(self.push(v, Op::BroadcastRows(a)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::full(&[1, 1], self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Reverse pass from `out`, seeded with `seed` (same shape as `out`).
    pub fn backward(&self, out: Var, seed: Tensor) -> Result<Gradients> {
        if out.0 >= self.nodes.len() {
            return Err(Error::State("backward on a node that was never recorded".into()));
        }
        if !seed.same_shape(&self.nodes[out.0].value) {
            return Err(shape_err("backward seed", &seed, &self.nodes[out.0].value));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; out.0 + 1];
        grads[out.0] = Some(seed);
        let mut params = Vec::new();

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => params.push((*id, Var(idx))),
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    acc(&mut grads, *a, g.matmul(&bv.transpose())?);
                    acc(&mut grads, *b, av.transpose().matmul(&g)?);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, row) => {
                    let c = g.cols();
                    let mut r = Tensor::zeros(&[1, c]);
                    for i in 0..g.rows() {
                        for (d, v) in r.data.iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *row, r);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y)?;
                    let gb = g.zip_map(self.value(*a), |x, y| x * y)?;
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.map(|x| x * s)),
                Op::Silu(a) => {
                    let d = g.zip_map(self.value(*a), |gy, x| {
                        let s = 1.0 / (1.0 + (-x).exp());
                        gy * s * (1.0 + x * (1.0 - s))
                    })?;
                    acc(&mut grads, *a, d);
                }
                Op::LayerNorm(a, inv_std) => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut d = Tensor::zeros(&y.shape);
                    for i in 0..y.rows() {
                        let (gy, yy) = (g.row(i), y.row(i));
                        let mg = gy.iter().sum::<f64>() / c as f64;
                        let mgy = gy.iter().zip(yy).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        for (j, dv) in d.row_mut(i).iter_mut().enumerate() {
                            *dv = inv_std[i] * (gy[j] - mg - yy[j] * mgy);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut d = Tensor::zeros(&y.shape);
                    for i in 0..y.rows() {
                        let (gy, yy) = (g.row(i), y.row(i));
                        let dot: f64 = gy.iter().zip(yy).map(|(a, b)| a * b).sum();
                        for (j, dv) in d.row_mut(i).iter_mut().enumerate() {
                            *dv = yy[j] * (gy[j] - dot);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Cols(a, start, end) => {
                    let src = self.value(*a);
                    let mut d = Tensor::zeros(&src.shape);
                    for i in 0..src.rows() {
                        d.row_mut(i)[*start..*end].copy_from_slice(g.row(i));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let mut d = Tensor::zeros(&self.value(*p).shape);
                        for i in 0..g.rows() {
                            d.row_mut(i).copy_from_slice(&g.row(i)[off..off + w]);
                        }
                        off += w;
                        acc(&mut grads, *p, d);
                    }
                }
                Op::BroadcastRows(a) => {
                    let mut r = Tensor::zeros(&[1, g.cols()]);
                    for i in 0..g.rows() {
                        for (d, v) in r.data.iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                    acc(&mut grads, *a, r);
                }
                Op::Sum(a) => {
                    let s = g.data[0];
                    acc(&mut grads, *a, Tensor::full(&self.value(*a).shape, s));
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_parameters_gives_ones() {
        let mut p = ModelParams::new();
        p.insert("w", Tensor::matrix(2, 3, vec![1., -2., 3., 0.5, 0.0, 9.]).unwrap()).unwrap();
        let mut g = Graph::new();
        let w = g.param(&p, "w").unwrap();
        let s = g.sum(w);
        g.backward(s, Tensor::full(&[1, 1], 1.0)).unwrap().accumulate(&mut p);
        assert_eq!(p.grad("w").unwrap().data, vec![1.0; 6]);
    }

    #[test]
    fn half_squared_norm_gives_w() {
        let mut p = ModelParams::new();
        let w0 = Tensor::matrix(2, 2, vec![0.3, -1.2, 2.0, 0.0]).unwrap();
        p.insert("w", w0.clone()).unwrap();
        let mut g = Graph::new();
        let w = g.param(&p, "w").unwrap();
        let sq = g.mul(w, w).unwrap();
        let s = g.sum(sq);
        let half = g.scale(s, 0.5);
        g.backward(half, Tensor::full(&[1, 1], 1.0)).unwrap().accumulate(&mut p);
        assert_eq!(p.grad("w").unwrap(), &w0);
    }

    #[test]
    fn backward_without_record_is_state_error() {
        let g = Graph::new();
        assert!(matches!(g.backward(Var(0), Tensor::zeros(&[1, 1])), Err(Error::State(_))));
    }

    #[test]
    fn fully_masked_row_is_an_error() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[2, 2]));
        assert!(matches!(g.softmax_rows(x, Some(&[false, false])), Err(Error::Masking(_))));
        let y = g.softmax_rows(x, Some(&[true, false])).unwrap();
        assert_eq!(g.value(y).data, vec![1.0, 0.0, 1.0, 0.0]);
    }
}

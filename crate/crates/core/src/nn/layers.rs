use rand::Rng;

use super::matrix::Matrix;
use super::params::ParamSet;
use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn new(params: &mut ParamSet, name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: params.add_glorot(&format!("{name}.w"), d_in, d_out, rng),
            b: params.add_constant(&format!("{name}.b"), 1, d_out, 0.0),
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var) -> Var {
        let w = tape.param(params, self.w);
        let b = tape.param(params, self.b);
        let h = tape.matmul(x, w);
        tape.add_row(h, b)
    }
}

/// Layer norm with learned gain and bias.
#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: usize,
    pub bias: usize,
}

impl LayerNorm {
    pub fn new(params: &mut ParamSet, name: &str, d: usize) -> Self {
        LayerNorm {
            gain: params.add_constant(&format!("{name}.gain"), 1, d, 1.0),
            bias: params.add_constant(&format!("{name}.bias"), 1, d, 0.0),
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var) -> Var {
        let n = tape.normalize(x);
        let g = tape.param(params, self.gain);
        let b = tape.param(params, self.bias);
        let y = tape.mul_row(n, g);
        tape.add_row(y, b)
    }
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub heads: usize,
    pub d_model: usize,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

/// Attention output plus the per-head attention weight matrices.
pub struct AttentionOutput {
    pub out: Var,
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn new(params: &mut ParamSet, name: &str, d_model: usize, heads: usize, rng: &mut impl Rng) -> Self {
        assert!(d_model.is_multiple_of(heads), "d_model must be divisible by heads");
        MultiHeadAttention {
            heads,
            d_model,
            q: Linear::new(params, &format!("{name}.q"), d_model, d_model, rng),
            k: Linear::new(params, &format!("{name}.k"), d_model, d_model, rng),
            v: Linear::new(params, &format!("{name}.v"), d_model, d_model, rng),
            o: Linear::new(params, &format!("{name}.o"), d_model, d_model, rng),
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        query: Var,
        memory: Var,
        causal: bool,
    ) -> AttentionOutput {
        let q = self.q.forward(tape, params, query);
        let k = self.k.forward(tape, params, memory);
        let v = self.v.forward(tape, params, memory);
        let dh = self.d_model / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.slice_cols(q, h * dh, dh);
            let kh = tape.slice_cols(k, h * dh, dh);
            let vh = tape.slice_cols(v, h * dh, dh);
            let s = tape.matmul_bt(qh, kh);
            let s = tape.scale(s, scale);
            let a = tape.softmax(s, causal);
            weights.push(a);
            outs.push(tape.matmul(a, vh));
        }
        let cat = if outs.len() == 1 { outs[0] } else { tape.concat_cols(&outs) };
        AttentionOutput {
            out: self.o.forward(tape, params, cat),
            weights,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(params: &mut ParamSet, name: &str, d_model: usize, d_ff: usize, rng: &mut impl Rng) -> Self {
        FeedForward {
            up: Linear::new(params, &format!("{name}.up"), d_model, d_ff, rng),
            down: Linear::new(params, &format!("{name}.down"), d_ff, d_model, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var) -> Var {
        let h = self.up.forward(tape, params, x);
        let h = tape.relu(h);
        self.down.forward(tape, params, h)
    }
}

/// Fixed sinusoidal position encodings for positions `0..len`.
pub fn sinusoidal_positions(len: usize, d: usize) -> Matrix {
    let mut m = Matrix::zeros(len, d);
    for pos in 0..len {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * rate;
            m.data[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    m
}

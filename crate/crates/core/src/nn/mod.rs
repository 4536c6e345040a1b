//! Minimal dense reverse-mode autodiff used by the built-in neural models.

mod layers;
mod matrix;
mod params;
mod tape;

pub use layers::{sinusoidal_positions, AttentionOutput, FeedForward, LayerNorm, Linear, MultiHeadAttention};
pub use matrix::Matrix;
pub use params::{Adam, ParamSet};
pub use tape::{sigmoid, Tape, Var};

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scalar objective `sum(W ⊙ f(x))` for a fixed random weighting `W`.
    fn objective(params: &ParamSet, build: &dyn Fn(&mut Tape, &ParamSet) -> Var, w: &Matrix) -> f64 {
        let mut tape = Tape::new();
        let out = build(&mut tape, params);
        tape.value(out).data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
    }

    fn check_gradients(build: &dyn Fn(&mut Tape, &ParamSet) -> Var, params: &ParamSet) {
        let mut tape = Tape::new();
        let out = build(&mut tape, params);
        let shape = tape.value(out).clone();
        let w = Matrix::from_vec(
            shape.rows,
            shape.cols,
            (0..shape.data.len()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4).collect(),
        );
        let mut grads = params.zeros_like();
        tape.backward(&[(out, w.clone())], &mut grads);
        let h = 1e-6;
        for id in 0..params.len() {
            for i in 0..params.value(id).data.len() {
                let mut p = params.clone();
                p.value_mut(id).data[i] += h;
                let up = objective(&p, build, &w);
                p.value_mut(id).data[i] -= 2.0 * h;
                let down = objective(&p, build, &w);
                let fd = (up - down) / (2.0 * h);
                let an = grads.value(id).data[i];
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(err < 1e-4, "{}[{i}]: analytic {an} vs numeric {fd}", params.name(id));
            }
        }
    }

    #[test]
    fn attention_block_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamSet::new();
        let emb = params.add_normal("emb", 6, 4, 0.5, &mut rng);
        let mha = MultiHeadAttention::new(&mut params, "att", 4, 2, &mut rng);
        let ln = LayerNorm::new(&mut params, "ln", 4);
        let ff = FeedForward::new(&mut params, "ff", 4, 6, &mut rng);
        let build = move |tape: &mut Tape, p: &ParamSet| {
            let e = tape.param(p, emb);
            let x = tape.gather(e, &[1, 3, 3, 5]);
            let mem = tape.gather(e, &[0, 2, 4]);
            let a = mha.forward(tape, p, x, mem, false);
            let s = mha.forward(tape, p, a.out, a.out, true);
            let y = tape.add(x, s.out);
            let y = ln.forward(tape, p, y);
            let f = ff.forward(tape, p, y);
            let t = tape.tanh(f);
            let r = tape.slice_rows(t, 1, 2);
            tape.sigmoid(r)
        };
        check_gradients(&build, &params);
    }

    #[test]
    fn concat_rows_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = ParamSet::new();
        let a = params.add_normal("a", 2, 3, 1.0, &mut rng);
        let b = params.add_normal("b", 1, 3, 1.0, &mut rng);
        let build = move |tape: &mut Tape, p: &ParamSet| {
            let x = tape.param(p, a);
            let y = tape.param(p, b);
            let c = tape.concat_rows(&[x, y]);
            tape.softmax(c, false)
        };
        check_gradients(&build, &params);
    }

    #[test]
    fn causal_softmax_masks_future() {
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::from_vec(2, 2, vec![0.0, 5.0, 0.0, 0.0]));
        let y = tape.softmax(x, true);
        assert_eq!(tape.value(y).row(0), &[1.0, 0.0]);
        assert_eq!(tape.value(y).row(1), &[0.5, 0.5]);
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::labels::label_against;
use crate::corpus::{Token, TrainingView};
use crate::nn::{
    sigmoid, sinusoidal_positions, Adam, FeedForward, LayerNorm, Linear, Matrix,
    MultiHeadAttention, ParamSet, Tape, Var,
};
use crate::vocab::SubwordVocab;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanPooling {
    /// Softmax-weighted sum of subword states, weights from a learned
    /// scoring vector.
    Attention,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralScorerConfig {
    pub d_model: usize,
    pub heads: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub min_word_freq: usize,
    pub pooling: SpanPooling,
    pub seed: u64,
}

impl Default for NeuralScorerConfig {
    fn default() -> Self {
        NeuralScorerConfig {
            d_model: 32,
            heads: 2,
            hidden: 32,
            epochs: 4,
            learning_rate: 3e-3,
            batch_size: 16,
            min_word_freq: 2,
            pooling: SpanPooling::Attention,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layout {
    emb: usize,
    attn: [usize; 8],
    ln1: [usize; 2],
    ff: [usize; 4],
    ln2: [usize; 2],
    pool: usize,
    head1: [usize; 2],
    head2: [usize; 2],
}

/// Contextual scorer: subword embeddings, one self-attention encoder layer,
/// span pooling per word and a two-layer perceptron ending in a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralScorer {
    pub config: NeuralScorerConfig,
    pub vocab: SubwordVocab,
    pub params: ParamSet,
    layout: Layout,
    /// Min and max raw output over the training occurrences.
    pub train_range: (f64, f64),
}

struct Modules {
    attn: MultiHeadAttention,
    ln1: LayerNorm,
    ff: FeedForward,
    ln2: LayerNorm,
    head1: Linear,
    head2: Linear,
}

const MAX_POSITIONS: usize = 256;

impl NeuralScorer {
    pub fn init(vocab: SubwordVocab, config: NeuralScorerConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d_model;
        let mut params = ParamSet::new();
        let emb = params.add_normal("emb", vocab.len(), d, 0.3, &mut rng);
        let attn = MultiHeadAttention::new(&mut params, "enc.attn", d, config.heads, &mut rng);
        let ln1 = LayerNorm::new(&mut params, "enc.ln1", d);
        let ff = FeedForward::new(&mut params, "enc.ff", d, 2 * d, &mut rng);
        let ln2 = LayerNorm::new(&mut params, "enc.ln2", d);
        let pool = params.add_glorot("pool.score", d, 1, &mut rng);
        let head1 = Linear::new(&mut params, "head.1", d, config.hidden, &mut rng);
        let head2 = Linear::new(&mut params, "head.2", config.hidden, 1, &mut rng);
        let layout = Layout {
            emb,
            attn: [
                attn.q.w, attn.q.b, attn.k.w, attn.k.b, attn.v.w, attn.v.b, attn.o.w, attn.o.b,
            ],
            ln1: [ln1.gain, ln1.bias],
            ff: [ff.up.w, ff.up.b, ff.down.w, ff.down.b],
            ln2: [ln2.gain, ln2.bias],
            pool,
            head1: [head1.w, head1.b],
            head2: [head2.w, head2.b],
        };
        NeuralScorer {
            config,
            vocab,
            params,
            layout,
            train_range: (0.0, 1.0),
        }
    }

    fn modules(&self) -> Modules {
        let l = &self.layout;
        let lin = |p: [usize; 2]| Linear { w: p[0], b: p[1] };
        Modules {
            attn: MultiHeadAttention {
                heads: self.config.heads,
                d_model: self.config.d_model,
                q: lin([l.attn[0], l.attn[1]]),
                k: lin([l.attn[2], l.attn[3]]),
                v: lin([l.attn[4], l.attn[5]]),
                o: lin([l.attn[6], l.attn[7]]),
            },
            ln1: LayerNorm { gain: l.ln1[0], bias: l.ln1[1] },
            ff: FeedForward {
                up: lin([l.ff[0], l.ff[1]]),
                down: lin([l.ff[2], l.ff[3]]),
            },
            ln2: LayerNorm { gain: l.ln2[0], bias: l.ln2[1] },
            head1: lin(l.head1),
            head2: lin(l.head2),
        }
    }

    /// Records the forward pass and returns one pre-sigmoid logit per
    /// content word, stacked as an `n × 1` column.
    fn forward(&self, tape: &mut Tape, utterance: &[Token]) -> Option<Var> {
        let surfaces: Vec<&str> = utterance.iter().map(|t| t.surface.as_str()).collect();
        let (ids, spans) = self.vocab.encode_words(&surfaces);
        let ids: Vec<usize> = ids.into_iter().take(MAX_POSITIONS).map(|i| i as usize).collect();
        let n = ids.len();
        let m = self.modules();
        let p = &self.params;
        let emb = tape.param(p, self.layout.emb);
        let x = tape.gather(emb, &ids);
        let pos = tape.leaf(sinusoidal_positions(n, self.config.d_model));
        let x = tape.add(x, pos);
        let a = m.attn.forward(tape, p, x, x, false);
        let h = tape.add(x, a.out);
        let h = m.ln1.forward(tape, p, h);
        let f = m.ff.forward(tape, p, h);
        let h2 = tape.add(h, f);
        let h = m.ln2.forward(tape, p, h2);

        let mut logits = Vec::new();
        for (tok, span) in utterance.iter().zip(&spans) {
            if !tok.is_content || span.end > n || span.is_empty() {
                continue;
            }
            let states = tape.slice_rows(h, span.start, span.len());
            let pooled = match self.config.pooling {
                SpanPooling::Attention => {
                    let w = tape.param(p, self.layout.pool);
                    let s = tape.matmul(states, w);
                    let sr = column_to_row(tape, s);
                    let a = tape.softmax(sr, false);
                    tape.matmul(a, states)
                }
                SpanPooling::Mean => {
                    let k = span.len();
                    let a = tape.leaf(Matrix::from_vec(1, k, vec![1.0 / k as f64; k]));
                    tape.matmul(a, states)
                }
            };
            let z = m.head1.forward(tape, p, pooled);
            let z = tape.tanh(z);
            logits.push(m.head2.forward(tape, p, z));
        }
        if logits.is_empty() {
            None
        } else {
            Some(tape.concat_rows(&logits))
        }
    }

    /// Raw sigmoid outputs, one per content word in utterance order.
    pub fn raw_scores(&self, utterance: &[Token]) -> Vec<f64> {
        let mut tape = Tape::new();
        match self.forward(&mut tape, utterance) {
            Some(v) => tape.value(v).data.iter().map(|&z| sigmoid(z)).collect(),
            None => Vec::new(),
        }
    }

    /// Trains with per-word binary cross-entropy. Returns the model and the
    /// mean training loss of each epoch.
    pub fn train(view: &TrainingView, config: NeuralScorerConfig) -> Result<(Self, Vec<f64>)> {
        let words = view
            .pairs
            .iter()
            .flat_map(|(r, _)| r.utterance.iter().map(|t| t.surface.as_str()));
        let vocab = SubwordVocab::build(words, config.min_word_freq);
        let mut model = NeuralScorer::init(vocab, config.clone());
        let examples: Vec<(&[Token], Vec<f64>)> = view
            .iter()
            .map(|(r, reference)| {
                let labels = label_against(&r.utterance, &[reference])
                    .into_iter()
                    .map(|(_, l)| f64::from(l))
                    .collect();
                (r.utterance.as_slice(), labels)
            })
            .collect();
        let mut opt = Adam::new(&model.params, config.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut grads = model.params.zeros_like();
        let mut history = Vec::with_capacity(config.epochs);
        let batch = config.batch_size.max(1);
        let mut step = 0usize;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut n_words = 0usize;
            for chunk in order.chunks(batch) {
                grads.fill_zero();
                let mut batch_words = 0usize;
                for &i in chunk {
                    let (utt, labels) = &examples[i];
                    let mut tape = Tape::new();
                    let Some(z) = model.forward(&mut tape, utt) else { continue };
                    let zs = tape.value(z).data.clone();
                    let mut seed = Vec::with_capacity(zs.len());
                    for (zi, y) in zs.iter().zip(labels) {
                        let p = sigmoid(*zi);
                        epoch_loss += bce_from_logit(*zi, *y);
                        seed.push(p - y);
                    }
                    batch_words += zs.len();
                    tape.backward(&[(z, Matrix::from_vec(zs.len(), 1, seed))], &mut grads);
                }
                n_words += batch_words;
                if batch_words == 0 {
                    continue;
                }
                grads.scale(1.0 / batch_words as f64);
                step += 1;
                if !epoch_loss.is_finite() || !grads.all_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        step,
                        learning_rate: config.learning_rate,
                        loss: epoch_loss,
                    });
                }
                opt.step(&mut model.params, &grads);
            }
            history.push(epoch_loss / n_words.max(1) as f64);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (utt, _) in &examples {
            for s in model.raw_scores(utt) {
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        if lo.is_finite() {
            model.train_range = (lo, hi);
        }
        Ok((model, history))
    }
}

fn bce_from_logit(z: f64, y: f64) -> f64 {
    // log(1 + e^z) - y z, computed stably
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

/// `(1×1 one) · colᵀ` turns an `n × 1` column into a `1 × n` row.
fn column_to_row(tape: &mut Tape, col: Var) -> Var {
    let one = tape.leaf(Matrix::from_vec(1, 1, vec![1.0]));
    tape.matmul_bt(one, col)
}

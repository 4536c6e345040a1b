use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GenerativeModel, StepOutput};
use crate::nn::{
    sinusoidal_positions, FeedForward, LayerNorm, Matrix, MultiHeadAttention, ParamSet, Tape, Var,
};
use crate::util::write_atomic;
use crate::vocab::{SubwordVocab, BOS, EOS};
use crate::wls::log_softmax;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "repgen-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Which cross-attention maps are exposed through [`GenerativeModel::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionSource {
    /// Last decoder layer, averaged over heads.
    #[default]
    FinalLayer,
    /// Every decoder layer, averaged over layers and heads.
    AllLayers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub max_source_len: usize,
    pub max_target_len: usize,
    pub attention: AttentionSource,
    pub init_seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            d_model: 32,
            heads: 2,
            d_ff: 64,
            encoder_layers: 1,
            decoder_layers: 1,
            max_source_len: 48,
            max_target_len: 16,
            attention: AttentionSource::FinalLayer,
            init_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    attn: MultiHeadAttention,
    ln1: LayerNorm,
    ff: FeedForward,
    ln2: LayerNorm,
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    self_attn: MultiHeadAttention,
    ln1: LayerNorm,
    cross: MultiHeadAttention,
    ln2: LayerNorm,
    ff: FeedForward,
    ln3: LayerNorm,
}

#[derive(Debug, Clone)]
struct Modules {
    emb: usize,
    out_bias: usize,
    encoder: Vec<EncoderLayer>,
    decoder: Vec<DecoderLayer>,
}

/// Parameter ids are assigned in construction order, so rebuilding the
/// modules for a loaded parameter set yields the same ids.
fn build_modules(config: &ToyConfig, k: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Modules {
    let d = config.d_model;
    let emb = params.add_normal("emb", k, d, 1.0 / (d as f64).sqrt(), rng);
    let out_bias = params.add_constant("out.bias", 1, k, 0.0);
    let encoder = (0..config.encoder_layers)
        .map(|l| EncoderLayer {
            attn: MultiHeadAttention::new(params, &format!("enc{l}.attn"), d, config.heads, rng),
            ln1: LayerNorm::new(params, &format!("enc{l}.ln1"), d),
            ff: FeedForward::new(params, &format!("enc{l}.ff"), d, config.d_ff, rng),
            ln2: LayerNorm::new(params, &format!("enc{l}.ln2"), d),
        })
        .collect();
    let decoder = (0..config.decoder_layers)
        .map(|l| DecoderLayer {
            self_attn: MultiHeadAttention::new(params, &format!("dec{l}.self"), d, config.heads, rng),
            ln1: LayerNorm::new(params, &format!("dec{l}.ln1"), d),
            cross: MultiHeadAttention::new(params, &format!("dec{l}.cross"), d, config.heads, rng),
            ln2: LayerNorm::new(params, &format!("dec{l}.ln2"), d),
            ff: FeedForward::new(params, &format!("dec{l}.ff"), d, config.d_ff, rng),
            ln3: LayerNorm::new(params, &format!("dec{l}.ln3"), d),
        })
        .collect();
    Modules {
        emb,
        out_bias,
        encoder,
        decoder,
    }
}

/// Small post-norm Transformer encoder-decoder with tied input/output
/// embeddings.
#[derive(Debug, Clone)]
pub struct ToyTransformer {
    pub config: ToyConfig,
    pub vocab: SubwordVocab,
    pub params: ParamSet,
    modules: Modules,
}

impl PartialEq for ToyTransformer {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.vocab == other.vocab && self.params == other.params
    }
}

/// Recorded forward pass.
pub(crate) struct Forward {
    /// `T × K` output logits.
    pub logits: Var,
    /// Cross-attention maps (`T × S`), one per decoder layer per head.
    pub cross: Vec<Vec<Var>>,
}

/// Serialized model: architecture, vocabulary and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ToyConfig,
    pub vocab: SubwordVocab,
    pub params: ParamSet,
}

impl ToyTransformer {
    pub fn new(config: ToyConfig, vocab: SubwordVocab) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamSet::new();
        let modules = build_modules(&config, vocab.len(), &mut params, &mut rng);
        ToyTransformer {
            config,
            vocab,
            params,
            modules,
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Invalid(format!("not a model checkpoint (format `{}`)", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Invalid(format!("unsupported checkpoint version {}", ckpt.version)));
        }
        let mut shadow = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let modules = build_modules(&ckpt.config, ckpt.vocab.len(), &mut shadow, &mut rng);
        if shadow.len() != ckpt.params.len()
            || (0..shadow.len()).any(|i| {
                shadow.name(i) != ckpt.params.name(i)
                    || !shadow.value(i).same_shape(ckpt.params.value(i))
            })
        {
            return Err(Error::Invalid("checkpoint parameters do not match its configuration".into()));
        }
        Ok(ToyTransformer {
            config: ckpt.config,
            vocab: ckpt.vocab,
            params: ckpt.params,
            modules,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &serde_json::to_vec(&self.to_checkpoint())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(serde_json::from_slice(&bytes)?)
    }

    /// Records the forward pass for `source` and decoder inputs
    /// `BOS, prefix...`.
    pub(crate) fn forward(&self, tape: &mut Tape, source: &[u32], prefix: &[u32]) -> Forward {
        let d = self.config.d_model;
        let p = &self.params;
        let m = &self.modules;
        let scale = (d as f64).sqrt();
        let emb = tape.param(p, m.emb);

        let src: Vec<usize> = source.iter().map(|&i| i as usize).collect();
        let x = tape.gather(emb, &src);
        let x = tape.scale(x, scale);
        let pos = tape.leaf(sinusoidal_positions(src.len(), d));
        let mut h = tape.add(x, pos);
        for layer in &m.encoder {
            let a = layer.attn.forward(tape, p, h, h, false);
            let r = tape.add(h, a.out);
            let r = layer.ln1.forward(tape, p, r);
            let f = layer.ff.forward(tape, p, r);
            let r2 = tape.add(r, f);
            h = layer.ln2.forward(tape, p, r2);
        }
        let memory = h;

        let mut dec_in = Vec::with_capacity(prefix.len() + 1);
        dec_in.push(BOS as usize);
        dec_in.extend(prefix.iter().map(|&i| i as usize));
        let y = tape.gather(emb, &dec_in);
        let y = tape.scale(y, scale);
        let pos = tape.leaf(sinusoidal_positions(dec_in.len(), d));
        let mut g = tape.add(y, pos);
        let mut cross = Vec::with_capacity(m.decoder.len());
        for layer in &m.decoder {
            let a = layer.self_attn.forward(tape, p, g, g, true);
            let r = tape.add(g, a.out);
            let r = layer.ln1.forward(tape, p, r);
            let c = layer.cross.forward(tape, p, r, memory, false);
            cross.push(c.weights);
            let r2 = tape.add(r, c.out);
            let r2 = layer.ln2.forward(tape, p, r2);
            let f = layer.ff.forward(tape, p, r2);
            let r3 = tape.add(r2, f);
            g = layer.ln3.forward(tape, p, r3);
        }
        let logits = tape.matmul_bt(g, emb);
        let bias = tape.param(p, m.out_bias);
        let logits = tape.add_row(logits, bias);
        Forward { logits, cross }
    }

    fn attention_row(&self, tape: &Tape, fwd: &Forward, row: usize) -> Vec<f64> {
        let layers: &[Vec<Var>] = match self.config.attention {
            AttentionSource::FinalLayer => &fwd.cross[fwd.cross.len() - 1..],
            AttentionSource::AllLayers => &fwd.cross,
        };
        let n_maps: usize = layers.iter().map(Vec::len).sum();
        let mut out: Vec<f64> = Vec::new();
        for heads in layers {
            for v in heads {
                let a = tape.value(*v).row(row);
                if out.is_empty() {
                    out = vec![0.0; a.len()];
                }
                for (o, x) in out.iter_mut().zip(a) {
                    *o += x;
                }
            }
        }
        out.iter_mut().for_each(|o| *o /= n_maps as f64);
        out
    }

    /// Encodes words into source ids, truncated to the model's limit.
    pub fn encode_source<S: AsRef<str>>(&self, words: &[S]) -> Vec<u32> {
        let (mut ids, _) = self.vocab.encode_words(words);
        ids.truncate(self.config.max_source_len);
        ids
    }
}

impl GenerativeModel for ToyTransformer {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn eos_id(&self) -> u32 {
        EOS
    }

    fn max_target_len(&self) -> usize {
        self.config.max_target_len
    }

    fn max_source_len(&self) -> usize {
        self.config.max_source_len
    }

    fn provides_attention(&self) -> bool {
        true
    }

    fn step(&self, source: &[u32], prefix: &[u32]) -> Result<StepOutput> {
        if source.is_empty() {
            return Err(Error::Invalid("empty source".into()));
        }
        if prefix.len() >= self.config.max_target_len {
            return Err(Error::Invalid(format!(
                "prefix length {} reaches maximum target length {}",
                prefix.len(),
                self.config.max_target_len
            )));
        }
        let k = self.vocab.len() as u32;
        if let Some(bad) = source.iter().chain(prefix).find(|&&i| i >= k) {
            return Err(Error::Lookup(format!("token id {bad} outside vocabulary of {k}")));
        }
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, source, prefix);
        let logits: &Matrix = tape.value(fwd.logits);
        let last = logits.rows - 1;
        Ok(StepOutput {
            log_probs: log_softmax(logits.row(last)),
            attention: Some(self.attention_row(&tape, &fwd, last)),
        })
    }

    fn vocab(&self) -> Option<&SubwordVocab> {
        Some(&self.vocab)
    }
}

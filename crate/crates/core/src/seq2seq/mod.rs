//! Conditional generation substrate.
//!
//! [`GenerativeModel`] is the seam every decoder talks to: next-subword
//! log-probabilities plus, when available, one cross-attention row over the
//! source positions. Implementations:
//!
//! * [`TableModel`]: explicit probability tables, used as an oracle substrate.
//! * [`ToyTransformer`]: a small encoder-decoder trained with [`train`].
//! * [`PluginModel`]: any external program speaking the JSON-lines protocol.

mod plugin;
mod table;
mod train;
mod transformer;

pub use plugin::{serve_plugin, PluginHello, PluginModel, PluginRequest, PluginResponse};
pub use table::TableModel;
pub use train::{encode_pair, train, TrainConfig, TrainReport};
pub use transformer::{AttentionSource, Checkpoint, ToyConfig, ToyTransformer, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

use crate::vocab::SubwordVocab;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Log-probabilities over the `K` vocabulary entries.
    pub log_probs: Vec<f64>,
    /// Attention over source positions; sums to 1 when present.
    pub attention: Option<Vec<f64>>,
}

pub trait GenerativeModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn eos_id(&self) -> u32;

    /// Longest response, in subwords, the model will be asked to produce.
    fn max_target_len(&self) -> usize;

    fn max_source_len(&self) -> usize {
        usize::MAX
    }

    fn provides_attention(&self) -> bool;

    /// Distribution over the next subword given `source` and the generated
    /// `prefix` (which never contains the begin-of-sequence marker).
    fn step(&self, source: &[u32], prefix: &[u32]) -> Result<StepOutput>;

    fn vocab(&self) -> Option<&SubwordVocab> {
        None
    }
}

/// Sum of stepwise log-probabilities of `response`, which must end with
/// the model's end-of-sequence id.
pub fn sequence_log_prob(model: &dyn GenerativeModel, source: &[u32], response: &[u32]) -> Result<f64> {
    if response.last() != Some(&model.eos_id()) {
        return Err(Error::Invalid("response must end with end-of-sequence".into()));
    }
    if response.len() > model.max_target_len() {
        return Err(Error::Invalid(format!(
            "response length {} exceeds maximum target length {}",
            response.len(),
            model.max_target_len()
        )));
    }
    if source.len() > model.max_source_len() {
        return Err(Error::Invalid(format!(
            "source length {} exceeds maximum source length {}",
            source.len(),
            model.max_source_len()
        )));
    }
    let mut total = 0.0;
    for t in 0..response.len() {
        let out = model.step(source, &response[..t])?;
        let id = response[t] as usize;
        let lp = *out
            .log_probs
            .get(id)
            .ok_or_else(|| Error::Lookup(format!("token id {id} outside vocabulary")))?;
        total += lp;
    }
    Ok(total)
}

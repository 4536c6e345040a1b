use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::transformer::{ToyConfig, ToyTransformer};
use crate::corpus::{split_words, DialogueRecord, TrainingView};
use crate::nn::{Adam, Matrix, Tape};
use crate::repeat_scorer::{score_utterance, ScorerModel};
use crate::vocab::{SubwordVocab, EOS};
use crate::wls::{build_target_distribution, loss_gradient, step_loss, LossMode, RepeatWeightVector, Smoothing};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ToyConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub min_word_freq: usize,
    pub smoothing: Smoothing,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ToyConfig::default(),
            epochs: 10,
            learning_rate: 2e-3,
            batch_size: 16,
            min_word_freq: 2,
            smoothing: Smoothing::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-example loss of the untrained model.
    pub initial_loss: f64,
    /// Mean per-example loss accumulated during each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Source ids for the utterance and target ids (reference + EOS).
pub fn encode_pair(vocab: &SubwordVocab, config: &ToyConfig, record: &DialogueRecord, reference: &str) -> (Vec<u32>, Vec<u32>) {
    let words: Vec<&str> = record.utterance.iter().map(|t| t.surface.as_str()).collect();
    let (mut source, _) = vocab.encode_words(&words);
    source.truncate(config.max_source_len);
    let (mut target, _) = vocab.encode_words(&split_words(reference));
    target.truncate(config.max_target_len.saturating_sub(1));
    target.push(EOS);
    (source, target)
}

struct Example {
    source: Vec<u32>,
    target: Vec<u32>,
    weights: Option<RepeatWeightVector>,
}

fn example_loss_and_grad(
    model: &ToyTransformer,
    ex: &Example,
    smoothing: &Smoothing,
    grads: Option<&mut crate::nn::ParamSet>,
) -> Result<f64> {
    let k = model.vocab.len();
    let zeros;
    let r = match &ex.weights {
        Some(w) => w,
        None => {
            zeros = RepeatWeightVector::zeros(k);
            &zeros
        }
    };
    let prefix = &ex.target[..ex.target.len() - 1];
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape, &ex.source, prefix);
    let logits = tape.value(fwd.logits);
    let t_len = ex.target.len() as f64;
    let mut loss = 0.0;
    let mut seed = Matrix::zeros(logits.rows, logits.cols);
    for (t, &y) in ex.target.iter().enumerate() {
        let q = build_target_distribution(smoothing, y as usize, k, r)?;
        let row = logits.row(t);
        loss += step_loss(row, &q) / t_len;
        if grads.is_some() {
            for (s, g) in seed.row_mut(t).iter_mut().zip(loss_gradient(row, &q)) {
                *s = g / t_len;
            }
        }
    }
    if let Some(grads) = grads {
        tape.backward(&[(fwd.logits, seed)], grads);
    }
    Ok(loss)
}

/// Teacher-forced training with the target distributions of
/// `config.smoothing`. WLS needs `scorer` to produce per-source repeat
/// scores; the other modes ignore it.
pub fn train(config: &TrainConfig, view: &TrainingView, scorer: Option<&ScorerModel>) -> Result<(ToyTransformer, TrainReport)> {
    if view.is_empty() {
        return Err(Error::Invalid("training view is empty".into()));
    }
    config.smoothing.check()?;
    let weighted = config.smoothing.mode == LossMode::Weighted;
    if weighted && scorer.is_none() {
        return Err(Error::Param("weighted label smoothing needs a repeat scorer".into()));
    }

    let mut words: Vec<String> = Vec::new();
    for (record, reference) in view.iter() {
        words.extend(record.utterance.iter().map(|t| t.surface.clone()));
        words.extend(split_words(reference));
    }
    let vocab = SubwordVocab::build(words.iter().map(String::as_str), config.min_word_freq);
    let mut model_config = config.model.clone();
    model_config.init_seed = config.seed;
    let mut model = ToyTransformer::new(model_config, vocab);
    let k = model.vocab.len();

    let mut examples = Vec::with_capacity(view.len());
    for (record, reference) in view.iter() {
        let (source, target) = encode_pair(&model.vocab, &model.config, record, reference);
        let weights = match (weighted, scorer) {
            (true, Some(s)) => match score_utterance(s, &record.utterance, &model.vocab) {
                Ok(map) => Some(map.weight_vector(k)?),
                Err(Error::NoScorableWords) => None,
                Err(e) => return Err(e),
            },
            _ => None,
        };
        examples.push(Example { source, target, weights });
    }

    let mut report = TrainReport::default();
    let mut init_total = 0.0;
    for ex in &examples {
        init_total += example_loss_and_grad(&model, ex, &config.smoothing, None)?;
    }
    report.initial_loss = init_total / examples.len() as f64;

    let mut opt = Adam::new(&model.params, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grads = model.params.zeros_like();
    let batch = config.batch_size.max(1);
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            grads.fill_zero();
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += example_loss_and_grad(&model, &examples[i], &config.smoothing, Some(&mut grads))?;
            }
            step += 1;
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step,
                    learning_rate: config.learning_rate,
                    loss: batch_loss,
                });
            }
            grads.scale(1.0 / chunk.len() as f64);
            opt.step(&mut model.params, &grads);
            total += batch_loss;
        }
        let mean = total / examples.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        report.epoch_losses.push(mean);
    }
    Ok((model, report))
}

//! Flat key-value toolkit configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::SyntheticConfig;
use crate::decoder::{Ablation, RsmParams};
use crate::repeat_scorer::{NeuralScorerConfig, ScalingScope, SpanPooling};
use crate::seq2seq::{AttentionSource, ToyConfig, TrainConfig};
use crate::wls::{LossMode, Smoothing};
use crate::{Error, Result};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "REPGEN_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub seed: u64,

    // paths
    pub data_dir: PathBuf,
    pub train_file: String,
    pub valid_file: String,
    pub test_file: String,
    pub out_dir: PathBuf,

    // synthetic corpus
    pub synth_records: usize,
    pub synth_vocab_size: usize,
    pub synth_min_length: usize,
    pub synth_max_length: usize,
    pub synth_noise_rate: f64,
    pub synth_generic_rate: f64,
    pub synth_max_references: usize,
    pub valid_fraction: f64,
    pub test_fraction: f64,

    // tokenizer: only "lexicon" is built in
    pub tokenizer: String,

    // repeat scorer
    pub scorer: String,
    pub scaling: ScalingScope,
    pub scorer_d_model: usize,
    pub scorer_epochs: usize,
    pub scorer_learning_rate: f64,
    pub scorer_pooling: SpanPooling,

    // generator
    pub loss: LossMode,
    pub epsilon: f64,
    pub gamma: f64,
    pub renormalize: bool,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub max_source_len: usize,
    pub max_target_len: usize,
    pub attention: AttentionSource,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub min_word_freq: usize,

    // decoder
    pub alpha: f64,
    pub beta: f64,
    pub beam: usize,
    /// 0 selects `2 * |X| + 5`.
    pub max_length: usize,
    pub rs_floor: f64,
    pub ablation: String,
    pub per_step: bool,

    // evaluation
    pub rule_template: String,
    pub rouge_unit: String,
    /// Checkpoint whose vocabulary segments text when `rouge_unit` is
    /// `subword`.
    pub rouge_vocab: String,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        let toy = ToyConfig::default();
        let train = TrainConfig::default();
        let neural = NeuralScorerConfig::default();
        let synth = SyntheticConfig::default();
        ToolkitConfig {
            seed: 0,
            data_dir: PathBuf::from("data"),
            train_file: "train.jsonl".into(),
            valid_file: "valid.jsonl".into(),
            test_file: "test.jsonl".into(),
            out_dir: PathBuf::from("runs"),
            synth_records: synth.n_records,
            synth_vocab_size: synth.vocab_size,
            synth_min_length: synth.utterance_length_range.0,
            synth_max_length: synth.utterance_length_range.1,
            synth_noise_rate: synth.noise_rate,
            synth_generic_rate: synth.generic_rate,
            synth_max_references: synth.references_range.1,
            valid_fraction: 0.1,
            test_fraction: 0.1,
            tokenizer: "lexicon".into(),
            scorer: "empirical".into(),
            scaling: ScalingScope::Utterance,
            scorer_d_model: neural.d_model,
            scorer_epochs: neural.epochs,
            scorer_learning_rate: neural.learning_rate,
            scorer_pooling: neural.pooling,
            loss: LossMode::Weighted,
            epsilon: 0.1,
            gamma: 4.0,
            renormalize: false,
            d_model: toy.d_model,
            heads: toy.heads,
            d_ff: toy.d_ff,
            encoder_layers: toy.encoder_layers,
            decoder_layers: toy.decoder_layers,
            max_source_len: toy.max_source_len,
            max_target_len: toy.max_target_len,
            attention: toy.attention,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            min_word_freq: train.min_word_freq,
            alpha: 0.2,
            beta: 0.2,
            beam: 5,
            max_length: 0,
            rs_floor: 1e-6,
            ablation: "rsm".into(),
            per_step: false,
            rule_template: crate::evaluation::DEFAULT_TEMPLATE.into(),
            rouge_unit: "token".into(),
            rouge_vocab: String::new(),
        }
    }
}

impl ToolkitConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn train_path(&self) -> PathBuf {
        self.data_dir.join(&self.train_file)
    }

    pub fn valid_path(&self) -> PathBuf {
        self.data_dir.join(&self.valid_file)
    }

    pub fn test_path(&self) -> PathBuf {
        self.data_dir.join(&self.test_file)
    }

    pub fn synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            vocab_size: self.synth_vocab_size,
            n_records: self.synth_records,
            utterance_length_range: (self.synth_min_length, self.synth_max_length),
            noise_rate: self.synth_noise_rate,
            generic_rate: self.synth_generic_rate,
            references_range: (1, self.synth_max_references),
            seed: self.seed,
            ..SyntheticConfig::default()
        }
    }

    pub fn smoothing(&self) -> Smoothing {
        Smoothing {
            mode: self.loss,
            epsilon: self.epsilon,
            gamma: self.gamma,
            renormalize: self.renormalize,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            model: ToyConfig {
                d_model: self.d_model,
                heads: self.heads,
                d_ff: self.d_ff,
                encoder_layers: self.encoder_layers,
                decoder_layers: self.decoder_layers,
                max_source_len: self.max_source_len,
                max_target_len: self.max_target_len,
                attention: self.attention,
                init_seed: self.seed,
            },
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            min_word_freq: self.min_word_freq,
            smoothing: self.smoothing(),
            seed: self.seed,
        }
    }

    pub fn neural_scorer(&self) -> NeuralScorerConfig {
        NeuralScorerConfig {
            d_model: self.scorer_d_model,
            epochs: self.scorer_epochs,
            learning_rate: self.scorer_learning_rate,
            pooling: self.scorer_pooling,
            seed: self.seed,
            ..NeuralScorerConfig::default()
        }
    }

    pub fn rsm_params(&self) -> Result<RsmParams> {
        let ablation = Ablation::from_name(&self.ablation)
            .ok_or_else(|| Error::Param(format!("unknown ablation `{}`", self.ablation)))?;
        let p = RsmParams {
            alpha: self.alpha,
            beta: self.beta,
            beam_size: self.beam,
            max_length: (self.max_length > 0).then_some(self.max_length),
            ablation,
            rs_floor: self.rs_floor,
            per_step: self.per_step,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        self.smoothing().check()?;
        self.synthetic().check()?;
        self.rsm_params()?;
        if self.tokenizer != "lexicon" {
            return Err(Error::Param(format!("unknown tokenizer `{}`", self.tokenizer)));
        }
        if !matches!(self.scorer.as_str(), "empirical" | "neural") {
            return Err(Error::Param(format!("unknown scorer `{}`", self.scorer)));
        }
        if !matches!(self.rouge_unit.as_str(), "token" | "subword") {
            return Err(Error::Param(format!("unknown rouge_unit `{}`", self.rouge_unit)));
        }
        let held_out = self.valid_fraction + self.test_fraction;
        if !(0.0..1.0).contains(&held_out) || self.valid_fraction < 0.0 || self.test_fraction < 0.0 {
            return Err(Error::Param("valid_fraction + test_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ToolkitConfig::default();
        assert_eq!((c.epsilon, c.gamma, c.alpha, c.beta, c.beam), (0.1, 4.0, 0.2, 0.2, 5));
        c.check().unwrap();
    }

    #[test]
    fn toml_roundtrip_and_partial_files() {
        let c = ToolkitConfig::default();
        assert_eq!(ToolkitConfig::from_toml(&c.to_toml()).unwrap(), c);
        let partial = ToolkitConfig::from_toml("gamma = 2.0\nloss = \"ls\"\n").unwrap();
        assert_eq!(partial.gamma, 2.0);
        assert_eq!(partial.loss, LossMode::LabelSmoothing);
        assert!(ToolkitConfig::from_toml("gamm = 1").is_err());
    }
}

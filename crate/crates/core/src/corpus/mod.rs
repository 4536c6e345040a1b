//! Dialogue records, dataset I/O, training views, corpus statistics and the
//! synthetic corpus generator.

mod io;
mod record;
mod split;
mod stats;
mod synthetic;
mod tokenizer;

pub use io::{
    header_line, load_dataset, parse_record_line, record_to_json, write_dataset, HEADER_KEY,
};
pub use io::is_header_line;
pub use record::{validate_record, DialogueRecord, Pos, Token, ValidationReport};
pub use split::{split_for_training, TrainingView};
pub use stats::{compute_stats, compute_stats_with, CorpusStats, PosShare, StatsOptions};
pub use synthetic::{
    default_templates, generate_synthetic, SyntheticConfig, SyntheticLexicon, AUXILIARIES,
    FILLERS, GENERIC, OTHERS, PARTICLES, SLOT,
};
pub use tokenizer::{split_words, LexiconTokenizer, Tokenizer};

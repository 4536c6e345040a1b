//! The `repgen` command-line driver.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{ToolkitConfig, CONFIG_ENV};
use crate::corpus::{
    compute_stats_with, generate_synthetic, header_line, is_header_line, load_dataset, split_for_training,
    write_dataset, DialogueRecord, LexiconTokenizer, StatsOptions, Tokenizer,
};
use crate::decoder::{generate_for_record, Ablation, GenerationRecord, RsmParams};
use crate::evaluation::{evaluate_system, rule_based_response, wilcoxon_rank_sum, MetricsReport, RougeUnit};
use crate::repeat_scorer::{mean_raw_by_word, train_empirical, train_neural, ScorerModel};
use crate::seq2seq::{serve_plugin, train, GenerativeModel, PluginModel, ToyTransformer};
use crate::util::{spearman, write_atomic};
use crate::wls::LossMode;
use crate::{Error, Result};

pub const DEFAULT_GAMMAS: &str = "0,0.1,0.5,1,2,3,4,5,10";

#[derive(Debug, Parser)]
#[command(name = "repgen", version, about = "Train, decode and evaluate repetition generators")]
struct Cli {
    /// Flat TOML config file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override any config key, e.g. `--set epochs=4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    loss: Option<LossMode>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    beam: Option<usize>,
    /// rsm, w/o-lp, w/o-cp, w/o-rs or none.
    #[arg(long, global = true)]
    ablation: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus and split it into train/valid/test files.
    DataGen {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus statistics.
    Stats {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Match words by lemma instead of surface.
        #[arg(long)]
        lemmas: bool,
    },
    /// Train a repeat scorer.
    TrainScorer {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// empirical or neural; defaults to the config value.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Train a generator.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        scorer: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode responses for a dataset.
    Generate {
        #[arg(long, conflicts_with_all = ["plugin", "rule_based"])]
        model: Option<PathBuf>,
        /// External model program speaking the JSON-lines protocol.
        #[arg(long)]
        plugin: Option<String>,
        /// Emit the template baseline instead of decoding.
        #[arg(long)]
        rule_based: bool,
        #[arg(long)]
        scorer: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score system outputs; optionally test against other systems.
    Evaluate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        compare: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode with the full scorer and each single-term ablation.
    Ablate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scorer: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one generator per gamma and report repeated-word % on validation data.
    SweepGamma {
        #[arg(long, default_value = DEFAULT_GAMMAS)]
        gammas: String,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        scorer: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wilcoxon rank-sum test between two samples of numbers.
    Significance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Read utterances from stdin and print the top response with its score terms.
    Repl {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scorer: Option<PathBuf>,
        /// Dataset whose tags seed the tokenizer lexicon.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    #[command(hide = true)]
    ServePlugin {
        #[arg(long)]
        model: PathBuf,
    },
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(cli, cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            1
        }
    }
}

fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::Param(format!("override `{raw}` is not KEY=VALUE")))?;
    let key = key.trim().to_string();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

fn resolve_config(cli: &Cli) -> Result<ToolkitConfig> {
    let base = match &cli.config {
        Some(p) => ToolkitConfig::load(p)?,
        None => ToolkitConfig::default(),
    };
    let mut table: toml::Table = toml::from_str(&base.to_toml()).expect("config renders as a table");
    for raw in &cli.overrides {
        let (k, v) = parse_override(raw)?;
        table.insert(k, v);
    }
    let mut cfg: ToolkitConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Invalid(format!("config: {e}")))?;
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.loss {
        cfg.loss = v;
    }
    if let Some(v) = cli.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = cli.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = cli.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = cli.beta {
        cfg.beta = v;
    }
    if let Some(v) = cli.beam {
        cfg.beam = v;
    }
    if let Some(v) = &cli.ablation {
        cfg.ablation = v.clone();
    }
    if let Some(v) = cli.epochs {
        cfg.epochs = v;
    }
    cfg.check()?;
    Ok(cfg)
}

fn config_json(cfg: &ToolkitConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn execute(cli: Cli, cfg: ToolkitConfig) -> Result<()> {
    log::info!("resolved config: {}", serde_json::to_string(&cfg).expect("config serializes"));
    match cli.command {
        Command::DataGen { out } => data_gen(&cfg, out.as_deref().unwrap_or(&cfg.data_dir)),
        Command::Stats { data, json, lemmas } => {
            let records = load_dataset(data.unwrap_or_else(|| cfg.train_path()))?;
            let tok = LexiconTokenizer::from_records(&records);
            let stats = compute_stats_with(&records, &tok, StatsOptions { match_lemmas: lemmas });
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                print!("{}", stats.to_table());
            }
            Ok(())
        }
        Command::TrainScorer { data, out, variant } => {
            let records = load_dataset(data.unwrap_or_else(|| cfg.train_path()))?;
            let variant = variant.unwrap_or_else(|| cfg.scorer.clone());
            let scorer = train_scorer(&cfg, &records, &variant)?;
            scorer.save(&out)?;
            if let Some(rho) = planted_correlation(&scorer, &records) {
                println!("spearman vs planted propensity: {rho:.4}");
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Train { data, scorer, out } => {
            let records = load_dataset(data.unwrap_or_else(|| cfg.train_path()))?;
            let scorer = match scorer {
                Some(p) => Some(ScorerModel::load(p)?),
                None if cfg.loss == LossMode::Weighted => {
                    log::info!("no --scorer given; training an empirical scorer on the training data");
                    Some(train_scorer(&cfg, &records, "empirical")?)
                }
                None => None,
            };
            let (model, report) = train_generator(&cfg, &records, scorer.as_ref())?;
            model.save(&out)?;
            let sidecar = json!({"config": config_json(&cfg), "report": report});
            write_atomic(&run_sidecar(&out), serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
            println!(
                "initial loss {:.4}, final loss {:.4}; wrote {}",
                report.initial_loss,
                report.epoch_losses.last().copied().unwrap_or(report.initial_loss),
                out.display()
            );
            Ok(())
        }
        Command::Generate {
            model,
            plugin,
            rule_based,
            scorer,
            data,
            out,
        } => {
            let records = load_dataset(data.unwrap_or_else(|| cfg.test_path()))?;
            let mut lines = vec![header_line(&config_json(&cfg))];
            if rule_based {
                for (i, r) in records.iter().enumerate() {
                    let text = rule_based_response(r, &cfg.rule_template, cfg.seed.wrapping_add(i as u64))?;
                    lines.push(serde_json::to_string(&json!({"dialogue_id": r.dialogue_id, "output": text}))?);
                }
            } else {
                let model = open_model(model.as_deref(), plugin.as_deref())?;
                let scorer = scorer.map(ScorerModel::load).transpose()?;
                let params = cfg.rsm_params()?;
                for g in generate_all(model.as_ref(), scorer.as_ref(), &records, &params)? {
                    lines.push(serde_json::to_string(&g)?);
                }
            }
            write_lines(&out, &lines)?;
            println!("wrote {} outputs to {}", records.len(), out.display());
            Ok(())
        }
        Command::Evaluate {
            system,
            test,
            compare,
            json: as_json,
            out,
        } => {
            let records = load_dataset(test.unwrap_or_else(|| cfg.test_path()))?;
            let (text, value) = evaluate_files(&cfg, &system, &compare, &records)?;
            if as_json {
                println!("{}", serde_json::to_string_pretty(&value)?);
            } else {
                print!("{text}");
            }
            if let Some(p) = out {
                write_atomic(&p, serde_json::to_string_pretty(&value)?.as_bytes())?;
            }
            Ok(())
        }
        Command::Ablate { model, scorer, data, out } => {
            let records = load_dataset(data.unwrap_or_else(|| cfg.test_path()))?;
            let model = ToyTransformer::load(&model)?;
            let scorer = ScorerModel::load(scorer)?;
            let rows = ablate(&cfg, &model, &scorer, &records)?;
            let width = 8;
            println!("{}", MetricsReport::table_header(width));
            for (label, rep) in &rows {
                println!("{}", rep.table_row(label, width));
            }
            if let Some(p) = out {
                let v: BTreeMap<&str, Value> = rows
                    .iter()
                    .map(|(l, r)| (l.as_str(), summary_json(r)))
                    .collect();
                let doc = json!({"config": config_json(&cfg), "rows": v});
                write_atomic(&p, serde_json::to_string_pretty(&doc)?.as_bytes())?;
            }
            Ok(())
        }
        Command::SweepGamma {
            gammas,
            train: train_path,
            valid,
            scorer,
            out,
        } => {
            let gammas = parse_list(&gammas)?;
            let train_records = load_dataset(train_path.unwrap_or_else(|| cfg.train_path()))?;
            let valid_records = load_dataset(valid.unwrap_or_else(|| cfg.valid_path()))?;
            let scorer = match scorer {
                Some(p) => ScorerModel::load(p)?,
                None => train_scorer(&cfg, &train_records, &cfg.scorer)?,
            };
            let rows = sweep_gamma(&cfg, &train_records, &valid_records, &scorer, &gammas)?;
            let table = sweep_table(&rows);
            print!("{table}");
            if let Some(p) = out {
                let doc = json!({
                    "config": config_json(&cfg),
                    "rows": rows.iter().map(|(g, r)| json!({"gamma": g, "repeated_word_pct": r.repeated_word_pct})).collect::<Vec<_>>(),
                });
                write_atomic(&p, serde_json::to_string_pretty(&doc)?.as_bytes())?;
            }
            Ok(())
        }
        Command::Significance { a, b, json: as_json } => {
            let xs = read_numbers(&a)?;
            let ys = read_numbers(&b)?;
            let res = wilcoxon_rank_sum(&xs, &ys)?;
            if as_json {
                println!("{}", serde_json::to_string(&res)?);
            } else {
                println!(
                    "statistic {:.4}  p {:.6}  method {}",
                    res.statistic,
                    res.p_value,
                    serde_json::to_value(res.method)?.as_str().unwrap_or("")
                );
            }
            Ok(())
        }
        Command::Repl { model, scorer, lexicon } => {
            let model = ToyTransformer::load(&model)?;
            let scorer = scorer.map(ScorerModel::load).transpose()?;
            let tok = match lexicon {
                Some(p) => LexiconTokenizer::from_records(&load_dataset(p)?),
                None => LexiconTokenizer::default(),
            };
            let params = cfg.rsm_params()?;
            let stdin = std::io::stdin();
            let mut stdout = std::io::stdout();
            repl(&model, scorer.as_ref(), &tok, &params, stdin.lock(), &mut stdout)
        }
        Command::ServePlugin { model } => {
            let model = ToyTransformer::load(&model)?;
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            serve_plugin(&model, stdin.lock(), stdout.lock())
        }
    }
}

/// Path of the run record written next to a checkpoint.
pub fn run_sidecar(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut buf = String::new();
    for l in lines {
        buf.push_str(l);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Param(format!("`{x}` is not a number")))
        })
        .collect()
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(v) = serde_json::from_str::<Vec<f64>>(&text) {
        return Ok(v);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse { line: 0, message: format!("{}: `{s}` is not a number", path.display()) })
        })
        .collect()
}

fn data_gen(cfg: &ToolkitConfig, out: &Path) -> Result<()> {
    let records = generate_synthetic(&cfg.synthetic())?;
    let n = records.len();
    let n_test = (n as f64 * cfg.test_fraction).round() as usize;
    let n_valid = (n as f64 * cfg.valid_fraction).round() as usize;
    let n_train = n - n_test - n_valid;
    let header = config_json(cfg);
    let parts = [
        (&cfg.train_file, &records[..n_train]),
        (&cfg.valid_file, &records[n_train..n_train + n_valid]),
        (&cfg.test_file, &records[n_train + n_valid..]),
    ];
    for (name, part) in parts {
        let path = out.join(name);
        write_dataset(&path, part, Some(&header))?;
        println!("wrote {} records to {}", part.len(), path.display());
    }
    Ok(())
}

/// Trains the configured scorer variant on one sampled reference per record.
pub fn train_scorer(cfg: &ToolkitConfig, records: &[DialogueRecord], variant: &str) -> Result<ScorerModel> {
    let view = split_for_training(records, cfg.seed);
    let model = match variant {
        "empirical" => train_empirical(&view)?,
        "neural" => {
            let (m, history) = train_neural(&view, cfg.neural_scorer())?;
            log::info!("scorer epoch losses: {history:?}");
            m
        }
        other => return Err(Error::Param(format!("unknown scorer variant `{other}`"))),
    };
    Ok(model.with_scaling(cfg.scaling))
}

/// Spearman correlation between mean raw scores and planted propensities,
/// when the records carry them.
pub fn planted_correlation(scorer: &ScorerModel, records: &[DialogueRecord]) -> Option<f64> {
    let mut truth: BTreeMap<String, f64> = BTreeMap::new();
    for r in records {
        truth.extend(r.planted_propensity()?);
    }
    let scores = mean_raw_by_word(scorer, records);
    let (xs, ys): (Vec<f64>, Vec<f64>) = scores
        .iter()
        .filter_map(|(w, s)| truth.get(w).map(|t| (*s, *t)))
        .unzip();
    (xs.len() >= 2).then(|| spearman(&xs, &ys))
}

pub fn train_generator(
    cfg: &ToolkitConfig,
    records: &[DialogueRecord],
    scorer: Option<&ScorerModel>,
) -> Result<(ToyTransformer, crate::seq2seq::TrainReport)> {
    let view = split_for_training(records, cfg.seed);
    train(&cfg.train_config(), &view, scorer)
}

fn open_model(model: Option<&Path>, plugin: Option<&str>) -> Result<Box<dyn GenerativeModel>> {
    match (model, plugin) {
        (Some(p), _) => Ok(Box::new(ToyTransformer::load(p)?)),
        (None, Some(cmd)) => {
            let mut parts = cmd.split_whitespace();
            let program = parts
                .next()
                .ok_or_else(|| Error::Param("empty --plugin command".into()))?;
            let args: Vec<String> = parts.map(String::from).collect();
            Ok(Box::new(PluginModel::spawn(program, &args)?))
        }
        (None, None) => Err(Error::Param("generate needs --model, --plugin or --rule-based".into())),
    }
}

pub fn generate_all(
    model: &dyn GenerativeModel,
    scorer: Option<&ScorerModel>,
    records: &[DialogueRecord],
    params: &RsmParams,
) -> Result<Vec<GenerationRecord>> {
    records
        .iter()
        .map(|r| generate_for_record(model, scorer, r, params))
        .collect()
}

/// Reads `(dialogue_id, output)` pairs from a system output file, skipping
/// the header line.
pub fn load_outputs(path: &Path) -> Result<Vec<(String, String)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || is_header_line(&line) {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let field = |k: &str| {
            v.get(k).and_then(Value::as_str).map(String::from).ok_or_else(|| Error::Validation {
                line: i + 1,
                fields: vec![k.to_string()],
            })
        };
        out.push((field("dialogue_id")?, field("output")?));
    }
    Ok(out)
}

fn rouge_unit(cfg: &ToolkitConfig) -> Result<RougeUnit> {
    if cfg.rouge_unit != "subword" {
        return Ok(RougeUnit::Token);
    }
    if cfg.rouge_vocab.is_empty() {
        return Err(Error::Param("rouge_unit = \"subword\" needs rouge_vocab (a checkpoint path)".into()));
    }
    Ok(RougeUnit::Subword(ToyTransformer::load(&cfg.rouge_vocab)?.vocab))
}

pub fn evaluate_outputs(cfg: &ToolkitConfig, outputs: &[(String, String)], records: &[DialogueRecord]) -> Result<MetricsReport> {
    let tok = LexiconTokenizer::from_records(records);
    evaluate_system(outputs, records, &tok, &rouge_unit(cfg)?)
}

fn summary_json(r: &MetricsReport) -> Value {
    json!({
        "rouge1": r.rouge1,
        "rouge2": r.rouge2,
        "rougeL": r.rouge_l,
        "repeated_word_pct": r.repeated_word_pct,
        "n": r.n,
    })
}

fn label_of(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

const METRICS: [(&str, &str); 4] = [("rouge1", "RG-1"), ("rouge2", "RG-2"), ("rougeL", "RG-L"), ("repeated", "%")];

fn evaluate_files(
    cfg: &ToolkitConfig,
    system: &Path,
    compare: &[PathBuf],
    records: &[DialogueRecord],
) -> Result<(String, Value)> {
    let tok = LexiconTokenizer::from_records(records);
    let unit = rouge_unit(cfg)?;
    let mut reports = Vec::new();
    for p in std::iter::once(system).chain(compare.iter().map(PathBuf::as_path)) {
        let outs = load_outputs(p)?;
        reports.push((label_of(p), evaluate_system(&outs, records, &tok, &unit)?));
    }
    let width = reports.iter().map(|(l, _)| l.len()).max().unwrap_or(6).max(6);
    let mut text = String::new();
    writeln!(text, "{}", MetricsReport::table_header(width)).unwrap();
    for (label, rep) in &reports {
        writeln!(text, "{}", rep.table_row(label, width)).unwrap();
    }
    let mut tests = Vec::new();
    let (sys_label, sys) = &reports[0];
    for (label, other) in &reports[1..] {
        write!(text, "\nwilcoxon rank-sum, {sys_label} vs {label}:").unwrap();
        let mut entry = serde_json::Map::new();
        entry.insert("against".into(), json!(label));
        for (key, short) in METRICS {
            let res = wilcoxon_rank_sum(sys.metric(key).unwrap(), other.metric(key).unwrap())?;
            write!(text, "  {short} p={:.4}", res.p_value).unwrap();
            entry.insert(key.into(), serde_json::to_value(res)?);
        }
        text.push('\n');
        tests.push(Value::Object(entry));
    }
    let systems: BTreeMap<&str, Value> = reports.iter().map(|(l, r)| (l.as_str(), serde_json::to_value(r).unwrap())).collect();
    Ok((text, json!({"config": config_json(cfg), "systems": systems, "significance": tests})))
}

pub const ABLATIONS: [(&str, &str); 4] = [("RSM", "rsm"), ("w/o lp", "w/o-lp"), ("w/o cp", "w/o-cp"), ("w/o rs", "w/o-rs")];

/// Decodes `records` once per ablation setting.
pub fn ablate(
    cfg: &ToolkitConfig,
    model: &dyn GenerativeModel,
    scorer: &ScorerModel,
    records: &[DialogueRecord],
) -> Result<Vec<(String, MetricsReport)>> {
    let base = cfg.rsm_params()?;
    let mut rows = Vec::new();
    for (label, name) in ABLATIONS {
        let params = RsmParams {
            ablation: Ablation::from_name(name).expect("known ablation"),
            ..base.clone()
        };
        let outs: Vec<(String, String)> = generate_all(model, Some(scorer), records, &params)?
            .into_iter()
            .map(|g| (g.dialogue_id, g.output))
            .collect();
        rows.push((label.to_string(), evaluate_outputs(cfg, &outs, records)?));
    }
    Ok(rows)
}

/// Trains a WLS generator per gamma and evaluates it on `valid`.
pub fn sweep_gamma(
    cfg: &ToolkitConfig,
    train_records: &[DialogueRecord],
    valid: &[DialogueRecord],
    scorer: &ScorerModel,
    gammas: &[f64],
) -> Result<Vec<(f64, MetricsReport)>> {
    let params = cfg.rsm_params()?;
    let mut rows = Vec::new();
    for &gamma in gammas {
        let run = ToolkitConfig {
            loss: LossMode::Weighted,
            gamma,
            ..cfg.clone()
        };
        run.check()?;
        let (model, _) = train_generator(&run, train_records, Some(scorer))?;
        let outs: Vec<(String, String)> = generate_all(&model, Some(scorer), valid, &params)?
            .into_iter()
            .map(|g| (g.dialogue_id, g.output))
            .collect();
        let rep = evaluate_outputs(&run, &outs, valid)?;
        log::info!("gamma {gamma}: repeated-word {:.2}%", rep.repeated_word_pct);
        rows.push((gamma, rep));
    }
    Ok(rows)
}

pub fn sweep_table(rows: &[(f64, MetricsReport)]) -> String {
    let mut s = String::new();
    writeln!(s, "{:>6} {:>9}", "gamma", "%").unwrap();
    for (g, r) in rows {
        writeln!(s, "{:>6} {:>9.2}", g, r.repeated_word_pct).unwrap();
    }
    s
}

fn repl(
    model: &ToyTransformer,
    scorer: Option<&ScorerModel>,
    tok: &dyn Tokenizer,
    params: &RsmParams,
    input: impl BufRead,
    out: &mut impl Write,
) -> Result<()> {
    let io_err = |e| Error::io(Path::new("<stdout>"), e);
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(Path::new("<stdin>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = DialogueRecord {
            dialogue_id: format!("repl-{i}"),
            context: Vec::new(),
            utterance: tok.tokenize(&line),
            references: Vec::new(),
            meta: Default::default(),
        };
        let g = generate_for_record(model, scorer, &record, params)?;
        writeln!(
            out,
            "{}\tscore={:.4} logp={:.4} lp={:.4} cp={:.4} rs={:.4}",
            g.output, g.score, g.terms.logp, g.terms.lp, g.terms.cp, g.terms.rs
        )
        .map_err(io_err)?;
        out.flush().map_err(io_err)?;
    }
    Ok(())
}

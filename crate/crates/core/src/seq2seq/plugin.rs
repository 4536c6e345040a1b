use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{GenerativeModel, StepOutput};
use crate::vocab::SubwordVocab;
use crate::{Error, Result};

/// First line a plugin writes on startup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginHello {
    pub vocab: Vec<String>,
    pub eos_id: u32,
    pub max_target_len: usize,
    #[serde(default)]
    pub max_source_len: Option<usize>,
    pub provides_attention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginRequest {
    pub source_ids: Vec<u32>,
    pub prefix_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginResponse {
    #[serde(default)]
    pub log_probs: Vec<f64>,
    #[serde(default)]
    pub attention: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Pipe {
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Generative model backed by an external process speaking JSON lines:
/// one [`PluginHello`] at startup, then one [`PluginResponse`] per
/// [`PluginRequest`].
pub struct PluginModel {
    hello: PluginHello,
    vocab: SubwordVocab,
    child: Child,
    pipe: Mutex<Pipe>,
}

impl PluginModel {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Plugin(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut line = String::new();
        stdout
            .read_line(&mut line)
            .map_err(|e| Error::Plugin(format!("reading plugin hello: {e}")))?;
        let hello: PluginHello = serde_json::from_str(line.trim())
            .map_err(|e| Error::Plugin(format!("bad plugin hello `{}`: {e}", line.trim())))?;
        let vocab = SubwordVocab::from(hello.vocab.clone());
        Ok(PluginModel {
            hello,
            vocab,
            child,
            pipe: Mutex::new(Pipe { stdin, stdout }),
        })
    }
}

impl Drop for PluginModel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl GenerativeModel for PluginModel {
    fn vocab_size(&self) -> usize {
        self.hello.vocab.len()
    }

    fn eos_id(&self) -> u32 {
        self.hello.eos_id
    }

    fn max_target_len(&self) -> usize {
        self.hello.max_target_len
    }

    fn max_source_len(&self) -> usize {
        self.hello.max_source_len.unwrap_or(usize::MAX)
    }

    fn provides_attention(&self) -> bool {
        self.hello.provides_attention
    }

    fn step(&self, source: &[u32], prefix: &[u32]) -> Result<StepOutput> {
        let req = serde_json::to_string(&PluginRequest {
            source_ids: source.to_vec(),
            prefix_ids: prefix.to_vec(),
        })?;
        let mut pipe = self.pipe.lock().map_err(|_| Error::Plugin("plugin pipe poisoned".into()))?;
        writeln!(pipe.stdin, "{req}")
            .and_then(|_| pipe.stdin.flush())
            .map_err(|e| Error::Plugin(format!("writing request: {e}")))?;
        let mut line = String::new();
        let n = pipe
            .stdout
            .read_line(&mut line)
            .map_err(|e| Error::Plugin(format!("reading response: {e}")))?;
        if n == 0 {
            return Err(Error::Plugin("plugin closed its output".into()));
        }
        let resp: PluginResponse = serde_json::from_str(line.trim())?;
        if let Some(e) = resp.error {
            return Err(Error::Plugin(e));
        }
        if resp.log_probs.len() != self.vocab_size() {
            return Err(Error::Plugin(format!(
                "expected {} log-probabilities, got {}",
                self.vocab_size(),
                resp.log_probs.len()
            )));
        }
        Ok(StepOutput {
            log_probs: resp.log_probs,
            attention: resp.attention,
        })
    }

    fn vocab(&self) -> Option<&SubwordVocab> {
        Some(&self.vocab)
    }
}

/// Serves `model` over the plugin protocol until `input` is exhausted.
pub fn serve_plugin(model: &dyn GenerativeModel, input: impl BufRead, mut output: impl Write) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Plugin(format!("plugin i/o: {e}"));
    let vocab = model
        .vocab()
        .map(|v| (0..v.len() as u32).map(|i| v.piece(i).unwrap_or("").to_string()).collect())
        .unwrap_or_else(|| (0..model.vocab_size()).map(|i| format!("<{i}>")).collect());
    let max_source_len = Some(model.max_source_len()).filter(|&m| m != usize::MAX);
    let hello = PluginHello {
        vocab,
        eos_id: model.eos_id(),
        max_target_len: model.max_target_len(),
        max_source_len,
        provides_attention: model.provides_attention(),
    };
    writeln!(output, "{}", serde_json::to_string(&hello)?).map_err(io_err)?;
    output.flush().map_err(io_err)?;
    for line in input.lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<PluginRequest>(&line) {
            Ok(req) => match model.step(&req.source_ids, &req.prefix_ids) {
                Ok(out) => PluginResponse {
                    log_probs: out.log_probs,
                    attention: out.attention,
                    error: None,
                },
                Err(e) => PluginResponse {
                    log_probs: vec![],
                    attention: None,
                    error: Some(e.to_string()),
                },
            },
            Err(e) => PluginResponse {
                log_probs: vec![],
                attention: None,
                error: Some(format!("bad request: {e}")),
            },
        };
        writeln!(output, "{}", serde_json::to_string(&resp)?).map_err(io_err)?;
        output.flush().map_err(io_err)?;
    }
    Ok(())
}

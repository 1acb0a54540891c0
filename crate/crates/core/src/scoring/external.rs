//! Adapter for scorers running in a child process.
//!
//! Wire protocol: one JSON object per line over the child's stdin/stdout,
//! UTF-8, responses in request order.
//!
//! ```text
//! -> {"id": 0, "info": [3], "prompt": [1, 2], "prefix": [0, 1], "vocab": 4}
//! <- {"id": 0, "logprobs": [-1.386, -1.386, -1.386, -1.386]}
//! ```
//!
//! Log-probs are natural logs; `null` stands for `-inf`. The exponentiated
//! vector must sum to one within 1e-6.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ModelScorer;
use crate::{Error, FiniteDistribution, Info, Prompt, Result, Scalar, Token};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerRequest {
    pub id: u64,
    pub info: Vec<u32>,
    pub prompt: Vec<u32>,
    pub prefix: Vec<u32>,
    pub vocab: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerResponse {
    pub id: u64,
    pub logprobs: Vec<Option<f64>>,
}

type CacheKey = (Vec<u32>, Vec<u32>, Vec<u32>);

struct Wire {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

/// Scorer backed by a child process speaking the line-delimited JSON protocol.
///
/// Responses are cached by (info, prompt, prefix) for the lifetime of the
/// adapter; wire access is serialized, so the adapter can be shared.
pub struct ExternalScorer {
    vocab: usize,
    timeout: Duration,
    wire: Mutex<Wire>,
    cache: Mutex<HashMap<CacheKey, Vec<f64>>>,
    exchanges: AtomicUsize,
}

impl ExternalScorer {
    pub fn spawn(mut command: Command, vocab: usize, timeout: Duration) -> Result<Self> {
        if vocab == 0 {
            return Err(Error::domain("vocab must be positive"));
        }
        let mut child = command.stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            vocab,
            timeout,
            wire: Mutex::new(Wire {
                child,
                stdin,
                lines: rx,
                next_id: 0,
            }),
            cache: Mutex::new(HashMap::new()),
            exchanges: AtomicUsize::new(0),
        })
    }

    /// Number of request/response round trips performed so far.
    pub fn exchanges(&self) -> usize {
        self.exchanges.load(Ordering::SeqCst)
    }

    /// Probabilities for one conditioning tuple, from cache or the wire.
    pub fn query(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<Vec<f64>> {
        let key = (info.raw(), prompt.tokens.clone(), prefix.to_vec());
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let mut wire = self.wire.lock().unwrap();
        // another thread may have filled it while we waited for the wire
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let id = wire.next_id;
        wire.next_id += 1;
        let request = ScorerRequest {
            id,
            info: key.0.clone(),
            prompt: key.1.clone(),
            prefix: key.2.clone(),
            vocab: self.vocab,
        };
        let line = serde_json::to_string(&request).expect("request serializes");
        writeln!(wire.stdin, "{line}")
            .and_then(|_| wire.stdin.flush())
            .map_err(|e| Error::protocol(format!("write failed: {e}"), line.clone()))?;
        let reply = match wire.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(Error::protocol(format!("read failed: {e}"), line)),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::protocol(format!("no response within {:?}", self.timeout), line))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::protocol("scorer closed its output", line))
            }
        };
        self.exchanges.fetch_add(1, Ordering::SeqCst);
        let probs = parse_response(&reply, id, self.vocab)?;
        self.cache.lock().unwrap().insert(key, probs.clone());
        Ok(probs)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Ok(wire) = self.wire.get_mut() {
            let _ = wire.child.kill();
            let _ = wire.child.wait();
        }
    }
}

/// Validates one response line and returns the probability vector.
pub(crate) fn parse_response(line: &str, expected_id: u64, vocab: usize) -> Result<Vec<f64>> {
    let resp: ScorerResponse = serde_json::from_str(line.trim())
        .map_err(|e| Error::protocol(format!("malformed response: {e}"), line))?;
    if resp.id != expected_id {
        return Err(Error::protocol(
            format!("response id {} does not match request id {expected_id}", resp.id),
            line,
        ));
    }
    if resp.logprobs.len() != vocab {
        return Err(Error::protocol(
            format!("expected {vocab} logprobs, got {}", resp.logprobs.len()),
            line,
        ));
    }
    let mut probs = Vec::with_capacity(vocab);
    for lp in &resp.logprobs {
        match lp {
            None => probs.push(0.0),
            Some(v) if v.is_finite() && *v <= 1e-9 => probs.push(v.exp()),
            Some(v) => return Err(Error::protocol(format!("invalid logprob {v}"), line)),
        }
    }
    let sum: f64 = crate::neumaier_sum(probs.iter().copied());
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::protocol(format!("probabilities sum to {sum}"), line));
    }
    Ok(probs.into_iter().map(|p| p / sum).collect())
}

impl<S: Scalar> ModelScorer<S> for ExternalScorer {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>> {
        let probs = self.query(info, prompt, prefix)?;
        FiniteDistribution::from_weights(probs.into_iter().map(S::lit).collect())
    }
}

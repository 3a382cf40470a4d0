//! Line-delimited JSON protocol for out-of-process generators.
//!
//! The harness writes one request per pair to the child's stdin:
//!
//! ```text
//! {"type":"generate","pair_id":"…","wrong":"…","n_samples":100,"temperature":0.7,"max_tokens":256}
//! ```
//!
//! and reads back exactly `n_samples` candidate lines followed by a done
//! line:
//!
//! ```text
//! {"type":"candidate","pair_id":"…","sample_index":0,"source":"…"}
//! {"type":"done","pair_id":"…"}
//! ```
//!
//! A generator that cannot serve a request may answer with
//! `{"type":"error","pair_id":"…","message":"…"}` instead; that ends the
//! response for the pair, which is recorded as a per-pair error. A `done`
//! that arrives before `n_samples` candidates is also a per-pair error.
//! Anything else (unparseable lines, a wrong `pair_id`, repeated or
//! out-of-range sample indices, early exit, timeout) aborts the run.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Candidate, GenerateError, Generated, GeneratorConfig, PairError};
use crate::corpus::CodePair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request {
    Generate {
        pair_id: String,
        wrong: String,
        n_samples: u32,
        temperature: f64,
        max_tokens: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Response {
    Candidate {
        pair_id: String,
        sample_index: u32,
        source: String,
    },
    Done {
        pair_id: String,
    },
    Error {
        pair_id: String,
        message: String,
    },
}

#[derive(Debug, Clone)]
pub struct ExternalOptions {
    /// Longest wait for any single response line.
    pub timeout: Duration,
    pub generator_id: String,
}

struct Session {
    child: Child,
    lines: mpsc::Receiver<std::io::Result<String>>,
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Run `command` through `sh -c` and collect candidates for every pair.
pub fn run_external(
    command: &str,
    pairs: &[CodePair],
    config: &GeneratorConfig,
    opts: &ExternalOptions,
) -> Result<Generated, GenerateError> {
    config.validate()?;
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| GenerateError::Process(format!("cannot start `{command}`: {e}")))?;
    let stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let mut session = Session { child, lines: rx };
    let mut stdin = session.child.stdin.take().expect("piped stdin");

    let mut out = Generated::default();
    for pair in pairs {
        let fail = |message: String| GenerateError::External {
            pair_id: pair.pair_id.clone(),
            message,
        };
        let request = Request::Generate {
            pair_id: pair.pair_id.clone(),
            wrong: pair.wrong_source.clone(),
            n_samples: config.n_samples,
            temperature: config.temperature,
            max_tokens: config.max_tokens,
        };
        let mut line = serde_json::to_string(&request).expect("request serializes");
        line.push('\n');
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| fail(format!("cannot send request: {e}")))?;

        let mut got: Vec<Option<String>> = vec![None; config.n_samples as usize];
        let mut received = 0usize;
        loop {
            let text = match session.lines.recv_timeout(opts.timeout) {
                Ok(Ok(text)) => text,
                Ok(Err(e)) => return Err(fail(format!("read failed: {e}"))),
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    return Err(fail(format!("no response within {:?}", opts.timeout)))
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    let status = session.child.wait().ok();
                    return Err(fail(format!("generator exited mid-response ({status:?})")));
                }
            };
            if text.trim().is_empty() {
                continue;
            }
            let msg: Response = serde_json::from_str(&text)
                .map_err(|e| fail(format!("malformed line {text:?}: {e}")))?;
            let msg_pair = match &msg {
                Response::Candidate { pair_id, .. }
                | Response::Done { pair_id }
                | Response::Error { pair_id, .. } => pair_id,
            };
            if *msg_pair != pair.pair_id {
                return Err(fail(format!("response for unexpected pair `{msg_pair}`")));
            }
            match msg {
                Response::Candidate {
                    sample_index,
                    source,
                    ..
                } => {
                    let slot = got
                        .get_mut(sample_index as usize)
                        .ok_or_else(|| fail(format!("sample_index {sample_index} out of range")))?;
                    if slot.replace(source).is_some() {
                        return Err(fail(format!("sample_index {sample_index} repeated")));
                    }
                    received += 1;
                }
                Response::Done { .. } => {
                    if received < got.len() {
                        out.errors.push(PairError {
                            pair_id: pair.pair_id.clone(),
                            message: format!("expected {} samples, received {received}", got.len()),
                        });
                    } else {
                        out.candidates.extend(got.into_iter().enumerate().map(|(i, source)| Candidate {
                            pair_id: pair.pair_id.clone(),
                            sample_index: i as u32,
                            source: source.expect("all slots filled"),
                            generator_id: opts.generator_id.clone(),
                        }));
                    }
                    break;
                }
                Response::Error { message, .. } => {
                    out.errors.push(PairError {
                        pair_id: pair.pair_id.clone(),
                        message,
                    });
                    break;
                }
            }
        }
    }

    drop(stdin);
    let status = session
        .child
        .wait()
        .map_err(|e| GenerateError::Process(format!("wait failed: {e}")))?;
    if !status.success() {
        return Err(GenerateError::Process(format!("generator exited with {status}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let req = Request::Generate {
            pair_id: "p".into(),
            wrong: "x".into(),
            n_samples: 2,
            temperature: 0.7,
            max_tokens: 256,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"type":"generate","pair_id":"p","wrong":"x","n_samples":2,"temperature":0.7,"max_tokens":256}"#
        );
        let done: Response = serde_json::from_str(r#"{"type":"done","pair_id":"p"}"#).unwrap();
        assert_eq!(done, Response::Done { pair_id: "p".into() });
        assert!(serde_json::from_str::<Response>(r#"{"type":"candidate","pair_id":"p"}"#).is_err());
    }
}

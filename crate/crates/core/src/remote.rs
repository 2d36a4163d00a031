//! Client for the JSON-lines next-token protocol, which lets any external
//! model serve distributions to the samplers.
//!
//! Framing is one UTF-8 JSON object per newline-terminated line:
//!
//! ```text
//! -> {"op":"vocab"}                          <- {"tokens":[...],"eos":2}
//! -> {"op":"dist","id":7,"prefix":[0,1]}     <- {"id":7,"logprobs":[...]}
//! -> {"op":"shutdown"}
//! ```
//!
//! A server may answer a `dist` request with `{"id":k,"error":"..."}`; the
//! client surfaces that as a backend error for request `k`. JSON has no
//! infinities, so a zero-probability token is sent as `null`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lm::{check_prefix, LanguageModel, TokenDistribution, TokenId, Vocab};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "kebab-case")]
pub enum Transport {
    /// Connect to `host:port`.
    Tcp { address: String },
    /// Spawn `command` and talk over its stdin/stdout.
    Stdio { command: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteSpec {
    #[serde(flatten)]
    pub transport: Transport,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Number of independent sessions; parallel workers each take one.
    #[serde(default = "default_sessions")]
    pub sessions: usize,
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_sessions() -> usize {
    1
}

/// Newline-delimited JSON over any byte stream pair. Reads happen on a
/// background thread so every receive can time out.
pub struct LineChannel {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    timeout: Duration,
}

impl LineChannel {
    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            writer: Box::new(writer),
            lines: rx,
            child: None,
            timeout,
        }
    }

    pub fn open(transport: &Transport, timeout: Duration) -> Result<Self> {
        match transport {
            Transport::Tcp { address } => {
                let addr = address
                    .to_socket_addrs()
                    .map_err(|e| Error::backend(None, format!("cannot resolve {address}: {e}")))?
                    .next()
                    .ok_or_else(|| Error::backend(None, format!("no address for {address}")))?;
                let stream = TcpStream::connect_timeout(&addr, timeout)
                    .map_err(|e| Error::backend(None, format!("cannot connect to {address}: {e}")))?;
                stream.set_nodelay(true).ok();
                let reader = stream.try_clone()?;
                Ok(Self::from_streams(reader, stream, timeout))
            }
            Transport::Stdio { command } => {
                let (program, args) = command
                    .split_first()
                    .ok_or_else(|| Error::config("model.command", "empty command"))?;
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| Error::backend(None, format!("cannot spawn {program}: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let mut channel = Self::from_streams(stdout, stdin, timeout);
                channel.child = Some(child);
                Ok(channel)
            }
        }
    }

    pub fn send(&mut self, message: &Value) -> Result<()> {
        let mut line = serde_json::to_string(message)?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| Error::backend(message.get("id").and_then(Value::as_u64), format!("write failed: {e}")))
    }

    /// Next JSON object from the peer. `request_id` only labels errors.
    pub fn recv(&mut self, request_id: Option<u64>) -> Result<Value> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => serde_json::from_str(&line)
                .map_err(|e| Error::protocol(format!("malformed response {line:?}: {e}"))),
            Ok(Err(e)) => Err(Error::backend(request_id, format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::backend(
                request_id,
                format!("no response within {:?}", self.timeout),
            )),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::backend(request_id, "connection closed by peer"))
            }
        }
    }

    fn close(&mut self) {
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_secs(2);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
        }
    }
}

impl Drop for LineChannel {
    fn drop(&mut self) {
        self.close();
    }
}

#[derive(Deserialize)]
struct VocabResponse {
    tokens: Vec<String>,
    eos: usize,
}

/// One serial request/response conversation with a model server.
pub struct BackendSession {
    channel: LineChannel,
    vocab: Option<Vocab>,
    next_id: u64,
    closed: bool,
}

impl BackendSession {
    pub fn new(channel: LineChannel) -> Self {
        Self {
            channel,
            vocab: None,
            next_id: 0,
            closed: false,
        }
    }

    pub fn open(transport: &Transport, timeout: Duration) -> Result<Self> {
        Ok(Self::new(LineChannel::open(transport, timeout)?))
    }

    pub fn vocab(&self) -> Option<&Vocab> {
        self.vocab.as_ref()
    }

    pub fn handshake(&mut self) -> Result<Vocab> {
        self.channel.send(&json!({"op": "vocab"}))?;
        let value = self.channel.recv(None)?;
        let resp: VocabResponse = serde_json::from_value(value.clone())
            .map_err(|e| Error::protocol(format!("bad vocab response {value}: {e}")))?;
        let vocab = Vocab::new(resp.tokens, resp.eos).map_err(|e| Error::protocol(e.to_string()))?;
        self.vocab = Some(vocab.clone());
        Ok(vocab)
    }

    pub fn request_distribution(&mut self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        self.request_many(&[prefix.to_vec()])
            .map(|mut v| v.pop().expect("one response"))
    }

    /// Sends every request before reading, then matches responses to
    /// requests by id in whatever order they arrive.
    pub fn request_many(&mut self, prefixes: &[Vec<TokenId>]) -> Result<Vec<TokenDistribution>> {
        let vocab_len = match &self.vocab {
            Some(v) => v.len(),
            None => return Err(Error::protocol("distribution requested before handshake")),
        };
        let mut pending: HashMap<u64, usize> = HashMap::with_capacity(prefixes.len());
        for (slot, prefix) in prefixes.iter().enumerate() {
            let id = self.next_id;
            self.next_id += 1;
            self.channel
                .send(&json!({"op": "dist", "id": id, "prefix": prefix}))?;
            pending.insert(id, slot);
        }
        let first_id = self.next_id - prefixes.len() as u64;
        let mut out: Vec<Option<TokenDistribution>> = vec![None; prefixes.len()];
        let mut done = HashSet::new();
        while done.len() < prefixes.len() {
            let waiting = (first_id..self.next_id).find(|id| !done.contains(id));
            let value = self.channel.recv(waiting)?;
            let id = value
                .get("id")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::protocol(format!("response without id: {value}")))?;
            let slot = match pending.get(&id) {
                Some(&slot) if !done.contains(&id) => slot,
                _ => return Err(Error::protocol(format!("response id {id} matches no outstanding request"))),
            };
            if let Some(msg) = value.get("error") {
                return Err(Error::backend(Some(id), format!("server error: {msg}")));
            }
            out[slot] = Some(parse_logprobs(&value, id, vocab_len)?);
            done.insert(id);
        }
        Ok(out.into_iter().map(|d| d.expect("filled")).collect())
    }

    pub fn shutdown(mut self) -> Result<()> {
        self.closed = true;
        self.channel.send(&json!({"op": "shutdown"}))
    }
}

impl Drop for BackendSession {
    fn drop(&mut self) {
        if !self.closed {
            let _ = self.channel.send(&json!({"op": "shutdown"}));
        }
    }
}

fn parse_logprobs(value: &Value, id: u64, vocab_len: usize) -> Result<TokenDistribution> {
    let raw = value
        .get("logprobs")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::protocol(format!("response {id} has no logprobs array")))?;
    if raw.len() != vocab_len {
        return Err(Error::protocol(format!(
            "response {id} has {} logprobs, vocabulary has {vocab_len}",
            raw.len()
        )));
    }
    let logprobs = raw
        .iter()
        .map(|v| match v {
            Value::Null => Some(f64::NEG_INFINITY),
            _ => v.as_f64(),
        })
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::protocol(format!("response {id} has non-numeric logprobs")))?;
    TokenDistribution::from_logprobs(&logprobs).map_err(|e| Error::protocol(format!("response {id}: {e}")))
}

/// A [`LanguageModel`] backed by one or more server sessions. Concurrent
/// callers each take a free session; sessions are never shared mid-request.
pub struct RemoteModel {
    vocab: Vocab,
    sessions: Vec<Mutex<BackendSession>>,
    cursor: AtomicUsize,
}

impl RemoteModel {
    pub fn connect(spec: &RemoteSpec) -> Result<Self> {
        let timeout = Duration::from_millis(spec.timeout_ms);
        let sessions = (0..spec.sessions.max(1))
            .map(|_| BackendSession::open(&spec.transport, timeout))
            .collect::<Result<Vec<_>>>()?;
        Self::from_sessions(sessions)
    }

    /// Handshakes every session; all must advertise the same vocabulary.
    pub fn from_sessions(mut sessions: Vec<BackendSession>) -> Result<Self> {
        if sessions.is_empty() {
            return Err(Error::input("remote model needs at least one session"));
        }
        let vocab = sessions[0].handshake()?;
        for s in &mut sessions[1..] {
            if s.handshake()? != vocab {
                return Err(Error::protocol("sessions disagree on vocabulary"));
            }
        }
        Ok(Self {
            vocab,
            sessions: sessions.into_iter().map(Mutex::new).collect(),
            cursor: AtomicUsize::new(0),
        })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }
}

impl LanguageModel for RemoteModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_distribution(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        check_prefix(&self.vocab, prefix)?;
        let n = self.sessions.len();
        let start = self.cursor.fetch_add(1, Ordering::Relaxed);
        for k in 0..n {
            if let Ok(mut s) = self.sessions[(start + k) % n].try_lock() {
                return s.request_distribution(prefix);
            }
        }
        let mut s = self.sessions[start % n]
            .lock()
            .map_err(|_| Error::backend(None, "session poisoned by an earlier panic"))?;
        s.request_distribution(prefix)
    }
}

/// Logprobs in wire form: `null` for zero-probability tokens.
pub fn wire_logprobs(dist: &TokenDistribution) -> Value {
    Value::Array(
        dist.probs()
            .iter()
            .map(|&p| if p > 0.0 { json!(p.ln()) } else { Value::Null })
            .collect(),
    )
}

/// Answers protocol requests for `model` until `shutdown` or end of input.
/// Failed `dist` requests are reported in-band with their id.
pub fn serve<M, R, W>(model: &M, reader: R, mut writer: W) -> Result<()>
where
    M: LanguageModel + ?Sized,
    R: BufRead,
    W: Write,
{
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                writeln!(writer, "{}", json!({"error": format!("bad request: {e}")}))?;
                writer.flush()?;
                continue;
            }
        };
        let response = match request.get("op").and_then(Value::as_str) {
            Some("vocab") => {
                let vocab = model.vocab();
                json!({"tokens": vocab.tokens(), "eos": vocab.eos()})
            }
            Some("dist") => {
                let id = request.get("id").cloned().unwrap_or(Value::Null);
                let prefix: Option<Vec<TokenId>> = request
                    .get("prefix")
                    .and_then(|p| serde_json::from_value(p.clone()).ok());
                match prefix.map(|p| model.next_distribution(&p)) {
                    Some(Ok(dist)) => json!({"id": id, "logprobs": wire_logprobs(&dist)}),
                    Some(Err(e)) => json!({"id": id, "error": e.to_string()}),
                    None => json!({"id": id, "error": "missing or malformed prefix"}),
                }
            }
            Some("shutdown") => return Ok(()),
            _ => json!({"error": format!("unknown op in {request}")}),
        };
        writeln!(writer, "{response}")?;
        writer.flush()?;
    }
    Ok(())
}

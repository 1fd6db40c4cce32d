//! Minimal local HTTP server exposing a mock model over the completion wire
//! protocol, for integration-testing the remote client without a GPU host.
//!
//! The server tokenizes per character and reports raw (unmasked) conditional
//! log-probabilities; masking happens client-side.

use super::remote::CompletionResponse;
use super::{complete_from_conditionals, SamplingParams, TokenConditional};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

#[derive(Debug, Deserialize)]
struct WireRequest {
    prompt: String,
    #[serde(default)]
    max_tokens: usize,
    #[serde(default = "one")]
    temperature: f64,
    #[serde(default = "one")]
    top_p: f64,
    #[serde(default)]
    stop: Vec<String>,
    #[serde(default)]
    echo: bool,
    #[serde(default)]
    logprobs: usize,
    #[serde(default)]
    seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

pub struct StubServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds an ephemeral localhost port and serves `model` until dropped.
    pub fn spawn<M>(model: M) -> std::io::Result<StubServer>
    where
        M: TokenConditional + Send + Sync + 'static,
    {
        Self::spawn_flaky(model, 0)
    }

    /// Like [`StubServer::spawn`] but the first `fail_first` requests answer
    /// with a 500, for exercising client retry behaviour.
    pub fn spawn_flaky<M>(model: M, fail_first: usize) -> std::io::Result<StubServer>
    where
        M: TokenConditional + Send + Sync + 'static,
    {
        let listener = TcpListener::bind(("127.0.0.1", 0))?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let model = Arc::new(model);
        let failures = Arc::new(AtomicUsize::new(fail_first));
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let model = Arc::clone(&model);
                let failures = Arc::clone(&failures);
                std::thread::spawn(move || {
                    let _ = handle_connection(stream, model.as_ref(), &failures);
                });
            }
        });
        Ok(StubServer {
            addr,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // poke the listener so the accept loop observes the flag
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection<M: TokenConditional>(
    stream: TcpStream,
    model: &M,
    failures: &AtomicUsize,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some(v) = line
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
        {
            content_length = v.parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let mut stream = stream;
    if !request_line.starts_with("POST /v1/completions") {
        return write_response(&mut stream, 404, b"{}");
    }
    if failures
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        return write_response(&mut stream, 500, b"{}");
    }
    let request: WireRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(_) => return write_response(&mut stream, 400, b"{}"),
    };

    let response = if request.echo {
        score_response(model, &request)
    } else {
        completion_response(model, &request)
    };
    match response {
        Ok(resp) => {
            let body = serde_json::to_vec(&resp).unwrap();
            write_response(&mut stream, 200, &body)
        }
        Err(_) => write_response(&mut stream, 500, b"{}"),
    }
}

fn completion_response<M: TokenConditional>(
    model: &M,
    request: &WireRequest,
) -> Result<CompletionResponse, super::BackendError> {
    let params = SamplingParams {
        temperature: request.temperature,
        top_p: request.top_p,
        stop: request.stop.first().cloned(),
        max_tokens: request.max_tokens,
    };
    let text = complete_from_conditionals(
        model,
        &request.prompt,
        &params,
        request.seed.unwrap_or(0),
    )?;
    Ok(CompletionResponse {
        text,
        tokens: Vec::new(),
        token_logprobs: Vec::new(),
        top_logprobs: Vec::new(),
    })
}

fn score_response<M: TokenConditional>(
    model: &M,
    request: &WireRequest,
) -> Result<CompletionResponse, super::BackendError> {
    let chars: Vec<char> = request.prompt.chars().collect();
    let mut tokens = Vec::with_capacity(chars.len());
    let mut token_logprobs = Vec::with_capacity(chars.len());
    let mut top_logprobs = Vec::with_capacity(chars.len());
    let mut context = String::new();
    for (i, &c) in chars.iter().enumerate() {
        tokens.push(c.to_string());
        if i == 0 {
            token_logprobs.push(None);
            top_logprobs.push(None);
        } else {
            let mut dist = model.conditional(&context)?;
            dist.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            dist.truncate(request.logprobs);
            let mut top = BTreeMap::new();
            for (tok, p) in &dist {
                if *p > 0.0 {
                    top.insert(tok.to_string(), p.ln());
                }
            }
            token_logprobs.push(
                dist.iter()
                    .find(|(tok, _)| *tok == c)
                    .and_then(|(_, p)| if *p > 0.0 { Some(p.ln()) } else { None }),
            );
            top_logprobs.push(Some(top));
        }
        context.push(c);
    }
    Ok(CompletionResponse {
        text: String::new(),
        tokens,
        token_logprobs,
        top_logprobs,
    })
}

fn write_response(stream: &mut TcpStream, status: u16, body: &[u8]) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        _ => "Internal Server Error",
    };
    let header = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        status,
        reason,
        body.len()
    );
    stream.write_all(header.as_bytes())?;
    stream.write_all(body)?;
    stream.flush()
}

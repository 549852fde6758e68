//! Stand-in models and a local chat-completion server for dry runs and tests.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::client::{AttemptError, ChatRequest, Completer};
use crate::corpus::strip_diacritics;
use crate::templatic::{apply_pattern, attach_affixes, compile_pattern, Root, RootCategory};

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let len = text[from..].find(end)?;
    Some(&text[from..from + len])
}

fn line_after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    let from = text.find(marker)? + marker.len();
    Some(text[from..].lines().next().unwrap_or(""))
}

/// Answers probe prompts correctly by running the templatic engine on the
/// fields it reads back out of the prompt text.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleCompleter;

impl OracleCompleter {
    pub fn answer(prompt: &str) -> Option<String> {
        let root_pattern = between(prompt, "Given the root ", " and the target morphological pattern ")
            .zip(between(prompt, " and the target morphological pattern ", ","))
            .or_else(|| {
                between(prompt, "بالنظر إلى الجذر ", " والوزن الصرفي المطلوب ")
                    .zip(between(prompt, " والوزن الصرفي المطلوب ", "،"))
            });
        if let Some((root, template)) = root_pattern {
            let root = Root::parse(root.trim(), RootCategory::Nonce).ok()?;
            let pattern = compile_pattern(template.trim()).ok()?;
            return apply_pattern(&root, &pattern).ok();
        }
        let base = line_after(prompt, "Arabic Unaffixed base form ")
            .or_else(|| line_after(prompt, "الصيغة الأساسية العربية دون لواصق "))?;
        let affixes = line_after(prompt, "Affixes : ").or_else(|| line_after(prompt, "اللواصق : "))?;
        let (prefix, suffix) = affixes.split_once(' ').unwrap_or((affixes, ""));
        Some(attach_affixes(base.trim(), prefix, suffix))
    }
}

impl Completer for OracleCompleter {
    fn attempt(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        Self::answer(request.prompt()).ok_or_else(|| AttemptError::Rejected("oracle cannot read prompt".into()))
    }
}

/// Replies with the root it was given, as a model that ignores the pattern.
#[derive(Debug, Default, Clone, Copy)]
pub struct RootEchoCompleter;

impl Completer for RootEchoCompleter {
    fn attempt(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        let p = request.prompt();
        between(p, "Given the root ", " and the target")
            .or_else(|| between(p, "بالنظر إلى الجذر ", " والوزن"))
            .or_else(|| line_after(p, "Arabic Unaffixed base form "))
            .map(|s| strip_diacritics(s.trim()))
            .ok_or_else(|| AttemptError::Rejected("no root in prompt".into()))
    }
}

/// Wraps any function as a completer.
pub struct FnCompleter<F>(pub F);

impl<F> Completer for FnCompleter<F>
where
    F: Fn(&ChatRequest) -> Result<String, AttemptError> + Send + Sync,
{
    fn attempt(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        (self.0)(request)
    }
}

/// What the mock server sends back for one request.
#[derive(Debug, Clone)]
pub struct MockReply {
    pub status: u16,
    pub body: String,
}

impl MockReply {
    /// A 200 chat-completion response carrying `content`.
    pub fn content(content: &str) -> Self {
        let body = serde_json::json!({
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
        });
        Self { status: 200, body: body.to_string() }
    }

    pub fn status(status: u16) -> Self {
        Self { status, body: format!("{{\"error\":{{\"message\":\"mock status {status}\"}}}}") }
    }
}

type Handler = dyn Fn(&ChatRequest, usize) -> MockReply + Send + Sync;

/// Minimal HTTP/1.1 chat-completion server on a loopback port.
///
/// The handler receives the parsed request and a global call index.
pub struct MockServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    calls: Arc<AtomicUsize>,
    accept: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start<H>(handler: H) -> std::io::Result<Self>
    where
        H: Fn(&ChatRequest, usize) -> MockReply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let calls = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let accept = {
            let stop = Arc::clone(&stop);
            let calls = Arc::clone(&calls);
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let handler = Arc::clone(&handler);
                    let calls = Arc::clone(&calls);
                    thread::spawn(move || {
                        if let Err(e) = serve_connection(stream, &*handler, &calls) {
                            log::debug!("mock server connection: {e}");
                        }
                    });
                }
            })
        };
        Ok(Self { addr, stop, calls, accept: Some(accept) })
    }

    /// Serve a [`Completer`], answering its errors with matching HTTP statuses.
    pub fn serving<C: Completer + 'static>(completer: C) -> std::io::Result<Self> {
        Self::start(move |req, _| match completer.attempt(req) {
            Ok(text) => MockReply::content(&text),
            Err(AttemptError::Transient(_)) => MockReply::status(503),
            Err(AttemptError::Auth(_)) => MockReply::status(401),
            Err(AttemptError::Rejected(_)) => MockReply::status(400),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Requests served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn serve_connection(stream: TcpStream, handler: &Handler, calls: &AtomicUsize) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(());
    }
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 || header == "\r\n" || header == "\n" {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let reply = match serde_json::from_slice::<ChatRequest>(&body) {
        Ok(req) => {
            let index = calls.fetch_add(1, Ordering::SeqCst);
            handler(&req, index)
        }
        Err(e) => MockReply { status: 400, body: format!("{{\"error\":\"{e}\"}}") },
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} Mock\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    )?;
    stream.flush()
}

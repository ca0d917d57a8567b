use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::reasoner::{oracle_verdict, Query, Reasoner, ReasonerError, Verdict, VerdictState};
use crate::sim::Observation;
use crate::world::{AffordanceCategory, ClassKind};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireTarget {
    pub id: String,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireReferences {
    pub available: String,
    pub unavailable: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub v: u32,
    pub episode: String,
    pub step: u32,
    pub target: WireTarget,
    pub candidates: Vec<String>,
    pub observation: Observation,
    pub references: WireReferences,
    /// Revealed view, sent only to loopback test backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub v: u32,
    pub state: String,
    pub category: Option<String>,
    pub confidence: f64,
}

impl WireRequest {
    pub fn new(q: &Query<'_>, share_latent: bool) -> Self {
        let (available, unavailable) = q.class.reference_descriptions();
        WireRequest {
            v: PROTOCOL_VERSION,
            episode: q.episode.to_string(),
            step: q.step,
            target: WireTarget { id: q.target.0.to_string(), class: q.class.name().to_string() },
            candidates: vec!["available".into(), "unavailable".into()],
            observation: q.observation.clone(),
            references: WireReferences { available, unavailable },
            latent: share_latent.then(|| q.latent.clone()),
        }
    }
}

impl WireResponse {
    pub fn from_verdict(v: &Verdict) -> Self {
        let (state, category) = match v.state {
            VerdictState::Available | VerdictState::NotVisible => ("available", None),
            VerdictState::Unavailable(c) => ("unavailable", Some(c.as_str().to_string())),
        };
        WireResponse { v: PROTOCOL_VERSION, state: state.into(), category, confidence: v.confidence }
    }
}

/// Parses and validates one response line.
pub fn parse_response(line: &str) -> Result<Verdict, ReasonerError> {
    let bad = |m: String| ReasonerError::MalformedResponse(m);
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| bad("response is not an object".into()))?;
    for key in obj.keys() {
        if !["v", "state", "category", "confidence"].contains(&key.as_str()) {
            return Err(bad(format!("unexpected field `{key}`")));
        }
    }
    if !obj.contains_key("category") {
        return Err(bad("missing field `category`".into()));
    }
    let r: WireResponse = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
    if r.v != PROTOCOL_VERSION {
        return Err(bad(format!("unsupported version {}", r.v)));
    }
    if !(0.0..=1.0).contains(&r.confidence) {
        return Err(bad(format!("confidence {} outside [0, 1]", r.confidence)));
    }
    let state = match (r.state.as_str(), r.category.as_deref()) {
        ("available", None) => VerdictState::Available,
        ("unavailable", Some(c)) => VerdictState::Unavailable(
            AffordanceCategory::parse(c).ok_or_else(|| bad(format!("unknown category `{c}`")))?,
        ),
        ("unavailable", None) => return Err(bad("unavailable verdict without category".into())),
        ("available", Some(_)) => return Err(bad("available verdict with a category".into())),
        (s, _) => return Err(bad(format!("unknown state `{s}`"))),
    };
    Ok(Verdict { state, confidence: r.confidence })
}

/// Where an external reasoner is reached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    /// `host:port`, optionally written `tcp://host:port`.
    Tcp(String),
    /// A child process speaking the protocol on its standard pipes.
    Command(Vec<String>),
}

impl Endpoint {
    /// `tcp://host:port`, `host:port`, or `cmd:program arg...`.
    pub fn parse(s: &str) -> Result<Self, String> {
        if let Some(cmd) = s.strip_prefix("cmd:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err("empty command endpoint".into());
            }
            return Ok(Endpoint::Command(argv));
        }
        let addr = s.strip_prefix("tcp://").unwrap_or(s);
        if addr.rsplit_once(':').is_some_and(|(h, p)| !h.is_empty() && p.parse::<u16>().is_ok()) {
            Ok(Endpoint::Tcp(addr.to_string()))
        } else {
            Err(format!("endpoint `{s}` is neither host:port nor cmd:<program>"))
        }
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    child: Option<Child>,
}

fn spawn_reader(source: impl Read + Send + 'static) -> Receiver<io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(source);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => {
                    let _ = tx.send(Err(io::Error::new(io::ErrorKind::UnexpectedEof, "reasoner closed the stream")));
                    break;
                }
                Ok(_) => {
                    if tx.send(Ok(line)).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        }
    });
    rx
}

impl Connection {
    fn open(endpoint: &Endpoint) -> io::Result<Self> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true)?;
                let lines = spawn_reader(stream.try_clone()?);
                Ok(Connection { writer: Box::new(stream), lines, child: None })
            }
            Endpoint::Command(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let lines = spawn_reader(child.stdout.take().expect("piped stdout"));
                Ok(Connection { writer: Box::new(stdin), lines, child: Some(child) })
            }
        }
    }

    fn request(&mut self, line: &str, timeout: Duration) -> Result<String, ReasonerError> {
        let transport = |e: io::Error| ReasonerError::Transport(e.to_string());
        self.writer.write_all(line.as_bytes()).map_err(transport)?;
        self.writer.write_all(b"\n").map_err(transport)?;
        self.writer.flush().map_err(transport)?;
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(l)) => Ok(l),
            Ok(Err(e)) => Err(transport(e)),
            Err(RecvTimeoutError::Timeout) => Err(ReasonerError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ReasonerError::Transport("reader thread stopped".into())),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Verdicts from a process or server speaking the line protocol. The
/// connection is opened lazily and reopened after a timeout or transport
/// failure.
pub struct ExternalReasoner {
    endpoint: Endpoint,
    timeout: Duration,
    share_latent: bool,
    conn: Option<Connection>,
}

impl ExternalReasoner {
    pub fn new(endpoint: Endpoint, timeout: Duration) -> Self {
        ExternalReasoner { endpoint, timeout, share_latent: false, conn: None }
    }

    /// Also sends the revealed view, for loopback oracle stubs.
    pub fn sharing_latent(mut self, share: bool) -> Self {
        self.share_latent = share;
        self
    }
}

impl Reasoner for ExternalReasoner {
    fn label(&self) -> String {
        "external".into()
    }

    fn reason(&mut self, q: &Query<'_>) -> Result<Verdict, ReasonerError> {
        if q.observation.lookup(q.target).is_none() {
            return Ok(Verdict::certain(VerdictState::NotVisible));
        }
        let line = serde_json::to_string(&WireRequest::new(q, self.share_latent)).expect("request serializes");
        if self.conn.is_none() {
            let c = Connection::open(&self.endpoint).map_err(|e| ReasonerError::Transport(e.to_string()))?;
            self.conn = Some(c);
        }
        let reply = self.conn.as_mut().expect("connection opened").request(&line, self.timeout);
        match reply {
            Ok(l) => parse_response(l.trim_end()),
            Err(e) => {
                self.conn = None;
                Err(e)
            }
        }
    }
}

/// Behaviour of the built-in stub backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StubMode {
    /// Ground truth from the shared latent view.
    Oracle,
    AlwaysAvailable,
    /// Replies with a record that violates the protocol.
    Malformed,
    /// Never replies.
    Silent,
}

impl StubMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle" => Some(StubMode::Oracle),
            "always-available" => Some(StubMode::AlwaysAvailable),
            "malformed" => Some(StubMode::Malformed),
            "silent" => Some(StubMode::Silent),
            _ => None,
        }
    }
}

/// The stub's reply to one request line, or `None` to stay silent.
pub fn stub_reply(line: &str, mode: StubMode) -> Option<String> {
    let reply = match mode {
        StubMode::Silent => return None,
        StubMode::Malformed => r#"{"v":1,"state":"maybe","category":null,"confidence":2.0}"#.to_string(),
        StubMode::AlwaysAvailable => {
            serde_json::to_string(&WireResponse::from_verdict(&Verdict::certain(VerdictState::Available)))
                .expect("response serializes")
        }
        StubMode::Oracle => {
            let verdict = serde_json::from_str::<WireRequest>(line).ok().and_then(|req| {
                let latent = req.latent?;
                let id = req.target.id.parse().ok()?;
                ClassKind::from_name(&req.target.class)?;
                Some(oracle_verdict(crate::world::ObjectId(id), &latent))
            });
            match verdict {
                Some(v) => serde_json::to_string(&WireResponse::from_verdict(&v)).expect("response serializes"),
                None => r#"{"v":1,"error":"oracle stub needs a request with a latent view"}"#.to_string(),
            }
        }
    };
    Some(reply)
}

/// Answers requests line by line until the input ends.
pub fn serve_lines(input: impl BufRead, mut output: impl Write, mode: StubMode) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(reply) = stub_reply(&line, mode) {
            output.write_all(reply.as_bytes())?;
            output.write_all(b"\n")?;
            output.flush()?;
        }
    }
    Ok(())
}

/// Accepts connections forever, one thread per connection.
pub fn serve_tcp(listener: TcpListener, mode: StubMode) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        thread::spawn(move || {
            let Ok(read) = stream.try_clone() else { return };
            let _ = serve_lines(BufReader::new(read), stream, mode);
        });
    }
    Ok(())
}

/// Starts a stub on an ephemeral local port.
pub fn spawn_tcp_stub(mode: StubMode) -> io::Result<(SocketAddr, JoinHandle<io::Result<()>>)> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    Ok((addr, thread::spawn(move || serve_tcp(listener, mode))))
}

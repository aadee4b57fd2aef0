//! The switch simulator: three listeners (one per channel), each accepted
//! connection routed through a participant pipeline that validates
//! requests and produces responses — most importantly the balance-enquiry
//! validation.
//!
//! Response delay is applied as a *deadline* (arrival time + delay), not
//! a sleep in the read path: a reader thread keeps deframing pipelined
//! requests while a per-connection responder thread writes each response
//! once its deadline passes, preserving per-connection order. Many delayed
//! responses therefore overlap instead of serializing.

use std::io::{ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex, OnceLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use switchsim_core::{
    ChannelKind, FieldValue, FrameDecoder, IsoMsg, Mti, Packager, WireDirection,
};

use crate::net::{self, Endpoint};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub channel: ChannelKind,
    pub port: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorConfig {
    #[serde(default = "default_endpoints")]
    pub endpoints: Vec<EndpointConfig>,
    /// Account balance placed in field 54 of approved balance enquiries.
    #[serde(default = "default_balance")]
    pub balance: String,
    #[serde(default)]
    pub response_delay_ms: u64,
    /// TPDU for the nac channel as 10 hex characters; default 6000000000.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tpdu: Option<String>,
    /// Emit one log line per handled message on standard output.
    #[serde(default = "default_true")]
    pub log: bool,
}

fn default_endpoints() -> Vec<EndpointConfig> {
    vec![
        EndpointConfig { channel: ChannelKind::Ascii, port: 8001 },
        EndpointConfig { channel: ChannelKind::Nac, port: 8002 },
        EndpointConfig { channel: ChannelKind::Xml, port: 8003 },
    ]
}

fn default_balance() -> String {
    "000000010000".to_string()
}

fn default_true() -> bool {
    true
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            endpoints: default_endpoints(),
            balance: default_balance(),
            response_delay_ms: 0,
            tpdu: None,
            log: true,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.endpoints.len() != 3 {
            return Err(SimError::Config(format!(
                "need exactly 3 endpoints (one per channel), got {}",
                self.endpoints.len()
            )));
        }
        let mut channels: Vec<ChannelKind> = self.endpoints.iter().map(|e| e.channel).collect();
        channels.sort_by_key(|c| c.as_str());
        channels.dedup();
        if channels.len() != 3 {
            return Err(SimError::Config(
                "endpoints must cover ascii, nac and xml exactly once".to_string(),
            ));
        }
        let mut ports: Vec<u16> = self
            .endpoints
            .iter()
            .map(|e| e.port)
            .filter(|&p| p != 0) // port 0 asks the OS for an ephemeral port
            .collect();
        ports.sort_unstable();
        if let Some(dup) = ports.windows(2).find(|w| w[0] == w[1]) {
            return Err(SimError::PortInUse(dup[0]));
        }
        if self.balance.is_empty() || FieldValue::text(self.balance.clone()).is_err() {
            return Err(SimError::Config(format!(
                "balance {:?} must be non-empty printable ASCII",
                self.balance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("port {0} already in use")]
    PortInUse(u16),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A stateless request handler plus the predicate that selects it.
pub struct Participant {
    pub name: &'static str,
    pub matches: fn(&IsoMsg) -> bool,
    pub handle: fn(&IsoMsg, &str) -> IsoMsg,
}

fn proc_code_re() -> &'static regex::Regex {
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    RE.get_or_init(|| regex::Regex::new("^31[0-9]{4}$").expect("static regex"))
}

/// Balance-enquiry validation: approve ("00") only a "0200" whose
/// processing code is a balance inquiry (31xxxx); otherwise decline with
/// "12". Approved responses carry the account balance in field 54.
/// Everything else in the request is echoed back.
pub fn validate_balance_enquiry(request: &IsoMsg, balance: &str) -> IsoMsg {
    let mut response = request.clone();
    let approved = request.mti().as_str() == "0200"
        && request
            .get_text(3)
            .is_some_and(|code| proc_code_re().is_match(code));
    response.set_mti(Mti::new("0210").expect("static mti"));
    let code = if approved { "00" } else { "12" };
    response.set_text(39, code).expect("static response code");
    if approved {
        response
            .set_text(54, balance)
            .expect("balance validated printable");
    } else {
        response.remove(54);
    }
    response
}

fn echo_with(request: &IsoMsg, mti: &str, code: &str) -> IsoMsg {
    let mut response = request.clone();
    response.set_mti(Mti::new(mti).expect("static mti"));
    response.set_text(39, code).expect("static response code");
    response
}

const PARTICIPANTS: &[Participant] = &[
    Participant {
        name: "balance-enquiry",
        matches: |req| {
            req.mti().as_str() == "0200"
                && req.get_text(3).is_some_and(|c| c.starts_with("31"))
        },
        handle: |req, balance| validate_balance_enquiry(req, balance),
    },
    Participant {
        name: "purchase-echo",
        matches: |req| {
            req.mti().as_str() == "0200"
                && req.get_text(3).is_some_and(|c| c.starts_with("00"))
        },
        handle: |req, _| echo_with(req, "0210", "00"),
    },
    Participant {
        name: "network-echo",
        matches: |req| req.mti().as_str() == "0800",
        handle: |req, _| echo_with(req, "0810", "00"),
    },
    Participant {
        name: "default",
        matches: |_| true,
        handle: |req, _| {
            let mut response = req.clone();
            response.set_text(39, "12").expect("static response code");
            response
        },
    },
];

pub fn participants() -> &'static [Participant] {
    PARTICIPANTS
}

/// First matching participant in registration order; the trailing
/// catch-all makes this total.
pub fn route(request: &IsoMsg) -> &'static Participant {
    PARTICIPANTS
        .iter()
        .find(|p| (p.matches)(request))
        .expect("default participant always matches")
}

struct SimContext {
    balance: String,
    packager: Arc<Packager>,
    tpdu: [u8; 5],
    delay: Duration,
    log: bool,
    shutdown: Arc<AtomicBool>,
}

impl SimContext {
    fn log_msg(&self, channel: ChannelKind, direction: &str, msg: &IsoMsg) {
        if self.log {
            println!(
                "{} {} {} mti={} f39={}",
                chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.3fZ"),
                channel,
                direction,
                msg.mti(),
                msg.get_text(39).unwrap_or("-"),
            );
        }
    }

    fn log_drop(&self, channel: ChannelKind, reason: &str) {
        if self.log {
            println!(
                "{} {} drop {}",
                chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.3fZ"),
                channel,
                reason,
            );
        }
    }
}

/// A running simulator; dropping it does not stop it — call [`Simulator::stop`].
pub struct Simulator {
    endpoints: Vec<Endpoint>,
    shutdown: Arc<AtomicBool>,
    accept_threads: Vec<JoinHandle<()>>,
    conn_threads: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl Simulator {
    pub fn start(config: SimulatorConfig) -> Result<Simulator, SimError> {
        Simulator::start_with_packager(config, Arc::new(Packager::default_ascii()))
    }

    pub fn start_with_packager(
        config: SimulatorConfig,
        packager: Arc<Packager>,
    ) -> Result<Simulator, SimError> {
        config.validate()?;
        let tpdu = match &config.tpdu {
            Some(s) => net::parse_tpdu(s).map_err(|e| SimError::Config(e.to_string()))?,
            None => switchsim_core::DEFAULT_TPDU,
        };

        // bind everything before spawning anything: a failure here drops
        // the listeners bound so far, leaving nothing half-started
        let mut listeners = Vec::new();
        for ep in &config.endpoints {
            let listener = TcpListener::bind(("127.0.0.1", ep.port)).map_err(|e| {
                if e.kind() == ErrorKind::AddrInUse {
                    SimError::PortInUse(ep.port)
                } else {
                    SimError::Io(e)
                }
            })?;
            listener.set_nonblocking(true)?;
            listeners.push((ep.channel, listener));
        }

        let shutdown = Arc::new(AtomicBool::new(false));
        let conn_threads = Arc::new(Mutex::new(Vec::new()));
        let mut endpoints = Vec::new();
        let mut accept_threads = Vec::new();

        for (channel, listener) in listeners {
            let port = listener.local_addr()?.port();
            endpoints.push(Endpoint::new("127.0.0.1", port, channel));
            let ctx = Arc::new(SimContext {
                balance: config.balance.clone(),
                packager: packager.clone(),
                tpdu,
                delay: Duration::from_millis(config.response_delay_ms),
                log: config.log,
                shutdown: shutdown.clone(),
            });
            let conns = conn_threads.clone();
            accept_threads.push(std::thread::spawn(move || {
                accept_loop(listener, channel, ctx, conns)
            }));
        }

        Ok(Simulator {
            endpoints,
            shutdown,
            accept_threads,
            conn_threads,
        })
    }

    /// The bound endpoints with actual ports (useful with port 0).
    pub fn endpoints(&self) -> &[Endpoint] {
        &self.endpoints
    }

    pub fn endpoint(&self, channel: ChannelKind) -> Option<&Endpoint> {
        self.endpoints.iter().find(|e| e.channel == channel)
    }

    /// Stops accepting, lets in-flight requests drain, and joins every
    /// worker thread.
    pub fn stop(self) {
        self.shutdown.store(true, Ordering::SeqCst);
        for t in self.accept_threads {
            let _ = t.join();
        }
        let handles: Vec<JoinHandle<()>> =
            std::mem::take(&mut *self.conn_threads.lock().expect("conn thread list"));
        for t in handles {
            let _ = t.join();
        }
    }
}

fn accept_loop(
    listener: TcpListener,
    channel: ChannelKind,
    ctx: Arc<SimContext>,
    conns: Arc<Mutex<Vec<JoinHandle<()>>>>,
) {
    loop {
        if ctx.shutdown.load(Ordering::SeqCst) {
            return;
        }
        match listener.accept() {
            Ok((stream, _)) => {
                let ctx = ctx.clone();
                let handle = std::thread::spawn(move || handle_connection(stream, channel, ctx));
                conns.lock().expect("conn thread list").push(handle);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(_) => std::thread::sleep(Duration::from_millis(10)),
        }
    }
}

/// Reads frames, routes them, and queues responses for the responder
/// thread, which writes each one once its deadline (arrival + delay) has
/// passed — in arrival order.
fn handle_connection(stream: TcpStream, channel: ChannelKind, ctx: Arc<SimContext>) {
    let _ = stream.set_nodelay(true);
    if stream
        .set_read_timeout(Some(Duration::from_millis(25)))
        .is_err()
    {
        return;
    }
    let Ok(mut write_stream) = stream.try_clone() else {
        return;
    };

    let (tx, rx) = mpsc::channel::<(Instant, Vec<u8>)>();
    let responder = std::thread::spawn(move || {
        for (deadline, bytes) in rx {
            let now = Instant::now();
            if deadline > now {
                std::thread::sleep(deadline - now);
            }
            if write_stream.write_all(&bytes).is_err() {
                return;
            }
        }
    });

    serve_frames(stream, channel, &ctx, &tx);

    drop(tx); // responder drains the queue, then exits
    let _ = responder.join();
}

fn serve_frames(
    mut stream: TcpStream,
    channel: ChannelKind,
    ctx: &SimContext,
    tx: &mpsc::Sender<(Instant, Vec<u8>)>,
) {
    let mut decoder = FrameDecoder::new(channel, net::tpdu_len(channel));
    let mut buf = [0u8; 4096];
    loop {
        loop {
            match decoder.next_frame() {
                Ok(Some(frame)) => {
                    let arrival = Instant::now();
                    let request = match net::decode_payload(&frame, channel, &ctx.packager) {
                        Ok(msg) => msg,
                        Err(e) => {
                            // a bad payload inside a good frame: drop it,
                            // keep the connection
                            ctx.log_drop(channel, &format!("unpack error: {e}"));
                            continue;
                        }
                    };
                    ctx.log_msg(channel, "incoming", &request);
                    let response = (route(&request).handle)(&request, &ctx.balance);
                    ctx.log_msg(channel, "outgoing", &response);
                    match net::encode_message(
                        &response,
                        channel,
                        &ctx.packager,
                        &ctx.tpdu,
                        // the response arrives at the client as incoming
                        WireDirection::Incoming,
                    ) {
                        Ok(bytes) => {
                            if tx.send((arrival + ctx.delay, bytes)).is_err() {
                                return;
                            }
                        }
                        Err(e) => ctx.log_drop(channel, &format!("encode error: {e}")),
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    // framing desync is unrecoverable on this connection
                    ctx.log_drop(channel, &format!("framing error: {e}"));
                    return;
                }
            }
        }
        if ctx.shutdown.load(Ordering::SeqCst) {
            return;
        }
        match stream.read(&mut buf) {
            Ok(0) => return,
            Ok(n) => decoder.push(&buf[..n]),
            Err(e) if e.kind() == ErrorKind::WouldBlock || e.kind() == ErrorKind::TimedOut => {}
            Err(_) => return,
        }
    }
}

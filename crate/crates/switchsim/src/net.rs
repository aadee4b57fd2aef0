//! TCP plumbing shared by the simulator and the regression client:
//! endpoints, message encode/decode per channel, and a blocking
//! connection that can be split into independent send/receive halves.

use std::fmt;
use std::io::{ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::{Duration, Instant};

use switchsim_core::{
    frame_ascii, frame_nac, frame_xml, pack, parse_xml, unpack, ChannelKind, CodecError,
    FrameDecoder, FramingError, IsoMsg, Packager, WireDirection, XmlError, DEFAULT_TPDU,
};

/// Default port per channel, mirroring the simulator's defaults.
pub fn default_port(kind: ChannelKind) -> u16 {
    match kind {
        ChannelKind::Ascii => 8001,
        ChannelKind::Nac => 8002,
        ChannelKind::Xml => 8003,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
    pub channel: ChannelKind,
}

impl Endpoint {
    pub fn new(host: impl Into<String>, port: u16, channel: ChannelKind) -> Endpoint {
        Endpoint {
            host: host.into(),
            port,
            channel,
        }
    }

    pub fn addr(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}/{}", self.host, self.port, self.channel)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("connect to {endpoint} failed: {source}")]
    ConnectRefused {
        endpoint: String,
        source: std::io::Error,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("timed out after {elapsed_ms} ms")]
    Timeout { elapsed_ms: u64 },
    #[error("peer closed the connection")]
    PeerClosed,
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error("unpack failed: {0}")]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("tpdu {0:?} must be exactly 10 hex characters")]
    BadTpdu(String),
}

/// Parses a TPDU given as 10 hex characters, e.g. "6000000000".
pub fn parse_tpdu(s: &str) -> Result<[u8; 5], NetError> {
    let bytes = match s.len() {
        10 => hex_decode(s).ok_or_else(|| NetError::BadTpdu(s.to_string()))?,
        _ => return Err(NetError::BadTpdu(s.to_string())),
    };
    Ok(bytes)
}

fn hex_decode(s: &str) -> Option<[u8; 5]> {
    let mut out = [0u8; 5];
    for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
        let hi = (chunk[0] as char).to_digit(16)?;
        let lo = (chunk[1] as char).to_digit(16)?;
        out[i] = ((hi << 4) | lo) as u8;
    }
    Some(out)
}

/// One message, framed for the wire — packed bytes for ascii/nac, an
/// `<isomsg>` document for xml.
pub fn encode_message(
    msg: &IsoMsg,
    channel: ChannelKind,
    packager: &Packager,
    tpdu: &[u8; 5],
    direction: WireDirection,
) -> Result<Vec<u8>, NetError> {
    match channel {
        ChannelKind::Ascii => Ok(frame_ascii(&pack(msg, packager)?)?),
        ChannelKind::Nac => Ok(frame_nac(&pack(msg, packager)?, Some(tpdu))?),
        ChannelKind::Xml => Ok(frame_xml(msg, direction)),
    }
}

/// Inverse of [`encode_message`] on an already deframed payload.
pub fn decode_payload(
    payload: &[u8],
    channel: ChannelKind,
    packager: &Packager,
) -> Result<IsoMsg, NetError> {
    match channel {
        ChannelKind::Ascii | ChannelKind::Nac => Ok(unpack(payload, packager)?),
        ChannelKind::Xml => Ok(parse_xml(payload)?.0),
    }
}

pub fn tpdu_len(channel: ChannelKind) -> usize {
    match channel {
        ChannelKind::Nac => DEFAULT_TPDU.len(),
        _ => 0,
    }
}

/// A blocking client connection carrying framed messages in both
/// directions.
pub struct Connection {
    pub endpoint: Endpoint,
    stream: TcpStream,
    decoder: FrameDecoder,
    packager: Arc<Packager>,
    tpdu: [u8; 5],
}

const POLL_SLICE: Duration = Duration::from_millis(25);

impl Connection {
    pub fn connect(
        endpoint: &Endpoint,
        packager: Arc<Packager>,
        tpdu: [u8; 5],
        timeout: Duration,
    ) -> Result<Connection, NetError> {
        let mut addrs = endpoint
            .addr()
            .to_socket_addrs()
            .map_err(|source| NetError::ConnectRefused {
                endpoint: endpoint.to_string(),
                source,
            })?;
        let addr = addrs.next().ok_or_else(|| NetError::ConnectRefused {
            endpoint: endpoint.to_string(),
            source: std::io::Error::new(ErrorKind::NotFound, "no address resolved"),
        })?;
        let stream =
            TcpStream::connect_timeout(&addr, timeout).map_err(|source| NetError::ConnectRefused {
                endpoint: endpoint.to_string(),
                source,
            })?;
        stream.set_nodelay(true)?;
        Ok(Connection {
            endpoint: endpoint.clone(),
            decoder: FrameDecoder::new(endpoint.channel, tpdu_len(endpoint.channel)),
            stream,
            packager,
            tpdu,
        })
    }

    pub fn send(&mut self, msg: &IsoMsg, direction: WireDirection) -> Result<(), NetError> {
        let bytes = encode_message(msg, self.endpoint.channel, &self.packager, &self.tpdu, direction)?;
        self.stream.write_all(&bytes)?;
        Ok(())
    }

    /// Blocks until one whole message arrives or the timeout elapses.
    pub fn receive(&mut self, timeout: Duration) -> Result<IsoMsg, NetError> {
        let deadline = Instant::now() + timeout;
        let mut buf = [0u8; 4096];
        loop {
            if let Some(frame) = self.decoder.next_frame()? {
                return decode_payload(&frame, self.endpoint.channel, &self.packager);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(NetError::Timeout {
                    elapsed_ms: timeout.as_millis() as u64,
                });
            }
            let wait = (deadline - now).min(POLL_SLICE);
            self.stream.set_read_timeout(Some(wait))?;
            match self.stream.read(&mut buf) {
                Ok(0) => return Err(NetError::PeerClosed),
                Ok(n) => self.decoder.push(&buf[..n]),
                Err(e) if e.kind() == ErrorKind::WouldBlock || e.kind() == ErrorKind::TimedOut => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Splits into independently owned halves so one thread can write
    /// while another reads.
    pub fn split(self) -> Result<(SendHalf, RecvHalf), NetError> {
        let write_stream = self.stream.try_clone()?;
        Ok((
            SendHalf {
                stream: write_stream,
                channel: self.endpoint.channel,
                packager: self.packager.clone(),
                tpdu: self.tpdu,
            },
            RecvHalf {
                stream: self.stream,
                decoder: self.decoder,
                channel: self.endpoint.channel,
                packager: self.packager,
            },
        ))
    }
}

pub struct SendHalf {
    stream: TcpStream,
    channel: ChannelKind,
    packager: Arc<Packager>,
    tpdu: [u8; 5],
}

impl SendHalf {
    pub fn send(&mut self, msg: &IsoMsg, direction: WireDirection) -> Result<(), NetError> {
        let bytes = encode_message(msg, self.channel, &self.packager, &self.tpdu, direction)?;
        self.stream.write_all(&bytes)?;
        Ok(())
    }
}

pub struct RecvHalf {
    stream: TcpStream,
    decoder: FrameDecoder,
    channel: ChannelKind,
    packager: Arc<Packager>,
}

impl RecvHalf {
    /// Waits up to `wait` for bytes and returns at most one decoded
    /// message; `Ok(None)` means nothing complete arrived yet.
    pub fn poll_message(&mut self, wait: Duration) -> Result<Option<IsoMsg>, NetError> {
        if let Some(frame) = self.decoder.next_frame()? {
            return decode_payload(&frame, self.channel, &self.packager).map(Some);
        }
        self.stream.set_read_timeout(Some(wait))?;
        let mut buf = [0u8; 4096];
        match self.stream.read(&mut buf) {
            Ok(0) => return Err(NetError::PeerClosed),
            Ok(n) => self.decoder.push(&buf[..n]),
            Err(e) if e.kind() == ErrorKind::WouldBlock || e.kind() == ErrorKind::TimedOut => {
                return Ok(None)
            }
            Err(e) => return Err(e.into()),
        }
        match self.decoder.next_frame()? {
            Some(frame) => decode_payload(&frame, self.channel, &self.packager).map(Some),
            None => Ok(None),
        }
    }
}

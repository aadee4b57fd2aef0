//! Wire framing for the three channel styles: ASCII (4-digit decimal length
//! header), NAC (2-byte big-endian length, optional 5-byte TPDU) and XML
//! (self-delimiting `<isomsg>` document).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Conventional dummy TPDU used when a NAC endpoint wants one but does not
/// specify the bytes.
pub const DEFAULT_TPDU: [u8; 5] = [0x60, 0x00, 0x00, 0x00, 0x00];

/// Upper bound on a buffered XML frame while scanning for its terminator.
const MAX_XML_FRAME: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ChannelKind {
    Ascii,
    Nac,
    Xml,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 3] = [ChannelKind::Ascii, ChannelKind::Nac, ChannelKind::Xml];

    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::Ascii => "ascii",
            ChannelKind::Nac => "nac",
            ChannelKind::Xml => "xml",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = UnknownChannel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("ascii") {
            Ok(ChannelKind::Ascii)
        } else if s.eq_ignore_ascii_case("nac") {
            Ok(ChannelKind::Nac)
        } else if s.eq_ignore_ascii_case("xml") {
            Ok(ChannelKind::Xml)
        } else {
            Err(UnknownChannel(String::from(s)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown channel kind {0:?} (expected ascii, nac or xml)")]
pub struct UnknownChannel(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FramingError {
    #[error("payload of {0} bytes exceeds the channel frame limit")]
    PayloadTooLarge(usize),
    #[error("bad length header: {0}")]
    BadLengthHeader(String),
    #[error("frame of {0} bytes exceeds the maximum frame size")]
    FrameTooLarge(usize),
}

/// ASCII channel: 4 zero-padded decimal digits, then the payload.
pub fn frame_ascii(payload: &[u8]) -> Result<Vec<u8>, FramingError> {
    if payload.len() > 9999 {
        return Err(FramingError::PayloadTooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(format!("{:04}", payload.len()).as_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// NAC channel: 2-byte big-endian length of (tpdu ++ payload), then the
/// TPDU (when present), then the payload.
pub fn frame_nac(payload: &[u8], tpdu: Option<&[u8; 5]>) -> Result<Vec<u8>, FramingError> {
    let tpdu_len = tpdu.map_or(0, |t| t.len());
    let total = tpdu_len + payload.len();
    if total > u16::MAX as usize {
        return Err(FramingError::PayloadTooLarge(total));
    }
    let mut out = Vec::with_capacity(total + 2);
    out.extend_from_slice(&(total as u16).to_be_bytes());
    if let Some(t) = tpdu {
        out.extend_from_slice(t);
    }
    out.extend_from_slice(payload);
    Ok(out)
}

/// Incremental deframer. Feed raw stream bytes with [`FrameDecoder::push`]
/// and drain complete payloads with [`FrameDecoder::next_frame`]; partial
/// frames stay buffered, so arbitrary read-chunk boundaries are fine.
///
/// For NAC the configured TPDU length is stripped from each frame. For XML
/// the returned frame is the raw `<isomsg>` document.
#[derive(Debug)]
pub struct FrameDecoder {
    kind: ChannelKind,
    tpdu_len: usize,
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new(kind: ChannelKind, tpdu_len: usize) -> FrameDecoder {
        FrameDecoder {
            kind,
            tpdu_len: if kind == ChannelKind::Nac { tpdu_len } else { 0 },
            buf: Vec::new(),
        }
    }

    pub fn push(&mut self, data: &[u8]) {
        self.buf.extend_from_slice(data);
    }

    /// Bytes buffered but not yet consumed as a frame. Non-zero at stream
    /// end means the peer closed mid-frame.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Pops the next complete frame, or `None` when more bytes are needed.
    pub fn next_frame(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        match self.kind {
            ChannelKind::Ascii => self.next_ascii(),
            ChannelKind::Nac => self.next_nac(),
            ChannelKind::Xml => self.next_xml(),
        }
    }

    fn next_ascii(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        if self.buf.len() < 4 {
            return Ok(None);
        }
        let header = &self.buf[..4];
        if !header.iter().all(u8::is_ascii_digit) {
            return Err(FramingError::BadLengthHeader(format!(
                "non-digit ASCII length {:?}",
                String::from_utf8_lossy(header)
            )));
        }
        let len = header
            .iter()
            .fold(0usize, |acc, b| acc * 10 + (b - b'0') as usize);
        if self.buf.len() < 4 + len {
            return Ok(None);
        }
        let payload = self.buf[4..4 + len].to_vec();
        self.buf.drain(..4 + len);
        Ok(Some(payload))
    }

    fn next_nac(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        if self.buf.len() < 2 {
            return Ok(None);
        }
        let len = u16::from_be_bytes([self.buf[0], self.buf[1]]) as usize;
        if len == 0 {
            return Err(FramingError::BadLengthHeader(String::from(
                "zero-length nac frame",
            )));
        }
        if len < self.tpdu_len {
            return Err(FramingError::BadLengthHeader(format!(
                "frame length {len} shorter than the {}-byte TPDU",
                self.tpdu_len
            )));
        }
        if self.buf.len() < 2 + len {
            return Ok(None);
        }
        let payload = self.buf[2 + self.tpdu_len..2 + len].to_vec();
        self.buf.drain(..2 + len);
        Ok(Some(payload))
    }

    fn next_xml(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        const TERMINATOR: &[u8] = b"</isomsg>";
        if let Some(pos) = find(&self.buf, TERMINATOR) {
            let end = pos + TERMINATOR.len();
            let frame = self.buf[..end].to_vec();
            self.buf.drain(..end);
            return Ok(Some(frame));
        }
        if self.buf.len() > MAX_XML_FRAME {
            return Err(FramingError::FrameTooLarge(self.buf.len()));
        }
        Ok(None)
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|window| window == needle)
}

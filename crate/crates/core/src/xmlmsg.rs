//! The XML channel representation: one self-delimiting `<isomsg>` document
//! per message, fields as `<field id=".." value=".."/>` attributes. The
//! bitmap never appears; it is derived again on parse.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::msg::{IsoMsg, Mti, MAX_FIELD, MIN_FIELD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireDirection {
    Incoming,
    Outgoing,
}

impl WireDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            WireDirection::Incoming => "incoming",
            WireDirection::Outgoing => "outgoing",
        }
    }
}

impl fmt::Display for WireDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WireDirection {
    type Err = XmlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incoming" => Ok(WireDirection::Incoming),
            "outgoing" => Ok(WireDirection::Outgoing),
            other => Err(XmlError::malformed(format!(
                "direction must be incoming or outgoing, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed isomsg document: {reason}")]
pub struct XmlError {
    pub reason: String,
}

impl XmlError {
    fn malformed(reason: impl Into<String>) -> XmlError {
        XmlError {
            reason: reason.into(),
        }
    }
}

fn escape_into(out: &mut String, value: &str) {
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
}

/// Renders a message as a single-line `<isomsg>` document. The MTI travels
/// as `<field id="0" .../>`; data fields follow in ascending id order.
/// Binary values are rendered as uppercase hex text.
pub fn frame_xml(msg: &IsoMsg, direction: WireDirection) -> Vec<u8> {
    let mut out = String::with_capacity(64 + msg.len() * 32);
    out.push_str("<isomsg direction=\"");
    out.push_str(direction.as_str());
    out.push_str("\">");
    out.push_str("<field id=\"0\" value=\"");
    out.push_str(msg.mti().as_str());
    out.push_str("\"/>");
    for (number, value) in msg.fields() {
        out.push_str("<field id=\"");
        out.push_str(&format!("{number}"));
        out.push_str("\" value=\"");
        escape_into(&mut out, &value.display_string());
        out.push_str("\"/>");
    }
    out.push_str("</isomsg>");
    out.into_bytes()
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn skip_ws(&mut self) {
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
    }

    fn eat(&mut self, literal: &str) -> bool {
        if self.bytes[self.pos..].starts_with(literal.as_bytes()) {
            self.pos += literal.len();
            true
        } else {
            false
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn name(&mut self) -> Result<&'a str, XmlError> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(XmlError::malformed("expected attribute name"));
        }
        core::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| XmlError::malformed("attribute name is not utf8"))
    }

    fn quoted_value(&mut self) -> Result<String, XmlError> {
        let quote = match self.peek() {
            Some(q @ (b'"' | b'\'')) => q,
            _ => return Err(XmlError::malformed("expected quoted attribute value")),
        };
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(XmlError::malformed("unterminated attribute value")),
                Some(b) if b == quote => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(b'<') => return Err(XmlError::malformed("raw '<' in attribute value")),
                Some(b'&') => {
                    let entity_end = self.bytes[self.pos..]
                        .iter()
                        .position(|&b| b == b';')
                        .map(|off| self.pos + off)
                        .ok_or_else(|| XmlError::malformed("unterminated entity"))?;
                    let entity = &self.bytes[self.pos + 1..entity_end];
                    out.push(match entity {
                        b"amp" => '&',
                        b"lt" => '<',
                        b"gt" => '>',
                        b"quot" => '"',
                        b"apos" => '\'',
                        other => {
                            return Err(XmlError::malformed(format!(
                                "unknown entity &{};",
                                String::from_utf8_lossy(other)
                            )))
                        }
                    });
                    self.pos = entity_end + 1;
                }
                Some(b) => {
                    out.push(b as char);
                    self.pos += 1;
                }
            }
        }
    }

    /// Parses `name="value"` pairs up to (not including) `>` or `/>`.
    fn attributes(&mut self) -> Result<Vec<(&'a str, String)>, XmlError> {
        let mut attrs = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'>') | Some(b'/') | None => return Ok(attrs),
                _ => {}
            }
            let name = self.name()?;
            self.skip_ws();
            if !self.eat("=") {
                return Err(XmlError::malformed(format!("attribute {name} missing '='")));
            }
            self.skip_ws();
            let value = self.quoted_value()?;
            attrs.push((name, value));
        }
    }
}

/// Parses one `<isomsg>` document back into a message and its direction.
/// `<field id="0"/>` is the MTI and must be present exactly once; other ids
/// must be in 2..=128 with no duplicates. All parsed values are text.
pub fn parse_xml(doc: &[u8]) -> Result<(IsoMsg, WireDirection), XmlError> {
    let mut sc = Scanner {
        bytes: doc,
        pos: 0,
    };
    sc.skip_ws();
    if !sc.eat("<isomsg") {
        return Err(XmlError::malformed("expected <isomsg> root element"));
    }

    let attrs = sc.attributes()?;
    if !sc.eat(">") {
        return Err(XmlError::malformed("unterminated <isomsg> start tag"));
    }
    let direction = attrs
        .iter()
        .find(|(name, _)| *name == "direction")
        .ok_or_else(|| XmlError::malformed("missing direction attribute"))?
        .1
        .parse::<WireDirection>()?;

    let mut mti: Option<Mti> = None;
    let mut fields: Vec<(u16, String)> = Vec::new();

    loop {
        sc.skip_ws();
        if sc.eat("</isomsg>") {
            break;
        }
        if !sc.eat("<field") {
            return Err(XmlError::malformed("expected <field> element"));
        }
        let attrs = sc.attributes()?;
        if !sc.eat("/>") {
            return Err(XmlError::malformed("field element must be self-closing"));
        }

        let mut id: Option<String> = None;
        let mut value: Option<String> = None;
        for (name, v) in attrs {
            match name {
                "id" => id = Some(v),
                "value" => value = Some(v),
                _ => {}
            }
        }
        let id = id.ok_or_else(|| XmlError::malformed("field missing id attribute"))?;
        let value = value.ok_or_else(|| XmlError::malformed("field missing value attribute"))?;

        let number: u16 = id
            .parse()
            .map_err(|_| XmlError::malformed(format!("field id {id:?} is not a number")))?;
        if number == 0 {
            if mti.is_some() {
                return Err(XmlError::malformed("duplicate MTI (field id 0)"));
            }
            mti = Some(
                Mti::new(&value)
                    .map_err(|_| XmlError::malformed(format!("bad MTI value {value:?}")))?,
            );
        } else if (MIN_FIELD..=MAX_FIELD).contains(&number) {
            if fields.iter().any(|(n, _)| *n == number) {
                return Err(XmlError::malformed(format!("duplicate field id {number}")));
            }
            fields.push((number, value));
        } else {
            return Err(XmlError::malformed(format!(
                "field id {number} out of range"
            )));
        }
    }

    sc.skip_ws();
    if sc.pos != sc.bytes.len() {
        return Err(XmlError::malformed("content after </isomsg>"));
    }

    let mti = mti.ok_or_else(|| XmlError::malformed("missing MTI (field id 0)"))?;
    let mut msg = IsoMsg::new(mti);
    for (number, value) in fields {
        let fv = crate::msg::FieldValue::text(value)
            .map_err(|e| XmlError::malformed(format!("field {number}: {e}")))?;
        msg.set(number, fv).expect("range checked above");
    }
    Ok((msg, direction))
}

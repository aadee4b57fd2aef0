//! ISO8583 message model: MTI, field values and the sparse field map.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Lowest storable data field. Field 1 is the secondary-bitmap indicator
/// and is always derived from the field set, never stored.
pub const MIN_FIELD: u16 = 2;
/// Highest field number a message can carry.
pub const MAX_FIELD: u16 = 128;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MsgError {
    #[error("invalid MTI {0:?}: expected exactly 4 ASCII digits")]
    InvalidMti(String),
    #[error("field number {0} out of range 2..=128")]
    FieldNumberOutOfRange(u16),
    #[error("text value contains non-printable byte 0x{0:02X}")]
    NonPrintable(u8),
}

/// Message Type Indicator, e.g. "0200" for a financial request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mti([u8; 4]);

impl Mti {
    pub fn new(s: &str) -> Result<Self, MsgError> {
        let b = s.as_bytes();
        if b.len() != 4 || !b.iter().all(u8::is_ascii_digit) {
            return Err(MsgError::InvalidMti(String::from(s)));
        }
        Ok(Mti([b[0], b[1], b[2], b[3]]))
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, MsgError> {
        match core::str::from_utf8(b) {
            Ok(s) => Mti::new(s),
            Err(_) => Err(MsgError::InvalidMti(String::from("<non-utf8>"))),
        }
    }

    pub fn as_str(&self) -> &str {
        // only ASCII digits get stored
        core::str::from_utf8(&self.0).unwrap()
    }

    pub fn as_bytes(&self) -> &[u8; 4] {
        &self.0
    }
}

impl fmt::Display for Mti {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mti {
    type Err = MsgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mti::new(s)
    }
}

fn printable_ascii(b: u8) -> bool {
    (0x20..=0x7E).contains(&b)
}

/// A single field's content: printable-ASCII text or raw bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldValue {
    Text(String),
    Binary(Vec<u8>),
}

impl FieldValue {
    /// Builds a text value, rejecting anything outside printable ASCII
    /// (0x20..=0x7E).
    pub fn text(s: impl Into<String>) -> Result<Self, MsgError> {
        let s = s.into();
        if let Some(&b) = s.as_bytes().iter().find(|b| !printable_ascii(**b)) {
            return Err(MsgError::NonPrintable(b));
        }
        Ok(FieldValue::Text(s))
    }

    pub fn binary(b: impl Into<Vec<u8>>) -> Self {
        FieldValue::Binary(b.into())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            FieldValue::Text(s) => Some(s),
            FieldValue::Binary(_) => None,
        }
    }

    pub fn as_binary(&self) -> Option<&[u8]> {
        match self {
            FieldValue::Text(_) => None,
            FieldValue::Binary(b) => Some(b),
        }
    }

    /// Logical length: characters for text, bytes for binary.
    pub fn len(&self) -> usize {
        match self {
            FieldValue::Text(s) => s.len(),
            FieldValue::Binary(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Human/wire-text representation: text as-is, binary as uppercase hex.
    pub fn display_string(&self) -> String {
        match self {
            FieldValue::Text(s) => s.clone(),
            FieldValue::Binary(b) => hex::encode_upper(b),
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Text(s) => f.write_str(s),
            FieldValue::Binary(b) => f.write_str(&hex::encode_upper(b)),
        }
    }
}

/// One ISO8583 message: an MTI plus a sparse map of numbered fields.
///
/// The bitmap (field 1) is never stored; it is derived from the key set
/// when the message is packed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsoMsg {
    mti: Mti,
    fields: BTreeMap<u16, FieldValue>,
}

impl IsoMsg {
    pub fn new(mti: Mti) -> Self {
        IsoMsg {
            mti,
            fields: BTreeMap::new(),
        }
    }

    pub fn mti(&self) -> Mti {
        self.mti
    }

    pub fn set_mti(&mut self, mti: Mti) {
        self.mti = mti;
    }

    /// Stores a field value, silently overwriting any previous one.
    pub fn set(&mut self, number: u16, value: FieldValue) -> Result<(), MsgError> {
        if !(MIN_FIELD..=MAX_FIELD).contains(&number) {
            return Err(MsgError::FieldNumberOutOfRange(number));
        }
        self.fields.insert(number, value);
        Ok(())
    }

    pub fn set_text(&mut self, number: u16, s: &str) -> Result<(), MsgError> {
        self.set(number, FieldValue::text(s)?)
    }

    pub fn get(&self, number: u16) -> Option<&FieldValue> {
        self.fields.get(&number)
    }

    pub fn get_text(&self, number: u16) -> Option<&str> {
        self.fields.get(&number).and_then(FieldValue::as_text)
    }

    pub fn remove(&mut self, number: u16) -> Option<FieldValue> {
        self.fields.remove(&number)
    }

    /// Present field numbers in ascending order.
    pub fn field_numbers(&self) -> impl Iterator<Item = u16> + '_ {
        self.fields.keys().copied()
    }

    /// (number, value) pairs in ascending field order.
    pub fn fields(&self) -> impl Iterator<Item = (u16, &FieldValue)> {
        self.fields.iter().map(|(n, v)| (*n, v))
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mti_requires_four_digits() {
        assert!(Mti::new("0200").is_ok());
        assert!(matches!(Mti::new("02X0"), Err(MsgError::InvalidMti(_))));
        assert!(matches!(Mti::new("020"), Err(MsgError::InvalidMti(_))));
        assert!(matches!(Mti::new("02000"), Err(MsgError::InvalidMti(_))));
        assert_eq!(Mti::new("0810").unwrap().as_str(), "0810");
    }

    #[test]
    fn set_then_get_returns_value() {
        let mut msg = IsoMsg::new(Mti::new("0200").unwrap());
        msg.set_text(39, "00").unwrap();
        assert_eq!(msg.get_text(39), Some("00"));
    }

    #[test]
    fn get_absent_field_is_none() {
        let msg = IsoMsg::new(Mti::new("0200").unwrap());
        assert!(msg.get(54).is_none());
    }

    #[test]
    fn set_overwrites_silently() {
        let mut msg = IsoMsg::new(Mti::new("0200").unwrap());
        msg.set_text(39, "12").unwrap();
        msg.set_text(39, "00").unwrap();
        assert_eq!(msg.get_text(39), Some("00"));
        assert_eq!(msg.len(), 1);
    }

    #[test]
    fn bitmap_field_is_not_storable() {
        let mut msg = IsoMsg::new(Mti::new("0200").unwrap());
        let err = msg.set_text(1, "x").unwrap_err();
        assert_eq!(err, MsgError::FieldNumberOutOfRange(1));
        assert_eq!(
            msg.set_text(0, "x").unwrap_err(),
            MsgError::FieldNumberOutOfRange(0)
        );
        assert_eq!(
            msg.set_text(129, "x").unwrap_err(),
            MsgError::FieldNumberOutOfRange(129)
        );
    }

    #[test]
    fn text_values_must_be_printable() {
        assert!(FieldValue::text("TERM0001").is_ok());
        assert_eq!(
            FieldValue::text("ab\ncd").unwrap_err(),
            MsgError::NonPrintable(0x0A)
        );
    }

    #[test]
    fn field_iteration_is_ascending() {
        let mut msg = IsoMsg::new(Mti::new("0200").unwrap());
        msg.set_text(41, "TERM0001").unwrap();
        msg.set_text(3, "310000").unwrap();
        msg.set_text(11, "000001").unwrap();
        let order: Vec<u16> = msg.field_numbers().collect();
        assert_eq!(order, vec![3, 11, 41]);
    }
}

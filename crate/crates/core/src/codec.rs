//! Deterministic, byte-exact packing and unpacking of [`IsoMsg`] values
//! against a [`Packager`] definition.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::bitmap::{compute_bitmap, Bitmap};
use crate::msg::{FieldValue, IsoMsg, Mti};
use crate::packager::{BitmapEncoding, ContentClass, FieldDef, LengthKind, Packager};

/// Where the input ran out during unpack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncatedAt {
    Mti,
    Bitmap,
    Field(u16),
}

impl fmt::Display for TruncatedAt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncatedAt::Mti => f.write_str("MTI"),
            TruncatedAt::Bitmap => f.write_str("bitmap"),
            TruncatedAt::Field(n) => write!(f, "field {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("no field definition for field {0}")]
    MissingFieldDef(u16),
    #[error("field {field}: value length {actual} exceeds limit {max}")]
    ValueTooLong { field: u16, max: usize, actual: usize },
    #[error("field {field}: value length {actual} below fixed width {expected}")]
    ValueTooShort {
        field: u16,
        expected: usize,
        actual: usize,
    },
    #[error("field {field}: invalid character for content class")]
    InvalidChar { field: u16 },
    #[error("field {field}: value kind does not match content class")]
    WrongValueKind { field: u16 },
    #[error("field {field}: malformed length prefix")]
    BadLengthPrefix { field: u16 },
    #[error("MTI is not 4 ASCII digits")]
    InvalidMti,
    #[error("malformed bitmap")]
    BadBitmap,
    #[error("input truncated while reading {0}")]
    Truncated(TruncatedAt),
    #[error("bitmap flags field {0} but the packager does not define it")]
    UnknownField(u16),
    #[error("{0} unconsumed byte(s) after the last field")]
    TrailingBytes(usize),
}

/// Packs a message: MTI bytes, then the bitmap in the packager's encoding,
/// then every field in ascending number order (with its llvar/lllvar length
/// prefix where defined). Same input always yields the same bytes.
pub fn pack(msg: &IsoMsg, packager: &Packager) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(msg.mti().as_bytes());

    let bitmap = compute_bitmap(msg);
    match packager.bitmap_encoding() {
        BitmapEncoding::HexText => out.extend_from_slice(bitmap.to_hex().as_bytes()),
        BitmapEncoding::Binary => out.extend_from_slice(&bitmap.to_bytes()),
    }

    for (number, value) in msg.fields() {
        let def = packager
            .def(number)
            .ok_or(CodecError::MissingFieldDef(number))?;
        encode_field(&mut out, def, value)?;
    }
    Ok(out)
}

fn encode_field(out: &mut Vec<u8>, def: &FieldDef, value: &FieldValue) -> Result<(), CodecError> {
    let field = def.number;
    let len = value.len();

    match (def.class, value) {
        (ContentClass::Numeric, FieldValue::Text(s)) => {
            if !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(CodecError::InvalidChar { field });
            }
        }
        (ContentClass::AlphaNumeric, FieldValue::Text(_)) => {
            // printable ASCII guaranteed by FieldValue::text
        }
        (ContentClass::Binary, FieldValue::Binary(_)) => {}
        _ => return Err(CodecError::WrongValueKind { field }),
    }

    match def.length {
        LengthKind::Fixed(width) => {
            if len > width {
                return Err(CodecError::ValueTooLong {
                    field,
                    max: width,
                    actual: len,
                });
            }
            if len < width {
                return Err(CodecError::ValueTooShort {
                    field,
                    expected: width,
                    actual: len,
                });
            }
        }
        LengthKind::Llvar(max) => {
            if len > max {
                return Err(CodecError::ValueTooLong {
                    field,
                    max,
                    actual: len,
                });
            }
            push_decimal(out, len, 2);
        }
        LengthKind::Lllvar(max) => {
            if len > max {
                return Err(CodecError::ValueTooLong {
                    field,
                    max,
                    actual: len,
                });
            }
            push_decimal(out, len, 3);
        }
    }

    match value {
        FieldValue::Text(s) => out.extend_from_slice(s.as_bytes()),
        FieldValue::Binary(b) => out.extend_from_slice(hex::encode_upper(b).as_bytes()),
    }
    Ok(())
}

fn push_decimal(out: &mut Vec<u8>, value: usize, digits: usize) {
    let mut buf = [0u8; 4];
    let mut v = value;
    for i in (0..digits).rev() {
        buf[i] = b'0' + (v % 10) as u8;
        v /= 10;
    }
    out.extend_from_slice(&buf[..digits]);
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, at: TruncatedAt) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.data.len() {
            return Err(CodecError::Truncated(at));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

/// Unpacks a complete packed message (framing already stripped). Trailing
/// unconsumed bytes are an error, so `unpack(pack(m)) == m` holds exactly.
pub fn unpack(data: &[u8], packager: &Packager) -> Result<IsoMsg, CodecError> {
    let mut cur = Cursor { data, pos: 0 };

    let mti_bytes = cur.take(4, TruncatedAt::Mti)?;
    let mti = Mti::from_bytes(mti_bytes).map_err(|_| CodecError::InvalidMti)?;

    let bitmap = read_bitmap(&mut cur, packager.bitmap_encoding())?;

    let mut msg = IsoMsg::new(mti);
    for number in bitmap.field_numbers() {
        let def = packager.def(number).ok_or(CodecError::UnknownField(number))?;
        let value = decode_field(&mut cur, def)?;
        msg.set(number, value).expect("bitmap positions are in range");
    }

    if cur.remaining() > 0 {
        return Err(CodecError::TrailingBytes(cur.remaining()));
    }
    Ok(msg)
}

fn read_bitmap(cur: &mut Cursor<'_>, encoding: BitmapEncoding) -> Result<Bitmap, CodecError> {
    let mut raw = Vec::with_capacity(16);
    match encoding {
        BitmapEncoding::HexText => {
            let first = cur.take(16, TruncatedAt::Bitmap)?;
            raw.extend(hex::decode(first).map_err(|_| CodecError::BadBitmap)?);
            if raw[0] & 0x80 != 0 {
                let second = cur.take(16, TruncatedAt::Bitmap)?;
                raw.extend(hex::decode(second).map_err(|_| CodecError::BadBitmap)?);
            }
        }
        BitmapEncoding::Binary => {
            raw.extend_from_slice(cur.take(8, TruncatedAt::Bitmap)?);
            if raw[0] & 0x80 != 0 {
                raw.extend_from_slice(cur.take(8, TruncatedAt::Bitmap)?);
            }
        }
    }
    Bitmap::from_bytes(&raw).ok_or(CodecError::BadBitmap)
}

fn decode_field(cur: &mut Cursor<'_>, def: &FieldDef) -> Result<FieldValue, CodecError> {
    let field = def.number;
    let at = TruncatedAt::Field(field);

    let len = match def.length {
        LengthKind::Fixed(width) => width,
        LengthKind::Llvar(max) => read_length_prefix(cur, field, 2, max)?,
        LengthKind::Lllvar(max) => read_length_prefix(cur, field, 3, max)?,
    };

    match def.class {
        ContentClass::Numeric => {
            let raw = cur.take(len, at)?;
            if !raw.iter().all(u8::is_ascii_digit) {
                return Err(CodecError::InvalidChar { field });
            }
            Ok(FieldValue::Text(
                String::from_utf8(raw.to_vec()).expect("digits are utf8"),
            ))
        }
        ContentClass::AlphaNumeric => {
            let raw = cur.take(len, at)?;
            let text = core::str::from_utf8(raw).map_err(|_| CodecError::InvalidChar { field })?;
            FieldValue::text(text).map_err(|_| CodecError::InvalidChar { field })
        }
        ContentClass::Binary => {
            let raw = cur.take(len * 2, at)?;
            let bytes = hex::decode(raw).map_err(|_| CodecError::InvalidChar { field })?;
            Ok(FieldValue::Binary(bytes))
        }
    }
}

fn read_length_prefix(
    cur: &mut Cursor<'_>,
    field: u16,
    digits: usize,
    max: usize,
) -> Result<usize, CodecError> {
    let raw = cur.take(digits, TruncatedAt::Field(field))?;
    let mut len = 0usize;
    for &b in raw {
        if !b.is_ascii_digit() {
            return Err(CodecError::BadLengthPrefix { field });
        }
        len = len * 10 + (b - b'0') as usize;
    }
    if len > max {
        return Err(CodecError::ValueTooLong {
            field,
            max,
            actual: len,
        });
    }
    Ok(len)
}

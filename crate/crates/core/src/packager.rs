//! Packager: the ordered field-definition table that makes pack/unpack
//! deterministic and byte-exact.

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::msg::{MAX_FIELD, MIN_FIELD};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackagerError {
    #[error("field number {0} out of range 2..=128")]
    BadFieldNumber(u16),
    #[error("field {field}: invalid length spec ({reason})")]
    BadLengthSpec { field: u16, reason: &'static str },
}

/// What characters a field admits and how its value is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentClass {
    /// ASCII digits only ("n").
    Numeric,
    /// Printable ASCII ("an").
    AlphaNumeric,
    /// Raw bytes, carried on the wire as uppercase hex text ("b").
    Binary,
}

impl ContentClass {
    pub fn token(&self) -> &'static str {
        match self {
            ContentClass::Numeric => "n",
            ContentClass::AlphaNumeric => "an",
            ContentClass::Binary => "b",
        }
    }

    pub fn from_token(tok: &str) -> Option<ContentClass> {
        match tok {
            "n" => Some(ContentClass::Numeric),
            "an" => Some(ContentClass::AlphaNumeric),
            "b" => Some(ContentClass::Binary),
            _ => None,
        }
    }
}

/// Fixed width, or variable with a 2-digit (llvar) / 3-digit (lllvar) prefix.
/// Lengths count characters for text classes and bytes for binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthKind {
    Fixed(usize),
    Llvar(usize),
    Lllvar(usize),
}

impl LengthKind {
    fn validate(&self, field: u16) -> Result<(), PackagerError> {
        let bad = |reason| Err(PackagerError::BadLengthSpec { field, reason });
        match *self {
            LengthKind::Fixed(0) => bad("fixed width must be >= 1"),
            LengthKind::Llvar(max) if max == 0 || max > 99 => bad("llvar max must be 1..=99"),
            LengthKind::Lllvar(max) if max == 0 || max > 999 => bad("lllvar max must be 1..=999"),
            _ => Ok(()),
        }
    }
}

/// Definition of one data field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub number: u16,
    pub name: String,
    pub class: ContentClass,
    pub length: LengthKind,
}

impl FieldDef {
    pub fn new(
        number: u16,
        name: impl Into<String>,
        class: ContentClass,
        length: LengthKind,
    ) -> Result<FieldDef, PackagerError> {
        if !(MIN_FIELD..=MAX_FIELD).contains(&number) {
            return Err(PackagerError::BadFieldNumber(number));
        }
        length.validate(number)?;
        Ok(FieldDef {
            number,
            name: name.into(),
            class,
            length,
        })
    }
}

/// How the bitmap travels on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitmapEncoding {
    /// 16 (or 32) ASCII hex characters.
    #[default]
    HexText,
    /// 8 (or 16) raw bytes.
    Binary,
}

/// Named, ordered set of field definitions plus the bitmap encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packager {
    name: String,
    bitmap: BitmapEncoding,
    defs: BTreeMap<u16, FieldDef>,
}

impl Packager {
    pub fn new(name: impl Into<String>, bitmap: BitmapEncoding) -> Packager {
        Packager {
            name: name.into(),
            bitmap,
            defs: BTreeMap::new(),
        }
    }

    /// Adds a definition, replacing any previous one for the same number.
    pub fn add(&mut self, def: FieldDef) {
        self.defs.insert(def.number, def);
    }

    pub fn with_field(mut self, def: FieldDef) -> Packager {
        self.add(def);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bitmap_encoding(&self) -> BitmapEncoding {
        self.bitmap
    }

    pub fn def(&self, number: u16) -> Option<&FieldDef> {
        self.defs.get(&number)
    }

    pub fn defs(&self) -> impl Iterator<Item = &FieldDef> {
        self.defs.values()
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// The packager shipped by default: all-ASCII text packing with a
    /// hex-text bitmap, covering the fields the bundled simulator and
    /// templates exercise.
    pub fn default_ascii() -> Packager {
        use ContentClass::{AlphaNumeric, Numeric};
        use LengthKind::{Fixed, Lllvar, Llvar};

        let table: &[(u16, &str, ContentClass, LengthKind)] = &[
            (2, "primary account number", Numeric, Llvar(19)),
            (3, "processing code", Numeric, Fixed(6)),
            (4, "amount, transaction", Numeric, Fixed(12)),
            (7, "transmission date and time", Numeric, Fixed(10)),
            (11, "system trace audit number", Numeric, Fixed(6)),
            (12, "time, local transaction", Numeric, Fixed(6)),
            (13, "date, local transaction", Numeric, Fixed(4)),
            (32, "acquiring institution id", Numeric, Llvar(11)),
            (37, "retrieval reference number", AlphaNumeric, Fixed(12)),
            (39, "response code", AlphaNumeric, Fixed(2)),
            (41, "card acceptor terminal id", AlphaNumeric, Fixed(8)),
            (49, "currency code, transaction", Numeric, Fixed(3)),
            (54, "additional amounts", AlphaNumeric, Lllvar(120)),
        ];

        let mut p = Packager::new("ascii-default", BitmapEncoding::HexText);
        for &(number, name, class, length) in table {
            p.add(FieldDef::new(number, name, class, length).expect("builtin table is valid"));
        }
        p
    }
}

//! Loading packager definitions from JSON, so wire layouts can be
//! customized without recompiling. Schema:
//!
//! ```json
//! {
//!   "name": "my-switch",
//!   "bitmap": "hex",
//!   "fields": {
//!     "2":  {"name": "pan",             "class": "n",  "len": {"llvar": 19}},
//!     "3":  {"name": "processing code", "class": "n",  "len": {"fixed": 6}},
//!     "54": {"name": "additional amounts", "class": "an", "len": {"lllvar": 120}}
//!   }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use switchsim_core::{BitmapEncoding, ContentClass, FieldDef, LengthKind, Packager};

#[derive(Debug, thiserror::Error)]
pub enum PackagerFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("packager JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("packager definition: {0}")]
    Invalid(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PackagerDoc {
    name: String,
    bitmap: BitmapDoc,
    fields: BTreeMap<String, FieldDoc>,
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum BitmapDoc {
    Hex,
    Binary,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldDoc {
    name: String,
    class: String,
    len: LenDoc,
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum LenDoc {
    Fixed(u16),
    Llvar(u16),
    Lllvar(u16),
}

pub fn parse_packager(text: &str) -> Result<Packager, PackagerFileError> {
    let doc: PackagerDoc = serde_json::from_str(text)?;
    let bitmap = match doc.bitmap {
        BitmapDoc::Hex => BitmapEncoding::HexText,
        BitmapDoc::Binary => BitmapEncoding::Binary,
    };
    let mut packager = Packager::new(doc.name, bitmap);
    for (key, field) in doc.fields {
        let number: u16 = key
            .parse()
            .map_err(|_| PackagerFileError::Invalid(format!("field key {key:?} is not a number")))?;
        let class = ContentClass::from_token(&field.class).ok_or_else(|| {
            PackagerFileError::Invalid(format!(
                "field {number}: class must be \"n\", \"an\" or \"b\", got {:?}",
                field.class
            ))
        })?;
        let length = match field.len {
            LenDoc::Fixed(n) => LengthKind::Fixed(n.into()),
            LenDoc::Llvar(n) => LengthKind::Llvar(n.into()),
            LenDoc::Lllvar(n) => LengthKind::Lllvar(n.into()),
        };
        let def = FieldDef::new(number, field.name, class, length)
            .map_err(|e| PackagerFileError::Invalid(format!("field {number}: {e}")))?;
        packager.add(def);
    }
    Ok(packager)
}

pub fn load_packager(path: &Path) -> Result<Packager, PackagerFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| PackagerFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_packager(&text)
}

//! Building blocks for ISO8583 switch testing: the message model, a
//! deterministic pack/unpack codec driven by packager field definitions,
//! wire framing for the ASCII/NAC/XML channel styles, and a small regex
//! subset engine that generates matching strings for test data.
//!
//! Everything in this crate is a pure value transformation; sockets, files
//! and clocks live in the `switchsim` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bitmap;
pub mod codec;
pub mod framing;
pub mod msg;
pub mod packager;
pub mod regexgen;
pub mod xmlmsg;

pub use bitmap::{compute_bitmap, Bitmap};
pub use codec::{pack, unpack, CodecError, TruncatedAt};
pub use framing::{frame_ascii, frame_nac, ChannelKind, FrameDecoder, FramingError, DEFAULT_TPDU};
pub use msg::{FieldValue, IsoMsg, MsgError, Mti, MAX_FIELD, MIN_FIELD};
pub use packager::{BitmapEncoding, ContentClass, FieldDef, LengthKind, Packager, PackagerError};
pub use regexgen::{Pattern, PatternError};
pub use xmlmsg::{frame_xml, parse_xml, WireDirection, XmlError};

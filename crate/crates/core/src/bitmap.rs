//! Field-presence bitmap, derived from a message's field set.

use alloc::string::String;
use alloc::vec::Vec;

use crate::msg::IsoMsg;

/// 128 presence flags. Bit 1 signals that the secondary half (bits 65..128)
/// is in use; bits 2..128 mirror field presence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Bitmap {
    bytes: [u8; 16],
}

impl Bitmap {
    /// Sets bit `position` (1..=128).
    pub fn set(&mut self, position: u16) {
        assert!((1..=128).contains(&position), "bitmap position out of range");
        let idx = (position - 1) as usize;
        self.bytes[idx / 8] |= 0x80 >> (idx % 8);
    }

    pub fn is_set(&self, position: u16) -> bool {
        assert!((1..=128).contains(&position), "bitmap position out of range");
        let idx = (position - 1) as usize;
        self.bytes[idx / 8] & (0x80 >> (idx % 8)) != 0
    }

    pub fn has_secondary(&self) -> bool {
        self.is_set(1)
    }

    /// Raw bitmap bytes: 8, or 16 when the secondary half is flagged.
    pub fn to_bytes(&self) -> Vec<u8> {
        if self.has_secondary() {
            self.bytes.to_vec()
        } else {
            self.bytes[..8].to_vec()
        }
    }

    /// Uppercase hex text: 16 chars, or 32 when the secondary half is flagged.
    pub fn to_hex(&self) -> String {
        if self.has_secondary() {
            hex::encode_upper(self.bytes)
        } else {
            hex::encode_upper(&self.bytes[..8])
        }
    }

    /// Rebuilds a bitmap from 8 or 16 raw bytes.
    pub fn from_bytes(raw: &[u8]) -> Option<Bitmap> {
        let mut bytes = [0u8; 16];
        match raw.len() {
            8 => bytes[..8].copy_from_slice(raw),
            16 => bytes.copy_from_slice(raw),
            _ => return None,
        }
        Some(Bitmap { bytes })
    }

    /// Set data-field bits (2..=128) in ascending order.
    pub fn field_numbers(&self) -> impl Iterator<Item = u16> + '_ {
        (2..=128).filter(|n| self.is_set(*n))
    }
}

/// Derives the presence bitmap for a message: bit n set for every stored
/// field n, and bit 1 set exactly when any of bits 65..128 is set.
pub fn compute_bitmap(msg: &IsoMsg) -> Bitmap {
    let mut bm = Bitmap::default();
    let mut secondary = false;
    for n in msg.field_numbers() {
        bm.set(n);
        if n >= 65 {
            secondary = true;
        }
    }
    if secondary {
        bm.set(1);
    }
    bm
}

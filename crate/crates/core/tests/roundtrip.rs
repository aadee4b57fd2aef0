//! Property tests: pack/unpack is the identity on valid messages, the
//! bitmap agrees with a second, independently written computation, and
//! packing is deterministic with fields in ascending wire order.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand_core::{RngCore, SeedableRng};
use switchsim_core::{
    compute_bitmap, pack, unpack, BitmapEncoding, ContentClass, FieldDef, FieldValue, IsoMsg,
    LengthKind, Mti, Packager,
};

fn digits(range: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::char::range('0', '9'), range)
        .prop_map(|v| v.into_iter().collect())
}

fn printable(range: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::char::range(' ', '~'), range)
        .prop_map(|v| v.into_iter().collect())
}

/// A strategy over messages that are valid for `Packager::default_ascii()`.
fn default_packager_message() -> impl Strategy<Value = IsoMsg> {
    let numeric = (
        proptest::option::of(digits(1..=19)),  // 2
        proptest::option::of(digits(6..=6)),   // 3
        proptest::option::of(digits(12..=12)), // 4
        proptest::option::of(digits(10..=10)), // 7
        proptest::option::of(digits(6..=6)),   // 11
        proptest::option::of(digits(6..=6)),   // 12
        proptest::option::of(digits(4..=4)),   // 13
        proptest::option::of(digits(1..=11)),  // 32
    );
    let alpha = (
        proptest::option::of(printable(12..=12)), // 37
        proptest::option::of(printable(2..=2)),   // 39
        proptest::option::of(printable(8..=8)),   // 41
        proptest::option::of(digits(3..=3)),      // 49
        proptest::option::of(printable(1..=120)), // 54
    );
    (digits(4..=4), numeric, alpha).prop_map(|(mti, n, a)| {
        let mut msg = IsoMsg::new(Mti::new(&mti).unwrap());
        let numbered: [(u16, Option<String>); 13] = [
            (2, n.0),
            (3, n.1),
            (4, n.2),
            (7, n.3),
            (11, n.4),
            (12, n.5),
            (13, n.6),
            (32, n.7),
            (37, a.0),
            (39, a.1),
            (41, a.2),
            (49, a.3),
            (54, a.4),
        ];
        for (number, value) in numbered {
            if let Some(value) = value {
                msg.set_text(number, &value).unwrap();
            }
        }
        msg
    })
}

/// A packager exercising the binary bitmap, binary fields, and the
/// secondary range, for shapes the default table does not cover.
fn wide_packager() -> Packager {
    Packager::new("wide", BitmapEncoding::Binary)
        .with_field(FieldDef::new(3, "proc code", ContentClass::Numeric, LengthKind::Fixed(6)).unwrap())
        .with_field(FieldDef::new(48, "private", ContentClass::AlphaNumeric, LengthKind::Lllvar(200)).unwrap())
        .with_field(FieldDef::new(64, "mac", ContentClass::Binary, LengthKind::Fixed(8)).unwrap())
        .with_field(FieldDef::new(100, "receiver", ContentClass::Numeric, LengthKind::Llvar(11)).unwrap())
        .with_field(FieldDef::new(120, "extra", ContentClass::Binary, LengthKind::Llvar(20)).unwrap())
        .with_field(FieldDef::new(128, "trailer mac", ContentClass::Binary, LengthKind::Fixed(4)).unwrap())
}

fn wide_packager_message() -> impl Strategy<Value = IsoMsg> {
    let fields = (
        proptest::option::of(digits(6..=6)),
        proptest::option::of(printable(1..=200)),
        proptest::option::of(proptest::collection::vec(any::<u8>(), 8..=8)),
        proptest::option::of(digits(1..=11)),
        proptest::option::of(proptest::collection::vec(any::<u8>(), 1..=20)),
        proptest::option::of(proptest::collection::vec(any::<u8>(), 4..=4)),
    );
    (digits(4..=4), fields).prop_map(|(mti, f)| {
        let mut msg = IsoMsg::new(Mti::new(&mti).unwrap());
        if let Some(v) = f.0 {
            msg.set_text(3, &v).unwrap();
        }
        if let Some(v) = f.1 {
            msg.set_text(48, &v).unwrap();
        }
        if let Some(v) = f.2 {
            msg.set(64, FieldValue::binary(v)).unwrap();
        }
        if let Some(v) = f.3 {
            msg.set_text(100, &v).unwrap();
        }
        if let Some(v) = f.4 {
            msg.set(120, FieldValue::binary(v)).unwrap();
        }
        if let Some(v) = f.5 {
            msg.set(128, FieldValue::binary(v)).unwrap();
        }
        msg
    })
}

proptest! {
    #[test]
    fn pack_unpack_is_identity(msg in default_packager_message()) {
        let packager = Packager::default_ascii();
        let bytes = pack(&msg, &packager).unwrap();
        let back = unpack(&bytes, &packager).unwrap();
        prop_assert_eq!(back, msg);
    }

    #[test]
    fn pack_is_deterministic(msg in default_packager_message()) {
        let packager = Packager::default_ascii();
        let a = pack(&msg, &packager).unwrap();
        let b = pack(&msg, &packager).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn binary_bitmap_roundtrip(msg in wide_packager_message()) {
        let packager = wide_packager();
        let bytes = pack(&msg, &packager).unwrap();
        let back = unpack(&bytes, &packager).unwrap();
        prop_assert_eq!(back, msg);
    }

    #[test]
    fn wire_order_is_ascending(msg in default_packager_message()) {
        let packager = Packager::default_ascii();
        let bytes = pack(&msg, &packager).unwrap();
        // Re-packing a message built by inserting the same fields in
        // reverse order must give identical bytes: wire order is a
        // property of the field numbers, not insertion order.
        let mut reversed = IsoMsg::new(msg.mti());
        let pairs: Vec<(u16, FieldValue)> =
            msg.fields().map(|(n, v)| (n, v.clone())).collect();
        for (n, v) in pairs.into_iter().rev() {
            reversed.set(n, v).unwrap();
        }
        prop_assert_eq!(pack(&reversed, &packager).unwrap(), bytes);
    }
}

/// Second opinion on the bitmap: a bool-array construction folded into
/// bytes by a different route than the shipped implementation.
fn oracle_bitmap(fields: &BTreeSet<u16>) -> Vec<u8> {
    let mut bits = [false; 128];
    for &f in fields {
        bits[usize::from(f) - 1] = true;
    }
    bits[0] = fields.iter().any(|&f| f > 64);
    let len = if bits[0] { 16 } else { 8 };
    (0..len)
        .map(|byte| {
            (0..8).fold(0u8, |acc, bit| {
                (acc << 1) | u8::from(bits[byte * 8 + bit])
            })
        })
        .collect()
}

#[test]
fn bitmap_matches_independent_oracle_on_random_subsets() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x05EE_DB17);
    for _ in 0..1000 {
        let count = (rng.next_u32() % 12) as usize;
        let fields: BTreeSet<u16> = (0..count)
            .map(|_| 2 + (rng.next_u32() % 127) as u16)
            .collect();
        let mut msg = IsoMsg::new(Mti::new("0200").unwrap());
        for &f in &fields {
            msg.set_text(f, "0").unwrap();
        }
        let bitmap = compute_bitmap(&msg);
        assert_eq!(
            bitmap.to_bytes(),
            oracle_bitmap(&fields),
            "fields {fields:?}"
        );
        assert_eq!(bitmap.has_secondary(), fields.iter().any(|&f| f > 64));
        let listed: BTreeSet<u16> = bitmap.field_numbers().collect();
        assert_eq!(listed, fields);
    }
}

#[test]
fn hex_bitmap_is_uppercase_and_sized() {
    let mut msg = IsoMsg::new(Mti::new("0200").unwrap());
    msg.set_text(2, "4111111111111111").unwrap();
    msg.set_text(127, "1").unwrap();
    let hex = compute_bitmap(&msg).to_hex();
    assert_eq!(hex.len(), 32);
    assert!(hex.bytes().all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(&b)));
}

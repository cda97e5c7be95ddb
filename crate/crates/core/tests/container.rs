use std::path::PathBuf;

use tnn::runtime::container::Container;
use tnn::runtime::{TernaryLayer, TernaryMlp};
use tnn::{Error, FormatError};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// 3-2-2 network whose encoding is pinned in `tests/fixtures/tiny.tnn`.
fn tiny() -> TernaryMlp {
    let hidden = TernaryLayer::from_rows(&[vec![1, 0, -1], vec![-1, 1, 1]], vec![-1, 0], vec![1, 2]).unwrap();
    let output = TernaryLayer::from_rows(&[vec![1, -1], vec![0, 1]], vec![0, 0], vec![0, 0]).unwrap();
    let mut m = TernaryMlp::new(vec![hidden, output]).unwrap();
    m.set_meta("origin", "golden fixture");
    m
}

#[test]
fn golden_encoding_is_stable() {
    let bytes = tiny().to_bytes();
    let path = fixture("tiny.tnn");
    if std::env::var_os("TNN_REGENERATE_FIXTURES").is_some() {
        std::fs::write(&path, &bytes).unwrap();
    }
    let golden = std::fs::read(&path).expect("golden fixture present");
    assert_eq!(bytes, golden);
    let back = TernaryMlp::from_bytes(&golden).unwrap();
    assert_eq!(back.arch(), vec![3, 2, 2]);
    assert_eq!(back.meta()["origin"], "golden fixture");
    assert_eq!(back.to_bytes(), golden);
}

#[test]
fn golden_section_layout() {
    let c = Container::from_bytes(&std::fs::read(fixture("tiny.tnn")).unwrap()).unwrap();
    let tags: Vec<&[u8]> = c.sections.iter().map(|s| &s.tag[..]).collect();
    assert_eq!(tags, [&b"META"[..], b"DIMS", b"PMSK", b"THRS", b"PMSK", b"THRS"]);
    assert_eq!(
        c.require(b"META").unwrap(),
        b"kind=ternary-mlp\norigin=golden fixture\n"
    );
    // Layer count, then (fan_in, fan_out) per layer.
    let dims: Vec<u32> = c
        .require(b"DIMS")
        .unwrap()
        .chunks(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    assert_eq!(dims, [2, 3, 2, 2, 2]);
    // Row 0 of layer 0 is (+1, 0, -1): plus word 0b001, minus word 0b100.
    let pmsk = c.all(b"PMSK").next().unwrap();
    assert_eq!(u64::from_le_bytes(pmsk[..8].try_into().unwrap()), 0b001);
    assert_eq!(u64::from_le_bytes(pmsk[8..16].try_into().unwrap()), 0b100);
}

#[test]
fn corruption_is_detected() {
    let golden = std::fs::read(fixture("tiny.tnn")).unwrap();
    let mut flipped = golden.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(matches!(
        TernaryMlp::from_bytes(&flipped),
        Err(Error::Format(FormatError::Checksum { .. }))
    ));
    let mut magic = golden.clone();
    magic[0] = b'X';
    assert!(matches!(
        TernaryMlp::from_bytes(&magic),
        Err(Error::Format(FormatError::BadMagic { .. }))
    ));
    for cut in [0, 3, 11, 40, golden.len() - 1] {
        assert!(TernaryMlp::from_bytes(&golden[..cut]).is_err(), "cut at {cut}");
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tnn");
    tiny().save(&path).unwrap();
    assert_eq!(TernaryMlp::load(&path).unwrap().to_bytes(), tiny().to_bytes());
    assert!(matches!(
        TernaryMlp::load(dir.path().join("missing.tnn")),
        Err(Error::Io { .. })
    ));
}

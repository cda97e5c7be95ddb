//! The `TNN1` container: a checksummed list of tagged binary sections.
//!
//! All integers are little-endian.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "TNN1"
//! 4       2         format version (1)
//! 6       2         reserved, zero
//! 8       4         section count N
//! 12      20 * N    section table: tag [u8; 4], payload offset u64, payload length u64
//! ...               payloads, in table order, back to back
//! end-4   4         CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Models, teacher checkpoints and datasets all use this container; the
//! `META` section's `kind` key says which.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"TNN1";
pub const VERSION: u16 = 1;
const HEADER: usize = 12;
const ENTRY: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    pub tag: [u8; 4],
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Container {
    pub sections: Vec<Section>,
}

impl Container {
    pub fn new() -> Self {
        Container::default()
    }

    pub fn push(&mut self, tag: &[u8; 4], payload: Vec<u8>) {
        self.sections.push(Section { tag: *tag, payload });
    }

    /// First section with the given tag.
    pub fn get(&self, tag: &[u8; 4]) -> Option<&[u8]> {
        self.sections
            .iter()
            .find(|s| &s.tag == tag)
            .map(|s| s.payload.as_slice())
    }

    pub fn require(&self, tag: &[u8; 4]) -> Result<&[u8], FormatError> {
        self.get(tag)
            .ok_or_else(|| FormatError::Malformed(format!("missing section {}", String::from_utf8_lossy(tag))))
    }

    pub fn all<'a>(&'a self, tag: &'a [u8; 4]) -> impl Iterator<Item = &'a [u8]> + 'a {
        self.sections
            .iter()
            .filter(move |s| &s.tag == tag)
            .map(|s| s.payload.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let table_end = HEADER + ENTRY * self.sections.len();
        let body: usize = self.sections.iter().map(|s| s.payload.len()).sum();
        let mut out = Vec::with_capacity(table_end + body + 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        let mut offset = table_end as u64;
        for s in &self.sections {
            out.extend_from_slice(&s.tag);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(s.payload.len() as u64).to_le_bytes());
            offset += s.payload.len() as u64;
        }
        for s in &self.sections {
            out.extend_from_slice(&s.payload);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < 4 {
            return Err(FormatError::Truncated(format!("{} bytes", bytes.len())));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FormatError::BadMagic { found: magic });
        }
        if bytes.len() < HEADER + 4 {
            return Err(FormatError::Truncated(format!("{} bytes", bytes.len())));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let body_end = bytes.len() - 4;
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let table_end = count
            .checked_mul(ENTRY)
            .and_then(|t| t.checked_add(HEADER))
            .filter(|&t| t <= body_end)
            .ok_or_else(|| FormatError::Truncated(format!("section table of {count} entries")))?;
        let mut spans = Vec::with_capacity(count);
        for i in 0..count {
            let e = &bytes[HEADER + i * ENTRY..HEADER + (i + 1) * ENTRY];
            let tag: [u8; 4] = e[..4].try_into().unwrap();
            let offset = u64::from_le_bytes(e[4..12].try_into().unwrap());
            let len = u64::from_le_bytes(e[12..20].try_into().unwrap());
            let end = offset.checked_add(len).filter(|&end| end <= body_end as u64);
            match end {
                Some(end) if offset >= table_end as u64 => spans.push((tag, offset as usize, end as usize)),
                Some(_) => return Err(FormatError::Malformed(format!("section {i} overlaps the table"))),
                None => {
                    return Err(FormatError::Truncated(format!(
                        "section {} needs bytes {offset}..{}",
                        String::from_utf8_lossy(&tag),
                        offset.saturating_add(len)
                    )))
                }
            }
        }
        let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
        let computed = crc32fast::hash(&bytes[..body_end]);
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed });
        }
        let sections = spans
            .into_iter()
            .map(|(tag, start, end)| Section {
                tag,
                payload: bytes[start..end].to_vec(),
            })
            .collect();
        Ok(Container { sections })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Container::from_bytes(&bytes)?)
    }
}

/// `key=value` lines, sorted by key.
pub fn encode_meta(meta: &BTreeMap<String, String>) -> Vec<u8> {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    out.into_bytes()
}

pub fn decode_meta(bytes: &[u8]) -> Result<BTreeMap<String, String>, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|_| FormatError::Malformed("metadata is not UTF-8".into()))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| FormatError::Malformed(format!("metadata line {l:?}")))
        })
        .collect()
}

#[derive(Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        ByteWriter::default()
    }
    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn i32(&mut self, v: i32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }
    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        ByteReader { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| FormatError::Malformed(format!("{} section too short", self.what)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn i32(&mut self) -> Result<i32, FormatError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        self.take(n)
    }
    pub fn finish(&self) -> Result<(), FormatError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(FormatError::Malformed(format!(
                "{} trailing bytes in {} section",
                self.buf.len() - self.pos,
                self.what
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        let mut c = Container::new();
        let mut meta = BTreeMap::new();
        meta.insert("kind".to_string(), "test".to_string());
        c.push(b"META", encode_meta(&meta));
        c.push(b"DATA", vec![1, 2, 3, 4, 5]);
        c.push(b"NONE", vec![]);
        c
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"TNN1");
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(decode_meta(back.get(b"META").unwrap()).unwrap()["kind"], "test");
    }

    #[test]
    fn layout_is_fixed() {
        let bytes = sample().to_bytes();
        // header + table + payloads + crc
        let meta_len = "kind=test\n".len();
        assert_eq!(bytes.len(), 12 + 3 * 20 + meta_len + 5 + 4);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(&bytes[12..16], b"META");
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 72);
    }

    #[test]
    fn distinct_errors() {
        let bytes = sample().to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Container::from_bytes(&bad), Err(FormatError::BadMagic { .. })));

        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 1] ^= 0xff;
        assert!(matches!(
            Container::from_bytes(&flipped),
            Err(FormatError::Checksum { .. })
        ));

        let mut payload = bytes.clone();
        payload[80] ^= 1;
        assert!(matches!(
            Container::from_bytes(&payload),
            Err(FormatError::Checksum { .. })
        ));

        assert!(matches!(
            Container::from_bytes(&bytes[..bytes.len() - 6]),
            Err(FormatError::Truncated(_))
        ));
        assert!(matches!(
            Container::from_bytes(&bytes[..10]),
            Err(FormatError::Truncated(_))
        ));
    }
}

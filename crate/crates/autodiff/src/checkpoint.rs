//! Checkpoint container: magic "TSBA", LE u32 version, u32 tensor count,
//! then per tensor a u16 name length, the name bytes, u8 ndim, ndim LE u32
//! dims and the LE f32 data. Round-trips are byte-exact.

use std::path::Path;

use crate::error::{AdError, Result};

const MAGIC: &[u8; 4] = b"TSBA";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl CheckpointEntry {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Self {
        let e = CheckpointEntry { name: name.into(), dims, data };
        debug_assert_eq!(e.dims.iter().product::<usize>(), e.data.len());
        e
    }
}

pub fn encode(entries: &[CheckpointEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        let name = e.name.as_bytes();
        assert!(name.len() <= u16::MAX as usize, "tensor name too long");
        assert!(e.dims.len() <= u8::MAX as usize, "too many dims");
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(e.dims.len() as u8);
        for d in &e.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in &e.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<CheckpointEntry>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(AdError::Format { offset: 0, msg: "bad magic, expected TSBA".into() });
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(AdError::Version { found: version, expected: VERSION });
    }
    let count = cur.u32()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name_off = cur.pos;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| AdError::Format {
                offset: name_off as u64,
                msg: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let ndim = cur.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(cur.u32()? as usize);
        }
        let numel: usize = dims.iter().product();
        let raw = cur.take(numel * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        entries.push(CheckpointEntry { name, dims, data });
    }
    if cur.pos != bytes.len() {
        return Err(AdError::Format {
            offset: cur.pos as u64,
            msg: format!("{} trailing bytes", bytes.len() - cur.pos),
        });
    }
    Ok(entries)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(AdError::Format {
                offset: self.pos as u64,
                msg: format!("truncated: needed {n} bytes"),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn write_file<P: AsRef<Path>>(path: P, entries: &[CheckpointEntry]) -> Result<()> {
    Ok(std::fs::write(path, encode(entries))?)
}

pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Vec<CheckpointEntry>> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<CheckpointEntry> {
        vec![
            CheckpointEntry::new("enc.patch.w", vec![2, 3], vec![1.0, -2.5, 0.0, 4.25, 5.0, -0.125]),
            CheckpointEntry::new("head.up.b", vec![4], vec![0.0; 4]),
        ]
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let entries = sample();
        let bytes = encode(&entries);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, entries);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn truncation_names_the_offset() {
        let bytes = encode(&sample());
        let cut = &bytes[..bytes.len() - 5];
        match decode(cut) {
            Err(AdError::Format { offset, .. }) => assert!(offset > 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn version_and_magic_are_checked() {
        let mut bytes = encode(&sample());
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(AdError::Version { found: 2, .. })));
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(AdError::Format { offset: 0, .. })));
    }
}

//! `HSIC` cube and `HSIL` label files.
//!
//! Both start with a 4-byte magic and a little-endian `u16` version, then
//! little-endian `u32` dimensions. Cube payloads are `f32` band-fastest,
//! label payloads `u16`.

use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::preprocess::{HyperCube, LabelField};

pub const CUBE_MAGIC: &[u8; 4] = b"HSIC";
pub const LABEL_MAGIC: &[u8; 4] = b"HSIL";
pub const FORMAT_VERSION: u16 = 1;
pub const CUBE_HEADER_LEN: usize = 18;
pub const LABEL_HEADER_LEN: usize = 14;

/// Cursor over a byte buffer that reports truncation with offsets.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                what: what.to_string(),
                offset: self.pos,
                expected: n,
                actual: self.remaining(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> std::result::Result<(), FormatError> {
        let offset = self.pos;
        let found = self.take(4, "magic")?;
        if found != expected {
            return Err(FormatError::BadMagic {
                offset,
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    pub(crate) fn u16(&mut self, what: &str) -> std::result::Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &str) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn version(&mut self, expected: u16) -> std::result::Result<(), FormatError> {
        let offset = self.pos;
        let found = self.u16("version")?;
        if found != expected {
            return Err(FormatError::BadVersion { offset, expected, found });
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> std::result::Result<(), FormatError> {
        if self.remaining() > 0 {
            return Err(FormatError::TrailingBytes {
                offset: self.pos,
                actual: self.remaining(),
            });
        }
        Ok(())
    }
}

fn dims(r: &mut Reader<'_>, names: &[&str]) -> std::result::Result<Vec<usize>, FormatError> {
    let mut out = Vec::new();
    for name in names {
        let offset = r.offset();
        let v = r.u32(name)? as usize;
        if v == 0 {
            return Err(FormatError::BadHeader {
                offset,
                reason: format!("{name} must be positive"),
            });
        }
        out.push(v);
    }
    Ok(out)
}

fn payload_len(count: Option<usize>, width: usize, offset: usize) -> std::result::Result<usize, FormatError> {
    count.and_then(|c| c.checked_mul(width)).ok_or(FormatError::BadHeader {
        offset,
        reason: "dimensions overflow".into(),
    })
}

pub fn encode_cube(cube: &HyperCube) -> Result<Vec<u8>> {
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::InvalidInput(format!("dimension {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(CUBE_HEADER_LEN + 4 * cube.values().len());
    out.extend_from_slice(CUBE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [cube.height(), cube.width(), cube.bands()] {
        out.extend_from_slice(&dim(v)?.to_le_bytes());
    }
    for &v in cube.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<HyperCube> {
    let mut r = Reader::new(bytes);
    r.magic(CUBE_MAGIC)?;
    r.version(FORMAT_VERSION)?;
    let d = dims(&mut r, &["height", "width", "bands"])?;
    let count = d[0].checked_mul(d[1]).and_then(|n| n.checked_mul(d[2]));
    let len = payload_len(count, 4, r.offset())?;
    let payload = r.take(len, "cube payload")?;
    r.finish()?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    HyperCube::new(d[0], d[1], d[2], values)
}

pub fn encode_labels(field: &LabelField) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(LABEL_HEADER_LEN + 2 * field.labels().len());
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [field.height(), field.width()] {
        let v = u32::try_from(v).map_err(|_| Error::InvalidInput(format!("dimension {v} exceeds u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in field.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelField> {
    let mut r = Reader::new(bytes);
    r.magic(LABEL_MAGIC)?;
    r.version(FORMAT_VERSION)?;
    let d = dims(&mut r, &["height", "width"])?;
    let len = payload_len(d[0].checked_mul(d[1]), 2, r.offset())?;
    let payload = r.take(len, "label payload")?;
    r.finish()?;
    let labels = payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    LabelField::new(d[0], d[1], labels)
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HyperCube> {
    decode_cube(&read_file(path.as_ref())?)
}

pub fn save_cube(cube: &HyperCube, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_cube(cube)?)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelField> {
    decode_labels(&read_file(path.as_ref())?)
}

pub fn save_labels(field: &LabelField, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_labels(field)?)
}

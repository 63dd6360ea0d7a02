//! Little-endian binary helpers shared by the world snapshot and map file
//! formats: primitive writers, a bounds-checked reader, run-length coding and
//! a trailing CRC-32.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("truncated input: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("run-length data covers {found} cells, expected {expected}")]
    RunLength { expected: usize, found: usize },
    #[error("invalid field: {0}")]
    Invalid(String),
}

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    /// Appends the CRC-32 of everything written so far and returns the buffer.
    pub fn finish_with_crc(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Verifies the trailing CRC-32 and returns a reader over the payload.
    pub fn with_crc(data: &'a [u8]) -> Result<Self, CodecError> {
        if data.len() < 4 {
            return Err(CodecError::Truncated { offset: 0, needed: 4 - data.len() });
        }
        let (body, tail) = data.split_at(data.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(CodecError::Checksum { stored, computed });
        }
        Ok(Self { data: body, pos: 0 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos + n;
        if end > self.data.len() {
            return Err(CodecError::Truncated { offset: self.pos, needed: end - self.data.len() });
        }
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), CodecError> {
        let found: [u8; 4] = self.take(4)?.try_into().expect("4 bytes");
        if found != expected {
            return Err(CodecError::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn version(&mut self, expected: u16) -> Result<(), CodecError> {
        let found = self.u16()?;
        if found != expected {
            return Err(CodecError::VersionMismatch { expected, found });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.data.len()
    }
}

/// Writes `values` as `u32 run_count` followed by `(value, u32 length)` runs.
pub fn write_runs<T: PartialEq + Copy>(
    w: &mut Writer,
    values: impl IntoIterator<Item = T>,
    mut put: impl FnMut(&mut Writer, T),
) {
    let mut runs: Vec<(T, u32)> = Vec::new();
    for v in values {
        match runs.last_mut() {
            Some((last, n)) if *last == v && *n < u32::MAX => *n += 1,
            _ => runs.push((v, 1)),
        }
    }
    w.u32(runs.len() as u32);
    for (v, n) in runs {
        put(w, v);
        w.u32(n);
    }
}

/// Inverse of [`write_runs`]; the decoded length must equal `expected`.
pub fn read_runs<T: Copy>(
    r: &mut Reader<'_>,
    expected: usize,
    mut get: impl FnMut(&mut Reader<'_>) -> Result<T, CodecError>,
) -> Result<Vec<T>, CodecError> {
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(expected);
    for _ in 0..count {
        let v = get(r)?;
        let n = r.u32()? as usize;
        if out.len() + n > expected {
            return Err(CodecError::RunLength { expected, found: out.len() + n });
        }
        out.extend(std::iter::repeat_n(v, n));
    }
    if out.len() != expected {
        return Err(CodecError::RunLength { expected, found: out.len() });
    }
    Ok(out)
}

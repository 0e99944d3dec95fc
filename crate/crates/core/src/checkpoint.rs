//! Flat binary parameter serialization.
//!
//! Layout: magic `SFIMOS01`, then per-parameter records of
//! `name_len: u32 LE | name bytes | rank: u32 LE | dims: u64 LE each |
//! values: f64 LE each`, in writer order until end of buffer.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::nn::Tensor;

pub const MAGIC: &[u8; 8] = b"SFIMOS01";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("bad magic: not a checkpoint file")]
    BadMagic,
    #[error("truncated checkpoint")]
    Truncated,
    #[error("parameter name is not valid UTF-8")]
    BadName,
    #[error("unreasonable record size")]
    Oversized,
    #[error("missing parameter {0:?}")]
    MissingParameter(String),
    #[error("parameter {name:?} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        got: Vec<usize>,
        expected: Vec<usize>,
    },
}

pub fn encode(entries: &[(String, &Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for (name, tensor) in entries {
        let bytes = name.as_bytes();
        out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(bytes);
        out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Caps on a single record, to fail fast on corrupt input.
const MAX_NAME: usize = 4096;
const MAX_RANK: usize = 16;
const MAX_ELEMENTS: u64 = 1 << 32;

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut r = Reader {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let mut out = Vec::new();
    while r.pos < r.buf.len() {
        let name_len = r.u32()? as usize;
        if name_len > MAX_NAME {
            return Err(CheckpointError::Oversized);
        }
        let name = core::str::from_utf8(r.take(name_len)?)
            .map_err(|_| CheckpointError::BadName)?
            .into();
        let rank = r.u32()? as usize;
        if rank > MAX_RANK {
            return Err(CheckpointError::Oversized);
        }
        let mut shape = Vec::with_capacity(rank);
        let mut count: u64 = 1;
        for _ in 0..rank {
            let d = r.u64()?;
            count = count.saturating_mul(d.max(1));
            shape.push(d as usize);
        }
        if count > MAX_ELEMENTS {
            return Err(CheckpointError::Oversized);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * 8)?;
        let mut data = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
        }
        out.push((name, Tensor::from_vec(&shape, data)));
    }
    Ok(out)
}

/// Lookup helper over decoded entries.
pub fn find<'a>(
    entries: &'a [(String, Tensor)],
    name: &str,
) -> Result<&'a Tensor, CheckpointError> {
    entries
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| CheckpointError::MissingParameter(name.into()))
}

/// Like [`find`] but also checks the shape.
pub fn find_shaped<'a>(
    entries: &'a [(String, Tensor)],
    name: &str,
    shape: &[usize],
) -> Result<&'a Tensor, CheckpointError> {
    let t = find(entries, name)?;
    if t.shape() != shape {
        return Err(CheckpointError::ShapeMismatch {
            name: name.into(),
            got: t.shape().to_vec(),
            expected: shape.to_vec(),
        });
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn round_trip_preserves_names_shapes_values() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, -2.5, 3.25, 0.0, 1e-300, f64::MAX]);
        let b = Tensor::scalar(42.0);
        let entries = vec![("model/a".to_string(), &a), ("model/b".to_string(), &b)];
        let bytes = encode(&entries);
        let decoded = decode(&bytes).unwrap();
        assert_eq!(decoded.len(), 2);
        assert_eq!(decoded[0].0, "model/a");
        assert_eq!(decoded[0].1, a);
        assert_eq!(decoded[1].1, b);
    }

    #[test]
    fn bad_magic_and_truncation_are_detected() {
        assert_eq!(decode(b"NOTMAGIC").unwrap_err(), CheckpointError::BadMagic);
        let t = Tensor::scalar(1.0);
        let bytes = encode(&[("x".to_string(), &t)]);
        assert_eq!(
            decode(&bytes[..bytes.len() - 1]).unwrap_err(),
            CheckpointError::Truncated
        );
    }

    #[test]
    fn encoding_is_deterministic() {
        let t = Tensor::from_vec(&[4], vec![0.1, 0.2, 0.3, 0.4]);
        let e1 = encode(&[("p".to_string(), &t)]);
        let e2 = encode(&[("p".to_string(), &t)]);
        assert_eq!(e1, e2);
    }
}

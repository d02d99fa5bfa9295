//! Parameter file: `"RNNW"`, version `u8`, tensor count `u32`, then per
//! tensor a `u16` name length, UTF-8 name, `u8` rank, `u32` dims and raw
//! little-endian `f32` values. All integers little-endian.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tensor::ParamTensor;

pub const MAGIC: &[u8; 4] = b"RNNW";
pub const VERSION: u8 = 1;

/// A tensor as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

pub fn write_tensors<S: Scalar>(tensors: &[&ParamTensor<S>]) -> Vec<u8> {
    let payload: usize = tensors
        .iter()
        .map(|t| 4 * t.len() + 8 + t.name.len() + 4 * t.shape.len())
        .sum();
    let mut out = Vec::with_capacity(9 + payload);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.values {
            out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::ParamFormat(format!(
                    "truncated: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_tensors(bytes: &[u8]) -> Result<Vec<StoredTensor>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::ParamFormat("bad magic".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::ParamFormat(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::ParamFormat("tensor name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u8()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::ParamFormat(format!("tensor {name}: shape overflows")))?;
        let raw = r.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::ParamFormat("size overflow".into()))?,
        )?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        tensors.push(StoredTensor {
            name,
            shape,
            values,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::ParamFormat(format!(
            "{} trailing bytes after {count} tensors",
            bytes.len() - r.pos
        )));
    }
    Ok(tensors)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

//! NDA1 binary array files.
//!
//! Layout: magic `NDA1`, one dtype byte (1 = real64, 2 = complex128), one
//! byte holding the number of axes, that many little-endian `u64` extents,
//! then the row-major little-endian payload. Complex elements are stored as
//! interleaved `(re, im)` pairs.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::dense::{element_count, DenseArray, ElemKind, Element};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NDA1";

/// An array read from disk, whichever element kind it holds.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyArray {
    Real(DenseArray<f64>),
    Complex(DenseArray<Complex64>),
}

impl AnyArray {
    pub fn kind(&self) -> ElemKind {
        match self {
            AnyArray::Real(_) => ElemKind::Real64,
            AnyArray::Complex(_) => ElemKind::Complex128,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyArray::Real(a) => a.shape(),
            AnyArray::Complex(a) => a.shape(),
        }
    }

    /// Widens real data to complex; complex data is returned as is.
    pub fn into_complex(self) -> DenseArray<Complex64> {
        match self {
            AnyArray::Complex(a) => a,
            AnyArray::Real(a) => {
                let shape = a.shape().to_vec();
                let data = a.into_vec().into_iter().map(|x| Complex64::new(x, 0.0)).collect();
                DenseArray::from_vec(&shape, data).expect("same element count")
            }
        }
    }
}

pub fn encode<T: Element>(a: &DenseArray<T>) -> Result<Vec<u8>> {
    let ndim = u8::try_from(a.ndim())
        .map_err(|_| Error::Format(format!("{} axes do not fit in one byte", a.ndim())))?;
    let mut out = Vec::with_capacity(6 + 8 * a.ndim() + a.len() * T::KIND.byte_width());
    out.extend_from_slice(MAGIC);
    out.push(T::KIND.code());
    out.push(ndim);
    for &n in a.shape() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for x in a.as_slice() {
        x.write_le(&mut out);
    }
    Ok(out)
}

fn decode_payload<T: Element>(shape: &[usize], payload: &[u8]) -> Result<DenseArray<T>> {
    let width = T::KIND.byte_width();
    let data = payload.chunks_exact(width).map(T::read_le).collect();
    DenseArray::from_vec(shape, data)
}

pub fn decode(bytes: &[u8]) -> Result<AnyArray> {
    if bytes.len() < 6 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing NDA1 magic".into()));
    }
    let kind = ElemKind::from_code(bytes[4])
        .ok_or_else(|| Error::Format(format!("unknown dtype code {}", bytes[4])))?;
    let ndim = bytes[5] as usize;
    let header = 6 + 8 * ndim;
    if bytes.len() < header {
        return Err(Error::Format("truncated header".into()));
    }
    let shape: Vec<usize> = bytes[6..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let payload = &bytes[header..];
    let expected = element_count(&shape)
        .checked_mul(kind.byte_width())
        .ok_or_else(|| Error::Format("extents overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, shape {:?} of {} needs {}",
            payload.len(),
            shape,
            kind,
            expected
        )));
    }
    Ok(match kind {
        ElemKind::Real64 => AnyArray::Real(decode_payload(&shape, payload)?),
        ElemKind::Complex128 => AnyArray::Complex(decode_payload(&shape, payload)?),
    })
}

pub fn write_file<T: Element>(path: impl AsRef<Path>, a: &DenseArray<T>) -> Result<()> {
    fs::write(path, encode(a)?)?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<AnyArray> {
    decode(&fs::read(path)?)
}

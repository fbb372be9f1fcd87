//! `FVT1` tensor container.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "FVT1"
//! 4       1           dtype (0 = f32, 1 = f64)
//! 5       1           ndim
//! 6       2           reserved, zero
//! 8       4 * ndim    dims, u32 little-endian
//! ...     esize * n   payload, row-major, little-endian
//! ```

use std::fs;
use std::path::Path;

use fdmask::Tensor;

use crate::error::{CliError, CliResult};

pub const MAGIC: [u8; 4] = *b"FVT1";
const HEADER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("truncated container: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("bad magic {0:02x?}")]
    Magic([u8; 4]),
    #[error("unknown dtype code {0}")]
    Dtype(u8),
    #[error("reserved bytes must be zero, got {0:02x?}")]
    Reserved([u8; 2]),
    #[error("dimension {axis} is zero")]
    ZeroDim { axis: usize },
    #[error("element count overflows")]
    Overflow,
    #[error("payload is {have} bytes, dims need {need}")]
    PayloadSize { need: usize, have: usize },
    #[error("non-finite value at element {0}")]
    NonFinite(usize),
}

/// A decoded container. Values are held as `f64`; `dtype` records the
/// on-disk width so re-encoding reproduces the input bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub dtype: Dtype,
    pub tensor: Tensor,
}

impl Container {
    pub fn f64(tensor: Tensor) -> Self {
        Container {
            dtype: Dtype::F64,
            tensor,
        }
    }

    pub fn f32(tensor: Tensor) -> Self {
        Container {
            dtype: Dtype::F32,
            tensor,
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<Container, DecodeError> {
    if bytes.len() < HEADER {
        return Err(DecodeError::Truncated {
            need: HEADER,
            have: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(DecodeError::Magic(magic));
    }
    let dtype = Dtype::from_code(bytes[4]).ok_or(DecodeError::Dtype(bytes[4]))?;
    let ndim = bytes[5] as usize;
    let reserved = [bytes[6], bytes[7]];
    if reserved != [0, 0] {
        return Err(DecodeError::Reserved(reserved));
    }
    let payload_at = HEADER + 4 * ndim;
    if bytes.len() < payload_at {
        return Err(DecodeError::Truncated {
            need: payload_at,
            have: bytes.len(),
        });
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut count = 1usize;
    for (axis, chunk) in bytes[HEADER..payload_at].chunks_exact(4).enumerate() {
        let d = u32::from_le_bytes(chunk.try_into().expect("4 bytes")) as usize;
        if d == 0 {
            return Err(DecodeError::ZeroDim { axis });
        }
        count = count.checked_mul(d).ok_or(DecodeError::Overflow)?;
        dims.push(d);
    }
    let need = count.checked_mul(dtype.size()).ok_or(DecodeError::Overflow)?;
    let payload = &bytes[payload_at..];
    if payload.len() != need {
        return Err(DecodeError::PayloadSize {
            need,
            have: payload.len(),
        });
    }
    let data: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(DecodeError::NonFinite(i));
    }
    let tensor = Tensor::new(&dims, data).expect("element count checked above");
    Ok(Container { dtype, tensor })
}

/// Serializes `c`. Fails when the tensor has a zero or oversized
/// dimension, more than 255 axes, or non-finite values.
pub fn encode(c: &Container) -> CliResult<Vec<u8>> {
    let dims = c.tensor.dims();
    if dims.len() > u8::MAX as usize {
        return Err(CliError::Format(format!("rank {} exceeds 255", dims.len())));
    }
    if !c.tensor.is_finite() {
        return Err(CliError::Format("refusing to write non-finite values".into()));
    }
    let mut out = Vec::with_capacity(HEADER + 4 * dims.len() + c.dtype.size() * c.tensor.len());
    out.extend_from_slice(&MAGIC);
    out.push(c.dtype.code());
    out.push(dims.len() as u8);
    out.extend_from_slice(&[0, 0]);
    for (axis, &d) in dims.iter().enumerate() {
        let d = u32::try_from(d)
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| CliError::Format(format!("dimension {axis} = {d} is not encodable")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    match c.dtype {
        Dtype::F32 => {
            for &v in c.tensor.data() {
                let narrow = v as f32;
                if !narrow.is_finite() {
                    return Err(CliError::Format(format!("{v} overflows f32")));
                }
                out.extend_from_slice(&narrow.to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in c.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> CliResult<Container> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, c: &Container) -> CliResult<()> {
    let bytes = encode(c)?;
    fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container::f64(Tensor::new(&[2, 3], vec![0.5, -1.0, 2.0, 3.25, 0.0, 1e-300]).unwrap())
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&Container::f32(Tensor::from_vec(vec![1.0, 2.0]))).unwrap();
        assert_eq!(&bytes[..4], b"FVT1");
        assert_eq!(bytes[4], 0);
        assert_eq!(bytes[5], 1);
        assert_eq!(&bytes[6..8], &[0, 0]);
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 20);
    }

    #[test]
    fn round_trip_both_widths() {
        for c in [sample(), Container::f32(sample().tensor)] {
            let bytes = encode(&c).unwrap();
            let back = decode(&bytes).unwrap();
            assert_eq!(back.dtype, c.dtype);
            assert_eq!(encode(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn scalar_container() {
        let bytes = encode(&Container::f64(Tensor::scalar(4.0))).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode(&bytes).unwrap().tensor.item(), Some(4.0));
    }

    #[test]
    fn rejects_malformed() {
        let good = encode(&sample()).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(DecodeError::Magic(_))));
        let mut bad = good.clone();
        bad[4] = 7;
        assert_eq!(decode(&bad), Err(DecodeError::Dtype(7)));
        let mut bad = good.clone();
        bad[7] = 1;
        assert!(matches!(decode(&bad), Err(DecodeError::Reserved(_))));
        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode(&bad), Err(DecodeError::PayloadSize { .. })));
        assert!(matches!(decode(&good[..5]), Err(DecodeError::Truncated { .. })));
        let mut bad = good.clone();
        bad[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert_eq!(decode(&bad), Err(DecodeError::ZeroDim { axis: 0 }));
        let mut bad = good;
        let at = bad.len() - 8;
        bad[at..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(decode(&bad), Err(DecodeError::NonFinite(5)));
    }

    #[test]
    fn huge_dims_do_not_allocate() {
        let mut bytes = b"FVT1\x01\x04\x00\x00".to_vec();
        for _ in 0..4 {
            bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(decode(&bytes).is_err());
    }
}

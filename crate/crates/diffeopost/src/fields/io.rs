//! On-disk field format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "DFLD"
//! rank    u8       2 or 3
//! ncomp   u8       component count (rank for fields, 1 for scalar volumes)
//! prec    u8       0 = f32, 1 = f64
//! flags   u8       bit 0: zero-on-boundary claim; remaining bits reserved (0)
//! dims    u32 * rank
//! spacing f64 * rank
//! payload ncomp volumes, each dims-product scalars, C-order (axis 0 slowest)
//! ```
//!
//! The encoding is deterministic: identical data yields identical bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{DisplacementField, GridShape, LabelVolume, ScalarVolume};
use crate::scalar::Scalar;

pub const HEADER_MAGIC: [u8; 4] = *b"DFLD";

const FLAG_ZERO_BOUNDARY: u8 = 0b0000_0001;

/// A displacement field read back at whatever precision the file declares.
#[derive(Clone, Debug)]
pub enum AnyField {
    F32(DisplacementField<f32>),
    F64(DisplacementField<f64>),
}

impl AnyField {
    pub fn rank(&self) -> usize {
        match self {
            AnyField::F32(f) => f.rank(),
            AnyField::F64(f) => f.rank(),
        }
    }

    pub fn shape(&self) -> &GridShape {
        match self {
            AnyField::F32(f) => f.shape(),
            AnyField::F64(f) => f.shape(),
        }
    }

    /// Widens to f64 (lossless).
    pub fn into_f64(self) -> DisplacementField<f64> {
        match self {
            AnyField::F32(f) => f.convert(),
            AnyField::F64(f) => f,
        }
    }
}

/// A scalar volume read back at whatever precision the file declares.
#[derive(Clone, Debug)]
pub enum AnyVolume {
    F32(ScalarVolume<f32>),
    F64(ScalarVolume<f64>),
}

impl AnyVolume {
    pub fn into_f64(self) -> ScalarVolume<f64> {
        match self {
            AnyVolume::F32(v) => v.convert(),
            AnyVolume::F64(v) => v,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

fn encode<T: Scalar>(shape: &GridShape, comps: &[Vec<T>], flags: u8) -> Vec<u8> {
    let rank = shape.rank();
    let mut out = Vec::with_capacity(4 + 4 + 4 * rank + 8 * rank + comps.len() * shape.len() * T::BYTE_WIDTH);
    out.extend_from_slice(&HEADER_MAGIC);
    out.push(rank as u8);
    out.push(comps.len() as u8);
    out.push(T::PRECISION_CODE);
    out.push(flags);
    for &d in shape.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &s in shape.spacing() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for comp in comps {
        for &v in comp {
            v.write_le(&mut out);
        }
    }
    out
}

struct Header {
    rank: usize,
    ncomp: usize,
    precision: u8,
    flags: u8,
    shape: GridShape,
    payload_offset: usize,
}

fn decode_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let need = |n: usize| -> Result<()> {
        if bytes.len() < n {
            Err(Error::TruncatedPayload {
                expected: n,
                found: bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    let _ = path;
    need(8)?;
    if bytes[..4] != HEADER_MAGIC {
        return Err(Error::BadMagic {
            found: bytes[..4].try_into().unwrap(),
        });
    }
    let rank = bytes[4] as usize;
    let ncomp = bytes[5] as usize;
    let precision = bytes[6];
    let flags = bytes[7];
    if precision > 1 {
        return Err(Error::UnsupportedPrecision { code: precision });
    }
    if rank < 2 || rank > 3 {
        return Err(Error::shape_mismatch(format!("header rank {rank}")));
    }
    let dims_off = 8;
    let spacing_off = dims_off + 4 * rank;
    need(spacing_off + 8 * rank)?;
    let mut dims = Vec::with_capacity(rank);
    for a in 0..rank {
        let b = &bytes[dims_off + 4 * a..dims_off + 4 * a + 4];
        dims.push(u32::from_le_bytes(b.try_into().unwrap()) as usize);
    }
    let mut spacing = Vec::with_capacity(rank);
    for a in 0..rank {
        let b = &bytes[spacing_off + 8 * a..spacing_off + 8 * a + 8];
        spacing.push(f64::from_le_bytes(b.try_into().unwrap()));
    }
    let shape = GridShape::with_spacing(&dims, &spacing)?;
    Ok(Header {
        rank,
        ncomp,
        precision,
        flags,
        shape,
        payload_offset: spacing_off + 8 * rank,
    })
}

fn decode_payload<T: Scalar>(bytes: &[u8], header: &Header) -> Result<Vec<Vec<T>>> {
    let n = header.shape.len();
    let expected = header.ncomp * n * T::BYTE_WIDTH;
    let found = bytes.len() - header.payload_offset;
    if found != expected {
        return Err(Error::TruncatedPayload { expected, found });
    }
    let mut comps = Vec::with_capacity(header.ncomp);
    let mut off = header.payload_offset;
    for _ in 0..header.ncomp {
        let mut comp = Vec::with_capacity(n);
        for _ in 0..n {
            comp.push(T::read_le(&bytes[off..off + T::BYTE_WIDTH]));
            off += T::BYTE_WIDTH;
        }
        comps.push(comp);
    }
    Ok(comps)
}

/// Writes a displacement field to `path`.
pub fn write_field<T: Scalar>(field: &DisplacementField<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let flags = if field.boundary_flag() {
        FLAG_ZERO_BOUNDARY
    } else {
        0
    };
    let bytes = encode(field.shape(), field.components(), flags);
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Reads a displacement field, dispatching on the precision stored in the header.
pub fn read_field(path: impl AsRef<Path>) -> Result<AnyField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let header = decode_header(&bytes, path)?;
    if header.ncomp != header.rank {
        return Err(Error::shape_mismatch(format!(
            "displacement field needs {} components, file has {}",
            header.rank, header.ncomp
        )));
    }
    let boundary_flag = header.flags & FLAG_ZERO_BOUNDARY != 0;
    match header.precision {
        0 => Ok(AnyField::F32(DisplacementField::new(
            header.shape.clone(),
            decode_payload::<f32>(&bytes, &header)?,
            boundary_flag,
        )?)),
        1 => Ok(AnyField::F64(DisplacementField::new(
            header.shape.clone(),
            decode_payload::<f64>(&bytes, &header)?,
            boundary_flag,
        )?)),
        code => Err(Error::UnsupportedPrecision { code }),
    }
}

/// Writes a scalar volume as a one-component field file.
pub fn write_volume<T: Scalar>(vol: &ScalarVolume<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(vol.shape(), std::slice::from_ref(&vol.values().to_vec()), 0);
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Reads a one-component volume file.
pub fn read_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let header = decode_header(&bytes, path)?;
    if header.ncomp != 1 {
        return Err(Error::shape_mismatch(format!(
            "scalar volume needs 1 component, file has {}",
            header.ncomp
        )));
    }
    match header.precision {
        0 => Ok(AnyVolume::F32(ScalarVolume::new(
            header.shape.clone(),
            decode_payload::<f32>(&bytes, &header)?.pop().unwrap(),
        )?)),
        1 => Ok(AnyVolume::F64(ScalarVolume::new(
            header.shape.clone(),
            decode_payload::<f64>(&bytes, &header)?.pop().unwrap(),
        )?)),
        code => Err(Error::UnsupportedPrecision { code }),
    }
}

/// Writes a label volume as a one-component f64 file (labels are exact in f64).
pub fn write_labels(labels: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let values: Vec<f64> = labels.labels().iter().map(|&l| l as f64).collect();
    let vol = ScalarVolume::new(labels.shape().clone(), values).expect("label volume shape");
    write_volume(&vol, path)
}

/// Reads a label volume; structure ids are the distinct nonzero labels present.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let vol = read_volume(&path)?.into_f64();
    let mut labels = Vec::with_capacity(vol.values().len());
    for &v in vol.values() {
        if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
            return Err(Error::shape_mismatch(format!(
                "label file contains non-integer value {v}"
            )));
        }
        labels.push(v as u32);
    }
    LabelVolume::from_labels(vol.shape().clone(), labels)
}

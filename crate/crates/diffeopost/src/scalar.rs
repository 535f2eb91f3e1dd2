use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Floating-point scalar the field containers and operators are generic over.
///
/// Implemented for `f32` and `f64`. The bound set covers everything the
/// numerical kernels need: IEEE float semantics, math constants, in-place
/// arithmetic, lossless conversion with `f64`, and FFT support.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Default
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Precision code stored in the field file header.
    const PRECISION_CODE: u8;
    /// Bytes per value in the field file payload.
    const BYTE_WIDTH: usize;

    /// Default relative truncation tolerance for the matrix-exponential series.
    fn default_matexp_tol() -> f64;

    fn from_f64c(v: f64) -> Self;
    fn to_f64c(self) -> f64;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const PRECISION_CODE: u8 = 0;
    const BYTE_WIDTH: usize = 4;

    fn default_matexp_tol() -> f64 {
        1e-7
    }

    #[inline]
    fn from_f64c(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64c(self) -> f64 {
        self as f64
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().unwrap())
    }
}

impl Scalar for f64 {
    const PRECISION_CODE: u8 = 1;
    const BYTE_WIDTH: usize = 8;

    fn default_matexp_tol() -> f64 {
        1e-14
    }

    #[inline]
    fn from_f64c(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64c(self) -> f64 {
        self
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
}

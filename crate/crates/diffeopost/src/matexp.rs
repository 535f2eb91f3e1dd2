//! Matrix exponential for the small per-voxel matrices, with a
//! Frechet-derivative adjoint for reverse-mode gradients.
//!
//! The exponential is a truncated Taylor series with a dropped-tail bound,
//! preceded by scaling-and-squaring whenever the 1-norm exceeds one. All
//! arithmetic runs in f64 regardless of the field precision: determinant
//! positivity margins near-singular voxels are too small for f32.
//!
//! The adjoint uses the block identity
//!
//! ```text
//! exp([[A, E], [0, A]]) = [[exp(A), L(A, E)], [0, exp(A)]]
//! ```
//!
//! where `L(A, E)` is the Frechet derivative of `exp` at `A` in direction
//! `E`, together with `L(A, .)^T = L(A^T, .)` under the Frobenius pairing.

use crate::error::{Error, Result};
use crate::fields::JacobianField;
use crate::mat::SmallMat;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatExpMethod {
    /// Plain truncated series. Adequate for small-norm inputs only.
    TaylorSeries,
    /// Truncated series on the scaled matrix, then repeated squaring.
    #[default]
    ScalingSquaringTaylor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatExpConfig {
    pub method: MatExpMethod,
    /// Hard cap on series terms. 18 terms cover the scaled regime (norm <= 1)
    /// to well below f64 rounding.
    pub max_terms: usize,
    /// Relative truncation tolerance for the dropped tail.
    pub tol: f64,
}

impl Default for MatExpConfig {
    fn default() -> Self {
        MatExpConfig {
            method: MatExpMethod::ScalingSquaringTaylor,
            max_terms: 18,
            tol: 1e-14,
        }
    }
}

impl MatExpConfig {
    /// Default configuration with the truncation tolerance matched to the
    /// field precision the surrounding pipeline runs at.
    pub fn for_precision<T: Scalar>() -> Self {
        MatExpConfig {
            tol: T::default_matexp_tol(),
            ..Default::default()
        }
    }

    fn validate(&self) {
        assert!(self.max_terms >= 2, "max_terms must be >= 2");
        assert!(
            self.tol > 0.0 && self.tol < 1e-3,
            "tol must lie in (0, 1e-3)"
        );
    }
}

/// Number of squarings for a given 1-norm: smallest s with norm/2^s <= 1.
fn squarings_for(norm1: f64) -> u32 {
    if norm1 <= 1.0 {
        0
    } else {
        norm1.log2().ceil() as u32
    }
}

fn expm_f64(a: &SmallMat<f64>, cfg: &MatExpConfig) -> SmallMat<f64> {
    cfg.validate();
    let n = a.dim();
    let s = match cfg.method {
        MatExpMethod::TaylorSeries => 0,
        MatExpMethod::ScalingSquaringTaylor => squarings_for(a.one_norm()),
    };
    let b = a.scale(0.5f64.powi(s as i32));
    let beta = b.one_norm();

    let mut sum = SmallMat::identity(n);
    let mut term = SmallMat::identity(n);
    for k in 1..=cfg.max_terms {
        term = term.matmul(&b).scale(1.0 / k as f64);
        sum.add_scaled(&term, 1.0);
        // Tail after term k is bounded by ||term|| * r / (1 - r) with
        // r = beta / (k + 2), once beta < k + 2.
        let r = beta / (k as f64 + 2.0);
        if r < 1.0 {
            let tail = term.one_norm() * r / (1.0 - r);
            if tail <= cfg.tol * sum.one_norm() {
                break;
            }
        }
    }
    let mut e = sum;
    for _ in 0..s {
        e = e.matmul(&e);
    }
    e
}

/// Exponential of a single small matrix.
pub fn expm<T: Scalar>(a: &SmallMat<T>, cfg: &MatExpConfig) -> Result<SmallMat<T>> {
    if !a.is_finite() {
        return Err(Error::non_finite("matrix passed to expm".to_string()));
    }
    Ok(expm_f64(&a.convert(), cfg).convert())
}

/// Voxel-wise exponential of a Jacobian field. Every output matrix has a
/// strictly positive determinant (det(exp A) = exp(tr A)); this is checked in
/// debug builds.
pub fn expm_field<T: Scalar>(j: &JacobianField<T>, cfg: &MatExpConfig) -> Result<JacobianField<T>> {
    if let Some(idx) = j.first_non_finite() {
        return Err(Error::non_finite(format!(
            "Jacobian field at voxel {:?}",
            j.shape().coords(idx)
        )));
    }
    let shape = j.shape().clone();
    let mut out = JacobianField::zeros(shape);
    for idx in 0..j.shape().len() {
        let e = expm_f64(&j.mat(idx).convert(), cfg);
        debug_assert!(
            e.det() > 0.0,
            "exponential lost determinant positivity at voxel {idx}"
        );
        out.set_mat(idx, &e.convert());
    }
    Ok(out)
}

/// Frechet derivative of `exp` at `a` in direction `e`, via the 2n x 2n
/// block augmentation.
pub fn expm_frechet<T: Scalar>(
    a: &SmallMat<T>,
    e: &SmallMat<T>,
    cfg: &MatExpConfig,
) -> Result<SmallMat<T>> {
    if !a.is_finite() || !e.is_finite() {
        return Err(Error::non_finite("matrix passed to expm_frechet".to_string()));
    }
    let n = a.dim();
    let a64: SmallMat<f64> = a.convert();
    let e64: SmallMat<f64> = e.convert();
    let mut block = SmallMat::zeros(2 * n);
    for r in 0..n {
        for c in 0..n {
            block.set(r, c, a64.get(r, c));
            block.set(r, n + c, e64.get(r, c));
            block.set(n + r, n + c, a64.get(r, c));
        }
    }
    let eb = expm_f64(&block, cfg);
    Ok(SmallMat::from_fn(n, |r, c| T::from_f64c(eb.get(r, n + c))))
}

/// Vector-Jacobian product of `expm`: the cotangent of `a` given the
/// cotangent `upstream` of `exp(a)`. Uses the transpose identity
/// `L(A, .)^T = L(A^T, .)`.
pub fn expm_vjp<T: Scalar>(
    a: &SmallMat<T>,
    upstream: &SmallMat<T>,
    cfg: &MatExpConfig,
) -> Result<SmallMat<T>> {
    expm_frechet(&a.transpose(), upstream, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridShape;

    #[test]
    fn expm_zero_is_identity() {
        let z = SmallMat::<f64>::zeros(3);
        let e = expm(&z, &MatExpConfig::default()).unwrap();
        assert_eq!(e, SmallMat::identity(3));
    }

    #[test]
    fn expm_diagonal_is_scalar_exponentials() {
        let mut a = SmallMat::<f64>::zeros(3);
        a.set(0, 0, 1.0);
        a.set(1, 1, -1.0);
        let e = expm(&a, &MatExpConfig::default()).unwrap();
        assert!((e.get(0, 0) - 1.0f64.exp()).abs() < 1e-14);
        assert!((e.get(1, 1) - (-1.0f64).exp()).abs() < 1e-14);
        assert!((e.get(2, 2) - 1.0).abs() < 1e-14);
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    assert_eq!(e.get(r, c), 0.0);
                }
            }
        }
    }

    #[test]
    fn rotation_generator_exponentiates_to_rotation() {
        let theta: f64 = 0.7;
        let a = SmallMat::from_rows(&[&[0.0, -theta], &[theta, 0.0]]);
        let e = expm(&a, &MatExpConfig::default()).unwrap();
        assert!((e.get(0, 0) - theta.cos()).abs() < 1e-14);
        assert!((e.get(0, 1) + theta.sin()).abs() < 1e-14);
        assert!((e.get(1, 0) - theta.sin()).abs() < 1e-14);
        assert!((e.get(1, 1) - theta.cos()).abs() < 1e-14);
        assert!((e.det() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn non_finite_input_is_reported() {
        let mut a = SmallMat::<f64>::zeros(2);
        a.set(0, 1, f64::NAN);
        assert!(matches!(
            expm(&a, &MatExpConfig::default()),
            Err(Error::NonFiniteInput { .. })
        ));

        let shape = GridShape::new(&[3, 3]).unwrap();
        let mut j = JacobianField::<f64>::zeros(shape);
        j.set_entry(4, 0, 0, f64::INFINITY);
        let err = expm_field(&j, &MatExpConfig::default()).unwrap_err();
        match err {
            Error::NonFiniteInput { detail } => assert!(detail.contains("[1, 1]"), "{detail}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_jacobian_field_maps_to_identities() {
        let shape = GridShape::new(&[3, 3, 3]).unwrap();
        let j = JacobianField::<f64>::zeros(shape);
        let e = expm_field(&j, &MatExpConfig::default()).unwrap();
        for idx in 0..e.shape().len() {
            assert_eq!(e.mat(idx), SmallMat::identity(3));
        }
    }

    #[test]
    fn vjp_at_zero_is_upstream() {
        // the derivative of exp at 0 is the identity map, so the adjoint
        // returns the upstream cotangent unchanged.
        let z = SmallMat::<f64>::zeros(3);
        let w = SmallMat::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]);
        let g = expm_vjp(&z, &w, &MatExpConfig::default()).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((g.get(r, c) - w.get(r, c)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn vjp_diagonal_matches_divided_differences() {
        // for diagonal A the Frechet derivative acts entrywise through the
        // divided difference (e^{a_i} - e^{a_j}) / (a_i - a_j).
        let diag = [0.3f64, -1.1, 0.9];
        let mut a = SmallMat::<f64>::zeros(3);
        for (i, &v) in diag.iter().enumerate() {
            a.set(i, i, v);
        }
        let w = SmallMat::from_rows(&[&[0.5, -1.0, 2.0], &[1.5, 0.25, -0.75], &[2.0, 1.0, -0.5]]);
        let g = expm_vjp(&a, &w, &MatExpConfig::default()).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let (ai, aj) = (diag[r], diag[c]);
                let dd = if (ai - aj).abs() < 1e-12 {
                    ai.exp()
                } else {
                    (ai.exp() - aj.exp()) / (ai - aj)
                };
                assert!(
                    (g.get(r, c) - w.get(r, c) * dd).abs() < 1e-12,
                    "entry ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn squarings_track_the_norm() {
        assert_eq!(squarings_for(0.5), 0);
        assert_eq!(squarings_for(1.0), 0);
        assert_eq!(squarings_for(1.5), 1);
        assert_eq!(squarings_for(7.9), 3);
    }
}

//! Grid-field containers shared by every other module: regular grid shapes,
//! dense displacement fields, scalar volumes, per-voxel Jacobian matrix
//! fields, integer label volumes, plus data-level validation.
//!
//! All containers are immutable after construction and freely shareable
//! across threads. Indexing is C-order: axis 0 slowest, last axis fastest.

mod io;

pub use io::{
    read_field, read_labels, read_volume, write_field, write_labels, write_volume, AnyField,
    AnyVolume, HEADER_MAGIC,
};

use crate::error::{Error, Result};
use crate::mat::SmallMat;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Extents and per-axis spacing of a regular grid, rank 2 or 3.
///
/// Spacing is metadata carried for provenance; the discrete operators work in
/// index space (unit steps).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    dims: Vec<usize>,
    spacing: Vec<f64>,
}

impl GridShape {
    /// Grid with unit spacing. Every extent must be at least 3 so finite
    /// differences have interior points.
    pub fn new(dims: &[usize]) -> Result<Self> {
        Self::with_spacing(dims, &vec![1.0; dims.len()])
    }

    pub fn with_spacing(dims: &[usize], spacing: &[f64]) -> Result<Self> {
        if dims.len() < 2 || dims.len() > 3 {
            return Err(Error::shape_mismatch(format!(
                "rank must be 2 or 3, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d < 3) {
            return Err(Error::ShapeTooSmall {
                dims: dims.to_vec(),
            });
        }
        if spacing.len() != dims.len() {
            return Err(Error::shape_mismatch(format!(
                "spacing has {} entries for rank {}",
                spacing.len(),
                dims.len()
            )));
        }
        for (axis, &s) in spacing.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidSpacing { axis, spacing: s });
            }
        }
        Ok(GridShape {
            dims: dims.to_vec(),
            spacing: spacing.to_vec(),
        })
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Total voxel count.
    #[inline]
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of a coordinate tuple.
    #[inline]
    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.rank());
        let mut idx = 0;
        for (c, n) in coords.iter().zip(&self.dims) {
            debug_assert!(c < n);
            idx = idx * n + c;
        }
        idx
    }

    /// Coordinate tuple of a flat index.
    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.rank()];
        for axis in (0..self.rank()).rev() {
            out[axis] = idx % self.dims[axis];
            idx /= self.dims[axis];
        }
        out
    }

    /// Whether the flat index lies on the outermost ring of the grid.
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.coords(idx)
            .iter()
            .zip(&self.dims)
            .any(|(&c, &n)| c == 0 || c == n - 1)
    }

    /// Extents with the outermost ring stripped on every axis.
    pub(crate) fn interior_dims(&self) -> Vec<usize> {
        self.dims.iter().map(|&n| n - 2).collect()
    }
}

/// One data-level invariant violation found by [`DisplacementField::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonFinite { component: usize, coords: Vec<usize> },
    BoundaryNotZero { component: usize, coords: Vec<usize> },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonFinite { component, coords } => {
                write!(f, "non-finite value in component {component} at {coords:?}")
            }
            Violation::BoundaryNotZero { component, coords } => write!(
                f,
                "zero-on-boundary flag set but component {component} is nonzero at {coords:?}"
            ),
        }
    }
}

/// Dense displacement field: one scalar volume per grid axis.
///
/// `boundary_flag` is a claim that every boundary voxel is exactly zero in
/// all components; it is checked by `validate`, not by construction, so that
/// inconsistent data can be loaded and diagnosed.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField<T> {
    shape: GridShape,
    components: Vec<Vec<T>>,
    boundary_flag: bool,
}

impl<T: Scalar> DisplacementField<T> {
    pub fn new(shape: GridShape, components: Vec<Vec<T>>, boundary_flag: bool) -> Result<Self> {
        if components.len() != shape.rank() {
            return Err(Error::shape_mismatch(format!(
                "{} components for a rank-{} grid",
                components.len(),
                shape.rank()
            )));
        }
        for (i, comp) in components.iter().enumerate() {
            if comp.len() != shape.len() {
                return Err(Error::shape_mismatch(format!(
                    "component {i} has {} values, grid has {} voxels",
                    comp.len(),
                    shape.len()
                )));
            }
        }
        Ok(DisplacementField {
            shape,
            components,
            boundary_flag,
        })
    }

    pub fn zeros(shape: GridShape) -> Self {
        let n = shape.len();
        let d = shape.rank();
        DisplacementField {
            shape,
            components: vec![vec![T::zero(); n]; d],
            boundary_flag: true,
        }
    }

    /// Build from a closure `(coords, component) -> value`.
    pub fn from_fn(
        shape: GridShape,
        boundary_flag: bool,
        mut f: impl FnMut(&[usize], usize) -> T,
    ) -> Self {
        let d = shape.rank();
        let n = shape.len();
        let mut components = vec![vec![T::zero(); n]; d];
        for idx in 0..n {
            let coords = shape.coords(idx);
            for (c, comp) in components.iter_mut().enumerate() {
                comp[idx] = f(&coords, c);
            }
        }
        DisplacementField {
            shape,
            components,
            boundary_flag,
        }
    }

    #[inline]
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[T] {
        &self.components[c]
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<T>> {
        self.components
    }

    #[inline]
    pub fn boundary_flag(&self) -> bool {
        self.boundary_flag
    }

    /// Displacement vector at a flat voxel index.
    pub fn vector_at(&self, idx: usize) -> Vec<T> {
        self.components.iter().map(|c| c[idx]).collect()
    }

    /// Checks data-level invariants; an empty list means the field is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (c, comp) in self.components.iter().enumerate() {
            for (idx, &v) in comp.iter().enumerate() {
                if !v.is_finite() {
                    out.push(Violation::NonFinite {
                        component: c,
                        coords: self.shape.coords(idx),
                    });
                } else if self.boundary_flag && v != T::zero() && self.shape.is_boundary(idx) {
                    out.push(Violation::BoundaryNotZero {
                        component: c,
                        coords: self.shape.coords(idx),
                    });
                }
            }
        }
        out
    }

    pub fn convert<U: Scalar>(&self) -> DisplacementField<U> {
        DisplacementField {
            shape: self.shape.clone(),
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|&v| U::from_f64c(v.to_f64c())).collect())
                .collect(),
            boundary_flag: self.boundary_flag,
        }
    }

    pub fn max_abs(&self) -> T {
        let mut best = T::zero();
        for comp in &self.components {
            for &v in comp {
                if v.abs() > best {
                    best = v.abs();
                }
            }
        }
        best
    }
}

/// Single-channel volume of real values on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarVolume<T> {
    shape: GridShape,
    values: Vec<T>,
}

impl<T: Scalar> ScalarVolume<T> {
    pub fn new(shape: GridShape, values: Vec<T>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::shape_mismatch(format!(
                "{} values for a grid of {} voxels",
                values.len(),
                shape.len()
            )));
        }
        Ok(ScalarVolume { shape, values })
    }

    pub fn zeros(shape: GridShape) -> Self {
        let n = shape.len();
        ScalarVolume {
            shape,
            values: vec![T::zero(); n],
        }
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let n = shape.len();
        let mut values = vec![T::zero(); n];
        for (idx, v) in values.iter_mut().enumerate() {
            *v = f(&shape.coords(idx));
        }
        ScalarVolume { shape, values }
    }

    #[inline]
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn convert<U: Scalar>(&self) -> ScalarVolume<U> {
        ScalarVolume {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| U::from_f64c(v.to_f64c())).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }
}

/// Integer-labelled segmentation volume. Every voxel carries either 0
/// (background) or one of the declared structure ids.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    shape: GridShape,
    labels: Vec<u32>,
    ids: Vec<u32>,
}

impl LabelVolume {
    pub fn new(shape: GridShape, labels: Vec<u32>, mut ids: Vec<u32>) -> Result<Self> {
        if labels.len() != shape.len() {
            return Err(Error::shape_mismatch(format!(
                "{} labels for a grid of {} voxels",
                labels.len(),
                shape.len()
            )));
        }
        ids.sort_unstable();
        ids.dedup();
        ids.retain(|&id| id != 0);
        for &l in &labels {
            if l != 0 && ids.binary_search(&l).is_err() {
                return Err(Error::UnknownStructure { id: l });
            }
        }
        Ok(LabelVolume { shape, labels, ids })
    }

    /// Builds the id list from the distinct nonzero labels present.
    pub fn from_labels(shape: GridShape, labels: Vec<u32>) -> Result<Self> {
        let mut ids: Vec<u32> = labels.iter().copied().filter(|&l| l != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        LabelVolume::new(shape, labels, ids)
    }

    #[inline]
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    #[inline]
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn has_id(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }
}

/// Per-voxel square matrix field, dimension equal to the grid rank.
///
/// Storage is voxel-major (matrix entries of one voxel are contiguous,
/// row-major). Finiteness is a data-level property checked by consumers that
/// require it, not by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianField<T> {
    shape: GridShape,
    data: Vec<T>,
}

impl<T: Scalar> JacobianField<T> {
    pub fn zeros(shape: GridShape) -> Self {
        let n = shape.len();
        let d = shape.rank();
        JacobianField {
            shape,
            data: vec![T::zero(); n * d * d],
        }
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut(usize) -> SmallMat<T>) -> Self {
        let mut out = Self::zeros(shape);
        let d = out.rank();
        for idx in 0..out.shape.len() {
            let m = f(idx);
            debug_assert_eq!(m.dim(), d);
            out.set_mat(idx, &m);
        }
        out
    }

    #[inline]
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    /// Matrix at a flat voxel index.
    #[inline]
    pub fn mat(&self, idx: usize) -> SmallMat<T> {
        let d = self.rank();
        let base = idx * d * d;
        SmallMat::from_fn(d, |r, c| self.data[base + r * d + c])
    }

    #[inline]
    pub fn set_mat(&mut self, idx: usize, m: &SmallMat<T>) {
        let d = self.rank();
        let base = idx * d * d;
        for r in 0..d {
            for c in 0..d {
                self.data[base + r * d + c] = m.get(r, c);
            }
        }
    }

    #[inline]
    pub fn entry(&self, idx: usize, r: usize, c: usize) -> T {
        let d = self.rank();
        self.data[idx * d * d + r * d + c]
    }

    #[inline]
    pub fn set_entry(&mut self, idx: usize, r: usize, c: usize, v: T) {
        let d = self.rank();
        self.data[idx * d * d + r * d + c] = v;
    }

    /// Copies the (r, c) entry of every voxel into a contiguous volume.
    pub fn entry_volume(&self, r: usize, c: usize) -> Vec<T> {
        let d = self.rank();
        let n = self.shape.len();
        let mut out = vec![T::zero(); n];
        for (idx, v) in out.iter_mut().enumerate() {
            *v = self.data[idx * d * d + r * d + c];
        }
        out
    }

    /// Flat index of the first voxel holding a non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        let dd = self.rank() * self.rank();
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|pos| pos / dd)
    }

    pub fn scale(&self, s: T) -> Self {
        JacobianField {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        JacobianField {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape_rejects_small_extents() {
        assert!(matches!(
            GridShape::new(&[2, 4]),
            Err(Error::ShapeTooSmall { .. })
        ));
        assert!(GridShape::new(&[3, 3, 3]).is_ok());
    }

    #[test]
    fn grid_shape_rejects_bad_rank_and_spacing() {
        assert!(GridShape::new(&[4]).is_err());
        assert!(GridShape::new(&[4, 4, 4, 4]).is_err());
        assert!(matches!(
            GridShape::with_spacing(&[4, 4], &[1.0, 0.0]),
            Err(Error::InvalidSpacing { axis: 1, .. })
        ));
    }

    #[test]
    fn index_coords_round_trip() {
        let s = GridShape::new(&[3, 4, 5]).unwrap();
        for idx in 0..s.len() {
            assert_eq!(s.index(&s.coords(idx)), idx);
        }
    }

    #[test]
    fn validate_zero_field_is_clean() {
        let f = DisplacementField::<f64>::zeros(GridShape::new(&[4, 4, 4]).unwrap());
        assert!(f.validate().is_empty());
    }

    #[test]
    fn validate_names_nan_voxel() {
        let shape = GridShape::new(&[4, 4, 4]).unwrap();
        let mut comps = vec![vec![0.0f64; shape.len()]; 3];
        comps[1][shape.index(&[1, 1, 1])] = f64::NAN;
        let f = DisplacementField::new(shape, comps, false).unwrap();
        let v = f.validate();
        assert_eq!(
            v,
            vec![Violation::NonFinite {
                component: 1,
                coords: vec![1, 1, 1]
            }]
        );
    }

    #[test]
    fn validate_names_nonzero_corner_under_flag() {
        let shape = GridShape::new(&[3, 3, 3]).unwrap();
        let mut comps = vec![vec![0.0f64; shape.len()]; 3];
        comps[0][shape.index(&[2, 2, 2])] = 1.0;
        let f = DisplacementField::new(shape, comps, true).unwrap();
        let v = f.validate();
        assert_eq!(
            v,
            vec![Violation::BoundaryNotZero {
                component: 0,
                coords: vec![2, 2, 2]
            }]
        );
    }

    #[test]
    fn label_volume_rejects_undeclared_ids() {
        let shape = GridShape::new(&[3, 3]).unwrap();
        let mut labels = vec![0u32; shape.len()];
        labels[4] = 7;
        assert!(matches!(
            LabelVolume::new(shape.clone(), labels.clone(), vec![1, 2]),
            Err(Error::UnknownStructure { id: 7 })
        ));
        assert!(LabelVolume::new(shape, labels, vec![7]).is_ok());
    }

    #[test]
    fn jacobian_field_mat_round_trip() {
        let shape = GridShape::new(&[3, 3]).unwrap();
        let mut j = JacobianField::<f64>::zeros(shape);
        let m = SmallMat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        j.set_mat(5, &m);
        assert_eq!(j.mat(5), m);
        assert_eq!(j.entry_volume(1, 0)[5], 3.0);
    }
}

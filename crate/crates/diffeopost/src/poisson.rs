//! Fast Dirichlet Poisson solver on the sine basis.
//!
//! The compact Laplacian with zero exterior (see [`crate::diffops`]) is
//! diagonalized by the DST-I basis `sin(pi * (i+1) * (l+1) / (n+1))` with
//! per-axis eigenvalues `-(2 - 2 cos((l+1) pi / (n+1)))`. Solving `L u = f`
//! is therefore: forward DST of `f`, divide by the (negated) eigenvalue sum,
//! inverse DST.
//!
//! Normalization convention: the forward transform is the plain unnormalized
//! sine sum; the inverse carries the whole factor `prod_a 2/(n_a + 1)`. Each
//! 1-D DST-I of length `n` runs either through an odd-extension complex FFT
//! of length `2(n+1)` or, for short axes, a direct O(n^2) evaluation; the two
//! paths agree to rounding and the direct one doubles as a reference in
//! tests.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fields::{GridShape, ScalarVolume};
use crate::scalar::Scalar;

/// Axes shorter than this use the direct O(n^2) path.
const DIRECT_LEN_MAX: usize = 7;

/// Per-axis arrays of `2 - 2 cos((l+1) pi / (n+1))`, all strictly positive
/// and increasing in `l`. The combined mode eigenvalue is the sum across
/// axes, formed on the fly.
#[derive(Clone, Debug)]
pub struct EigenvalueCache<T> {
    per_axis: Vec<Vec<T>>,
}

impl<T: Scalar> EigenvalueCache<T> {
    fn new(dims: &[usize]) -> Self {
        let per_axis = dims
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|l| {
                        let lam = 2.0 - 2.0 * ((l + 1) as f64 * std::f64::consts::PI
                            / (n + 1) as f64)
                            .cos();
                        debug_assert!(lam > 0.0);
                        T::from_f64c(lam)
                    })
                    .collect()
            })
            .collect();
        EigenvalueCache { per_axis }
    }

    pub fn axis(&self, a: usize) -> &[T] {
        &self.per_axis[a]
    }
}

enum AxisKind<T> {
    /// sin table, symmetric in (i, l), stride n.
    Direct(Vec<T>),
    Fft {
        fft: Arc<dyn Fft<T>>,
        len: usize, // 2 (n + 1)
    },
}

struct AxisTransform<T> {
    n: usize,
    kind: AxisKind<T>,
}

impl<T: Scalar> AxisTransform<T> {
    fn new(n: usize, planner: &mut FftPlanner<T>) -> Self {
        let kind = if n <= DIRECT_LEN_MAX {
            let mut table = vec![T::zero(); n * n];
            for i in 0..n {
                for l in 0..n {
                    let arg = (i + 1) as f64 * (l + 1) as f64 * std::f64::consts::PI
                        / (n + 1) as f64;
                    table[i * n + l] = T::from_f64c(arg.sin());
                }
            }
            AxisKind::Direct(table)
        } else {
            let len = 2 * (n + 1);
            AxisKind::Fft {
                fft: planner.plan_fft_forward(len),
                len,
            }
        };
        AxisTransform { n, kind }
    }

    fn scratch_len(&self) -> usize {
        match &self.kind {
            AxisKind::Direct(_) => 0,
            AxisKind::Fft { fft, .. } => fft.get_inplace_scratch_len(),
        }
    }

    /// Unnormalized DST-I of one gathered line, `out[l] = sum_i x[i] sin(...)`.
    fn transform_line(&self, line: &[T], out: &mut [T], ws: &mut Workspace<T>) {
        let n = self.n;
        match &self.kind {
            AxisKind::Direct(table) => {
                for l in 0..n {
                    let mut acc = T::zero();
                    for i in 0..n {
                        acc = acc + line[i] * table[i * n + l];
                    }
                    out[l] = acc;
                }
            }
            AxisKind::Fft { fft, len } => {
                let m = *len;
                ws.cplx.truncate(0);
                ws.cplx.resize(m, Complex::new(T::zero(), T::zero()));
                for i in 0..n {
                    ws.cplx[i + 1].re = line[i];
                    ws.cplx[m - 1 - i].re = -line[i];
                }
                ws.fft_scratch
                    .resize(fft.get_inplace_scratch_len(), Complex::new(T::zero(), T::zero()));
                fft.process_with_scratch(&mut ws.cplx, &mut ws.fft_scratch);
                let neg_half = T::from_f64c(-0.5);
                for l in 0..n {
                    out[l] = ws.cplx[l + 1].im * neg_half;
                }
            }
        }
    }
}

/// Caller-local scratch buffers; plans stay immutable and shareable.
struct Workspace<T> {
    line: Vec<T>,
    out: Vec<T>,
    cplx: Vec<Complex<T>>,
    fft_scratch: Vec<Complex<T>>,
}

impl<T: Scalar> Workspace<T> {
    fn for_plan(plan: &DstPlan<T>) -> Self {
        let max_n = plan.dims.iter().copied().max().unwrap_or(0);
        let max_scратch = plan
            .axes
            .iter()
            .map(|a| a.scratch_len())
            .max()
            .unwrap_or(0);
        Workspace {
            line: vec![T::zero(); max_n],
            out: vec![T::zero(); max_n],
            cplx: Vec::new(),
            fft_scratch: Vec::with_capacity(max_scратch),
        }
    }
}

/// Immutable, shareable transform plan for one set of grid extents.
pub struct DstPlan<T> {
    dims: Vec<usize>,
    axes: Vec<AxisTransform<T>>,
    eigen: EigenvalueCache<T>,
    /// prod_a 2 / (n_a + 1), applied once in the inverse transform.
    inverse_factor: T,
}

impl<T: Scalar> DstPlan<T> {
    /// Builds a plan for raw extents (every extent >= 1).
    pub fn new(dims: &[usize]) -> Self {
        assert!(
            !dims.is_empty() && dims.iter().all(|&n| n >= 1),
            "plan extents must be >= 1, got {dims:?}"
        );
        let mut planner = FftPlanner::new();
        let axes = dims
            .iter()
            .map(|&n| AxisTransform::new(n, &mut planner))
            .collect();
        let mut factor = 1.0;
        for &n in dims {
            factor *= 2.0 / (n + 1) as f64;
        }
        DstPlan {
            dims: dims.to_vec(),
            axes,
            eigen: EigenvalueCache::new(dims),
            inverse_factor: T::from_f64c(factor),
        }
    }

    pub fn for_shape(shape: &GridShape) -> Self {
        Self::new(shape.dims())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn eigenvalues(&self) -> &EigenvalueCache<T> {
        &self.eigen
    }

    fn check(&self, dims: &[usize]) -> Result<()> {
        if dims != self.dims.as_slice() {
            return Err(Error::PlanMismatch {
                plan: self.dims.clone(),
                got: dims.to_vec(),
            });
        }
        Ok(())
    }

    fn apply_all_axes(&self, data: &mut [T], ws: &mut Workspace<T>) {
        for (axis, tr) in self.axes.iter().enumerate() {
            let n = self.dims[axis];
            let post: usize = self.dims[axis + 1..].iter().product();
            let pre: usize = self.dims[..axis].iter().product();
            for p in 0..pre {
                let block = p * n * post;
                for q in 0..post {
                    for i in 0..n {
                        ws.line[i] = data[block + i * post + q];
                    }
                    let (line, out) = (&ws.line[..n], &mut ws.out[..n]);
                    // split borrows: copy line out of ws first
                    let mut tmp = [T::zero(); 0];
                    let _ = &mut tmp;
                    let line_copy: Vec<T> = line.to_vec();
                    tr.transform_line(&line_copy, out, ws);
                    for i in 0..n {
                        data[block + i * post + q] = ws.out[i];
                    }
                }
            }
        }
    }

    /// Divides every coefficient by the negated eigenvalue sum, turning
    /// forward coefficients of `f` into coefficients of `L^{-1} f`.
    fn divide_eigenvalues(&self, data: &mut [T]) {
        match self.dims.len() {
            1 => {
                let lx = self.eigen.axis(0);
                for (i, v) in data.iter_mut().enumerate() {
                    *v = -*v / lx[i];
                }
            }
            2 => {
                let (lx, ly) = (self.eigen.axis(0), self.eigen.axis(1));
                let ny = self.dims[1];
                for i in 0..self.dims[0] {
                    for j in 0..ny {
                        let v = &mut data[i * ny + j];
                        *v = -*v / (lx[i] + ly[j]);
                    }
                }
            }
            3 => {
                let (lx, ly, lz) = (
                    self.eigen.axis(0),
                    self.eigen.axis(1),
                    self.eigen.axis(2),
                );
                let (ny, nz) = (self.dims[1], self.dims[2]);
                for i in 0..self.dims[0] {
                    for j in 0..ny {
                        let lij = lx[i] + ly[j];
                        let base = (i * ny + j) * nz;
                        for k in 0..nz {
                            let v = &mut data[base + k];
                            *v = -*v / (lij + lz[k]);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}

/// Spectral coefficients of a volume in the DST-I basis.
///
/// Stored unnormalized (plain forward sums). `normalized_coefficient` applies
/// the `prod 2/(n+1)` factor, i.e. the amplitude of the corresponding sine
/// mode in the synthesis sum.
#[derive(Clone, Debug)]
pub struct SpectralVolume<T> {
    shape: GridShape,
    coeffs: Vec<T>,
}

impl<T: Scalar> SpectralVolume<T> {
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Mode amplitude under the synthesis convention; `modes` are 0-based
    /// (mode `l` is `sin((l+1) pi x / (n+1))`).
    pub fn normalized_coefficient(&self, modes: &[usize]) -> T {
        let mut factor = 1.0;
        for &n in self.shape.dims() {
            factor *= 2.0 / (n + 1) as f64;
        }
        self.coeffs[self.shape.index(modes)] * T::from_f64c(factor)
    }
}

/// Forward DST-I of a volume: unnormalized sine sums along every axis.
pub fn dst_forward<T: Scalar>(u: &ScalarVolume<T>, plan: &DstPlan<T>) -> Result<SpectralVolume<T>> {
    plan.check(u.shape().dims())?;
    let mut data = u.values().to_vec();
    let mut ws = Workspace::for_plan(plan);
    plan.apply_all_axes(&mut data, &mut ws);
    Ok(SpectralVolume {
        shape: u.shape().clone(),
        coeffs: data,
    })
}

/// Inverse of [`dst_forward`]: synthesis with the whole normalization factor.
pub fn dst_inverse<T: Scalar>(a: &SpectralVolume<T>, plan: &DstPlan<T>) -> Result<ScalarVolume<T>> {
    plan.check(a.shape.dims())?;
    let mut data = a.coeffs.clone();
    let mut ws = Workspace::for_plan(plan);
    plan.apply_all_axes(&mut data, &mut ws);
    for v in &mut data {
        *v = *v * plan.inverse_factor;
    }
    ScalarVolume::new(a.shape.clone(), data)
}

/// Solves `discrete_laplacian(u) = f` (zero Dirichlet exterior) for `u`.
pub fn solve_poisson<T: Scalar>(f: &ScalarVolume<T>, plan: &DstPlan<T>) -> Result<ScalarVolume<T>> {
    plan.check(f.shape().dims())?;
    if let Some(pos) = f.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::non_finite(format!(
            "Poisson right-hand side at voxel {:?}",
            f.shape().coords(pos)
        )));
    }
    let mut data = f.values().to_vec();
    solve_raw(&mut data, plan);
    ScalarVolume::new(f.shape().clone(), data)
}

/// Cotangent of [`solve_poisson`]: the solve operator is self-adjoint, so the
/// pullback of an upstream cotangent is another solve.
pub fn solve_poisson_vjp<T: Scalar>(
    upstream: &ScalarVolume<T>,
    plan: &DstPlan<T>,
) -> Result<ScalarVolume<T>> {
    solve_poisson(upstream, plan)
}

/// In-place solve on a raw buffer whose layout matches the plan dims.
pub(crate) fn solve_raw<T: Scalar>(data: &mut [T], plan: &DstPlan<T>) {
    debug_assert_eq!(data.len(), plan.dims.iter().product::<usize>());
    let mut ws = Workspace::for_plan(plan);
    plan.apply_all_axes(data, &mut ws);
    plan.divide_eigenvalues(data);
    plan.apply_all_axes(data, &mut ws);
    for v in data.iter_mut() {
        *v = *v * plan.inverse_factor;
    }
}

/// Reference O(n^2) DST-I of a single line (unnormalized), used to
/// cross-check the FFT path.
pub fn dst1_reference<T: Scalar>(line: &[T]) -> Vec<T> {
    let n = line.len();
    (0..n)
        .map(|l| {
            let mut acc = T::zero();
            for (i, &x) in line.iter().enumerate() {
                let arg = (i + 1) as f64 * (l + 1) as f64 * std::f64::consts::PI
                    / (n + 1) as f64;
                acc = acc + x * T::from_f64c(arg.sin());
            }
            acc
        })
        .collect()
}

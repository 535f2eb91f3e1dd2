use crate::scalar::Scalar;

/// Largest matrix dimension the fixed-capacity storage supports.
///
/// Per-voxel Jacobians are at most 3x3; the Frechet-derivative block
/// augmentation doubles that to 6x6.
pub const MAT_MAX: usize = 6;

/// Stack-allocated square matrix of runtime dimension `n <= MAT_MAX`.
///
/// Row-major with stride `n`; cheap to copy, no heap traffic in the
/// voxel-wise exponential loops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat<T> {
    n: usize,
    a: [T; MAT_MAX * MAT_MAX],
}

impl<T: Scalar> SmallMat<T> {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1 && n <= MAT_MAX, "matrix dim {n} out of range");
        SmallMat {
            n,
            a: [T::zero(); MAT_MAX * MAT_MAX],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |r, c| rows[r][c])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        debug_assert!(r < self.n && c < self.n);
        self.a[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        debug_assert!(r < self.n && c < self.n);
        self.a[r * self.n + c] = v;
    }

    #[inline]
    pub fn add_scaled(&mut self, other: &Self, s: T) {
        debug_assert_eq!(self.n, other.n);
        for i in 0..self.n * self.n {
            self.a[i] = self.a[i] + other.a[i] * s;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        out.add_scaled(other, T::one());
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        out.add_scaled(other, -T::one());
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for i in 0..self.n * self.n {
            out.a[i] = out.a[i] * s;
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let v = self.a[r * n + k];
                for c in 0..n {
                    out.a[r * n + c] = out.a[r * n + c] + v * other.a[k * n + c];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |r, c| self.get(c, r))
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> T {
        let n = self.n;
        let mut best = T::zero();
        for c in 0..n {
            let mut s = T::zero();
            for r in 0..n {
                s = s + self.a[r * n + c].abs();
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    pub fn trace(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            s = s + self.get(i, i);
        }
        s
    }

    pub fn frobenius_sq(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n * self.n {
            s = s + self.a[i] * self.a[i];
        }
        s
    }

    /// Determinant, closed form for n <= 3.
    pub fn det(&self) -> T {
        match self.n {
            1 => self.get(0, 0),
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0),
            3 => {
                let m = |r: usize, c: usize| self.get(r, c);
                m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                    - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                    + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
            }
            n => panic!("det only implemented for n <= 3, got {n}"),
        }
    }

    pub fn is_finite(&self) -> bool {
        (0..self.n * self.n).all(|i| self.a[i].is_finite())
    }

    pub fn convert<U: Scalar>(&self) -> SmallMat<U> {
        SmallMat::from_fn(self.n, |r, c| U::from_f64c(self.get(r, c).to_f64c()))
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns (eigenvalues, eigenvectors-as-columns). Used for the tiny
/// pseudo-inverses in the commutation-residual fit; dimensions are <= 3 so a
/// handful of sweeps converges to machine precision.
pub(crate) fn sym_eigen<T: Scalar>(m: &SmallMat<T>) -> (Vec<T>, SmallMat<T>) {
    let n = m.dim();
    let mut a = *m;
    let mut v = SmallMat::identity(n);
    for _sweep in 0..32 {
        let mut off = T::zero();
        for r in 0..n {
            for c in (r + 1)..n {
                off = off + a.get(r, c).abs();
            }
        }
        if off <= T::from_f64c(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= T::epsilon() * (a.get(p, p).abs() + a.get(q, q).abs()) {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (T::from_f64c(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let eig = (0..n).map(|i| a.get(i, i)).collect();
    (eig, v)
}

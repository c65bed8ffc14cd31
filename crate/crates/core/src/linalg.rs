//! Fixed-size dense matrices for the small (≤ 5×5) blocks this crate works with.
//!
//! Everything is stack-allocated and const-generic over the shape. Inverses of
//! 2×2 and 3×3 matrices are closed-form; larger ones go through Gauss-Jordan
//! elimination with partial pivoting and symmetric equilibration.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_traits::{Num, Zero};

use crate::num::{Cplx, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat<E, const R: usize, const C: usize>(pub [[E; C]; R]);

pub type Mat2<T> = Mat<T, 2, 2>;
pub type Mat3<T> = Mat<T, 3, 3>;
pub type Mat5<T> = Mat<T, 5, 5>;

impl<E: Copy + Num, const R: usize, const C: usize> Mat<E, R, C> {
    pub fn zeros() -> Self {
        Mat([[E::zero(); C]; R])
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut m = Self::zeros();
        for i in 0..R {
            for j in 0..C {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn transpose(&self) -> Mat<E, C, R> {
        Mat::from_fn(|i, j| self.0[j][i])
    }

    pub fn scale(&self, s: E) -> Self {
        Mat::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn map<F: Copy + Num>(&self, f: impl Fn(E) -> F) -> Mat<F, R, C> {
        Mat::from_fn(|i, j| f(self.0[i][j]))
    }

    /// Copies the `RR×CC` sub-block starting at (`r0`, `c0`).
    pub fn block<const RR: usize, const CC: usize>(&self, r0: usize, c0: usize) -> Mat<E, RR, CC> {
        Mat::from_fn(|i, j| self.0[r0 + i][c0 + j])
    }
}

impl<E: Copy + Num, const N: usize> Mat<E, N, N> {
    pub fn identity() -> Self {
        Mat::from_fn(|i, j| if i == j { E::one() } else { E::zero() })
    }

    pub fn diag(d: [E; N]) -> Self {
        Mat::from_fn(|i, j| if i == j { d[i] } else { E::zero() })
    }

    pub fn trace(&self) -> E {
        (0..N).fold(E::zero(), |acc, i| acc + self.0[i][i])
    }
}

impl<T: Real, const R: usize, const C: usize> Mat<T, R, C> {
    pub fn frobenius_norm(&self) -> T {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flat_map(|row| row.iter()).all(|x| x.is_finite())
    }
}

impl<T: Real, const N: usize> Mat<T, N, N> {
    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Mat::from_fn(|i, j| (self.0[i][j] + self.0[j][i]) * half)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    ///
    /// The matrix is first equilibrated by `D A D` with `D = diag(1/√|a_ii|)`,
    /// which keeps well-posed Fisher matrices with wildly different parameter
    /// scales (delay vs. angle vs. gain) accurate to near machine precision.
    pub fn inverse(&self) -> Option<Self> {
        let mut d = [T::one(); N];
        for (i, di) in d.iter_mut().enumerate() {
            let a = self.0[i][i].abs();
            if a > T::zero() && a.is_finite() {
                *di = T::one() / a.sqrt();
            }
        }
        let scaled: Self = Mat::from_fn(|i, j| self.0[i][j] * d[i] * d[j]);
        let inv = gauss_jordan(scaled)?;
        Some(Mat::from_fn(|i, j| inv.0[i][j] * d[i] * d[j]))
    }
}

fn gauss_jordan<T: Real, const N: usize>(mut a: Mat<T, N, N>) -> Option<Mat<T, N, N>> {
    let mut inv = Mat::<T, N, N>::identity();
    let scale = a.max_abs();
    if !(scale > T::zero()) || !scale.is_finite() {
        return None;
    }
    for col in 0..N {
        let pivot = (col..N).max_by(|&x, &y| {
            a.0[x][col]
                .abs()
                .partial_cmp(&a.0[y][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a.0[pivot][col].abs() <= scale * T::epsilon() {
            return None;
        }
        a.0.swap(col, pivot);
        inv.0.swap(col, pivot);
        let p = a.0[col][col];
        for j in 0..N {
            a.0[col][j] /= p;
            inv.0[col][j] /= p;
        }
        for row in 0..N {
            if row != col {
                let f = a.0[row][col];
                if f != T::zero() {
                    for j in 0..N {
                        a.0[row][j] = a.0[row][j] - f * a.0[col][j];
                        inv.0[row][j] = inv.0[row][j] - f * inv.0[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

impl<T: Real> Mat2<T> {
    /// Closed-form inverse; `None` when the determinant vanishes.
    pub fn inverse2(&self) -> Option<Self> {
        let [[a, b], [c, d]] = self.0;
        let det = a * d - b * c;
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        Some(Mat([[d / det, -b / det], [-c / det, a / det]]))
    }

    /// Eigenvalues of a symmetric 2×2 matrix, ascending.
    pub fn sym_eigenvalues(&self) -> [T; 2] {
        let [[a, b], [_, d]] = self.0;
        let mean = (a + d) * T::lit(0.5);
        let half_diff = (a - d) * T::lit(0.5);
        let r = half_diff.hypot(b);
        [mean - r, mean + r]
    }

    /// Spectral condition number of a symmetric 2×2 matrix; infinite when it
    /// is not positive definite.
    pub fn sym_condition(&self) -> T {
        let [lo, hi] = self.sym_eigenvalues();
        if lo <= T::zero() || !lo.is_finite() || !hi.is_finite() {
            T::infinity()
        } else {
            hi / lo
        }
    }
}

impl<T: Real> Mat3<T> {
    /// Closed-form inverse via the adjugate.
    pub fn inverse3(&self) -> Option<Self> {
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = Mat([
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ]);
        let det = m[0][0] * adj.0[0][0] + m[0][1] * adj.0[1][0] + m[0][2] * adj.0[2][0];
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        Some(adj.scale(T::one() / det))
    }
}

impl<T: Real, const R: usize, const C: usize> Mat<Cplx<T>, R, C> {
    /// Conjugate transpose.
    pub fn adjoint(&self) -> Mat<Cplx<T>, C, R> {
        Mat::from_fn(|i, j| self.0[j][i].conj())
    }

    pub fn re(&self) -> Mat<T, R, C> {
        Mat::from_fn(|i, j| self.0[i][j].re)
    }
}

impl<E, const R: usize, const C: usize, const K: usize> Mul<Mat<E, C, K>> for Mat<E, R, C>
where
    E: Copy + Num,
{
    type Output = Mat<E, R, K>;

    fn mul(self, rhs: Mat<E, C, K>) -> Mat<E, R, K> {
        let mut out = Mat::<E, R, K>::zeros();
        for i in 0..R {
            for k in 0..C {
                let a = self.0[i][k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..K {
                    out.0[i][j] = out.0[i][j] + a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

impl<E: Copy + Num, const R: usize, const C: usize> Add for Mat<E, R, C> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Mat::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl<E: Copy + Num, const R: usize, const C: usize> Sub for Mat<E, R, C> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Mat::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

impl<E: Copy + Num + Neg<Output = E>, const R: usize, const C: usize> Neg for Mat<E, R, C> {
    type Output = Self;

    fn neg(self) -> Self {
        Mat::from_fn(|i, j| -self.0[i][j])
    }
}

impl<E: Zero, const R: usize, const C: usize> Index<(usize, usize)> for Mat<E, R, C> {
    type Output = E;

    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.0[i][j]
    }
}

impl<E: Zero, const R: usize, const C: usize> IndexMut<(usize, usize)> for Mat<E, R, C> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.0[i][j]
    }
}

/// Relative Frobenius distance `‖a − b‖ / max(‖a‖, ‖b‖)` (0 when both vanish).
pub fn rel_frobenius<T: Real, const R: usize, const C: usize>(a: &Mat<T, R, C>, b: &Mat<T, R, C>) -> T {
    let denom = a.frobenius_norm().max(b.frobenius_norm());
    if denom == T::zero() {
        T::zero()
    } else {
        (*a - *b).frobenius_norm() / denom
    }
}

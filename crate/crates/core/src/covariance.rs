//! Per-subcarrier 2×2 beam covariances `B_p` in the basis spanned by the
//! steering vector and its angle derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num::{Cplx, Real};

/// Hermitian 2×2 block `[[b11, conj(b21)], [b21, b22]]`.
///
/// `b11` is the power sent along the steering vector, `b22` the power along
/// its derivative, `b21` their correlation. Hermitian by construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HermitianBlock<T> {
    pub b11: T,
    pub b22: T,
    pub b21: Cplx<T>,
}

/// Eigen-decomposition of a [`HermitianBlock`], eigenvalues descending.
#[derive(Clone, Copy, Debug)]
pub struct BlockEigen<T> {
    pub values: [T; 2],
    pub vectors: [[Cplx<T>; 2]; 2],
}

impl<T: Real> HermitianBlock<T> {
    pub fn new(b11: T, b22: T, b21: Cplx<T>) -> Self {
        Self { b11, b22, b21 }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), Cplx::new(T::zero(), T::zero()))
    }

    pub fn diag(b11: T, b22: T) -> Self {
        Self::new(b11, b22, Cplx::new(T::zero(), T::zero()))
    }

    /// `v vᴴ`
    pub fn outer(v: [Cplx<T>; 2]) -> Self {
        Self::new(v[0].norm_sqr(), v[1].norm_sqr(), v[1] * v[0].conj())
    }

    pub fn b12(&self) -> Cplx<T> {
        self.b21.conj()
    }

    pub fn trace(&self) -> T {
        self.b11 + self.b22
    }

    pub fn det(&self) -> T {
        self.b11 * self.b22 - self.b21.norm_sqr()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.b11 * s, self.b22 * s, self.b21 * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.b11 + o.b11, self.b22 + o.b22, self.b21 + o.b21)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.b11 - o.b11, self.b22 - o.b22, self.b21 - o.b21)
    }

    /// Frobenius inner product `Re tr(Aᴴ B)`.
    pub fn inner(&self, o: &Self) -> T {
        self.b11 * o.b11 + self.b22 * o.b22 + T::lit(2.0) * (self.b21.conj() * o.b21).re
    }

    pub fn norm_sqr(&self) -> T {
        self.inner(self)
    }

    pub fn to_mat(&self) -> Mat<Cplx<T>, 2, 2> {
        let re = |x: T| Cplx::new(x, T::zero());
        Mat([[re(self.b11), self.b12()], [self.b21, re(self.b22)]])
    }

    /// Hermitian part of an arbitrary complex 2×2 matrix.
    pub fn from_mat(m: &Mat<Cplx<T>, 2, 2>) -> Self {
        let half = T::lit(0.5);
        Self::new(m[(0, 0)].re, m[(1, 1)].re, (m[(1, 0)] + m[(0, 1)].conj()) * half)
    }

    pub fn is_finite(&self) -> bool {
        self.b11.is_finite() && self.b22.is_finite() && self.b21.re.is_finite() && self.b21.im.is_finite()
    }

    pub fn eigen(&self) -> BlockEigen<T> {
        let zero = Cplx::new(T::zero(), T::zero());
        let one = Cplx::new(T::one(), T::zero());
        let mean = (self.b11 + self.b22) * T::lit(0.5);
        let half_diff = (self.b11 - self.b22) * T::lit(0.5);
        let off = self.b21.norm();
        let r = half_diff.hypot(off);
        let values = [mean + r, mean - r];
        if off == T::zero() {
            let vectors = if self.b11 >= self.b22 {
                [[one, zero], [zero, one]]
            } else {
                [[zero, one], [one, zero]]
            };
            return BlockEigen { values, vectors };
        }
        // Two candidate null vectors of (B − λ₁I); keep the better-conditioned one.
        let lam = values[0];
        let c1 = [self.b12(), Cplx::new(lam - self.b11, T::zero())];
        let c2 = [Cplx::new(lam - self.b22, T::zero()), self.b21];
        let n1 = c1[0].norm_sqr() + c1[1].norm_sqr();
        let n2 = c2[0].norm_sqr() + c2[1].norm_sqr();
        let (v, n) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
        let n = n.sqrt();
        let v1 = [v[0] / n, v[1] / n];
        let v2 = [-v1[1].conj(), v1[0].conj()];
        BlockEigen { values, vectors: [v1, v2] }
    }

    pub fn from_eigen(values: [T; 2], vectors: [[Cplx<T>; 2]; 2]) -> Self {
        Self::outer(vectors[0])
            .scale(values[0])
            .add(&Self::outer(vectors[1]).scale(values[1]))
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigen().values[1]
    }
}

/// Block-diagonal transmit covariance, one block per subcarrier in the order
/// of [`crate::Scenario::subcarrier_offsets`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamCovariance<T> {
    pub blocks: Vec<HermitianBlock<T>>,
}

impl<T: Real> BeamCovariance<T> {
    pub fn new(blocks: Vec<HermitianBlock<T>>) -> Self {
        Self { blocks }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![HermitianBlock::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn trace(&self) -> T {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.blocks.iter().map(|b| b.scale(s)).collect())
    }

    /// `self + s·dir`
    pub fn axpy(&self, s: T, dir: &Self) -> Self {
        Self::new(
            self.blocks
                .iter()
                .zip(&dir.blocks)
                .map(|(a, d)| a.add(&d.scale(s)))
                .collect(),
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.axpy(-T::one(), o)
    }

    pub fn inner(&self, o: &Self) -> T {
        self.blocks.iter().zip(&o.blocks).map(|(a, b)| a.inner(b)).sum()
    }

    pub fn norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// `Σ_p b_{p,11}`
    pub fn power_toward_target(&self) -> T {
        self.blocks.iter().map(|b| b.b11).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.is_finite())
    }

    /// Checks PSD blocks (eigenvalue floor `−psd_tol·trace`) and the power
    /// budget (slack `1e−10`, relative to the budget).
    pub fn check_feasible(&self, power_budget: T, psd_tol: T) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidScenario("non-finite beam covariance".into()));
        }
        let total = self.trace();
        let floor = -psd_tol * total.abs().max(power_budget);
        for (p, b) in self.blocks.iter().enumerate() {
            let lo = b.min_eigenvalue();
            if lo < floor {
                return Err(Error::InvalidScenario(format!(
                    "beam covariance block {p} is not positive semidefinite (min eigenvalue {lo})"
                )));
            }
        }
        if total > power_budget * (T::one() + T::lit(1e-10)) {
            return Err(Error::InvalidScenario(format!(
                "beam covariance uses {total} W, budget is {power_budget} W"
            )));
        }
        Ok(())
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: self.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block() -> impl Strategy<Value = HermitianBlock<f64>> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)
            .prop_map(|(a, d, re, im)| HermitianBlock::new(a, d, Cplx::new(re, im)))
    }

    proptest! {
        #[test]
        fn eigen_reconstructs(b in block()) {
            let e = b.eigen();
            prop_assert!(e.values[0] >= e.values[1]);
            let r = HermitianBlock::from_eigen(e.values, e.vectors);
            prop_assert!(r.sub(&b).norm_sqr().sqrt() < 1e-12);
            prop_assert!((e.values[0] + e.values[1] - b.trace()).abs() < 1e-12);
            prop_assert!((e.values[0] * e.values[1] - b.det()).abs() < 1e-12);
        }
    }

    #[test]
    fn mat_round_trip_and_inner() {
        let b = HermitianBlock::new(1.0, 2.0, Cplx::new(0.3, -0.4));
        assert_eq!(HermitianBlock::from_mat(&b.to_mat()), b);
        let m = b.to_mat();
        let fro: f64 = m.0.iter().flat_map(|r| r.iter()).map(|x| x.norm_sqr()).sum();
        assert!((b.norm_sqr() - fro).abs() < 1e-15);
    }

    #[test]
    fn feasibility() {
        let ok = BeamCovariance::new(vec![HermitianBlock::diag(0.004, 0.001), HermitianBlock::diag(0.005, 0.0)]);
        assert!(ok.check_feasible(0.01, 1e-10).is_ok());
        let over = ok.scale(1.01);
        assert!(over.check_feasible(0.01, 1e-10).is_err());
        let indefinite = BeamCovariance::new(vec![HermitianBlock::new(0.001, 0.001, Cplx::new(0.0, 0.002))]);
        assert!(indefinite.check_feasible(0.01, 1e-10).is_err());
    }
}

//! Array manifolds: uniform circular array layouts, steering vectors and their
//! derivatives with respect to the local azimuth.
//!
//! Element positions are stored in the array's local frame and centered on
//! their centroid. With that phase center the steering vector and its angle
//! derivative are orthogonal for every angle, which is what lets the Fisher
//! information split into the closed forms used in [`crate::fisher`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::polar_units;
use crate::num::{cis, cplx, speed_of_light, Cplx, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayModel<T> {
    /// Element positions in meters, local frame, centroid at the origin.
    pub element_positions: Vec<[T; 2]>,
    /// Rotation of the local frame relative to the global x axis, radians.
    pub orientation: T,
}

impl<T: Real> ArrayModel<T> {
    /// Wraps arbitrary element positions, shifting them onto their centroid.
    pub fn from_positions(positions: Vec<[T; 2]>, orientation: T) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArray("array needs at least one element".into()));
        }
        if positions.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidArray("non-finite element position".into()));
        }
        let n = T::from_count(positions.len());
        let cx = positions.iter().map(|p| p[0]).sum::<T>() / n;
        let cy = positions.iter().map(|p| p[1]).sum::<T>() / n;
        Ok(Self {
            element_positions: positions.into_iter().map(|p| [p[0] - cx, p[1] - cy]).collect(),
            orientation,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.element_positions.len()
    }

    pub fn with_orientation(mut self, orientation: T) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn centroid(&self) -> [T; 2] {
        let n = T::from_count(self.n_elements());
        [
            self.element_positions.iter().map(|p| p[0]).sum::<T>() / n,
            self.element_positions.iter().map(|p| p[1]).sum::<T>() / n,
        ]
    }
}

/// Uniform circular array whose adjacent elements are `spacing` meters apart
/// (chord length).
pub fn build_uca<T: Real>(n: usize, spacing: T) -> Result<ArrayModel<T>> {
    if n == 0 {
        return Err(Error::InvalidArray("array needs at least one element".into()));
    }
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(Error::InvalidArray(format!("element spacing must be positive, got {spacing}")));
    }
    if n == 1 {
        return ArrayModel::from_positions(vec![[T::zero(); 2]], T::zero());
    }
    let nn = T::from_count(n);
    let radius = spacing / (T::lit(2.0) * (T::PI() / nn).sin());
    let positions = (0..n)
        .map(|k| {
            let phi = T::TAU() * T::from_count(k) / nn;
            let (s, c) = phi.sin_cos();
            [radius * c, radius * s]
        })
        .collect();
    ArrayModel::from_positions(positions, T::zero())
}

/// Array response `a` and its derivative `ȧ = ∂a/∂θ̃` at one angle and frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringPair<T> {
    pub a: Vec<Cplx<T>>,
    pub a_dot: Vec<Cplx<T>>,
    pub norm_a: T,
    pub norm_a_dot: T,
}

impl<T: Real> SteeringPair<T> {
    /// `aᴴ ȧ`
    pub fn inner(&self) -> Cplx<T> {
        self.a
            .iter()
            .zip(&self.a_dot)
            .fold(Cplx::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
    }
}

/// Steering vector toward `global_angle` at total angular frequency
/// `omega_total` (carrier plus subcarrier offset), rad/s.
///
/// Element `k` responds with `exp(j·(ω/c)·e_r(θ̃)·r_k)`, where `θ̃` is the
/// local angle `global_angle − orientation`.
pub fn steering<T: Real>(array: &ArrayModel<T>, global_angle: T, omega_total: T) -> SteeringPair<T> {
    let wavenumber = omega_total / speed_of_light::<T>();
    let (e_r, e_phi) = polar_units(global_angle - array.orientation);
    let mut a = Vec::with_capacity(array.n_elements());
    let mut a_dot = Vec::with_capacity(array.n_elements());
    let mut dot_sq = T::zero();
    for pos in &array.element_positions {
        let along = e_r[0] * pos[0] + e_r[1] * pos[1];
        let across = e_phi[0] * pos[0] + e_phi[1] * pos[1];
        let ak = cis(wavenumber * along);
        let d = cplx(T::zero(), wavenumber * across) * ak;
        dot_sq += (wavenumber * across).powi(2);
        a.push(ak);
        a_dot.push(d);
    }
    SteeringPair {
        norm_a: T::from_count(array.n_elements()).sqrt(),
        norm_a_dot: dot_sq.sqrt(),
        a,
        a_dot,
    }
}

/// Steering evaluated at the carrier only, shared by all subcarriers.
pub fn narrowband_steering<T: Real>(array: &ArrayModel<T>, global_angle: T, omega_carrier: T) -> SteeringPair<T> {
    steering(array, global_angle, omega_carrier)
}

//! Bistatic geometry: distances, global azimuths, bistatic delay and the
//! Jacobian that maps (delay, AoD, AoA) information to position information.
//!
//! Angles are measured counter-clockwise from the +x axis. The Jacobian `K`
//! does not depend on array orientation, since a fixed orientation offset has
//! zero derivative with respect to the scatterer position.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num::{speed_of_light, Real};

/// Points closer than this are treated as coincident, in meters.
pub const COINCIDENCE_TOLERANCE_M: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position2D<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Position2D<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth of `to` as seen from `self`, in (−π, π].
    pub fn azimuth_to(&self, to: &Self) -> T {
        let a = (to.y - self.y).atan2(to.x - self.x);
        if a <= -T::PI() {
            T::PI()
        } else {
            a
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Unit vectors `e_r(φ)`, `e_φ(φ)` of the polar frame.
pub fn polar_units<T: Real>(phi: T) -> ([T; 2], [T; 2]) {
    let (s, c) = phi.sin_cos();
    ([c, s], [-s, c])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryState<T> {
    /// Transmitter to scatterer distance.
    pub d_ts: T,
    /// Scatterer to receiver distance.
    pub d_sr: T,
    /// Global azimuth of the scatterer seen from the transmitter.
    pub theta_t: T,
    /// Global azimuth of the scatterer seen from the receiver.
    pub theta_r: T,
    /// Bistatic delay `(d_ts + d_sr) / c`.
    pub tau: T,
    /// Rows: x, y. Columns: ∂τ/∂p, ∂θ_T/∂p, ∂θ_R/∂p.
    pub k: Mat<T, 2, 3>,
}

pub fn derive_geometry<T: Real>(
    p_t: Position2D<T>,
    p_r: Position2D<T>,
    p_s: Position2D<T>,
) -> Result<GeometryState<T>> {
    if !(p_t.is_finite() && p_r.is_finite() && p_s.is_finite()) {
        return Err(Error::DegenerateGeometry("non-finite node position".into()));
    }
    let d_ts = p_t.distance(&p_s);
    let d_sr = p_r.distance(&p_s);
    let tol = T::lit(COINCIDENCE_TOLERANCE_M);
    if d_ts < tol {
        return Err(Error::DegenerateGeometry("scatterer coincides with the transmitter".into()));
    }
    if d_sr < tol {
        return Err(Error::DegenerateGeometry("scatterer coincides with the receiver".into()));
    }
    let c = speed_of_light::<T>();
    let theta_t = p_t.azimuth_to(&p_s);
    let theta_r = p_r.azimuth_to(&p_s);
    let (er_t, ephi_t) = polar_units(theta_t);
    let (er_r, ephi_r) = polar_units(theta_r);
    let k = Mat::from_fn(|row, col| match col {
        0 => (er_t[row] + er_r[row]) / c,
        1 => ephi_t[row] / d_ts,
        _ => ephi_r[row] / d_sr,
    });
    Ok(GeometryState {
        d_ts,
        d_sr,
        theta_t,
        theta_r,
        tau: (d_ts + d_sr) / c,
        k,
    })
}

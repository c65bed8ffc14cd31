//! Physical setup of one bistatic measurement.

use serde::{Deserialize, Serialize};

use crate::array::{build_uca, ArrayModel};
use crate::error::{Error, Result};
use crate::geometry::{derive_geometry, Position2D};
use crate::num::{cis, speed_of_light, Cplx, Real};
use crate::sweep::{channel_gain, GainModel};

/// Constants of the reference setup (3.8 GHz, 15 × 3 UCAs, two subcarriers).
pub mod reference {
    pub const CARRIER_HZ: f64 = 3.8e9;
    pub const SUBCARRIER_SPACING_HZ: f64 = 2.4e6;
    pub const NUM_SUBCARRIERS: usize = 2;
    pub const TX_POSITION_M: [f64; 2] = [-10.0, 0.0];
    pub const RX_POSITION_M: [f64; 2] = [10.0, 0.0];
    pub const TARGET_POSITION_M: [f64; 2] = [0.0, 10.0];
    pub const TX_ELEMENTS: usize = 15;
    pub const RX_ELEMENTS: usize = 3;
    pub const SPACING_WAVELENGTHS: f64 = 0.5;
    pub const NOISE_VARIANCE_W: f64 = 2.4e-14;
    pub const POWER_BUDGET_W: f64 = 10e-3;
    pub const RCS_COEFFICIENT_M: f64 = 0.1;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T> {
    pub p_t: Position2D<T>,
    pub p_r: Position2D<T>,
    pub p_s: Position2D<T>,
    pub tx_array: ArrayModel<T>,
    pub rx_array: ArrayModel<T>,
    /// Carrier angular frequency, rad/s.
    pub omega_carrier: T,
    /// Baseband angular frequency `ω_p` of each subcarrier, rad/s.
    pub subcarrier_offsets: Vec<T>,
    /// Noise variance per receive antenna, W.
    pub sigma_eta_sq: T,
    /// Total transmit power `P_T`, W.
    pub power_budget: T,
    /// Complex coefficient of the scattered path.
    pub h1: Cplx<T>,
    /// Evaluate all manifolds at the carrier only.
    pub narrowband: bool,
    /// Declares that every `ω_p` has a mirror `−ω_p` in the grid.
    pub symmetric: bool,
}

/// Baseband subcarrier frequencies `ω_p = 2π·p·Δf`.
///
/// Even counts use `p ∈ {±1, …, ±P/2}` (no DC subcarrier); odd counts use
/// `p ∈ {0, ±1, …, ±⌊P/2⌋}`. Ascending order.
pub fn subcarrier_offsets<T: Real>(count: usize, spacing_hz: T) -> Vec<T> {
    let half = (count / 2) as i64;
    let indices: Vec<i64> = if count % 2 == 0 {
        (-half..=half).filter(|&p| p != 0).collect()
    } else {
        (-half..=half).collect()
    };
    indices
        .into_iter()
        .map(|p| T::TAU() * T::lit(p as f64) * spacing_hz)
        .collect()
}

/// Human-scale description of a scenario, from which a [`Scenario`] is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams<T> {
    pub carrier_hz: T,
    pub subcarrier_spacing_hz: T,
    pub num_subcarriers: usize,
    /// Explicit subcarrier offsets in Hz; overrides the spacing/count grid.
    pub subcarrier_offsets_hz: Option<Vec<T>>,
    pub symmetric: bool,
    pub narrowband: bool,
    pub tx_position: Position2D<T>,
    pub rx_position: Position2D<T>,
    pub target_position: Position2D<T>,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub tx_spacing_wavelengths: T,
    pub rx_spacing_wavelengths: T,
    pub tx_orientation: T,
    pub rx_orientation: T,
    pub noise_variance: T,
    pub power_budget: T,
    pub gain: GainModel<T>,
}

impl<T: Real> Default for ScenarioParams<T> {
    fn default() -> Self {
        use reference::*;
        let pos = |p: [f64; 2]| Position2D::new(T::lit(p[0]), T::lit(p[1]));
        Self {
            carrier_hz: T::lit(CARRIER_HZ),
            subcarrier_spacing_hz: T::lit(SUBCARRIER_SPACING_HZ),
            num_subcarriers: NUM_SUBCARRIERS,
            subcarrier_offsets_hz: None,
            symmetric: true,
            narrowband: true,
            tx_position: pos(TX_POSITION_M),
            rx_position: pos(RX_POSITION_M),
            target_position: pos(TARGET_POSITION_M),
            tx_elements: TX_ELEMENTS,
            rx_elements: RX_ELEMENTS,
            tx_spacing_wavelengths: T::lit(SPACING_WAVELENGTHS),
            rx_spacing_wavelengths: T::lit(SPACING_WAVELENGTHS),
            tx_orientation: T::zero(),
            rx_orientation: T::zero(),
            noise_variance: T::lit(NOISE_VARIANCE_W),
            power_budget: T::lit(POWER_BUDGET_W),
            gain: GainModel::default(),
        }
    }
}

impl<T: Real> ScenarioParams<T> {
    pub fn wavelength(&self) -> T {
        speed_of_light::<T>() / self.carrier_hz
    }

    pub fn build(&self) -> Result<Scenario<T>> {
        if !(self.carrier_hz > T::zero()) {
            return Err(Error::InvalidScenario("carrier frequency must be positive".into()));
        }
        let lambda = self.wavelength();
        let tx_array = build_uca(self.tx_elements, self.tx_spacing_wavelengths * lambda)?
            .with_orientation(self.tx_orientation);
        let rx_array = build_uca(self.rx_elements, self.rx_spacing_wavelengths * lambda)?
            .with_orientation(self.rx_orientation);
        let subcarrier_offsets = match &self.subcarrier_offsets_hz {
            Some(hz) => hz.iter().map(|&f| T::TAU() * f).collect(),
            None => {
                if self.num_subcarriers == 0 {
                    return Err(Error::InvalidScenario("at least one subcarrier is required".into()));
                }
                subcarrier_offsets(self.num_subcarriers, self.subcarrier_spacing_hz)
            }
        };
        let mut scenario = Scenario {
            p_t: self.tx_position,
            p_r: self.rx_position,
            p_s: self.target_position,
            tx_array,
            rx_array,
            omega_carrier: T::TAU() * self.carrier_hz,
            subcarrier_offsets,
            sigma_eta_sq: self.noise_variance,
            power_budget: self.power_budget,
            h1: Cplx::new(T::one(), T::zero()),
            narrowband: self.narrowband,
            symmetric: self.symmetric,
        };
        scenario.h1 = scenario.modeled_gain(&self.gain)?;
        scenario.validate()?;
        Ok(scenario)
    }
}

impl<T: Real> Scenario<T> {
    /// The reference setup with the scatterer at (0, 10) m.
    pub fn reference() -> Self {
        ScenarioParams::default()
            .build()
            .expect("reference scenario is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidScenario(msg.into()));
        if !(self.sigma_eta_sq > T::zero()) || !self.sigma_eta_sq.is_finite() {
            return bad("noise variance must be positive");
        }
        if !(self.power_budget > T::zero()) || !self.power_budget.is_finite() {
            return bad("power budget must be positive");
        }
        if !(self.omega_carrier > T::zero()) {
            return bad("carrier frequency must be positive");
        }
        if self.subcarrier_offsets.is_empty() {
            return bad("at least one subcarrier is required");
        }
        if self.subcarrier_offsets.iter().any(|w| !w.is_finite()) {
            return bad("non-finite subcarrier offset");
        }
        if !self.narrowband && self.subcarrier_offsets.iter().any(|&w| !(self.omega_carrier + w > T::zero())) {
            return bad("subcarrier below DC in wideband mode");
        }
        if !(self.h1.norm() > T::zero()) || !self.h1.re.is_finite() || !self.h1.im.is_finite() {
            return bad("channel coefficient must be finite and nonzero");
        }
        Ok(())
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarrier_offsets.len()
    }

    pub fn n_t(&self) -> usize {
        self.tx_array.n_elements()
    }

    pub fn n_r(&self) -> usize {
        self.rx_array.n_elements()
    }

    /// Angular frequency at which subcarrier `p`'s manifolds are evaluated.
    pub fn manifold_omega(&self, p: usize) -> T {
        if self.narrowband {
            self.omega_carrier
        } else {
            self.omega_carrier + self.subcarrier_offsets[p]
        }
    }

    pub fn carrier_wavelength(&self) -> T {
        T::TAU() * speed_of_light::<T>() / self.omega_carrier
    }

    /// True when every offset has a mirror image in the grid.
    pub fn offsets_are_symmetric(&self) -> bool {
        let scale = self
            .subcarrier_offsets
            .iter()
            .fold(T::zero(), |m, w| m.max(w.abs()))
            .max(T::one());
        self.subcarrier_offsets.iter().all(|&w| {
            self.subcarrier_offsets
                .iter()
                .any(|&v| (v + w).abs() <= T::lit(1e-9) * scale)
        })
    }

    /// Indices of the lowest and highest baseband frequency (`−P_m`, `+P_m`).
    /// Equal for a single subcarrier.
    pub fn outermost(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut hi = 0;
        for (i, &w) in self.subcarrier_offsets.iter().enumerate() {
            if w < self.subcarrier_offsets[lo] {
                lo = i;
            }
            if w > self.subcarrier_offsets[hi] {
                hi = i;
            }
        }
        (lo, hi)
    }

    /// `|h₁|·e^{jψ}` from the distance-based gain model at the current target.
    pub fn modeled_gain(&self, gain: &GainModel<T>) -> Result<Cplx<T>> {
        let g = derive_geometry(self.p_t, self.p_r, self.p_s)?;
        let mag = channel_gain(g.d_ts, g.d_sr, self.carrier_wavelength(), gain.rcs_coefficient)?;
        Ok(cis(gain.phase) * mag)
    }

    /// Copy with the scatterer moved and `h₁` recomputed from `gain`.
    pub fn retarget(&self, p_s: Position2D<T>, gain: &GainModel<T>) -> Result<Self> {
        let mut out = self.clone();
        out.p_s = p_s;
        out.h1 = out.modeled_gain(gain)?;
        Ok(out)
    }

    /// Same nodes with the transmit and receive roles exchanged.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        std::mem::swap(&mut out.p_t, &mut out.p_r);
        std::mem::swap(&mut out.tx_array, &mut out.rx_array);
        out
    }
}

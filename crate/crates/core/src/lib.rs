//! Cramér-Rao bounds on target position for a bistatic MIMO-OFDM radar and
//! optimal per-subcarrier transmit beam covariances.
//!
//! The transmitter sends on each subcarrier `p` a signal with covariance
//! `R_s[p] = F_p B_p F_pᴴ`, where `F_p` spans the steering vector toward the
//! scatterer and its angle derivative and `B_p` is a 2×2 Hermitian PSD block.
//! This crate evaluates the Fisher information on
//! `[Re h₁, Im h₁, τ₁, θ_T, θ_R]`, reduces it to the squared position error
//! bound (SPEB), and minimizes the SPEB over `B` subject to a total power
//! budget.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what every tolerance in the
//! test suite assumes.
//!
//! ```
//! use bistatic_core::{optimize, OptOptions, Scenario64};
//!
//! let scenario = Scenario64::reference();
//! let result = optimize(&scenario, &OptOptions::default(), None).unwrap();
//! assert!(result.converged);
//! assert!(result.peb() > 0.0);
//! ```

pub mod array;
pub mod covariance;
pub mod error;
pub mod fisher;
pub mod geometry;
pub mod linalg;
pub mod num;
pub mod opt;
pub mod scenario;
pub mod sweep;
pub mod validate;

pub use array::{build_uca, narrowband_steering, steering, ArrayModel, SteeringPair};
pub use covariance::{BeamCovariance, HermitianBlock};
pub use error::{Error, Result};
pub use fisher::{
    fim_entrywise, fim_from_derivatives, fim_xform, pilots_from_covariance, precoder, speb, speb_full_fim,
    speb_known_gain, speb_known_gain_projected, FisherBundle, LinkModel,
};
pub use geometry::{derive_geometry, polar_units, GeometryState, Position2D};
pub use num::{Cplx, Real, SPEED_OF_LIGHT};
pub use opt::{
    default_initial_covariance, kkt_residual, monopulse_candidate, monopulse_candidate_tilted, optimize,
    project_feasible, rank_profile, speb_gradient, BlockMode, OptOptions, OptResult, Tilt,
};
pub use scenario::{reference, subcarrier_offsets, Scenario, ScenarioParams};
pub use sweep::{
    channel_gain, peb_map, power_share_map, role_map, write_map, CellStatus, GainModel, GridSpec, MapKind,
    MapOptions, MapResult, RoleChoice,
};

pub type Position = Position2D<f64>;
pub type Scenario64 = Scenario<f64>;
pub type ScenarioParams64 = ScenarioParams<f64>;
pub type BeamCovariance64 = BeamCovariance<f64>;
pub type HermitianBlock64 = HermitianBlock<f64>;
pub type FisherBundle64 = FisherBundle<f64>;
pub type OptOptions64 = OptOptions<f64>;
pub type OptResult64 = OptResult<f64>;
pub type GridSpec64 = GridSpec<f64>;
pub type MapOptions64 = MapOptions<f64>;
pub type MapResult64 = MapResult<f64>;

//! Scatterer-position sweeps: PEB maps, power-share maps, rank regions and
//! transmit/receive role selection, plus their CSV/JSON export.
//!
//! Rows are processed in parallel; cells within a row run left to right and
//! warm-start from their left neighbour, so results do not depend on thread
//! scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::BeamCovariance;
use crate::error::{Error, Result};
use crate::geometry::Position2D;
use crate::num::Real;
use crate::opt::{optimize, OptOptions, OptResult};
use crate::scenario::{reference, Scenario};

pub const MAP_SCHEMA_VERSION: u32 = 1;

/// `|h₁| = coefficient · λ / (4π d_TS d_SR)`; the coefficient is `√RCS/√(4π)`
/// in meters (0.1 m for an RCS of `0.01 m²·4π`).
pub fn channel_gain<T: Real>(d_ts: T, d_sr: T, wavelength: T, coefficient: T) -> Result<T> {
    if !(d_ts > T::zero() && d_sr > T::zero()) {
        return Err(Error::DegenerateGeometry("zero propagation distance".into()));
    }
    Ok(coefficient * wavelength / (T::lit(4.0) * T::PI() * d_ts * d_sr))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainModel<T> {
    /// Meters; see [`channel_gain`].
    pub rcs_coefficient: T,
    /// Phase of `h₁`, radians.
    pub phase: T,
}

impl<T: Real> Default for GainModel<T> {
    fn default() -> Self {
        Self {
            rcs_coefficient: T::lit(reference::RCS_COEFFICIENT_M),
            phase: T::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
    pub nx: usize,
    pub ny: usize,
    /// Cells closer than this to either node are skipped, meters.
    pub exclusion_radius: T,
    /// Cells closer than this to the baseline segment are skipped, meters.
    pub baseline_band: T,
}

impl<T: Real> Default for GridSpec<T> {
    fn default() -> Self {
        Self::square(T::lit(40.0), 41)
    }
}

impl<T: Real> GridSpec<T> {
    /// `[−half, half]²` sampled `n × n`.
    pub fn square(half: T, n: usize) -> Self {
        Self {
            x_min: -half,
            x_max: half,
            y_min: -half,
            y_max: half,
            nx: n,
            ny: n,
            exclusion_radius: T::lit(0.5),
            baseline_band: T::lit(0.05),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidGrid("grid needs at least 2 points per axis".into()));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::InvalidGrid("grid bounds must be ordered".into()));
        }
        if !(self.exclusion_radius >= T::zero() && self.baseline_band >= T::zero()) {
            return Err(Error::InvalidGrid("exclusion distances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn x(&self, ix: usize) -> T {
        self.x_min + (self.x_max - self.x_min) * T::from_count(ix) / T::from_count(self.nx - 1)
    }

    pub fn y(&self, iy: usize) -> T {
        self.y_min + (self.y_max - self.y_min) * T::from_count(iy) / T::from_count(self.ny - 1)
    }

    pub fn point(&self, ix: usize, iy: usize) -> Position2D<T> {
        Position2D::new(self.x(ix), self.y(iy))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Near a node or on the baseline segment between `p_t` and `p_r`.
    pub fn is_excluded(&self, p_t: &Position2D<T>, p_r: &Position2D<T>, p: &Position2D<T>) -> bool {
        if p.distance(p_t) < self.exclusion_radius || p.distance(p_r) < self.exclusion_radius {
            return true;
        }
        let (dx, dy) = (p_r.x - p_t.x, p_r.y - p_t.y);
        let len_sq = dx * dx + dy * dy;
        if len_sq == T::zero() {
            return false;
        }
        let t = ((p.x - p_t.x) * dx + (p.y - p_t.y) * dy) / len_sq;
        if t < T::zero() || t > T::one() {
            return false;
        }
        let foot = Position2D::new(p_t.x + t * dx, p_t.y + t * dy);
        p.distance(&foot) < self.baseline_band
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    ExcludedGeometry,
    SingularEfim,
    NonConvergence,
}

impl CellStatus {
    pub fn code(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::ExcludedGeometry => "excluded-geometry",
            CellStatus::SingularEfim => "singular-EFIM",
            CellStatus::NonConvergence => "non-convergence",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoleChoice {
    /// The configured transmitter should transmit.
    Forward,
    /// Swapping roles gives the lower bound.
    Reverse,
    /// Both directions perform the same.
    Tie,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Peb,
    Power,
    Role,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::Peb => "peb",
            MapKind::Power => "power",
            MapKind::Role => "role",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapOptions<T> {
    pub solver: OptOptions<T>,
    pub gain: GainModel<T>,
    /// Cells whose final KKT residual exceeds this are reported as
    /// non-converged.
    pub kkt_accept: T,
    pub warm_start: bool,
    /// Relative SPEB difference below which both role assignments tie.
    pub tie_tolerance: T,
}

impl<T: Real> Default for MapOptions<T> {
    fn default() -> Self {
        Self {
            solver: OptOptions::default(),
            gain: GainModel::default(),
            kkt_accept: T::lit(1e-6),
            warm_start: true,
            tie_tolerance: T::lit(1e-9),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult<T> {
    pub x: T,
    pub y: T,
    pub status: CellStatus,
    /// NaN unless `status` is `Ok`.
    pub peb: T,
    pub power_share: T,
    pub rank1_optimal: bool,
    pub rank_profile: Vec<u8>,
    pub iterations: usize,
    pub kkt_residual: T,
    /// Role maps only: PEB with transmit and receive roles swapped.
    pub peb_reverse: Option<T>,
    pub role: Option<RoleChoice>,
}

impl<T: Real> CellResult<T> {
    fn blank(p: Position2D<T>, status: CellStatus) -> Self {
        Self {
            x: p.x,
            y: p.y,
            status,
            peb: T::nan(),
            power_share: T::nan(),
            rank1_optimal: false,
            rank_profile: vec![],
            iterations: 0,
            kkt_residual: T::nan(),
            peb_reverse: None,
            role: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.status == CellStatus::Ok && self.peb.is_finite()
    }
}

/// Scenario summary written next to map outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEcho {
    pub tx_position_m: [f64; 2],
    pub rx_position_m: [f64; 2],
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub carrier_hz: f64,
    pub subcarrier_offsets_hz: Vec<f64>,
    pub noise_variance_watts: f64,
    pub power_budget_watts: f64,
    pub narrowband: bool,
    pub symmetric: bool,
}

impl ScenarioEcho {
    pub fn of<T: Real>(s: &Scenario<T>) -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            tx_position_m: [s.p_t.x.as_f64(), s.p_t.y.as_f64()],
            rx_position_m: [s.p_r.x.as_f64(), s.p_r.y.as_f64()],
            tx_elements: s.n_t(),
            rx_elements: s.n_r(),
            carrier_hz: s.omega_carrier.as_f64() / tau,
            subcarrier_offsets_hz: s.subcarrier_offsets.iter().map(|w| w.as_f64() / tau).collect(),
            noise_variance_watts: s.sigma_eta_sq.as_f64(),
            power_budget_watts: s.power_budget.as_f64(),
            narrowband: s.narrowband,
            symmetric: s.symmetric,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub schema_version: u32,
    pub crate_version: String,
    pub kind: MapKind,
    pub scenario: ScenarioEcho,
    pub reverse_scenario: Option<ScenarioEcho>,
    pub grid: GridSpec<f64>,
    pub solver: OptOptions<f64>,
    pub rcs_coefficient_m: f64,
    pub channel_phase_rad: f64,
    pub kkt_threshold: f64,
    pub warm_start: bool,
    pub finite_cells: usize,
    pub total_cells: usize,
    pub total_iterations: usize,
    pub unix_timestamp_s: u64,
}

#[derive(Clone, Debug)]
pub struct MapResult<T> {
    pub grid: GridSpec<T>,
    /// Row-major: `cells[iy * nx + ix]`.
    pub cells: Vec<CellResult<T>>,
    pub metadata: MapMetadata,
}

impl<T: Real> MapResult<T> {
    pub fn cell(&self, ix: usize, iy: usize) -> &CellResult<T> {
        &self.cells[iy * self.grid.nx + ix]
    }

    pub fn finite_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| c.is_finite()).count() as f64 / self.cells.len() as f64
    }

    /// Cells where the configured transmitter should keep transmitting.
    pub fn forward_count(&self) -> usize {
        self.cells.iter().filter(|c| c.role == Some(RoleChoice::Forward)).count()
    }

    pub fn finite_power_shares(&self) -> impl Iterator<Item = T> + '_ {
        self.cells.iter().filter(|c| c.is_finite()).map(|c| c.power_share)
    }
}

fn grid_to_f64<T: Real>(g: &GridSpec<T>) -> GridSpec<f64> {
    GridSpec {
        x_min: g.x_min.as_f64(),
        x_max: g.x_max.as_f64(),
        y_min: g.y_min.as_f64(),
        y_max: g.y_max.as_f64(),
        nx: g.nx,
        ny: g.ny,
        exclusion_radius: g.exclusion_radius.as_f64(),
        baseline_band: g.baseline_band.as_f64(),
    }
}

fn opts_to_f64<T: Real>(o: &OptOptions<T>) -> OptOptions<f64> {
    OptOptions {
        max_iters: o.max_iters,
        step_init: o.step_init.as_f64(),
        armijo_shrink: o.armijo_shrink.as_f64(),
        armijo_sufficient_decrease: o.armijo_sufficient_decrease.as_f64(),
        grad_tol: o.grad_tol.as_f64(),
        psd_tol: o.psd_tol.as_f64(),
        rank_tol: o.rank_tol.as_f64(),
        max_backtracks: o.max_backtracks,
    }
}

/// Outcome of one optimization at one grid point.
enum PointOutcome<T> {
    Solved(OptResult<T>),
    Failed(CellStatus),
}

fn solve_point<T: Real>(
    base: &Scenario<T>,
    p: Position2D<T>,
    opts: &MapOptions<T>,
    warm: Option<&BeamCovariance<T>>,
) -> PointOutcome<T> {
    let scenario = match base.retarget(p, &opts.gain) {
        Ok(s) => s,
        Err(_) => return PointOutcome::Failed(CellStatus::ExcludedGeometry),
    };
    match optimize(&scenario, &opts.solver, warm) {
        Ok(res) if res.kkt_residual <= opts.kkt_accept && res.speb.is_finite() => PointOutcome::Solved(res),
        Ok(_) => PointOutcome::Failed(CellStatus::NonConvergence),
        Err(Error::DegenerateGeometry(_)) => PointOutcome::Failed(CellStatus::ExcludedGeometry),
        Err(_) => PointOutcome::Failed(CellStatus::SingularEfim),
    }
}

fn fill_cell<T: Real>(cell: &mut CellResult<T>, res: &OptResult<T>) {
    cell.status = CellStatus::Ok;
    cell.peb = res.peb();
    cell.power_share = res.power_share_toward_target;
    cell.rank1_optimal = res.is_rank_one();
    cell.rank_profile = res.rank_profile.clone();
    cell.iterations = res.iterations;
    cell.kkt_residual = res.kkt_residual;
}

fn run_rows<T: Real, F>(grid: &GridSpec<T>, row: F) -> Vec<CellResult<T>>
where
    F: Fn(usize) -> Vec<CellResult<T>> + Sync + Send,
{
    (0..grid.ny)
        .into_par_iter()
        .map(row)
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn sweep_single<T: Real>(base: &Scenario<T>, grid: &GridSpec<T>, opts: &MapOptions<T>, kind: MapKind) -> Result<MapResult<T>> {
    grid.validate()?;
    base.validate()?;
    opts.solver.validate()?;
    let cells = run_rows(grid, |iy| {
        let mut warm: Option<BeamCovariance<T>> = None;
        (0..grid.nx)
            .map(|ix| {
                let p = grid.point(ix, iy);
                if grid.is_excluded(&base.p_t, &base.p_r, &p) {
                    return CellResult::blank(p, CellStatus::ExcludedGeometry);
                }
                let start = if opts.warm_start { warm.as_ref() } else { None };
                match solve_point(base, p, opts, start) {
                    PointOutcome::Solved(res) => {
                        let mut cell = CellResult::blank(p, CellStatus::Ok);
                        fill_cell(&mut cell, &res);
                        warm = Some(res.b_opt);
                        cell
                    }
                    PointOutcome::Failed(status) => CellResult::blank(p, status),
                }
            })
            .collect()
    });
    let metadata = metadata(base, None, grid, opts, kind, &cells);
    Ok(MapResult { grid: grid.clone(), cells, metadata })
}

fn metadata<T: Real>(
    base: &Scenario<T>,
    reverse: Option<&Scenario<T>>,
    grid: &GridSpec<T>,
    opts: &MapOptions<T>,
    kind: MapKind,
    cells: &[CellResult<T>],
) -> MapMetadata {
    MapMetadata {
        schema_version: MAP_SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        kind,
        scenario: ScenarioEcho::of(base),
        reverse_scenario: reverse.map(ScenarioEcho::of),
        grid: grid_to_f64(grid),
        solver: opts_to_f64(&opts.solver),
        rcs_coefficient_m: opts.gain.rcs_coefficient.as_f64(),
        channel_phase_rad: opts.gain.phase.as_f64(),
        kkt_threshold: opts.kkt_accept.as_f64(),
        warm_start: opts.warm_start,
        finite_cells: cells.iter().filter(|c| c.is_finite()).count(),
        total_cells: cells.len(),
        total_iterations: cells.iter().map(|c| c.iterations).sum(),
        unix_timestamp_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    }
}

/// Optimized PEB at every grid point.
pub fn peb_map<T: Real>(base: &Scenario<T>, grid: &GridSpec<T>, opts: &MapOptions<T>) -> Result<MapResult<T>> {
    sweep_single(base, grid, opts, MapKind::Peb)
}

/// Share of the budget sent along the steering vector, `Σ_p b_{p,11}/P_T`,
/// and rank-1 optimality at every grid point.
pub fn power_share_map<T: Real>(base: &Scenario<T>, grid: &GridSpec<T>, opts: &MapOptions<T>) -> Result<MapResult<T>> {
    sweep_single(base, grid, opts, MapKind::Power)
}

/// Compares both transmit/receive role assignments at every grid point.
///
/// `forward` and `reverse` must describe the same two nodes with roles
/// exchanged. The stored PEB is the forward one.
pub fn role_map<T: Real>(
    forward: &Scenario<T>,
    reverse: &Scenario<T>,
    grid: &GridSpec<T>,
    opts: &MapOptions<T>,
) -> Result<MapResult<T>> {
    grid.validate()?;
    forward.validate()?;
    reverse.validate()?;
    opts.solver.validate()?;
    let same_nodes = forward.p_t == reverse.p_r && forward.p_r == reverse.p_t;
    if !same_nodes {
        return Err(Error::InvalidScenario("role map needs the same two nodes with swapped roles".into()));
    }
    let cells = run_rows(grid, |iy| {
        let mut warm_fwd: Option<BeamCovariance<T>> = None;
        let mut warm_rev: Option<BeamCovariance<T>> = None;
        (0..grid.nx)
            .map(|ix| {
                let p = grid.point(ix, iy);
                if grid.is_excluded(&forward.p_t, &forward.p_r, &p) {
                    return CellResult::blank(p, CellStatus::ExcludedGeometry);
                }
                let fwd = solve_point(forward, p, opts, if opts.warm_start { warm_fwd.as_ref() } else { None });
                let rev = solve_point(reverse, p, opts, if opts.warm_start { warm_rev.as_ref() } else { None });
                match (fwd, rev) {
                    (PointOutcome::Solved(f), PointOutcome::Solved(r)) => {
                        let mut cell = CellResult::blank(p, CellStatus::Ok);
                        fill_cell(&mut cell, &f);
                        cell.iterations += r.iterations;
                        cell.kkt_residual = cell.kkt_residual.max(r.kkt_residual);
                        cell.peb_reverse = Some(r.peb());
                        let scale = f.speb.max(r.speb);
                        cell.role = Some(if (f.speb - r.speb).abs() <= opts.tie_tolerance * scale {
                            RoleChoice::Tie
                        } else if f.speb < r.speb {
                            RoleChoice::Forward
                        } else {
                            RoleChoice::Reverse
                        });
                        warm_fwd = Some(f.b_opt);
                        warm_rev = Some(r.b_opt);
                        cell
                    }
                    (PointOutcome::Failed(s), _) | (_, PointOutcome::Failed(s)) => CellResult::blank(p, s),
                }
            })
            .collect()
    });
    let metadata = metadata(forward, Some(reverse), grid, opts, MapKind::Role, &cells);
    Ok(MapResult { grid: grid.clone(), cells, metadata })
}

/// 17 significant digits; `NaN` stays `NaN`.
pub fn format_number<T: Real>(v: T) -> String {
    let v = v.as_f64();
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Serialize)]
struct CsvRow {
    x: String,
    y: String,
    peb: String,
    power_share: String,
    rank1: String,
    role_flag: String,
    status: &'static str,
}

/// Writes `<stem>.csv` (one row per cell) and `<stem>.json` (metadata) into
/// `dir`, creating it if needed.
pub fn write_map<T: Real>(map: &MapResult<T>, dir: &Path, stem: &str) -> std::io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    for c in &map.cells {
        let ok = c.is_finite();
        w.serialize(CsvRow {
            x: format_number(c.x),
            y: format_number(c.y),
            peb: format_number(c.peb),
            power_share: format_number(c.power_share),
            rank1: if ok { (c.rank1_optimal as u8).to_string() } else { String::new() },
            role_flag: match c.role {
                Some(RoleChoice::Forward) => "1",
                Some(RoleChoice::Reverse) => "-1",
                Some(RoleChoice::Tie) => "0",
                None => "",
            }
            .to_string(),
            status: c.status.code(),
        })?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(&map.metadata).map_err(std::io::Error::other)?;
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn channel_gain_reference_value() {
        let lambda = crate::num::SPEED_OF_LIGHT / 3.8e9;
        let d = 200f64.sqrt();
        let g = channel_gain(d, d, lambda, 0.1).unwrap();
        assert!((g - 0.1 * lambda / (4.0 * PI * 200.0)).abs() < 1e-20);
        assert!((g - 3.139e-6).abs() < 1e-9);
        let g2 = channel_gain(2.0 * d, d, lambda, 0.1).unwrap();
        assert!((g2 / g - 0.5).abs() < 1e-15);
        let g3 = channel_gain(d, d, 2.0 * lambda, 0.1).unwrap();
        assert!((g3 / g - 2.0).abs() < 1e-15);
        assert!(matches!(channel_gain(0.0, d, lambda, 0.1), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn grid_points_and_exclusion() {
        let g = GridSpec::<f64>::default();
        assert_eq!(g.x(0), -40.0);
        assert_eq!(g.x(40), 40.0);
        assert_eq!(g.y(20), 0.0);
        let (pt, pr) = (Position2D::new(-10.0, 0.0), Position2D::new(10.0, 0.0));
        assert!(g.is_excluded(&pt, &pr, &Position2D::new(0.0, 0.0)));
        assert!(g.is_excluded(&pt, &pr, &Position2D::new(10.3, 0.2)));
        assert!(!g.is_excluded(&pt, &pr, &Position2D::new(20.0, 0.0)));
        assert!(!g.is_excluded(&pt, &pr, &Position2D::new(0.0, 0.2)));
        assert!(GridSpec::<f64> { nx: 1, ..Default::default() }.validate().is_err());
        assert!(GridSpec::<f64> { x_min: 50.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn number_format_has_seventeen_digits() {
        assert_eq!(format_number(0.1f64), "1.0000000000000001e-1");
        assert_eq!(format_number(f64::NAN), "NaN");
        let back: f64 = format_number(1.0f64 / 3.0).parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}

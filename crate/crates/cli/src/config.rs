//! TOML run configuration. Every physical key carries its unit in the name
//! and unknown keys are rejected, so a typo cannot silently fall back to a
//! default.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bistatic_core::{reference, GainModel, GridSpec, MapOptions, OptOptions, Position2D, ScenarioParams};
use serde::{Deserialize, Serialize};

/// Overrides `[output].directory` when set.
pub const OUTPUT_DIR_ENV: &str = "BISTATIC_OUTPUT_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub carrier_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub num_subcarriers: usize,
    /// Explicit baseband offsets; replaces the spacing/count grid when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcarrier_offsets_hz: Option<Vec<f64>>,
    pub symmetric: bool,
    pub narrowband: bool,
    pub tx_position_m: [f64; 2],
    pub rx_position_m: [f64; 2],
    pub target_position_m: [f64; 2],
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub tx_spacing_wavelengths: f64,
    pub rx_spacing_wavelengths: f64,
    pub tx_orientation_rad: f64,
    pub rx_orientation_rad: f64,
    pub noise_variance_watts: f64,
    pub power_budget_watts: f64,
    pub rcs_coefficient_m: f64,
    pub channel_phase_rad: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        use reference::*;
        Self {
            carrier_hz: CARRIER_HZ,
            subcarrier_spacing_hz: SUBCARRIER_SPACING_HZ,
            num_subcarriers: NUM_SUBCARRIERS,
            subcarrier_offsets_hz: None,
            symmetric: true,
            narrowband: true,
            tx_position_m: TX_POSITION_M,
            rx_position_m: RX_POSITION_M,
            target_position_m: TARGET_POSITION_M,
            tx_elements: TX_ELEMENTS,
            rx_elements: RX_ELEMENTS,
            tx_spacing_wavelengths: SPACING_WAVELENGTHS,
            rx_spacing_wavelengths: SPACING_WAVELENGTHS,
            tx_orientation_rad: 0.0,
            rx_orientation_rad: 0.0,
            noise_variance_watts: NOISE_VARIANCE_W,
            power_budget_watts: POWER_BUDGET_W,
            rcs_coefficient_m: RCS_COEFFICIENT_M,
            channel_phase_rad: 0.0,
        }
    }
}

impl ScenarioSection {
    pub fn gain(&self) -> GainModel<f64> {
        GainModel { rcs_coefficient: self.rcs_coefficient_m, phase: self.channel_phase_rad }
    }

    pub fn params(&self) -> ScenarioParams<f64> {
        let pos = |p: [f64; 2]| Position2D::new(p[0], p[1]);
        ScenarioParams {
            carrier_hz: self.carrier_hz,
            subcarrier_spacing_hz: self.subcarrier_spacing_hz,
            num_subcarriers: self.num_subcarriers,
            subcarrier_offsets_hz: self.subcarrier_offsets_hz.clone(),
            symmetric: self.symmetric,
            narrowband: self.narrowband,
            tx_position: pos(self.tx_position_m),
            rx_position: pos(self.rx_position_m),
            target_position: pos(self.target_position_m),
            tx_elements: self.tx_elements,
            rx_elements: self.rx_elements,
            tx_spacing_wavelengths: self.tx_spacing_wavelengths,
            rx_spacing_wavelengths: self.rx_spacing_wavelengths,
            tx_orientation: self.tx_orientation_rad,
            rx_orientation: self.rx_orientation_rad,
            noise_variance: self.noise_variance_watts,
            power_budget: self.power_budget_watts,
            gain: self.gain(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
    pub nx: usize,
    pub ny: usize,
    pub exclusion_radius_m: f64,
    pub baseline_band_m: f64,
    /// Points per axis used by `map --full-res`.
    pub full_res_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::<f64>::default();
        Self {
            x_min_m: g.x_min,
            x_max_m: g.x_max,
            y_min_m: g.y_min,
            y_max_m: g.y_max,
            nx: g.nx,
            ny: g.ny,
            exclusion_radius_m: g.exclusion_radius,
            baseline_band_m: g.baseline_band,
            full_res_points: 321,
        }
    }
}

impl GridSection {
    pub fn spec(&self, full_res: bool) -> GridSpec<f64> {
        let (nx, ny) = if full_res { (self.full_res_points, self.full_res_points) } else { (self.nx, self.ny) };
        GridSpec {
            x_min: self.x_min_m,
            x_max: self.x_max_m,
            y_min: self.y_min_m,
            y_max: self.y_max_m,
            nx,
            ny,
            exclusion_radius: self.exclusion_radius_m,
            baseline_band: self.baseline_band_m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub max_iters: usize,
    pub step_init: f64,
    pub armijo_shrink: f64,
    pub armijo_sufficient_decrease: f64,
    pub grad_tol: f64,
    pub psd_tol: f64,
    pub rank_tol: f64,
    pub max_backtracks: usize,
    /// Map cells above this KKT residual are reported as non-converged.
    pub kkt_accept: f64,
    pub warm_start: bool,
    pub tie_tolerance: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = OptOptions::<f64>::default();
        let m = MapOptions::<f64>::default();
        Self {
            max_iters: o.max_iters,
            step_init: o.step_init,
            armijo_shrink: o.armijo_shrink,
            armijo_sufficient_decrease: o.armijo_sufficient_decrease,
            grad_tol: o.grad_tol,
            psd_tol: o.psd_tol,
            rank_tol: o.rank_tol,
            max_backtracks: o.max_backtracks,
            kkt_accept: m.kkt_accept,
            warm_start: m.warm_start,
            tie_tolerance: m.tie_tolerance,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> OptOptions<f64> {
        OptOptions {
            max_iters: self.max_iters,
            step_init: self.step_init,
            armijo_shrink: self.armijo_shrink,
            armijo_sufficient_decrease: self.armijo_sufficient_decrease,
            grad_tol: self.grad_tol,
            psd_tol: self.psd_tol,
            rank_tol: self.rank_tol,
            max_backtracks: self.max_backtracks,
        }
    }

    pub fn map_options(&self, gain: GainModel<f64>) -> MapOptions<f64> {
        MapOptions {
            solver: self.options(),
            gain,
            kkt_accept: self.kkt_accept,
            warm_start: self.warm_start,
            tie_tolerance: self.tie_tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// `--out` wins, then the environment variable, then the config file.
    pub fn output_dir(&self, cli_override: Option<&Path>) -> PathBuf {
        if let Some(p) = cli_override {
            return p.to_path_buf();
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output.directory.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_constants() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        let s = c.scenario.params().build().unwrap();
        let r = bistatic_core::Scenario64::reference();
        assert_eq!(s, r);
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.scenario.subcarrier_offsets_hz = Some(vec![-2.4e6, 0.1, 2.4e6]);
        c.scenario.target_position_m = [1.0 / 3.0, -7.25];
        c.solver.grad_tol = 3.3e-9;
        c.output.formats = vec![OutputFormat::Json];
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::parse(&back.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[scenario]\ncarrier = 3.8e9\n").is_err());
        assert!(RunConfig::parse("[extra]\n").is_err());
        assert!(RunConfig::parse("[scenario]\ncarrier_hz = \"fast\"\n").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = RunConfig::parse("[scenario]\nrx_elements = 7\n[grid]\nnx = 11\n").unwrap();
        assert_eq!(c.scenario.rx_elements, 7);
        assert_eq!(c.scenario.tx_elements, 15);
        assert_eq!(c.grid.nx, 11);
        assert_eq!(c.grid.ny, 41);
    }
}

//! `bistatic`: optimize transmit beams at one scatterer position, sweep
//! bound maps over a grid, or run the self-check suite.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 infeasible or degenerate scenario, 4 non-convergence, 5 validation
//! failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bistatic_core::sweep::{format_number, ScenarioEcho};
use bistatic_core::validate::{run_validation, ValidationOptions};
use bistatic_core::{optimize, peb_map, power_share_map, role_map, write_map, Error, MapKind};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{OutputFormat, RunConfig};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "bistatic", version, about = "Position error bounds and optimal beams for bistatic MIMO-OFDM radar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the beam covariances for one scatterer position.
    OptimizePoint {
        /// TOML run configuration; built-in reference setup when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scatterer position `X,Y` in meters; defaults to the configured one.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        target: Option<(f64, f64)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the scatterer over the configured grid.
    Map {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use `grid.full_res_points` per axis instead of `nx × ny`.
        #[arg(long)]
        full_res: bool,
    },
    /// Run the self-check suite and print a scoreboard.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Peb,
    Power,
    Role,
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected X,Y but got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    let p = (num(x)?, num(y)?);
    if !(p.0.is_finite() && p.1.is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok(p)
}

/// Error with its exit code attached.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }

    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self::new(2, error)
    }

    fn io(error: impl Into<anyhow::Error>) -> Self {
        Self::new(1, error)
    }
}

fn classify(e: Error) -> Failure {
    let code = match e {
        Error::DegenerateGeometry(_) | Error::InfeasibleScenario(_) | Error::SingularEfim { .. } => 3,
        Error::InvalidArray(_)
        | Error::InvalidScenario(_)
        | Error::InvalidAlpha(_)
        | Error::InvalidGrid(_)
        | Error::DimensionMismatch { .. } => 2,
    };
    Failure::new(code, e)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(Failure::config),
        None => Ok(RunConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::OptimizePoint { config, target, out } => cmd_optimize_point(config.as_deref(), target, out.as_deref()),
        Command::Map { config, kind, out, full_res } => cmd_map(config.as_deref(), kind, out.as_deref(), full_res),
        Command::Validate { config, seed } => cmd_validate(config.as_deref(), seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[derive(Serialize)]
struct BlockRecord {
    subcarrier_offset_hz: f64,
    b11: f64,
    b22: f64,
    b21_re: f64,
    b21_im: f64,
    rank: u8,
}

#[derive(Serialize)]
struct PointReport {
    schema_version: u32,
    crate_version: &'static str,
    target_m: [f64; 2],
    converged: bool,
    iterations: usize,
    kkt_residual: f64,
    peb_m: f64,
    speb_m2: f64,
    speb_known_gain_m2: f64,
    power_share_toward_target: f64,
    re_b21_residual_watts: f64,
    rank_profile: Vec<u8>,
    beam_covariance: Vec<BlockRecord>,
    scenario: ScenarioEcho,
}

fn cmd_optimize_point(config: Option<&Path>, target: Option<(f64, f64)>, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let mut section = cfg.scenario.clone();
    if let Some((x, y)) = target {
        section.target_position_m = [x, y];
    }
    let scenario = section.params().build().map_err(classify)?;
    let res = optimize(&scenario, &cfg.solver.options(), None).map_err(classify)?;
    let known = bistatic_core::LinkModel::new(&scenario)
        .and_then(|m| m.bundle(&res.b_opt))
        .map(|b| b.speb_known_gain)
        .map_err(classify)?;

    let tau = std::f64::consts::TAU;
    let report = PointReport {
        schema_version: SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION"),
        target_m: section.target_position_m,
        converged: res.converged,
        iterations: res.iterations,
        kkt_residual: res.kkt_residual,
        peb_m: res.peb(),
        speb_m2: res.speb,
        speb_known_gain_m2: known,
        power_share_toward_target: res.power_share_toward_target,
        re_b21_residual_watts: res.re_b21_residual(),
        rank_profile: res.rank_profile.clone(),
        beam_covariance: res
            .b_opt
            .blocks
            .iter()
            .zip(&scenario.subcarrier_offsets)
            .zip(&res.rank_profile)
            .map(|((b, w), &rank)| BlockRecord {
                subcarrier_offset_hz: w / tau,
                b11: b.b11,
                b22: b.b22,
                b21_re: b.b21.re,
                b21_im: b.b21.im,
                rank,
            })
            .collect(),
        scenario: ScenarioEcho::of(&scenario),
    };

    println!("target            ({}, {}) m", report.target_m[0], report.target_m[1]);
    println!("PEB               {} m", format_number(report.peb_m));
    println!("SPEB              {} m^2", format_number(report.speb_m2));
    println!("SPEB, known gain  {} m^2", format_number(report.speb_known_gain_m2));
    println!("power share       {}", format_number(report.power_share_toward_target));
    println!("rank profile      {:?}", report.rank_profile);
    println!("max |Re b21|      {} W", format_number(report.re_b21_residual_watts));
    println!("iterations        {}", report.iterations);
    println!("KKT residual      {}", format_number(report.kkt_residual));
    println!("converged         {}", report.converged);

    let dir = cfg.output_dir(out);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::io)?;
    let path = dir.join("optimize_point.json");
    let json = serde_json::to_string_pretty(&report).map_err(Failure::io)?;
    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display())).map_err(Failure::io)?;
    println!("wrote             {}", path.display());

    if !res.converged {
        return Err(Failure::new(4, anyhow::anyhow!("solver stopped before reaching the KKT tolerance")));
    }
    Ok(())
}

fn cmd_map(config: Option<&Path>, kind: Kind, out: Option<&Path>, full_res: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let scenario = cfg.scenario.params().build().map_err(classify)?;
    let grid = cfg.grid.spec(full_res);
    let opts = cfg.solver.map_options(cfg.scenario.gain());
    let map = match kind {
        Kind::Peb => peb_map(&scenario, &grid, &opts),
        Kind::Power => power_share_map(&scenario, &grid, &opts),
        Kind::Role => role_map(&scenario, &scenario.reversed(), &grid, &opts),
    }
    .map_err(classify)?;

    let stem = format!("{}_map", map.metadata.kind.name());
    let dir = cfg.output_dir(out);
    let (csv_path, json_path) = write_map(&map, &dir, &stem)
        .with_context(|| format!("writing map into {}", dir.display()))
        .map_err(Failure::io)?;
    if !cfg.output.formats.contains(&OutputFormat::Csv) {
        std::fs::remove_file(&csv_path).map_err(Failure::io)?;
    }
    if !cfg.output.formats.contains(&OutputFormat::Json) {
        std::fs::remove_file(&json_path).map_err(Failure::io)?;
    }

    let finite = map.finite_fraction();
    println!(
        "{} map: {}×{} cells, {:.1}% finite, {} solver iterations",
        map.metadata.kind.name(),
        grid.nx,
        grid.ny,
        100.0 * finite,
        map.metadata.total_iterations
    );
    if matches!(map.metadata.kind, MapKind::Power) {
        let shares: Vec<f64> = map.finite_power_shares().collect();
        let lo = shares.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = shares.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("power share range [{lo:.4}, {hi:.4}]");
    }
    if matches!(map.metadata.kind, MapKind::Role) {
        println!("forward role preferred in {} cells", map.forward_count());
    }
    println!("wrote {}", dir.display());
    if finite < 0.9 {
        return Err(Failure::new(4, anyhow::anyhow!("only {:.1}% of cells are finite", 100.0 * finite)));
    }
    Ok(())
}

fn cmd_validate(config: Option<&Path>, seed: u64) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let scenario = cfg.scenario.params().build().map_err(classify)?;
    let opts = ValidationOptions { seed, solver: cfg.solver.options(), ..Default::default() };
    let report = run_validation(&scenario, &opts);
    for c in &report.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = report.failures().count();
    println!("{} of {} checks passed", report.checks.len() - failed, report.checks.len());
    if failed > 0 {
        return Err(Failure::new(5, anyhow::anyhow!("{failed} validation check(s) failed")));
    }
    Ok(())
}

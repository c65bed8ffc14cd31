//! Self-check suite run by `bistatic validate`: cross-checks the FIM
//! constructions, the analytical gradient and the structural properties of
//! optimal solutions for one configured scenario.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::covariance::{BeamCovariance, HermitianBlock};
use crate::fisher::{fim_from_derivatives, pilots_from_covariance, FisherBundle, LinkModel};
use crate::linalg::rel_frobenius;
use crate::num::{cis, cplx, Real};
use crate::opt::{optimize, BlockMode, OptOptions};
use crate::scenario::Scenario;

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Clone, Debug)]
pub struct ValidationOptions {
    pub seed: u64,
    pub random_points: usize,
    pub solver: OptOptions<f64>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { seed: 0x5eed, random_points: 50, solver: OptOptions::default() }
    }
}

/// Random feasible covariance with total power drawn from `(0.2, 1]·P_T`.
/// Blocks are sums of two random outer products, so they are full rank
/// almost surely.
pub fn random_feasible_covariance<R: Rng>(rng: &mut R, n: usize, power: f64, mode: BlockMode) -> BeamCovariance<f64> {
    let mut b = BeamCovariance::new(
        (0..n)
            .map(|_| match mode {
                BlockMode::Scalar => HermitianBlock::diag(rng.gen_range(0.05..1.0), 0.0),
                BlockMode::Full => {
                    let mut v = || [cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))];
                    HermitianBlock::outer(v()).add(&HermitianBlock::outer(v()))
                }
            })
            .collect(),
    );
    let target = power * rng.gen_range(0.2..1.0);
    b = b.scale(target / b.trace());
    b
}

/// Random Hermitian direction with unit Frobenius norm.
pub fn random_direction<R: Rng>(rng: &mut R, n: usize, mode: BlockMode) -> BeamCovariance<f64> {
    let d = BeamCovariance::new(
        (0..n)
            .map(|_| match mode {
                BlockMode::Scalar => HermitianBlock::diag(rng.gen_range(-1.0..1.0), 0.0),
                BlockMode::Full => HermitianBlock::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                ),
            })
            .collect(),
    );
    d.scale(1.0 / d.norm())
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn max_rel<T: Real>(a: T, b: T) -> f64 {
    let (a, b) = (a.as_f64(), b.as_f64());
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn run_validation(scenario: &Scenario<f64>, opts: &ValidationOptions) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = vec![];
    checks.push(check_declared_symmetry(scenario));

    let model = match LinkModel::new(scenario) {
        Ok(m) => m,
        Err(e) => {
            checks.push(outcome("scenario", false, e.to_string()));
            return ValidationReport { schema_version: 1, seed: opts.seed, checks };
        }
    };
    let mode = BlockMode::for_transmitter(model.n_t);
    let n = model.num_subcarriers();
    let power = model.power_budget;
    let samples: Vec<_> = (0..opts.random_points).map(|_| random_feasible_covariance(&mut rng, n, power, mode)).collect();

    checks.push(check_dual_path(scenario, &model, &samples));
    checks.push(check_block_sparsity(&model, &samples));
    checks.push(check_gradient(&model, &samples, mode, &mut rng));
    checks.push(check_convexity(&model, &samples));
    checks.push(check_scaling(scenario, &model, &samples, &mut rng));

    match optimize(scenario, &opts.solver, None) {
        Ok(res) => {
            checks.push(outcome(
                "optimizer convergence",
                res.converged,
                format!("{} iterations, KKT residual {:.3e}", res.iterations, res.kkt_residual),
            ));
            checks.push(check_structure(scenario, &res.b_opt));
            checks.push(check_known_gain(&model, &res.b_opt, mode));
        }
        Err(e) => checks.push(outcome("optimizer convergence", false, e.to_string())),
    }
    ValidationReport { schema_version: 1, seed: opts.seed, checks }
}

fn check_declared_symmetry(s: &Scenario<f64>) -> CheckOutcome {
    let actual = s.offsets_are_symmetric();
    let passed = !s.symmetric || actual;
    let detail = match (s.symmetric, actual) {
        (true, false) => "scenario is declared symmetric but some subcarrier has no mirror frequency".to_string(),
        (true, true) => "every subcarrier has a mirror frequency".to_string(),
        (false, _) => "symmetry not declared".to_string(),
    };
    outcome("declared subcarrier symmetry", passed, detail)
}

fn check_dual_path(s: &Scenario<f64>, model: &LinkModel<f64>, samples: &[BeamCovariance<f64>]) -> CheckOutcome {
    let mut worst = 0.0f64;
    for b in samples {
        let xform = model.fim(b);
        let entry = match crate::fisher::entrywise_fim(model, b) {
            Ok(j) => j,
            Err(e) => return outcome("FIM dual-path agreement", false, e.to_string()),
        };
        let direct = match pilots_from_covariance(s, b).and_then(|p| fim_from_derivatives(s, &p)) {
            Ok(j) => j,
            Err(e) => return outcome("FIM dual-path agreement", false, e.to_string()),
        };
        worst = worst.max(rel_frobenius(&entry, &xform)).max(rel_frobenius(&entry, &direct));
    }
    outcome("FIM dual-path agreement", worst < 1e-8, format!("max relative Frobenius error {worst:.3e}"))
}

fn check_block_sparsity(model: &LinkModel<f64>, samples: &[BeamCovariance<f64>]) -> CheckOutcome {
    let mut worst = 0.0f64;
    for b in samples {
        let j = model.fim(b);
        let scale = j.max_abs();
        for r in 0..4 {
            worst = worst.max(j[(r, 4)].abs() / scale);
        }
    }
    outcome("AoA decoupling (j15 = j25 = j35 = j45 = 0)", worst == 0.0, format!("max |j_k5|/max|J| {worst:.3e}"))
}

fn check_gradient<R: Rng>(model: &LinkModel<f64>, samples: &[BeamCovariance<f64>], mode: BlockMode, rng: &mut R) -> CheckOutcome {
    let h = 1e-6 * model.power_budget;
    let mut worst = 0.0f64;
    let mut evaluated = 0;
    for b in samples {
        let Ok((_, g)) = model.speb_with_gradient(b) else { continue };
        let d = random_direction(rng, b.len(), mode);
        let (Ok(fp), Ok(fm)) = (model.speb(&b.axpy(h, &d)), model.speb(&b.axpy(-h, &d))) else { continue };
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max(max_rel(fd, g.inner(&d)));
        evaluated += 1;
    }
    outcome(
        "analytical gradient vs finite differences",
        evaluated > 0 && worst < 1e-5,
        format!("{evaluated} points, max relative error {worst:.3e}"),
    )
}

fn check_convexity(model: &LinkModel<f64>, samples: &[BeamCovariance<f64>]) -> CheckOutcome {
    let mut worst = f64::NEG_INFINITY;
    let mut evaluated = 0;
    for pair in samples.windows(2) {
        let (Ok(f1), Ok(f2)) = (model.speb(&pair[0]), model.speb(&pair[1])) else { continue };
        for lambda in [0.25, 0.5, 0.75] {
            let mix = pair[0].scale(lambda).axpy(1.0 - lambda, &pair[1]);
            let Ok(fm) = model.speb(&mix) else { continue };
            let chord = lambda * f1 + (1.0 - lambda) * f2;
            worst = worst.max((fm - chord) / chord);
            evaluated += 1;
        }
    }
    outcome(
        "convexity (Jensen probe)",
        evaluated > 0 && worst <= 1e-9,
        format!("{evaluated} probes, max (f(mix) − chord)/chord {worst:.3e}"),
    )
}

fn check_scaling<R: Rng>(s: &Scenario<f64>, model: &LinkModel<f64>, samples: &[BeamCovariance<f64>], rng: &mut R) -> CheckOutcome {
    let mut worst = 0.0f64;
    for b in samples.iter().take(10) {
        let Ok(f) = model.speb(b) else { continue };
        let t = rng.gen_range(1.5..4.0);
        if let Ok(ft) = model.speb(&b.scale(1.0 / t)) {
            worst = worst.max(max_rel(ft, f * t));
        }
        let mut rotated = s.clone();
        rotated.h1 = s.h1 * cis(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        if let Ok(fr) = LinkModel::new(&rotated).and_then(|m| m.speb(b)) {
            worst = worst.max(max_rel(fr, f));
        }
    }
    outcome("power scaling and channel-phase invariance", worst < 1e-10, format!("max relative deviation {worst:.3e}"))
}

fn check_structure(s: &Scenario<f64>, b: &BeamCovariance<f64>) -> CheckOutcome {
    let name = "optimal beam structure";
    let pt = s.power_budget;
    let re_b21 = b.blocks.iter().fold(0.0f64, |m, x| m.max(x.b21.re.abs())) / pt;
    let unused = (pt - b.trace()).abs() / pt;
    let mut problems = vec![];
    if re_b21 >= 1e-7 {
        problems.push(format!("max |Re b21|/P_T = {re_b21:.3e}"));
    }
    if unused >= 1e-8 {
        problems.push(format!("unused power share {unused:.3e}"));
    }
    let (lo, hi) = s.outermost();
    if lo == hi {
        // A single subcarrier has no allocation structure to check.
    } else if s.narrowband && s.offsets_are_symmetric() {
        let inner = b
            .blocks
            .iter()
            .enumerate()
            .filter(|(p, _)| *p != lo && *p != hi)
            .fold(0.0f64, |m, (_, x)| m.max(x.b11.abs()))
            / pt;
        let b11_asym = (b.blocks[lo].b11 - b.blocks[hi].b11).abs() / pt;
        let im_sym = (b.blocks[lo].b21.im + b.blocks[hi].b21.im).abs() / pt;
        if inner >= 1e-6 {
            problems.push(format!("inner subcarriers carry b11/P_T up to {inner:.3e}"));
        }
        if b11_asym >= 1e-6 {
            problems.push(format!("outermost b11 differ by {b11_asym:.3e}·P_T"));
        }
        if im_sym >= 1e-6 {
            problems.push(format!("outermost Im b21 not antisymmetric ({im_sym:.3e}·P_T)"));
        }
    } else {
        // Wideband or asymmetric grid: only the trend toward higher
        // subcarriers is expected.
        let total: f64 = b.blocks.iter().map(|x| x.b11).sum();
        let mean_abs = s.subcarrier_offsets.iter().map(|w| w.abs()).sum::<f64>() / s.num_subcarriers() as f64;
        let weighted = b.blocks.iter().zip(&s.subcarrier_offsets).map(|(x, w)| x.b11 * w.abs()).sum::<f64>() / total;
        if total > 0.0 && weighted < mean_abs * (1.0 - 1e-9) {
            problems.push(format!(
                "power-weighted |ω| {weighted:.6e} below grid mean {mean_abs:.6e} (higher subcarriers should be favoured)"
            ));
        }
    }
    if problems.is_empty() {
        outcome(name, true, format!("|Re b21|/P_T {re_b21:.1e}, unused power {unused:.1e}"))
    } else {
        outcome(name, false, problems.join("; "))
    }
}

fn check_known_gain(model: &LinkModel<f64>, b_opt: &BeamCovariance<f64>, mode: BlockMode) -> CheckOutcome {
    let name = "known channel gain gives no benefit at the optimum";
    let bundle: FisherBundle<f64> = match model.bundle(b_opt) {
        Ok(x) => x,
        Err(e) => return outcome(name, false, e.to_string()),
    };
    let at_opt = max_rel(bundle.speb_known_gain, bundle.speb);
    let mut detail = format!("relative gap at optimum {at_opt:.3e}");
    let mut passed = at_opt < 1e-10;
    if mode == BlockMode::Full {
        // Introduce a real correlation on the fullest block.
        let (p, blk) = b_opt
            .blocks
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.det().total_cmp(&b.1.det()))
            .expect("non-empty covariance");
        let room = blk.det().max(0.0).sqrt();
        if room > 0.0 {
            let mut perturbed = b_opt.clone();
            perturbed.blocks[p].b21.re += 0.5 * room;
            if let Ok(pb) = model.bundle(&perturbed) {
                let strictly = pb.speb_known_gain < pb.speb;
                detail.push_str(&format!(
                    "; with Re b21 ≠ 0: known-gain {:.6e} vs {:.6e}",
                    pb.speb_known_gain, pb.speb
                ));
                passed &= strictly;
            }
        } else {
            detail.push_str("; optimum is rank-1 on every block, perturbation skipped");
        }
    }
    outcome(name, passed, detail)
}

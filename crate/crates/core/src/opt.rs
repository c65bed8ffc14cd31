//! SPEB minimization over block-diagonal PSD beam covariances under a total
//! power budget.
//!
//! The objective is convex in `B`. It is minimized by projected gradient
//! descent: analytical gradient, Euclidean projection onto
//! `{B ⪰ 0, tr B ≤ P_T}`, Barzilai-Borwein trial steps and monotone Armijo
//! backtracking along the projection arc.

use serde::{Deserialize, Serialize};

use crate::covariance::{BeamCovariance, HermitianBlock};
use crate::error::{Error, Result};
use crate::fisher::LinkModel;
use crate::num::{cplx, Real};
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptOptions<T> {
    pub max_iters: usize,
    /// First trial step, in units of `P_T / ‖G₀‖`.
    pub step_init: T,
    pub armijo_shrink: T,
    pub armijo_sufficient_decrease: T,
    /// Stop once the scale-free projected-gradient residual drops below this.
    pub grad_tol: T,
    /// Eigenvalue floor (relative to the budget) for accepting a warm start.
    pub psd_tol: T,
    /// Relative eigenvalue threshold for [`rank_profile`].
    pub rank_tol: T,
    pub max_backtracks: usize,
}

impl<T: Real> Default for OptOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            step_init: T::one(),
            armijo_shrink: T::lit(0.5),
            armijo_sufficient_decrease: T::lit(1e-4),
            grad_tol: T::lit(1e-7),
            psd_tol: T::lit(1e-10),
            rank_tol: T::lit(1e-4),
            max_backtracks: 60,
        }
    }
}

impl<T: Real> OptOptions<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(format!("solver options: {m}")));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.step_init > T::zero()) {
            return bad("step_init must be positive");
        }
        if !(self.armijo_shrink > T::zero() && self.armijo_shrink < T::one()) {
            return bad("armijo_shrink must lie in (0, 1)");
        }
        if !(self.armijo_sufficient_decrease > T::zero() && self.armijo_sufficient_decrease < T::one()) {
            return bad("armijo_sufficient_decrease must lie in (0, 1)");
        }
        if !(self.grad_tol > T::zero() && self.psd_tol > T::zero() && self.rank_tol > T::zero()) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OptResult<T> {
    pub b_opt: BeamCovariance<T>,
    pub speb: T,
    /// SPEB at the start and after every accepted step.
    pub speb_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖B − Π(B − s·G)‖ / P_T` with `s = P_T/‖G‖`; zero at a KKT point.
    pub kkt_residual: T,
    pub gradient: BeamCovariance<T>,
    pub rank_profile: Vec<u8>,
    /// `Σ_p b_{p,11} / P_T`
    pub power_share_toward_target: T,
}

impl<T: Real> OptResult<T> {
    pub fn peb(&self) -> T {
        self.speb.sqrt()
    }

    /// `max_p |Re b_{p,21}|`
    pub fn re_b21_residual(&self) -> T {
        self.b_opt
            .blocks
            .iter()
            .fold(T::zero(), |m, b| m.max(b.b21.re.abs()))
    }

    pub fn is_rank_one(&self) -> bool {
        self.rank_profile.iter().all(|&r| r <= 1) && self.rank_profile.iter().any(|&r| r == 1)
    }
}

/// Shape of each per-subcarrier block. A single transmit antenna has no
/// derivative direction, so its blocks reduce to scalar powers `b_{p,11}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockMode {
    Full,
    Scalar,
}

impl BlockMode {
    pub fn for_transmitter(n_t: usize) -> Self {
        if n_t <= 1 {
            BlockMode::Scalar
        } else {
            BlockMode::Full
        }
    }

    fn mask<T: Real>(self, b: &BeamCovariance<T>) -> BeamCovariance<T> {
        match self {
            BlockMode::Full => b.clone(),
            BlockMode::Scalar => BeamCovariance::new(b.blocks.iter().map(|x| HermitianBlock::diag(x.b11, T::zero())).collect()),
        }
    }
}

/// Euclidean projection of `values` onto `{x ≥ 0, Σx ≤ budget}`.
pub fn project_capped_simplex<T: Real>(values: &[T], budget: T) -> Vec<T> {
    let clamped: Vec<T> = values.iter().map(|&v| v.max(T::zero())).collect();
    if clamped.iter().copied().sum::<T>() <= budget {
        return clamped;
    }
    let mut sorted: Vec<T> = clamped.iter().copied().filter(|&v| v > T::zero()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = T::zero();
    let mut shift = T::zero();
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - budget) / T::from_count(k + 1);
        if v - candidate > T::zero() {
            shift = candidate;
        }
    }
    clamped.iter().map(|&v| (v - shift).max(T::zero())).collect()
}

/// Nearest (Frobenius) feasible covariance with full 2×2 blocks.
pub fn project_feasible<T: Real>(raw: &BeamCovariance<T>, power_budget: T) -> BeamCovariance<T> {
    project_feasible_with(raw, power_budget, BlockMode::Full)
}

pub fn project_feasible_with<T: Real>(raw: &BeamCovariance<T>, power_budget: T, mode: BlockMode) -> BeamCovariance<T> {
    match mode {
        BlockMode::Scalar => {
            let powers: Vec<T> = raw.blocks.iter().map(|b| b.b11).collect();
            let projected = project_capped_simplex(&powers, power_budget);
            BeamCovariance::new(projected.into_iter().map(|p| HermitianBlock::diag(p, T::zero())).collect())
        }
        BlockMode::Full => {
            let eig: Vec<_> = raw.blocks.iter().map(|b| b.eigen()).collect();
            let values: Vec<T> = eig.iter().flat_map(|e| e.values).collect();
            let projected = project_capped_simplex(&values, power_budget);
            BeamCovariance::new(
                eig.iter()
                    .zip(projected.chunks(2))
                    .map(|(e, v)| HermitianBlock::from_eigen([v[0], v[1]], e.vectors))
                    .collect(),
            )
        }
    }
}

/// Gradient of the SPEB with respect to each block.
pub fn speb_gradient<T: Real>(scenario: &Scenario<T>, b: &BeamCovariance<T>) -> Result<BeamCovariance<T>> {
    let model = LinkModel::new(scenario)?;
    Ok(model.speb_with_gradient(b)?.1)
}

/// Scale-free projected-gradient residual.
pub fn kkt_residual<T: Real>(b: &BeamCovariance<T>, gradient: &BeamCovariance<T>, power_budget: T, mode: BlockMode) -> T {
    let gn = gradient.norm();
    if gn == T::zero() {
        return T::zero();
    }
    let s = power_budget / gn;
    let moved = project_feasible_with(&b.axpy(-s, gradient), power_budget, mode);
    b.sub(&moved).norm() / power_budget
}

/// Equal split over `b_{±P_m,11}` and `b_{±P_m,22}`.
pub fn default_initial_covariance<T: Real>(scenario: &Scenario<T>) -> BeamCovariance<T> {
    let mode = BlockMode::for_transmitter(scenario.n_t());
    let (lo, hi) = scenario.outermost();
    let active: Vec<usize> = if lo == hi { vec![lo] } else { vec![lo, hi] };
    let dims = match mode {
        BlockMode::Full => 2,
        BlockMode::Scalar => 1,
    };
    let share = scenario.power_budget / T::from_count(active.len() * dims);
    let mut b = BeamCovariance::zeros(scenario.num_subcarriers());
    for p in active {
        b.blocks[p] = match mode {
            BlockMode::Full => HermitianBlock::diag(share, share),
            BlockMode::Scalar => HermitianBlock::diag(share, T::zero()),
        };
    }
    b
}

/// Full-rank covariance spreading the budget over every direction.
fn interior_covariance<T: Real>(n: usize, power: T, mode: BlockMode) -> BeamCovariance<T> {
    let b = match mode {
        BlockMode::Full => {
            let s = power / T::from_count(2 * n);
            HermitianBlock::diag(s, s)
        }
        BlockMode::Scalar => HermitianBlock::diag(power / T::from_count(n), T::zero()),
    };
    BeamCovariance::new(vec![b; n])
}

pub fn optimize<T: Real>(scenario: &Scenario<T>, opts: &OptOptions<T>, init: Option<&BeamCovariance<T>>) -> Result<OptResult<T>> {
    opts.validate()?;
    let model = LinkModel::new(scenario)?;
    let mode = BlockMode::for_transmitter(model.n_t);
    let n = model.num_subcarriers();
    let power = model.power_budget;

    // Any feasible B is dominated by a multiple of this one, and the EFIM is
    // monotone in B, so singularity here means singularity everywhere.
    if let Err(Error::SingularEfim { .. }) = model.speb(&interior_covariance(n, power, mode)) {
        return Err(Error::InfeasibleScenario(
            "position is unidentifiable for every feasible beam covariance \
             (a single subcarrier gives no delay information; a single receive antenna gives no AoA information)"
                .into(),
        ));
    }

    let start = match init {
        Some(b0) => {
            b0.check_len(n)?;
            Some(project_feasible_with(b0, power, mode))
        }
        None => None,
    };
    let (mut b, (mut f, g0)) = match start.map(|b0| model.speb_with_gradient(&b0).map(|v| (b0, v))) {
        Some(Ok(v)) => v,
        _ => {
            let b0 = project_feasible_with(&default_initial_covariance(scenario), power, mode);
            let v = model.speb_with_gradient(&b0)?;
            (b0, v)
        }
    };
    let mut g = mode.mask(&g0);
    let mut trace = vec![f];
    let mut prev: Option<(BeamCovariance<T>, BeamCovariance<T>)> = None;
    let mut iterations = 0;
    let sigma = opts.armijo_sufficient_decrease;

    for _ in 0..opts.max_iters {
        if kkt_residual(&b, &g, power, mode) < opts.grad_tol {
            break;
        }
        let fallback = opts.step_init * power / g.norm();
        let mut t = match &prev {
            Some((bp, gp)) => {
                let s = b.sub(bp);
                let y = g.sub(gp);
                let sy = s.inner(&y);
                if sy > T::zero() {
                    s.inner(&s) / sy
                } else {
                    fallback
                }
            }
            None => fallback,
        };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let cand = project_feasible_with(&b.axpy(-t, &g), power, mode);
            let predicted = g.inner(&cand.sub(&b));
            if let Ok(fc) = model.speb(&cand) {
                if fc <= f + sigma * predicted && fc <= f {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            t = t * opts.armijo_shrink;
        }
        let Some((cand, fc)) = accepted else { break };
        let (_, gc) = model.speb_with_gradient(&cand)?;
        prev = Some((std::mem::replace(&mut b, cand), std::mem::replace(&mut g, mode.mask(&gc))));
        f = fc;
        trace.push(f);
        iterations += 1;
    }

    let kkt = kkt_residual(&b, &g, power, mode);
    Ok(OptResult {
        rank_profile: rank_profile(&b, opts.rank_tol),
        power_share_toward_target: (b.power_toward_target() / power).max(T::zero()).min(T::one()),
        speb: f,
        speb_trace: trace,
        iterations,
        converged: kkt < opts.grad_tol,
        kkt_residual: kkt,
        gradient: g,
        b_opt: b,
    })
}

/// Per-block rank: eigenvalues above `rank_tol` times the largest eigenvalue
/// over all blocks.
pub fn rank_profile<T: Real>(b: &BeamCovariance<T>, rank_tol: T) -> Vec<u8> {
    let eig: Vec<[T; 2]> = b.blocks.iter().map(|x| x.eigen().values).collect();
    let top = eig.iter().fold(T::zero(), |m, v| m.max(v[0]));
    if !(top > T::zero()) {
        return vec![0; b.len()];
    }
    let floor = rank_tol * top;
    eig.iter()
        .map(|v| v.iter().filter(|&&l| l > floor).count() as u8)
        .collect()
}

/// Orientation of the tilt in the rank-1 two-beam solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tilt {
    /// `b_{+P_m,12} = +j√(α(1−α))·P_T/2`.
    Positive,
    /// Complex conjugate of [`Tilt::Positive`].
    Negative,
}

/// Rank-1 beams on the outermost subcarriers, tilted between the steering
/// vector (weight `α`) and its derivative; all other blocks zero.
pub fn monopulse_candidate<T: Real>(scenario: &Scenario<T>, alpha: T) -> Result<BeamCovariance<T>> {
    monopulse_candidate_tilted(scenario, alpha, Tilt::Positive)
}

pub fn monopulse_candidate_tilted<T: Real>(scenario: &Scenario<T>, alpha: T, tilt: Tilt) -> Result<BeamCovariance<T>> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidAlpha(alpha.as_f64()));
    }
    let (lo, hi) = scenario.outermost();
    if lo == hi {
        return Err(Error::InvalidScenario("the two-beam candidate needs at least two subcarriers".into()));
    }
    let half = scenario.power_budget * T::lit(0.5);
    let cross = (alpha * (T::one() - alpha)).sqrt() * half;
    let sign = match tilt {
        Tilt::Positive => T::one(),
        Tilt::Negative => -T::one(),
    };
    let mut b = BeamCovariance::zeros(scenario.num_subcarriers());
    // b21 = conj(b12)
    b.blocks[hi] = HermitianBlock::new(alpha * half, (T::one() - alpha) * half, cplx(T::zero(), -sign * cross));
    b.blocks[lo] = HermitianBlock::new(alpha * half, (T::one() - alpha) * half, cplx(T::zero(), sign * cross));
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Cplx;

    /// Brute-force projection onto {x ≥ 0, Σx ≤ budget}: enumerate supports,
    /// with and without the budget active, keep the closest feasible point.
    fn brute_force_projection(values: &[f64], budget: f64) -> Vec<f64> {
        let n = values.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let mut candidates = vec![];
            let mut free = vec![0.0; n];
            for &i in &support {
                free[i] = values[i];
            }
            candidates.push(free);
            if !support.is_empty() {
                let sum: f64 = support.iter().map(|&i| values[i]).sum();
                let mu = (sum - budget) / support.len() as f64;
                let mut active = vec![0.0; n];
                for &i in &support {
                    active[i] = values[i] - mu;
                }
                candidates.push(active);
            }
            for x in candidates {
                let feasible = x.iter().all(|&v| v >= -1e-15) && x.iter().sum::<f64>() <= budget + 1e-12;
                if !feasible {
                    continue;
                }
                let d: f64 = x.iter().zip(values).map(|(a, b)| (a - b).powi(2)).sum();
                if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                    best = Some((d, x));
                }
            }
        }
        best.unwrap().1
    }

    #[test]
    fn capped_simplex_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n = rng.gen_range(1..=8);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let budget = rng.gen_range(0.1..3.0);
            let fast = project_capped_simplex(&values, budget);
            let slow = brute_force_projection(&values, budget);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-8, "{values:?} {budget}: {fast:?} vs {slow:?}");
            }
        }
    }

    #[test]
    fn feasible_input_is_a_fixed_point() {
        let b = BeamCovariance::new(vec![
            HermitianBlock::new(0.003, 0.002, Cplx::new(0.0005, -0.001)),
            HermitianBlock::new(0.002, 0.001, Cplx::new(0.0, 0.0012)),
        ]);
        let p = project_feasible(&b, 0.01);
        assert!(p.sub(&b).norm() < 1e-15);
    }

    #[test]
    fn single_overweight_eigenvalue_is_cut_to_budget() {
        let b = BeamCovariance::new(vec![HermitianBlock::diag(0.02f64, 0.0), HermitianBlock::zero()]);
        let p = project_feasible(&b, 0.01);
        assert!((p.blocks[0].b11 - 0.01).abs() < 1e-16);
        assert!(p.blocks[0].b22.abs() < 1e-16 && p.blocks[1].norm_sqr() == 0.0);
    }

    #[test]
    fn projection_is_nearest_among_random_feasible_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut r = || rng.gen_range(-1.0..1.0);
        for _ in 0..50 {
            let raw = BeamCovariance::new((0..3).map(|_| HermitianBlock::new(r(), r(), Cplx::new(r(), r()))).collect());
            let proj = project_feasible(&raw, 0.7);
            proj.check_feasible(0.7, 1e-12).unwrap();
            let d = raw.sub(&proj).norm();
            for _ in 0..200 {
                let cand = project_feasible(&BeamCovariance::new((0..3).map(|_| HermitianBlock::new(r(), r(), Cplx::new(r(), r()))).collect()), 0.7);
                assert!(raw.sub(&cand).norm() >= d - 1e-12);
            }
        }
    }

    #[test]
    fn scalar_mode_discards_derivative_direction() {
        let raw = BeamCovariance::new(vec![HermitianBlock::new(0.3, 0.5, Cplx::new(0.1, 0.1)), HermitianBlock::diag(-0.2, 1.0)]);
        let p = project_feasible_with(&raw, 0.1, BlockMode::Scalar);
        assert_eq!(p.blocks[0], HermitianBlock::diag(0.1, 0.0));
        assert_eq!(p.blocks[1], HermitianBlock::zero());
    }

    #[test]
    fn monopulse_shape() {
        let s = Scenario::<f64>::reference();
        for alpha in [0.1, 0.5, 0.9] {
            let b = monopulse_candidate(&s, alpha).unwrap();
            for blk in &b.blocks {
                assert!(blk.det().abs() < 1e-20);
                assert!((blk.trace() - 0.005).abs() < 1e-16);
            }
            assert_eq!(rank_profile(&b, 1e-4), vec![1, 1]);
        }
        let near_one = monopulse_candidate(&s, 1.0 - 1e-12).unwrap();
        assert!(near_one.blocks[0].b22 < 1e-14);
        assert!(matches!(monopulse_candidate(&s, 0.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(monopulse_candidate(&s, 1.0), Err(Error::InvalidAlpha(_))));
        let mirrored = monopulse_candidate_tilted(&s, 0.3, Tilt::Negative).unwrap();
        let plus = monopulse_candidate(&s, 0.3).unwrap();
        assert_eq!(mirrored.blocks[1].b21, plus.blocks[1].b21.conj());
    }

    #[test]
    fn rank_of_zero_covariance() {
        assert_eq!(rank_profile(&BeamCovariance::<f64>::zeros(3), 1e-4), vec![0, 0, 0]);
    }
}

//! Fisher information for the parameter vector
//! `φ = [Re h₁, Im h₁, τ₁, θ̃_T, θ̃_R]`, its equivalent (nuisance-free)
//! information on delay and angles, and the squared position error bound.
//!
//! Three independent constructions of the 5×5 FIM are provided:
//!
//! * [`fim_entrywise`] forms `R_s[p] = F_p B_p F_pᴴ` explicitly and evaluates
//!   the closed-form entries as quadratic forms in the steering vectors;
//! * [`fim_xform`] uses the linear map `B ↦ Re(|h₁|² X_R B X_Rᴴ + X_T B X_Tᴴ)`,
//!   which only needs manifold norms and is what the optimizer runs on;
//! * [`fim_from_derivatives`] sums `Re(∂mᴴ ∂m)` over explicit pilot vectors.

use crate::array::{steering, SteeringPair};
use crate::covariance::{BeamCovariance, HermitianBlock};
use crate::error::{Error, Result};
use crate::geometry::{derive_geometry, GeometryState};
use crate::linalg::{Mat, Mat2, Mat3, Mat5};
use crate::num::{cis, cplx, Cplx, Real};
use crate::scenario::Scenario;

/// Condition number above which `K J_e Kᵀ` (or `J11`) counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Manifolds of one subcarrier.
#[derive(Clone, Debug)]
pub struct SubcarrierLink<T> {
    /// Baseband angular frequency `ω_p`.
    pub omega: T,
    pub tx: SteeringPair<T>,
    pub rx: SteeringPair<T>,
}

/// A [`Scenario`] with geometry and manifolds evaluated once, ready for
/// repeated FIM evaluations at different beam covariances.
#[derive(Clone, Debug)]
pub struct LinkModel<T> {
    pub geometry: GeometryState<T>,
    pub subcarriers: Vec<SubcarrierLink<T>>,
    pub h1: Cplx<T>,
    pub sigma_eta_sq: T,
    pub power_budget: T,
    pub n_t: usize,
    pub n_r: usize,
}

impl<T: Real> LinkModel<T> {
    pub fn new(scenario: &Scenario<T>) -> Result<Self> {
        scenario.validate()?;
        let geometry = derive_geometry(scenario.p_t, scenario.p_r, scenario.p_s)?;
        let mut cached: Option<(SteeringPair<T>, SteeringPair<T>)> = None;
        let subcarriers = scenario
            .subcarrier_offsets
            .iter()
            .enumerate()
            .map(|(p, &omega)| {
                let (tx, rx) = match (&cached, scenario.narrowband) {
                    (Some(pair), true) => pair.clone(),
                    _ => {
                        let w = scenario.manifold_omega(p);
                        let pair = (
                            steering(&scenario.tx_array, geometry.theta_t, w),
                            steering(&scenario.rx_array, geometry.theta_r, w),
                        );
                        cached = Some(pair.clone());
                        pair
                    }
                };
                SubcarrierLink { omega, tx, rx }
            })
            .collect();
        Ok(Self {
            geometry,
            subcarriers,
            h1: scenario.h1,
            sigma_eta_sq: scenario.sigma_eta_sq,
            power_budget: scenario.power_budget,
            n_t: scenario.n_t(),
            n_r: scenario.n_r(),
        })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    /// `2/σ_η²`
    fn info_scale(&self) -> T {
        T::lit(2.0) / self.sigma_eta_sq
    }

    /// `X_R,p` and `X_T,p`.
    fn transforms(&self, link: &SubcarrierLink<T>) -> (Mat<Cplx<T>, 5, 2>, Mat<Cplx<T>, 5, 2>) {
        let zero = cplx(T::zero(), T::zero());
        let re = |x: T| cplx(x, T::zero());
        let sqrt_nt = link.tx.norm_a;
        let sqrt_nr = link.rx.norm_a;
        let h = self.h1;
        let mut xr = Mat([[zero; 2]; 5]);
        xr[(4, 0)] = re(sqrt_nt * link.rx.norm_a_dot);
        let mut xt = Mat([[zero; 2]; 5]);
        xt[(0, 0)] = re(sqrt_nr * sqrt_nt);
        xt[(1, 0)] = cplx(T::zero(), sqrt_nr * sqrt_nt);
        xt[(2, 0)] = cplx(T::zero(), -sqrt_nr * sqrt_nt * link.omega) * h;
        xt[(3, 1)] = h * (sqrt_nr * link.tx.norm_a_dot);
        (xr, xt)
    }

    /// FIM through the linear map `B ↦ J(B)`.
    pub fn fim(&self, b: &BeamCovariance<T>) -> Mat5<T> {
        let gain_sq = self.h1.norm_sqr();
        let mut acc = Mat::<Cplx<T>, 5, 5>::zeros();
        for (link, block) in self.subcarriers.iter().zip(&b.blocks) {
            let (xr, xt) = self.transforms(link);
            let bm = block.to_mat();
            acc = acc + (xr * bm * xr.adjoint()).scale(cplx(gain_sq, T::zero())) + xt * bm * xt.adjoint();
        }
        acc.re().scale(self.info_scale()).symmetrized()
    }

    pub fn bundle(&self, b: &BeamCovariance<T>) -> Result<FisherBundle<T>> {
        b.check_len(self.num_subcarriers())?;
        FisherBundle::new(self.fim(b), self.geometry.k, self.h1)
    }

    pub fn speb(&self, b: &BeamCovariance<T>) -> Result<T> {
        Ok(self.bundle(b)?.speb)
    }

    /// SPEB and its gradient `G` with `dSPEB = Σ_p Re tr(G_pᴴ dB_p)`.
    pub fn speb_with_gradient(&self, b: &BeamCovariance<T>) -> Result<(T, BeamCovariance<T>)> {
        let bundle = self.bundle(b)?;
        let w = bundle.speb_sensitivity()?;
        let wc = w.map(|x| cplx(x, T::zero()));
        let gain_sq = cplx(self.h1.norm_sqr(), T::zero());
        let scale = -self.info_scale();
        let blocks = self
            .subcarriers
            .iter()
            .map(|link| {
                let (xr, xt) = self.transforms(link);
                let g = (xr.adjoint() * wc * xr).scale(gain_sq) + xt.adjoint() * wc * xt;
                HermitianBlock::from_mat(&g).scale(scale)
            })
            .collect();
        Ok((bundle.speb, BeamCovariance::new(blocks)))
    }
}

/// Columns of the precoder `F_p = [a*/‖a‖, ȧ*/‖ȧ‖]`; a single column when
/// `N_T = 1`. A vanishing derivative yields a zero second column.
pub fn precoder_columns<T: Real>(tx: &SteeringPair<T>) -> Vec<Vec<Cplx<T>>> {
    let first: Vec<_> = tx.a.iter().map(|x| x.conj() / tx.norm_a).collect();
    if tx.a.len() < 2 {
        return vec![first];
    }
    let second: Vec<_> = if tx.norm_a_dot > T::zero() {
        tx.a_dot.iter().map(|x| x.conj() / tx.norm_a_dot).collect()
    } else {
        vec![cplx(T::zero(), T::zero()); tx.a.len()]
    };
    vec![first, second]
}

pub fn precoder<T: Real>(scenario: &Scenario<T>, p: usize) -> Result<Vec<Vec<Cplx<T>>>> {
    let model = LinkModel::new(scenario)?;
    let link = model
        .subcarriers
        .get(p)
        .ok_or(Error::DimensionMismatch { expected: model.num_subcarriers(), got: p })?;
    Ok(precoder_columns(&link.tx))
}

fn block_entry<T: Real>(b: &HermitianBlock<T>, i: usize, j: usize) -> Cplx<T> {
    match (i, j) {
        (0, 0) => cplx(b.b11, T::zero()),
        (0, 1) => b.b12(),
        (1, 0) => b.b21,
        _ => cplx(b.b22, T::zero()),
    }
}

/// `R_s = F B Fᴴ` as a dense `N_T × N_T` matrix.
pub fn transmit_covariance<T: Real>(columns: &[Vec<Cplx<T>>], b: &HermitianBlock<T>) -> Vec<Vec<Cplx<T>>> {
    let n = columns[0].len();
    let mut r = vec![vec![cplx(T::zero(), T::zero()); n]; n];
    for (i, fi) in columns.iter().enumerate() {
        for (j, fj) in columns.iter().enumerate() {
            let bij = block_entry(b, i, j);
            for k in 0..n {
                let left = fi[k] * bij;
                for l in 0..n {
                    r[k][l] += left * fj[l].conj();
                }
            }
        }
    }
    r
}

/// `xᵀ R y*`
fn bilinear<T: Real>(x: &[Cplx<T>], r: &[Vec<Cplx<T>>], y: &[Cplx<T>]) -> Cplx<T> {
    let mut acc = cplx(T::zero(), T::zero());
    for (k, xk) in x.iter().enumerate() {
        let row = r[k].iter().zip(y).fold(cplx(T::zero(), T::zero()), |s, (rkl, yl)| s + *rkl * yl.conj());
        acc += *xk * row;
    }
    acc
}

/// FIM assembled entry by entry from quadratic forms in `R_s[p]`.
pub fn entrywise_fim<T: Real>(model: &LinkModel<T>, b: &BeamCovariance<T>) -> Result<Mat5<T>> {
    b.check_len(model.num_subcarriers())?;
    let c = T::lit(2.0) / model.sigma_eta_sq;
    let h = model.h1;
    let gain_sq = h.norm_sqr();
    let (mut s_aa, mut s_w_aa, mut s_w2_aa, mut s_dd, mut s_rx_aa) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    let (mut s_re_hda, mut s_im_hda, mut s_w_im_da) = (T::zero(), T::zero(), T::zero());
    let mut n_r = T::zero();
    for (link, block) in model.subcarriers.iter().zip(&b.blocks) {
        let cols = precoder_columns(&link.tx);
        let r = transmit_covariance(&cols, block);
        let aa = bilinear(&link.tx.a, &r, &link.tx.a).re;
        let dd = bilinear(&link.tx.a_dot, &r, &link.tx.a_dot).re;
        let da = bilinear(&link.tx.a_dot, &r, &link.tx.a);
        let w = link.omega;
        n_r = link.rx.norm_a * link.rx.norm_a;
        s_aa += aa;
        s_w_aa += w * aa;
        s_w2_aa += w * w * aa;
        s_dd += dd;
        s_rx_aa += link.rx.norm_a_dot * link.rx.norm_a_dot * aa;
        s_re_hda += (h * da).re;
        s_im_hda += (h * da).im;
        s_w_im_da += w * da.im;
    }
    let cn = c * n_r;
    let mut j = Mat5::zeros();
    j[(0, 0)] = cn * s_aa;
    j[(1, 1)] = cn * s_aa;
    j[(0, 2)] = cn * h.im * s_w_aa;
    j[(1, 2)] = -cn * h.re * s_w_aa;
    j[(0, 3)] = cn * s_re_hda;
    j[(1, 3)] = cn * s_im_hda;
    j[(2, 2)] = cn * gain_sq * s_w2_aa;
    j[(2, 3)] = -cn * gain_sq * s_w_im_da;
    j[(3, 3)] = cn * gain_sq * s_dd;
    j[(4, 4)] = c * gain_sq * s_rx_aa;
    for r in 0..5 {
        for col in 0..r {
            j[(r, col)] = j[(col, r)];
        }
    }
    Ok(j)
}

/// FIM bundle from the entrywise construction.
pub fn fim_entrywise<T: Real>(scenario: &Scenario<T>, b: &BeamCovariance<T>) -> Result<FisherBundle<T>> {
    let model = LinkModel::new(scenario)?;
    let j = entrywise_fim(&model, b)?;
    FisherBundle::new(j, model.geometry.k, model.h1)
}

/// FIM from the vectorized linear map.
pub fn fim_xform<T: Real>(scenario: &Scenario<T>, b: &BeamCovariance<T>) -> Result<Mat5<T>> {
    let model = LinkModel::new(scenario)?;
    b.check_len(model.num_subcarriers())?;
    Ok(model.fim(b))
}

/// Deterministic pilots whose per-subcarrier outer-product sums equal
/// `F_p B_p F_pᴴ`: one pilot `√λ_k F_p v_k` per positive eigenpair.
pub fn pilots_from_covariance<T: Real>(scenario: &Scenario<T>, b: &BeamCovariance<T>) -> Result<Vec<Vec<Vec<Cplx<T>>>>> {
    let model = LinkModel::new(scenario)?;
    b.check_len(model.num_subcarriers())?;
    Ok(model
        .subcarriers
        .iter()
        .zip(&b.blocks)
        .map(|(link, block)| {
            let cols = precoder_columns(&link.tx);
            let n = cols[0].len();
            if cols.len() == 1 {
                if block.b11 <= T::zero() {
                    return vec![];
                }
                let s = block.b11.sqrt();
                return vec![cols[0].iter().map(|x| *x * s).collect()];
            }
            let e = block.eigen();
            e.values
                .iter()
                .zip(&e.vectors)
                .filter(|(l, _)| **l > T::zero())
                .map(|(l, v)| {
                    let s = l.sqrt();
                    (0..n).map(|k| (cols[0][k] * v[0] + cols[1][k] * v[1]) * s).collect()
                })
                .collect()
        })
        .collect())
}

/// FIM summed directly over `Re(∂m[p]ᴴ ∂m[p])` for explicit pilot vectors.
pub fn fim_from_derivatives<T: Real>(scenario: &Scenario<T>, pilots: &[Vec<Vec<Cplx<T>>>]) -> Result<Mat5<T>> {
    let model = LinkModel::new(scenario)?;
    if pilots.len() != model.num_subcarriers() {
        return Err(Error::DimensionMismatch { expected: model.num_subcarriers(), got: pilots.len() });
    }
    let c = T::lit(2.0) / model.sigma_eta_sq;
    let h = model.h1;
    let tau = model.geometry.tau;
    let j_unit = cplx(T::zero(), T::one());
    let mut j = Mat5::<T>::zeros();
    for (link, symbols) in model.subcarriers.iter().zip(pilots) {
        let phase = cis(-link.omega * tau);
        for s in symbols {
            if s.len() != model.n_t {
                return Err(Error::DimensionMismatch { expected: model.n_t, got: s.len() });
            }
            let dot = |v: &[Cplx<T>]| v.iter().zip(s).fold(cplx(T::zero(), T::zero()), |acc, (x, y)| acc + *x * y);
            let g = dot(&link.tx.a) * phase;
            let gd = dot(&link.tx.a_dot) * phase;
            let derivs: [Vec<Cplx<T>>; 5] = [
                link.rx.a.iter().map(|x| *x * g).collect(),
                link.rx.a.iter().map(|x| j_unit * *x * g).collect(),
                link.rx.a.iter().map(|x| -j_unit * h * *x * g * link.omega).collect(),
                link.rx.a.iter().map(|x| h * *x * gd).collect(),
                link.rx.a_dot.iter().map(|x| h * *x * g).collect(),
            ];
            for a in 0..5 {
                for bb in a..5 {
                    let v = derivs[a]
                        .iter()
                        .zip(&derivs[bb])
                        .fold(cplx(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y);
                    j[(a, bb)] += c * v.re;
                }
            }
        }
    }
    for r in 0..5 {
        for col in 0..r {
            j[(r, col)] = j[(col, r)];
        }
    }
    Ok(j)
}

/// FIM, its partition, the equivalent FIMs (unknown and known channel gain)
/// and the resulting squared position error bounds.
#[derive(Clone, Debug)]
pub struct FisherBundle<T> {
    pub j: Mat5<T>,
    pub j11: Mat2<T>,
    pub j12: Mat<T, 2, 3>,
    pub j22: Mat3<T>,
    /// EFIM on (τ₁, θ̃_T, θ̃_R) with `h₁` unknown.
    pub j_e: Mat3<T>,
    /// EFIM with `|h₁|` known (phase still unknown).
    pub j_eh: Mat3<T>,
    pub k: Mat<T, 2, 3>,
    pub h1: Cplx<T>,
    pub speb: T,
    pub speb_known_gain: T,
}

fn singular<T: Real>(condition: T) -> Error {
    Error::SingularEfim { condition: condition.as_f64() }
}

/// `tr(Q⁻¹)` for the 2×2 position-domain information `Q = K J_e Kᵀ`.
pub fn speb_from_position_fim<T: Real>(q: &Mat2<T>) -> Result<T> {
    let q = q.symmetrized();
    let cond = q.sym_condition();
    if !(cond <= T::lit(SINGULAR_CONDITION)) {
        return Err(singular(cond));
    }
    let inv = q.inverse2().ok_or_else(|| singular(cond))?;
    Ok(inv.trace())
}

impl<T: Real> FisherBundle<T> {
    pub fn new(j: Mat5<T>, k: Mat<T, 2, 3>, h1: Cplx<T>) -> Result<Self> {
        let j = j.symmetrized();
        let j11: Mat2<T> = j.block(0, 0);
        let j12: Mat<T, 2, 3> = j.block(0, 2);
        let j22: Mat3<T> = j.block(2, 2);
        let cond11 = j11.sym_condition();
        if !(cond11 <= T::lit(SINGULAR_CONDITION)) {
            return Err(singular(cond11));
        }
        let j11_inv = j11.inverse2().ok_or_else(|| singular(cond11))?;
        let j_e = (j22 - j12.transpose() * (j11_inv * j12)).symmetrized();

        let mag = h1.norm();
        if !(mag > T::zero()) {
            return Err(Error::InvalidScenario("channel coefficient must be nonzero".into()));
        }
        let u: Mat<T, 2, 1> = Mat([[-h1.im / mag], [h1.re / mag]]);
        let u_j11_u = (u.transpose() * j11 * u)[(0, 0)];
        let w = u.transpose() * j12;
        let j_eh = (j22 - (w.transpose() * w).scale(T::one() / u_j11_u)).symmetrized();

        let speb = speb_from_position_fim(&(k * j_e * k.transpose()))?;
        let speb_known_gain = speb_from_position_fim(&(k * j_eh * k.transpose()))?;
        Ok(Self {
            j,
            j11,
            j12,
            j22,
            j_e,
            j_eh,
            k,
            h1,
            speb,
            speb_known_gain,
        })
    }

    /// Position error bound `√SPEB`, meters.
    pub fn peb(&self) -> T {
        self.speb.sqrt()
    }

    pub fn peb_known_gain(&self) -> T {
        self.speb_known_gain.sqrt()
    }

    /// `K J_e Kᵀ`
    pub fn position_fim(&self) -> Mat2<T> {
        (self.k * self.j_e * self.k.transpose()).symmetrized()
    }

    /// `J12ᵀ J11⁻¹ J12`, the information lost to the unknown channel coefficient.
    pub fn schur_subtrahend(&self) -> Mat3<T> {
        self.j22 - self.j_e
    }

    /// `((j₁₄² + j₂₄²)/j₁₁, j_eh/j₁₁)`: the AoD information lost to an
    /// unknown channel coefficient, without and with a known gain.
    pub fn aod_subtrahends(&self) -> (T, T) {
        let s = self.schur_subtrahend();
        (s[(1, 1)], self.j22[(1, 1)] - self.j_eh[(1, 1)])
    }

    /// `E N Eᵀ` with `E = [−J11⁻¹J12; I]`, `N = Kᵀ Q⁻² K`, so that
    /// `dSPEB = −tr(W dJ)`.
    pub fn speb_sensitivity(&self) -> Result<Mat5<T>> {
        let q = self.position_fim();
        let q_inv = q.inverse2().ok_or_else(|| singular(q.sym_condition()))?;
        let n = self.k.transpose() * (q_inv * q_inv) * self.k;
        let a = self.j11.inverse2().ok_or_else(|| singular(self.j11.sym_condition()))? * self.j12;
        let e: Mat<T, 5, 3> = Mat::from_fn(|r, c| if r < 2 { -a[(r, c)] } else if r - 2 == c { T::one() } else { T::zero() });
        Ok((e * n * e.transpose()).symmetrized())
    }
}

/// SPEB from the full FIM, `tr(U (K₁ J K₁ᵀ)⁻¹ Uᵀ)` with `K₁ = blkdiag(I₂, K)`.
pub fn speb_full_fim<T: Real>(j: &Mat5<T>, k: &Mat<T, 2, 3>) -> Result<T> {
    let k1: Mat<T, 4, 5> = Mat::from_fn(|r, c| match (r < 2, c < 2) {
        (true, true) => if r == c { T::one() } else { T::zero() },
        (false, false) => k[(r - 2, c - 2)],
        _ => T::zero(),
    });
    let y = (k1 * *j * k1.transpose()).symmetrized();
    let inv = y.inverse().ok_or_else(|| singular(T::infinity()))?;
    let q_inv: Mat2<T> = inv.block(2, 2);
    let value = q_inv.trace();
    if !(value > T::zero()) || !value.is_finite() {
        return Err(singular(T::infinity()));
    }
    Ok(value)
}

/// Known-gain SPEB from the full FIM projected onto the constraint surface,
/// `tr(U₁ (K₂ J K₂ᵀ)⁻¹ U₁ᵀ)` with `K₂ = [[uᵀ, 0], [0, K]]`.
pub fn speb_known_gain_projected<T: Real>(j: &Mat5<T>, k: &Mat<T, 2, 3>, h1: Cplx<T>) -> Result<T> {
    let mag = h1.norm();
    let u = [-h1.im / mag, h1.re / mag];
    let k2: Mat<T, 3, 5> = Mat::from_fn(|r, c| match (r, c) {
        (0, 0) | (0, 1) => u[c],
        (0, _) => T::zero(),
        (_, 0) | (_, 1) => T::zero(),
        _ => k[(r - 1, c - 2)],
    });
    let z = (k2 * *j * k2.transpose()).symmetrized();
    let inv = z.inverse().ok_or_else(|| singular(T::infinity()))?;
    let q_inv: Mat2<T> = inv.block(1, 1);
    Ok(q_inv.trace())
}

/// Known-gain SPEB of a bundle (kept as a free function for symmetry with
/// [`speb`]).
pub fn speb_known_gain<T: Real>(bundle: &FisherBundle<T>) -> T {
    bundle.speb_known_gain
}

pub fn speb<T: Real>(bundle: &FisherBundle<T>) -> T {
    bundle.speb
}

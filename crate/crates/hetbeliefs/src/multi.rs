//! N-asset matrix form of the equilibrium, cross-sectional predictability
//! matrices, co-movement measures, definiteness classification, and the
//! lead-lag experiment.
//!
//! The structure mirrors the scalar solver stage by stage, with every scalar
//! product promoted to the matrix product in clearing order; none of the
//! covariance blocks are assumed to commute. Prices follow
//!
//! ```text
//! S_t = A_t + B_t (s - d_bar - C_t * theta_t),   t = 1, 2,
//! ```
//!
//! with `theta_t` a vector supply shock of covariance `sigma_theta_true`
//! (the informed price with `sigma_theta_informed` instead).

use crate::error::ModelError;
use crate::model::SingleParams;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Matrix primitives of the N-asset economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiParams {
    pub n: usize,
    pub d_bar: DVector<f64>,
    /// Payoff covariance, SPD.
    pub sigma_d: DMatrix<f64>,
    /// Signal noise covariance, SPD.
    pub sigma_s: DMatrix<f64>,
    /// True supply covariance, SPD.
    pub sigma_theta_true: DMatrix<f64>,
    /// Supply covariance the informed believe in; the belief gap
    /// `sigma_theta_informed - sigma_theta_true` must be positive definite.
    pub sigma_theta_informed: DMatrix<f64>,
    pub alpha: f64,
    pub pi: f64,
}

/// Symmetry tolerance applied to input covariance blocks.
pub const SYMMETRY_TOL: f64 = 1e-10;

fn check_spd(m: &DMatrix<f64>, n: usize, name: &'static str) -> Result<(), ModelError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(ModelError::invalid(
            name,
            format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > SYMMETRY_TOL {
        return Err(ModelError::invalid(
            name,
            format!("asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.1e}"),
        ));
    }
    let min_eig = symmetric_eigenvalues(m).min();
    if !(min_eig > 0.0) {
        return Err(ModelError::invalid(
            name,
            format!("not positive definite (min eigenvalue {min_eig:.3e})"),
        ));
    }
    Ok(())
}

impl MultiParams {
    /// Validates shapes, symmetry, positive definiteness of every covariance
    /// block, positive definiteness of the belief gap, and the scalar bounds
    /// shared with the single-asset model. `allow_homogeneous` relaxes the
    /// belief gap to positive semidefinite (so equal beliefs pass).
    pub fn validate(self) -> Result<Self, ModelError> {
        self.validate_with(crate::model::PI_BOUNDS_DEFAULT, false)
    }

    pub fn validate_with(
        self,
        pi_bounds: (f64, f64),
        allow_homogeneous: bool,
    ) -> Result<Self, ModelError> {
        if self.n == 0 {
            return Err(ModelError::invalid("n", "must be at least 1"));
        }
        if self.d_bar.len() != self.n {
            return Err(ModelError::WrongDimension {
                expected: self.n,
                got: self.d_bar.len(),
            });
        }
        if !self.d_bar.iter().all(|x| x.is_finite()) {
            return Err(ModelError::invalid("d_bar", "entries must be finite"));
        }
        check_spd(&self.sigma_d, self.n, "sigma_d")?;
        check_spd(&self.sigma_s, self.n, "sigma_s")?;
        check_spd(&self.sigma_theta_true, self.n, "sigma_theta_true")?;
        check_spd(&self.sigma_theta_informed, self.n, "sigma_theta_informed")?;
        let gap = &self.sigma_theta_informed - &self.sigma_theta_true;
        let min_gap = symmetric_eigenvalues(&gap).min();
        let floor = if allow_homogeneous { -SYMMETRY_TOL } else { 0.0 };
        if !(min_gap > floor) {
            return Err(ModelError::invalid(
                "sigma_theta_informed",
                format!(
                    "belief gap not positive definite (min eigenvalue {min_gap:.3e})"
                ),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ModelError::invalid("alpha", "must be > 0"));
        }
        let (lo, hi) = pi_bounds;
        if !(self.pi.is_finite() && self.pi >= lo && self.pi <= hi) {
            return Err(ModelError::invalid(
                "pi",
                format!("must lie in [{lo}, {hi}], got {}", self.pi),
            ));
        }
        Ok(self)
    }
}

/// Returns `p` with the true supply covariance replaced by the informed one.
pub fn informed_view_multi(p: &MultiParams) -> MultiParams {
    MultiParams {
        sigma_theta_true: p.sigma_theta_informed.clone(),
        ..p.clone()
    }
}

/// Embeds scalar parameters as a 1-asset matrix economy.
pub fn embed_single(p: &SingleParams) -> MultiParams {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    MultiParams {
        n: 1,
        d_bar: DVector::from_element(1, p.d_bar),
        sigma_d: m(p.sigma_d2),
        sigma_s: m(p.sigma_s2),
        sigma_theta_true: m(p.sigma_theta2_true),
        sigma_theta_informed: m(p.sigma_theta2_informed),
        alpha: p.alpha,
        pi: p.pi,
    }
}

/// Extracts scalar parameters from a 1-asset matrix economy.
pub fn reduce_to_single(p: &MultiParams) -> Result<SingleParams, ModelError> {
    if p.n != 1 {
        return Err(ModelError::WrongDimension { expected: 1, got: p.n });
    }
    Ok(SingleParams {
        d_bar: p.d_bar[0],
        sigma_d2: p.sigma_d[(0, 0)],
        sigma_s2: p.sigma_s[(0, 0)],
        sigma_theta2_true: p.sigma_theta_true[(0, 0)],
        sigma_theta2_informed: p.sigma_theta_informed[(0, 0)],
        alpha: p.alpha,
        pi: p.pi,
        riskless_supply: 0.0,
    })
}

/// Solved matrix constants for both belief systems plus S_0 and the price
/// covariances each group perceives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCoefficients {
    pub a2: DVector<f64>,
    pub b2: DMatrix<f64>,
    /// C_2 = (alpha/pi) * sigma_s; belief-free, shared by both groups.
    pub c2: DMatrix<f64>,
    pub a2_star: DVector<f64>,
    pub b2_star: DMatrix<f64>,
    pub a1: DVector<f64>,
    pub b1: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub a1_star: DVector<f64>,
    pub s0: DVector<f64>,
    /// Cov of S_2 under the informed belief: B2* C2 St1 C2' B2*'.
    pub var1_s2: DMatrix<f64>,
    /// Cov of S_2 under the true distribution: B2 C2 St C2' B2'.
    pub var2_s2: DMatrix<f64>,
    /// Cov of S_1 under the informed belief (starred date-1 constants).
    pub var1_s1: DMatrix<f64>,
    /// Cov of S_1 under the true distribution.
    pub var2_s1: DMatrix<f64>,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse with a condition-number guard: ||M|| * ||M^-1|| in the infinity
/// norm above 1e12 is treated as singular.
fn inv_guarded(m: &DMatrix<f64>, which: &'static str) -> Result<DMatrix<f64>, ModelError> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or(ModelError::SingularMatrix(which))?;
    let cond = inf_norm(m) * inf_norm(&inv);
    if !cond.is_finite() || cond > 1e12 {
        return Err(ModelError::SingularMatrix(which));
    }
    Ok(inv)
}

fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues
}

struct Stage2 {
    a2: DVector<f64>,
    b2: DMatrix<f64>,
    c2: DMatrix<f64>,
}

fn stage2(p: &MultiParams) -> Result<Stage2, ModelError> {
    let n = p.n;
    let c2 = &p.sigma_s * (p.alpha / p.pi);
    let sigma_xi = &p.sigma_s + &c2 * &p.sigma_theta_true * c2.transpose();
    let beta_s = &p.sigma_d * inv_guarded(&(&p.sigma_d + &p.sigma_s), "sigma_d + sigma_s")?;
    let beta_xi = &p.sigma_d * inv_guarded(&(&p.sigma_d + &sigma_xi), "sigma_d + sigma_xi")?;
    // Cov(D | s) and Cov(D | composite); both symmetric in exact arithmetic
    let v1 = &beta_s * &p.sigma_s;
    let v2 = &beta_xi * &sigma_xi;
    let v1_inv = inv_guarded(&v1, "var1_d")?;
    let v2_inv = inv_guarded(&v2, "var2_d")?;
    let h = &v1_inv * p.pi + &v2_inv * (1.0 - p.pi);
    let h_inv = inv_guarded(&h, "posterior precision sum")?;
    let b2 = &h_inv * (&v1_inv * p.pi * beta_s + &v2_inv * (1.0 - p.pi) * beta_xi);
    let a2 = &p.d_bar - (&h_inv * DVector::repeat(n, p.alpha));
    Ok(Stage2 { a2, b2, c2 })
}

struct Stage1 {
    a1: DVector<f64>,
    b1: DMatrix<f64>,
    c1: DMatrix<f64>,
    /// Cov of S_2 under the informed leg's pricing.
    w1: DMatrix<f64>,
    /// Cov of S_2 under the uninformed leg's pricing.
    w2: DMatrix<f64>,
}

fn stage1(p: &MultiParams, t2: &Stage2, t2_star: &Stage2) -> Result<Stage1, ModelError> {
    let n = p.n;
    let resale = |b: &DMatrix<f64>, st: &DMatrix<f64>| -> DMatrix<f64> {
        b * &t2.c2 * st * t2.c2.transpose() * b.transpose()
    };
    let w1 = resale(&t2_star.b2, &p.sigma_theta_informed);
    let w2 = resale(&t2.b2, &p.sigma_theta_true);
    let w1_inv = inv_guarded(&w1, "var1_s2")?;
    let w2_inv = inv_guarded(&w2, "var2_s2")?;
    let hw = &w1_inv * p.pi + &w2_inv * (1.0 - p.pi);
    let hw_inv = inv_guarded(&hw, "resale precision sum")?;
    let b1 = &hw_inv * (&w1_inv * p.pi * &t2_star.b2 + &w2_inv * (1.0 - p.pi) * &t2.b2);
    let c1 = &t2.c2 * &p.sigma_theta_informed * t2.c2.transpose()
        * t2_star.b2.transpose()
        * (p.alpha / p.pi);
    let a1 = &hw_inv
        * (&w1_inv * p.pi * &t2_star.a2 + &w2_inv * (1.0 - p.pi) * &t2.a2
            - DVector::repeat(n, p.alpha));
    Ok(Stage1 { a1, b1, c1, w1, w2 })
}

struct Stage0 {
    s0: DVector<f64>,
    u1: DMatrix<f64>,
    u2: DMatrix<f64>,
}

fn stage0(p: &MultiParams, t1: &Stage1, t1_star: &Stage1) -> Result<Stage0, ModelError> {
    let n = p.n;
    let base = &p.sigma_d + &p.sigma_s;
    let price_var = |b: &DMatrix<f64>, c: &DMatrix<f64>, st: &DMatrix<f64>| -> DMatrix<f64> {
        b * (&base + c * st * c.transpose()) * b.transpose()
    };
    let u1 = price_var(&t1_star.b1, &t1_star.c1, &p.sigma_theta_informed);
    let u2 = price_var(&t1.b1, &t1.c1, &p.sigma_theta_true);
    let u1_inv = inv_guarded(&u1, "var1_s1")?;
    let u2_inv = inv_guarded(&u2, "var2_s1")?;
    let hu = &u1_inv * p.pi + &u2_inv * (1.0 - p.pi);
    let hu_inv = inv_guarded(&hu, "date-1 precision sum")?;
    let s0 = &hu_inv
        * (&u1_inv * p.pi * &t1_star.a1 + &u2_inv * (1.0 - p.pi) * &t1.a1
            - DVector::repeat(n, p.alpha));
    Ok(Stage0 { s0, u1, u2 })
}

/// Solves the matrix equilibrium for both belief systems at every date.
///
/// Starred constants come from the same stage solvers run on the informed
/// view with both date-2 legs starred, exactly as in the scalar case.
pub fn equilibrium_multi(p: &MultiParams) -> Result<MultiCoefficients, ModelError> {
    let ps = informed_view_multi(p);
    let t2 = stage2(p)?;
    let t2s = stage2(&ps)?;
    let t1 = stage1(p, &t2, &t2s)?;
    let t1s = stage1(&ps, &t2s, &t2s)?;
    let t0 = stage0(p, &t1, &t1s)?;
    Ok(MultiCoefficients {
        a2: t2.a2,
        b2: t2.b2,
        c2: t2.c2,
        a2_star: t2s.a2,
        b2_star: t2s.b2,
        a1: t1.a1,
        b1: t1.b1,
        c1: t1.c1,
        a1_star: t1s.a1,
        s0: t0.s0,
        var1_s2: t1.w1,
        var2_s2: t1.w2,
        var1_s1: t0.u1,
        var2_s1: t0.u2,
    })
}

/// Cross-sectional predictability and co-movement matrices.
///
/// `gamma_m[i][j]` = Cov((S_2 - S_1)_i, (S_1 - S_0)_j | D) and
/// `gamma_r[i][j]` = Cov((S_2 - S_1)_i, (D - S_2)_j | D), both conditional on
/// the payoff vector like their scalar counterparts. The co-movement blocks
/// `gamma_c1..3` are the unconditional covariance matrices of the period
/// price changes S_1 - S_0, S_2 - S_1, S_3 - S_2 (S_3 = D), which is where
/// the positive-definiteness claim lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMeasures {
    pub gamma_m: DMatrix<f64>,
    pub gamma_r: DMatrix<f64>,
    pub gamma_c1: DMatrix<f64>,
    pub gamma_c2: DMatrix<f64>,
    pub gamma_c3: DMatrix<f64>,
}

impl CrossMeasures {
    /// Co-movement matrix of the price change into date `t`, t in {1, 2, 3}.
    pub fn gamma_c(&self, t: usize) -> Option<&DMatrix<f64>> {
        match t {
            1 => Some(&self.gamma_c1),
            2 => Some(&self.gamma_c2),
            3 => Some(&self.gamma_c3),
            _ => None,
        }
    }
}

/// Computes all measure matrices at solved coefficients.
pub fn cross_measures(c: &MultiCoefficients, p: &MultiParams) -> CrossMeasures {
    let st = &p.sigma_theta_true;
    let supply_noise = |b: &DMatrix<f64>, cc: &DMatrix<f64>| -> DMatrix<f64> {
        b * cc * st * cc.transpose() * b.transpose()
    };
    let n1 = supply_noise(&c.b1, &c.c1);
    let n2 = supply_noise(&c.b2, &c.c2);
    let db = &c.b2 - &c.b1;
    let unconditional = &p.sigma_d + &p.sigma_s;
    let eye = DMatrix::<f64>::identity(p.n, p.n);
    let ib2 = &eye - &c.b2;
    CrossMeasures {
        gamma_m: &db * &p.sigma_s * c.b1.transpose() - &n1,
        gamma_r: -(&db * &p.sigma_s * c.b2.transpose()) - &n2,
        gamma_c1: &c.b1 * &unconditional * c.b1.transpose() + &n1,
        gamma_c2: &db * &unconditional * db.transpose() + &n2 + &n1,
        gamma_c3: &ib2 * &p.sigma_d * ib2.transpose() + &c.b2 * &p.sigma_s * c.b2.transpose() + &n2,
    }
}

/// Eigenvalue-sign classification of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemi,
    /// Every eigenvalue within the tolerance band around zero (e.g. the zero
    /// matrix): simultaneously positive- and negative-semidefinite.
    Semi,
    Indefinite,
    NegativeSemi,
    NegativeDefinite,
}

/// Classifies `m` by the signs of its eigenvalues with threshold `tol`.
/// Errors with `NotSymmetric` if `max|m - m'|` exceeds `tol`.
pub fn definiteness(m: &DMatrix<f64>, tol: f64) -> Result<Definiteness, ModelError> {
    let asym = (m - m.transpose()).abs().max();
    if asym > tol {
        return Err(ModelError::NotSymmetric { asym, tol });
    }
    let eigs = symmetric_eigenvalues(m);
    let min = eigs.min();
    let max = eigs.max();
    Ok(if min > tol {
        Definiteness::PositiveDefinite
    } else if max < -tol {
        Definiteness::NegativeDefinite
    } else if min >= -tol && max <= tol {
        Definiteness::Semi
    } else if min >= -tol {
        Definiteness::PositiveSemi
    } else if max <= tol {
        Definiteness::NegativeSemi
    } else {
        Definiteness::Indefinite
    })
}

/// Symmetrizes `m` as (M + M')/2, classifies it, and reports the asymmetry
/// norm that was removed. Covariance outputs of [`cross_measures`] carry
/// roundoff-level asymmetry; this is the entry point for checking them.
pub fn classify_symmetrized(m: &DMatrix<f64>, tol: f64) -> (Definiteness, f64) {
    let asym = (m - m.transpose()).abs().max();
    let sym = (m + m.transpose()) * 0.5;
    (definiteness(&sym, tol).expect("symmetrized input"), asym)
}

/// Outcome of a lead-lag experiment: expected price moves induced by the
/// active signals, net of the unconditional (risk-premium) drift.
///
/// `drift_t1 = B_1 u` and `drift_t2 = (B_2 - B_1) u`, where `u` is the
/// signal innovation vector with muted entries forced to zero. Netting out
/// the baseline isolates the information channel: with diagonal payoff
/// covariance a muted asset's drift is exactly zero, while correlated
/// payoffs let an active asset's signal pull the muted one along.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadLagReport {
    /// Zero-based indices of the muted assets (signal pinned at its mean).
    pub muted: Vec<usize>,
    /// The innovation vector actually applied, muted entries zeroed.
    pub signal_innovation: DVector<f64>,
    /// Signal-induced component of E(S_1 - S_0) per asset.
    pub drift_t1: DVector<f64>,
    /// Signal-induced component of E(S_2 - S_1) per asset.
    pub drift_t2: DVector<f64>,
    /// Signal noise share sigma_s[mm] / (sigma_d[mm] + sigma_s[mm]) per
    /// asset: smaller means a more informative signal.
    pub precision_ratio: DVector<f64>,
}

/// Runs the lead-lag experiment: solves the equilibrium, mutes the listed
/// assets' signals (sets s_m = d_bar_m), and reports the induced drifts.
///
/// `muted` must name a nonempty proper subset of assets (zero-based).
pub fn leadlag_experiment(
    p: &MultiParams,
    muted: &[usize],
    s_active: &DVector<f64>,
) -> Result<LeadLagReport, ModelError> {
    if muted.is_empty() {
        return Err(ModelError::InvalidMute("no asset muted".into()));
    }
    let mut flags = vec![false; p.n];
    for &i in muted {
        if i >= p.n {
            return Err(ModelError::InvalidMute(format!(
                "asset index {i} out of range for n = {}",
                p.n
            )));
        }
        flags[i] = true;
    }
    if flags.iter().all(|&f| f) {
        return Err(ModelError::InvalidMute("every asset muted".into()));
    }
    if s_active.len() != p.n {
        return Err(ModelError::WrongDimension {
            expected: p.n,
            got: s_active.len(),
        });
    }
    let c = equilibrium_multi(p)?;
    let mut u = s_active - &p.d_bar;
    for (i, &f) in flags.iter().enumerate() {
        if f {
            u[i] = 0.0;
        }
    }
    let drift_t1 = &c.b1 * &u;
    let drift_t2 = (&c.b2 - &c.b1) * &u;
    let precision_ratio = DVector::from_fn(p.n, |i, _| {
        p.sigma_s[(i, i)] / (p.sigma_d[(i, i)] + p.sigma_s[(i, i)])
    });
    Ok(LeadLagReport {
        muted: {
            let mut m: Vec<usize> = muted.to_vec();
            m.sort_unstable();
            m.dedup();
            m
        },
        signal_innovation: u,
        drift_t1,
        drift_t2,
        precision_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single;

    fn mat2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    /// Two exchangeable assets with mildly correlated payoffs.
    fn m2() -> MultiParams {
        MultiParams {
            n: 2,
            d_bar: DVector::from_row_slice(&[100.0, 100.0]),
            sigma_d: mat2(4.0, 0.5, 0.5, 4.0),
            sigma_s: DMatrix::identity(2, 2),
            sigma_theta_true: DMatrix::identity(2, 2),
            sigma_theta_informed: DMatrix::identity(2, 2) * 4.0,
            alpha: 0.5,
            pi: 0.5,
        }
        .validate()
        .unwrap()
    }

    fn assert_mat_close(got: &DMatrix<f64>, want: &DMatrix<f64>, rtol: f64) {
        assert_eq!((got.nrows(), got.ncols()), (want.nrows(), want.ncols()));
        for (g, w) in got.iter().zip(want.iter()) {
            let scale = w.abs().max(1.0);
            assert!(
                (g - w).abs() <= rtol * scale,
                "entry mismatch: got {g:.17e}, want {w:.17e}"
            );
        }
    }

    fn assert_vec_close(got: &DVector<f64>, want: &[f64], rtol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want.iter()) {
            let scale = w.abs().max(1.0);
            assert!(
                (g - w).abs() <= rtol * scale,
                "entry mismatch: got {g:.17e}, want {w:.17e}"
            );
        }
    }

    // Frozen from an independent matrix evaluation of the clearing conditions
    // on the m2 instance (verified there against first-principles demand
    // aggregation, residual ~3e-14).
    #[test]
    fn correlated_pair_coefficients() {
        let p = m2();
        let c = equilibrium_multi(&p).unwrap();
        assert_vec_close(&c.a2, &[99.48571428571428, 99.48571428571428], 1e-13);
        assert_mat_close(
            &c.b2,
            &mat2(
                0.74778325123152734,
                0.023645320197044326,
                0.023645320197044337,
                0.747783251231527,
            ),
            1e-13,
        );
        assert_mat_close(&c.c2, &DMatrix::identity(2, 2), 1e-14);
        assert_vec_close(&c.a2_star, &[99.391891891891888, 99.391891891891888], 1e-13);
        assert_mat_close(
            &c.b2_star,
            &mat2(
                0.70357454228421967,
                0.026155187445510021,
                0.026155187445510025,
                0.70357454228421967,
            ),
            1e-13,
        );
        assert_vec_close(&c.a1, &[99.00007975753708, 99.00007975753708], 1e-13);
        assert_mat_close(
            &c.b1,
            &mat2(
                0.73803988245675356,
                0.024282657023227423,
                0.024282657023227433,
                0.73803988245675334,
            ),
            1e-13,
        );
        assert_mat_close(
            &c.c1,
            &mat2(
                2.8142981691368787,
                0.1046207497820401,
                0.10462074978204008,
                2.8142981691368787,
            ),
            1e-13,
        );
        assert_vec_close(&c.a1_star, &[98.326880934989049, 98.326880934989049], 1e-13);
        assert_vec_close(&c.s0, &[92.936319094656895, 92.936319094656909], 1e-13);
        // perceived price covariances, spot-checked entries
        assert!((c.var1_s2[(0, 0)] - 1.9828049215230359).abs() < 1e-12);
        assert!((c.var1_s2[(0, 1)] - 0.14721699228266147).abs() < 1e-12);
        assert!((c.var2_s2[(0, 0)] - 0.55973889198961435).abs() < 1e-12);
        assert!((c.var1_s1[(0, 0)] - 18.309661074470032).abs() < 1e-11);
        assert!((c.var2_s1[(0, 0)] - 7.0903257570970615).abs() < 1e-12);
    }

    #[test]
    fn correlated_pair_measures() {
        let p = m2();
        let c = equilibrium_multi(&p).unwrap();
        let m = cross_measures(&c, &p);
        assert_mat_close(
            &m.gamma_m,
            &mat2(
                -4.3387660916037598,
                -0.60561888834908861,
                -0.60561888834908872,
                -4.338766091603758,
            ),
            1e-12,
        );
        assert_mat_close(
            &m.gamma_r,
            &mat2(
                -0.567009749936634,
                -0.035116944097177243,
                -0.035116944097177243,
                -0.56700974993663333,
            ),
            1e-12,
        );
        assert_mat_close(
            &m.gamma_c1,
            &mat2(
                7.0903257570970606,
                1.057247054351063,
                1.057247054351063,
                7.090325757097057,
            ),
            1e-12,
        );
        assert_mat_close(
            &m.gamma_c2,
            &mat2(
                4.9061509894659077,
                0.64073382370107146,
                0.64073382370107157,
                4.906150989465905,
            ),
            1e-12,
        );
        assert_mat_close(
            &m.gamma_c3,
            &mat2(
                1.3702035963017791,
                0.055102526147200862,
                0.055102526147200862,
                1.3702035963017787,
            ),
            1e-12,
        );
        // reversal matrix is negative (semi)definite; co-movement is PD
        let (dr, asym_r) = classify_symmetrized(&m.gamma_r, 1e-10);
        assert_eq!(dr, Definiteness::NegativeDefinite);
        assert!(asym_r < 1e-12);
        let eigs = symmetric_eigenvalues(&m.gamma_r);
        assert!((eigs.min() - -0.60212669403381092).abs() < 1e-12);
        assert!((eigs.max() - -0.53189280583945642).abs() < 1e-12);
        for t in 1..=3 {
            let (d, _) = classify_symmetrized(m.gamma_c(t).unwrap(), 1e-10);
            assert_eq!(d, Definiteness::PositiveDefinite, "gamma_c{t}");
        }
        assert!(m.gamma_c(4).is_none());
        // the belief-ordering matrix analogue holds on this symmetric instance
        let (d, _) = classify_symmetrized(&(&c.b2 - &c.b2_star), 1e-10);
        assert_eq!(d, Definiteness::PositiveDefinite);
        let (d, _) = classify_symmetrized(&(&c.b2 - &c.b1), 1e-10);
        assert_eq!(d, Definiteness::PositiveDefinite);
    }

    #[test]
    fn one_asset_embedding_matches_scalar_solver() {
        let p = SingleParams {
            d_bar: 100.0,
            sigma_d2: 4.0,
            sigma_s2: 1.0,
            sigma_theta2_true: 1.0,
            sigma_theta2_informed: 4.0,
            alpha: 0.5,
            pi: 0.5,
            riskless_supply: 0.0,
        };
        let c = single::equilibrium(&p).unwrap();
        let cm = equilibrium_multi(&embed_single(&p).validate().unwrap()).unwrap();
        let pairs = [
            (cm.a2[0], c.a2),
            (cm.b2[(0, 0)], c.b2),
            (cm.c2[(0, 0)], c.c2),
            (cm.a2_star[0], c.a2_star),
            (cm.b2_star[(0, 0)], c.b2_star),
            (cm.a1[0], c.a1),
            (cm.b1[(0, 0)], c.b1),
            (cm.c1[(0, 0)], c.c1),
            (cm.a1_star[0], c.a1_star),
            (cm.s0[0], c.s0),
            (cm.var1_s2[(0, 0)], c.var1_s2),
            (cm.var2_s2[(0, 0)], c.var2_s2),
            (cm.var1_s1[(0, 0)], c.var1_s1),
            (cm.var2_s1[(0, 0)], c.var2_s1),
        ];
        for (got, want) in pairs {
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "embedding mismatch: {got:.17e} vs {want:.17e}"
            );
        }
        // measures reduce too
        let pm = embed_single(&p).validate().unwrap();
        let mm = cross_measures(&cm, &pm);
        let ms = single::measures(&c, &p);
        assert!((mm.gamma_m[(0, 0)] - ms.gamma_m).abs() < 1e-12);
        assert!((mm.gamma_r[(0, 0)] - ms.gamma_r).abs() < 1e-12);
    }

    #[test]
    fn independent_assets_decouple() {
        let p = MultiParams {
            n: 2,
            d_bar: DVector::from_row_slice(&[100.0, 50.0]),
            sigma_d: mat2(4.0, 0.0, 0.0, 2.0),
            sigma_s: mat2(1.0, 0.0, 0.0, 0.5),
            sigma_theta_true: mat2(1.0, 0.0, 0.0, 0.7),
            sigma_theta_informed: mat2(4.0, 0.0, 0.0, 2.1),
            alpha: 0.5,
            pi: 0.5,
        }
        .validate()
        .unwrap();
        let c = equilibrium_multi(&p).unwrap();
        let m = cross_measures(&c, &p);
        for mx in [&c.b2, &c.b1, &c.c2, &c.c1, &m.gamma_m, &m.gamma_r] {
            assert!(mx[(0, 1)].abs() < 1e-10 && mx[(1, 0)].abs() < 1e-10);
        }
        // each diagonal equals the standalone scalar solve of that asset
        let s2 = SingleParams {
            d_bar: 50.0,
            sigma_d2: 2.0,
            sigma_s2: 0.5,
            sigma_theta2_true: 0.7,
            sigma_theta2_informed: 2.1,
            alpha: 0.5,
            pi: 0.5,
            riskless_supply: 0.0,
        };
        let cs = single::equilibrium(&s2).unwrap();
        assert!((c.b1[(1, 1)] - cs.b1).abs() < 1e-12);
        assert!((c.s0[1] - cs.s0).abs() <= 1e-12 * cs.s0.abs());
        let msc = single::measures(&cs, &s2);
        assert!((m.gamma_m[(1, 1)] - msc.gamma_m).abs() < 1e-12);
        assert!((m.gamma_r[(1, 1)] - msc.gamma_r).abs() < 1e-12);
    }

    #[test]
    fn definiteness_classification() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(definiteness(&eye, 1e-12).unwrap(), Definiteness::PositiveDefinite);
        assert_eq!(definiteness(&(-eye.clone()), 1e-12).unwrap(), Definiteness::NegativeDefinite);
        let zero = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(definiteness(&zero, 1e-12).unwrap(), Definiteness::Semi);
        let indef = mat2(1.0, 0.0, 0.0, -1.0);
        assert_eq!(definiteness(&indef, 1e-12).unwrap(), Definiteness::Indefinite);
        let psd = mat2(1.0, 0.0, 0.0, 0.0);
        assert_eq!(definiteness(&psd, 1e-12).unwrap(), Definiteness::PositiveSemi);
        let nsd = mat2(-1.0, 0.0, 0.0, 0.0);
        assert_eq!(definiteness(&nsd, 1e-12).unwrap(), Definiteness::NegativeSemi);
        let askew = mat2(1.0, 0.5, -0.5, 1.0);
        assert!(matches!(
            definiteness(&askew, 1e-10),
            Err(ModelError::NotSymmetric { .. })
        ));
        // the symmetrizing entry point reports what it removed
        let (d, asym) = classify_symmetrized(&askew, 1e-10);
        assert_eq!(d, Definiteness::PositiveDefinite);
        assert!((asym - 1.0).abs() < 1e-15);
    }

    /// Correlated payoffs, asset 1 precise, asset 2 imprecise.
    fn leadlag_instance() -> MultiParams {
        MultiParams {
            n: 2,
            d_bar: DVector::from_row_slice(&[100.0, 100.0]),
            sigma_d: mat2(4.0, 2.0, 2.0, 4.0),
            sigma_s: mat2(0.25, 0.0, 0.0, 4.0),
            sigma_theta_true: DMatrix::identity(2, 2),
            sigma_theta_informed: DMatrix::identity(2, 2) * 4.0,
            alpha: 0.5,
            pi: 0.5,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn muted_asset_drifts_with_covariance() {
        let p = leadlag_instance();
        let s = DVector::from_row_slice(&[103.0, 100.0]);
        let r = leadlag_experiment(&p, &[1], &s).unwrap();
        assert_vec_close(
            &r.precision_ratio,
            &[0.058823529411764705, 0.5],
            1e-14,
        );
        // good news on asset 1 lifts muted asset 2 through the payoff link
        assert_vec_close(
            &r.drift_t1,
            &[2.7789075232620606, 0.96796365670966378],
            1e-12,
        );
        assert!(r.drift_t1[1] > 0.0);
        assert_vec_close(
            &r.drift_t2,
            &[0.0075693450653411265, -0.0071095641829731493],
            1e-10,
        );
        // a muted asset's own signal draw is ignored entirely
        let s_noisy = DVector::from_row_slice(&[103.0, 42.0]);
        let r2 = leadlag_experiment(&p, &[1], &s_noisy).unwrap();
        assert_eq!(r2.signal_innovation[1], 0.0);
        assert_vec_close(&r2.drift_t1, &[2.7789075232620606, 0.96796365670966378], 1e-12);
    }

    #[test]
    fn diagonal_payoffs_give_muted_asset_zero_drift() {
        let mut p = leadlag_instance();
        p.sigma_d = mat2(4.0, 0.0, 0.0, 4.0);
        let p = p.validate().unwrap();
        let s = DVector::from_row_slice(&[103.0, 100.0]);
        let r = leadlag_experiment(&p, &[1], &s).unwrap();
        assert_eq!(r.drift_t1[1], 0.0);
        assert_eq!(r.drift_t2[1], 0.0);
        assert!((r.drift_t1[0] - 2.7978523489932887).abs() < 1e-12);
    }

    #[test]
    fn precise_signal_can_outweigh_own_bad_news() {
        // mildly bad own-signal on the imprecise asset 2 is dominated by
        // strong good news on the precise, correlated asset 1
        let p = leadlag_instance();
        let s = DVector::from_row_slice(&[103.0, 99.5]);
        let r = leadlag_experiment(&p, &[], &s);
        assert!(matches!(r, Err(ModelError::InvalidMute(_))));
        let c = equilibrium_multi(&p).unwrap();
        let u = &s - &p.d_bar;
        let drift = &c.b1 * u;
        assert!((drift[1] - 0.81347176524227727).abs() < 1e-12);
        assert!(drift[1] > 0.0);
    }

    #[test]
    fn mute_set_must_be_proper_and_in_range() {
        let p = leadlag_instance();
        let s = DVector::from_row_slice(&[103.0, 100.0]);
        assert!(matches!(
            leadlag_experiment(&p, &[], &s),
            Err(ModelError::InvalidMute(_))
        ));
        assert!(matches!(
            leadlag_experiment(&p, &[0, 1], &s),
            Err(ModelError::InvalidMute(_))
        ));
        assert!(matches!(
            leadlag_experiment(&p, &[2], &s),
            Err(ModelError::InvalidMute(_))
        ));
        let short = DVector::from_row_slice(&[103.0]);
        assert!(matches!(
            leadlag_experiment(&p, &[1], &short),
            Err(ModelError::WrongDimension { .. })
        ));
    }

    #[test]
    fn reduction_round_trip_and_dimension_guard() {
        let p = SingleParams {
            d_bar: 7.0,
            sigma_d2: 2.0,
            sigma_s2: 0.3,
            sigma_theta2_true: 0.4,
            sigma_theta2_informed: 1.4,
            alpha: 0.9,
            pi: 0.25,
            riskless_supply: 0.0,
        };
        let back = reduce_to_single(&embed_single(&p)).unwrap();
        assert_eq!(back, p);
        assert!(matches!(
            reduce_to_single(&m2()),
            Err(ModelError::WrongDimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn validation_rejects_bad_covariance_blocks() {
        let mut p = m2();
        p.sigma_d[(0, 1)] = 0.6; // asymmetric
        assert!(matches!(
            p.clone().validate(),
            Err(ModelError::InvalidParam { name: "sigma_d", .. })
        ));
        let mut p = m2();
        p.sigma_s = mat2(1.0, 1.0, 1.0, 1.0); // rank 1, not PD
        assert!(p.validate().is_err());
        let mut p = m2();
        p.sigma_theta_informed = DMatrix::identity(2, 2); // no belief gap
        assert!(p.clone().validate().is_err());
        assert!(p.validate_with(crate::model::PI_BOUNDS_DEFAULT, true).is_ok());
        let mut p = m2();
        p.d_bar = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            p.validate(),
            Err(ModelError::WrongDimension { .. })
        ));
    }

    #[test]
    fn ill_conditioned_resale_risk_is_reported_singular() {
        // a supply-belief covariance with condition number ~1e13 makes the
        // informed resale variance uninvertible at the guard threshold
        let p = MultiParams {
            n: 2,
            d_bar: DVector::from_row_slice(&[100.0, 100.0]),
            sigma_d: mat2(4.0, 0.5, 0.5, 4.0),
            sigma_s: DMatrix::identity(2, 2),
            sigma_theta_true: mat2(0.5, 0.0, 0.0, 0.5e-13),
            sigma_theta_informed: mat2(1.0, 0.0, 0.0, 1e-13),
            alpha: 0.5,
            pi: 0.5,
        }
        .validate()
        .unwrap();
        assert!(matches!(
            equilibrium_multi(&p),
            Err(ModelError::SingularMatrix(_))
        ));
    }
}

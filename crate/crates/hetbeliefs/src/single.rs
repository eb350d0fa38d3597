//! Closed-form equilibrium of the single-asset market and the price-level
//! predictability measures built on it.
//!
//! Prices are affine in the signal innovation and the current supply shock,
//!
//! ```text
//! S_t = a_t + b_t (s - d_bar - c_t * theta_t),   t = 1, 2,   c_t > 0,
//! ```
//!
//! so a positive supply surprise lowers the price. The constants come from
//! market clearing: the precision-weighted average of the two groups' CARA
//! demands must absorb the realized supply 1 + theta_t each period, and the
//! ex-ante price S_0 clears a unit supply. Informed traders price period-1
//! and period-0 risk with their inflated supply variance, which is what
//! drives every starred constant below.
//!
//! The momentum and reversal measures are the payoff-conditional covariances
//! of successive price changes; see [`measures`].

use crate::error::ModelError;
use crate::model::{informed_view, posterior_weights, SingleParams, WorldRealization};
use serde::{Deserialize, Serialize};

/// Affine constants of the date-2 price under one belief system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodTwo {
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

/// Affine constants of the date-1 price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodOne {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
}

/// The solved affine-price constants for both belief systems plus S_0 and
/// the price variances each group perceives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCoefficients {
    pub a2: f64,
    pub b2: f64,
    /// Supply loading at t = 2; equals alpha * sigma_s2 / pi and carries no
    /// belief, so it is shared by both groups.
    pub c2: f64,
    pub a2_star: f64,
    pub b2_star: f64,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a1_star: f64,
    /// Ex-ante price.
    pub s0: f64,
    /// Var of S_2 as the informed perceive it: (b2*)^2 c2^2 sigma_theta2_informed.
    pub var1_s2: f64,
    /// Var of S_2 as the uninformed perceive it: b2^2 c2^2 sigma_theta2_true.
    pub var2_s2: f64,
    /// Var of S_1 under the informed belief (starred period-1 constants).
    pub var1_s1: f64,
    /// Var of S_1 under the true distribution with the market's constants.
    pub var2_s1: f64,
}

/// Prices along one world draw. S_3 is the payoff itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

/// Payoff-conditional covariances of successive price moves.
///
/// `gamma_m` = Cov(S_2 - S_1, S_1 - S_0 | D): positive values mean price
/// changes continue (momentum). `gamma_r` = Cov(D - S_2, S_2 - S_1 | D):
/// always negative here (terminal convergence reverses the last move).
/// `momentum_holds` is the canonical test `gamma_m > 0`; `condition_value`
/// is the separate simplified diagnostic
/// `pi b2^2 sigma_s2 (b2 - b2*) - b1 c1^2`, whose sign usually, but not
/// always, agrees with `gamma_m`'s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityMeasures {
    pub gamma_m: f64,
    pub gamma_r: f64,
    pub momentum_holds: bool,
    pub condition_value: f64,
}

/// Solves the date-2 clearing condition under `p`'s supply variance.
///
/// c2 = alpha*sigma_s2/pi makes the informed demand reveal the composite
/// s - d_bar - c2*theta_2; b2 is the precision-weighted average of the two
/// posterior signal weights, and a2 subtracts the harmonic-mean price of
/// payoff risk from d_bar.
pub fn solve_t2(p: &SingleParams) -> Result<PeriodTwo, ModelError> {
    let c2 = p.alpha * p.sigma_s2 / p.pi;
    let w = posterior_weights(p, c2);
    if !(w.beta_xi < w.beta_s) {
        // only reachable if c2^2 * sigma_theta2 collapses to zero
        return Err(ModelError::Degenerate(
            "posterior weights coincide (c2^2 * sigma_theta2 = 0)".into(),
        ));
    }
    let v1d = w.beta_s * p.sigma_s2; // Var(D | s)
    let v2d = w.beta_xi * w.sigma_xi2; // Var(D | price composite)
    let prec = p.pi / v1d + (1.0 - p.pi) / v2d;
    Ok(PeriodTwo {
        a2: p.d_bar - p.alpha / prec,
        b2: (p.pi / v1d * w.beta_s + (1.0 - p.pi) / v2d * w.beta_xi) / prec,
        c2,
    })
}

/// Solves the date-1 clearing condition given both views of date 2.
///
/// At t = 1 the informed value the asset by its resale price under their
/// starred constants; the uninformed do the same with the market constants,
/// reading the composite out of S_1. `p` supplies the two supply variances:
/// the informed leg prices (b2*)^2 c2^2 * sigma_theta2_informed of resale
/// risk, the uninformed leg b2^2 c2^2 * sigma_theta2_true.
pub fn solve_t1(
    p: &SingleParams,
    t2: &PeriodTwo,
    t2_star: &PeriodTwo,
) -> Result<PeriodOne, ModelError> {
    let c2sq = t2.c2 * t2.c2;
    let v1s = t2_star.b2 * t2_star.b2 * c2sq * p.sigma_theta2_informed;
    let v2s = t2.b2 * t2.b2 * c2sq * p.sigma_theta2_true;
    if !(v1s > 0.0 && v2s > 0.0) {
        return Err(ModelError::Degenerate(
            "period-2 resale variance vanished".into(),
        ));
    }
    let w1 = p.pi / v1s;
    let w2 = (1.0 - p.pi) / v2s;
    Ok(PeriodOne {
        a1: (w1 * t2_star.a2 + w2 * t2.a2 - p.alpha) / (w1 + w2),
        b1: (w1 * t2_star.b2 + w2 * t2.b2) / (w1 + w2),
        c1: p.alpha * t2_star.b2 * c2sq * p.sigma_theta2_informed / p.pi,
    })
}

/// Ex-ante price: both groups hold to date 1, so S_0 is the precision-
/// weighted average of their date-1 valuations minus the price of a unit
/// of date-1 price risk.
pub fn solve_t0(p: &SingleParams, t1: &PeriodOne, t1_star: &PeriodOne) -> f64 {
    let base = p.sigma_d2 + p.sigma_s2;
    let v1 = t1_star.b1 * t1_star.b1 * (base + t1_star.c1 * t1_star.c1 * p.sigma_theta2_informed);
    let v2 = t1.b1 * t1.b1 * (base + t1.c1 * t1.c1 * p.sigma_theta2_true);
    let w1 = p.pi / v1;
    let w2 = (1.0 - p.pi) / v2;
    (w1 * t1_star.a1 + w2 * t1.a1 - p.alpha) / (w1 + w2)
}

/// Solves the full equilibrium: both belief systems at every date.
///
/// Starred constants are the same stage solvers run on `informed_view(p)`,
/// with both date-2 views set to the starred one. Under that substitution
/// the date-1 stage collapses to b1* = b2*, c1* = c1 and
/// a1* = a2* - alpha * var1_s2, so no deeper belief nesting ever arises.
pub fn equilibrium(p: &SingleParams) -> Result<EquilibriumCoefficients, ModelError> {
    let ps = informed_view(p);
    let t2 = solve_t2(p)?;
    let t2s = solve_t2(&ps)?;
    let t1 = solve_t1(p, &t2, &t2s)?;
    let t1s = solve_t1(&ps, &t2s, &t2s)?;
    let s0 = solve_t0(p, &t1, &t1s);
    let c2sq = t2.c2 * t2.c2;
    let base = p.sigma_d2 + p.sigma_s2;
    Ok(EquilibriumCoefficients {
        a2: t2.a2,
        b2: t2.b2,
        c2: t2.c2,
        a2_star: t2s.a2,
        b2_star: t2s.b2,
        a1: t1.a1,
        b1: t1.b1,
        c1: t1.c1,
        a1_star: t1s.a1,
        s0,
        var1_s2: t2s.b2 * t2s.b2 * c2sq * p.sigma_theta2_informed,
        var2_s2: t2.b2 * t2.b2 * c2sq * p.sigma_theta2_true,
        var1_s1: t1s.b1 * t1s.b1 * (base + t1s.c1 * t1s.c1 * p.sigma_theta2_informed),
        var2_s1: t1.b1 * t1.b1 * (base + t1.c1 * t1.c1 * p.sigma_theta2_true),
    })
}

/// Prices implied by one world draw. S_3 equals the realized payoff exactly.
pub fn price_path(
    c: &EquilibriumCoefficients,
    p: &SingleParams,
    w: &WorldRealization,
) -> PricePath {
    let u = w.s - p.d_bar;
    PricePath {
        s0: c.s0,
        s1: c.a1 + c.b1 * (u - c.c1 * w.theta1),
        s2: c.a2 + c.b2 * (u - c.c2 * w.theta2),
        s3: w.d,
    }
}

/// Momentum and reversal measures at `c`, conditional on the payoff.
///
/// Conditioning on D strips the common payoff innovation out of both price
/// changes, leaving `sigma_s2` (not `sigma_d2 + sigma_s2`) in the signal
/// terms. The simulator estimates exactly these conditional covariances.
pub fn measures(c: &EquilibriumCoefficients, p: &SingleParams) -> PredictabilityMeasures {
    let st = p.sigma_theta2_true;
    let gamma_m =
        (c.b2 - c.b1) * c.b1 * p.sigma_s2 - c.b1 * c.b1 * c.c1 * c.c1 * st;
    let gamma_r =
        -c.b2 * (c.b2 - c.b1) * p.sigma_s2 - c.b2 * c.b2 * c.c2 * c.c2 * st;
    let condition_value =
        p.pi * c.b2 * c.b2 * p.sigma_s2 * (c.b2 - c.b2_star) - c.b1 * c.c1 * c.c1;
    PredictabilityMeasures {
        gamma_m,
        gamma_r,
        momentum_holds: gamma_m > 0.0,
        condition_value,
    }
}

/// Measure a finite difference targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureTarget {
    GammaM,
    GammaR,
}

/// Primitive a finite difference perturbs. `DeltaSigmaTheta2` moves the
/// informed variance holding the true one fixed (belief-gap direction);
/// `SigmaTheta2` moves the true variance holding the informed one fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    Pi,
    DeltaSigmaTheta2,
    SigmaTheta2,
    SigmaS2,
    Alpha,
}

fn perturbed(p: &SingleParams, wrt: Perturbation, dx: f64) -> SingleParams {
    let mut q = *p;
    match wrt {
        Perturbation::Pi => q.pi += dx,
        Perturbation::DeltaSigmaTheta2 => q.sigma_theta2_informed += dx,
        Perturbation::SigmaTheta2 => q.sigma_theta2_true += dx,
        Perturbation::SigmaS2 => q.sigma_s2 += dx,
        Perturbation::Alpha => q.alpha += dx,
    }
    q
}

/// Central finite difference of a measure with respect to one primitive.
///
/// `h = None` uses 1e-5 * max(1, |base value|). Both perturbed parameter
/// sets must validate (homogeneous equality permitted), otherwise
/// `InvalidPerturbation`.
pub fn comparative_static(
    p: &SingleParams,
    target: MeasureTarget,
    wrt: Perturbation,
    h: Option<f64>,
) -> Result<f64, ModelError> {
    let base = match wrt {
        Perturbation::Pi => p.pi,
        Perturbation::DeltaSigmaTheta2 => p.sigma_theta2_informed - p.sigma_theta2_true,
        Perturbation::SigmaTheta2 => p.sigma_theta2_true,
        Perturbation::SigmaS2 => p.sigma_s2,
        Perturbation::Alpha => p.alpha,
    };
    let h = h.unwrap_or(1e-5 * base.abs().max(1.0));
    let eval = |dx: f64| -> Result<f64, ModelError> {
        let q = perturbed(p, wrt, dx)
            .validate_with(crate::model::PI_BOUNDS_DEFAULT, true)
            .map_err(|e| ModelError::InvalidPerturbation(e.to_string()))?;
        let m = measures(&equilibrium(&q)?, &q);
        Ok(match target {
            MeasureTarget::GammaM => m.gamma_m,
            MeasureTarget::GammaR => m.gamma_r,
        })
    };
    Ok((eval(h)? - eval(-h)?) / (2.0 * h))
}

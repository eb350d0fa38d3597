//! Primitives of the one-asset economy and the belief substitution that
//! generates every "informed-view" (starred) quantity.
//!
//! The market runs over four dates t = 0..3. A single risky asset pays
//! D ~ N(d_bar, sigma_d2) at t = 3. A mass `pi` of informed traders observes
//! a noisy signal s ~ N(D, sigma_s2) at t = 1; the rest infer what they can
//! from prices. Supply is 1 + theta_t at t = 1, 2 with theta_t drawn from the
//! true variance `sigma_theta2_true`, while informed traders dogmatically
//! price as if the supply variance were `sigma_theta2_informed` (larger).
//! That one wrong belief is the model's only friction.

use crate::error::ModelError;
use serde::{Deserialize, Serialize};

/// Default interior bounds for the informed mass `pi`. The demand loading
/// c2 = alpha*sigma_s2/pi diverges as pi -> 0 and price inversion degenerates
/// at pi -> 1, so validation keeps pi well inside (0, 1) by default.
pub const PI_BOUNDS_DEFAULT: (f64, f64) = (0.01, 0.99);

/// All scalar primitives of the single-asset economy, beliefs included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleParams {
    /// Ex-ante mean payoff.
    pub d_bar: f64,
    /// Payoff variance, > 0.
    pub sigma_d2: f64,
    /// Signal noise variance, > 0.
    pub sigma_s2: f64,
    /// True supply-shock variance (the distribution the world actually uses).
    pub sigma_theta2_true: f64,
    /// Supply-shock variance the informed believe in; must exceed the true
    /// value (equality only under an explicit homogeneous override).
    pub sigma_theta2_informed: f64,
    /// Absolute risk aversion, > 0.
    pub alpha: f64,
    /// Mass of informed traders, strictly interior.
    pub pi: f64,
    /// Riskless endowment per capita. Recorded for wealth accounting only;
    /// it never enters a price.
    pub riskless_supply: f64,
}

impl SingleParams {
    /// Validates with the default `pi` bounds and no homogeneous override.
    pub fn validate(self) -> Result<Self, ModelError> {
        self.validate_with(PI_BOUNDS_DEFAULT, false)
    }

    /// Validates against explicit `pi` bounds. `allow_homogeneous` permits
    /// equal supply-variance beliefs (the degenerate frictionless case);
    /// a strictly smaller informed variance is rejected either way.
    pub fn validate_with(
        self,
        pi_bounds: (f64, f64),
        allow_homogeneous: bool,
    ) -> Result<Self, ModelError> {
        fn positive(name: &'static str, v: f64) -> Result<(), ModelError> {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::invalid(name, format!("must be > 0, got {v}")));
            }
            Ok(())
        }
        if !self.d_bar.is_finite() {
            return Err(ModelError::invalid("d_bar", "must be finite"));
        }
        positive("sigma_d2", self.sigma_d2)?;
        positive("sigma_s2", self.sigma_s2)?;
        positive("sigma_theta2_true", self.sigma_theta2_true)?;
        positive("sigma_theta2_informed", self.sigma_theta2_informed)?;
        positive("alpha", self.alpha)?;
        let (lo, hi) = pi_bounds;
        if !(self.pi.is_finite() && self.pi >= lo && self.pi <= hi) {
            return Err(ModelError::invalid(
                "pi",
                format!("must lie in [{lo}, {hi}], got {}", self.pi),
            ));
        }
        if !(self.riskless_supply.is_finite() && self.riskless_supply >= 0.0) {
            return Err(ModelError::invalid(
                "riskless_supply",
                format!("must be >= 0, got {}", self.riskless_supply),
            ));
        }
        let gap = self.sigma_theta2_informed - self.sigma_theta2_true;
        if gap < 0.0 || (gap == 0.0 && !allow_homogeneous) {
            return Err(ModelError::invalid(
                "sigma_theta2_informed",
                format!(
                    "must exceed sigma_theta2_true ({} vs {}); equality requires \
                     the homogeneous override",
                    self.sigma_theta2_informed, self.sigma_theta2_true
                ),
            ));
        }
        Ok(self)
    }
}

/// Returns `p` with the true supply variance replaced by the informed belief.
///
/// Every starred coefficient (a2*, b2*, a1*, ...) is defined as the ordinary
/// closed form evaluated on this substituted parameter set. The substitution
/// is idempotent, and a homogeneous parameter set is its fixed point.
pub fn informed_view(p: &SingleParams) -> SingleParams {
    SingleParams {
        sigma_theta2_true: p.sigma_theta2_informed,
        ..*p
    }
}

/// Bayesian projection weights for the two information sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorWeights {
    /// Weight on the signal innovation: sigma_d2 / (sigma_d2 + sigma_s2).
    pub beta_s: f64,
    /// Weight on the price-inferred composite:
    /// sigma_d2 / (sigma_d2 + sigma_s2 + c2^2 * sigma_theta2).
    pub beta_xi: f64,
    /// Variance of the composite's noise: sigma_s2 + c2^2 * sigma_theta2.
    pub sigma_xi2: f64,
}

/// Projection weights under `p`'s supply variance for a given price loading
/// `c2`. For informed-view weights, pass `informed_view(p)`.
pub fn posterior_weights(p: &SingleParams, c2: f64) -> PosteriorWeights {
    let sigma_xi2 = p.sigma_s2 + c2 * c2 * p.sigma_theta2_true;
    PosteriorWeights {
        beta_s: p.sigma_d2 / (p.sigma_d2 + p.sigma_s2),
        beta_xi: p.sigma_d2 / (p.sigma_d2 + sigma_xi2),
        sigma_xi2,
    }
}

/// One draw of the exogenous world: payoff, signal, and the two supply shocks.
/// The composite the uninformed extract from the date-2 price,
/// xi_2 = s - d_bar - c2*theta_2, is derived on demand rather than stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldRealization {
    /// Realized payoff D.
    pub d: f64,
    /// Signal draw, s = D + noise.
    pub s: f64,
    /// Supply shock at t = 1.
    pub theta1: f64,
    /// Supply shock at t = 2.
    pub theta2: f64,
}

//! Independent Monte Carlo verification of the closed forms.
//!
//! Worlds are drawn from the true distribution (supply shocks always use
//! `sigma_theta2_true`; only the informed agents' demands embed the wrong
//! variance), demands are recomputed from the CARA first-order conditions
//! rather than from the solved coefficients, market clearing is checked at
//! the analytic prices, and the momentum/reversal covariances are estimated
//! by sampling.
//!
//! Because the analytic measures are payoff-conditional covariances, the
//! estimator is paired: each path draws one payoff D and two independent
//! noise bundles (s, theta_1, theta_2) and (s', theta_1', theta_2'). For
//! price functionals X, Y the per-path product (X - X')(Y - Y')/2 is an
//! unbiased estimate of Cov(X, Y | D), and averaging over paths estimates
//! the measure. Standard errors come from the per-path product variance.
//!
//! Reproducibility contract: path `i` consumes ChaCha8 stream `i` of the
//! run's seed, so results are independent of `batch_size` up to the order
//! of the final floating-point accumulation (low-order bits only) and runs
//! with equal `(seed, batch_size)` are bit-identical.

use crate::error::ModelError;
use crate::model::{posterior_weights, SingleParams, WorldRealization};
use crate::multi::{MultiCoefficients, MultiParams};
use crate::single::{price_path, EquilibriumCoefficients, PricePath};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Size and seeding of one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: u64,
    pub seed: u64,
    /// Accumulation block size; affects only the grouping of the final
    /// reduction, never the draws.
    pub batch_size: u64,
}

impl SimConfig {
    pub fn validate(self) -> Result<Self, ModelError> {
        if self.n_paths == 0 {
            return Err(ModelError::invalid("n_paths", "must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > self.n_paths {
            return Err(ModelError::invalid(
                "batch_size",
                format!(
                    "must lie in [1, n_paths = {}], got {}",
                    self.n_paths, self.batch_size
                ),
            ));
        }
        Ok(self)
    }
}

/// The dedicated generator for one path: stream `path_index` of `seed`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// One world draw: D first, then the signal conditional on D, then the two
/// supply shocks, all from the true distribution.
pub fn draw_world(p: &SingleParams, rng: &mut ChaCha8Rng) -> WorldRealization {
    let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let d = p.d_bar + p.sigma_d2.sqrt() * z[0];
    WorldRealization {
        d,
        s: d + p.sigma_s2.sqrt() * z[1],
        theta1: p.sigma_theta2_true.sqrt() * z[2],
        theta2: p.sigma_theta2_true.sqrt() * z[3],
    }
}

/// Redraws the noise bundle of `w` (signal and supply shocks) holding the
/// payoff fixed: the twin world of the paired covariance estimator.
fn draw_twin(p: &SingleParams, w: &WorldRealization, rng: &mut ChaCha8Rng) -> WorldRealization {
    let z: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
    WorldRealization {
        d: w.d,
        s: w.d + p.sigma_s2.sqrt() * z[0],
        theta1: p.sigma_theta2_true.sqrt() * z[1],
        theta2: p.sigma_theta2_true.sqrt() * z[2],
    }
}

/// Which side of the information divide an agent is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentType {
    Informed,
    Uninformed,
}

fn guard_variance(v: f64, which: &'static str) -> Result<f64, ModelError> {
    if !(v.is_finite() && v > f64::MIN_POSITIVE) {
        return Err(ModelError::ZeroVariance(which));
    }
    Ok(v)
}

/// Mean-variance pieces of one agent's FOC at date `t`: the conditional
/// expectation of the next price, its conditional variance, and the current
/// price. The demand is (e - s) / (alpha * v); the gross bound used by the
/// conditioning-aware clearing check is (|e| + |s|) / (alpha * v).
fn demand_parts(
    agent: AgentType,
    t: usize,
    w: &WorldRealization,
    prices: &PricePath,
    c: &EquilibriumCoefficients,
    p: &SingleParams,
) -> Result<(f64, f64, f64), ModelError> {
    let parts = match (agent, t) {
        (AgentType::Informed, 0) => (c.a1_star, c.var1_s1, prices.s0),
        (AgentType::Uninformed, 0) => (c.a1, c.var2_s1, prices.s0),
        (AgentType::Informed, 1) => {
            // resale valuation under the starred date-2 constants
            (c.a2_star + c.b2_star * (w.s - p.d_bar), c.var1_s2, prices.s1)
        }
        (AgentType::Uninformed, 1) => {
            // read the composite out of S_1, then value resale at market constants
            let xi = (prices.s1 - c.a1) / c.b1;
            (c.a2 + c.b2 * xi, c.var2_s2, prices.s1)
        }
        (AgentType::Informed, 2) => {
            let beta_s = p.sigma_d2 / (p.sigma_d2 + p.sigma_s2);
            let v1d = beta_s * p.sigma_s2;
            (p.d_bar + beta_s * (w.s - p.d_bar), v1d, prices.s2)
        }
        (AgentType::Uninformed, 2) => {
            let pw = posterior_weights(p, c.c2);
            let xi = (prices.s2 - c.a2) / c.b2;
            (p.d_bar + pw.beta_xi * xi, pw.beta_xi * pw.sigma_xi2, prices.s2)
        }
        _ => panic!("no demand at t = {t}; trading happens at t = 0, 1, 2"),
    };
    let (e, v, s) = parts;
    let v = guard_variance(v, "agent_demand")?;
    Ok((e, v, s))
}

/// CARA demand from first principles: x = (E_t(S_next) - S_t) / (alpha Var).
/// Uses only the agent's information at `t` (the signal for the informed,
/// prices for the uninformed). Panics if `t > 2`.
pub fn agent_demand(
    agent: AgentType,
    t: usize,
    w: &WorldRealization,
    prices: &PricePath,
    c: &EquilibriumCoefficients,
    p: &SingleParams,
) -> Result<f64, ModelError> {
    let (e, v, s) = demand_parts(agent, t, w, prices, c, p)?;
    Ok((e - s) / (p.alpha * v))
}

/// Market-clearing residuals of one world at the analytic prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingCheck {
    /// |pi x_1 + (1-pi) x_2 - supply| at t = 0, 1, 2.
    pub abs: [f64; 3],
    /// The same residuals scaled by the gross absolute demand flow
    /// max(1, pi g_1 + (1-pi) g_2 + |supply|), g_i = (|E_i| + |S|)/(alpha V_i):
    /// the natural backward-error measure, since each demand carries
    /// cancellation noise of that order.
    pub rel: [f64; 3],
}

impl ClearingCheck {
    pub fn max_abs(&self) -> f64 {
        self.abs.iter().fold(0.0, |a, &b| a.max(b))
    }
    pub fn max_rel(&self) -> f64 {
        self.rel.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Aggregates first-principles demands at every date and compares them with
/// the realized supply (1 at t = 0, 1 + theta_t afterwards).
pub fn clearing_check(
    c: &EquilibriumCoefficients,
    p: &SingleParams,
    w: &WorldRealization,
) -> Result<ClearingCheck, ModelError> {
    let prices = price_path(c, p, w);
    let mut abs = [0.0; 3];
    let mut rel = [0.0; 3];
    for t in 0..3 {
        let (e1, v1, s) = demand_parts(AgentType::Informed, t, w, &prices, c, p)?;
        let (e2, v2, _) = demand_parts(AgentType::Uninformed, t, w, &prices, c, p)?;
        let x1 = (e1 - s) / (p.alpha * v1);
        let x2 = (e2 - s) / (p.alpha * v2);
        let g1 = (e1.abs() + s.abs()) / (p.alpha * v1);
        let g2 = (e2.abs() + s.abs()) / (p.alpha * v2);
        let supply = match t {
            0 => 1.0,
            1 => 1.0 + w.theta1,
            _ => 1.0 + w.theta2,
        };
        let r = p.pi * x1 + (1.0 - p.pi) * x2 - supply;
        abs[t] = r.abs();
        rel[t] = r.abs() / (p.pi * g1 + (1.0 - p.pi) * g2 + supply.abs()).max(1.0);
    }
    Ok(ClearingCheck { abs, rel })
}

/// Monte Carlo estimates of the predictability measures with standard
/// errors, the worst in-sample clearing residual, and terminal wealth
/// statistics per agent type.
///
/// Wealth starts at W_0 = S_0 + riskless_supply per capita and follows
/// W_{t+1} = W_t + x_t (S_{t+1} - S_t) along the primary noise bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub n_paths: u64,
    pub gamma_m_hat: f64,
    pub gamma_m_se: f64,
    pub gamma_r_hat: f64,
    pub gamma_r_se: f64,
    /// Worst |pi x_1 + (1-pi) x_2 - (1 + theta_t)| across paths, t in {1, 2}
    /// (absolute max-norm: this is an identity check, not a statistic).
    pub clearing_residual_max: f64,
    pub mean_wealth_informed: f64,
    pub var_wealth_informed: f64,
    pub mean_wealth_uninformed: f64,
    pub var_wealth_uninformed: f64,
}

/// Everything observable about one simulated path, handed to the observer
/// callback of [`simulate_with`] (used for per-path dumps and diagnostics).
#[derive(Debug, Clone, Copy)]
pub struct PathRecord<'a> {
    pub index: u64,
    pub world: &'a WorldRealization,
    /// The twin noise bundle sharing the payoff (estimator pairing).
    pub twin: &'a WorldRealization,
    pub prices: &'a PricePath,
    /// Demands at t = 0, 1, 2.
    pub demand_informed: [f64; 3],
    pub demand_uninformed: [f64; 3],
    /// Wealth at t = 0..3.
    pub wealth_informed: [f64; 4],
    pub wealth_uninformed: [f64; 4],
    /// Clearing residuals at t = 1, 2 (absolute).
    pub clearing_abs: [f64; 2],
}

struct Welford {
    sum: f64,
    sum_sq: f64,
}

impl Welford {
    fn new() -> Self {
        Welford { sum: 0.0, sum_sq: 0.0 }
    }
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }
    fn merge(&mut self, other: &Welford) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
    fn mean(&self, n: f64) -> f64 {
        self.sum / n
    }
    /// Unbiased sample variance; infinite for a single observation.
    fn variance(&self, n: f64) -> f64 {
        if n < 2.0 {
            return f64::INFINITY;
        }
        let m = self.mean(n);
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }
    fn se(&self, n: f64) -> f64 {
        (self.variance(n) / n).sqrt()
    }
}

/// Runs the paired Monte Carlo and hands every path to `observer`.
pub fn simulate_with<F: FnMut(&PathRecord)>(
    p: &SingleParams,
    c: &EquilibriumCoefficients,
    cfg: &SimConfig,
    mut observer: F,
) -> Result<SampleMoments, ModelError> {
    let cfg = cfg.validate()?;
    let mut pm = Welford::new();
    let mut pr = Welford::new();
    let mut wi = Welford::new();
    let mut wu = Welford::new();
    let mut clearing_max = 0.0f64;

    let mut start = 0u64;
    while start < cfg.n_paths {
        let end = (start + cfg.batch_size).min(cfg.n_paths);
        // batch-local accumulators keep the reduction order fixed per batch
        let mut b_pm = Welford::new();
        let mut b_pr = Welford::new();
        let mut b_wi = Welford::new();
        let mut b_wu = Welford::new();
        for i in start..end {
            let mut rng = path_rng(cfg.seed, i);
            let w = draw_world(p, &mut rng);
            let twin = draw_twin(p, &w, &mut rng);
            let pa = price_path(c, p, &w);
            let pb = price_path(c, p, &twin);

            // paired products estimate the payoff-conditional covariances
            let dm = (pa.s2 - pa.s1) - (pb.s2 - pb.s1);
            let dx = (pa.s1 - pa.s0) - (pb.s1 - pb.s0);
            let dl = (pa.s3 - pa.s2) - (pb.s3 - pb.s2);
            b_pm.add(0.5 * dm * dx);
            b_pr.add(0.5 * dm * dl);

            // first-principles demands and wealth along the primary bundle
            let mut xi = [0.0; 3];
            let mut xu = [0.0; 3];
            for t in 0..3 {
                xi[t] = agent_demand(AgentType::Informed, t, &w, &pa, c, p)?;
                xu[t] = agent_demand(AgentType::Uninformed, t, &w, &pa, c, p)?;
            }
            let steps = [pa.s1 - pa.s0, pa.s2 - pa.s1, pa.s3 - pa.s2];
            let w0 = c.s0 + p.riskless_supply;
            let mut wealth_i = [w0; 4];
            let mut wealth_u = [w0; 4];
            for t in 0..3 {
                wealth_i[t + 1] = wealth_i[t] + xi[t] * steps[t];
                wealth_u[t + 1] = wealth_u[t] + xu[t] * steps[t];
            }
            b_wi.add(wealth_i[3]);
            b_wu.add(wealth_u[3]);

            let r1 = (p.pi * xi[1] + (1.0 - p.pi) * xu[1] - (1.0 + w.theta1)).abs();
            let r2 = (p.pi * xi[2] + (1.0 - p.pi) * xu[2] - (1.0 + w.theta2)).abs();
            clearing_max = clearing_max.max(r1).max(r2);

            observer(&PathRecord {
                index: i,
                world: &w,
                twin: &twin,
                prices: &pa,
                demand_informed: xi,
                demand_uninformed: xu,
                wealth_informed: wealth_i,
                wealth_uninformed: wealth_u,
                clearing_abs: [r1, r2],
            });
        }
        pm.merge(&b_pm);
        pr.merge(&b_pr);
        wi.merge(&b_wi);
        wu.merge(&b_wu);
        start = end;
    }

    let n = cfg.n_paths as f64;
    Ok(SampleMoments {
        n_paths: cfg.n_paths,
        gamma_m_hat: pm.mean(n),
        gamma_m_se: pm.se(n),
        gamma_r_hat: pr.mean(n),
        gamma_r_se: pr.se(n),
        clearing_residual_max: clearing_max,
        mean_wealth_informed: wi.mean(n),
        var_wealth_informed: wi.variance(n),
        mean_wealth_uninformed: wu.mean(n),
        var_wealth_uninformed: wu.variance(n),
    })
}

/// Paired Monte Carlo without an observer.
pub fn simulate(
    p: &SingleParams,
    c: &EquilibriumCoefficients,
    cfg: &SimConfig,
) -> Result<SampleMoments, ModelError> {
    simulate_with(p, c, cfg, |_| {})
}

/// One draw of the N-asset world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldRealizationMulti {
    pub d: DVector<f64>,
    pub s: DVector<f64>,
    pub theta1: DVector<f64>,
    pub theta2: DVector<f64>,
}

/// Prices along one N-asset draw; S_3 is the payoff vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePathMulti {
    pub s0: DVector<f64>,
    pub s1: DVector<f64>,
    pub s2: DVector<f64>,
    pub s3: DVector<f64>,
}

/// Prices implied by one N-asset world draw.
pub fn price_path_multi(
    c: &MultiCoefficients,
    p: &MultiParams,
    w: &WorldRealizationMulti,
) -> PricePathMulti {
    let u = &w.s - &p.d_bar;
    PricePathMulti {
        s0: c.s0.clone(),
        s1: &c.a1 + &c.b1 * (&u - &c.c1 * &w.theta1),
        s2: &c.a2 + &c.b2 * (&u - &c.c2 * &w.theta2),
        s3: w.d.clone(),
    }
}

struct MultiFactors {
    l_d: DMatrix<f64>,
    l_s: DMatrix<f64>,
    l_t: DMatrix<f64>,
}

fn factors(p: &MultiParams) -> Result<MultiFactors, ModelError> {
    let chol = |m: &DMatrix<f64>, name: &'static str| -> Result<DMatrix<f64>, ModelError> {
        Ok(Cholesky::<f64, Dyn>::new(m.clone())
            .ok_or(ModelError::invalid(name, "not positive definite"))?
            .l())
    };
    Ok(MultiFactors {
        l_d: chol(&p.sigma_d, "sigma_d")?,
        l_s: chol(&p.sigma_s, "sigma_s")?,
        l_t: chol(&p.sigma_theta_true, "sigma_theta_true")?,
    })
}

fn gaussian_vec(n: usize, l: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    l * z
}

fn draw_world_multi_with(
    p: &MultiParams,
    f: &MultiFactors,
    rng: &mut ChaCha8Rng,
) -> WorldRealizationMulti {
    let d = &p.d_bar + gaussian_vec(p.n, &f.l_d, rng);
    let s = &d + gaussian_vec(p.n, &f.l_s, rng);
    WorldRealizationMulti {
        d,
        s,
        theta1: gaussian_vec(p.n, &f.l_t, rng),
        theta2: gaussian_vec(p.n, &f.l_t, rng),
    }
}

fn draw_twin_multi(
    p: &MultiParams,
    f: &MultiFactors,
    w: &WorldRealizationMulti,
    rng: &mut ChaCha8Rng,
) -> WorldRealizationMulti {
    let s = &w.d + gaussian_vec(p.n, &f.l_s, rng);
    WorldRealizationMulti {
        d: w.d.clone(),
        s,
        theta1: gaussian_vec(p.n, &f.l_t, rng),
        theta2: gaussian_vec(p.n, &f.l_t, rng),
    }
}

/// One N-asset world draw via lower-triangular Cholesky factors of the
/// covariance blocks: D, then s conditional on D, then the supply shocks.
pub fn draw_world_multi(
    p: &MultiParams,
    rng: &mut ChaCha8Rng,
) -> Result<WorldRealizationMulti, ModelError> {
    Ok(draw_world_multi_with(p, &factors(p)?, rng))
}

/// Precomputed inverse-variance maps for the N-asset demands.
struct MultiDemandCtx {
    beta_s: DMatrix<f64>,
    beta_xi: DMatrix<f64>,
    /// (alpha V)^-1 per (date, type): index [t][0] informed, [t][1] uninformed.
    maps: [[DMatrix<f64>; 2]; 3],
    b1_inv: DMatrix<f64>,
    b2_inv: DMatrix<f64>,
}

fn multi_demand_ctx(
    c: &MultiCoefficients,
    p: &MultiParams,
) -> Result<MultiDemandCtx, ModelError> {
    let inv = |m: DMatrix<f64>, which: &'static str| -> Result<DMatrix<f64>, ModelError> {
        m.try_inverse().ok_or(ModelError::SingularMatrix(which))
    };
    let sigma_xi = &p.sigma_s + &c.c2 * &p.sigma_theta_true * c.c2.transpose();
    let beta_s = &p.sigma_d * inv(&p.sigma_d + &p.sigma_s, "sigma_d + sigma_s")?;
    let beta_xi = &p.sigma_d * inv(&p.sigma_d + &sigma_xi, "sigma_d + sigma_xi")?;
    let v1 = &beta_s * &p.sigma_s;
    let v2 = &beta_xi * &sigma_xi;
    Ok(MultiDemandCtx {
        maps: [
            [
                inv(&c.var1_s1 * p.alpha, "var1_s1")?,
                inv(&c.var2_s1 * p.alpha, "var2_s1")?,
            ],
            [
                inv(&c.var1_s2 * p.alpha, "var1_s2")?,
                inv(&c.var2_s2 * p.alpha, "var2_s2")?,
            ],
            [inv(v1 * p.alpha, "var1_d")?, inv(v2 * p.alpha, "var2_d")?],
        ],
        beta_s,
        beta_xi,
        b1_inv: inv(c.b1.clone(), "b1")?,
        b2_inv: inv(c.b2.clone(), "b2")?,
    })
}

/// Expectation of the next price per (agent, date), from the agent's own
/// information set.
fn multi_expectation(
    agent: AgentType,
    t: usize,
    w: &WorldRealizationMulti,
    prices: &PricePathMulti,
    ctx: &MultiDemandCtx,
    c: &MultiCoefficients,
    p: &MultiParams,
) -> DVector<f64> {
    match (agent, t) {
        (AgentType::Informed, 0) => c.a1_star.clone(),
        (AgentType::Uninformed, 0) => c.a1.clone(),
        (AgentType::Informed, 1) => &c.a2_star + &c.b2_star * (&w.s - &p.d_bar),
        (AgentType::Uninformed, 1) => {
            let xi = &ctx.b1_inv * (&prices.s1 - &c.a1);
            &c.a2 + &c.b2 * xi
        }
        (AgentType::Informed, 2) => &p.d_bar + &ctx.beta_s * (&w.s - &p.d_bar),
        (AgentType::Uninformed, 2) => {
            let xi = &ctx.b2_inv * (&prices.s2 - &c.a2);
            &p.d_bar + &ctx.beta_xi * xi
        }
        _ => panic!("no demand at t = {t}; trading happens at t = 0, 1, 2"),
    }
}

fn price_at(prices: &PricePathMulti, t: usize) -> &DVector<f64> {
    match t {
        0 => &prices.s0,
        1 => &prices.s1,
        _ => &prices.s2,
    }
}

/// N-asset CARA demand from first principles: (alpha Var)^-1 (E - S).
pub fn agent_demand_multi(
    agent: AgentType,
    t: usize,
    w: &WorldRealizationMulti,
    prices: &PricePathMulti,
    c: &MultiCoefficients,
    p: &MultiParams,
) -> Result<DVector<f64>, ModelError> {
    let ctx = multi_demand_ctx(c, p)?;
    let e = multi_expectation(agent, t, w, prices, &ctx, c, p);
    let map = &ctx.maps[t][if agent == AgentType::Informed { 0 } else { 1 }];
    Ok(map * (e - price_at(prices, t)))
}

/// Clearing residuals of one N-asset world, max over components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingCheckMulti {
    pub abs: [f64; 3],
    pub rel: [f64; 3],
}

impl ClearingCheckMulti {
    pub fn max_abs(&self) -> f64 {
        self.abs.iter().fold(0.0, |a, &b| a.max(b))
    }
    pub fn max_rel(&self) -> f64 {
        self.rel.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Aggregates N-asset demands at every date against realized supply, with
/// the same gross-flow relative scaling as the scalar check (entrywise,
/// using |M| v products for the gross bounds).
pub fn clearing_check_multi(
    c: &MultiCoefficients,
    p: &MultiParams,
    w: &WorldRealizationMulti,
) -> Result<ClearingCheckMulti, ModelError> {
    let ctx = multi_demand_ctx(c, p)?;
    let prices = price_path_multi(c, p, w);
    let ones = DVector::repeat(p.n, 1.0);
    let mut abs = [0.0; 3];
    let mut rel = [0.0; 3];
    for t in 0..3 {
        let s = price_at(&prices, t);
        let e1 = multi_expectation(AgentType::Informed, t, w, &prices, &ctx, c, p);
        let e2 = multi_expectation(AgentType::Uninformed, t, w, &prices, &ctx, c, p);
        let m1 = &ctx.maps[t][0];
        let m2 = &ctx.maps[t][1];
        let x1 = m1 * (&e1 - s);
        let x2 = m2 * (&e2 - s);
        let g1 = m1.abs() * (e1.abs() + s.abs());
        let g2 = m2.abs() * (e2.abs() + s.abs());
        let supply = match t {
            0 => ones.clone(),
            1 => &ones + &w.theta1,
            _ => &ones + &w.theta2,
        };
        let r = x1 * p.pi + x2 * (1.0 - p.pi) - &supply;
        let scale = g1 * p.pi + g2 * (1.0 - p.pi) + supply.abs();
        abs[t] = r.abs().max();
        rel[t] = r
            .iter()
            .zip(scale.iter())
            .map(|(ri, si)| ri.abs() / si.max(1.0))
            .fold(0.0, f64::max);
    }
    Ok(ClearingCheckMulti { abs, rel })
}

/// Matrix analogue of [`SampleMoments`]: entrywise estimates and standard
/// errors for the cross-sectional measure matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSampleMoments {
    pub n_paths: u64,
    /// gamma_m_hat[i][j] estimates Cov((S2-S1)_i, (S1-S0)_j | D).
    pub gamma_m_hat: DMatrix<f64>,
    pub gamma_m_se: DMatrix<f64>,
    /// gamma_r_hat[i][j] estimates Cov((S2-S1)_i, (D-S2)_j | D).
    pub gamma_r_hat: DMatrix<f64>,
    pub gamma_r_se: DMatrix<f64>,
    pub clearing_residual_max: f64,
    pub mean_wealth_informed: f64,
    pub var_wealth_informed: f64,
    pub mean_wealth_uninformed: f64,
    pub var_wealth_uninformed: f64,
}

struct MatWelford {
    sum: DMatrix<f64>,
    sum_sq: DMatrix<f64>,
}

impl MatWelford {
    fn new(n: usize) -> Self {
        MatWelford {
            sum: DMatrix::zeros(n, n),
            sum_sq: DMatrix::zeros(n, n),
        }
    }
    fn add(&mut self, x: &DMatrix<f64>) {
        self.sum += x;
        self.sum_sq += x.component_mul(x);
    }
    fn merge(&mut self, o: &MatWelford) {
        self.sum += &o.sum;
        self.sum_sq += &o.sum_sq;
    }
    fn mean(&self, n: f64) -> DMatrix<f64> {
        &self.sum / n
    }
    fn se(&self, n: f64) -> DMatrix<f64> {
        let m = self.mean(n);
        let var = (&self.sum_sq - m.component_mul(&m) * n) / (n - 1.0);
        var.map(|v| (v.max(0.0) / n).sqrt())
    }
}

/// Paired Monte Carlo for the N-asset market.
pub fn simulate_multi(
    p: &MultiParams,
    c: &MultiCoefficients,
    cfg: &SimConfig,
) -> Result<MultiSampleMoments, ModelError> {
    let cfg = cfg.validate()?;
    let f = factors(p)?;
    let ctx = multi_demand_ctx(c, p)?;
    let n = p.n;
    let ones = DVector::repeat(n, 1.0);

    let mut pm = MatWelford::new(n);
    let mut pr = MatWelford::new(n);
    let mut wi = Welford::new();
    let mut wu = Welford::new();
    let mut clearing_max = 0.0f64;

    let mut start = 0u64;
    while start < cfg.n_paths {
        let end = (start + cfg.batch_size).min(cfg.n_paths);
        let mut b_pm = MatWelford::new(n);
        let mut b_pr = MatWelford::new(n);
        let mut b_wi = Welford::new();
        let mut b_wu = Welford::new();
        for i in start..end {
            let mut rng = path_rng(cfg.seed, i);
            let w = draw_world_multi_with(p, &f, &mut rng);
            let twin = draw_twin_multi(p, &f, &w, &mut rng);
            let pa = price_path_multi(c, p, &w);
            let pb = price_path_multi(c, p, &twin);

            let dm = (&pa.s2 - &pa.s1) - (&pb.s2 - &pb.s1);
            let dx = (&pa.s1 - &pa.s0) - (&pb.s1 - &pb.s0);
            let dl = (&pa.s3 - &pa.s2) - (&pb.s3 - &pb.s2);
            b_pm.add(&(&dm * dx.transpose() * 0.5));
            b_pr.add(&(&dm * dl.transpose() * 0.5));

            // per-capita start: one share of each asset plus the bond
            let mut wealth_i = pa.s0.sum();
            let mut wealth_u = wealth_i;
            for t in 0..3 {
                let s = price_at(&pa, t);
                let e1 = multi_expectation(AgentType::Informed, t, &w, &pa, &ctx, c, p);
                let e2 = multi_expectation(AgentType::Uninformed, t, &w, &pa, &ctx, c, p);
                let x1 = &ctx.maps[t][0] * (e1 - s);
                let x2 = &ctx.maps[t][1] * (e2 - s);
                let next = if t == 2 { &pa.s3 } else { price_at(&pa, t + 1) };
                let step = next - s;
                wealth_i += x1.dot(&step);
                wealth_u += x2.dot(&step);
                if t > 0 {
                    let theta = if t == 1 { &w.theta1 } else { &w.theta2 };
                    let r = &x1 * p.pi + &x2 * (1.0 - p.pi) - (&ones + theta);
                    clearing_max = clearing_max.max(r.abs().max());
                }
            }
            b_wi.add(wealth_i);
            b_wu.add(wealth_u);
        }
        pm.merge(&b_pm);
        pr.merge(&b_pr);
        wi.merge(&b_wi);
        wu.merge(&b_wu);
        start = end;
    }

    let nf = cfg.n_paths as f64;
    Ok(MultiSampleMoments {
        n_paths: cfg.n_paths,
        gamma_m_hat: pm.mean(nf),
        gamma_m_se: pm.se(nf),
        gamma_r_hat: pr.mean(nf),
        gamma_r_se: pr.se(nf),
        clearing_residual_max: clearing_max,
        mean_wealth_informed: wi.mean(nf),
        var_wealth_informed: wi.variance(nf),
        mean_wealth_uninformed: wu.mean(nf),
        var_wealth_uninformed: wu.variance(nf),
    })
}

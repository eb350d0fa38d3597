//! Computes the payoff-conditional momentum and reversal measures in both
//! regimes: the baseline (risk aversion 0.5, prices mean-revert throughout)
//! and the low-aversion point (0.1) where early price changes continue.
//! Also evaluates the comparative statics that separate the regimes.
//!
//! Run with `cargo run --example momentum_measures`.

use hetbeliefs::single::{
    comparative_static, equilibrium, measures, MeasureTarget, Perturbation,
};
use hetbeliefs::model::SingleParams;

fn report(label: &str, p: &SingleParams) -> Result<(), hetbeliefs::ModelError> {
    let c = equilibrium(p)?;
    let m = measures(&c, p);
    println!("{label} (alpha = {}):", p.alpha);
    println!("  gamma_m = {:+.6e}  Cov(S2-S1, S1-S0 | D)", m.gamma_m);
    println!("  gamma_r = {:+.6e}  Cov(S2-S1, D-S2  | D)", m.gamma_r);
    println!(
        "  momentum {}; threshold statistic {:+.6e}",
        if m.momentum_holds { "holds" } else { "fails" },
        m.condition_value
    );
    Ok(())
}

fn main() -> Result<(), hetbeliefs::ModelError> {
    let base = SingleParams {
        d_bar: 100.0,
        sigma_d2: 4.0,
        sigma_s2: 1.0,
        sigma_theta2_true: 1.0,
        sigma_theta2_informed: 4.0,
        alpha: 0.5,
        pi: 0.5,
        riskless_supply: 0.0,
    };
    let low_aversion = SingleParams { alpha: 0.1, ..base };

    report("baseline", &base)?;
    println!();
    report("low-aversion benchmark", &low_aversion)?;

    println!("\nreversal is universal: gamma_r < 0 at every valid parameter set;");
    println!("momentum needs informed trading to dominate the date-1 price, which");
    println!("happens when risk aversion (or signal noise) is small.\n");

    let d_pi = comparative_static(&low_aversion, MeasureTarget::GammaM, Perturbation::Pi, None)?;
    let d_gap = comparative_static(
        &low_aversion,
        MeasureTarget::GammaM,
        Perturbation::DeltaSigmaTheta2,
        None,
    )?;
    let d_theta = comparative_static(&base, MeasureTarget::GammaR, Perturbation::SigmaTheta2, None)?;
    let d_sig = comparative_static(&base, MeasureTarget::GammaR, Perturbation::SigmaS2, None)?;

    println!("central differences at the benchmarks:");
    println!("  d gamma_m / d pi          = {d_pi:+.6e}   (more informed trading)");
    println!("  d gamma_m / d belief gap  = {d_gap:+.6e}   (informed overstate supply noise more)");
    println!("  d gamma_r / d sigma_th2   = {d_theta:+.6e}   (noisier true supply)");
    println!("  d gamma_r / d sigma_s2    = {d_sig:+.6e}   (noisier signal)");
    println!("\nnote the belief-gap response: at this benchmark a wider gap lowers");
    println!("payoff-conditional momentum, because the informed also perceive more");
    println!("resale risk and trade less aggressively on their signal.");
    Ok(())
}

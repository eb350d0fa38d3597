//! Demonstrates the lead-lag effect: mute asset 2's signal and watch its
//! price drift anyway, pulled along by asset 1's signal through the payoff
//! covariance. Asset 1 has the more precise signal, so it leads. With
//! independent payoffs the muted asset's drift is exactly zero.
//!
//! Run with `cargo run --example lead_lag`.

use hetbeliefs::multi::{leadlag_experiment, MultiParams};
use nalgebra::{DMatrix, DVector};

fn params(payoff_cov: f64) -> MultiParams {
    MultiParams {
        n: 2,
        d_bar: DVector::from_vec(vec![100.0, 100.0]),
        sigma_d: DMatrix::from_row_slice(2, 2, &[4.0, payoff_cov, payoff_cov, 4.0]),
        // asset 1's signal is 16x more precise than asset 2's
        sigma_s: DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 4.0]),
        sigma_theta_true: DMatrix::identity(2, 2),
        sigma_theta_informed: DMatrix::identity(2, 2) * 4.0,
        alpha: 0.5,
        pi: 0.5,
    }
}

fn main() -> Result<(), hetbeliefs::ModelError> {
    let s_active = DVector::from_vec(vec![103.0, 100.0]);

    let report = leadlag_experiment(&params(2.0), &[1], &s_active)?;
    println!("payoff covariance +2, asset 2 muted, asset 1 signal three above mean\n");
    println!(
        "signal precision ratios (noise share): asset 1 = {:.4}, asset 2 = {:.4}",
        report.precision_ratio[0], report.precision_ratio[1]
    );
    println!(
        "expected date-1 move:  asset 1 {:+.6}, asset 2 {:+.6}",
        report.drift_t1[0], report.drift_t1[1]
    );
    println!(
        "expected date-2 move:  asset 1 {:+.6}, asset 2 {:+.6}",
        report.drift_t2[0], report.drift_t2[1]
    );
    println!("asset 2 moves at date 1 despite having no signal of its own: the");
    println!("lagged response to its neighbor's news is the lead-lag effect.\n");

    let negative = leadlag_experiment(&params(-2.0), &[1], &s_active)?;
    println!(
        "flip the payoff covariance to -2: asset 2 drift becomes {:+.6}",
        negative.drift_t1[1]
    );

    let independent = leadlag_experiment(&params(0.0), &[1], &s_active)?;
    println!(
        "independent payoffs: asset 2 drift is exactly {} (no channel left)",
        independent.drift_t1[1]
    );
    Ok(())
}

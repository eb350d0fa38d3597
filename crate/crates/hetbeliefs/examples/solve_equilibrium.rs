//! Solves the four-period equilibrium once and walks through the price
//! coefficients: what each one loads on, how the informed agents' inflated
//! supply-variance belief shows up as the starred constants, and how prices
//! respond to the signal and the supply shocks.
//!
//! Run with `cargo run --example solve_equilibrium`.

use hetbeliefs::model::{SingleParams, WorldRealization};
use hetbeliefs::single::{equilibrium, price_path};

fn main() -> Result<(), hetbeliefs::ModelError> {
    let p = SingleParams {
        d_bar: 100.0,
        sigma_d2: 4.0,
        sigma_s2: 1.0,
        sigma_theta2_true: 1.0,
        sigma_theta2_informed: 4.0,
        alpha: 0.5,
        pi: 0.5,
        riskless_supply: 0.0,
    }
    .validate()?;
    let c = equilibrium(&p)?;

    println!("payoff mean {}, informed mass {}, risk aversion {}", p.d_bar, p.pi, p.alpha);
    println!(
        "informed believe supply variance {} where the truth is {}\n",
        p.sigma_theta2_informed, p.sigma_theta2_true
    );

    println!("date-2 price: S2 = a2 + b2 (s - d_bar - c2 theta2)");
    println!("  a2 = {:.6}   level net of the risk premium", c.a2);
    println!("  b2 = {:.6}   weight on the signal innovation", c.b2);
    println!("  c2 = {:.6}   supply shock priced as signal noise", c.c2);
    println!("  starred (informed belief): a2* = {:.6}, b2* = {:.6}", c.a2_star, c.b2_star);
    println!("  b2* < b2: overstating supply noise discounts the price signal\n");

    println!("date-1 price: S1 = a1 + b1 (s - d_bar - c1 theta1)");
    println!("  a1 = {:.6}, b1 = {:.6}, c1 = {:.6}", c.a1, c.b1, c.c1);
    println!("  b2* < b1 < b2: date-1 price blends both groups' signal weights\n");

    println!("date-0 price (no information yet): S0 = {:.6}", c.s0);
    println!(
        "perceived resale variances at t=1: informed {:.6}, uninformed {:.6}",
        c.var1_s2, c.var2_s2
    );

    // a concrete world: strong signal, one unit of extra supply at date 1
    let w = WorldRealization { d: 102.0, s: 103.0, theta1: 1.0, theta2: 0.0 };
    let path = price_path(&c, &p, &w);
    println!("\nworld: payoff {}, signal {}, supply shocks ({}, {})", w.d, w.s, w.theta1, w.theta2);
    println!(
        "prices: S0 = {:.4}, S1 = {:.4}, S2 = {:.4}, payoff = {:.4}",
        path.s0, path.s1, path.s2, path.s3
    );
    println!(
        "the date-1 supply shock depresses S1 by b1 c1 = {:.4} (absorbed, then reverts)",
        c.b1 * c.c1
    );
    Ok(())
}

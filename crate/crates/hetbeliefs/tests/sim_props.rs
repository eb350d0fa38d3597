//! Simulator invariants that go beyond the acceptance gate: per-path budget
//! accounting, standard-error scaling, estimator orientation in the matrix
//! model, and bit-level agreement between the scalar and one-asset paths.

use hetbeliefs::model::SingleParams;
use hetbeliefs::multi::{cross_measures, embed_single, equilibrium_multi, MultiParams};
use hetbeliefs::sim::{
    path_rng, price_path_multi, simulate, simulate_multi, simulate_with, SimConfig,
    WorldRealizationMulti,
};
use hetbeliefs::single::{equilibrium, measures};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngExt;
use rand_distr::StandardNormal;

fn baseline() -> SingleParams {
    SingleParams {
        d_bar: 100.0,
        sigma_d2: 4.0,
        sigma_s2: 1.0,
        sigma_theta2_true: 1.0,
        sigma_theta2_informed: 4.0,
        alpha: 0.5,
        pi: 0.5,
        riskless_supply: 0.0,
    }
}

fn cfg(n_paths: u64, seed: u64) -> SimConfig {
    SimConfig {
        n_paths,
        seed,
        batch_size: 4096.min(n_paths),
    }
}

#[test]
fn aggregate_wealth_tracks_the_market_portfolio() {
    // Clearing pins aggregate holdings to realized supply, so aggregate
    // wealth must equal the initial endowment plus the market portfolio's
    // capital gains: pi W_I + (1-pi) W_U = W_0 + sum_t supply_t (S_t+1 - S_t)
    // with supply 1, 1 + theta_1, 1 + theta_2.
    let p = baseline();
    let c = equilibrium(&p).unwrap();
    let w0 = c.s0 + p.riskless_supply;
    let mut worst = 0.0f64;
    simulate_with(&p, &c, &cfg(20_000, 17), |rec| {
        let s = rec.prices;
        let lhs = p.pi * rec.wealth_informed[3] + (1.0 - p.pi) * rec.wealth_uninformed[3];
        let rhs = w0
            + (s.s1 - s.s0)
            + (1.0 + rec.world.theta1) * (s.s2 - s.s1)
            + (1.0 + rec.world.theta2) * (s.s3 - s.s2);
        let gap = (lhs - rhs).abs() / rhs.abs().max(1.0);
        worst = worst.max(gap);
        assert!(
            gap <= 1e-9,
            "path {}: aggregate wealth {lhs:.12e} vs market gains {rhs:.12e}",
            rec.index
        );
        assert_eq!(rec.wealth_informed[0], w0);
        assert_eq!(rec.wealth_uninformed[0], w0);
    })
    .unwrap();
    println!("worst relative budget gap over 20k paths: {worst:.3e}");
}

#[test]
fn standard_errors_shrink_like_sqrt_n() {
    let p = baseline();
    let c = equilibrium(&p).unwrap();
    let small = simulate(&p, &c, &cfg(100_000, 3)).unwrap();
    let large = simulate(&p, &c, &cfg(400_000, 3)).unwrap();
    for (name, s, l) in [
        ("gamma_m", small.gamma_m_se, large.gamma_m_se),
        ("gamma_r", small.gamma_r_se, large.gamma_r_se),
    ] {
        let ratio = l / s;
        assert!(
            (0.375..=0.625).contains(&ratio),
            "{name}: se ratio at 4x paths is {ratio:.4}, expected about 0.5"
        );
    }
}

#[test]
fn paired_estimates_match_closed_forms_at_the_baseline() {
    let p = baseline();
    let c = equilibrium(&p).unwrap();
    let m = measures(&c, &p);
    let est = simulate(&p, &c, &cfg(200_000, 11)).unwrap();
    let gap_m = (est.gamma_m_hat - m.gamma_m).abs() / est.gamma_m_se;
    let gap_r = (est.gamma_r_hat - m.gamma_r).abs() / est.gamma_r_se;
    assert!(gap_m <= 4.0, "gamma_m off by {gap_m:.2} se");
    assert!(gap_r <= 4.0, "gamma_r off by {gap_r:.2} se");
    assert!(est.clearing_residual_max <= 1e-8);
    // Variance perceptions differ, so informed positions are larger and
    // their realized wealth spread must be wider.
    assert!(est.var_wealth_informed > est.var_wealth_uninformed);
}

#[test]
fn simulation_is_deterministic_given_seed_and_batch() {
    let p = baseline();
    let c = equilibrium(&p).unwrap();
    let a = simulate(&p, &c, &cfg(50_000, 23)).unwrap();
    let b = simulate(&p, &c, &cfg(50_000, 23)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_asset_simulation_agrees_with_the_scalar_path() {
    // Cholesky of a 1x1 block is the scalar square root, so an embedded
    // one-asset run consumes the same draw stream as the scalar simulator
    // and must land on the same estimates up to arithmetic association.
    let p = baseline();
    let c = equilibrium(&p).unwrap();
    let run = cfg(50_000, 42);
    let scalar = simulate(&p, &c, &run).unwrap();

    let pm = embed_single(&p);
    let cm = equilibrium_multi(&pm).unwrap();
    let matrix = simulate_multi(&pm, &cm, &run).unwrap();

    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-30);
    assert!(rel(matrix.gamma_m_hat[(0, 0)], scalar.gamma_m_hat) <= 1e-12);
    assert!(rel(matrix.gamma_m_se[(0, 0)], scalar.gamma_m_se) <= 1e-12);
    assert!(rel(matrix.gamma_r_hat[(0, 0)], scalar.gamma_r_hat) <= 1e-12);
    assert!(rel(matrix.gamma_r_se[(0, 0)], scalar.gamma_r_se) <= 1e-12);
    assert!(rel(matrix.mean_wealth_informed, scalar.mean_wealth_informed) <= 1e-12);
    assert!(rel(matrix.var_wealth_uninformed, scalar.var_wealth_uninformed) <= 1e-12);
    assert!(matrix.clearing_residual_max <= 1e-8);
}

#[test]
fn matrix_estimates_match_the_analytic_measures_entrywise() {
    let p = MultiParams {
        n: 2,
        d_bar: DVector::from_vec(vec![100.0, 100.0]),
        sigma_d: DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 4.0]),
        sigma_s: DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 4.0]),
        sigma_theta_true: DMatrix::identity(2, 2),
        sigma_theta_informed: DMatrix::identity(2, 2) * 4.0,
        alpha: 0.5,
        pi: 0.5,
    }
    .validate()
    .unwrap();
    let c = equilibrium_multi(&p).unwrap();
    let g = cross_measures(&c, &p);
    let est = simulate_multi(&p, &c, &cfg(200_000, 9)).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let gap_m =
                (est.gamma_m_hat[(i, j)] - g.gamma_m[(i, j)]).abs() / est.gamma_m_se[(i, j)];
            let gap_r =
                (est.gamma_r_hat[(i, j)] - g.gamma_r[(i, j)]).abs() / est.gamma_r_se[(i, j)];
            assert!(gap_m <= 4.0, "gamma_m[{i},{j}] off by {gap_m:.2} se");
            assert!(gap_r <= 4.0, "gamma_r[{i},{j}] off by {gap_r:.2} se");
        }
    }
    assert!(est.clearing_residual_max <= 1e-8);
}

#[test]
fn paired_draws_and_estimator_follow_the_documented_contract() {
    // Replays the reproducibility contract by hand: per path, stream
    // `path_index` of the seed yields d, s | d, theta_1, theta_2, then the
    // twin's s', theta_1', theta_2' (payoff shared), each via the block's
    // lower Cholesky factor; the measure terms are the paired half products
    // delta(S2-S1) (row) times delta(S1-S0) resp. delta(D-S2) (column).
    // A single batch accumulates in path order, so agreement is bitwise.
    // This nails estimator orientation: gamma_r_hat[i][j] pairs asset i's
    // date-2 move with asset j's terminal convergence, never transposed.
    let p = MultiParams {
        n: 2,
        d_bar: DVector::from_vec(vec![100.0, 105.0]),
        sigma_d: DMatrix::from_row_slice(2, 2, &[4.0, 1.5, 1.5, 2.0]),
        sigma_s: DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 3.0]),
        sigma_theta_true: DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 0.8]),
        sigma_theta_informed: DMatrix::from_row_slice(2, 2, &[3.0, -0.5, -0.5, 2.5]),
        alpha: 0.7,
        pi: 0.4,
    }
    .validate()
    .unwrap();
    let c = equilibrium_multi(&p).unwrap();
    let n_paths = 2000u64;
    let seed = 31u64;
    let est = simulate_multi(
        &p,
        &c,
        &SimConfig {
            n_paths,
            seed,
            batch_size: n_paths,
        },
    )
    .unwrap();

    let chol = |m: &DMatrix<f64>| Cholesky::<f64, Dyn>::new(m.clone()).unwrap().l();
    let (l_d, l_s, l_t) = (chol(&p.sigma_d), chol(&p.sigma_s), chol(&p.sigma_theta_true));
    let gauss = |rng: &mut rand_chacha::ChaCha8Rng, l: &DMatrix<f64>| {
        let z = DVector::from_fn(p.n, |_, _| rng.sample::<f64, _>(StandardNormal));
        l * z
    };
    let mut sum_m = DMatrix::<f64>::zeros(2, 2);
    let mut sum_r = DMatrix::<f64>::zeros(2, 2);
    for i in 0..n_paths {
        let mut rng = path_rng(seed, i);
        let d = &p.d_bar + gauss(&mut rng, &l_d);
        let w = WorldRealizationMulti {
            s: &d + gauss(&mut rng, &l_s),
            theta1: gauss(&mut rng, &l_t),
            theta2: gauss(&mut rng, &l_t),
            d: d.clone(),
        };
        let twin = WorldRealizationMulti {
            s: &d + gauss(&mut rng, &l_s),
            theta1: gauss(&mut rng, &l_t),
            theta2: gauss(&mut rng, &l_t),
            d,
        };
        let pa = price_path_multi(&c, &p, &w);
        let pb = price_path_multi(&c, &p, &twin);
        let dm = (&pa.s2 - &pa.s1) - (&pb.s2 - &pb.s1);
        let dx = (&pa.s1 - &pa.s0) - (&pb.s1 - &pb.s0);
        let dl = (&pa.s3 - &pa.s2) - (&pb.s3 - &pb.s2);
        sum_m += &dm * dx.transpose() * 0.5;
        sum_r += &dm * dl.transpose() * 0.5;
    }
    let nf = n_paths as f64;
    assert_eq!(est.gamma_m_hat, sum_m / nf);
    assert_eq!(est.gamma_r_hat, sum_r / nf);
}

#[test]
fn matrix_batch_size_only_regroups_the_reduction() {
    let p = MultiParams {
        n: 2,
        d_bar: DVector::from_vec(vec![100.0, 100.0]),
        sigma_d: DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 4.0]),
        sigma_s: DMatrix::identity(2, 2),
        sigma_theta_true: DMatrix::identity(2, 2),
        sigma_theta_informed: DMatrix::identity(2, 2) * 4.0,
        alpha: 0.5,
        pi: 0.5,
    }
    .validate()
    .unwrap();
    let c = equilibrium_multi(&p).unwrap();
    let coarse = simulate_multi(&p, &c, &cfg(20_000, 5)).unwrap();
    let fine = simulate_multi(
        &p,
        &c,
        &SimConfig {
            n_paths: 20_000,
            seed: 5,
            batch_size: 137,
        },
    )
    .unwrap();
    // Same per-path draws, so the max is identical; sums regroup and may
    // move by a few ulps.
    assert_eq!(coarse.clearing_residual_max, fine.clearing_residual_max);
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-30);
    for (a, b) in [
        (&coarse.gamma_m_hat, &fine.gamma_m_hat),
        (&coarse.gamma_r_hat, &fine.gamma_r_hat),
    ] {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(rel(*x, *y) <= 1e-9, "{x:.17e} vs {y:.17e}");
        }
    }
}

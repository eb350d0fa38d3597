//! Property tests for the matrix solver: randomized SPD economies with one
//! to three assets must clear, embed the scalar model, keep the reversal
//! matrix negative semidefinite, and reject malformed lead-lag requests.

use hetbeliefs::model::SingleParams;
use hetbeliefs::multi::{
    cross_measures, embed_single, equilibrium_multi, leadlag_experiment, MultiParams,
};
use hetbeliefs::sim::{clearing_check_multi, draw_world_multi};
use hetbeliefs::single::{equilibrium, measures};
use hetbeliefs::ModelError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

prop_compose! {
    /// Random SPD economy: each covariance block is A A' + 0.25 I with
    /// entries of A drawn from [-1.5, 1.5]; the informed block adds another
    /// SPD matrix on top of the true one, so the belief gap is SPD too.
    /// The ridge bounds each block's condition number: the solve chain
    /// squares conditioning, so near-singular draws inflate pure roundoff
    /// in the clearing identity without saying anything about the model.
    fn multi_params(n: usize)(
        entries in prop::collection::vec(-1.5..1.5f64, 4 * n * n),
        d_bar in prop::collection::vec(1.0..200.0f64, n),
        alpha in 0.05..2.0f64,
        pi in 0.1..0.9f64,
    ) -> MultiParams {
        let spd = |k: usize| {
            let a = DMatrix::from_fn(n, n, |i, j| entries[k * n * n + i * n + j]);
            &a * a.transpose() + DMatrix::identity(n, n) * 0.25
        };
        MultiParams {
            n,
            d_bar: DVector::from_vec(d_bar),
            sigma_d: spd(0),
            sigma_s: spd(1),
            sigma_theta_true: spd(2),
            sigma_theta_informed: spd(2) + spd(3),
            alpha,
            pi,
        }
    }
}

fn any_n_params() -> impl Strategy<Value = MultiParams> {
    prop_oneof![multi_params(1), multi_params(2), multi_params(3)]
}

proptest! {
    #[test]
    fn randomized_economies_clear_and_reverse(p in any_n_params(), seed in any::<u64>()) {
        let p = p.validate().unwrap();
        let c = equilibrium_multi(&p).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = draw_world_multi(&p, &mut rng).unwrap();
        let chk = clearing_check_multi(&c, &p, &w).unwrap();
        prop_assert!(
            chk.max_rel() <= 1e-8,
            "relative clearing residual {:.3e} (n = {})",
            chk.max_rel(),
            p.n
        );

        let g = cross_measures(&c, &p);
        let sym = (&g.gamma_r + g.gamma_r.transpose()) * 0.5;
        let max_eig = sym.symmetric_eigenvalues().max();
        prop_assert!(max_eig <= 1e-10, "gamma_r eigenvalue {max_eig:+.3e}");
    }

    #[test]
    fn one_asset_embedding_reproduces_the_scalar_model(
        sigma_d2 in log_range(0.1, 10.0),
        sigma_s2 in log_range(0.1, 10.0),
        st in log_range(0.1, 10.0),
        ratio in log_range(1.05, 10.0),
        alpha in 0.05..2.0f64,
        pi in 0.1..0.9f64,
    ) {
        let p = SingleParams {
            d_bar: 100.0,
            sigma_d2,
            sigma_s2,
            sigma_theta2_true: st,
            sigma_theta2_informed: st * ratio,
            alpha,
            pi,
            riskless_supply: 0.0,
        }.validate().unwrap();
        let sc = equilibrium(&p).unwrap();
        let sm = measures(&sc, &p);
        let pm = embed_single(&p).validate().unwrap();
        let mc = equilibrium_multi(&pm).unwrap();
        let mm = cross_measures(&mc, &pm);
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
        prop_assert!(rel(mc.b1[(0, 0)], sc.b1) <= 1e-9);
        prop_assert!(rel(mc.b2[(0, 0)], sc.b2) <= 1e-9);
        prop_assert!(rel(mc.c1[(0, 0)], sc.c1) <= 1e-9);
        prop_assert!(rel(mc.s0[0], sc.s0) <= 1e-9);
        prop_assert!(rel(mm.gamma_m[(0, 0)], sm.gamma_m) <= 1e-9);
        prop_assert!(rel(mm.gamma_r[(0, 0)], sm.gamma_r) <= 1e-9);
    }

    #[test]
    fn fully_diagonal_economies_leave_muted_assets_still(
        a_d in log_range(0.1, 10.0), b_d in log_range(0.1, 10.0),
        a_s in log_range(0.1, 10.0), b_s in log_range(0.1, 10.0),
        a_t in log_range(0.1, 10.0), b_t in log_range(0.1, 10.0),
        ratio in log_range(1.05, 10.0),
        alpha in 0.05..2.0f64,
        pi in 0.1..0.9f64,
        innovation in -5.0..5.0f64,
    ) {
        // With every covariance block diagonal the joint solve is diagonal,
        // so a muted asset has no channel to move through: exactly zero.
        let diag2 = |x: f64, y: f64| DMatrix::from_row_slice(2, 2, &[x, 0.0, 0.0, y]);
        let p = MultiParams {
            n: 2,
            d_bar: DVector::from_vec(vec![100.0, 100.0]),
            sigma_d: diag2(a_d, b_d),
            sigma_s: diag2(a_s, b_s),
            sigma_theta_true: diag2(a_t, b_t),
            sigma_theta_informed: diag2(a_t * ratio, b_t * ratio),
            alpha,
            pi,
        }.validate().unwrap();
        let s_active = DVector::from_vec(vec![100.0 + innovation, 100.0]);
        let r = leadlag_experiment(&p, &[1], &s_active).unwrap();
        prop_assert_eq!(r.drift_t1[1], 0.0);
        prop_assert_eq!(r.drift_t2[1], 0.0);
        prop_assert_eq!(r.signal_innovation[1], 0.0);
        // The active asset still moves in the direction of its news.
        if innovation.abs() > 1e-6 {
            prop_assert!(r.drift_t1[0] * innovation > 0.0);
        }
    }
}

#[test]
fn leadlag_rejects_malformed_requests() {
    let p = MultiParams {
        n: 2,
        d_bar: DVector::from_vec(vec![100.0, 100.0]),
        sigma_d: DMatrix::identity(2, 2) * 4.0,
        sigma_s: DMatrix::identity(2, 2),
        sigma_theta_true: DMatrix::identity(2, 2),
        sigma_theta_informed: DMatrix::identity(2, 2) * 4.0,
        alpha: 0.5,
        pi: 0.5,
    }
    .validate()
    .unwrap();
    let s = DVector::from_vec(vec![103.0, 100.0]);

    let err = leadlag_experiment(&p, &[], &s).unwrap_err();
    assert!(matches!(err, ModelError::InvalidMute(_)), "{err}");

    let err = leadlag_experiment(&p, &[0, 1], &s).unwrap_err();
    assert!(matches!(err, ModelError::InvalidMute(_)), "{err}");

    let err = leadlag_experiment(&p, &[2], &s).unwrap_err();
    assert!(matches!(err, ModelError::InvalidMute(_)), "{err}");

    let short = DVector::from_vec(vec![103.0]);
    let err = leadlag_experiment(&p, &[1], &short).unwrap_err();
    assert!(
        matches!(err, ModelError::WrongDimension { expected: 2, got: 1 }),
        "{err}"
    );
}

#[test]
fn validation_rejects_broken_covariance_blocks() {
    let good = MultiParams {
        n: 2,
        d_bar: DVector::from_vec(vec![100.0, 100.0]),
        sigma_d: DMatrix::identity(2, 2) * 4.0,
        sigma_s: DMatrix::identity(2, 2),
        sigma_theta_true: DMatrix::identity(2, 2),
        sigma_theta_informed: DMatrix::identity(2, 2) * 4.0,
        alpha: 0.5,
        pi: 0.5,
    };
    assert!(good.clone().validate().is_ok());

    let asym = MultiParams {
        sigma_d: DMatrix::from_row_slice(2, 2, &[4.0, 0.5, -0.5, 4.0]),
        ..good.clone()
    };
    assert!(asym.validate().is_err());

    let not_pd = MultiParams {
        sigma_s: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        ..good.clone()
    };
    assert!(not_pd.validate().is_err());

    // Informed variance below the true one on one axis: gap not PD.
    let thin_gap = MultiParams {
        sigma_theta_informed: DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.5]),
        ..good.clone()
    };
    assert!(thin_gap.validate().is_err());

    // Equal beliefs only pass under the homogeneous override.
    let equal = MultiParams {
        sigma_theta_informed: good.sigma_theta_true.clone(),
        ..good.clone()
    };
    assert!(equal.clone().validate().is_err());
    assert!(equal
        .validate_with(hetbeliefs::model::PI_BOUNDS_DEFAULT, true)
        .is_ok());

    let wrong_dim = MultiParams {
        d_bar: DVector::from_vec(vec![100.0]),
        ..good
    };
    assert!(matches!(
        wrong_dim.validate().unwrap_err(),
        ModelError::WrongDimension { expected: 2, got: 1 }
    ));
}

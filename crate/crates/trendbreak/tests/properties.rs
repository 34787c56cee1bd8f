//! Property tests for the algebraic invariants of the solver stack.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use trendbreak::dictionary::DictionaryShape;
use trendbreak::evaluation::{contingency, fp_distance_histogram, metrics};
use trendbreak::model_selection::{bic, bic_from_parts, hot_start_v, LambdaSchedule};
use trendbreak::solver::{least_squares_refit, peak_locations, shrink};

proptest! {
    #[test]
    fn shrink_magnitude_odd_symmetry(v in -50.0f64..50.0, lambda in 0.0f64..10.0) {
        prop_assert_eq!(shrink(v, lambda).abs(), (v.abs() - lambda).max(0.0));
        prop_assert_eq!(shrink(-v, lambda), -shrink(v, lambda));
    }

    #[test]
    fn shrink_non_expansive(a in -50.0f64..50.0, b in -50.0f64..50.0, lambda in 0.0f64..10.0) {
        let d = (shrink(a, lambda) - shrink(b, lambda)).abs();
        prop_assert!(d <= (a - b).abs() + 1e-13);
    }

    #[test]
    fn hot_start_is_exact_on_dyadic_values(ticks in -(1i64 << 22)..(1i64 << 22), halves in 1u8..8) {
        // Dyadic coefficients and thresholds add without rounding, so the
        // fixed point holds bit for bit.
        let beta = ticks as f64 / 1024.0;
        let lambda = halves as f64 * 0.5;
        let v = hot_start_v(&[beta], lambda)[0];
        prop_assert_eq!(shrink(v, lambda), beta);
    }

    #[test]
    fn hot_start_near_fixed_point_on_arbitrary_values(beta in -20.0f64..20.0, lambda in 0.0f64..8.0) {
        let v = hot_start_v(&[beta], lambda)[0];
        let back = shrink(v, lambda);
        // One rounding each way in (|b| + lambda) - lambda.
        prop_assert!((back - beta).abs() <= 2.0 * f64::EPSILON * (beta.abs() + lambda));
        if beta == 0.0 {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn implicit_row_ops_match_dense(p in 3usize..80, seed in 0u64..500) {
        let shape = DictionaryShape::new(p, 1.0 / 1024.0).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-5.0..5.0)).collect();
        for i in 1..=shape.rows() {
            let row = shape.materialize_row(i).unwrap();
            let dense: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let implicit = shape.row_inner_product(i, &beta).unwrap();
            let scale = dense.abs().max(1.0);
            prop_assert!((implicit - dense).abs() <= 1e-9 * scale);

            let dense_norm: f64 = row.iter().map(|a| a * a).sum();
            prop_assert_eq!(shape.row_squared_norm(i).unwrap(), dense_norm);
        }
        let fast = shape.apply(&beta).unwrap();
        for (i, &value) in fast.iter().enumerate() {
            let row = shape.materialize_row(i + 1).unwrap();
            let dense: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            prop_assert!((value - dense).abs() <= 1e-9 * dense.abs().max(1.0));
        }
    }

    #[test]
    fn peaks_sorted_unique_with_slope(beta in prop::collection::vec(-3.0f64..3.0, 3..120)) {
        let locations = peak_locations(&beta, 0.125).unwrap();
        prop_assert_eq!(locations[0], 1);
        prop_assert!(locations.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(locations.iter().all(|&j| j >= 1 && j < beta.len()));
    }

    #[test]
    fn contingency_partitions_candidates(
        true_support in prop::collection::btree_set(2usize..60, 0..6),
        est_support in prop::collection::btree_set(2usize..60, 0..6),
    ) {
        let p = 60;
        let mut beta_true = vec![0.0; p];
        beta_true[0] = -0.2;
        for &j in &true_support {
            beta_true[j - 1] = -1.0;
        }
        let mut beta_hat = vec![0.0; p];
        for &j in &est_support {
            beta_hat[j - 1] = -0.8;
        }
        let table = contingency(&beta_true, &beta_hat).unwrap();
        prop_assert_eq!(table.total(), (p - 1) as u64);

        let m = metrics(&table);
        if let Some(precision) = m.precision {
            let recomputed = table.true_positives as f64
                / (table.true_positives + table.false_positives) as f64;
            prop_assert!((precision - recomputed).abs() < 1e-12);
        }
        if !true_support.is_empty() {
            let histogram = fp_distance_histogram(&beta_true, &beta_hat, 50);
            prop_assert_eq!(histogram.total(), table.false_positives);
        }
    }

    #[test]
    fn bic_matches_refit_parts(seed in 0u64..200) {
        let p = 120;
        let shape = DictionaryShape::new(p, 1.0 / 1024.0).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let y: Vec<f64> = (0..p - 1)
            .map(|i| -0.001 * i as f64 + rng.gen_range(-0.2..0.2))
            .collect();
        let refit = least_squares_refit(&y, &shape, &[1, 40, 90]).unwrap();
        let nonzeros = refit.beta.iter().filter(|&&b| b != 0.0).count();
        let direct = bic(&y, &refit.beta, &shape).unwrap();
        let from_parts = bic_from_parts(nonzeros, refit.residual_norm_sq, p);
        prop_assert!((direct - from_parts).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn lambda_schedule_shape(lambda_max in 0.1f64..100.0, count in 1usize..12) {
        let schedule = LambdaSchedule::log_spaced(lambda_max, count).unwrap();
        let values = schedule.values();
        prop_assert_eq!(values[0], 0.5);
        prop_assert!(values.windows(2).all(|w| w[0] < w[1]));
        if lambda_max > 0.5 && count > 1 {
            prop_assert_eq!(*values.last().unwrap(), lambda_max);
        }
    }
}

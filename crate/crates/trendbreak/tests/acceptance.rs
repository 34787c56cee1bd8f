//! Acceptance suite. One test per criterion; each prints a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`) and asserts
//! its stated thresholds.
//!
//! The heavy fixtures (the 20-seed reference-profile study and the
//! desk-scale benchmark) are computed once and shared across criteria; the
//! determinism criterion recomputes them from scratch and compares.

use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

use trendbreak::dictionary::DictionaryShape;
use trendbreak::evaluation::{
    prune_reported_model, run_benchmark, BenchmarkReport, DerivativeDetector, Detector,
    LbiDetector,
};
use trendbreak::events::EventList;
use trendbreak::model_selection::{
    lambda_max_bound, select_model, LambdaSchedule, DEFAULT_GRID_SIZE,
};
use trendbreak::simulator::{
    apply_noise, synth_clean_profile, FiberSpec, NoiseSpec, TestbenchParams,
};
use trendbreak::solver::{lbotdr, SolverConfig};

/// The eight reference events: (position in meters at 1 m spacing, loss dB).
/// The dictionary column of an event at sample m is m + 1.
const REFERENCE_EVENTS: [(usize, f64); 8] = [
    (3593, 13.9),
    (4404, 2.4),
    (5298, 0.4),
    (5313, 1.1),
    (5317, 1.2),
    (5349, 0.6),
    (6395, 0.7),
    (7932, 5.8),
];

const REFERENCE_SAMPLES: usize = 8000;
const SEEDS: u64 = 20;

struct SeedOutcome {
    all_events_within_tolerance: bool,
    false_positives: usize,
    lambda_best: f64,
    solver_seconds: f64,
    /// Deterministic serialization of the reported result (no wall clock).
    serialized: String,
}

fn reference_fiber() -> FiberSpec {
    let events = REFERENCE_EVENTS
        .iter()
        .map(|&(m, loss)| (m + 1, loss))
        .collect();
    FiberSpec::new(REFERENCE_SAMPLES, events)
}

/// Full λ-selection analysis of the reference profile under one noise seed.
fn analyze_reference_seed(clean: &[f64], fiber: &FiberSpec, seed: u64) -> SeedOutcome {
    let noise = NoiseSpec {
        seed,
        ..NoiseSpec::default()
    };
    let (noisy, _) = apply_noise(clean, &noise, fiber.length_m()).unwrap();

    let config = SolverConfig::default();
    let shape = DictionaryShape::new(noisy.len() + 1, config.sigma).unwrap();
    let start = Instant::now();
    let bound = lambda_max_bound(&noisy, &shape).unwrap();
    let schedule = LambdaSchedule::log_spaced(bound, DEFAULT_GRID_SIZE).unwrap();
    let selection = select_model(&noisy, &config, &schedule).unwrap();
    let solver_seconds = start.elapsed().as_secs_f64();

    let mut beta_hat = selection.beta_best.clone();
    prune_reported_model(&mut beta_hat, config.epsilon_min);
    let list = EventList::from_beta(&beta_hat, 1.0, config.epsilon_min);

    // Greedy nearest matching within +/-2 samples.
    let mut used = vec![false; list.events.len()];
    let mut all_ok = true;
    for &(m, loss) in &REFERENCE_EVENTS {
        let best = list
            .events
            .iter()
            .enumerate()
            .filter(|(e, ev)| !used[*e] && ev.position_index.abs_diff(m) <= 2)
            .min_by_key(|(_, ev)| ev.position_index.abs_diff(m));
        match best {
            Some((e, ev)) => {
                used[e] = true;
                if (ev.loss_db - loss).abs() > 0.3 {
                    all_ok = false;
                }
            }
            None => all_ok = false,
        }
    }
    let false_positives = used.iter().filter(|u| !**u).count();

    let serialized = serde_json::to_string(&(
        &list,
        selection.lambda_best,
        selection.first_run_iterations,
    ))
    .unwrap();

    SeedOutcome {
        all_events_within_tolerance: all_ok,
        false_positives,
        lambda_best: selection.lambda_best,
        solver_seconds,
        serialized,
    }
}

fn run_reference_study() -> Vec<SeedOutcome> {
    let fiber = reference_fiber();
    let shape = DictionaryShape::for_samples(REFERENCE_SAMPLES).unwrap();
    let (clean, _) = synth_clean_profile(&fiber, &shape).unwrap();
    (1..=SEEDS)
        .into_par_iter()
        .map(|seed| analyze_reference_seed(&clean, &fiber, seed))
        .collect()
}

fn reference_study() -> &'static Vec<SeedOutcome> {
    static STUDY: OnceLock<Vec<SeedOutcome>> = OnceLock::new();
    STUDY.get_or_init(run_reference_study)
}

fn run_desk_benchmark() -> (BenchmarkReport, f64) {
    let params = TestbenchParams::desk_scale(1);
    let lbi = LbiDetector::with_grid(SolverConfig::default());
    let derivative = DerivativeDetector::default();
    let detectors: Vec<&dyn Detector> = vec![&lbi, &derivative];
    let start = Instant::now();
    let report = run_benchmark(&params, &detectors, 2).unwrap();
    (report, start.elapsed().as_secs_f64())
}

fn desk_benchmark() -> &'static (BenchmarkReport, f64) {
    static BENCH: OnceLock<(BenchmarkReport, f64)> = OnceLock::new();
    BENCH.get_or_init(run_desk_benchmark)
}

#[test]
fn criterion_1_reference_profile_replication() {
    let outcomes = reference_study();
    let seeds = outcomes.len();
    let all_events = outcomes
        .iter()
        .filter(|o| o.all_events_within_tolerance)
        .count();
    let zero_fp = outcomes.iter().filter(|o| o.false_positives == 0).count();
    let lambda_half = outcomes.iter().filter(|o| o.lambda_best == 0.5).count();
    let max_seconds = outcomes
        .iter()
        .map(|o| o.solver_seconds)
        .fold(0.0f64, f64::max);

    let events_ok = all_events as f64 >= 0.9 * seeds as f64;
    let fp_ok = zero_fp as f64 >= 0.8 * seeds as f64;
    let lambda_ok = lambda_half * 2 > seeds;
    let runtime_ok = max_seconds <= 60.0;
    let pass = events_ok && fp_ok && lambda_ok && runtime_ok;

    println!(
        "criterion 1 (reference profile, 20 seeds): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!(
        "  all 8 events within +/-2 samples and +/-0.3 dB: {all_events}/{seeds} (need >= 18)"
    );
    println!("  zero false positives: {zero_fp}/{seeds} (need >= 16)");
    println!("  lambda_best = 0.5: {lambda_half}/{seeds} (need majority)");
    println!("  max runtime per profile: {max_seconds:.1} s (need <= 60)");
    assert!(
        pass,
        "events {all_events}/{seeds}, zero-FP {zero_fp}/{seeds}, lambda {lambda_half}/{seeds}, max {max_seconds:.1}s"
    );
}

#[test]
fn criterion_2_desk_scale_testbench() {
    let (report, wall_seconds) = desk_benchmark();
    let lbi = report
        .detectors
        .iter()
        .find(|d| d.detector == "lbi")
        .expect("lbi report");

    let sensitivity = lbi.metrics.sensitivity.unwrap_or(0.0);
    let specificity = lbi.metrics.specificity.unwrap_or(0.0);
    let precision = lbi.metrics.precision.unwrap_or(0.0);

    let sens_ok = sensitivity >= 0.95;
    let spec_ok = specificity >= 0.999;
    let prec_ok = precision >= 0.50;
    let time_ok = *wall_seconds <= 30.0 * 60.0;
    let pass = sens_ok && spec_ok && prec_ok && time_ok;

    println!(
        "criterion 2 (desk-scale testbench, 3 lengths x 50 profiles): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!(
        "  sensitivity {:.2}% (need >= 95)  [tp {} fn {}]",
        sensitivity * 100.0,
        lbi.contingency.true_positives,
        lbi.contingency.false_negatives
    );
    println!(
        "  specificity {:.4}% (need >= 99.9)  [fp {} tn {}]",
        specificity * 100.0,
        lbi.contingency.false_positives,
        lbi.contingency.true_negatives
    );
    println!("  precision {:.2}% (need >= 50)", precision * 100.0);
    println!("  wall time {:.1} min (need <= 30)", wall_seconds / 60.0);
    assert!(
        pass,
        "sens {:.4}, spec {:.5}, prec {:.4}, wall {:.1} min",
        sensitivity,
        specificity,
        precision,
        wall_seconds / 60.0
    );
}

/// Least squares on materialized columns via normal equations and Gaussian
/// elimination; independent of the solver's refit path.
fn dense_ls_rss(shape: &DictionaryShape, y: &[f64], support: &[usize]) -> f64 {
    let cols = shape.materialize_columns(support).unwrap();
    let m = cols.len();
    let mut gram = vec![vec![0.0f64; m + 1]; m];
    for a in 0..m {
        for b in 0..m {
            gram[a][b] = cols[a].iter().zip(&cols[b]).map(|(x, z)| x * z).sum();
        }
        gram[a][m] = cols[a].iter().zip(y).map(|(x, z)| x * z).sum();
    }
    // Forward elimination with partial pivoting.
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&a, &b| gram[a][col].abs().total_cmp(&gram[b][col].abs()))
            .unwrap();
        gram.swap(col, pivot);
        if gram[col][col].abs() < 1e-12 {
            continue;
        }
        for row in col + 1..m {
            let factor = gram[row][col] / gram[col][col];
            for k in col..=m {
                gram[row][k] -= factor * gram[col][k];
            }
        }
    }
    let mut coeffs = vec![0.0f64; m];
    for row in (0..m).rev() {
        let mut acc = gram[row][m];
        for k in row + 1..m {
            acc -= gram[row][k] * coeffs[k];
        }
        coeffs[row] = if gram[row][row].abs() < 1e-12 {
            0.0
        } else {
            acc / gram[row][row]
        };
    }
    let mut rss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let fit: f64 = (0..m).map(|a| cols[a][i] * coeffs[a]).sum();
        rss += (yi - fit) * (yi - fit);
    }
    rss
}

/// Exhaustive search over supports of up to two steps (plus the slope),
/// scored by least squares: the smallest support that explains the profile.
fn oracle_support(shape: &DictionaryShape, y: &[f64]) -> Vec<usize> {
    let p = shape.columns();
    let norm_sq: f64 = y.iter().map(|v| v * v).sum();
    let tol = 1e-12 * (1.0 + norm_sq);

    if dense_ls_rss(shape, y, &[1]) <= tol {
        return vec![1];
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for j in 2..=p {
        let rss = dense_ls_rss(shape, y, &[1, j]);
        if rss <= tol && best.as_ref().map_or(true, |(b, _)| rss < *b) {
            best = Some((rss, vec![1, j]));
        }
    }
    if let Some((_, support)) = best {
        return support;
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for j in 2..p {
        for k in j + 1..=p {
            let rss = dense_ls_rss(shape, y, &[1, j, k]);
            if rss <= tol && best.as_ref().map_or(true, |(b, _)| rss < *b) {
                best = Some((rss, vec![1, j, k]));
            }
        }
    }
    best.map(|(_, support)| support).unwrap_or_else(|| vec![1])
}

#[test]
fn criterion_3_noiseless_oracle_equivalence() {
    let config = SolverConfig {
        // Exact-recovery runs: iterate until the fit is tight.
        epsilon_min: 1e-3,
        max_sweeps: 2048,
        ..SolverConfig::default()
    };
    let magnitudes = [0.5, 2.0];
    let mut total = 0;
    let mut matched = 0;
    let mut mismatches: Vec<String> = Vec::new();

    for p in [16usize, 33, 64] {
        let n = p - 1;
        let shape = DictionaryShape::for_samples(n).unwrap();
        // Coarse position grid over the dictionary columns; column p is
        // excluded (a step on the last sample alone has no interior peak).
        let mut positions = vec![3, p / 4, p / 2, 3 * p / 4, p - 1];
        positions.retain(|&j| (3..=p - 1).contains(&j));
        positions.dedup();

        let mut cases: Vec<Vec<(usize, f64)>> = vec![vec![]];
        for &j in &positions {
            for &m in &magnitudes {
                cases.push(vec![(j, m)]);
            }
        }
        for (a, &j) in positions.iter().enumerate() {
            for &k in &positions[a + 1..] {
                if k - j < 3 {
                    continue;
                }
                for &mj in &magnitudes {
                    for &mk in &magnitudes {
                        cases.push(vec![(j, mj), (k, mk)]);
                    }
                }
            }
        }

        for events in cases {
            let fiber = FiberSpec::new(n, events.clone());
            let (y, _) = synth_clean_profile(&fiber, &shape).unwrap();
            let oracle = oracle_support(&shape, &y);

            let out = lbotdr(&y, &config).unwrap();
            let mut beta_hat = out.beta_hat.clone();
            prune_reported_model(&mut beta_hat, config.epsilon_min);
            let mut solver: Vec<usize> = vec![1];
            solver.extend(
                (2..=p).filter(|&j| beta_hat[j - 1] != 0.0),
            );

            total += 1;
            if solver == oracle {
                matched += 1;
            } else if mismatches.len() < 5 {
                mismatches.push(format!(
                    "p={p} events={events:?}: solver {solver:?} vs oracle {oracle:?}"
                ));
            }
        }
    }

    let pass = matched == total;
    println!(
        "criterion 3 (noiseless oracle equivalence): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("  identical supports: {matched}/{total} (need 100%)");
    for m in &mismatches {
        println!("  mismatch: {m}");
    }
    assert!(pass, "{matched}/{total} supports matched; first mismatches: {mismatches:?}");
}

#[test]
fn criterion_4_property_suites() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use trendbreak::evaluation::{contingency, metrics};
    use trendbreak::model_selection::{bic, bic_from_parts, hot_start_v};
    use trendbreak::solver::{least_squares_refit, peak_locations, shrink};

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    // Shrink algebra identities.
    for _ in 0..2000 {
        let v = rng.gen_range(-20.0..20.0);
        let w = rng.gen_range(-20.0..20.0);
        let lambda = rng.gen_range(0.0..5.0);
        assert_eq!(shrink(v, lambda).abs(), (v.abs() - lambda).max(0.0));
        assert_eq!(shrink(-v, lambda), -shrink(v, lambda));
        assert!((shrink(v, lambda) - shrink(w, lambda)).abs() <= (v - w).abs() + 1e-13);
    }

    // Hot-start fixed point, exact on binary-representable values.
    for _ in 0..2000 {
        let beta = rng.gen_range(-(1i64 << 22)..(1 << 22)) as f64 / 1024.0;
        let lambda = rng.gen_range(1u8..8) as f64 * 0.5;
        assert_eq!(shrink(hot_start_v(&[beta], lambda)[0], lambda), beta);
    }

    // Implicit vs dense dictionary at 1e-9 relative.
    let p = 300;
    let shape = DictionaryShape::new(p, 1.0 / 1024.0).unwrap();
    let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-4.0..4.0)).collect();
    let fast = shape.apply(&beta).unwrap();
    for i in 1..=shape.rows() {
        let row = shape.materialize_row(i).unwrap();
        let dense: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        assert!((shape.row_inner_product(i, &beta).unwrap() - dense).abs() <= 1e-9 * dense.abs().max(1.0));
        assert!((fast[i - 1] - dense).abs() <= 1e-9 * dense.abs().max(1.0));
        let dense_norm: f64 = row.iter().map(|a| a * a).sum();
        assert_eq!(shape.row_squared_norm(i).unwrap(), dense_norm);
    }

    // Peak locations: slope always present, sorted, unique.
    for _ in 0..500 {
        let len = rng.gen_range(3..80);
        let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let locs = peak_locations(&v, 0.125).unwrap();
        assert_eq!(locs[0], 1);
        assert!(locs.windows(2).all(|w| w[0] < w[1]));
    }

    // Contingency partition identity and metric recomputation.
    for _ in 0..500 {
        let p = rng.gen_range(4..100);
        let mut t = vec![0.0; p];
        let mut e = vec![0.0; p];
        for j in 1..p {
            if rng.gen_bool(0.1) {
                t[j] = -1.0;
            }
            if rng.gen_bool(0.1) {
                e[j] = -1.0;
            }
        }
        let table = contingency(&t, &e).unwrap();
        assert_eq!(table.total(), (p - 1) as u64);
        let m = metrics(&table);
        if let Some(sens) = m.sensitivity {
            let re = table.true_positives as f64
                / (table.true_positives + table.false_negatives) as f64;
            assert!((sens - re).abs() < 1e-12);
        }
    }

    // BIC recomputation consistency on a refit model.
    let y: Vec<f64> = (0..p - 1)
        .map(|i| -0.001 * i as f64 + rng.gen_range(-0.1..0.1))
        .collect();
    let refit = least_squares_refit(&y, &shape, &[1, 90, 200]).unwrap();
    let nonzeros = refit.beta.iter().filter(|&&b| b != 0.0).count();
    let direct = bic(&y, &refit.beta, &shape).unwrap();
    let parts = bic_from_parts(nonzeros, refit.residual_norm_sq, p);
    assert!((direct - parts).abs() <= 1e-9 * direct.abs().max(1.0));

    let elapsed = start.elapsed().as_secs_f64();
    let pass = elapsed < 60.0;
    println!(
        "criterion 4 (property suites): {} ({elapsed:.2} s, need < 60 s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_5_complexity_instrumentation() {
    let n = 2000;
    let shape = DictionaryShape::for_samples(n).unwrap();
    let fiber = FiberSpec::new(n, vec![(500, 2.0), (1200, 0.8), (1700, 4.0)]);
    let (clean, _) = synth_clean_profile(&fiber, &shape).unwrap();
    let noise = NoiseSpec {
        seed: 5,
        ..NoiseSpec::default()
    };
    let (noisy, _) = apply_noise(&clean, &noise, fiber.length_m()).unwrap();

    let out = lbotdr(&noisy, &SolverConfig::default()).unwrap();
    let mults = out.ops.multiplications_per_iteration();
    let adds = out.ops.additions_per_iteration();
    let p = (n + 1) as f64;

    let pass = mults <= 4.0 && adds <= 3.0 * p;
    println!(
        "criterion 5 (complexity instrumentation): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("  multiplications per iteration: {mults:.2} (need <= 4)");
    println!(
        "  mean additions per iteration: {adds:.1} (need <= 3p = {:.0})",
        3.0 * p
    );
    assert!(pass, "mults {mults}, adds {adds}");
}

#[test]
fn criterion_6_baseline_dominance() {
    let (report, _) = desk_benchmark();
    let lbi = report
        .detectors
        .iter()
        .find(|d| d.detector == "lbi")
        .expect("lbi report");
    let derivative = report
        .detectors
        .iter()
        .find(|d| d.detector == "derivative")
        .expect("derivative report");
    assert_eq!(lbi.failures, 0);
    assert_eq!(derivative.failures, 0);
    assert_eq!(lbi.per_profile.len(), derivative.per_profile.len());

    let total = lbi.per_profile.len();
    let mut wins = 0;
    for (a, b) in lbi.per_profile.iter().zip(&derivative.per_profile) {
        assert_eq!((a.length, a.replicate), (b.length, b.replicate));
        if a.squared_error < b.squared_error {
            wins += 1;
        }
    }
    let win_rate = wins as f64 / total as f64;

    let lbi_first_bin = lbi.fp_histogram.first_bin_fraction();
    let derivative_first_bin = derivative.fp_histogram.first_bin_fraction();
    let histogram_ok = match (lbi_first_bin, derivative_first_bin) {
        (Some(a), Some(b)) => a > b,
        // No LBI false positives at all dominates trivially.
        (None, Some(_)) => true,
        _ => false,
    };

    let error_ok = win_rate >= 0.90;
    let pass = error_ok && histogram_ok;
    println!(
        "criterion 6 (baseline dominance): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!(
        "  squared-error wins: {wins}/{total} = {:.1}% (need >= 90%)",
        win_rate * 100.0
    );
    println!(
        "  FP-histogram first-bin fraction: lbi {:?} vs derivative {:?} (need lbi larger)",
        lbi_first_bin, derivative_first_bin
    );
    assert!(pass, "wins {win_rate:.3}, first bins {lbi_first_bin:?} vs {derivative_first_bin:?}");
}

#[test]
fn criterion_7_determinism() {
    // Touch the shared fixtures first so the comparison runs do not overlap
    // with their initial computation.
    let first_study = reference_study();
    let (first_report, _) = desk_benchmark();

    let second_study = run_reference_study();
    let study_ok = first_study.len() == second_study.len()
        && first_study
            .iter()
            .zip(&second_study)
            .all(|(a, b)| a.serialized == b.serialized);

    let (second_report, _) = run_desk_benchmark();
    let report_ok = first_report.canonical_json() == second_report.canonical_json();

    let pass = study_ok && report_ok;
    println!(
        "criterion 7 (determinism under identical seeds): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("  reference-profile outputs bitwise identical: {study_ok}");
    println!("  benchmark report (wall clock excluded) bitwise identical: {report_ok}");
    assert!(pass);
}

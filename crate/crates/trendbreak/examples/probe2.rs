//! Scratch probe: desk-scale detection quality versus sweep budget.

use trendbreak::evaluation::{run_benchmark, DerivativeDetector, Detector, LbiDetector};
use trendbreak::simulator::TestbenchParams;
use trendbreak::solver::SolverConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sweeps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    let profiles: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(6);
    let grid: bool = args.get(3).map(|s| s == "grid").unwrap_or(false);
    let peak_threshold: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.125);

    let params = TestbenchParams {
        profiles_per_length: profiles,
        ..TestbenchParams::desk_scale(1)
    };
    let config = SolverConfig {
        max_sweeps: sweeps,
        peak_threshold,
        ..SolverConfig::default()
    };
    let lbi = if grid {
        LbiDetector::with_grid(config)
    } else {
        LbiDetector::fixed_lambda(config)
    };
    let derivative = DerivativeDetector::default();
    let detectors: Vec<&dyn Detector> = vec![&lbi, &derivative];

    let start = std::time::Instant::now();
    let report = run_benchmark(&params, &detectors, 2).unwrap();
    println!(
        "sweeps={sweeps} profiles={profiles} grid={grid} wall={:.1}s",
        start.elapsed().as_secs_f64()
    );
    for d in &report.detectors {
        let pct = |m: Option<f64>| m.map(|v| v * 100.0).unwrap_or(f64::NAN);
        let mean_err: f64 = d
            .per_profile
            .iter()
            .map(|o| o.squared_error)
            .sum::<f64>()
            / d.per_profile.len().max(1) as f64;
        println!(
            "  {:<11} sens={:6.2}% spec={:8.4}% prec={:6.2}% tp={} fp={} fn={} meanerr={:8.3} meansec={:.2}",
            d.detector,
            pct(d.metrics.sensitivity),
            pct(d.metrics.specificity),
            pct(d.metrics.precision),
            d.contingency.true_positives,
            d.contingency.false_positives,
            d.contingency.false_negatives,
            mean_err,
            d.per_profile.iter().map(|o| o.solver_seconds).sum::<f64>()
                / d.per_profile.len().max(1) as f64
        );
    }
}

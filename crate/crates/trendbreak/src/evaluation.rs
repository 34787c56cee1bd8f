//! Detection quality metrics and the benchmark harness.
//!
//! Every step position is classified against ground truth with zero error
//! margin: a detection one sample off counts as one false positive plus one
//! false negative. That keeps the numbers comparable across detectors at
//! the cost of penalizing near misses; the false-positive distance
//! histogram shows how near the misses are.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::DictionaryShape;
use crate::error::Error;
use crate::events::EventList;
use crate::model_selection::{lambda_max_bound, select_model, LambdaSchedule, DEFAULT_GRID_SIZE};
use crate::profile::Profile;
use crate::simulator::{random_testbench, TestbenchParams};
use crate::solver::{lbotdr, SolverConfig};

/// Zero-margin classification counts over candidate step positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    pub fn merge(&mut self, other: &ContingencyTable) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.true_negatives += other.true_negatives;
        self.false_negatives += other.false_negatives;
    }
}

/// Classify every step index (the slope entry is excluded) by exact
/// nonzero/zero agreement of the two coefficient vectors.
pub fn contingency(beta_true: &[f64], beta_hat: &[f64]) -> Result<ContingencyTable, Error> {
    if beta_true.len() != beta_hat.len() {
        return Err(Error::LengthMismatch {
            expected: beta_true.len(),
            found: beta_hat.len(),
        });
    }
    let mut table = ContingencyTable::default();
    for (t, e) in beta_true[1..].iter().zip(&beta_hat[1..]) {
        match (*t != 0.0, *e != 0.0) {
            (true, true) => table.true_positives += 1,
            (false, true) => table.false_positives += 1,
            (true, false) => table.false_negatives += 1,
            (false, false) => table.true_negatives += 1,
        }
    }
    Ok(table)
}

/// Derived rates; a metric is `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
}

pub fn metrics(t: &ContingencyTable) -> Metrics {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    Metrics {
        sensitivity: ratio(t.true_positives, t.true_positives + t.false_negatives),
        specificity: ratio(t.true_negatives, t.true_negatives + t.false_positives),
        accuracy: ratio(t.true_positives + t.true_negatives, t.total()),
        precision: ratio(t.true_positives, t.true_positives + t.false_positives),
    }
}

/// `||beta_true - beta_hat||_2^2` over compensated coefficient vectors
/// (slope included).
pub fn squared_error_norm(beta_true: &[f64], beta_hat: &[f64]) -> Result<f64, Error> {
    if beta_true.len() != beta_hat.len() {
        return Err(Error::LengthMismatch {
            expected: beta_true.len(),
            found: beta_hat.len(),
        });
    }
    Ok(beta_true
        .iter()
        .zip(beta_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Default bin width of the false-positive distance histogram, in samples.
pub const DEFAULT_FP_BIN_WIDTH: usize = 50;

/// Histogram of false-positive distances to the nearest true fault.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpHistogram {
    pub bin_width: usize,
    /// `counts[b]` covers distances `b*bin_width .. (b+1)*bin_width`.
    pub counts: Vec<u64>,
}

impl FpHistogram {
    pub fn new(bin_width: usize) -> Self {
        Self {
            bin_width,
            counts: Vec::new(),
        }
    }

    fn record(&mut self, distance: usize) {
        let bin = distance / self.bin_width;
        if self.counts.len() <= bin {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of the false-positive mass in the first bin; `None` when
    /// there are no false positives at all.
    pub fn first_bin_fraction(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            None
        } else {
            Some(self.counts.first().copied().unwrap_or(0) as f64 / total as f64)
        }
    }

    pub fn merge(&mut self, other: &FpHistogram) {
        assert_eq!(self.bin_width, other.bin_width, "histogram bin widths");
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// For each false positive, the minimum index distance to a true fault,
/// binned. The ground truth must contain at least one fault.
pub fn fp_distance_histogram(
    beta_true: &[f64],
    beta_hat: &[f64],
    bin_width: usize,
) -> FpHistogram {
    assert_eq!(beta_true.len(), beta_hat.len(), "coefficient lengths");
    let true_faults: Vec<usize> = (2..=beta_true.len())
        .filter(|&j| beta_true[j - 1] != 0.0)
        .collect();
    assert!(
        !true_faults.is_empty(),
        "FP distances need at least one true fault"
    );
    let mut histogram = FpHistogram::new(bin_width);
    for j in 2..=beta_hat.len() {
        if beta_hat[j - 1] != 0.0 && beta_true[j - 1] == 0.0 {
            let distance = true_faults
                .iter()
                .map(|&q| q.abs_diff(j))
                .min()
                .expect("non-empty fault list");
            histogram.record(distance);
        }
    }
    histogram
}

/// Discrete-derivative comparison detector.
///
/// Flags first differences whose magnitude exceeds `threshold_db` at a
/// local extremum of `|d|`; the slope estimate is the median of the
/// unflagged differences. Returns the reported model as a compensated
/// coefficient vector of length `n + 1`.
pub fn derivative_baseline(y: &[f64], threshold_db: f64) -> Vec<f64> {
    let n = y.len();
    let mut beta = vec![0.0; n + 1];
    if n < 2 {
        return beta;
    }
    let d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let mut flagged = vec![false; d.len()];
    for k in 0..d.len() {
        let mag = d[k].abs();
        if mag <= threshold_db {
            continue;
        }
        let left_ok = k == 0 || mag > d[k - 1].abs();
        let right_ok = k + 1 == d.len() || mag >= d[k + 1].abs();
        if left_ok && right_ok {
            flagged[k] = true;
        }
    }
    let mut unflagged: Vec<f64> = d
        .iter()
        .zip(&flagged)
        .filter(|(_, &f)| !f)
        .map(|(&v, _)| v)
        .collect();
    let slope = if unflagged.is_empty() {
        0.0
    } else {
        unflagged.sort_by(|a, b| a.total_cmp(b));
        let mid = unflagged.len() / 2;
        if unflagged.len() % 2 == 0 {
            0.5 * (unflagged[mid - 1] + unflagged[mid])
        } else {
            unflagged[mid]
        }
    };
    beta[0] = slope;
    for (k, &is_flagged) in flagged.iter().enumerate() {
        if is_flagged {
            // The difference y[k] -> y[k+1] (0-based) is the step of
            // dictionary column k + 3 (1-based).
            beta[k + 2] = d[k];
        }
    }
    beta
}

/// Restrict a refit coefficient vector to reportable faults: step entries
/// are dropped when their magnitude is below the minimum detectable loss
/// or when they describe a gain (faults only lose power; upward steps are
/// noise artifacts, reflection peaks being out of the model). The slope
/// entry is untouched.
pub fn prune_reported_model(beta_hat: &mut [f64], epsilon_min: f64) {
    for entry in beta_hat.iter_mut().skip(1) {
        if entry.abs() < epsilon_min || *entry > 0.0 {
            *entry = 0.0;
        }
    }
}

/// A trend-break detector under benchmark.
pub trait Detector: Sync {
    fn name(&self) -> &str;
    /// The reported model as a full-length compensated coefficient vector:
    /// slope in dB/sample at entry 1, signed step coefficients elsewhere.
    fn detect(&self, profile: &Profile) -> Result<Vec<f64>, Error>;
}

/// The sparse Kaczmarz detector, with or without the λ grid.
#[derive(Debug, Clone)]
pub struct LbiDetector {
    pub config: SolverConfig,
    pub use_lambda_grid: bool,
    pub grid_size: usize,
}

impl LbiDetector {
    pub fn with_grid(config: SolverConfig) -> Self {
        Self {
            config,
            use_lambda_grid: true,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }

    pub fn fixed_lambda(config: SolverConfig) -> Self {
        Self {
            config,
            use_lambda_grid: false,
            grid_size: 1,
        }
    }

    /// Run the analysis and return the pruned coefficient vector, mirroring
    /// the reported event list.
    pub fn analyze(&self, profile: &Profile) -> Result<Vec<f64>, Error> {
        let mut beta_hat = if self.use_lambda_grid {
            let shape = DictionaryShape::new(profile.len() + 1, self.config.sigma)?;
            let bound = lambda_max_bound(&profile.samples, &shape)?;
            let schedule = LambdaSchedule::log_spaced(bound, self.grid_size)?;
            select_model(&profile.samples, &self.config, &schedule)?.beta_best
        } else {
            lbotdr(&profile.samples, &self.config)?.beta_hat
        };
        prune_reported_model(&mut beta_hat, self.config.epsilon_min);
        Ok(beta_hat)
    }
}

impl Detector for LbiDetector {
    fn name(&self) -> &str {
        if self.use_lambda_grid {
            "lbi"
        } else {
            "lbi-fixed"
        }
    }

    fn detect(&self, profile: &Profile) -> Result<Vec<f64>, Error> {
        self.analyze(profile)
    }
}

/// The discrete-derivative baseline as a benchmark detector.
#[derive(Debug, Clone)]
pub struct DerivativeDetector {
    pub threshold_db: f64,
}

impl Default for DerivativeDetector {
    fn default() -> Self {
        // Half the smallest simulated fault magnitude.
        Self { threshold_db: 0.25 }
    }
}

impl Detector for DerivativeDetector {
    fn name(&self) -> &str {
        "derivative"
    }

    fn detect(&self, profile: &Profile) -> Result<Vec<f64>, Error> {
        Ok(derivative_baseline(&profile.samples, self.threshold_db))
    }
}

/// Per-profile outcome kept in the report for plotting and paired
/// comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutcome {
    pub length: usize,
    pub replicate: usize,
    pub squared_error: f64,
    pub solver_seconds: f64,
}

/// Aggregates per profile length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub length: usize,
    pub profiles: usize,
    pub mean_squared_error: f64,
    pub mean_solver_seconds: f64,
}

/// Everything measured for one detector over the testbench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub detector: String,
    pub contingency: ContingencyTable,
    pub metrics: Metrics,
    pub per_length: Vec<LengthStats>,
    pub per_profile: Vec<ProfileOutcome>,
    pub fp_histogram: FpHistogram,
    /// Profiles on which the detector returned an error (skipped, not fatal).
    pub failures: usize,
}

/// Benchmark result: one report per detector over identical profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub format: String,
    pub params: TestbenchParams,
    pub detectors: Vec<DetectorReport>,
}

impl BenchmarkReport {
    /// JSON with wall-clock fields zeroed; everything else is a
    /// deterministic function of the seed, so two runs compare bit for bit.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        for report in &mut copy.detectors {
            for stats in &mut report.per_length {
                stats.mean_solver_seconds = 0.0;
            }
            for outcome in &mut report.per_profile {
                outcome.solver_seconds = 0.0;
            }
        }
        serde_json::to_string_pretty(&copy).expect("report serialization")
    }
}

struct CaseOutcome {
    contingency: ContingencyTable,
    squared_error: f64,
    fp_histogram: FpHistogram,
    seconds: f64,
}

/// Run every detector over the generated testbench and aggregate.
///
/// Profiles fan out over a bounded worker pool; aggregation follows case
/// order, so reports are deterministic up to wall-clock fields. Timing
/// covers the detector call only.
pub fn run_benchmark(
    params: &TestbenchParams,
    detectors: &[&dyn Detector],
    workers: usize,
) -> Result<BenchmarkReport, Error> {
    let cases = random_testbench(params)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;

    let outcomes: Vec<Vec<Option<CaseOutcome>>> = pool.install(|| {
        cases
            .par_iter()
            .map(|case| {
                detectors
                    .iter()
                    .map(|detector| {
                        let start = Instant::now();
                        let detected = detector.detect(&case.profile).ok()?;
                        let seconds = start.elapsed().as_secs_f64();
                        let contingency = contingency(&case.beta_true, &detected).ok()?;
                        let squared_error =
                            squared_error_norm(&case.beta_true, &detected).ok()?;
                        let fp_histogram = fp_distance_histogram(
                            &case.beta_true,
                            &detected,
                            DEFAULT_FP_BIN_WIDTH,
                        );
                        Some(CaseOutcome {
                            contingency,
                            squared_error,
                            fp_histogram,
                            seconds,
                        })
                    })
                    .collect()
            })
            .collect()
    });

    let mut reports = Vec::with_capacity(detectors.len());
    for (d, detector) in detectors.iter().enumerate() {
        let mut table = ContingencyTable::default();
        let mut histogram = FpHistogram::new(DEFAULT_FP_BIN_WIDTH);
        let mut per_profile = Vec::with_capacity(cases.len());
        let mut failures = 0usize;
        let mut per_length: Vec<LengthStats> = Vec::new();

        for (case, row) in cases.iter().zip(&outcomes) {
            match &row[d] {
                Some(outcome) => {
                    table.merge(&outcome.contingency);
                    histogram.merge(&outcome.fp_histogram);
                    per_profile.push(ProfileOutcome {
                        length: case.length,
                        replicate: case.replicate,
                        squared_error: outcome.squared_error,
                        solver_seconds: outcome.seconds,
                    });
                    match per_length.iter_mut().find(|s| s.length == case.length) {
                        Some(stats) => {
                            stats.profiles += 1;
                            stats.mean_squared_error += outcome.squared_error;
                            stats.mean_solver_seconds += outcome.seconds;
                        }
                        None => per_length.push(LengthStats {
                            length: case.length,
                            profiles: 1,
                            mean_squared_error: outcome.squared_error,
                            mean_solver_seconds: outcome.seconds,
                        }),
                    }
                }
                None => failures += 1,
            }
        }
        for stats in &mut per_length {
            stats.mean_squared_error /= stats.profiles as f64;
            stats.mean_solver_seconds /= stats.profiles as f64;
        }
        reports.push(DetectorReport {
            detector: detector.name().to_string(),
            metrics: metrics(&table),
            contingency: table,
            per_length,
            per_profile,
            fp_histogram: histogram,
            failures,
        });
    }

    Ok(BenchmarkReport {
        format: "trendbreak-benchmark/1".to_string(),
        params: params.clone(),
        detectors: reports,
    })
}

/// Reconstruct the event list a coefficient vector describes, for report
/// writers.
pub fn events_from_model(beta_hat: &[f64], sample_spacing_m: f64, min_loss_db: f64) -> EventList {
    EventList::from_beta(beta_hat, sample_spacing_m, min_loss_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{synth_clean_profile, FiberSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contingency_exact_match() {
        let mut beta = vec![0.0; 20];
        beta[0] = -0.2;
        beta[5] = -1.0;
        beta[11] = -2.0;
        let t = contingency(&beta, &beta).unwrap();
        assert_eq!(t.false_positives, 0);
        assert_eq!(t.false_negatives, 0);
        assert_eq!(t.true_positives, 2);
        assert_eq!(t.true_negatives, 17);
        assert_eq!(t.total(), 19);
    }

    #[test]
    fn contingency_empty_estimate() {
        let mut beta = vec![0.0; 20];
        beta[0] = -0.2;
        beta[5] = -1.0;
        beta[11] = -2.0;
        let t = contingency(&beta, &vec![0.0; 20]).unwrap();
        assert_eq!(t.true_positives, 0);
        assert_eq!(t.false_positives, 0);
        assert_eq!(t.false_negatives, 2);
    }

    #[test]
    fn contingency_zero_margin_offset() {
        let mut truth = vec![0.0; 20];
        truth[7] = -1.0;
        let mut offset = vec![0.0; 20];
        offset[8] = -1.0;
        let t = contingency(&truth, &offset).unwrap();
        assert_eq!(t.false_positives, 1);
        assert_eq!(t.false_negatives, 1);
        assert_eq!(t.true_positives, 0);
    }

    #[test]
    fn metrics_reproduce_reference_table() {
        let t = ContingencyTable {
            true_positives: 74_814,
            false_positives: 30_525,
            true_negatives: 109_892_487,
            false_negatives: 2_174,
        };
        let m = metrics(&t);
        assert!((m.sensitivity.unwrap() * 100.0 - 97.18).abs() < 0.01);
        assert!((m.specificity.unwrap() * 100.0 - 99.97).abs() < 0.005);
        assert!((m.precision.unwrap() * 100.0 - 71.0).abs() < 0.5);
        assert!((m.accuracy.unwrap() * 100.0 - 99.97).abs() < 0.005);
    }

    #[test]
    fn metrics_all_perfect_and_undefined() {
        let t = ContingencyTable {
            true_positives: 1,
            false_positives: 0,
            true_negatives: 1,
            false_negatives: 0,
        };
        let m = metrics(&t);
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(m.precision, Some(1.0));

        let empty = metrics(&ContingencyTable::default());
        assert_eq!(empty.sensitivity, None);
        assert_eq!(empty.precision, None);
    }

    #[test]
    fn squared_error_examples() {
        let mut beta = vec![0.0; 10];
        beta[4] = -2.0;
        assert_eq!(squared_error_norm(&beta, &beta).unwrap(), 0.0);
        assert_eq!(squared_error_norm(&beta, &vec![0.0; 10]).unwrap(), 4.0);
        assert!(squared_error_norm(&beta, &vec![0.0; 9]).is_err());
    }

    #[test]
    fn histogram_bins_and_totals() {
        let mut truth = vec![0.0; 200];
        truth[49] = -1.0; // fault at index 50
        let mut hat = vec![0.0; 200];
        hat[50] = -1.0; // FP at 51: distance 1 -> bin 0
        hat[120] = -0.5; // FP at 121: distance 71 -> bin 1
        let h = fp_distance_histogram(&truth, &hat, 50);
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.total(), 2);
        assert_eq!(h.first_bin_fraction(), Some(0.5));

        let none = fp_distance_histogram(&truth, &truth, 50);
        assert_eq!(none.total(), 0);
        assert_eq!(none.first_bin_fraction(), None);
    }

    #[test]
    fn baseline_exact_on_noiseless_step() {
        let fiber = FiberSpec {
            attenuation_db_per_km: 0.0,
            ..FiberSpec::new(200, vec![(80, 3.0)])
        };
        let shape = DictionaryShape::for_samples(200).unwrap();
        let (y, _) = synth_clean_profile(&fiber, &shape).unwrap();
        let beta = derivative_baseline(&y, 0.25);
        assert_eq!(beta[79], -3.0);
        assert!(beta
            .iter()
            .enumerate()
            .all(|(i, &b)| i == 79 || b == 0.0));
    }

    #[test]
    fn baseline_flat_profile_is_empty() {
        let beta = derivative_baseline(&vec![0.0; 50], 0.25);
        assert!(beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn baseline_struggles_with_noise() {
        // Around 10 dB SNR the derivative scan either misses the break or
        // flags spurious ones.
        let fiber = FiberSpec::new(400, vec![(200, 1.0)]);
        let shape = DictionaryShape::for_samples(400).unwrap();
        let (clean, _) = synth_clean_profile(&fiber, &shape).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut mistakes = 0;
        for _ in 0..20 {
            let noisy: Vec<f64> = clean
                .iter()
                .map(|&c| {
                    let g: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    c + 0.5 * g
                })
                .collect();
            let beta = derivative_baseline(&noisy, 0.25);
            let detections = beta[1..].iter().filter(|&&b| b != 0.0).count();
            let hit = beta[199] != 0.0;
            if !hit || detections > 1 {
                mistakes += 1;
            }
        }
        assert!(mistakes > 0, "expected the baseline to err under noise");
    }

    #[test]
    fn benchmark_is_deterministic_and_partitions() {
        let params = TestbenchParams {
            lengths: vec![300, 500],
            profiles_per_length: 3,
            ..TestbenchParams::desk_scale(5)
        };
        let baseline = DerivativeDetector::default();
        let detectors: Vec<&dyn Detector> = vec![&baseline];
        let a = run_benchmark(&params, &detectors, 2).unwrap();
        let b = run_benchmark(&params, &detectors, 1).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());

        let report = &a.detectors[0];
        assert_eq!(report.failures, 0);
        assert_eq!(report.per_profile.len(), 6);
        // Candidate positions partition: sum of table counts = sum of (p - 1).
        assert_eq!(report.contingency.total(), 3 * 300 + 3 * 500);
        assert_eq!(
            report.fp_histogram.total(),
            report.contingency.false_positives
        );
    }
}

//! Command-line front end: `analyze`, `simulate`, `benchmark`.
//!
//! Exit codes: 0 success; 1 runtime failure; 2 usage or configuration
//! error; 3 unreadable input; 4 input schema violation; 5 non-finite
//! input samples.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dictionary::{DictionaryShape, DEFAULT_SIGMA};
use crate::evaluation::{
    run_benchmark, DerivativeDetector, Detector, LbiDetector,
};
use crate::events::EventList;
use crate::io::{self, EventListFile, FileError, TruthFile};
use crate::model_selection::{lambda_max_bound, select_model, LambdaSchedule, DEFAULT_GRID_SIZE};
use crate::profile::Profile;
use crate::simulator::{random_testbench, CrnModel, NoiseSpec, TestbenchParams};
use crate::solver::{lbotdr, SolverConfig, DEFAULT_MAX_SWEEPS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT_UNREADABLE: i32 = 3;
pub const EXIT_INPUT_SCHEMA: i32 = 4;
pub const EXIT_INPUT_NONFINITE: i32 = 5;

#[derive(Parser)]
#[command(
    name = "trendbreak",
    version,
    about = "Trend-break (fiber fault) detection in OTDR profiles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect trend breaks in a profile file and write an event list.
    Analyze(AnalyzeArgs),
    /// Generate simulated profiles with ground truth.
    Simulate(SimulateArgs),
    /// Run detectors over a randomized testbench and write a report.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input profile file.
    input: PathBuf,
    /// Output event list (JSON). Defaults to `<input>.events.json`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the reconstructed clean profile for plotting.
    #[arg(long)]
    reconstruction: Option<PathBuf>,
    /// Minimum detectable loss in dB.
    #[arg(long, default_value_t = 0.125)]
    epsilon_min: f64,
    /// Slope-column scale (positive power of two).
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
    /// Shrink threshold of the first run.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Peak threshold in dB; defaults to epsilon-min.
    #[arg(long)]
    peak_threshold: Option<f64>,
    /// Iteration budget in sweeps of the profile.
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    max_sweeps: usize,
    /// Skip the λ grid and report the first run.
    #[arg(long)]
    no_lambda_grid: bool,
    /// λ grid size.
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
}

#[derive(Args, Clone)]
struct NoiseArgs {
    /// Photon counts at the fiber start.
    #[arg(long, default_value_t = 1e5)]
    c0: f64,
    /// Probe source linewidth in Hz.
    #[arg(long, default_value_t = 1e5)]
    linewidth_hz: f64,
    /// Group velocity in m/s.
    #[arg(long, default_value_t = 2e8)]
    group_velocity: f64,
    /// Coherent-noise length scale in meters (default: fiber length).
    #[arg(long)]
    delta_z: Option<f64>,
    /// Coherent-noise model.
    #[arg(long, value_enum, default_value_t = CrnDomainArg::Db)]
    crn_domain: CrnDomainArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum CrnDomainArg {
    /// Additive Gaussian in the dB trace.
    Db,
    /// Multiplicative Gaussian on linear power.
    Power,
}

impl NoiseArgs {
    fn to_spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            c0: self.c0,
            delta_nu_hz: self.linewidth_hz,
            v_g_m_s: self.group_velocity,
            delta_z_m: self.delta_z,
            crn_model: match self.crn_domain {
                CrnDomainArg::Db => CrnModel::DbAdditive,
                CrnDomainArg::Power => CrnModel::PowerMultiplicative,
            },
            seed,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory for profile and truth files.
    #[arg(long)]
    out_dir: PathBuf,
    /// Profile lengths in samples, comma separated.
    #[arg(long, default_value = "8000", value_delimiter = ',')]
    lengths: Vec<usize>,
    /// Profiles per length.
    #[arg(long, default_value_t = 1)]
    profiles_per_length: usize,
    /// Faults per profile.
    #[arg(long, default_value_t = 5)]
    faults: usize,
    /// Fault magnitude range in dB, as `low,high`.
    #[arg(long, default_value = "0.5,5")]
    mag_range: String,
    /// Attenuation in dB/km.
    #[arg(long, default_value_t = 0.2)]
    attenuation: f64,
    /// Sample spacing in meters.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Testbench seed.
    #[arg(long, env = "TRENDBREAK_SEED", default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Profile lengths in samples, comma separated.
    #[arg(long, default_value = "5000,10000,15000", value_delimiter = ',')]
    lengths: Vec<usize>,
    /// Profiles per length.
    #[arg(long, default_value_t = 50)]
    profiles_per_length: usize,
    /// Faults per profile.
    #[arg(long, default_value_t = 5)]
    faults: usize,
    /// Fault magnitude range in dB, as `low,high`.
    #[arg(long, default_value = "0.5,5")]
    mag_range: String,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Testbench seed.
    #[arg(long, env = "TRENDBREAK_SEED", default_value_t = 1)]
    seed: u64,
    /// Detectors to run: lbi, lbi-fixed, derivative (comma separated).
    #[arg(long, default_value = "lbi,derivative", value_delimiter = ',')]
    detectors: Vec<String>,
    /// Worker threads (default: available cores).
    #[arg(long, env = "TRENDBREAK_WORKERS")]
    workers: Option<usize>,
    /// Report output path (JSON).
    #[arg(long)]
    report: PathBuf,
    /// Directory for plot-ready TSV files.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
    /// Minimum detectable loss in dB.
    #[arg(long, default_value_t = 0.125)]
    epsilon_min: f64,
    /// Iteration budget in sweeps.
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    max_sweeps: usize,
    /// Derivative baseline threshold in dB.
    #[arg(long, default_value_t = 0.25)]
    baseline_threshold: f64,
    /// Run the λ-grid selection inside the lbi detector.
    #[arg(long, default_value_t = false)]
    no_lambda_grid: bool,
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own usage/help text; help and version are not
            // errors.
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Benchmark(args) => cmd_benchmark(&args),
    }
}

fn input_error_code(e: &FileError) -> i32 {
    match e {
        FileError::Io(_) => EXIT_INPUT_UNREADABLE,
        FileError::Schema(_) => EXIT_INPUT_SCHEMA,
        FileError::NonFinite { .. } => EXIT_INPUT_NONFINITE,
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> i32 {
    let (profile, _truth) = match io::read_profile(&args.input) {
        Ok(read) => read,
        Err(e) => {
            eprintln!("trendbreak: cannot read {}: {e}", args.input.display());
            return input_error_code(&e);
        }
    };

    let config = SolverConfig {
        lambda: args.lambda,
        sigma: args.sigma,
        epsilon_min: args.epsilon_min,
        peak_threshold: args.peak_threshold.unwrap_or(args.epsilon_min),
        max_sweeps: args.max_sweeps,
    };
    if let Err(e) = config.validate() {
        eprintln!("trendbreak: {e}");
        return EXIT_CONFIG;
    }
    let shape = match DictionaryShape::new(profile.len() + 1, config.sigma) {
        Ok(shape) => shape,
        Err(e) => {
            eprintln!("trendbreak: {e}");
            return EXIT_CONFIG;
        }
    };

    let start = Instant::now();
    let analyzed = if args.no_lambda_grid {
        lbotdr(&profile.samples, &config).map(|run| {
            (run.beta_hat, config.lambda, run.iterations, run.converged)
        })
    } else {
        lambda_max_bound(&profile.samples, &shape)
            .and_then(|bound| LambdaSchedule::log_spaced(bound, args.grid_size))
            .and_then(|schedule| select_model(&profile.samples, &config, &schedule))
            .map(|sel| {
                (
                    sel.beta_best,
                    sel.lambda_best,
                    sel.first_run_iterations,
                    sel.converged,
                )
            })
    };
    let (mut beta_hat, lambda_best, iterations, converged) = match analyzed {
        Ok(out) => out,
        Err(e) => {
            eprintln!("trendbreak: analysis failed: {e}");
            return EXIT_RUNTIME;
        }
    };
    let seconds = start.elapsed().as_secs_f64();

    crate::evaluation::prune_reported_model(&mut beta_hat, config.epsilon_min);
    let list = EventList::from_beta(&beta_hat, profile.sample_spacing_m, config.epsilon_min);
    let file = EventListFile::new(
        &list,
        profile.len(),
        profile.sample_spacing_m,
        lambda_best,
        iterations,
        converged,
        seconds,
    );
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| default_output(&args.input));
    if let Err(e) = io::write_event_list(&output, &file) {
        eprintln!("trendbreak: cannot write {}: {e}", output.display());
        return EXIT_RUNTIME;
    }

    if let Some(recon_path) = &args.reconstruction {
        // A beta_hat with the compensated slope pairs with the unit-sigma
        // dictionary.
        let reconstructed = DictionaryShape::new(profile.len() + 1, 1.0)
            .and_then(|unit| unit.apply(&pruned_model(&beta_hat, &list)));
        match reconstructed {
            Ok(samples) => {
                let recon = Profile::new(samples, profile.sample_spacing_m);
                if let Err(e) = io::write_profile(recon_path, &recon, None) {
                    eprintln!("trendbreak: cannot write {}: {e}", recon_path.display());
                    return EXIT_RUNTIME;
                }
            }
            Err(e) => {
                eprintln!("trendbreak: reconstruction failed: {e}");
                return EXIT_RUNTIME;
            }
        }
    }

    println!(
        "{} events, slope {:.4} dB/km, lambda_best {}, {} iterations{}, {:.2} s",
        list.events.len(),
        file.slope_db_per_km,
        lambda_best,
        iterations,
        if converged { "" } else { " (budget exhausted)" },
        seconds
    );
    for event in &list.events {
        println!(
            "  {:>8} m  {:>6.2} dB",
            event.position_m, event.loss_db
        );
    }
    EXIT_OK
}

fn pruned_model(beta_hat: &[f64], list: &EventList) -> Vec<f64> {
    let mut model = list.to_beta(beta_hat.len());
    model[0] = beta_hat[0];
    model
}

fn default_output(input: &Path) -> PathBuf {
    let mut name = input.file_name().unwrap_or_default().to_os_string();
    name.push(".events.json");
    input.with_file_name(name)
}

fn parse_mag_range(text: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("magnitude range must be `low,high`, got {text:?}"));
    }
    let low: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad magnitude {:?}", parts[0]))?;
    let high: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad magnitude {:?}", parts[1]))?;
    if !(low > 0.0 && high >= low) {
        return Err(format!("magnitude range must satisfy 0 < low <= high, got {text:?}"));
    }
    Ok((low, high))
}

fn cmd_simulate(args: &SimulateArgs) -> i32 {
    let mag_range = match parse_mag_range(&args.mag_range) {
        Ok(range) => range,
        Err(msg) => {
            eprintln!("trendbreak: {msg}");
            return EXIT_CONFIG;
        }
    };
    let params = TestbenchParams {
        lengths: args.lengths.clone(),
        profiles_per_length: args.profiles_per_length,
        faults_per_profile: args.faults,
        magnitude_range_db: mag_range,
        min_separation: 2,
        sample_spacing_m: args.spacing,
        attenuation_db_per_km: args.attenuation,
        noise: args.noise.to_spec(args.seed),
        seed: args.seed,
    };
    let cases = match random_testbench(&params) {
        Ok(cases) => cases,
        Err(e) => {
            eprintln!("trendbreak: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        eprintln!(
            "trendbreak: cannot create {}: {e}",
            args.out_dir.display()
        );
        return EXIT_RUNTIME;
    }

    let mut clamps = 0usize;
    for case in &cases {
        let stem = format!("profile_{}_{:03}", case.length, case.replicate);
        let truth_name = format!("{stem}.truth.json");
        let profile_path = args.out_dir.join(format!("{stem}.txt"));
        let truth_path = args.out_dir.join(&truth_name);
        let truth = TruthFile::from_fiber(&case.fiber);
        if let Err(e) = io::write_profile(&profile_path, &case.profile, Some(&truth_name))
            .and_then(|_| io::write_truth(&truth_path, &truth))
        {
            eprintln!("trendbreak: cannot write {stem}: {e}");
            return EXIT_RUNTIME;
        }
        clamps += case.diagnostics.zero_count_clamps + case.diagnostics.power_floor_clamps;
    }
    println!(
        "wrote {} profile(s) to {} (seed {}, {} clamped sample(s))",
        cases.len(),
        args.out_dir.display(),
        args.seed,
        clamps
    );
    EXIT_OK
}

fn cmd_benchmark(args: &BenchmarkArgs) -> i32 {
    let mag_range = match parse_mag_range(&args.mag_range) {
        Ok(range) => range,
        Err(msg) => {
            eprintln!("trendbreak: {msg}");
            return EXIT_CONFIG;
        }
    };
    if args.detectors.is_empty() || args.detectors.iter().all(|d| d.trim().is_empty()) {
        eprintln!("trendbreak: at least one detector is required");
        return EXIT_CONFIG;
    }

    let config = SolverConfig {
        epsilon_min: args.epsilon_min,
        peak_threshold: args.epsilon_min,
        max_sweeps: args.max_sweeps,
        ..SolverConfig::default()
    };
    if let Err(e) = config.validate() {
        eprintln!("trendbreak: {e}");
        return EXIT_CONFIG;
    }

    let mut lbi = LbiDetector::with_grid(config.clone());
    if args.no_lambda_grid {
        lbi = LbiDetector::fixed_lambda(config.clone());
    }
    let derivative = DerivativeDetector {
        threshold_db: args.baseline_threshold,
    };
    let mut detectors: Vec<&dyn Detector> = Vec::new();
    for name in &args.detectors {
        match name.trim() {
            "lbi" | "lbi-fixed" => detectors.push(&lbi),
            "derivative" => detectors.push(&derivative),
            other => {
                eprintln!(
                    "trendbreak: unknown detector {other:?} (expected lbi, lbi-fixed, derivative)"
                );
                return EXIT_CONFIG;
            }
        }
    }

    let params = TestbenchParams {
        lengths: args.lengths.clone(),
        profiles_per_length: args.profiles_per_length,
        faults_per_profile: args.faults,
        magnitude_range_db: mag_range,
        min_separation: 2,
        sample_spacing_m: 1.0,
        attenuation_db_per_km: 0.2,
        noise: args.noise.to_spec(args.seed),
        seed: args.seed,
    };
    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });

    let report = match run_benchmark(&params, &detectors, workers) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("trendbreak: benchmark failed: {e}");
            return EXIT_CONFIG;
        }
    };

    if let Err(e) = io::write_benchmark_report(&args.report, &report) {
        eprintln!("trendbreak: cannot write {}: {e}", args.report.display());
        return EXIT_RUNTIME;
    }
    if let Some(dir) = &args.plot_dir {
        if let Err(e) = io::write_plot_data(dir, &report) {
            eprintln!("trendbreak: cannot write plot data: {e}");
            return EXIT_RUNTIME;
        }
    }

    let total = params.cases();
    let mut all_failed = true;
    println!(
        "{:<12} {:>11} {:>11} {:>11} {:>9}",
        "detector", "sensitivity", "specificity", "precision", "failures"
    );
    for detector in &report.detectors {
        let show = |m: Option<f64>| {
            m.map(|v| format!("{:.2}%", v * 100.0))
                .unwrap_or_else(|| "n/a".to_string())
        };
        println!(
            "{:<12} {:>11} {:>11} {:>11} {:>9}",
            detector.detector,
            show(detector.metrics.sensitivity),
            show(detector.metrics.specificity),
            show(detector.metrics.precision),
            detector.failures
        );
        if detector.failures < total {
            all_failed = false;
        }
    }
    if all_failed && total > 0 {
        eprintln!("trendbreak: every profile failed");
        return EXIT_RUNTIME;
    }
    EXIT_OK
}

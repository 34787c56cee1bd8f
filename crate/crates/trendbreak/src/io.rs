//! File formats: text profiles, JSON event lists and ground truth, JSON
//! benchmark reports, and tabular plot data.
//!
//! Profiles are line-oriented text with a small `#`-prefixed header, so
//! vendor exports are easy to adapt and diffs stay readable. Every format
//! carries a version tag.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evaluation::BenchmarkReport;
use crate::events::{Event, EventList};
use crate::profile::Profile;
use crate::simulator::FiberSpec;

pub const PROFILE_FORMAT: &str = "trendbreak-profile/1";
pub const EVENTS_FORMAT: &str = "trendbreak-events/1";
pub const TRUTH_FORMAT: &str = "trendbreak-truth/1";

/// File-level failures, split by class so the CLI can map them to distinct
/// exit codes.
#[derive(Debug)]
pub enum FileError {
    /// The file could not be read or written.
    Io(std::io::Error),
    /// The content violates the schema (header, counts, JSON shape).
    Schema(String),
    /// A sample value failed to parse or is not finite.
    NonFinite { line: usize },
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FileError::Io(e) => write!(f, "i/o error: {e}"),
            FileError::Schema(msg) => write!(f, "schema violation: {msg}"),
            FileError::NonFinite { line } => {
                write!(f, "non-finite or unparseable sample at line {line}")
            }
        }
    }
}

impl std::error::Error for FileError {}

impl From<std::io::Error> for FileError {
    fn from(e: std::io::Error) -> Self {
        FileError::Io(e)
    }
}

/// Write a profile with its header; `ground_truth` records the matching
/// truth file name when the profile is simulated.
pub fn write_profile(
    path: &Path,
    profile: &Profile,
    ground_truth: Option<&str>,
) -> Result<(), FileError> {
    let mut out = String::new();
    out.push_str(&format!("# format: {PROFILE_FORMAT}\n"));
    out.push_str(&format!("# n_samples: {}\n", profile.len()));
    out.push_str(&format!(
        "# sample_spacing_m: {}\n",
        profile.sample_spacing_m
    ));
    out.push_str("# units: dB\n");
    if let Some(truth) = ground_truth {
        out.push_str(&format!("# ground_truth: {truth}\n"));
    }
    for sample in &profile.samples {
        out.push_str(&format!("{sample}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a profile file; returns the trace and the optional ground-truth
/// reference from the header.
pub fn read_profile(path: &Path) -> Result<(Profile, Option<String>), FileError> {
    let text = fs::read_to_string(path)?;
    let mut format = None;
    let mut n_samples = None;
    let mut spacing = None;
    let mut units = None;
    let mut ground_truth = None;
    let mut samples = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let Some((key, value)) = header.split_once(':') else {
                return Err(FileError::Schema(format!(
                    "header line {} has no `key: value` form",
                    index + 1
                )));
            };
            let value = value.trim().to_string();
            match key.trim() {
                "format" => format = Some(value),
                "n_samples" => {
                    n_samples = Some(value.parse::<usize>().map_err(|_| {
                        FileError::Schema(format!("bad n_samples {value:?}"))
                    })?)
                }
                "sample_spacing_m" => {
                    spacing = Some(value.parse::<f64>().map_err(|_| {
                        FileError::Schema(format!("bad sample_spacing_m {value:?}"))
                    })?)
                }
                "units" => units = Some(value),
                "ground_truth" => ground_truth = Some(value),
                other => {
                    return Err(FileError::Schema(format!("unknown header key {other:?}")))
                }
            }
            continue;
        }
        if format.is_none() {
            return Err(FileError::Schema(format!(
                "line {} precedes the `# format:` header",
                index + 1
            )));
        }
        let value: f64 = line
            .parse()
            .map_err(|_| FileError::NonFinite { line: index + 1 })?;
        if !value.is_finite() {
            return Err(FileError::NonFinite { line: index + 1 });
        }
        samples.push(value);
    }

    match format.as_deref() {
        Some(PROFILE_FORMAT) => {}
        Some(other) => {
            return Err(FileError::Schema(format!(
                "unsupported format {other:?}, expected {PROFILE_FORMAT:?}"
            )))
        }
        None => return Err(FileError::Schema("missing `# format:` header".into())),
    }
    if let Some(units) = units {
        if units != "dB" {
            return Err(FileError::Schema(format!("unsupported units {units:?}")));
        }
    }
    let spacing = spacing.ok_or_else(|| {
        FileError::Schema("missing `# sample_spacing_m:` header".into())
    })?;
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(FileError::Schema(format!(
            "sample_spacing_m must be positive, got {spacing}"
        )));
    }
    let declared =
        n_samples.ok_or_else(|| FileError::Schema("missing `# n_samples:` header".into()))?;
    if declared != samples.len() {
        return Err(FileError::Schema(format!(
            "header declares {declared} samples, file has {}",
            samples.len()
        )));
    }
    if samples.is_empty() {
        return Err(FileError::Schema("profile has no samples".into()));
    }
    Ok((Profile::new(samples, spacing), ground_truth))
}

/// Event list plus solver metadata, as written by `trendbreak analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventListFile {
    pub format: String,
    pub n_samples: usize,
    pub sample_spacing_m: f64,
    pub slope_db_per_km: f64,
    pub lambda_best: f64,
    pub iterations: u64,
    pub converged: bool,
    pub solver_seconds: f64,
    pub events: Vec<Event>,
}

impl EventListFile {
    pub fn new(
        list: &EventList,
        n_samples: usize,
        sample_spacing_m: f64,
        lambda_best: f64,
        iterations: u64,
        converged: bool,
        solver_seconds: f64,
    ) -> Self {
        Self {
            format: EVENTS_FORMAT.to_string(),
            n_samples,
            sample_spacing_m,
            slope_db_per_km: list.slope_db_per_km(sample_spacing_m),
            lambda_best,
            iterations,
            converged,
            solver_seconds,
            events: list.events.clone(),
        }
    }

    fn validate(&self) -> Result<(), FileError> {
        if self.format != EVENTS_FORMAT {
            return Err(FileError::Schema(format!(
                "unsupported format {:?}",
                self.format
            )));
        }
        if !self
            .events
            .windows(2)
            .all(|w| w[0].position_index < w[1].position_index)
        {
            return Err(FileError::Schema(
                "event positions must be strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

pub fn write_event_list(path: &Path, file: &EventListFile) -> Result<(), FileError> {
    file.validate()?;
    write_json(path, file)
}

pub fn read_event_list(path: &Path) -> Result<EventListFile, FileError> {
    let file: EventListFile = read_json(path)?;
    file.validate()?;
    Ok(file)
}

/// Ground truth for a simulated profile, positions as first-attenuated
/// sample indices (directly comparable to analyzer output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub format: String,
    pub n_samples: usize,
    pub sample_spacing_m: f64,
    pub attenuation_db_per_km: f64,
    pub events: Vec<Event>,
}

impl TruthFile {
    pub fn from_fiber(fiber: &FiberSpec) -> Self {
        let events = fiber
            .events
            .iter()
            .map(|&(j, loss)| Event {
                position_index: j - 1,
                position_m: (j - 1) as f64 * fiber.sample_spacing_m,
                loss_db: loss,
            })
            .collect();
        Self {
            format: TRUTH_FORMAT.to_string(),
            n_samples: fiber.n_samples,
            sample_spacing_m: fiber.sample_spacing_m,
            attenuation_db_per_km: fiber.attenuation_db_per_km,
            events,
        }
    }
}

pub fn write_truth(path: &Path, truth: &TruthFile) -> Result<(), FileError> {
    write_json(path, truth)
}

pub fn read_truth(path: &Path) -> Result<TruthFile, FileError> {
    let truth: TruthFile = read_json(path)?;
    if truth.format != TRUTH_FORMAT {
        return Err(FileError::Schema(format!(
            "unsupported format {:?}",
            truth.format
        )));
    }
    Ok(truth)
}

pub fn write_benchmark_report(path: &Path, report: &BenchmarkReport) -> Result<(), FileError> {
    write_json(path, report)
}

pub fn read_benchmark_report(path: &Path) -> Result<BenchmarkReport, FileError> {
    read_json(path)
}

/// Tab-separated plot data: squared error and solver time versus profile
/// length, and the FP distance histogram, one column set per detector.
pub fn write_plot_data(dir: &Path, report: &BenchmarkReport) -> Result<(), FileError> {
    fs::create_dir_all(dir)?;

    let mut error_tsv = String::from("length");
    let mut time_tsv = String::from("length");
    for detector in &report.detectors {
        error_tsv.push_str(&format!("\t{}_mean_squared_error", detector.detector));
        time_tsv.push_str(&format!("\t{}_mean_seconds", detector.detector));
    }
    error_tsv.push('\n');
    time_tsv.push('\n');
    for &length in &report.params.lengths {
        error_tsv.push_str(&length.to_string());
        time_tsv.push_str(&length.to_string());
        for detector in &report.detectors {
            let stats = detector.per_length.iter().find(|s| s.length == length);
            match stats {
                Some(s) => {
                    error_tsv.push_str(&format!("\t{}", s.mean_squared_error));
                    time_tsv.push_str(&format!("\t{}", s.mean_solver_seconds));
                }
                None => {
                    error_tsv.push_str("\tnan");
                    time_tsv.push_str("\tnan");
                }
            }
        }
        error_tsv.push('\n');
        time_tsv.push('\n');
    }
    fs::write(dir.join("error_vs_length.tsv"), error_tsv)?;
    fs::write(dir.join("time_vs_length.tsv"), time_tsv)?;

    let bins = report
        .detectors
        .iter()
        .map(|d| d.fp_histogram.counts.len())
        .max()
        .unwrap_or(0);
    let mut hist_tsv = String::from("bin_start");
    for detector in &report.detectors {
        hist_tsv.push_str(&format!("\t{}_fp_count", detector.detector));
    }
    hist_tsv.push('\n');
    for bin in 0..bins {
        let width = report
            .detectors
            .first()
            .map(|d| d.fp_histogram.bin_width)
            .unwrap_or(50);
        hist_tsv.push_str(&format!("{}", bin * width));
        for detector in &report.detectors {
            let count = detector.fp_histogram.counts.get(bin).copied().unwrap_or(0);
            hist_tsv.push_str(&format!("\t{count}"));
        }
        hist_tsv.push('\n');
    }
    fs::write(dir.join("fp_histogram.tsv"), hist_tsv)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut file = fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| FileError::Schema(format!("serialization: {e}")))?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FileError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| FileError::Schema(format!("bad JSON: {e}")))
}

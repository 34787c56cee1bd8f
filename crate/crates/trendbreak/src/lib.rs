//! Trend-break detection in noisy OTDR fiber profiles.
//!
//! An OTDR trace is a descending dB profile; localized losses (faults) show
//! up as downward steps. This crate estimates the step positions and
//! magnitudes by solving a sparse recovery problem over a structured
//! dictionary of one slope atom plus shifted step atoms, using
//! Bregman-style sparse Kaczmarz iterations:
//!
//! * [`dictionary`] — the implicit step/slope dictionary: closed-form row
//!   inner products, row norms, fast mat-vec and column materialization.
//! * [`solver`] — the sparse Kaczmarz loop, peak location, least-squares
//!   refit on the detected support, and the mean-residual stopping rule.
//! * [`model_selection`] — a hot-started λ grid scored with BIC.
//! * [`simulator`] — synthetic profiles with photon-counting noise and
//!   coherent Rayleigh noise, plus randomized testbench generation.
//! * [`evaluation`] — contingency tables, sensitivity/specificity/precision,
//!   error norms, false-positive distance histograms, a discrete-derivative
//!   baseline detector, and a parallel benchmark harness.
//! * [`io`] / [`cli`] — text profile files, JSON event lists and reports,
//!   and the `trendbreak` command-line front end.
//!
//! The `examples/` directory has one runnable program per capability;
//! start with `cargo run --release --example detect_events`.

pub mod cli;
pub mod dictionary;
pub mod evaluation;
pub mod events;
pub mod io;
pub mod model_selection;
pub mod profile;
pub mod simulator;
pub mod solver;

mod error;

pub use dictionary::DictionaryShape;
pub use error::Error;
pub use events::{Event, EventList};
pub use profile::Profile;
pub use solver::{lbotdr, shrink, LbotdrResult, SolverConfig, SolverState};

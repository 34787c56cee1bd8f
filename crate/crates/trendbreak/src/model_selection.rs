//! Multi-λ orchestration with hot starts and BIC model choice.
//!
//! The first run uses λ = 0.5 with the full iteration budget. Each later λ
//! in the schedule restarts from the previous run's dense coefficients
//! (dual vector rebuilt for the new λ) and gets a tenth of the first run's
//! iterations. Every candidate is scored with BIC; the smallest wins, ties
//! going to the smaller λ.

use crate::dictionary::DictionaryShape;
use crate::error::Error;
use crate::solver::{lbotdr_from, OpCounts, SolverConfig, SolverState};

/// Ascending λ grid starting at 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSchedule {
    values: Vec<f64>,
}

/// Default λ grid size.
pub const DEFAULT_GRID_SIZE: usize = 8;

/// First λ of every schedule.
pub const LAMBDA_FIRST: f64 = 0.5;

impl LambdaSchedule {
    /// Logarithmically spaced grid from 0.5 up to `lambda_max` with `count`
    /// points. Degenerates to the single value 0.5 when `lambda_max` does
    /// not exceed it.
    pub fn log_spaced(lambda_max: f64, count: usize) -> Result<Self, Error> {
        if count == 0 {
            return Err(Error::InvalidParameter("grid size must be >= 1".into()));
        }
        if !lambda_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda_max must be finite, got {lambda_max}"
            )));
        }
        if lambda_max <= LAMBDA_FIRST || count == 1 {
            return Ok(Self {
                values: vec![LAMBDA_FIRST],
            });
        }
        let ratio = lambda_max / LAMBDA_FIRST;
        let mut values = Vec::with_capacity(count);
        for k in 0..count {
            let t = k as f64 / (count - 1) as f64;
            values.push(LAMBDA_FIRST * ratio.powf(t));
        }
        values[0] = LAMBDA_FIRST;
        *values.last_mut().unwrap() = lambda_max;
        Ok(Self { values })
    }

    /// The single-candidate schedule (λ = 0.5 only).
    pub fn single() -> Self {
        Self {
            values: vec![LAMBDA_FIRST],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Upper bound on useful λ values: the largest normalized column
/// correlation `|a_j^T y| / ||a_j||^2`. At or above this level a
/// cold-started run keeps the all-zero solution.
pub fn lambda_max_bound(y: &[f64], shape: &DictionaryShape) -> Result<f64, Error> {
    let n = shape.rows();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let sigma = shape.sigma();
    let nf = n as f64;

    // Slope column: dot = sigma * sum(i * y_i), norm^2 = sigma^2 * sum(i^2).
    let weighted: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| (i + 1) as f64 * yi)
        .sum();
    let sq_sum = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0;
    let mut best = (sigma * weighted).abs() / (sigma * sigma * sq_sum);

    // Step column j has ones on rows j-1..n: dot is a suffix sum, the norm
    // counts the ones.
    let mut suffix = 0.0;
    for j in (2..=shape.columns()).rev() {
        suffix += y[j - 2];
        let norm_sq = (n + 2 - j) as f64;
        let value = suffix.abs() / norm_sq;
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

/// Dual vector matching `beta` at threshold `lambda`:
/// `v_j = (|beta_j| + lambda) * sign(beta_j)`, with `v_j = 0` where
/// `beta_j = 0`. Soft-thresholding the result at the same `lambda`
/// reproduces `beta` (exactly so when the sums are representable).
pub fn hot_start_v(beta: &[f64], lambda: f64) -> Vec<f64> {
    beta.iter()
        .map(|&b| {
            if b == 0.0 {
                0.0
            } else {
                (b.abs() + lambda).copysign(b)
            }
        })
        .collect()
}

/// Bayesian Information Criterion of a candidate fit:
/// `||beta||_0 * ln(p) + p * ln(||y - A beta||^2 / p)`.
///
/// `beta_hat` is in dictionary coordinates (its slope entry multiplies the
/// σ-scaled ramp column). A zero residual yields negative infinity — a
/// perfect fit wins outright.
pub fn bic(y: &[f64], beta_hat: &[f64], shape: &DictionaryShape) -> Result<f64, Error> {
    let model = shape.apply(beta_hat)?;
    if y.len() != model.len() {
        return Err(Error::LengthMismatch {
            expected: model.len(),
            found: y.len(),
        });
    }
    let rss: f64 = y
        .iter()
        .zip(&model)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let nonzeros = beta_hat.iter().filter(|&&b| b != 0.0).count();
    Ok(bic_from_parts(nonzeros, rss, shape.columns()))
}

/// BIC from a precomputed support size and residual sum of squares.
pub fn bic_from_parts(nonzeros: usize, residual_norm_sq: f64, p: usize) -> f64 {
    let pf = p as f64;
    nonzeros as f64 * pf.ln() + pf * (residual_norm_sq / pf).ln()
}

/// One λ candidate in the trace.
#[derive(Debug, Clone)]
pub struct LambdaRun {
    pub lambda: f64,
    /// BIC of the candidate; `None` when the run failed and was skipped.
    pub bic: Option<f64>,
    /// Iterations spent on this run.
    pub iterations: u64,
    pub converged: bool,
}

/// Outcome of the λ-grid search.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Compensated refit coefficients of the first run (λ = 0.5).
    pub beta_first: Vec<f64>,
    /// Compensated refit coefficients of the BIC-minimizing candidate.
    pub beta_best: Vec<f64>,
    pub lambda_best: f64,
    /// Per-candidate (λ, BIC, iterations) records, in schedule order.
    pub bic_trace: Vec<LambdaRun>,
    /// Iterations of the first run (`N_c`); later runs get `ceil(0.1 N_c)`.
    pub first_run_iterations: u64,
    /// Whether the winning run converged by the stopping rule.
    pub converged: bool,
    /// Support of the winning candidate.
    pub support_best: Vec<usize>,
    /// Aggregate arithmetic counters over all runs.
    pub ops: OpCounts,
}

/// Run the λ grid with hot starts and return the BIC-best candidate.
///
/// The hot-start chain passes each run's dense pre-refit coefficients to
/// the next λ; refit vectors are used only for scoring and output. A failed
/// λ is recorded with `bic: None` and the chain continues from the last
/// good state.
pub fn select_model(
    y: &[f64],
    config: &SolverConfig,
    schedule: &LambdaSchedule,
) -> Result<SelectionResult, Error> {
    config.validate()?;
    let first = schedule
        .values()
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidParameter("empty lambda schedule".into()))?;
    if first != LAMBDA_FIRST {
        return Err(Error::InvalidParameter(format!(
            "schedule must start at {LAMBDA_FIRST}, got {first}"
        )));
    }
    if !schedule.values().windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "lambda schedule must be strictly ascending".into(),
        ));
    }

    let shape = DictionaryShape::new(y.len() + 1, config.sigma)?;
    let p = shape.columns();

    let state = SolverState::cold(shape, first);
    let run = lbotdr_from(state, y, config, config.max_iterations(y.len()))?;
    let n_c = run.iterations;
    let follow_up_budget = (0.1 * n_c as f64).ceil() as u64;

    let score = |result: &crate::solver::LbotdrResult| {
        let nonzeros = result.beta_hat.iter().filter(|&&b| b != 0.0).count();
        bic_from_parts(nonzeros, result.residual_norm_sq, p)
    };

    let mut ops = run.ops;
    let mut trace = vec![LambdaRun {
        lambda: first,
        bic: Some(score(&run)),
        iterations: run.iterations,
        converged: run.converged,
    }];
    let beta_first = run.beta_hat.clone();
    let mut chain_beta = run.dense_beta.clone();
    let mut best_bic = score(&run);
    let mut best = run;
    let mut lambda_best = first;

    for &lambda in &schedule.values()[1..] {
        let state = SolverState::from_dual(shape, lambda, hot_start_v(&chain_beta, lambda));
        match lbotdr_from(state, y, config, follow_up_budget) {
            Ok(run) => {
                let candidate_bic = score(&run);
                ops.accumulate(&run.ops);
                trace.push(LambdaRun {
                    lambda,
                    bic: Some(candidate_bic),
                    iterations: run.iterations,
                    converged: run.converged,
                });
                chain_beta = run.dense_beta.clone();
                if candidate_bic < best_bic {
                    best_bic = candidate_bic;
                    lambda_best = lambda;
                    best = run;
                }
            }
            Err(_) => {
                trace.push(LambdaRun {
                    lambda,
                    bic: None,
                    iterations: 0,
                    converged: false,
                });
            }
        }
    }

    Ok(SelectionResult {
        beta_first,
        beta_best: best.beta_hat,
        lambda_best,
        bic_trace: trace,
        first_run_iterations: n_c,
        converged: best.converged,
        support_best: best.support,
        ops,
    })
}

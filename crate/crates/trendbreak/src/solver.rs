//! Bregman-style sparse Kaczmarz solver for step/slope profiles.
//!
//! One iteration touches a single dictionary row: it forms the residual
//! against the soft-thresholded coefficients, then updates the dual vector
//! along that row scaled by the precomputed inverse row norm. Rows are
//! reused cyclically. [`lbotdr`] wraps the loop with a mean-residual
//! stopping rule, locates peaks in the converged coefficients, and refits
//! the selected columns by least squares.

use nalgebra::{DMatrix, DVector};

use crate::dictionary::{DictionaryShape, DEFAULT_SIGMA};
use crate::error::Error;

/// Soft threshold: `max(|v| - lambda, 0) * sign(v)`. Branchless so the
/// iteration core vectorizes.
#[inline]
pub fn shrink(v: f64, lambda: f64) -> f64 {
    (v.abs() - lambda).max(0.0).copysign(v)
}

/// Mean-absolute-residual stopping rule: true once the average absolute
/// residual of a full sweep falls below the minimum detectable loss.
#[inline]
pub fn stopping_criterion(mean_abs_residual_db: f64, epsilon_min_db: f64) -> bool {
    mean_abs_residual_db < epsilon_min_db
}

/// Arithmetic work done by the iteration core, in addition-equivalents and
/// multiplications. Shrink subtractions count as additions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub multiplications: u64,
    pub additions: u64,
    pub iterations: u64,
}

impl OpCounts {
    pub fn multiplications_per_iteration(&self) -> f64 {
        self.multiplications as f64 / self.iterations.max(1) as f64
    }

    pub fn additions_per_iteration(&self) -> f64 {
        self.additions as f64 / self.iterations.max(1) as f64
    }

    pub fn accumulate(&mut self, other: &OpCounts) {
        self.multiplications += other.multiplications;
        self.additions += other.additions;
        self.iterations += other.iterations;
    }
}

/// Solver parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Shrink threshold λ for the first (or only) run.
    pub lambda: f64,
    /// Slope-column scale; must be a positive power of two.
    pub sigma: f64,
    /// Minimum detectable loss in dB; drives the stopping rule.
    pub epsilon_min: f64,
    /// Peak magnitude threshold `t_p` in dB for support detection.
    pub peak_threshold: f64,
    /// Iteration budget expressed in full sweeps of the profile; the
    /// absolute budget is `max_sweeps * n`, so it is always at least `n`.
    pub max_sweeps: usize,
}

/// Default iteration budget in sweeps. Support recovery needs on the
/// order of a hundred sweeps on long noisy profiles, and the budget is the
/// effective stop when the noise floor sits above the minimum detectable
/// loss; much larger budgets start fitting noise.
pub const DEFAULT_MAX_SWEEPS: usize = 192;

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            sigma: DEFAULT_SIGMA,
            epsilon_min: 0.125,
            peak_threshold: 0.125,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.epsilon_min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon_min must be > 0, got {}",
                self.epsilon_min
            )));
        }
        if !(self.peak_threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "peak_threshold must be >= 0, got {}",
                self.peak_threshold
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }

    /// Absolute iteration budget for a profile of `n` samples.
    pub fn max_iterations(&self, n: usize) -> u64 {
        self.max_sweeps as u64 * n as u64
    }
}

/// State of one Kaczmarz run.
///
/// Only the dual vector `v` is stored: the coefficients are always
/// `shrink(v_j, lambda)`, so the first shrink pass of an iteration
/// regenerates them from `v` and a separate copy would be redundant.
///
/// The step entries of a row update are buffered in `(pending_c,
/// pending_len)` and folded into the next iteration's scan, saving one
/// pass over the dual vector; accessors fold the buffer in, so the
/// observable state always matches the plain update order.
#[derive(Debug, Clone)]
pub struct SolverState {
    shape: DictionaryShape,
    lambda: f64,
    v: Vec<f64>,
    k: u64,
    pending_c: f64,
    pending_len: usize,
    sigma_i: Vec<f64>,
    inv_row_norm_sq: Vec<f64>,
    ops: OpCounts,
}

impl SolverState {
    /// Cold start: `beta = v = 0`.
    pub fn cold(shape: DictionaryShape, lambda: f64) -> Self {
        Self::from_dual(shape, lambda, vec![0.0; shape.columns()])
    }

    /// Start from a given dual vector (hot start). The matching coefficient
    /// vector is implied: `beta_j = shrink(v_j, lambda)`.
    pub fn from_dual(shape: DictionaryShape, lambda: f64, v: Vec<f64>) -> Self {
        assert_eq!(v.len(), shape.columns(), "dual vector length");
        let n = shape.rows();
        let sigma = shape.sigma();
        let sigma_i: Vec<f64> = (1..=n).map(|i| sigma * i as f64).collect();
        // 1 / ||a_i||^2 precomputed once per run (sigma^2 i^2 + i).
        let inv_row_norm_sq: Vec<f64> = (1..=n)
            .map(|i| {
                let fi = i as f64;
                1.0 / (sigma * sigma * fi * fi + fi)
            })
            .collect();
        Self {
            shape,
            lambda,
            v,
            k: 0,
            pending_c: 0.0,
            pending_len: 0,
            sigma_i,
            inv_row_norm_sq,
            ops: OpCounts::default(),
        }
    }

    pub fn shape(&self) -> DictionaryShape {
        self.shape
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Iterations performed so far.
    pub fn iterations(&self) -> u64 {
        self.k
    }

    pub fn ops(&self) -> OpCounts {
        self.ops
    }

    #[inline]
    fn logical_v(&self, j: usize) -> f64 {
        if j >= 1 && j <= self.pending_len {
            self.v[j] + self.pending_c
        } else {
            self.v[j]
        }
    }

    /// The dual vector, buffered update folded in.
    pub fn dual(&self) -> Vec<f64> {
        (0..self.shape.columns()).map(|j| self.logical_v(j)).collect()
    }

    /// Current coefficients `shrink(v_j, lambda)`, in solver scale (the
    /// slope entry pairs with the sigma-scaled ramp column).
    pub fn beta(&self) -> Vec<f64> {
        (0..self.shape.columns())
            .map(|j| shrink(self.logical_v(j), self.lambda))
            .collect()
    }

    /// One Kaczmarz iteration on row `((k mod n) + 1)`; returns the residual
    /// `y_i - a_i^T beta`. Only dual entries `1..=i+1` change.
    pub fn step(&mut self, y: &[f64]) -> f64 {
        let n = self.shape.rows();
        debug_assert_eq!(y.len(), n);
        let row = (self.k % n as u64) as usize + 1;
        let ti = row - 1;
        let lambda = self.lambda;

        if self.pending_len > row {
            // Wrapped to a new sweep: settle the buffered update first.
            let c = self.pending_c;
            for vj in &mut self.v[1..=self.pending_len] {
                *vj += c;
            }
            self.pending_len = 0;
        }

        // Scan shrink(v) over the row support, folding in the previous
        // iteration's buffered update. Eight partial sums keep the
        // reduction off the FP-add latency chain and let it vectorize.
        let pending = self.pending_c;
        let fused_len = self.pending_len.min(row);
        let mut sums = [0.0f64; 8];
        {
            let body = &mut self.v[1..=fused_len];
            let mut chunks = body.chunks_exact_mut(8);
            for chunk in &mut chunks {
                for (s, vj) in sums.iter_mut().zip(chunk) {
                    *vj += pending;
                    *s += shrink(*vj, lambda);
                }
            }
            for vj in chunks.into_remainder() {
                *vj += pending;
                sums[0] += shrink(*vj, lambda);
            }
        }
        {
            let body = &self.v[fused_len + 1..=row];
            let mut chunks = body.chunks_exact(8);
            for chunk in &mut chunks {
                for (s, &vj) in sums.iter_mut().zip(chunk) {
                    *s += shrink(vj, lambda);
                }
            }
            for &vj in chunks.remainder() {
                sums[0] += shrink(vj, lambda);
            }
        }
        let mut acc = ((sums[0] + sums[1]) + (sums[2] + sums[3]))
            + ((sums[4] + sums[5]) + (sums[6] + sums[7]));
        acc += self.sigma_i[ti] * shrink(self.v[0], lambda);
        let r = y[ti] - acc;

        // Buffer the dual update along this row; the slope entry is cheap
        // and applied eagerly.
        let c = r * self.inv_row_norm_sq[ti];
        self.v[0] += c * self.sigma_i[ti];
        self.pending_c = c;
        self.pending_len = row;

        self.k += 1;
        self.ops.iterations += 1;
        self.ops.multiplications += 3;
        // row+1 shrink subtractions, row sum additions, the residual
        // subtraction, and row+1 dual additions.
        self.ops.additions += 3 * row as u64 + 3;
        r
    }

    /// Mean absolute residual `(1/n) sum |y_i - a_i^T beta|` of the current
    /// coefficients, in one prefix-sum pass. This is the stopping metric,
    /// evaluated at sweep boundaries.
    pub fn mean_abs_residual(&self, y: &[f64]) -> f64 {
        let n = self.shape.rows();
        debug_assert_eq!(y.len(), n);
        let lambda = self.lambda;
        let slope = shrink(self.logical_v(0), lambda);
        let mut running = 0.0;
        let mut acc = 0.0;
        for i in 1..=n {
            running += shrink(self.logical_v(i), lambda);
            acc += (y[i - 1] - (self.sigma_i[i - 1] * slope + running)).abs();
        }
        acc / n as f64
    }
}

/// Indices of local extrema of the coefficient vector with magnitude at
/// least `peak_threshold`, always including index 1 (the slope entry).
/// Indices are 1-based dictionary columns, sorted ascending and unique.
pub fn peak_locations(beta: &[f64], peak_threshold: f64) -> Result<Vec<usize>, Error> {
    let p = beta.len();
    if p < 3 {
        return Err(Error::InvalidParameter(format!(
            "peak detection needs p >= 3, got {p}"
        )));
    }
    fn sign(x: f64) -> i8 {
        if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        }
    }
    let mut locations = vec![1usize];
    for j in 2..p {
        // 1-based: compare sign(beta_{j+1} - beta_j) against sign(beta_j - beta_{j-1}).
        let left = sign(beta[j - 1] - beta[j - 2]);
        let right = sign(beta[j] - beta[j - 1]);
        if left != right && beta[j - 1].abs() >= peak_threshold {
            locations.push(j);
        }
    }
    Ok(locations)
}

/// Collapse runs of consecutive support indices, keeping the index with the
/// largest coefficient magnitude. The slope index never merges.
pub fn merge_adjacent_peaks(locations: &[usize], beta: &[f64]) -> Vec<usize> {
    let mut merged: Vec<usize> = Vec::with_capacity(locations.len());
    for &j in locations {
        if j == 1 {
            merged.push(j);
            continue;
        }
        match merged.last().copied() {
            Some(prev) if prev >= 2 && j == prev + 1 => {
                if beta[j - 1].abs() > beta[prev - 1].abs() {
                    *merged.last_mut().unwrap() = j;
                }
            }
            _ => merged.push(j),
        }
    }
    merged
}

/// Least-squares refit of `y` on the materialized support columns.
#[derive(Debug, Clone)]
pub struct Refit {
    /// Full-length coefficient vector, zero off the support, in solver scale.
    pub beta: Vec<f64>,
    /// `||y - A' c||_2^2` of the refit.
    pub residual_norm_sq: f64,
    /// True when the normal equations were numerically rank deficient and a
    /// minimum-norm solution was returned instead.
    pub rank_deficient: bool,
}

/// Minimize `||A' c - y||_2` over the columns selected by `indices`
/// (ascending, 1-based, containing the slope index 1).
///
/// The Gram matrix is assembled from closed forms of the step-column
/// overlaps; near-zero eigenvalues are truncated, which resolves rank
/// deficiency by the minimum-norm solution and is reported in the flag.
pub fn least_squares_refit(
    y: &[f64],
    shape: &DictionaryShape,
    indices: &[usize],
) -> Result<Refit, Error> {
    let n = shape.rows();
    let p = shape.columns();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if indices.first() != Some(&1) {
        return Err(Error::InvalidParameter(
            "refit support must start with the slope index 1".into(),
        ));
    }
    if indices.len() > n {
        return Err(Error::InvalidParameter(format!(
            "support size {} exceeds row count {n}",
            indices.len()
        )));
    }
    let mut prev = 0usize;
    for &j in indices {
        if j < 1 || j > p {
            return Err(Error::IndexOutOfRange { index: j, max: p });
        }
        if j <= prev {
            return Err(Error::NonAscendingIndices);
        }
        prev = j;
    }

    let m = indices.len();
    let sigma = shape.sigma();
    let nf = n as f64;

    // suffix[i] = y_i + ... + y_n (1-based access via suffix[i-1]).
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + y[i];
    }
    let weighted: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| (i + 1) as f64 * yi)
        .sum();

    // Triangular sums of integers; exact in f64 at these magnitudes.
    let tri = |x: f64| x * (x + 1.0) / 2.0;
    let sq_sum = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0;

    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (a, &ja) in indices.iter().enumerate() {
        rhs[a] = if ja == 1 {
            sigma * weighted
        } else {
            suffix[ja - 2]
        };
        for (b, &jb) in indices.iter().enumerate().skip(a) {
            let value = match (ja, jb) {
                (1, 1) => sigma * sigma * sq_sum,
                (1, j) | (j, 1) => sigma * (tri(nf) - tri(j as f64 - 2.0)),
                (ja, jb) => (n + 2 - ja.max(jb)) as f64,
            };
            gram[(a, b)] = value;
            gram[(b, a)] = value;
        }
    }

    let eigen = gram.symmetric_eigen();
    let max_eig = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = max_eig * m as f64 * f64::EPSILON;
    let mut rank_deficient = false;
    // c = U diag(1/eig) U^T b with small eigenvalues truncated (min-norm).
    let projected = eigen.eigenvectors.transpose() * &rhs;
    let mut scaled = DVector::<f64>::zeros(m);
    for i in 0..m {
        if eigen.eigenvalues[i] > cutoff {
            scaled[i] = projected[i] / eigen.eigenvalues[i];
        } else {
            rank_deficient = true;
        }
    }
    let coeffs = &eigen.eigenvectors * scaled;

    let mut beta = vec![0.0; p];
    let mut entries = Vec::with_capacity(m);
    for (a, &j) in indices.iter().enumerate() {
        beta[j - 1] = coeffs[a];
        entries.push((j, coeffs[a]));
    }
    let model = shape.apply_sparse(&entries)?;
    let residual_norm_sq = y
        .iter()
        .zip(&model)
        .map(|(yi, mi)| (yi - mi) * (yi - mi))
        .sum();

    Ok(Refit {
        beta,
        residual_norm_sq,
        rank_deficient,
    })
}

/// Outcome of one solver run.
#[derive(Debug, Clone)]
pub struct LbotdrResult {
    /// Refit coefficients with the slope entry compensated: `beta_hat[0]` is
    /// the attenuation slope in dB per sample, step entries are signed dB.
    pub beta_hat: Vec<f64>,
    /// Dense solver-scale coefficients at the stop, for hot-start chaining.
    pub dense_beta: Vec<f64>,
    /// Support used for the refit (1-based, includes index 1).
    pub support: Vec<usize>,
    /// Iterations performed in this run.
    pub iterations: u64,
    /// True when the mean-residual stopping rule fired within budget.
    pub converged: bool,
    /// `||y - A beta_hat||_2^2` of the refit.
    pub residual_norm_sq: f64,
    /// Mean absolute residual of the last completed sweep.
    pub mean_abs_residual: f64,
    /// Arithmetic counters of the iteration core.
    pub ops: OpCounts,
    /// Rank-deficiency flag propagated from the refit.
    pub rank_deficient: bool,
}

/// Cold-started solver run with the config's full sweep budget.
pub fn lbotdr(y: &[f64], config: &SolverConfig) -> Result<LbotdrResult, Error> {
    config.validate()?;
    let shape = DictionaryShape::new(y.len() + 1, config.sigma)?;
    let state = SolverState::cold(shape, config.lambda);
    lbotdr_from(state, y, config, config.max_iterations(y.len()))
}

/// Run Kaczmarz sweeps from `state` until the stopping rule fires or
/// `max_iterations` is exhausted, then locate peaks and refit.
///
/// The stopping metric is the mean absolute residual of the coefficients
/// frozen at the sweep boundary (one extra prefix-sum pass; residuals
/// sampled inside the sweep track the data too closely to measure fit).
/// On budget exhaustion the best-effort result is returned with
/// `converged == false`.
pub fn lbotdr_from(
    mut state: SolverState,
    y: &[f64],
    config: &SolverConfig,
    max_iterations: u64,
) -> Result<LbotdrResult, Error> {
    config.validate()?;
    let shape = state.shape();
    let n = shape.rows();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }

    let mut iterations = 0u64;
    let mut converged = false;
    let mut mean_abs_residual = f64::INFINITY;
    'runs: while iterations < max_iterations {
        for _ in 0..n {
            if iterations >= max_iterations {
                // Budget ran out mid-sweep; no stopping check for the partial sweep.
                break 'runs;
            }
            state.step(y);
            iterations += 1;
        }
        let mean = state.mean_abs_residual(y);
        mean_abs_residual = mean;
        if stopping_criterion(mean, config.epsilon_min) {
            converged = true;
            break;
        }
    }

    let dense_beta = state.beta();

    // The slope compensation happens before peak detection so the scan sees
    // the physically scaled coefficient at index 1.
    let mut compensated = dense_beta.clone();
    compensated[0] *= shape.sigma();
    let raw_support = peak_locations(&compensated, config.peak_threshold)?;
    let support = merge_adjacent_peaks(&raw_support, &compensated);

    let refit = least_squares_refit(y, &shape, &support)?;
    let mut beta_hat = refit.beta;
    beta_hat[0] *= shape.sigma();

    Ok(LbotdrResult {
        beta_hat,
        dense_beta,
        support,
        iterations,
        converged,
        residual_norm_sq: refit.residual_norm_sq,
        mean_abs_residual,
        ops: state.ops(),
        rank_deficient: refit.rank_deficient,
    })
}

//! Implicit representation of the step-function dictionary.
//!
//! The dictionary has `p` columns and `n = p - 1` rows. Column 1 is a linear
//! ramp scaled by `sigma` (it models the fiber attenuation slope); column
//! `j > 1` is a step that is zero on rows `1..j-2` and one on rows `j-1..n`.
//! Row `i` therefore reads `(sigma*i, 1, ..., 1, 0, ..., 0)` with `i` ones.
//!
//! The matrix is never stored in the solver path: row inner products, row
//! norms and the full mat-vec all have closed forms. Materialization exists
//! for the least-squares refit contract and as a test oracle.

use crate::error::Error;

/// Shape and scaling of the implicit dictionary.
///
/// `sigma` rescales the slope column so the Kaczmarz step width
/// `1 / (sigma^2 i^2 + i)` is not dominated by the quadratic term; it must
/// be a positive power of two (the compensation multiply then stays exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DictionaryShape {
    p: usize,
    sigma: f64,
}

/// Default slope-column scale, `2^-10`.
pub const DEFAULT_SIGMA: f64 = 1.0 / 1024.0;

fn is_positive_power_of_two(x: f64) -> bool {
    // Positive, normal, and with an all-zero mantissa.
    const MANTISSA_MASK: u64 = (1 << 52) - 1;
    x > 0.0 && x.is_normal() && x.to_bits() & MANTISSA_MASK == 0
}

impl DictionaryShape {
    /// A dictionary with `p` columns (one slope + `p - 1` steps) over
    /// `p - 1` samples.
    pub fn new(p: usize, sigma: f64) -> Result<Self, Error> {
        if p < 3 {
            return Err(Error::InvalidParameter(format!("p must be >= 3, got {p}")));
        }
        if !is_positive_power_of_two(sigma) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be a positive power of two, got {sigma}"
            )));
        }
        Ok(Self { p, sigma })
    }

    /// Shape for a profile of `n` samples with the default `sigma`.
    pub fn for_samples(n: usize) -> Result<Self, Error> {
        Self::new(n + 1, DEFAULT_SIGMA)
    }

    /// Number of columns `p`.
    pub fn columns(&self) -> usize {
        self.p
    }

    /// Number of rows `n = p - 1` (profile samples).
    pub fn rows(&self) -> usize {
        self.p - 1
    }

    /// Slope-column scale.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn check_row(&self, i: usize) -> Result<(), Error> {
        if i < 1 || i > self.rows() {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: self.rows(),
            });
        }
        Ok(())
    }

    fn check_beta(&self, beta: &[f64]) -> Result<(), Error> {
        if beta.len() != self.p {
            return Err(Error::LengthMismatch {
                expected: self.p,
                found: beta.len(),
            });
        }
        Ok(())
    }

    /// Inner product of row `i` (1-based) with `beta`:
    /// `sigma * i * beta_1 + sum(beta_2 ..= beta_{i+1})`.
    pub fn row_inner_product(&self, i: usize, beta: &[f64]) -> Result<f64, Error> {
        self.check_row(i)?;
        self.check_beta(beta)?;
        let mut acc = self.sigma * i as f64 * beta[0];
        for &b in &beta[1..=i] {
            acc += b;
        }
        Ok(acc)
    }

    /// Squared Euclidean norm of row `i`: `sigma^2 i^2 + i`.
    pub fn row_squared_norm(&self, i: usize) -> Result<f64, Error> {
        self.check_row(i)?;
        let fi = i as f64;
        Ok(self.sigma * self.sigma * fi * fi + fi)
    }

    /// The full mat-vec `A * beta` in one prefix-sum pass over the samples.
    pub fn apply(&self, beta: &[f64]) -> Result<Vec<f64>, Error> {
        self.check_beta(beta)?;
        let n = self.rows();
        let mut y = Vec::with_capacity(n);
        let mut running = 0.0;
        for i in 1..=n {
            running += beta[i];
            y.push(self.sigma * i as f64 * beta[0] + running);
        }
        Ok(y)
    }

    /// Mat-vec for a sparse coefficient vector given as ascending
    /// `(column index, value)` pairs. Same result as [`Self::apply`] on the
    /// scattered dense vector.
    pub fn apply_sparse(&self, entries: &[(usize, f64)]) -> Result<Vec<f64>, Error> {
        let n = self.rows();
        let mut slope = 0.0;
        let mut steps: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        let mut prev = 0usize;
        for &(j, value) in entries {
            if j < 1 || j > self.p {
                return Err(Error::IndexOutOfRange { index: j, max: self.p });
            }
            if j <= prev {
                return Err(Error::NonAscendingIndices);
            }
            prev = j;
            if j == 1 {
                slope = value;
            } else {
                steps.push((j, value));
            }
        }
        let mut y = Vec::with_capacity(n);
        let mut running = 0.0;
        let mut next = steps.iter().peekable();
        for i in 1..=n {
            // Column j turns on at row j - 1.
            while let Some(&&(j, value)) = next.peek() {
                if j - 1 <= i {
                    running += value;
                    next.next();
                } else {
                    break;
                }
            }
            y.push(self.sigma * i as f64 * slope + running);
        }
        Ok(y)
    }

    /// Densify the selected columns (ascending 1-based indices). Column 1 is
    /// `(sigma*1, ..., sigma*n)`; column `j > 1` is zero on rows `1..j-2` and
    /// one on rows `j-1..n`.
    pub fn materialize_columns(&self, indices: &[usize]) -> Result<Vec<Vec<f64>>, Error> {
        let n = self.rows();
        let mut prev = 0usize;
        for &j in indices {
            if j < 1 || j > self.p {
                return Err(Error::IndexOutOfRange { index: j, max: self.p });
            }
            if j <= prev {
                return Err(Error::NonAscendingIndices);
            }
            prev = j;
        }
        let mut cols = Vec::with_capacity(indices.len());
        for &j in indices {
            let col = if j == 1 {
                (1..=n).map(|i| self.sigma * i as f64).collect()
            } else {
                (1..=n).map(|i| if i >= j - 1 { 1.0 } else { 0.0 }).collect()
            };
            cols.push(col);
        }
        Ok(cols)
    }

    /// Densify row `i`. Test oracle for the implicit row operations.
    pub fn materialize_row(&self, i: usize) -> Result<Vec<f64>, Error> {
        self.check_row(i)?;
        let mut row = vec![0.0; self.p];
        row[0] = self.sigma * i as f64;
        for entry in row.iter_mut().take(i + 1).skip(1) {
            *entry = 1.0;
        }
        Ok(row)
    }
}

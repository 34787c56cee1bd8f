//! A sampled OTDR trace in dB with its spatial metadata.

/// Equidistantly sampled dB profile. Sample `i` (1-based) sits at distance
/// `i * sample_spacing_m` from the fiber input.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub samples: Vec<f64>,
    pub sample_spacing_m: f64,
}

impl Profile {
    pub fn new(samples: Vec<f64>, sample_spacing_m: f64) -> Self {
        Self {
            samples,
            sample_spacing_m,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fiber length covered by the trace, in meters.
    pub fn length_m(&self) -> f64 {
        self.samples.len() as f64 * self.sample_spacing_m
    }
}

//! Sparse detection results reported to the operator.

use serde::{Deserialize, Serialize};

/// One detected trend break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// First attenuated sample, 1-based. A step coefficient at dictionary
    /// column `j` lands on sample `j - 1`.
    pub position_index: usize,
    /// `position_index * sample_spacing_m`.
    pub position_m: f64,
    /// Loss in dB, positive for a downward step.
    pub loss_db: f64,
}

/// Detected events plus the estimated attenuation slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventList {
    /// Events at strictly ascending positions.
    pub events: Vec<Event>,
    /// Attenuation slope in dB per sample (negative for a descending
    /// profile); the compensated slope coefficient.
    pub slope_db_per_sample: f64,
}

impl EventList {
    /// Extract events from a compensated coefficient vector. Step entries
    /// with magnitude below `min_loss_db` are dropped (the minimum
    /// detectable loss applies end to end); the pruning never re-runs the
    /// refit.
    pub fn from_beta(beta_hat: &[f64], sample_spacing_m: f64, min_loss_db: f64) -> Self {
        let mut events = Vec::new();
        for (offset, &coef) in beta_hat.iter().enumerate().skip(1) {
            if coef != 0.0 && coef.abs() >= min_loss_db {
                let j = offset + 1; // 1-based dictionary column
                let position_index = j - 1;
                events.push(Event {
                    position_index,
                    position_m: position_index as f64 * sample_spacing_m,
                    loss_db: -coef,
                });
            }
        }
        Self {
            events,
            slope_db_per_sample: beta_hat.first().copied().unwrap_or(0.0),
        }
    }

    /// Slope in dB/km given the sample spacing.
    pub fn slope_db_per_km(&self, sample_spacing_m: f64) -> f64 {
        self.slope_db_per_sample * 1000.0 / sample_spacing_m
    }

    /// The reported model as a full-length compensated coefficient vector
    /// (the inverse of [`Self::from_beta`] up to the pruned entries).
    pub fn to_beta(&self, p: usize) -> Vec<f64> {
        let mut beta = vec![0.0; p];
        beta[0] = self.slope_db_per_sample;
        for event in &self.events {
            beta[event.position_index] = -event.loss_db;
        }
        beta
    }
}

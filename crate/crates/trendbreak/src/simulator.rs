//! Synthetic OTDR profiles with realistic noise.
//!
//! A clean profile is the dictionary applied to a sparse coefficient
//! vector: a slope matching the attenuation plus one negative step per
//! fault. Two noise stages follow, in fixed order: photon-counting noise
//! (Poisson counts of the linear power, SNR ~ sqrt(C)) and coherent
//! Rayleigh noise (Gaussian with relative amplitude `sqrt(Vg / (4 Δz Δν))`).
//! Reflection peaks are not modeled.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dictionary::DictionaryShape;
use crate::error::Error;
use crate::profile::Profile;

/// Geometry and ground-truth events of a simulated fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub n_samples: usize,
    pub sample_spacing_m: f64,
    pub attenuation_db_per_km: f64,
    /// `(dictionary column index in 2..=p, loss in dB > 0)`, ascending and
    /// unique. A fault at column `j` attenuates samples `j-1..n`.
    pub events: Vec<(usize, f64)>,
}

impl FiberSpec {
    pub fn new(n_samples: usize, events: Vec<(usize, f64)>) -> Self {
        Self {
            n_samples,
            sample_spacing_m: 1.0,
            attenuation_db_per_km: 0.2,
            events,
        }
    }

    pub fn length_m(&self) -> f64 {
        self.n_samples as f64 * self.sample_spacing_m
    }

    fn validate(&self) -> Result<(), Error> {
        let p = self.n_samples + 1;
        let mut prev = 1usize;
        for &(j, loss) in &self.events {
            if j < 2 || j > p {
                return Err(Error::IndexOutOfRange { index: j, max: p });
            }
            if j <= prev {
                return Err(Error::NonAscendingIndices);
            }
            if !(loss > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "event loss must be > 0 dB, got {loss}"
                )));
            }
            prev = j;
        }
        Ok(())
    }
}

/// How the coherent Rayleigh noise perturbs the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrnModel {
    /// Additive Gaussian in the dB trace with standard deviation
    /// `sigma_crn` (the default).
    DbAdditive,
    /// Multiplies the linear power by `1 + sigma_crn * g`, clamping the
    /// result to a 1e-12 floor before converting back to dB.
    PowerMultiplicative,
}

/// Noise parameters. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Photon counts at the fiber start.
    pub c0: f64,
    /// Probe source linewidth in Hz.
    pub delta_nu_hz: f64,
    /// Group velocity in m/s.
    pub v_g_m_s: f64,
    /// Coherent-noise length scale in meters; `None` uses the fiber length.
    pub delta_z_m: Option<f64>,
    pub crn_model: CrnModel,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            c0: 1e5,
            delta_nu_hz: 1e5,
            v_g_m_s: 2e8,
            delta_z_m: None,
            crn_model: CrnModel::DbAdditive,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    fn validate(&self) -> Result<(), Error> {
        for (name, value) in [
            ("c0", self.c0),
            ("delta_nu_hz", self.delta_nu_hz),
            ("v_g_m_s", self.v_g_m_s),
            ("delta_z_m", self.delta_z_m.unwrap_or(1.0)),
        ] {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Relative coherent-noise amplitude `sqrt(Vg / (4 Δz Δν))`.
pub fn crn_sigma(noise: &NoiseSpec, fiber_length_m: f64) -> f64 {
    let delta_z = noise.delta_z_m.unwrap_or(fiber_length_m);
    (noise.v_g_m_s / (4.0 * delta_z * noise.delta_nu_hz)).sqrt()
}

/// Counters for samples that hit a numeric floor during noise synthesis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseDiagnostics {
    /// Poisson draws of zero clamped to one count.
    pub zero_count_clamps: usize,
    /// Linear powers clamped to the 1e-12 floor by multiplicative CRN.
    pub power_floor_clamps: usize,
}

impl NoiseDiagnostics {
    pub fn merge(&mut self, other: &NoiseDiagnostics) {
        self.zero_count_clamps += other.zero_count_clamps;
        self.power_floor_clamps += other.power_floor_clamps;
    }
}

/// Clean profile and its coefficient vector from a fiber description.
///
/// The returned coefficients are in solver scale: the slope entry is
/// `-attenuation * spacing / sigma` so that `sigma * i * beta_1` reproduces
/// the dB ramp.
pub fn synth_clean_profile(
    spec: &FiberSpec,
    shape: &DictionaryShape,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    spec.validate()?;
    if shape.columns() != spec.n_samples + 1 {
        return Err(Error::LengthMismatch {
            expected: spec.n_samples + 1,
            found: shape.columns(),
        });
    }
    let mut beta = vec![0.0; shape.columns()];
    beta[0] =
        -spec.attenuation_db_per_km * spec.sample_spacing_m / 1000.0 / shape.sigma();
    for &(j, loss) in &spec.events {
        beta[j - 1] = -loss;
    }
    let y = shape.apply(&beta)?;
    Ok((y, beta))
}

/// Photon-counting noise: per sample, Poisson counts with mean
/// `c0 * 10^(y/10)`, converted back to dB. Zero counts clamp to one.
pub fn add_counting_noise(
    y_db: &[f64],
    noise: &NoiseSpec,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, NoiseDiagnostics), Error> {
    noise.validate()?;
    let mut diagnostics = NoiseDiagnostics::default();
    let mut out = Vec::with_capacity(y_db.len());
    for &y in y_db {
        let mean = noise.c0 * 10f64.powf(y / 10.0);
        let poisson = Poisson::new(mean).map_err(|_| {
            Error::InvalidParameter(format!("invalid Poisson mean {mean} from c0={}", noise.c0))
        })?;
        let counts: f64 = poisson.sample(rng);
        let counts = if counts < 1.0 {
            diagnostics.zero_count_clamps += 1;
            1.0
        } else {
            counts
        };
        out.push(10.0 * (counts / noise.c0).log10());
    }
    Ok((out, diagnostics))
}

/// Coherent Rayleigh noise at the amplitude given by [`crn_sigma`].
pub fn add_crn(
    y_db: &[f64],
    noise: &NoiseSpec,
    fiber_length_m: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, NoiseDiagnostics), Error> {
    noise.validate()?;
    let sigma = crn_sigma(noise, fiber_length_m);
    let mut diagnostics = NoiseDiagnostics::default();
    let mut out = Vec::with_capacity(y_db.len());
    for &y in y_db {
        let g: f64 = StandardNormal.sample(rng);
        let value = match noise.crn_model {
            CrnModel::DbAdditive => y + sigma * g,
            CrnModel::PowerMultiplicative => {
                let power = 10f64.powf(y / 10.0) * (1.0 + sigma * g);
                let power = if power < 1e-12 {
                    diagnostics.power_floor_clamps += 1;
                    1e-12
                } else {
                    power
                };
                10.0 * power.log10()
            }
        };
        out.push(value);
    }
    Ok((out, diagnostics))
}

/// Both noise stages in pipeline order (counting first, then CRN), seeded
/// from the spec.
pub fn apply_noise(
    y_db: &[f64],
    noise: &NoiseSpec,
    fiber_length_m: f64,
) -> Result<(Vec<f64>, NoiseDiagnostics), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    apply_noise_with(y_db, noise, fiber_length_m, &mut rng)
}

/// Noise pipeline with an explicit generator (used by the testbench, which
/// derives one stream per replicate).
pub fn apply_noise_with(
    y_db: &[f64],
    noise: &NoiseSpec,
    fiber_length_m: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, NoiseDiagnostics), Error> {
    let (counted, mut diagnostics) = add_counting_noise(y_db, noise, rng)?;
    let (out, crn_diag) = add_crn(&counted, noise, fiber_length_m, rng)?;
    diagnostics.merge(&crn_diag);
    Ok((out, diagnostics))
}

/// Randomized testbench description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbenchParams {
    pub lengths: Vec<usize>,
    pub profiles_per_length: usize,
    pub faults_per_profile: usize,
    /// Uniform loss magnitude range in dB, `(low, high)`.
    pub magnitude_range_db: (f64, f64),
    /// Minimum pairwise separation of fault positions, in samples.
    pub min_separation: usize,
    pub sample_spacing_m: f64,
    pub attenuation_db_per_km: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl TestbenchParams {
    /// The full-scale law: lengths 5000..=15000 in steps of 1000, 1000
    /// profiles each, 5 faults uniform in 0.5..5 dB.
    pub fn paper_scale(seed: u64) -> Self {
        Self {
            lengths: (5..=15).map(|k| k * 1000).collect(),
            profiles_per_length: 1000,
            faults_per_profile: 5,
            magnitude_range_db: (0.5, 5.0),
            min_separation: 2,
            sample_spacing_m: 1.0,
            attenuation_db_per_km: 0.2,
            noise: NoiseSpec::default(),
            seed,
        }
    }

    /// Desk-scale variant: lengths {5000, 10000, 15000}, 50 profiles each,
    /// same fault law.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            lengths: vec![5000, 10000, 15000],
            profiles_per_length: 50,
            ..Self::paper_scale(seed)
        }
    }

    pub fn cases(&self) -> usize {
        self.lengths.len() * self.profiles_per_length
    }

    fn validate(&self) -> Result<(), Error> {
        if self.lengths.is_empty() || self.profiles_per_length == 0 {
            return Err(Error::InvalidParameter("empty testbench".into()));
        }
        let (low, high) = self.magnitude_range_db;
        if !(low > 0.0 && high >= low) {
            return Err(Error::InvalidParameter(format!(
                "bad magnitude range ({low}, {high})"
            )));
        }
        self.noise.validate()?;
        for &n in &self.lengths {
            let positions = n; // candidate columns 2..=p
            let needed = self
                .faults_per_profile
                .saturating_sub(1)
                .saturating_mul(self.min_separation)
                + 1;
            if self.faults_per_profile > 0 && needed > positions {
                return Err(Error::InfeasibleTestbench(format!(
                    "{} faults with separation {} cannot fit in {} positions",
                    self.faults_per_profile, self.min_separation, positions
                )));
            }
        }
        Ok(())
    }
}

/// One generated profile with its ground truth.
#[derive(Debug, Clone)]
pub struct TestbenchCase {
    pub fiber: FiberSpec,
    /// Noisy trace.
    pub profile: Profile,
    /// Ground-truth coefficients in compensated form: entry 1 is the slope
    /// in dB per sample, step entries are signed dB.
    pub beta_true: Vec<f64>,
    pub diagnostics: NoiseDiagnostics,
    pub length: usize,
    pub replicate: usize,
}

fn draw_positions(
    rng: &mut impl Rng,
    p: usize,
    count: usize,
    min_separation: usize,
) -> Result<Vec<usize>, Error> {
    const MAX_ATTEMPTS: usize = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        let mut picks: Vec<usize> = (0..count).map(|_| rng.gen_range(2..=p)).collect();
        picks.sort_unstable();
        let ok = picks.windows(2).all(|w| w[1] - w[0] >= min_separation);
        if ok {
            return Ok(picks);
        }
    }
    Err(Error::InfeasibleTestbench(format!(
        "could not place {count} faults with separation {min_separation} in {} positions",
        p - 1
    )))
}

/// Generate the full testbench. Replicate `r` of length index `l` draws
/// from an independent stream `(l << 32) | r` of the seeded generator, so
/// the output is reproducible and order-independent.
pub fn random_testbench(params: &TestbenchParams) -> Result<Vec<TestbenchCase>, Error> {
    params.validate()?;
    let mut cases = Vec::with_capacity(params.cases());
    for (li, &n) in params.lengths.iter().enumerate() {
        let shape = DictionaryShape::for_samples(n)?;
        for rep in 0..params.profiles_per_length {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(((li as u64) << 32) | rep as u64);

            let positions =
                draw_positions(&mut rng, n + 1, params.faults_per_profile, params.min_separation)?;
            let (low, high) = params.magnitude_range_db;
            let events: Vec<(usize, f64)> = positions
                .into_iter()
                .map(|j| {
                    let loss = if high > low {
                        rng.gen_range(low..high)
                    } else {
                        low
                    };
                    (j, loss)
                })
                .collect();

            let fiber = FiberSpec {
                n_samples: n,
                sample_spacing_m: params.sample_spacing_m,
                attenuation_db_per_km: params.attenuation_db_per_km,
                events,
            };
            let (clean, mut beta_true) = synth_clean_profile(&fiber, &shape)?;
            let (noisy, diagnostics) =
                apply_noise_with(&clean, &params.noise, fiber.length_m(), &mut rng)?;
            beta_true[0] *= shape.sigma();

            cases.push(TestbenchCase {
                profile: Profile::new(noisy, fiber.sample_spacing_m),
                fiber,
                beta_true,
                diagnostics,
                length: n,
                replicate: rep,
            });
        }
    }
    Ok(cases)
}

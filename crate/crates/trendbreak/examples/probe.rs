//! Scratch probe: residual decay, support recovery, and sweep throughput.

use trendbreak::dictionary::DictionaryShape;
use trendbreak::simulator::{apply_noise, synth_clean_profile, FiberSpec, NoiseSpec};
use trendbreak::solver::{peak_locations, SolverConfig, SolverState};

fn table1_fiber(n: usize) -> FiberSpec {
    FiberSpec::new(
        n,
        vec![
            (3594, 13.9),
            (4405, 2.4),
            (5299, 0.4),
            (5314, 1.1),
            (5318, 1.2),
            (5350, 0.6),
            (6396, 0.7),
            (7933, 5.8),
        ],
    )
}

fn run_case(label: &str, y: &[f64], shape: DictionaryShape, truth: &[usize], sweeps: &[u32]) {
    let n = shape.rows();
    let config = SolverConfig::default();
    let mut state = SolverState::cold(shape, config.lambda);
    println!("== {label}");
    let mut done = 0u32;
    for &target in sweeps {
        for _ in 0..(target - done) as usize * n {
            state.step(y);
        }
        done = target;
        let mut comp = state.beta();
        comp[0] *= shape.sigma();
        let peaks = peak_locations(&comp, config.peak_threshold).unwrap();
        let mean = state.mean_abs_residual(y);
        let missing: Vec<usize> = truth
            .iter()
            .copied()
            .filter(|t| !peaks.iter().any(|&p| p.abs_diff(*t) <= 2))
            .collect();
        let extras = peaks
            .iter()
            .filter(|&&p| p != 1 && truth.iter().all(|&t| p.abs_diff(t) > 2))
            .count();
        println!(
            "{target:5} sweeps  mean|r|={mean:7.4}  peaks={:3}  missing={missing:?}  extras={extras}",
            peaks.len()
        );
    }
}

fn main() {
    // Throughput at n = 15000.
    let n = 15000;
    let shape = DictionaryShape::for_samples(n).unwrap();
    let fiber = FiberSpec::new(n, vec![(4000, 2.0), (9000, 1.0)]);
    let (y, _) = synth_clean_profile(&fiber, &shape).unwrap();
    let mut state = SolverState::cold(shape, 0.5);
    let start = std::time::Instant::now();
    for _ in 0..8 * n {
        state.step(&y);
    }
    let dt = start.elapsed().as_secs_f64();
    println!("n=15000: {:.3} s for 8 sweeps = {:.3} s/sweep", dt, dt / 8.0);

    // Noiseless Table-I profile.
    let n = 8000;
    let shape = DictionaryShape::for_samples(n).unwrap();
    let fiber = table1_fiber(n);
    let truth: Vec<usize> = fiber.events.iter().map(|&(j, _)| j).collect();
    let (clean, _) = synth_clean_profile(&fiber, &shape).unwrap();
    run_case(
        "table1 noiseless",
        &clean,
        shape,
        &truth,
        &[4, 8, 16, 32, 64, 128, 256],
    );

    // Stress noise: counting (c0 = 1e5) plus dB-additive CRN (sigma = 0.25).
    for seed in [1u64, 2, 3] {
        let noise = NoiseSpec {
            seed,
            ..NoiseSpec::default()
        };
        let (noisy, _) = apply_noise(&clean, &noise, fiber.length_m()).unwrap();
        run_case(
            &format!("table1 noisy seed {seed}"),
            &noisy,
            shape,
            &truth,
            &[8, 16, 32, 64, 128, 256],
        );
    }
}

//! Scratch probe: the 8-event reference profile over seeds, with matching
//! at +/-2 samples, as the acceptance run will do.

use trendbreak::dictionary::DictionaryShape;
use trendbreak::evaluation::{Detector, LbiDetector};
use trendbreak::events::EventList;
use trendbreak::profile::Profile;
use trendbreak::simulator::{apply_noise, synth_clean_profile, FiberSpec, NoiseSpec};
use trendbreak::solver::SolverConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sweeps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8);
    let grid: bool = args.get(3).map(|s| s == "grid").unwrap_or(true);
    let delta_nu: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e5);

    let n = 8000;
    let shape = DictionaryShape::for_samples(n).unwrap();
    let truth = [
        (3594usize, 13.9),
        (4405, 2.4),
        (5299, 0.4),
        (5314, 1.1),
        (5318, 1.2),
        (5350, 0.6),
        (6396, 0.7),
        (7933, 5.8),
    ];
    let fiber = FiberSpec::new(n, truth.to_vec());
    let (clean, _) = synth_clean_profile(&fiber, &shape).unwrap();

    let config = SolverConfig {
        max_sweeps: sweeps,
        ..SolverConfig::default()
    };
    let detector = if grid {
        LbiDetector::with_grid(config)
    } else {
        LbiDetector::fixed_lambda(config)
    };

    let mut all_events_ok = 0;
    let mut zero_fp = 0;
    for seed in 1..=seeds {
        let noise = NoiseSpec {
            seed,
            delta_nu_hz: delta_nu,
            ..NoiseSpec::default()
        };
        let (noisy, _) = apply_noise(&clean, &noise, fiber.length_m()).unwrap();
        let start = std::time::Instant::now();
        let beta = detector
            .detect(&Profile::new(noisy, 1.0))
            .unwrap();
        let secs = start.elapsed().as_secs_f64();
        let list = EventList::from_beta(&beta, 1.0, 0.125);

        // Greedy nearest matching within +/-2 samples (beta indices).
        let mut used = vec![false; list.events.len()];
        let mut bad: Vec<String> = Vec::new();
        for &(j, loss) in &truth {
            let best = list
                .events
                .iter()
                .enumerate()
                .filter(|(e, ev)| !used[*e] && (ev.position_index + 1).abs_diff(j) <= 2)
                .min_by_key(|(_, ev)| (ev.position_index + 1).abs_diff(j));
            match best {
                Some((e, ev)) => {
                    used[e] = true;
                    if (ev.loss_db - loss).abs() > 0.3 {
                        bad.push(format!("{j}: mag {:.2} vs {loss}", ev.loss_db));
                    }
                }
                None => bad.push(format!("{j}: missed")),
            }
        }
        let fp = used.iter().filter(|u| !**u).count();
        if bad.is_empty() {
            all_events_ok += 1;
        }
        if fp == 0 {
            zero_fp += 1;
        }
        println!(
            "seed {seed:2}: {:.1}s, events={}, fp={fp}, problems={bad:?}",
            secs,
            list.events.len()
        );
    }
    println!(
        "sweeps={sweeps} grid={grid}: all-events-ok {all_events_ok}/{seeds}, zero-fp {zero_fp}/{seeds}"
    );
}

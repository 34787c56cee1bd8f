//! Scratch probe: anatomy of false positives on one noisy desk profile.

use trendbreak::evaluation::{Detector, LbiDetector};
use trendbreak::simulator::{random_testbench, TestbenchParams};
use trendbreak::solver::SolverConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sweeps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let length: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10000);

    let params = TestbenchParams {
        lengths: vec![length],
        profiles_per_length: 3,
        ..TestbenchParams::desk_scale(1)
    };
    let cases = random_testbench(&params).unwrap();
    let config = SolverConfig {
        max_sweeps: sweeps,
        ..SolverConfig::default()
    };
    let lbi = LbiDetector::fixed_lambda(config);

    for case in &cases {
        println!(
            "== length {} replicate {} truth {:?}",
            case.length,
            case.replicate,
            case.fiber
                .events
                .iter()
                .map(|&(j, m)| (j, (m * 100.0).round() / 100.0))
                .collect::<Vec<_>>()
        );
        let detected = lbi.detect(&case.profile).unwrap();
        let truth: Vec<usize> = case.fiber.events.iter().map(|&(j, _)| j).collect();
        let mut near = 0;
        let mut far = 0;
        for j in 2..=detected.len() {
            let mag = detected[j - 1];
            if mag == 0.0 {
                continue;
            }
            let dist = truth.iter().map(|&t| t.abs_diff(j)).min().unwrap();
            let is_true = case.beta_true[j - 1] != 0.0;
            if is_true {
                println!("   TP {j:6}  refit {mag:7.3}  true {:7.3}", case.beta_true[j - 1]);
            } else {
                if dist <= 3 {
                    near += 1;
                } else {
                    far += 1;
                }
                if dist <= 3 || mag.abs() > 0.3 {
                    println!("   FP {j:6}  refit {mag:7.3}  dist {dist}");
                }
            }
        }
        let missed: Vec<&(usize, f64)> = case
            .fiber
            .events
            .iter()
            .filter(|&&(j, _)| detected[j - 1] == 0.0)
            .collect();
        println!("   near-FPs(<=3) {near}, far-FPs {far}, missed {missed:?}");
    }
}

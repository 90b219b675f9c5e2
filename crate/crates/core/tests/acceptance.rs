//! Acceptance run: one line per criterion, followed by the individual checks.
//! Pass criterion numbers as arguments to run a subset.

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use dupnet::ctmc::simulate;
use dupnet::stats::TestReport;
use dupnet::verify::{trajectory_violations, Suite, DEFAULT_SEED};
use dupnet::{ModelParams, NetworkState};

// Random configurations for the exact-law checks, on top of the seeded batch
// inside the invariants suite.
fn invariants_proptest() -> TestReport {
    let strategy = (1u64..80, 1u64..4, 0.05f64..6.0, 0.05f64..4.0, 0.0f64..1.0, 0.0f64..1.0, 0.05f64..40.0, any::<u64>());
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    let outcome = runner.run(&strategy, |(n, mult, lambda, mu, a, b, horizon, seed)| {
        let f_n = 1 + (n * mult - 1) * (a * 7.0) as u64 % (n * mult);
        let p = ModelParams::new(lambda, mu, n, f_n).unwrap();
        let x0 = (a * f_n as f64) as u64;
        let x1 = (b * (f_n - x0) as f64) as u64;
        let s = NetworkState::new(x0, x1);
        let tr = simulate(&p, s, horizon, seed).unwrap();
        let bad = trajectory_violations(&tr);
        prop_assert!(bad.is_empty(), "{bad:?}");
        let again = simulate(&p, s, horizon, seed).unwrap();
        prop_assert_eq!(again.to_csv(), tr.to_csv());
        Ok(())
    });
    let detail = match &outcome {
        Ok(()) => "256 proptest configurations".to_string(),
        Err(e) => e.to_string(),
    };
    TestReport::new("invariants_proptest", if outcome.is_ok() { 0.0 } else { 1.0 }, 0.0, detail)
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, suite) in Suite::ALL.into_iter().enumerate() {
        let number = i + 1;
        if !wanted.is_empty() && !wanted.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let mut reports = match suite.run(DEFAULT_SEED) {
            Ok(r) => r,
            Err(e) => vec![TestReport::new(suite.name(), f64::INFINITY, 0.0, format!("error: {e}"))],
        };
        if suite == Suite::Invariants {
            reports.push(invariants_proptest());
        }
        let pass = reports.iter().all(|r| r.pass);
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {number} ({suite}): {} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
        for r in &reports {
            println!("    {r}");
        }
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

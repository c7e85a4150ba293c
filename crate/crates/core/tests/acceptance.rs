//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p homogl --test acceptance`. Select criteria by
//! passing their ids, e.g. `-- AC1 AC7`.

use std::process::ExitCode;
use std::time::Instant;

use homogl::pipeline::config::AnnulusConfig;
use homogl::pipeline::criteria::{self, Criterion};

/// The thresholds the criteria are judged by, pinned to their contract values.
fn pinned_thresholds() {
    assert_eq!(criteria::AC1_ENTRY_TOL, 1e-3);
    assert_eq!(criteria::AC1_MAX_SECONDS, 30.0);
    assert_eq!(criteria::AC2_ASYMMETRY, 1e-6);
    assert_eq!(criteria::AC3_ISOMETRY_TOL, 1e-8);
    assert_eq!(criteria::AC3_GRADIENT_TOL, 1e-6);
    assert_eq!(criteria::AC4_BAND, 0.15);
    assert_eq!(criteria::AC4_MAX_SECONDS, 600.0);
    assert_eq!(criteria::AC5_MODULUS_SLACK, 1e-8);
    assert_eq!(criteria::AC5_GRADIENT_TOL, 1e-5);
    assert_eq!(criteria::AC7_CONSTANT_TOL, 1e-4);
    assert_eq!(criteria::AC7_SCALING_TOL, 1e-6);
    assert_eq!(criteria::AC7_RANDOM_FIELDS, 20);
    assert_eq!(criteria::AC8_SPREAD, 2.0);
    assert_eq!(criteria::AC9_MAX_SECONDS, 1800.0);
}

fn annulus_sweep() -> AnnulusConfig {
    let cfg = AnnulusConfig::default();
    assert_eq!(cfg.ratios, vec![8.0, 32.0, 128.0]);
    assert_eq!(cfg.material.build().bounds(), (1.0, 3.0));
    cfg
}

type Check = Box<dyn Fn() -> Criterion>;

fn main() -> ExitCode {
    pinned_thresholds();
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let checks: Vec<(&str, Check)> = vec![
        ("AC1", Box::new(criteria::ac1_cell_problem)),
        ("AC2", Box::new(criteria::ac2_a0_sanity)),
        ("AC3", Box::new(criteria::ac3_unfolding)),
        ("AC4", Box::new(criteria::ac4_energy_law)),
        ("AC5", Box::new(criteria::ac5_maximum_principle)),
        ("AC6", Box::new(criteria::ac6_vortices)),
        ("AC7", Box::new(criteria::ac7_annulus)),
        ("AC8", Box::new(|| criteria::ac8_competitor(&annulus_sweep()))),
        ("AC10", Box::new(criteria::ac10_linear_paradigm)),
        ("AC9", Box::new(criteria::ac9_homogenized_limit)),
    ];
    let mut failed = Vec::new();
    for (id, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let c = check();
        println!("{c} {{{:.1}s}}", start.elapsed().as_secs_f64());
        if !c.pass {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing {}", failed.join(", "));
        ExitCode::FAILURE
    }
}

//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.
//!
//! `SUBROUGH_SEED` overrides the master seed, `SUBROUGH_CRITERIA=3,7` runs a
//! subset and `SUBROUGH_REPORT=path` writes the JSON report.

use subrough::verify::{run_suite, Scale};

fn fmt(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

fn main() {
    let seed = std::env::var("SUBROUGH_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(20_240_917);
    let only: Vec<u8> = std::env::var("SUBROUGH_CRITERIA")
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let report = run_suite(seed, Scale::Full, &only, |o| {
        println!(
            "criterion {:>2} {} {} ({:.1} s)",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.elapsed.as_secs_f64()
        );
        for c in &o.checks {
            println!("    [{}] {}: {} (target {})", if c.passed { "ok" } else { "x" }, c.name, fmt(c.value), c.target);
        }
        if let Some(e) = o.details.get("error") {
            println!("    error: {e}");
        }
    });
    if let Ok(path) = std::env::var("SUBROUGH_REPORT") {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, json).expect("report written");
    }
    let failed = report.outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} of {} criteria passed", report.outcomes.len() - failed, report.outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

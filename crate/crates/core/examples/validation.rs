//! Cross-checks of the reduced engines against brute-force 2^M simulation.

use hybridsense::fisher::RunOptions;
use hybridsense::validation::run_validation;

fn main() -> hybridsense::Result<()> {
    let checks = run_validation(5, &RunOptions::default())?;
    for c in &checks {
        println!("{} {:<24} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().any(|c| !c.passed) {
        std::process::exit(2);
    }
    Ok(())
}

//! Lists the built-in experiment presets and their resolved settings.

use hybridsense::experiments::{ExperimentConfig, Preset};

fn main() -> hybridsense::Result<()> {
    for preset in Preset::all() {
        let s = ExperimentConfig::new(preset).settings()?;
        println!(
            "{preset:<22} M = {:<3} beta = {:.5} N_max = {:<8} runs = {:<4} estimator = {}",
            s.params.m, s.params.beta, s.params.n_max, s.runs, s.estimator
        );
    }
    Ok(())
}

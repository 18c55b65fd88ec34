//! Parameter sweep over M with a small custom configuration, written as CSV.

use hybridsense::experiments::{sweep, ExperimentConfig, Preset};

fn main() -> hybridsense::Result<()> {
    let base = ExperimentConfig::new(Preset::Custom)
        .with("N_max", "2^10")?
        .with("runs", "8")?
        .with("checkpoints_per_octave", "1")?;
    let table = sweep("M", &[1.0, 2.0, 4.0], &base)?;
    print!("{}", table.to_csv());
    Ok(())
}

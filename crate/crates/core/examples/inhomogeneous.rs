//! Register with two coupling strengths. Each group stays symmetric, so the
//! state lives on the product of two small Dicke spaces.

use hybridsense::fisher::estimate_fisher;
use hybridsense::protocol::ProtocolParams;
use hybridsense::states::{SpinEnsembleSpec, SpinGroup};

fn main() -> hybridsense::Result<()> {
    let group = |size, beta| SpinGroup {
        size,
        initial_bloch: [1.0, 0.0, 0.0],
        beta,
        phi0: 0.0,
    };
    let mut params = ProtocolParams::new(6, 0.0, 0.7, 2048);
    params.checkpoints_per_octave = 1;
    params.ensemble = Some(SpinEnsembleSpec {
        groups: vec![group(2, 0.08), group(4, 0.02)],
    });
    println!("backend: {}", params.resolve_backend()?);
    let est = estimate_fisher(&params, 16, 5)?;
    for (i, n) in est.checkpoints.iter().enumerate() {
        println!("{n:>5} {:.4e}", est.conditional_fi[i]);
    }
    Ok(())
}

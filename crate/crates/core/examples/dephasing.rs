//! Auxiliary-spin dephasing: Fisher information at fixed N as T2 shortens,
//! with exact local dephasing and with the collective random-kick model.

use hybridsense::fisher::estimate_fisher;
use hybridsense::protocol::{DephasingModel, ProtocolParams};

fn main() -> hybridsense::Result<()> {
    let n = 4096;
    println!("{:>8} {:>12} {:>12}", "gamma2", "local", "kick");
    for gamma2 in [0.0, 1e-3, 3e-3, 1e-2] {
        let mut row = Vec::new();
        for model in [DephasingModel::Local, DephasingModel::CollectiveKick] {
            let mut p = ProtocolParams::from_k0ts(4, 0.02, 0.7, n);
            p.gamma2 = gamma2;
            p.dephasing = model;
            p.checkpoints_per_octave = 1;
            let est = estimate_fisher(&p, 16, 9)?;
            row.push(*est.conditional_fi.last().unwrap());
        }
        println!("{gamma2:>8.0e} {:>12.4e} {:>12.4e}", row[0], row[1]);
    }
    Ok(())
}

//! Mean logarithmic negativity of the register along measurement records,
//! for a single-spin cut and an even cut.

use hybridsense::entanglement::{entanglement_trace, Bipartition};
use hybridsense::fisher::RunOptions;
use hybridsense::protocol::ProtocolParams;

fn main() -> hybridsense::Result<()> {
    let m = 8;
    let mut params = ProtocolParams::from_k0ts(m, 0.02, 0.7, 1 << 13);
    params.checkpoints_per_octave = 1;
    let splits = [Bipartition::single(m)?, Bipartition::equal(m)?];
    let tr = entanglement_trace(&params, &splits, 32, 1, &RunOptions::default())?;

    println!("{:>6} {:>10} {:>10}", "N", splits[0].to_string(), splits[1].to_string());
    for (c, n) in tr.checkpoints.iter().enumerate() {
        println!("{n:>6} {:>10.4} {:>10.4}", tr.mean_ln[0][c], tr.mean_ln[1][c]);
    }
    for (s, split) in splits.iter().enumerate() {
        if let Some(n) = tr.crossing(s, 0.5) {
            println!("{split}: half of final value at N ~ {n:.0}");
        }
    }
    Ok(())
}

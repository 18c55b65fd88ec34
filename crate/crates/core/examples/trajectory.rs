//! One simulated measurement record: the sensor signal oscillates at the
//! spin precession frequency while the register slowly locks onto a phase.

use hybridsense::protocol::{run_trajectory_with, ProtocolParams, TrajectoryOptions};

fn main() -> hybridsense::Result<()> {
    let params = ProtocolParams::from_k0ts(20, 0.01, 0.7, 64);
    let opts = TrajectoryOptions {
        keep_probabilities: true,
        ..TrajectoryOptions::default()
    };
    let rec = run_trajectory_with(&params, 42, &opts, None)?;

    println!("n   p_plus   outcome");
    for n in 0..rec.n_steps {
        let bar = "#".repeat((rec.probabilities[n as usize] * 40.0) as usize);
        let sign = if rec.outcome(n) { '+' } else { '-' };
        println!("{n:<3} {:.4}   {sign} {bar}", rec.probabilities[n as usize]);
    }
    let plus = (0..rec.n_steps).filter(|&n| rec.outcome(n)).count();
    println!("\n{plus} of {} outcomes were +", rec.n_steps);
    println!("ln P(record) = {:.4}", rec.log_p.last().unwrap());
    Ok(())
}

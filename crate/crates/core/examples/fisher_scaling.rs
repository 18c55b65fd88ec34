//! Monte Carlo Fisher information against N, with a power-law fit and the
//! closed-form single-spin prediction for comparison.

use hybridsense::analytic::{backaction_rate_exact, fisher_closed_form};
use hybridsense::fisher::{estimate_fisher, fit_scaling_exponent_by, Estimator};
use hybridsense::protocol::ProtocolParams;

fn main() -> hybridsense::Result<()> {
    let (m, k0ts) = (4, 0.01);
    let mut params = ProtocolParams::from_k0ts(m, k0ts, 0.7, 4096);
    params.checkpoints_per_octave = 2;
    let est = estimate_fisher(&params, 24, 1)?;
    let gamma = backaction_rate_exact(params.beta, 0.0)?;

    println!("{:>6} {:>12} {:>10} {:>12}", "N", "FI", "+/-", "closed form");
    for (i, &n) in est.checkpoints.iter().enumerate() {
        let cf = fisher_closed_form(n, m, k0ts, 1.0, gamma)?.value;
        println!(
            "{n:>6} {:>12.4e} {:>10.2e} {cf:>12.4e}",
            est.conditional_fi[i], est.conditional_std_error[i]
        );
    }
    let fit = fit_scaling_exponent_by(&est, (64, 4096), Estimator::Conditional)?;
    println!("\nFI ~ N^{:.3} (95% CI +/- {:.3}) over N in [64, 4096]", fit.exponent, fit.ci);
    Ok(())
}

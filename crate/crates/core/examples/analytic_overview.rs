//! Closed-form quantities: backaction rate, Fisher sum and its closed form,
//! the long-time asymptote, Heisenberg references and the crossover size.

use hybridsense::analytic::*;

fn main() -> hybridsense::Result<()> {
    let (m, k0ts, tau) = (20, 0.01, 1.0);
    let beta = beta_from_k0ts(k0ts);
    let gb = backaction_rate_approx(beta);
    println!("beta = {beta:.6}, gamma_b ~ {gb:.4e} (exact {:.4e})", backaction_rate_exact(beta, 0.0)?);
    println!("memory time 1/gamma_b = {:.0} measurements\n", 1.0 / gb);

    println!("{:>8} {:>12} {:>12} {:>12}", "N", "sum", "closed", "HL");
    for n in [100u64, 1_000, 10_000, 100_000] {
        let sum = fisher_sum_exact(n, m, k0ts, tau, gb, 0.7)?;
        let cf = fisher_closed_form(n, m, k0ts, tau, gb)?;
        println!("{n:>8} {sum:>12.4e} {:>12.4e} {:>12.4e}", cf.value, hl_fisher(m, n as f64, tau));
    }

    let asym = fisher_asymptote(1 << 20, m, k0ts, tau, gb, 0.0)?;
    println!("\nasymptote at N = 2^20: {:.4e} (with finite-coupling factor {:.4e})", asym.leading, asym.corrected);

    let c = PhysicalConstants::nv_carbon13();
    let t = 1.0;
    println!("Heisenberg limit, M = {m}, T = {t} s: {:.3e} T", heisenberg_uncertainty(m, t, &c)?);
    println!("bare sensor, T2 = 1 ms: {:.3e} T", nv_alone_uncertainty(1e-3, t, &c)?);
    for ratio in [1e2, 1e3, 1e4] {
        println!("crossover M for T2_aux/T2_nv = {ratio:.0e}: {:.1}", crossover_m(ratio)?);
    }
    Ok(())
}

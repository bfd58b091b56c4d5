//! Samples the Laguerre basis through its impulse-invariant state-space
//! model and compares it with the closed-form functions.
//!
//! cargo run --example basis_check -- [p] [K] [delta]

use lagdelay::basis::{build_phi, check_basis, eval_basis_time, BasisConfig};
use lagdelay::signal::n_samples_for;

fn main() -> lagdelay::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let p = args.first().copied().unwrap_or(20.0);
    let k = args.get(1).copied().unwrap_or(6.0) as usize;
    let delta = args.get(2).copied().unwrap_or(1e-4);

    let cfg = BasisConfig::new(p, k + 1)?;
    for horizon in [0.5, 2.0] {
        let n = n_samples_for(horizon, delta);
        let check = check_basis(&cfg, delta, n)?;
        println!("T = {horizon} s, N = {n}");
        println!("  cond(Phi)               {:.4e}", check.cond);
        println!("  max rel. sampling error {:.3e}", check.sampling_error);
        println!("  transition matrix error {:.3e}", check.transition_error);
        println!("  |delta Phi'Phi - I|     {:.3e}", check.gram_deviation);
    }

    let phi = build_phi(&cfg, delta, (k + 1).max(5))?;
    println!("\nfirst rows of Phi vs closed form (l_{k}):");
    for n in 0..5 {
        let t = n as f64 * delta;
        println!("  t = {t:.1e}: {:+.12e}  {:+.12e}", phi.matrix[(n, k)], eval_basis_time(&cfg, k, t));
    }
    Ok(())
}

//! One noisy experiment, all four estimators and the Cramér-Rao bound.
//!
//! cargo run --example estimate_delay -- [tau] [lambda] [seed]

use lagdelay::estimators::{
    crlb, estimate_delay_freq_interp, estimate_delay_lag_spline, estimate_delay_ml, estimate_delay_proposed,
};
use lagdelay::signal::{simulate, InputDesign};

fn main() -> lagdelay::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tau: f64 = args.first().and_then(|a| a.parse().ok()).unwrap_or(1.33e-3);
    let lambda: f64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(0.01);
    let seed: u64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(42);

    let design = InputDesign {
        p: 50.0,
        u: vec![1.2144932686814107, -0.33028639703378243, -0.33028639703378243, -0.5539204746138457],
        eta: 2.0,
        delta: 3e-4,
        horizon: 0.5,
        tau_guess: 3e-4,
    };
    let k_model = 12;
    let data = simulate(&design, tau, lambda, seed)?;
    println!("N = {}, delta = {}, lambda = {lambda}, true tau = {tau:e}", data.n_samples(), data.delta);

    let proposed = estimate_delay_proposed(&data, &design, k_model, k_model + 1)?;
    let ml = estimate_delay_ml(&data, &design, design.tau_max())?;
    let spline = estimate_delay_lag_spline(&data, &design, k_model)?;
    let freq = estimate_delay_freq_interp(&data, &design)?;
    for e in [&proposed, &ml, &spline, &freq] {
        println!("{:<12} {:.9e}  (error {:+.3e})", e.method.as_str(), e.tau_hat, e.tau_hat - tau);
    }
    if let Some(h) = &proposed.diagnostics.h_hat {
        println!("H_hat[0..4] = {:.6?}", &h[..4]);
    }
    if lambda > 0.0 {
        let bound = crlb(&design, tau, lambda)?;
        println!("CRLB = {:.4e} (standard deviation {:.3e}), window {:?}", bound.bound, bound.bound.sqrt(), bound.window);
    }
    Ok(())
}

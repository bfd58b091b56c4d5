//! The delay operator in the Laguerre domain: Markov parameters, the output
//! spectrum of a delayed input, and the closed-form delay recovered from
//! exact Markov parameters.

use lagdelay::delay::{assemble_ab, closed_form_delay, delay_spectrum, markov_params};
use lagdelay::signal::InputDesign;

fn main() -> lagdelay::Result<()> {
    let p = 50.0;
    let tau = 1.33e-3;
    let kappa = 2.0 * p * tau;

    let h = markov_params(kappa, 8);
    println!("kappa = {kappa}");
    println!("h = {:.6?}", h.values);

    let design = InputDesign {
        p,
        u: vec![1.2145, -0.3303, -0.3303, -0.5539],
        eta: 2.0,
        delta: 3e-4,
        horizon: 0.5,
        tau_guess: 3e-4,
    };
    let y = delay_spectrum(&design.spectrum(), kappa, 10);
    println!("Y = {:.6?}", y.coeffs);

    for m in [3, 5, 10, 20] {
        let h = markov_params(kappa, m);
        let sys = assemble_ab(&h.values)?;
        let worst = sys
            .vec_a
            .iter()
            .zip(&sys.vec_b)
            .map(|(a, b)| (a - kappa * b).abs())
            .fold(0.0, f64::max);
        let tau_hat = closed_form_delay(&sys, p)?;
        println!("M = {m:2}: max |A - kappa B| = {worst:.2e}, tau = {tau_hat:.15e}");
    }
    Ok(())
}

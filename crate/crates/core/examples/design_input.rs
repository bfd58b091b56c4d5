//! Experiment design: grid search over the Laguerre parameter and the free
//! input coefficients, minimizing the MSE of the Markov-parameter estimate
//! at a rough delay guess. Prints the design, its constraint report and a
//! Parseval check of the synthesized signal.
//!
//! cargo run --example design_input -- [delta] [K]

use lagdelay::design::{optimize_design, DesignProblem, PGrid};
use lagdelay::quad::GaussLegendre;
use lagdelay::signal::synthesize_input;

fn main() -> lagdelay::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let delta = args.first().copied().unwrap_or(1e-4);
    let k_model = args.get(1).copied().unwrap_or(6.0) as usize;

    let problem = DesignProblem {
        delta,
        horizon: 0.5,
        i_order: 3,
        energy_bound: 2.0,
        tau_guess: delta,
        noise_var: 0.01,
        k_model,
        p_grid: PGrid::default(),
        u_grid: 25,
        refine: true,
    };
    let out = optimize_design(&problem)?;
    let d = &out.design;
    println!("p          = {:.4}", d.p);
    println!("u          = {:.6?}", d.u);
    println!("MSE(H_hat) = {:.4e}  ({} evaluations)", out.objective, out.evaluations);
    println!("feasible   = {}  (energy {:.6}, u(0) = {:.2e})", out.constraints.is_feasible(), out.constraints.energy, d.initial_value());

    // Parseval: the time-domain energy equals sum u_k^2.
    let tail = 60.0 / d.p;
    let energy = GaussLegendre::new(12).integrate(0.0, tail, 400, |t| synthesize_input(d, t).powi(2));
    println!("energy     = {energy:.10} (time domain) vs {:.10} (spectrum)", d.energy());
    println!("T_u        = {:.4} s, largest detectable delay {:.4} s", d.active_duration(), d.tau_max());
    println!("{}", serde_json::to_string_pretty(d)?);
    Ok(())
}

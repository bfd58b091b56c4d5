//! Noise-free bias of the proposed estimator versus sampling time: for each
//! sampling time an input is designed (delay guess = one sample), then the
//! bias is evaluated at several sub-sample delays. Writes plot-ready CSV to
//! stdout.

use lagdelay::analysis::noise_free_bias;
use lagdelay::design::{optimize_design, DesignProblem, PGrid};

fn main() -> lagdelay::Result<()> {
    let k_model = 6;
    println!("delta,p,tau,bias");
    for delta in [6e-5, 8e-5, 1e-4] {
        let design = optimize_design(&DesignProblem {
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
        })?
        .design;
        for tau in [1e-5, 2e-5, 3e-5] {
            let bias = noise_free_bias(&design, tau, k_model, k_model + 1)?;
            println!("{delta:e},{:.4},{tau:e},{bias:.6e}", design.p);
        }
    }
    Ok(())
}

//! Errors-in-variables bias of the proposed estimator: the Monte-Carlo
//! prediction from the covariance of the Markov-parameter estimate, compared
//! with the empirical bias on data whose spectrum lies inside the model.
//!
//! cargo run --example bias_prediction -- [lambda]

use lagdelay::analysis::{predict_bias_tau, run_monte_carlo, BenchmarkConfig, BiasPredictionConfig, SignalSource};
use lagdelay::estimators::Method;
use lagdelay::signal::InputDesign;

fn main() -> lagdelay::Result<()> {
    let lambda: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1e-2);
    let design = InputDesign {
        p: 50.0,
        u: vec![1.2144932686814107, -0.33028639703378243, -0.33028639703378243, -0.5539204746138457],
        eta: 2.0,
        delta: 3e-4,
        horizon: 0.5,
        tau_guess: 3e-4,
    };
    let (k_model, tau) = (12, 1.33e-3);

    let predicted = predict_bias_tau(
        &design,
        lambda,
        tau,
        &BiasPredictionConfig {
            k_model,
            m_markov: k_model + 1,
            mc_samples: 20_000,
            seed: 1,
            include_truncation: false,
        },
    )?;
    let stats = run_monte_carlo(
        &BenchmarkConfig {
            design: design.clone(),
            tau,
            lambda,
            k_model,
            m_markov: None,
            methods: vec![Method::Proposed],
            replicates: 10_000,
            seed: 2,
            histogram_bins: 40,
            tau_max: None,
            signal: SignalSource::LaguerreTruncated,
        },
        4,
    )?;
    let emp = &stats.per_method[&Method::Proposed];
    let se = (emp.var / emp.successes as f64).sqrt();
    println!("lambda = {lambda:e}");
    println!("predicted bias {:+.4e} +- {:.2e}", predicted.predicted_bias, predicted.standard_error);
    println!("empirical bias {:+.4e} +- {:.2e}", emp.bias, se);
    println!("E[eps1] = {:.4e}, E[eps2] = {:.4e}", predicted.eps1_mean, predicted.eps2_mean);
    Ok(())
}

//! Seeded Monte-Carlo comparison of the four estimators against the CRLB.
//! Prints the statistics table and writes the histogram CSV.
//!
//! cargo run --example monte_carlo -- [replicates] [workers]

use lagdelay::analysis::{run_monte_carlo, BenchmarkConfig, SignalSource};
use lagdelay::estimators::Method;
use lagdelay::signal::InputDesign;

fn main() -> lagdelay::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let replicates = args.first().copied().unwrap_or(500);
    let workers = args.get(1).copied().unwrap_or(4);

    let config = BenchmarkConfig {
        design: InputDesign {
            p: 50.0,
            u: vec![1.2144932686814107, -0.33028639703378243, -0.33028639703378243, -0.5539204746138457],
            eta: 2.0,
            delta: 3e-4,
            horizon: 0.5,
            tau_guess: 3e-4,
        },
        tau: 1.33e-3,
        lambda: 0.01,
        k_model: 12,
        m_markov: None,
        methods: Method::ALL.to_vec(),
        replicates,
        seed: 42,
        histogram_bins: 40,
        tau_max: None,
        signal: SignalSource::TimeDomain,
    };
    let stats = run_monte_carlo(&config, workers)?;
    println!("{replicates} replicates, N = {}", stats.n_samples);
    println!("{:<12} {:>12} {:>12} {:>12} {:>14}", "method", "bias", "var", "mse", "sqrt(N) mse");
    for (m, s) in &stats.per_method {
        println!(
            "{:<12} {:>12.4e} {:>12.4e} {:>12.4e} {:>14.4e}",
            m.as_str(),
            s.bias,
            s.var,
            s.mse_raw,
            s.mse_normalized
        );
    }
    if let Some(b) = stats.crlb {
        println!("{:<12} {:>38.4e}", "crlb", b);
    }
    let path = std::env::temp_dir().join("lagdelay_histogram.csv");
    std::fs::write(&path, stats.histogram_csv())?;
    println!("histograms written to {}", path.display());
    Ok(())
}

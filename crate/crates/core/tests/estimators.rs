//! Estimator behaviour on exact and noisy synthetic data.

use lagdelay::analysis::{BenchmarkConfig, SignalSource};
use lagdelay::basis::{build_phi, BasisConfig};
use lagdelay::delay::{delay_spectrum, Spectrum};
use lagdelay::estimators::{
    crlb, estimate_delay_freq_interp, estimate_delay_lag_spline, estimate_delay_ml, estimate_delay_proposed,
    estimate_markov, estimate_spectrum_ls, ml_gradient, ml_negloglik, CubicSpline, DelayEstimator, FreqInterpConfig,
    FreqInterpEstimator, LagSplineEstimator, Method, MlConfig, MlEstimator, ProposedEstimator, SpectrumLs,
};
use lagdelay::signal::{add_noise, sample_delayed, sample_spectrum, simulate, synthesize_input, Dataset, InputDesign};
use lagdelay::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn design_fast() -> InputDesign {
    InputDesign {
        p: 50.0,
        u: vec![1.2144932686814107, -0.33028639703378243, -0.33028639703378243, -0.5539204746138457],
        eta: 2.0,
        delta: 3e-4,
        horizon: 0.5,
        tau_guess: 3e-4,
    }
}

fn exact(design: &InputDesign, tau: f64) -> Dataset {
    simulate(design, tau, 0.0, 0).unwrap()
}

#[test]
fn ls_recovers_a_spectrum_inside_the_model() {
    let cfg = BasisConfig::new(20.0, 7).unwrap();
    let phi = build_phi(&cfg, 1e-3, 500).unwrap();
    let y = vec![0.3, -1.0, 0.25, 0.0, 0.7, -0.1, 0.05];
    let data = add_noise(&sample_spectrum(&phi, &y), 0.0, 0, 1e-3).unwrap();
    let y_hat = estimate_spectrum_ls(&data, &phi).unwrap();
    for (a, b) in y_hat.coeffs.iter().zip(&y) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn ls_agrees_with_normal_equations_and_is_optimal() {
    let cfg = BasisConfig::new(20.0, 7).unwrap();
    let phi = build_phi(&cfg, 1e-3, 400).unwrap();
    let design = InputDesign { p: 20.0, delta: 1e-3, horizon: 0.399, ..design_fast() };
    let data = simulate(&design, 2.3e-3, 0.01, 9).unwrap();
    let ls = SpectrumLs::new(phi.clone()).unwrap();
    let y = ls.solve(&data.z).unwrap();

    let m = &phi.matrix;
    let normal = (m.transpose() * m).try_inverse().unwrap() * m.transpose() * DVector::from_column_slice(&data.z);
    for (a, b) in y.iter().zip(normal.iter()) {
        assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
    }

    let base = ls.residual_norm(&data.z, &y);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mut d: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().for_each(|v| *v *= 1e-6 / norm);
        let perturbed: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a + b).collect();
        assert!(ls.residual_norm(&data.z, &perturbed) > base);
    }
}

#[test]
fn markov_estimate_inverts_the_convolution() {
    let u = Spectrum::new(20.0, vec![1.0, -0.4, -0.4, -0.2]);
    let y = delay_spectrum(&u, 0.7, 9);
    let h = estimate_markov(&y, &u).unwrap();
    let want = lagdelay::delay::markov_params(0.7, 9).values;
    for (a, b) in h.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
    let unit = Spectrum::new(20.0, vec![1.0]);
    assert_eq!(estimate_markov(&y, &unit).unwrap(), y.coeffs);
}

#[test]
fn proposed_is_exact_when_the_output_spectrum_fits_the_model() {
    let design = design_fast();
    for &tau in &[0.0, 1e-5, 1.33e-3, 0.02] {
        let cfg = BenchmarkConfig {
            design: design.clone(),
            tau,
            lambda: 0.0,
            k_model: 12,
            m_markov: None,
            methods: vec![Method::Proposed],
            replicates: 2,
            seed: 0,
            histogram_bins: 10,
            tau_max: None,
            signal: SignalSource::LaguerreTruncated,
        };
        let data = Dataset {
            z: cfg.clean_signal().unwrap(),
            delta: design.delta,
            noise_var: 0.0,
            seed: 0,
            true_tau: Some(tau),
        };
        let est = estimate_delay_proposed(&data, &design, 12, 13).unwrap();
        assert!((est.tau_hat - tau).abs() <= 1e-10 * tau.max(1e-3), "tau = {tau}: {}", est.tau_hat);
        assert!(est.diagnostics.y_hat.is_some() && est.diagnostics.h_hat.is_some());
    }
}

#[test]
fn proposed_and_ml_agree_on_dense_exact_data() {
    // Long record and fine sampling: the truncation bias of the proposed
    // estimator falls below 1e-8 s.
    let design = InputDesign {
        p: 20.0,
        delta: 1e-5,
        horizon: 2.0,
        ..design_fast()
    };
    let tau = 1e-5;
    let data = exact(&design, tau);
    let proposed = estimate_delay_proposed(&data, &design, 6, 7).unwrap();
    let ml = estimate_delay_ml(&data, &design, 1e-3).unwrap();
    assert!((ml.tau_hat - tau).abs() < 1e-9, "ml {}", ml.tau_hat);
    assert!((proposed.tau_hat - ml.tau_hat).abs() < 1e-8, "proposed {} ml {}", proposed.tau_hat, ml.tau_hat);
}

#[test]
fn noise_free_bias_shrinks_with_sampling_time() {
    let tau = 1e-5;
    let mut last = f64::INFINITY;
    for &delta in &[1e-4, 5e-5, 2e-5] {
        let design = InputDesign { p: 20.0, delta, horizon: 2.0, ..design_fast() };
        let b = (estimate_delay_proposed(&exact(&design, tau), &design, 6, 7).unwrap().tau_hat - tau).abs();
        assert!(b < last, "delta = {delta}: {b} vs {last}");
        last = b;
    }
}

#[test]
fn ml_is_exact_on_noise_free_data() {
    let design = design_fast();
    for &tau in &[1e-5, 1.33e-3, 2.1e-2] {
        let est = estimate_delay_ml(&exact(&design, tau), &design, design.tau_max()).unwrap();
        assert!((est.tau_hat - tau).abs() < 1e-9, "tau = {tau}: {}", est.tau_hat);
        assert_eq!(est.diagnostics.converged, Some(true));
    }
}

#[test]
fn ml_likelihood_minimum_and_neighbours() {
    let design = design_fast();
    let tau = 1.33e-3;
    let data = exact(&design, tau);
    assert!(ml_negloglik(&data, &design, tau) < 1e-28);
    assert!(ml_negloglik(&data, &design, tau - design.delta) > 0.0);
    assert!(ml_negloglik(&data, &design, tau + design.delta) > 0.0);
}

#[test]
fn ml_gradient_matches_finite_differences() {
    let design = design_fast();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 100 {
        let tau_true = rng.random_range(0.0..0.01);
        let data = simulate(&design, tau_true, 0.01, rng.random()).unwrap();
        let tau = rng.random_range(0.0..0.012);
        // stay away from the sample instants where the second derivative jumps
        let frac = (tau / design.delta).fract();
        if !(0.02..0.98).contains(&frac) {
            continue;
        }
        let h = 1e-9;
        let fd = (ml_negloglik(&data, &design, tau + h) - ml_negloglik(&data, &design, tau - h)) / (2.0 * h);
        let g = ml_gradient(&data, &design, tau);
        assert!((fd - g).abs() <= 1e-5 * g.abs().max(1e-3), "tau = {tau}: fd {fd} vs {g}");
        checked += 1;
    }
}

#[test]
fn ml_rejects_empty_search_range() {
    let design = design_fast();
    assert!(MlEstimator::new(&design, design.n_samples(), 0.0, MlConfig::default()).is_err());
}

#[test]
fn freq_interp_noise_free() {
    let design = design_fast();
    let k = 4;
    let est = estimate_delay_freq_interp(&exact(&design, k as f64 * design.delta), &design).unwrap();
    assert_eq!(est.diagnostics.integer_lag, Some(k));
    // only the few samples pushed past the end of the record perturb the phase
    assert!((est.tau_hat - k as f64 * design.delta).abs() < 1e-9, "{:e}", est.tau_hat - k as f64 * design.delta);

    let tau = 1.33e-3;
    let est = estimate_delay_freq_interp(&exact(&design, tau), &design).unwrap();
    // phase leakage from the record edges limits it to about delta / 100
    assert!((est.tau_hat - tau).abs() <= 0.1 * design.delta, "{}", est.tau_hat);
}

#[test]
fn freq_interp_flat_correlation() {
    let design = design_fast();
    let n = design.n_samples();
    let data = add_noise(&vec![0.0; n], 0.0, 0, design.delta).unwrap();
    let err = FreqInterpEstimator::new(&design, n, FreqInterpConfig::default())
        .unwrap()
        .estimate(&data)
        .unwrap_err();
    assert!(matches!(err, Error::FlatCorrelation));
}

#[test]
fn lag_spline_noise_free() {
    let design = design_fast();
    let tau = 1.33e-3;
    let est = estimate_delay_lag_spline(&exact(&design, tau), &design, 12).unwrap();
    assert!((est.tau_hat - tau).abs() < 1e-5, "{}", est.tau_hat);
}

#[test]
fn spline_interpolation_error_is_fourth_order() {
    let design = design_fast();
    let mut errs = Vec::new();
    for &h in &[4e-4, 2e-4] {
        let n = (0.2 / h) as usize + 1;
        let vals: Vec<f64> = (0..n).map(|i| synthesize_input(&design, i as f64 * h)).collect();
        let s = CubicSpline::natural(h, &vals).unwrap();
        // interior only: the natural end condition is second order
        let worst = (0..2000)
            .map(|i| 0.05 + 0.1 * i as f64 / 2000.0)
            .map(|t| (s.eval(t) - synthesize_input(&design, t)).abs())
            .fold(0.0, f64::max);
        errs.push(worst);
    }
    let order = (errs[0] / errs[1]).log2();
    assert!(order > 3.5, "observed order {order}");
}

#[test]
fn integer_shift_equivariance() {
    // Shifting the record by c samples shifts every estimate by c delta.
    let design = design_fast();
    let n = design.n_samples();
    let base_tau = 1.33e-3;
    let c = 3;
    let shifted_tau = base_tau + c as f64 * design.delta;
    let data = |tau: f64| Dataset {
        z: sample_delayed(&design, tau, n),
        delta: design.delta,
        noise_var: 0.0,
        seed: 0,
        true_tau: None,
    };
    let (a, b) = (data(base_tau), data(shifted_tau));
    let estimators: Vec<Box<dyn DelayEstimator>> = vec![
        Box::new(MlEstimator::new(&design, n, design.tau_max(), MlConfig::default()).unwrap()),
        Box::new(FreqInterpEstimator::new(&design, n, FreqInterpConfig::default()).unwrap()),
    ];
    for e in &estimators {
        let d = e.estimate_tau(&b).unwrap() - e.estimate_tau(&a).unwrap();
        assert!((d - c as f64 * design.delta).abs() < 1e-8, "{}: {d}", e.method());
    }
    // The Laguerre-domain estimators see a different truncation at each
    // delay; their shift is exact up to the truncation bias.
    let laguerre: Vec<Box<dyn DelayEstimator>> = vec![
        Box::new(ProposedEstimator::new(&design, n, 12, 13).unwrap()),
        Box::new(LagSplineEstimator::new(&design, n, 12, 13).unwrap()),
    ];
    for e in &laguerre {
        let d = e.estimate_tau(&b).unwrap() - e.estimate_tau(&a).unwrap();
        assert!((d - c as f64 * design.delta).abs() < 1e-5, "{}: {d}", e.method());
    }
}

#[test]
fn crlb_scaling() {
    let design = design_fast();
    let a = crlb(&design, 1.33e-3, 0.01).unwrap();
    let b = crlb(&design, 1.33e-3, 0.02).unwrap();
    assert!((b.bound / a.bound - 2.0).abs() < 1e-12);
    let fine = InputDesign { delta: 1.5e-4, ..design.clone() };
    let c = crlb(&fine, 1.33e-3, 0.01).unwrap();
    let ratio = c.bound / a.bound;
    assert!((ratio - 0.5).abs() < 0.02, "ratio {ratio}");
    let zero = InputDesign { u: vec![0.0; 4], ..design };
    assert!(matches!(crlb(&zero, 1e-3, 0.01), Err(Error::ZeroInformation)));
}

#[test]
fn mismatched_grid_is_rejected() {
    let design = design_fast();
    let data = exact(&design, 1e-3);
    let other = InputDesign { delta: 2e-4, ..design };
    let est = ProposedEstimator::new(&other, data.n_samples(), 12, 13).unwrap();
    assert!(matches!(est.estimate(&data), Err(Error::InvalidArgument(_))));
}

#[test]
fn noisy_markov_estimate_is_unbiased() {
    // Output spectrum inside the model: H_hat = H + T^{-1} (Phi'Phi)^{-1} Phi' E.
    let design = design_fast();
    let tau = 1.33e-3;
    let cfg = BenchmarkConfig {
        design: design.clone(),
        tau,
        lambda: 0.01,
        k_model: 12,
        m_markov: None,
        methods: vec![Method::Proposed],
        replicates: 2,
        seed: 0,
        histogram_bins: 10,
        tau_max: None,
        signal: SignalSource::LaguerreTruncated,
    };
    let clean = cfg.clean_signal().unwrap();
    let est = ProposedEstimator::new(&design, clean.len(), 12, 13).unwrap();
    let ls = est.spectrum_estimator();
    let h_true = lagdelay::delay::markov_params(2.0 * design.p * tau, 13).values;
    let reps = 4000;
    let mut mean = [0.0; 13];
    for r in 0..reps {
        let data = add_noise(&clean, 0.01, r, design.delta).unwrap();
        let y = ls.solve(&data.z).unwrap();
        let h = estimate_markov(&Spectrum::new(design.p, y), &design.spectrum()).unwrap();
        for (m, v) in mean.iter_mut().zip(h) {
            *m += v / reps as f64;
        }
    }
    let gram_inv: DMatrix<f64> = ls.gram_inverse();
    let sd0 = (0.01 * gram_inv[(0, 0)]).sqrt() / design.u[0];
    assert!((mean[0] - h_true[0]).abs() < 4.0 * sd0 / (reps as f64).sqrt());
}

//! Accuracy analytics: MSE of the Markov-parameter estimate, Monte-Carlo
//! prediction of the delay-estimator bias, and the benchmark harness.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::basis::{build_phi, eval_basis_all, BasisConfig};
use crate::delay::{build_omega, build_toeplitz, markov_params, solve_toeplitz, Spectrum, DEGENERATE_BTB_TOL};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    crlb, DelayEstimator, FreqInterpConfig, FreqInterpEstimator, LagSplineEstimator, Method, MlConfig, MlEstimator,
    ProposedEstimator, SpectrumLs,
};
use crate::signal::{add_noise_in_place, noise_stream, sample_delayed, sample_spectrum, Dataset, InputDesign};

// ── MSE of the Markov-parameter estimate ────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MarkovAccuracy {
    /// `E[H_hat] - H` per coefficient.
    pub bias_vec: Vec<f64>,
    /// `lambda T^{-1}(U) (Phi' Phi)^{-1} T^{-T}(U)`, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub mse: f64,
}

impl MarkovAccuracy {
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.covariance.len();
        DMatrix::from_fn(n, n, |i, j| self.covariance[i][j])
    }

    pub fn bias_norm_sq(&self) -> f64 {
        self.bias_vec.iter().map(|b| b * b).sum()
    }

    pub fn variance_trace(&self) -> f64 {
        (0..self.covariance.len()).map(|i| self.covariance[i][i]).sum()
    }
}

/// Everything in the Markov-parameter MSE that depends only on `(p, K, delta, N, tau)`.
///
/// The noise-free output is linear in the input coefficients, so the LS
/// projections of the delayed basis functions are cached and any input
/// spectrum can be scored with a few small matrix products.
#[derive(Debug, Clone)]
pub struct MarkovMseModel {
    pub p: f64,
    pub num_funcs: usize,
    pub tau: f64,
    /// `(Phi' Phi)^{-1}`.
    gram_inv: DMatrix<f64>,
    /// Column `k`: LS spectrum of the sampled, delayed `l_k`.
    projected_inputs: DMatrix<f64>,
    /// True Markov parameters `h_0 .. h_K` at `tau`.
    markov: Vec<f64>,
}

impl MarkovMseModel {
    pub fn new(p: f64, k_model: usize, delta: f64, n_samples: usize, input_len: usize, tau: f64) -> Result<Self> {
        if input_len == 0 || input_len > k_model + 1 {
            return Err(invalid(format!(
                "input length {input_len} must lie in [1, K + 1 = {}]",
                k_model + 1
            )));
        }
        let cfg = BasisConfig::new(p, k_model + 1)?;
        let ls = SpectrumLs::new(build_phi(&cfg, delta, n_samples)?)?;
        let mut delayed = DMatrix::zeros(n_samples, input_len);
        let mut buf = vec![0.0; input_len];
        for n in 0..n_samples {
            eval_basis_all(p, n as f64 * delta - tau, &mut buf);
            for k in 0..input_len {
                delayed[(n, k)] = buf[k];
            }
        }
        let projected_inputs = ls.pseudo_inverse() * delayed;
        Ok(Self {
            p,
            num_funcs: k_model + 1,
            tau,
            gram_inv: ls.gram_inverse(),
            projected_inputs,
            markov: markov_params(2.0 * p * tau, k_model + 1).values,
        })
    }

    pub fn for_design(design: &InputDesign, k_model: usize, tau: f64) -> Result<Self> {
        design.validate()?;
        Self::new(design.p, k_model, design.delta, design.n_samples(), design.u.len(), tau)
    }

    /// Bias of `H_hat` for input `u`, from its noise-free LS projection.
    pub fn bias(&self, u: &[f64]) -> Result<Vec<f64>> {
        let y_hat = &self.projected_inputs * DVector::from_column_slice(u);
        let h_hat = solve_toeplitz(&Spectrum::new(self.p, u.to_vec()), y_hat.as_slice())?;
        Ok(h_hat.iter().zip(&self.markov).map(|(a, b)| a - b).collect())
    }

    pub fn covariance(&self, u: &[f64], lambda: f64) -> Result<DMatrix<f64>> {
        let t = build_toeplitz(&Spectrum::new(self.p, u.to_vec()), self.num_funcs)?;
        let t_inv = t
            .solve_lower_triangular(&DMatrix::identity(self.num_funcs, self.num_funcs))
            .ok_or(Error::SingularInput { u0: u[0] })?;
        let cov = &t_inv * &self.gram_inv * t_inv.transpose() * lambda;
        Ok((&cov + cov.transpose()) * 0.5)
    }

    /// `lambda tr(T^{-1} (Phi'Phi)^{-1} T^{-T})` without forming the covariance.
    pub fn variance_trace(&self, u: &[f64], lambda: f64) -> Result<f64> {
        let spec = Spectrum::new(self.p, u.to_vec());
        let mut trace = 0.0;
        // T^{-1} L where L L' = gram_inv; tr = ||T^{-1} L||_F^2
        let chol = self
            .gram_inv
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("(Phi'Phi)^{-1} is not positive definite"))?;
        let l = chol.l();
        for c in 0..self.num_funcs {
            let col: Vec<f64> = l.column(c).iter().copied().collect();
            let x = solve_toeplitz(&spec, &col)?;
            trace += x.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(lambda * trace)
    }

    /// `||bias||^2 + lambda tr(cov)`.
    pub fn mse(&self, u: &[f64], lambda: f64) -> Result<f64> {
        let bias: f64 = self.bias(u)?.iter().map(|b| b * b).sum();
        let var = if lambda > 0.0 { self.variance_trace(u, lambda)? } else { 0.0 };
        Ok(bias + var)
    }

    pub fn markov(&self) -> &[f64] {
        &self.markov
    }
}

/// MSE of `H_hat` for `design` at delay `tau_check`.
pub fn markov_mse(design: &InputDesign, k_model: usize, lambda: f64, tau_check: f64) -> Result<MarkovAccuracy> {
    if !(lambda >= 0.0) || !(tau_check >= 0.0) {
        return Err(invalid("noise variance and delay must be non-negative"));
    }
    let model = MarkovMseModel::for_design(design, k_model, tau_check)?;
    let bias_vec = model.bias(&design.u)?;
    let cov = model.covariance(&design.u, lambda)?;
    let n = cov.nrows();
    let covariance: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect();
    let mse = bias_vec.iter().map(|b| b * b).sum::<f64>() + cov.trace();
    Ok(MarkovAccuracy {
        bias_vec,
        covariance,
        mse,
    })
}

// ── Bias of the delay estimate ──────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BiasPredictionConfig {
    pub k_model: usize,
    pub m_markov: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Include the deterministic truncation bias of `H_hat` as a mean shift.
    pub include_truncation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BiasPrediction {
    pub predicted_bias: f64,
    /// Monte-Carlo standard error of `predicted_bias`.
    pub standard_error: f64,
    pub mc_samples: usize,
    pub eps1_mean: f64,
    pub eps2_mean: f64,
    pub tau_check: f64,
    pub seed: u64,
}

/// Predicts `E[tau_hat] - tau` at `tau_check` from the errors-in-variables
/// decomposition `2p tau_hat = (B'A + eps1) / (B'B + eps2)`, with the
/// expectations taken by Monte-Carlo over Gaussian `H_hat` errors drawn in
/// antithetic pairs.
pub fn predict_bias_tau(
    design: &InputDesign,
    lambda: f64,
    tau_check: f64,
    config: &BiasPredictionConfig,
) -> Result<BiasPrediction> {
    if config.mc_samples < 1000 {
        return Err(invalid(format!(
            "at least 1000 Monte-Carlo samples are required, got {}",
            config.mc_samples
        )));
    }
    if !(lambda >= 0.0) || !(tau_check >= 0.0) {
        return Err(invalid("noise variance and delay must be non-negative"));
    }
    let m = config.m_markov;
    if m < 3 || m > config.k_model + 1 {
        return Err(invalid(format!("Markov count must lie in [3, K + 1], got {m}")));
    }
    let model = MarkovMseModel::for_design(design, config.k_model, tau_check)?;
    let mean_err = if config.include_truncation {
        model.bias(&design.u)?
    } else {
        vec![0.0; config.k_model + 1]
    };
    let cov = model.covariance(&design.u, lambda)?;
    let chol_l = if lambda > 0.0 {
        Some(
            cov.clone()
                .cholesky()
                .ok_or_else(|| invalid("covariance of H_hat is not positive definite"))?
                .l(),
        )
    } else {
        None
    };

    let h = model.markov();
    let omega = build_omega(m)?;
    let b = DVector::from_column_slice(&h[..m - 1]);
    let mut a = &omega * &b;
    a[m - 2] -= (m - 1) as f64 * h[m - 1];
    let btb = b.dot(&b);
    if btb < DEGENERATE_BTB_TOL {
        return Err(Error::DegenerateB { btb });
    }
    let two_p = 2.0 * design.p;

    let mut rng = noise_stream(config.seed, 0);
    let dim = config.k_model + 1;
    let mut xi = DVector::zeros(dim);
    let mean_err = DVector::from_column_slice(&mean_err);
    // (tau_hat - tau) for one H_hat error draw, plus (eps1, eps2)
    let eval = |err: &DVector<f64>| -> (f64, f64, f64) {
        let e_b = err.rows(0, m - 1).into_owned();
        let mut e_a = &omega * &e_b;
        e_a[m - 2] -= (m - 1) as f64 * err[m - 1];
        let eps1 = e_b.dot(&a) + e_a.dot(&b) + e_b.dot(&e_a);
        let eps2 = 2.0 * e_b.dot(&b) + e_b.dot(&e_b);
        ((eps1 - two_p * tau_check * eps2) / (btb + eps2) / two_p, eps1, eps2)
    };
    // Antithetic pairs: the first-order noise cancels inside each pair.
    let pairs = config.mc_samples / 2;
    let (mut sum, mut sum_sq, mut eps1_sum, mut eps2_sum) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..pairs {
        let mut noise = DVector::zeros(dim);
        if let Some(l) = &chol_l {
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            noise = l * &xi;
        }
        let (t1, a1, b1) = eval(&(&mean_err + &noise));
        let (t2, a2, b2) = eval(&(&mean_err - &noise));
        let term = 0.5 * (t1 + t2);
        sum += term;
        sum_sq += term * term;
        eps1_sum += a1 + a2;
        eps2_sum += b1 + b2;
    }
    let n = pairs as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(BiasPrediction {
        predicted_bias: mean,
        standard_error: (var / n).sqrt(),
        mc_samples: config.mc_samples,
        eps1_mean: eps1_sum / (2.0 * n),
        eps2_mean: eps2_sum / (2.0 * n),
        tau_check,
        seed: config.seed,
    })
}

/// Bias of the proposed estimator on noise-free samples of the delayed input.
pub fn noise_free_bias(design: &InputDesign, tau: f64, k_model: usize, m_markov: usize) -> Result<f64> {
    let est = ProposedEstimator::new(design, design.n_samples(), k_model, m_markov)?;
    let data = Dataset {
        z: sample_delayed(design, tau, design.n_samples()),
        delta: design.delta,
        noise_var: 0.0,
        seed: 0,
        true_tau: Some(tau),
    };
    Ok(est.estimate_tau(&data)? - tau)
}

// ── Monte-Carlo benchmark ───────────────────────────────────────────────

/// How the noise-free part of each replicate is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SignalSource {
    /// Exact samples of the delayed continuous input.
    #[default]
    TimeDomain,
    /// Samples of the output spectrum truncated to the first `K + 1`
    /// coefficients, so the LS model holds without truncation error.
    LaguerreTruncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BenchmarkConfig {
    pub design: InputDesign,
    pub tau: f64,
    pub lambda: f64,
    pub k_model: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_markov: Option<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    #[serde(default)]
    pub signal: SignalSource,
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_bins() -> usize {
    40
}

impl BenchmarkConfig {
    pub fn m_markov(&self) -> usize {
        self.m_markov.unwrap_or(self.k_model + 1)
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max.unwrap_or_else(|| self.design.tau_max())
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.replicates < 2 {
            return Err(invalid("benchmark needs at least 2 replicates"));
        }
        if self.methods.is_empty() {
            return Err(invalid("benchmark needs at least one method"));
        }
        if !(self.tau >= 0.0 && self.lambda >= 0.0) {
            return Err(invalid("delay and noise variance must be non-negative"));
        }
        if self.histogram_bins == 0 {
            return Err(invalid("histogram needs at least one bin"));
        }
        Ok(())
    }

    /// Noise-free samples shared by every replicate.
    pub fn clean_signal(&self) -> Result<Vec<f64>> {
        let n = self.design.n_samples();
        match self.signal {
            SignalSource::TimeDomain => Ok(sample_delayed(&self.design, self.tau, n)),
            SignalSource::LaguerreTruncated => {
                let cfg = BasisConfig::new(self.design.p, self.k_model + 1)?;
                let phi = build_phi(&cfg, self.design.delta, n)?;
                let h = markov_params(2.0 * self.design.p * self.tau, self.k_model + 1);
                let y = crate::delay::convolve_causal(&h.values, &self.design.u, self.k_model + 1);
                Ok(sample_spectrum(&phi, &y))
            }
        }
    }

    /// Prepares the requested estimators.
    pub fn estimators(&self) -> Result<Vec<Box<dyn DelayEstimator>>> {
        let n = self.design.n_samples();
        self.methods
            .iter()
            .map(|m| -> Result<Box<dyn DelayEstimator>> {
                Ok(match m {
                    Method::Proposed => Box::new(ProposedEstimator::new(&self.design, n, self.k_model, self.m_markov())?),
                    Method::Ml => Box::new(MlEstimator::new(&self.design, n, self.tau_max(), MlConfig::default())?),
                    Method::LagSpline => {
                        Box::new(LagSplineEstimator::new(&self.design, n, self.k_model, self.m_markov())?)
                    }
                    Method::FreqInterp => {
                        Box::new(FreqInterpEstimator::new(&self.design, n, FreqInterpConfig::default())?)
                    }
                })
            })
            .collect()
    }
}

/// The moments are NaN (`null` in JSON) when every replicate failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MethodStats {
    #[schemars(with = "Option<f64>")]
    pub mean: f64,
    #[schemars(with = "Option<f64>")]
    pub bias: f64,
    #[schemars(with = "Option<f64>")]
    pub var: f64,
    #[schemars(with = "Option<f64>")]
    pub mse_raw: f64,
    /// `sqrt(N) * mse_raw`.
    #[schemars(with = "Option<f64>")]
    pub mse_normalized: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], bins: usize) -> Self {
        if samples.is_empty() {
            return Self {
                edges: vec![],
                counts: vec![],
            };
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &s in samples {
            let idx = (((s - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct McStats {
    pub config: BenchmarkConfig,
    pub n_samples: usize,
    pub per_method: BTreeMap<Method, MethodStats>,
    pub histogram: BTreeMap<Method, Histogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crlb: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Raw estimates per method, indexed by replicate (`None` = failure).
    #[serde(skip)]
    pub estimates: BTreeMap<Method, Vec<Option<f64>>>,
}

impl McStats {
    /// Histogram rows `method,bin_left,bin_right,count`.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("method,bin_left,bin_right,count\n");
        for (method, h) in &self.histogram {
            for (i, c) in h.counts.iter().enumerate() {
                out.push_str(&format!("{},{:.16e},{:.16e},{}\n", method, h.edges[i], h.edges[i + 1], c));
            }
        }
        out
    }

    pub fn failure_rate(&self, method: Method) -> f64 {
        self.per_method
            .get(&method)
            .map(|s| s.failures as f64 / self.replicates as f64)
            .unwrap_or(0.0)
    }
}

/// Moments of the successful estimates. `var` uses the unbiased `R - 1`
/// normalization, `mse_raw` the plain mean of squared errors.
pub fn method_stats(estimates: &[Option<f64>], tau: f64, n_samples: usize) -> MethodStats {
    let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
    let r = ok.len();
    let failures = estimates.len() - r;
    if r == 0 {
        return MethodStats {
            mean: f64::NAN,
            bias: f64::NAN,
            var: f64::NAN,
            mse_raw: f64::NAN,
            mse_normalized: f64::NAN,
            successes: 0,
            failures,
        };
    }
    let rf = r as f64;
    let mean = ok.iter().sum::<f64>() / rf;
    let ss: f64 = ok.iter().map(|x| (x - mean) * (x - mean)).sum();
    let var = if r > 1 { ss / (rf - 1.0) } else { 0.0 };
    let bias = mean - tau;
    let mse_raw = bias * bias + ss / rf;
    MethodStats {
        mean,
        bias,
        var,
        mse_raw,
        mse_normalized: (n_samples as f64).sqrt() * mse_raw,
        successes: r,
        failures,
    }
}

/// Runs `config.replicates` independent noisy experiments on `workers`
/// threads. Replicate `r` draws its noise from stream `(seed, r)` and the
/// reduction runs in replicate order, so the result does not depend on the
/// number of workers.
pub fn run_monte_carlo(config: &BenchmarkConfig, workers: usize) -> Result<McStats> {
    config.validate()?;
    let estimators = config.estimators()?;
    let clean = config.clean_signal()?;
    let n = clean.len();
    let run_one = |r: usize| -> Vec<Option<f64>> {
        let mut z = clean.clone();
        add_noise_in_place(&mut z, config.lambda, &mut noise_stream(config.seed, r as u64));
        let data = Dataset {
            z,
            delta: config.design.delta,
            noise_var: config.lambda,
            seed: config.seed,
            true_tau: Some(config.tau),
        };
        estimators
            .iter()
            .map(|e| match e.estimate_tau(&data) {
                Ok(t) if t.is_finite() => Some(t),
                Ok(_) => None,
                Err(err) => {
                    log::debug!("replicate {r}: {} failed: {err}", e.method());
                    None
                }
            })
            .collect()
    };
    let rows: Vec<Vec<Option<f64>>> = if workers <= 1 {
        (0..config.replicates).map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..config.replicates).into_par_iter().map(run_one).collect())
    };

    let mut per_method = BTreeMap::new();
    let mut histogram = BTreeMap::new();
    let mut estimates = BTreeMap::new();
    for (i, method) in config.methods.iter().enumerate() {
        let column: Vec<Option<f64>> = rows.iter().map(|row| row[i]).collect();
        let ok: Vec<f64> = column.iter().flatten().copied().collect();
        per_method.insert(*method, method_stats(&column, config.tau, n));
        histogram.insert(*method, Histogram::from_samples(&ok, config.histogram_bins));
        estimates.insert(*method, column);
    }
    let crlb = if config.lambda > 0.0 {
        crlb(&config.design, config.tau, config.lambda).ok().map(|c| c.bound)
    } else {
        None
    };
    Ok(McStats {
        config: config.clone(),
        n_samples: n,
        per_method,
        histogram,
        crlb,
        replicates: config.replicates,
        seed: config.seed,
        estimates,
    })
}

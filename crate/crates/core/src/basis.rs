//! Continuous Laguerre functions and their sampled representation.
//!
//! The k-th Laguerre function is the impulse response of
//! `sqrt(2p) / (s + p) * ((s - p) / (s + p))^k`, which in time domain reads
//! `sqrt(2p) e^{-pt} L_k(2pt)` with `L_k` the ordinary Laguerre polynomial.
//! Every function therefore starts at `+sqrt(2p)`.
//!
//! The functions are also the states of a lower-triangular LTI system driven
//! by an impulse; sampling that system with an impulse-invariant transform
//! yields the regression matrix used to estimate output spectra.

use nalgebra::{DMatrix, DVector};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Orders up to this value are evaluated with the explicit sum; above it the
/// three-term recurrence takes over.
pub const DIRECT_SUM_MAX_ORDER: usize = 12;

/// Default upper bound on `cond(Phi)` before the LS step refuses to run.
pub const DEFAULT_COND_THRESHOLD: f64 = 1e8;

/// Time-domain sign convention of the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub enum SignConvention {
    /// `l_k(t)` is the inverse Laplace transform of the transfer function
    /// above, so `l_k(0) = +sqrt(2p)` for every `k`.
    #[default]
    InverseLaplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BasisConfig {
    /// Laguerre parameter (pole location), 1/s.
    pub p: f64,
    /// Number of basis functions `K + 1`.
    pub num_funcs: usize,
    #[serde(skip)]
    pub sign_convention: SignConvention,
}

impl BasisConfig {
    pub fn new(p: f64, num_funcs: usize) -> Result<Self> {
        let cfg = Self {
            p,
            num_funcs,
            sign_convention: SignConvention::InverseLaplace,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(invalid(format!("Laguerre parameter must be positive, got {}", self.p)));
        }
        if self.num_funcs == 0 {
            return Err(invalid("basis needs at least one function"));
        }
        Ok(())
    }

    /// Highest basis index `K`.
    pub fn max_index(&self) -> usize {
        self.num_funcs - 1
    }
}

// ── Associated Laguerre polynomials with alpha = -1 ─────────────────────

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Direct evaluation of the explicit sum
/// `L_m(xi) = sum_n binom(m - 1, m - n) (-xi)^n / n!` for `m >= 1`, `L_0 = 1`.
pub fn assoc_laguerre_direct(m: usize, xi: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut term_pow = 1.0; // (-xi)^n / n!
    for n in 1..=m {
        term_pow *= -xi / n as f64;
        let t = binomial(m as u64 - 1, (m - n) as u64) * term_pow;
        // Neumaier summation
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// One step of the three-term recurrence: returns `L_{m+1}(xi)` from
/// `L_{m-1}(xi)` and `L_m(xi)`.
pub fn assoc_laguerre_recurrence(prev: f64, cur: f64, m: usize, xi: f64) -> f64 {
    let mf = m as f64;
    ((2.0 * mf - xi) * cur - (mf - 1.0) * prev) / (mf + 1.0)
}

/// `L_m(xi)` for the `alpha = -1` family.
pub fn assoc_laguerre_poly(m: usize, xi: f64) -> f64 {
    if m <= DIRECT_SUM_MAX_ORDER {
        return assoc_laguerre_direct(m, xi);
    }
    *assoc_laguerre_sequence(m + 1, xi).last().unwrap()
}

/// `[L_0(xi), ..., L_{count-1}(xi)]` via the recurrence.
pub fn assoc_laguerre_sequence(count: usize, xi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(1.0);
    if count == 1 {
        return out;
    }
    out.push(-xi);
    for m in 1..count - 1 {
        let next = assoc_laguerre_recurrence(out[m - 1], out[m], m, xi);
        out.push(next);
    }
    out
}

// ── Time-domain Laguerre functions ──────────────────────────────────────

/// Writes `l_0(t), ..., l_{n-1}(t)` into `out` (`n = out.len()`). Zero for `t < 0`.
pub fn eval_basis_all(p: f64, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    if t < 0.0 {
        out.fill(0.0);
        return;
    }
    let scale = (2.0 * p).sqrt() * (-p * t).exp();
    let x = 2.0 * p * t;
    let mut l_prev = 1.0;
    let mut l_cur = 1.0 - x;
    out[0] = scale;
    if out.len() > 1 {
        out[1] = scale * l_cur;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * l_cur - kf * l_prev) / (kf + 1.0);
        l_prev = l_cur;
        l_cur = next;
        out[k + 1] = scale * l_cur;
    }
}

/// Single Laguerre function `l_j(t)`.
pub fn eval_basis_time(cfg: &BasisConfig, j: usize, t: f64) -> f64 {
    let mut buf = vec![0.0; j + 1];
    eval_basis_all(cfg.p, t, &mut buf);
    buf[j]
}

/// Time derivatives `d/dt l_k(t)` for `t > 0`, using the state equation
/// `l_k' = -p l_k - 2p sum_{i<k} l_i`. `values` must hold `l_k(t)`.
pub fn basis_derivatives(p: f64, values: &[f64], out: &mut [f64]) {
    let mut running = 0.0;
    for (k, v) in values.iter().enumerate() {
        out[k] = -p * v - 2.0 * p * running;
        running += v;
    }
}

/// Evaluates `sum_k coeffs[k] * l_k(t)`.
pub fn eval_series(p: f64, coeffs: &[f64], t: f64) -> f64 {
    if t < 0.0 || coeffs.is_empty() {
        return 0.0;
    }
    let mut buf = vec![0.0; coeffs.len()];
    eval_basis_all(p, t, &mut buf);
    buf.iter().zip(coeffs).map(|(l, c)| l * c).sum()
}

/// Evaluates `sum_k coeffs[k] * d/dt l_k(t)`; zero for `t < 0`.
pub fn eval_series_derivative(p: f64, coeffs: &[f64], t: f64) -> f64 {
    if t < 0.0 || coeffs.is_empty() {
        return 0.0;
    }
    let mut buf = vec![0.0; coeffs.len()];
    let mut d = vec![0.0; coeffs.len()];
    eval_basis_all(p, t, &mut buf);
    basis_derivatives(p, &buf, &mut d);
    d.iter().zip(coeffs).map(|(l, c)| l * c).sum()
}

// ── State-space realization ─────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub p: f64,
    pub max_index: usize,
}

pub fn build_continuous_ss(cfg: &BasisConfig) -> ContinuousRealization {
    let n = cfg.num_funcs;
    let p = cfg.p;
    let a = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => -p,
        std::cmp::Ordering::Greater => -2.0 * p,
        std::cmp::Ordering::Less => 0.0,
    });
    let b = DVector::from_element(n, (2.0 * p).sqrt());
    ContinuousRealization {
        a,
        b,
        p,
        max_index: cfg.max_index(),
    }
}

/// Impulse-invariant discretization: `A_d = exp(A_c delta)`, `B_d = A_d B_c`.
pub fn discretize_impulse_invariant(
    real: &ContinuousRealization,
    delta: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let ad = (&real.a * delta).exp();
    let bd = &ad * &real.b;
    (ad, bd)
}

/// The regression matrix `Phi` with `Phi[n, j] = l_j(n delta)`.
#[derive(Debug, Clone)]
pub struct SampledBasis {
    pub config: BasisConfig,
    pub delta: f64,
    pub n_samples: usize,
    pub matrix: DMatrix<f64>,
    pub cond: f64,
    pub cond_threshold: f64,
}

impl SampledBasis {
    pub fn is_ill_conditioned(&self) -> bool {
        !self.cond.is_finite() || self.cond > self.cond_threshold
    }

    pub fn check_conditioning(&self) -> Result<()> {
        if self.is_ill_conditioned() {
            Err(Error::IllConditioned {
                cond: self.cond,
                threshold: self.cond_threshold,
            })
        } else {
            Ok(())
        }
    }

    /// Sample instants `t_n = n delta`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(move |n| n as f64 * self.delta)
    }
}

pub fn build_phi(cfg: &BasisConfig, delta: f64, n_samples: usize) -> Result<SampledBasis> {
    build_phi_with_threshold(cfg, delta, n_samples, DEFAULT_COND_THRESHOLD)
}

/// Builds `Phi` by propagating the discretized state `x_{n+1} = A_d x_n`
/// from `x_0 = B_c`. The result carries `cond(Phi)`; exceeding the
/// threshold is reported as a warning here and as an error by the LS step.
pub fn build_phi_with_threshold(
    cfg: &BasisConfig,
    delta: f64,
    n_samples: usize,
    cond_threshold: f64,
) -> Result<SampledBasis> {
    cfg.validate()?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("sampling time must be positive, got {delta}")));
    }
    let cols = cfg.num_funcs;
    if n_samples < cols {
        return Err(invalid(format!(
            "need at least {cols} samples for {cols} basis functions, got {n_samples}"
        )));
    }
    let real = build_continuous_ss(cfg);
    let (ad, _) = discretize_impulse_invariant(&real, delta);
    let mut matrix = DMatrix::zeros(n_samples, cols);
    let mut state = real.b.clone();
    for n in 0..n_samples {
        matrix.row_mut(n).copy_from(&state.transpose());
        state = &ad * &state;
    }
    let cond = condition_number(&matrix);
    let basis = SampledBasis {
        config: *cfg,
        delta,
        n_samples,
        matrix,
        cond,
        cond_threshold,
    };
    if basis.is_ill_conditioned() {
        log::warn!(
            "cond(Phi) = {cond:.3e} exceeds {cond_threshold:.1e} (p = {}, K = {}, delta = {delta}, N = {n_samples})",
            cfg.p,
            cfg.max_index()
        );
    }
    Ok(basis)
}

/// 2-norm condition number, read off the R factor of a thin QR.
pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let r = m.clone().qr().r();
    let sv = r.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

// ── Self-check ──────────────────────────────────────────────────────────

/// Outcome of the sampled-basis invariant checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BasisCheck {
    pub p: f64,
    pub num_funcs: usize,
    pub delta: f64,
    pub n_samples: usize,
    pub cond: f64,
    /// `max |Phi[n, j] - l_j(n delta)| / max_n |l_j(n delta)|`.
    pub sampling_error: f64,
    /// `max |delta Phi' Phi - I|`.
    pub gram_deviation: f64,
    /// `max |A_d - oracle|` against the closed-form Toeplitz transition matrix.
    pub transition_error: f64,
    /// `max_j |Phi[0, j] - sqrt(2p)|`.
    pub initial_value_error: f64,
}

impl BasisCheck {
    /// True when the sampled basis reproduces the analytic functions to
    /// `sampling_tol` and is not ill-conditioned.
    pub fn passed(&self, sampling_tol: f64) -> bool {
        self.sampling_error <= sampling_tol
            && self.transition_error <= sampling_tol
            && self.initial_value_error <= sampling_tol * (2.0 * self.p).sqrt()
            && self.cond.is_finite()
            && self.cond <= DEFAULT_COND_THRESHOLD
    }
}

/// Transition matrix from the analytic functions: lower Toeplitz with
/// first column `(l_k(delta) - l_{k-1}(delta)) / sqrt(2p)`.
pub fn transition_oracle(p: f64, num_funcs: usize, delta: f64) -> DMatrix<f64> {
    let mut vals = vec![0.0; num_funcs];
    eval_basis_all(p, delta, &mut vals);
    let s = (2.0 * p).sqrt();
    let col: Vec<f64> = (0..num_funcs)
        .map(|k| if k == 0 { vals[0] / s } else { (vals[k] - vals[k - 1]) / s })
        .collect();
    DMatrix::from_fn(num_funcs, num_funcs, |i, j| if i >= j { col[i - j] } else { 0.0 })
}

pub fn check_basis(cfg: &BasisConfig, delta: f64, n_samples: usize) -> Result<BasisCheck> {
    let phi = build_phi(cfg, delta, n_samples)?;
    let k = cfg.num_funcs;
    let mut analytic = DMatrix::zeros(n_samples, k);
    let mut buf = vec![0.0; k];
    for n in 0..n_samples {
        eval_basis_all(cfg.p, n as f64 * delta, &mut buf);
        for j in 0..k {
            analytic[(n, j)] = buf[j];
        }
    }
    let sampling_error = (0..k)
        .map(|j| {
            let scale = analytic.column(j).amax();
            (phi.matrix.column(j) - analytic.column(j)).amax() / scale
        })
        .fold(0.0, f64::max);
    let gram = phi.matrix.transpose() * &phi.matrix * delta - DMatrix::identity(k, k);
    let (ad, _) = discretize_impulse_invariant(&build_continuous_ss(cfg), delta);
    let transition_error = (ad - transition_oracle(cfg.p, k, delta)).amax();
    let s = (2.0 * cfg.p).sqrt();
    let initial_value_error = phi.matrix.row(0).iter().map(|v| (v - s).abs()).fold(0.0, f64::max);
    Ok(BasisCheck {
        p: cfg.p,
        num_funcs: k,
        delta,
        n_samples,
        cond: phi.cond,
        sampling_error,
        gram_deviation: gram.amax(),
        transition_error,
        initial_value_error,
    })
}

//! Time-domain maximum-likelihood delay estimation.
//!
//! The negative log-likelihood under white Gaussian noise is proportional to
//! `delta * sum_n (z_n - u(t_n - tau))^2`. It is non-convex in `tau`, so the
//! search starts with a scan on a grid of step `delta / 4` and finishes with a
//! golden-section refinement around the best grid point.

use crate::basis::{eval_series, eval_series_derivative};
use crate::error::{invalid, Result};
use crate::signal::{Dataset, InputDesign};

use super::{check_grid, DelayEstimate, DelayEstimator, Diagnostics, Method};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlConfig {
    /// Grid points per sampling interval.
    pub grid_subdivision: usize,
    /// Width of the final bracket, seconds.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            grid_subdivision: 4,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

fn mean_samples(design: &InputDesign, n_samples: usize, tau: f64) -> impl Iterator<Item = f64> + '_ {
    (0..n_samples).map(move |n| eval_series(design.p, &design.u, n as f64 * design.delta - tau))
}

/// `delta * sum_n (z_n - u(t_n - tau))^2`.
pub fn ml_negloglik(data: &Dataset, design: &InputDesign, tau: f64) -> f64 {
    let sum: f64 = data
        .z
        .iter()
        .zip(mean_samples(design, data.n_samples(), tau))
        .map(|(z, mu)| (z - mu) * (z - mu))
        .sum();
    data.delta * sum
}

/// Derivative of [`ml_negloglik`] with respect to `tau`.
///
/// `d/dtau u(t_n - tau) = -u'(t_n - tau)` for `t_n > tau` and zero before.
pub fn ml_gradient(data: &Dataset, design: &InputDesign, tau: f64) -> f64 {
    let mut sum = 0.0;
    for (n, z) in data.z.iter().enumerate() {
        let s = n as f64 * data.delta - tau;
        if s < 0.0 {
            continue;
        }
        let mu = eval_series(design.p, &design.u, s);
        let dmu_dtau = -eval_series_derivative(design.p, &design.u, s);
        sum += (z - mu) * dmu_dtau;
    }
    -2.0 * data.delta * sum
}

/// ML estimator with the grid-scan signals precomputed.
#[derive(Debug, Clone)]
pub struct MlEstimator {
    design: InputDesign,
    n_samples: usize,
    tau_max: f64,
    config: MlConfig,
    /// `u` sampled on the refined grid `i * delta / sub`.
    fine: Vec<f64>,
    /// `sum_n u(t_n - tau_g)^2` per grid point.
    energy: Vec<f64>,
}

impl MlEstimator {
    pub fn new(design: &InputDesign, n_samples: usize, tau_max: f64, config: MlConfig) -> Result<Self> {
        design.validate()?;
        if !(tau_max > 0.0) {
            return Err(invalid(format!("tau_max must be positive, got {tau_max}")));
        }
        if config.grid_subdivision == 0 {
            return Err(invalid("grid subdivision must be at least 1"));
        }
        let sub = config.grid_subdivision;
        let step = design.delta / sub as f64;
        let fine: Vec<f64> = (0..sub * n_samples)
            .map(|i| eval_series(design.p, &design.u, i as f64 * step))
            .collect();
        let grid_len = (tau_max / step + 1e-9).floor() as usize + 1;
        let energy = (0..grid_len)
            .map(|g| {
                (0..n_samples)
                    .filter_map(|n| (sub * n).checked_sub(g).map(|i| fine[i] * fine[i]))
                    .sum()
            })
            .collect();
        Ok(Self {
            design: design.clone(),
            n_samples,
            tau_max,
            config,
            fine,
            energy,
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    fn grid_step(&self) -> f64 {
        self.design.delta / self.config.grid_subdivision as f64
    }

    /// Best grid index by `sum mu^2 - 2 sum z mu` (the `z'z` term is constant).
    fn scan(&self, z: &[f64]) -> usize {
        let sub = self.config.grid_subdivision;
        let mut best = (0, f64::INFINITY);
        for (g, e) in self.energy.iter().enumerate() {
            let first = g.div_ceil(sub);
            let cross: f64 = z[first..]
                .iter()
                .enumerate()
                .map(|(i, zv)| zv * self.fine[sub * (first + i) - g])
                .sum();
            let obj = e - 2.0 * cross;
            if obj < best.1 {
                best = (g, obj);
            }
        }
        best.0
    }

    fn objective(&self, data: &Dataset, tau: f64) -> f64 {
        ml_negloglik(data, &self.design, tau)
    }
}

impl DelayEstimator for MlEstimator {
    fn method(&self) -> Method {
        Method::Ml
    }

    fn estimate(&self, data: &Dataset) -> Result<DelayEstimate> {
        check_grid(data, self.design.delta, self.n_samples)?;
        let g = self.scan(&data.z);
        let step = self.grid_step();
        let tau_grid = g as f64 * step;
        let f_grid = self.objective(data, tau_grid);

        let mut lo = (tau_grid - step).max(0.0);
        let mut hi = (tau_grid + step).min(self.tau_max);
        let mut x1 = hi - GOLDEN * (hi - lo);
        let mut x2 = lo + GOLDEN * (hi - lo);
        let mut f1 = self.objective(data, x1);
        let mut f2 = self.objective(data, x2);
        let mut iterations = 0;
        while hi - lo > self.config.tolerance && iterations < self.config.max_iterations {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - GOLDEN * (hi - lo);
                f1 = self.objective(data, x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + GOLDEN * (hi - lo);
                f2 = self.objective(data, x2);
            }
            iterations += 1;
        }
        let (tau_ref, f_ref) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        let converged = hi - lo <= self.config.tolerance;
        let mut diagnostics = Diagnostics {
            iterations: Some(iterations),
            converged: Some(converged),
            ..Default::default()
        };
        // Differences below the rounding level of the objective are ties.
        let rounding = 1e-12 * (f_grid.abs() + data.z.iter().map(|v| v * v).sum::<f64>());
        let tau = if f_ref <= f_grid {
            tau_ref
        } else {
            if f_ref - f_grid > rounding {
                diagnostics.converged = Some(false);
                diagnostics
                    .warnings
                    .push("refinement did not improve on the grid point".into());
                log::warn!("ML refinement did not improve on grid point tau = {tau_grid}");
            }
            tau_grid
        };
        diagnostics.residual_norm = Some((self.objective(data, tau) / data.delta).sqrt());
        Ok(DelayEstimate::new(Method::Ml, tau, diagnostics))
    }
}

pub fn estimate_delay_ml(data: &Dataset, design: &InputDesign, tau_max: f64) -> Result<DelayEstimate> {
    MlEstimator::new(design, data.n_samples(), tau_max, MlConfig::default())?.estimate(data)
}

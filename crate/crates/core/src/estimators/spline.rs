//! Baseline: interpolate the samples with a cubic spline and evaluate the
//! Laguerre projections `y_j = int y(t) l_j(t) dt` by quadrature over the
//! record `[0, (N-1) delta]`. The Markov/closed-form stage is shared with
//! the proposed estimator.

use crate::basis::eval_basis_all;
use crate::delay::{assemble_ab, closed_form_delay, solve_toeplitz, Spectrum};
use crate::error::{invalid, Result};
use crate::quad::GaussLegendre;
use crate::signal::{Dataset, InputDesign};

use super::{check_grid, DelayEstimate, DelayEstimator, Diagnostics, Method};

/// Gauss–Legendre nodes per spline segment.
const NODES_PER_SEGMENT: usize = 6;

/// Natural cubic spline on a uniform grid `t_i = i h`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    h: f64,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    curvature: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(h: f64, values: &[f64]) -> Result<Self> {
        if values.len() < 4 {
            return Err(invalid("cubic spline needs at least 4 samples"));
        }
        Ok(Self {
            h,
            values: values.to_vec(),
            curvature: natural_curvature(h, values),
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let pos = (t / self.h).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let theta = pos - i as f64;
        segment_value(self.h, theta, self.values[i], self.values[i + 1], self.curvature[i], self.curvature[i + 1])
    }
}

fn segment_value(h: f64, theta: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let w = 1.0 - theta;
    let h2 = h * h / 6.0;
    w * y0 + theta * y1 + h2 * (w * w * w - w) * m0 + h2 * (theta * theta * theta - theta) * m1
}

/// Thomas solve of `M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2`
/// with `M_0 = M_{n-1} = 0`.
fn natural_curvature(h: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    let inner = n - 2;
    let mut c = vec![0.0; inner];
    let mut d = vec![0.0; inner];
    let scale = 6.0 / (h * h);
    for k in 0..inner {
        let i = k + 1;
        let rhs = scale * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
        if k == 0 {
            c[k] = 1.0 / 4.0;
            d[k] = rhs / 4.0;
        } else {
            let denom = 4.0 - c[k - 1];
            c[k] = 1.0 / denom;
            d[k] = (rhs - d[k - 1]) / denom;
        }
    }
    for k in (0..inner).rev() {
        let next = if k + 1 < inner { m[k + 2] } else { 0.0 };
        m[k + 1] = d[k] - c[k] * next;
    }
    m
}

#[derive(Debug, Clone)]
pub struct LagSplineEstimator {
    input: Spectrum,
    delta: f64,
    n_samples: usize,
    num_funcs: usize,
    m_markov: usize,
    /// Per node: weights of `(y_i, y_{i+1}, M_i, M_{i+1})` in the segment value.
    node_coeffs: Vec<[f64; 4]>,
    /// `w_q * l_j(t_i + theta_q h)`, laid out `[segment][node][j]`.
    weighted_basis: Vec<f64>,
}

impl LagSplineEstimator {
    pub fn new(design: &InputDesign, n_samples: usize, k_model: usize, m_markov: usize) -> Result<Self> {
        design.validate()?;
        if n_samples < 4 {
            return Err(invalid("spline baseline needs at least 4 samples"));
        }
        let num_funcs = k_model + 1;
        if num_funcs < design.u.len() || m_markov < 3 || m_markov > num_funcs {
            return Err(invalid(format!(
                "invalid model order K = {k_model} / Markov count {m_markov} for input order {}",
                design.u.len() - 1
            )));
        }
        let h = design.delta;
        let rule = GaussLegendre::new(NODES_PER_SEGMENT);
        let nodes: Vec<(f64, f64)> = rule.mapped(0.0, 1.0).collect();
        let node_coeffs = nodes
            .iter()
            .map(|&(theta, _)| {
                let w = 1.0 - theta;
                let h2 = h * h / 6.0;
                [w, theta, h2 * (w * w * w - w), h2 * (theta * theta * theta - theta)]
            })
            .collect();
        let segments = n_samples - 1;
        let mut weighted_basis = vec![0.0; segments * nodes.len() * num_funcs];
        let mut buf = vec![0.0; num_funcs];
        for i in 0..segments {
            for (q, &(theta, w)) in nodes.iter().enumerate() {
                let t = (i as f64 + theta) * h;
                eval_basis_all(design.p, t, &mut buf);
                let base = (i * nodes.len() + q) * num_funcs;
                for j in 0..num_funcs {
                    weighted_basis[base + j] = w * h * buf[j];
                }
            }
        }
        Ok(Self {
            input: design.spectrum(),
            delta: h,
            n_samples,
            num_funcs,
            m_markov,
            node_coeffs,
            weighted_basis,
        })
    }

    /// Spline-quadrature estimate of the first `K + 1` Laguerre coefficients.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let m = natural_curvature(self.delta, z);
        let q_count = self.node_coeffs.len();
        let mut y = vec![0.0; self.num_funcs];
        for i in 0..self.n_samples - 1 {
            for (q, c) in self.node_coeffs.iter().enumerate() {
                let s = c[0] * z[i] + c[1] * z[i + 1] + c[2] * m[i] + c[3] * m[i + 1];
                let base = (i * q_count + q) * self.num_funcs;
                for (yj, wb) in y.iter_mut().zip(&self.weighted_basis[base..base + self.num_funcs]) {
                    *yj += s * wb;
                }
            }
        }
        y
    }
}

impl DelayEstimator for LagSplineEstimator {
    fn method(&self) -> Method {
        Method::LagSpline
    }

    fn estimate(&self, data: &Dataset) -> Result<DelayEstimate> {
        check_grid(data, self.delta, self.n_samples)?;
        let y_hat = self.project(&data.z);
        let h_hat = solve_toeplitz(&self.input, &y_hat)?;
        let sys = assemble_ab(&h_hat[..self.m_markov])?;
        let tau = closed_form_delay(&sys, self.input.p)?;
        Ok(DelayEstimate::new(
            Method::LagSpline,
            tau,
            Diagnostics {
                y_hat: Some(y_hat),
                h_hat: Some(h_hat),
                ..Default::default()
            },
        ))
    }
}

pub fn estimate_delay_lag_spline(data: &Dataset, design: &InputDesign, k_model: usize) -> Result<DelayEstimate> {
    LagSplineEstimator::new(design, data.n_samples(), k_model, k_model + 1)?.estimate(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_interpolates_knots_and_cubics_in_the_interior() {
        let h = 0.1;
        let y: Vec<f64> = (0..30).map(|i| ((i as f64) * h).sin()).collect();
        let s = CubicSpline::natural(h, &y).unwrap();
        for (i, v) in y.iter().enumerate() {
            assert!((s.eval(i as f64 * h) - v).abs() < 1e-14);
        }
        // interior error is O(h^4) away from the natural end conditions
        let err = (s.eval(1.45) - 1.45f64.sin()).abs();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn linear_data_gives_zero_curvature() {
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let m = natural_curvature(0.5, &y);
        assert!(m.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_short_records() {
        assert!(CubicSpline::natural(1.0, &[1.0, 2.0, 3.0]).is_err());
    }
}

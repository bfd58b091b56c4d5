//! Baseline: integer lag from the cross-correlation peak, then a subsample
//! correction from the phase slope of the cross-spectrum.
//!
//! After the integer lag `k*` is removed, each retained bin gives a delay
//! `-arg(R_m) / omega_m`; these are combined by a power-spectrum weighted
//! least-squares fit (`w_m = |R_m|^2`). Only bins whose magnitude is at least
//! a fixed fraction of the peak are used, which drops the noise-dominated
//! high-frequency band.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::signal::{sample_delayed, Dataset, InputDesign};

use super::{check_grid, DelayEstimate, DelayEstimator, Diagnostics, Method};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqInterpConfig {
    /// Bins with `|R_m| < band_fraction * max |R_m|` are ignored.
    pub band_fraction: f64,
}

impl Default for FreqInterpConfig {
    fn default() -> Self {
        Self { band_fraction: 0.1 }
    }
}

pub struct FreqInterpEstimator {
    delta: f64,
    n_samples: usize,
    fft_len: usize,
    config: FreqInterpConfig,
    /// Conjugated spectrum of the zero-padded reference `u(t_n)`.
    reference_conj: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FreqInterpEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FreqInterpEstimator")
            .field("delta", &self.delta)
            .field("n_samples", &self.n_samples)
            .field("fft_len", &self.fft_len)
            .field("config", &self.config)
            .finish()
    }
}

impl FreqInterpEstimator {
    pub fn new(design: &InputDesign, n_samples: usize, config: FreqInterpConfig) -> Result<Self> {
        design.validate()?;
        if n_samples < 2 {
            return Err(invalid("frequency interpolation needs at least 2 samples"));
        }
        let fft_len = (2 * n_samples).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut reference: Vec<Complex64> = sample_delayed(design, 0.0, n_samples)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
        reference.resize(fft_len, Complex64::new(0.0, 0.0));
        forward.process(&mut reference);
        let reference_conj = reference.iter().map(|c| c.conj()).collect();
        Ok(Self {
            delta: design.delta,
            n_samples,
            fft_len,
            config,
            reference_conj,
            forward,
            inverse,
        })
    }
}

impl DelayEstimator for FreqInterpEstimator {
    fn method(&self) -> Method {
        Method::FreqInterp
    }

    fn estimate(&self, data: &Dataset) -> Result<DelayEstimate> {
        check_grid(data, self.delta, self.n_samples)?;
        let l = self.fft_len;
        let mut spec: Vec<Complex64> = data.z.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spec.resize(l, Complex64::new(0.0, 0.0));
        self.forward.process(&mut spec);
        for (s, r) in spec.iter_mut().zip(&self.reference_conj) {
            *s *= r;
        }
        let cross_spectrum = spec.clone();

        // r(k) = sum_n z_{n+k} u(t_n) for k = 0..N-1
        self.inverse.process(&mut spec);
        let corr: Vec<f64> = spec[..self.n_samples].iter().map(|c| c.re / l as f64).collect();
        let (mut k_star, mut best) = (0usize, f64::NEG_INFINITY);
        let mut lowest = f64::INFINITY;
        for (k, &r) in corr.iter().enumerate() {
            if r > best {
                best = r;
                k_star = k;
            }
            lowest = lowest.min(r);
        }
        if !(best - lowest > f64::EPSILON * best.abs().max(1e-300)) {
            return Err(Error::FlatCorrelation);
        }

        let bin_omega = 2.0 * PI / (l as f64 * self.delta);
        let half = l / 2;
        let shifted: Vec<(f64, Complex64)> = (1..half)
            .map(|m| {
                let omega = m as f64 * bin_omega;
                let phase = Complex64::from_polar(1.0, omega * k_star as f64 * self.delta);
                (omega, cross_spectrum[m] * phase)
            })
            .collect();
        let peak = shifted.iter().map(|(_, r)| r.norm()).fold(0.0, f64::max);
        let floor = self.config.band_fraction * peak;
        let (mut num, mut den) = (0.0, 0.0);
        for (omega, r) in &shifted {
            let mag = r.norm();
            if mag < floor || mag == 0.0 {
                continue;
            }
            let w = mag * mag;
            num += w * (-r.arg() / omega);
            den += w;
        }
        let delta_tau = if den > 0.0 { num / den } else { 0.0 };
        Ok(DelayEstimate::new(
            Method::FreqInterp,
            k_star as f64 * self.delta + delta_tau,
            Diagnostics {
                integer_lag: Some(k_star),
                ..Default::default()
            },
        ))
    }
}

pub fn estimate_delay_freq_interp(data: &Dataset, design: &InputDesign) -> Result<DelayEstimate> {
    FreqInterpEstimator::new(design, data.n_samples(), FreqInterpConfig::default())?.estimate(data)
}

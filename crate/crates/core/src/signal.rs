//! Input synthesis, analytic delay, sampling and measurement noise.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::basis::{eval_series, eval_series_derivative, SampledBasis};
use crate::delay::Spectrum;
use crate::error::{invalid, Error, Result};
use crate::quad::GaussLegendre;

/// Fraction of the input energy allowed to arrive after the active support.
pub const TAIL_ENERGY_FRACTION: f64 = 1e-6;

/// A designed input signal given by its finite Laguerre spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct InputDesign {
    pub p: f64,
    pub u: Vec<f64>,
    /// Energy bound the design was produced under.
    pub eta: f64,
    pub delta: f64,
    /// Observation horizon `T`, seconds.
    pub horizon: f64,
    /// Rough delay guess the design was tuned for.
    pub tau_guess: f64,
}

impl InputDesign {
    pub fn spectrum(&self) -> Spectrum {
        Spectrum::new(self.p, self.u.clone())
    }

    /// Number of samples on `[0, T]`: `floor(T / delta) + 1`.
    pub fn n_samples(&self) -> usize {
        n_samples_for(self.horizon, self.delta)
    }

    pub fn energy(&self) -> f64 {
        self.u.iter().map(|c| c * c).sum()
    }

    /// `u(0)`; zero for a continuous start.
    pub fn initial_value(&self) -> f64 {
        eval_series(self.p, &self.u, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(invalid("design: p must be positive"));
        }
        if self.u.is_empty() {
            return Err(invalid("design: input spectrum is empty"));
        }
        if !(self.delta > 0.0 && self.horizon >= self.delta) {
            return Err(invalid("design: need 0 < delta <= horizon"));
        }
        if self.u.iter().any(|c| !c.is_finite()) {
            return Err(invalid("design: non-finite input coefficient"));
        }
        Ok(())
    }

    /// Support length `T_u`: the earliest instant after which at most
    /// `TAIL_ENERGY_FRACTION` of the input energy `sum u_k^2` remains, capped at `T`.
    pub fn active_duration(&self) -> f64 {
        let total = self.energy();
        if total == 0.0 {
            return 0.0;
        }
        let target = (1.0 - TAIL_ENERGY_FRACTION) * total;
        let gl = GaussLegendre::new(8);
        let sq = |t: f64| eval_series(self.p, &self.u, t).powi(2);
        let step = self.delta.min(0.1 / self.p);
        let mut acc = 0.0;
        let mut lo = 0.0;
        while lo < self.horizon {
            let hi = (lo + step).min(self.horizon);
            let piece = gl.integrate(lo, hi, 1, sq);
            if acc + piece >= target {
                // bisect inside the panel
                let (mut a, mut b) = (lo, hi);
                for _ in 0..50 {
                    let m = 0.5 * (a + b);
                    if acc + gl.integrate(lo, m, 1, sq) >= target {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                return b;
            }
            acc += piece;
            lo = hi;
        }
        self.horizon
    }

    /// Upper bound on detectable delays, `T - T_u`.
    pub fn tau_max(&self) -> f64 {
        (self.horizon - self.active_duration()).max(0.0)
    }
}

pub fn n_samples_for(horizon: f64, delta: f64) -> usize {
    (horizon / delta + 1e-9).floor() as usize + 1
}

/// `u(t) = sum_k u_k l_k(t)`, exact.
pub fn synthesize_input(design: &InputDesign, t: f64) -> f64 {
    eval_series(design.p, &design.u, t)
}

/// `du/dt` at `t`, zero for `t < 0`.
pub fn synthesize_input_derivative(design: &InputDesign, t: f64) -> f64 {
    eval_series_derivative(design.p, &design.u, t)
}

/// Noise-free samples `y_n = u(n delta - tau)`, exactly zero before the delay.
pub fn sample_delayed(design: &InputDesign, tau: f64, n_samples: usize) -> Vec<f64> {
    (0..n_samples)
        .map(|n| {
            let t = n as f64 * design.delta - tau;
            if t < 0.0 {
                0.0
            } else {
                eval_series(design.p, &design.u, t)
            }
        })
        .collect()
}

/// Samples `Phi Y` of a signal whose Laguerre spectrum is exactly `y`.
pub fn sample_spectrum(phi: &SampledBasis, y: &[f64]) -> Vec<f64> {
    let cols = phi.matrix.ncols().min(y.len());
    (0..phi.n_samples)
        .map(|n| (0..cols).map(|j| phi.matrix[(n, j)] * y[j]).sum())
        .collect()
}

/// Deterministic noise generator for replicate `replicate` of run `seed`.
pub fn noise_stream(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Adds i.i.d. Gaussian noise of variance `lambda` to `y` in place.
pub fn add_noise_in_place(y: &mut [f64], lambda: f64, rng: &mut impl Rng) {
    if lambda == 0.0 {
        return;
    }
    let sd = lambda.sqrt();
    for v in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += sd * e;
    }
}

/// Sampled noisy measurements `z_n = y(t_n) + e_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub z: Vec<f64>,
    pub delta: f64,
    pub noise_var: f64,
    pub seed: u64,
    pub true_tau: Option<f64>,
}

/// JSON sidecar stored next to the CSV samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DatasetMeta {
    pub delta: f64,
    pub n_samples: usize,
    pub noise_var: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_tau: Option<f64>,
}

pub fn add_noise(y: &[f64], lambda: f64, seed: u64, delta: f64) -> Result<Dataset> {
    if !(lambda >= 0.0) {
        return Err(invalid(format!("noise variance must be non-negative, got {lambda}")));
    }
    let mut z = y.to_vec();
    add_noise_in_place(&mut z, lambda, &mut noise_stream(seed, 0));
    Ok(Dataset {
        z,
        delta,
        noise_var: lambda,
        seed,
        true_tau: None,
    })
}

/// Full synthetic experiment: sample the delayed input and add noise.
pub fn simulate(design: &InputDesign, tau: f64, lambda: f64, seed: u64) -> Result<Dataset> {
    design.validate()?;
    if !(tau >= 0.0) {
        return Err(invalid(format!("delay must be non-negative, got {tau}")));
    }
    let y = sample_delayed(design, tau, design.n_samples());
    let mut data = add_noise(&y, lambda, seed, design.delta)?;
    data.true_tau = Some(tau);
    Ok(data)
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.z.len()
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            delta: self.delta,
            n_samples: self.z.len(),
            noise_var: self.noise_var,
            seed: self.seed,
            true_tau: self.true_tau,
        }
    }

    /// Path of the JSON sidecar belonging to `csv_path`.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Writes `t,z` CSV (17 significant digits) and the JSON sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(csv_path)?);
        writeln!(w, "t,z")?;
        for (n, z) in self.z.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", n as f64 * self.delta, z)?;
        }
        w.flush()?;
        fs::write(
            Self::sidecar_path(csv_path),
            serde_json::to_string_pretty(&self.meta())?,
        )?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(Self::sidecar_path(csv_path))?)?;
        let reader = BufReader::new(fs::File::open(csv_path)?);
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "t,z" => {}
            _ => return Err(Error::Format("expected header `t,z`".into())),
        }
        let mut z = Vec::with_capacity(meta.n_samples);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (_t, v) = match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(v), None) => (t, v),
                _ => return Err(Error::Format(format!("line {}: expected two columns", i + 2))),
            };
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
            z.push(v);
        }
        if z.len() != meta.n_samples {
            return Err(Error::Format(format!(
                "sidecar declares {} samples, CSV holds {}",
                meta.n_samples,
                z.len()
            )));
        }
        Ok(Self {
            z,
            delta: meta.delta,
            noise_var: meta.noise_var,
            seed: meta.seed,
            true_tau: meta.true_tau,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> InputDesign {
        InputDesign {
            p: 20.0,
            u: vec![0.9, -0.4, -0.4, -0.1],
            eta: 2.0,
            delta: 1e-3,
            horizon: 0.5,
            tau_guess: 1e-3,
        }
    }

    #[test]
    fn single_coefficient_is_one_basis_function() {
        let d = InputDesign { u: vec![1.0], ..design() };
        for &t in &[0.0f64, 0.01, 0.2] {
            let want = (40f64).sqrt() * (-20.0 * t).exp();
            assert!((synthesize_input(&d, t) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn continuous_start_and_decay() {
        let d = design();
        assert!(d.initial_value().abs() < 1e-12);
        assert!(synthesize_input(&d, 3.0).abs() < 1e-15);
    }

    #[test]
    fn integer_delay_shifts_samples() {
        let d = design();
        let y0 = sample_delayed(&d, 0.0, 50);
        let y1 = sample_delayed(&d, d.delta, 50);
        assert_eq!(y1[0], 0.0);
        for n in 1..50 {
            assert!((y1[n] - y0[n - 1]).abs() < 1e-13);
        }
        for (n, y) in y0.iter().enumerate() {
            assert_eq!(*y, synthesize_input(&d, n as f64 * d.delta));
        }
    }

    #[test]
    fn noise_free_and_seeded() {
        let y = vec![1.0, 2.0, 3.0];
        let d = add_noise(&y, 0.0, 5, 0.1).unwrap();
        assert_eq!(d.z, y);
        let a = add_noise(&y, 0.3, 11, 0.1).unwrap();
        let b = add_noise(&y, 0.3, 11, 0.1).unwrap();
        assert_eq!(a.z, b.z);
        let c = add_noise(&y, 0.3, 12, 0.1).unwrap();
        assert_ne!(a.z, c.z);
        assert!(add_noise(&y, -1.0, 1, 0.1).is_err());
    }

    #[test]
    fn sample_count_rounding() {
        assert_eq!(n_samples_for(0.5, 3e-4), 1667);
        assert_eq!(n_samples_for(0.5, 1e-4), 5001);
        assert_eq!(n_samples_for(0.5, 6e-5), 8334);
    }

    #[test]
    fn active_duration_is_inside_horizon() {
        let d = InputDesign { p: 50.0, ..design() };
        let tu = d.active_duration();
        assert!(tu > 0.1 && tu < d.horizon, "T_u = {tu}");
        assert!((d.tau_max() - (d.horizon - tu)).abs() < 1e-15);
    }
}

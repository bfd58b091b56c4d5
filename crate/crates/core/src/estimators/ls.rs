use nalgebra::{DMatrix, DVector};

use crate::basis::SampledBasis;
use crate::delay::{solve_toeplitz, Spectrum};
use crate::error::{invalid, Result};
use crate::signal::Dataset;

/// Least-squares output-spectrum estimator `Y = argmin ||Z - Phi Y||`,
/// solved through a thin QR factorization of `Phi`.
#[derive(Debug, Clone)]
pub struct SpectrumLs {
    phi: SampledBasis,
    /// `R^{-1} Q'`, so that `Y = pinv Z`.
    pinv: DMatrix<f64>,
}

impl SpectrumLs {
    pub fn new(phi: SampledBasis) -> Result<Self> {
        phi.check_conditioning()?;
        let qr = phi.matrix.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let qt = q.transpose();
        let pinv = r
            .solve_upper_triangular(&qt)
            .ok_or_else(|| invalid("R factor of Phi is singular"))?;
        Ok(Self { phi, pinv })
    }

    pub fn basis(&self) -> &SampledBasis {
        &self.phi
    }

    pub fn pseudo_inverse(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn solve(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.phi.n_samples {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                self.phi.n_samples,
                z.len()
            )));
        }
        let zv = DVector::from_column_slice(z);
        Ok((&self.pinv * zv).as_slice().to_vec())
    }

    pub fn residual_norm(&self, z: &[f64], y: &[f64]) -> f64 {
        let fit = &self.phi.matrix * DVector::from_column_slice(y);
        z.iter()
            .zip(fit.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `(Phi' Phi)^{-1}` computed as `pinv pinv'`.
    pub fn gram_inverse(&self) -> DMatrix<f64> {
        &self.pinv * self.pinv.transpose()
    }
}

/// Estimates the first `K + 1` Laguerre coefficients of the sampled output.
pub fn estimate_spectrum_ls(data: &Dataset, phi: &SampledBasis) -> Result<Spectrum> {
    if data.n_samples() != phi.n_samples {
        return Err(invalid(format!(
            "dataset has {} samples, basis has {}",
            data.n_samples(),
            phi.n_samples
        )));
    }
    let ls = SpectrumLs::new(phi.clone())?;
    Ok(Spectrum::new(phi.config.p, ls.solve(&data.z)?))
}

/// `H = T(U)^{-1} Y` by forward substitution.
pub fn estimate_markov(y_hat: &Spectrum, input: &Spectrum) -> Result<Vec<f64>> {
    solve_toeplitz(input, &y_hat.coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_phi, BasisConfig};
    use crate::signal::{add_noise, sample_spectrum};

    #[test]
    fn exact_spectrum_is_recovered() {
        let cfg = BasisConfig::new(20.0, 7).unwrap();
        let phi = build_phi(&cfg, 1e-3, 500).unwrap();
        let y = vec![0.3, -0.2, 0.5, 0.0, 0.1, -0.05, 0.02];
        let data = add_noise(&sample_spectrum(&phi, &y), 0.0, 0, 1e-3).unwrap();
        let est = estimate_spectrum_ls(&data, &phi).unwrap();
        for (a, b) in est.coeffs.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn normal_equations_agree() {
        let cfg = BasisConfig::new(10.0, 5).unwrap();
        let phi = build_phi(&cfg, 2e-3, 400).unwrap();
        let z: Vec<f64> = (0..400).map(|n| ((n as f64) * 0.37).sin()).collect();
        let ls = SpectrumLs::new(phi.clone()).unwrap();
        let y = ls.solve(&z).unwrap();
        let m = &phi.matrix;
        let normal = (m.transpose() * m)
            .lu()
            .solve(&(m.transpose() * DVector::from_vec(z)))
            .unwrap();
        for (a, b) in y.iter().zip(normal.iter()) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn identity_input_gives_spectrum_back() {
        let u = Spectrum::new(1.0, vec![1.0]);
        let y = Spectrum::new(1.0, vec![0.4, 0.3, -0.1]);
        assert_eq!(estimate_markov(&y, &u).unwrap(), y.coeffs);
    }

    #[test]
    fn sample_count_mismatch() {
        let cfg = BasisConfig::new(10.0, 3).unwrap();
        let phi = build_phi(&cfg, 1e-2, 50).unwrap();
        let data = add_noise(&[0.0; 49], 0.0, 0, 1e-2).unwrap();
        assert!(estimate_spectrum_ls(&data, &phi).is_err());
    }
}

//! Laguerre-domain model of a pure delay.
//!
//! Delaying a signal by `tau` acts on its Laguerre spectrum as a causal
//! convolution with the Markov parameters `h_m = e^{-kappa/2} L_m(kappa)`,
//! `kappa = 2 p tau`. Consecutive Markov parameters satisfy a three-term
//! relation that is linear in `kappa`, which gives the vector equation
//! `A = kappa B` and a closed-form delay.

use nalgebra::{DMatrix, DVector};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::basis::assoc_laguerre_sequence;
use crate::error::{invalid, Error, Result};

/// Below this magnitude `u_0` is treated as zero.
pub const SINGULAR_U0_TOL: f64 = 1e-12;
/// Below this value `B'B` is treated as zero.
pub const DEGENERATE_BTB_TOL: f64 = 1e-20;

/// Finite Laguerre spectrum `w_0, ..., w_n` with respect to parameter `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Spectrum {
    pub p: f64,
    pub coeffs: Vec<f64>,
}

impl Spectrum {
    pub fn new(p: f64, coeffs: Vec<f64>) -> Self {
        Self { p, coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Squared 2-norm of the time signal (Parseval).
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Coefficient `k`, zero beyond the stored length.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MarkovSequence {
    pub kappa: f64,
    pub values: Vec<f64>,
}

impl MarkovSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `h_m(kappa) = e^{-kappa/2} L_m(kappa)` for `m < m_count`.
pub fn markov_params(kappa: f64, m_count: usize) -> MarkovSequence {
    let scale = (-0.5 * kappa).exp();
    let values = assoc_laguerre_sequence(m_count, kappa)
        .into_iter()
        .map(|l| scale * l)
        .collect();
    MarkovSequence { kappa, values }
}

/// Output spectrum of the delayed input: `y_j = sum_{k<=j} h_{j-k} u_k`.
pub fn delay_spectrum(input: &Spectrum, kappa: f64, out_len: usize) -> Spectrum {
    let h = markov_params(kappa, out_len);
    let coeffs = convolve_causal(&h.values, &input.coeffs, out_len);
    Spectrum::new(input.p, coeffs)
}

/// First `out_len` terms of the causal convolution of `h` and `u`.
pub fn convolve_causal(h: &[f64], u: &[f64], out_len: usize) -> Vec<f64> {
    (0..out_len)
        .map(|j| {
            let hi = j.min(u.len().saturating_sub(1));
            (0..=hi)
                .filter(|&k| k < u.len() && j - k < h.len())
                .map(|k| h[j - k] * u[k])
                .sum()
        })
        .collect()
}

/// Lower-triangular Toeplitz matrix `T(U)` of the given size.
pub fn build_toeplitz(input: &Spectrum, size: usize) -> Result<DMatrix<f64>> {
    if size == 0 {
        return Err(invalid("Toeplitz size must be at least 1"));
    }
    let u0 = input.coeff(0);
    if u0.abs() < SINGULAR_U0_TOL {
        return Err(Error::SingularInput { u0 });
    }
    Ok(DMatrix::from_fn(size, size, |j, k| {
        if j >= k {
            input.coeff(j - k)
        } else {
            0.0
        }
    }))
}

/// Solves `T(U) h = y` by forward substitution on the Toeplitz structure.
pub fn solve_toeplitz(input: &Spectrum, y: &[f64]) -> Result<Vec<f64>> {
    let u0 = input.coeff(0);
    if u0.abs() < SINGULAR_U0_TOL {
        return Err(Error::SingularInput { u0 });
    }
    let mut h = Vec::with_capacity(y.len());
    for j in 0..y.len() {
        let upper = j.min(input.len().saturating_sub(1));
        let mut acc = y[j];
        for k in 1..=upper {
            acc -= input.coeffs[k] * h[j - k];
        }
        h.push(acc / u0);
    }
    Ok(h)
}

/// Coefficient matrix of the three-term relations for `h_0 .. h_{M-2}`.
///
/// Row `m` encodes `kappa h_m = -(m-1) h_{m-1} + 2m h_m - (m+1) h_{m+1}`;
/// the `h_{M-1}` term of the last row is left out and carried by `A`.
pub fn build_omega(m_count: usize) -> Result<DMatrix<f64>> {
    if m_count < 3 {
        return Err(invalid(format!("need at least 3 Markov parameters, got {m_count}")));
    }
    let n = m_count - 1;
    let mut omega = DMatrix::zeros(n, n);
    for m in 0..n {
        let mf = m as f64;
        if m >= 1 {
            omega[(m, m - 1)] = -(mf - 1.0);
        }
        omega[(m, m)] = 2.0 * mf;
        if m + 1 < n {
            omega[(m, m + 1)] = -(mf + 1.0);
        }
    }
    Ok(omega)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayLinearSystem {
    pub omega: DMatrix<f64>,
    pub vec_a: DVector<f64>,
    pub vec_b: DVector<f64>,
}

/// `B = [h_0 .. h_{M-2}]`, `A = Omega B - (M-1) h_{M-1} e_{M-1}`.
pub fn assemble_ab(h: &[f64]) -> Result<DelayLinearSystem> {
    let m = h.len();
    let omega = build_omega(m)?;
    let vec_b = DVector::from_column_slice(&h[..m - 1]);
    let mut vec_a = &omega * &vec_b;
    vec_a[m - 2] -= (m - 1) as f64 * h[m - 1];
    Ok(DelayLinearSystem {
        omega,
        vec_a,
        vec_b,
    })
}

/// `tau = (1 / 2p) B'A / B'B`.
pub fn closed_form_delay(sys: &DelayLinearSystem, p: f64) -> Result<f64> {
    let btb = sys.vec_b.dot(&sys.vec_b);
    if !(btb >= DEGENERATE_BTB_TOL) {
        return Err(Error::DegenerateB { btb });
    }
    Ok(sys.vec_b.dot(&sys.vec_a) / btb / (2.0 * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn markov_examples() {
        assert_eq!(markov_params(0.0, 4).values, vec![1.0, 0.0, 0.0, 0.0]);
        let h = markov_params(1.0, 2);
        assert_relative_eq!(h.values[0], (-0.5f64).exp());
        assert_relative_eq!(h.values[1], -(-0.5f64).exp());
        let h = markov_params(3.7, 1);
        assert_relative_eq!(h.values[0], (-3.7f64 / 2.0).exp());
    }

    #[test]
    fn zero_delay_is_identity() {
        let u = Spectrum::new(2.0, vec![0.5, -0.2, 0.1]);
        let y = delay_spectrum(&u, 0.0, 5);
        assert_eq!(y.coeffs, vec![0.5, -0.2, 0.1, 0.0, 0.0]);
    }

    #[test]
    fn toeplitz_examples() {
        let t = build_toeplitz(&Spectrum::new(1.0, vec![1.0]), 3).unwrap();
        assert_eq!(t, DMatrix::identity(3, 3));
        let t = build_toeplitz(&Spectrum::new(1.0, vec![2.0, 3.0]), 2).unwrap();
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 3.0, 2.0]));
        assert!(matches!(
            build_toeplitz(&Spectrum::new(1.0, vec![0.0, 1.0]), 2),
            Err(Error::SingularInput { .. })
        ));
    }

    #[test]
    fn forward_substitution_inverts_toeplitz() {
        let u = Spectrum::new(1.0, vec![0.8, -0.3, -0.3, 0.1]);
        let h = markov_params(0.4, 9).values;
        let t = build_toeplitz(&u, 9).unwrap();
        let y = &t * DVector::from_vec(h.clone());
        let back = solve_toeplitz(&u, y.as_slice()).unwrap();
        for (a, b) in back.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
        let id = Spectrum::new(1.0, vec![1.0]);
        assert_eq!(solve_toeplitz(&id, &[0.3, 0.2]).unwrap(), vec![0.3, 0.2]);
    }

    #[test]
    fn omega_examples() {
        let o = build_omega(3).unwrap();
        assert_eq!(o, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 2.0]));
        let o = build_omega(4).unwrap();
        assert_eq!(o.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, -1.0, 4.0]);
        assert_eq!(o.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 2.0, -2.0]);
        assert!(build_omega(2).is_err());
    }

    #[test]
    fn omega_encodes_three_term_relation() {
        for &kappa in &[0.1, 1.0, 5.0] {
            let m = 7;
            let h = markov_params(kappa, m).values;
            let o = build_omega(m).unwrap();
            let b = DVector::from_column_slice(&h[..m - 1]);
            let mut lhs = &o * &b;
            lhs[m - 2] -= (m - 1) as f64 * h[m - 1];
            for i in 0..m - 1 {
                assert!((lhs[i] - kappa * b[i]).abs() < 1e-12 * (1.0 + kappa * b[i].abs()));
            }
        }
    }

    #[test]
    fn ab_examples() {
        let sys = assemble_ab(&markov_params(0.0, 5).values).unwrap();
        assert!(sys.vec_a.iter().all(|&a| a == 0.0));
        assert_eq!(sys.vec_b.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(closed_form_delay(&sys, 3.0).unwrap(), 0.0);

        let sys = assemble_ab(&markov_params(1.0, 3).values).unwrap();
        let e = (-0.5f64).exp();
        assert_relative_eq!(sys.vec_b[0], e);
        assert_relative_eq!(sys.vec_b[1], -e);
        assert_relative_eq!(sys.vec_a[0], sys.vec_b[0], max_relative = 1e-14);
        assert_relative_eq!(sys.vec_a[1], sys.vec_b[1], max_relative = 1e-14);
    }

    #[test]
    fn closed_form_recovers_delay() {
        let p = 1.0;
        let tau = 0.5;
        let sys = assemble_ab(&markov_params(2.0 * p * tau, 8).values).unwrap();
        assert_relative_eq!(closed_form_delay(&sys, p).unwrap(), tau, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_b_is_rejected() {
        let sys = assemble_ab(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(closed_form_delay(&sys, 1.0), Err(Error::DegenerateB { .. })));
    }
}

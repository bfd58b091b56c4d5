use crate::basis::{build_phi, BasisConfig};
use crate::delay::{assemble_ab, closed_form_delay, solve_toeplitz, Spectrum};
use crate::error::{invalid, Result};
use crate::signal::{Dataset, InputDesign};

use super::{check_grid, DelayEstimate, DelayEstimator, Diagnostics, Method, SpectrumLs};

/// Two-step Laguerre-domain estimator: LS output spectrum, Toeplitz solve
/// for the Markov parameters, then the closed-form delay.
#[derive(Debug, Clone)]
pub struct ProposedEstimator {
    input: Spectrum,
    ls: SpectrumLs,
    m_markov: usize,
}

impl ProposedEstimator {
    /// `k_model` is the highest basis index `K`; `m_markov` Markov parameters
    /// (at most `K + 1`, at least 3) enter the delay formula.
    pub fn new(design: &InputDesign, n_samples: usize, k_model: usize, m_markov: usize) -> Result<Self> {
        design.validate()?;
        if k_model + 1 < design.u.len() {
            return Err(invalid(format!(
                "output model order K = {k_model} is below the input order {}",
                design.u.len() - 1
            )));
        }
        if m_markov < 3 || m_markov > k_model + 1 {
            return Err(invalid(format!(
                "number of Markov parameters must lie in [3, K + 1 = {}], got {m_markov}",
                k_model + 1
            )));
        }
        let cfg = BasisConfig::new(design.p, k_model + 1)?;
        let phi = build_phi(&cfg, design.delta, n_samples)?;
        Ok(Self {
            input: design.spectrum(),
            ls: SpectrumLs::new(phi)?,
            m_markov,
        })
    }

    pub fn spectrum_estimator(&self) -> &SpectrumLs {
        &self.ls
    }

    fn run(&self, data: &Dataset, with_diagnostics: bool) -> Result<DelayEstimate> {
        let phi = self.ls.basis();
        check_grid(data, phi.delta, phi.n_samples)?;
        let y_hat = self.ls.solve(&data.z)?;
        let h_hat = solve_toeplitz(&self.input, &y_hat)?;
        let sys = assemble_ab(&h_hat[..self.m_markov])?;
        let tau = closed_form_delay(&sys, self.input.p)?;
        let diagnostics = if with_diagnostics {
            Diagnostics {
                residual_norm: Some(self.ls.residual_norm(&data.z, &y_hat)),
                y_hat: Some(y_hat),
                h_hat: Some(h_hat),
                ..Default::default()
            }
        } else {
            Diagnostics::default()
        };
        Ok(DelayEstimate::new(Method::Proposed, tau, diagnostics))
    }
}

impl DelayEstimator for ProposedEstimator {
    fn method(&self) -> Method {
        Method::Proposed
    }

    fn estimate(&self, data: &Dataset) -> Result<DelayEstimate> {
        self.run(data, true)
    }

    fn estimate_tau(&self, data: &Dataset) -> Result<f64> {
        self.run(data, false).map(|e| e.tau_hat)
    }
}

pub fn estimate_delay_proposed(
    data: &Dataset,
    design: &InputDesign,
    k_model: usize,
    m_markov: usize,
) -> Result<DelayEstimate> {
    ProposedEstimator::new(design, data.n_samples(), k_model, m_markov)?.estimate(data)
}

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{synthesize_input_derivative, InputDesign};

/// Cramér–Rao lower bound on the variance of unbiased delay estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CrlbReport {
    /// Variance bound, s^2.
    pub bound: f64,
    /// Inclusive sample-index range whose derivative energy enters the bound.
    pub window: (usize, usize),
}

/// `lambda / sum_n (d/dtau u(n delta - tau))^2` over
/// `n in [floor(tau / delta), ceil(T_u / delta)]`, clipped to the record.
pub fn crlb(design: &InputDesign, tau: f64, lambda: f64) -> Result<CrlbReport> {
    design.validate()?;
    if !(lambda > 0.0) {
        return Err(invalid(format!("noise variance must be positive, got {lambda}")));
    }
    if !(tau >= 0.0) {
        return Err(invalid(format!("delay must be non-negative, got {tau}")));
    }
    let n_samples = design.n_samples();
    let lo = (tau / design.delta).floor() as usize;
    let hi = ((design.active_duration() / design.delta).ceil() as usize).min(n_samples - 1);
    let info: f64 = (lo.min(hi)..=hi)
        .map(|n| {
            let s = n as f64 * design.delta - tau;
            if s < 0.0 {
                0.0
            } else {
                synthesize_input_derivative(design, s).powi(2)
            }
        })
        .sum();
    if !(info > 0.0) {
        return Err(Error::ZeroInformation);
    }
    Ok(CrlbReport {
        bound: lambda / info,
        window: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> InputDesign {
        InputDesign {
            p: 50.0,
            u: vec![1.0, -0.3, -0.3, -0.4],
            eta: 2.0,
            delta: 3e-4,
            horizon: 0.5,
            tau_guess: 3e-4,
        }
    }

    #[test]
    fn linear_in_noise_variance() {
        let a = crlb(&design(), 1.33e-3, 0.01).unwrap();
        let b = crlb(&design(), 1.33e-3, 0.02).unwrap();
        assert!((b.bound / a.bound - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_input_has_no_information() {
        let d = InputDesign { u: vec![0.0, 0.0], ..design() };
        assert!(matches!(crlb(&d, 0.0, 0.01), Err(Error::ZeroInformation)));
        assert!(crlb(&design(), 0.0, 0.0).is_err());
    }
}

//! Delay estimators and the Cramér–Rao bound.
//!
//! Each estimator comes in two forms: a free function matching the one-shot
//! use case, and a prepared struct that caches everything that depends only
//! on the design and the sampling grid so Monte-Carlo runs pay for it once.

mod crlb;
mod freq;
mod ls;
mod ml;
mod proposed;
mod spline;

use std::fmt;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::Dataset;

pub use crlb::{crlb, CrlbReport};
pub use freq::{estimate_delay_freq_interp, FreqInterpConfig, FreqInterpEstimator};
pub use ls::{estimate_markov, estimate_spectrum_ls, SpectrumLs};
pub use ml::{estimate_delay_ml, ml_gradient, ml_negloglik, MlConfig, MlEstimator};
pub use proposed::{estimate_delay_proposed, ProposedEstimator};
pub use spline::{estimate_delay_lag_spline, CubicSpline, LagSplineEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Ml,
    LagSpline,
    FreqInterp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::Ml, Method::LagSpline, Method::FreqInterp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Ml => "ml",
            Method::LagSpline => "lag_spline",
            Method::FreqInterp => "freq_interp",
        }
    }

    /// Parses a comma-separated list; `all` selects every method.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item == "all" {
                return Ok(Self::ALL.to_vec());
            }
            let m: Method = item.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(invalid("no estimation method selected"));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "ml" => Ok(Method::Ml),
            "lag_spline" | "interp_lag" => Ok(Method::LagSpline),
            "freq_interp" | "interp_freq" => Ok(Method::FreqInterp),
            other => Err(invalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub integer_lag: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DelayEstimate {
    pub method: Method,
    pub tau_hat: f64,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl DelayEstimate {
    pub(crate) fn new(method: Method, tau_hat: f64, diagnostics: Diagnostics) -> Self {
        Self {
            method,
            tau_hat,
            diagnostics,
            config_hash: None,
        }
    }
}

/// An estimator prepared for a fixed design and sampling grid.
pub trait DelayEstimator: Send + Sync {
    fn method(&self) -> Method;

    fn estimate(&self, data: &Dataset) -> Result<DelayEstimate>;

    /// Estimate only, without building diagnostics.
    fn estimate_tau(&self, data: &Dataset) -> Result<f64> {
        self.estimate(data).map(|e| e.tau_hat)
    }
}

pub(crate) fn check_grid(data: &Dataset, delta: f64, n_samples: usize) -> Result<()> {
    if data.n_samples() != n_samples {
        return Err(invalid(format!(
            "dataset holds {} samples, estimator was prepared for {n_samples}",
            data.n_samples()
        )));
    }
    if (data.delta - delta).abs() > 1e-12 * delta {
        return Err(invalid(format!(
            "dataset sampling time {} differs from design sampling time {delta}",
            data.delta
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_lists() {
        assert_eq!(Method::parse_list("all").unwrap().len(), 4);
        assert_eq!(
            Method::parse_list("ml, proposed,ml").unwrap(),
            vec![Method::Ml, Method::Proposed]
        );
        assert!(Method::parse_list("bogus").is_err());
        assert!(Method::parse_list("").is_err());
        assert_eq!(serde_json::to_string(&Method::LagSpline).unwrap(), "\"lag_spline\"");
    }
}

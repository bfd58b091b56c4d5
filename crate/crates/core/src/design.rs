//! Offline experiment design: pick the Laguerre parameter and the input
//! spectrum that minimize the MSE of the Markov-parameter estimate at a
//! rough delay guess.
//!
//! The sign pattern is stated for the alternating-sign basis
//! `(-1)^k l_k(t)`. In that convention, with `v_k = (-1)^k u_k`, an
//! admissible input satisfies
//!
//! * `v_0 > 0`,
//! * `v_k >= 0` for odd `k`,
//! * `v_k = -v_{k-1}` for even `k >= 2`,
//! * `sum u_k^2 <= eta`,
//! * `u(0) = sqrt(2p) sum u_k = 0` (continuous start).
//!
//! For odd `I` the free variables are the odd `v_k`; continuity then fixes
//! `v_0 = 2 sum_{odd k < I} v_k + v_I`.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::analysis::MarkovMseModel;
use crate::error::{invalid, Error, Result};
use crate::signal::{n_samples_for, InputDesign};

const PATTERN_TOL: f64 = 1e-12;
const CONTINUITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for PGrid {
    fn default() -> Self {
        Self {
            min: 1.0,
            max: 200.0,
            points: 40,
        }
    }
}

impl PGrid {
    /// Log-spaced values.
    pub fn values(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.min];
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        (0..self.points)
            .map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

fn default_u_grid() -> usize {
    25
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DesignProblem {
    pub delta: f64,
    /// Observation horizon `T`; the record has `floor(T / delta) + 1` samples.
    pub horizon: f64,
    /// Highest input coefficient index `I` (odd).
    pub i_order: usize,
    pub energy_bound: f64,
    pub tau_guess: f64,
    pub noise_var: f64,
    /// Highest output-model index `K`.
    pub k_model: usize,
    #[serde(default)]
    pub p_grid: PGrid,
    /// Grid points per free input coefficient on `[0, sqrt(eta)]`.
    #[serde(default = "default_u_grid")]
    pub u_grid: usize,
    #[serde(default = "default_true")]
    pub refine: bool,
}

impl DesignProblem {
    pub fn n_samples(&self) -> usize {
        n_samples_for(self.horizon, self.delta)
    }

    fn check(&self) -> Result<()> {
        if !(self.energy_bound > 0.0) {
            return Err(Error::Infeasible(format!(
                "energy bound must be positive, got {}",
                self.energy_bound
            )));
        }
        if self.i_order.is_multiple_of(2) {
            return Err(Error::Infeasible(format!("input order I must be odd, got {}", self.i_order)));
        }
        if !(self.delta > 0.0 && self.horizon >= self.delta) {
            return Err(invalid("need 0 < delta <= horizon"));
        }
        if !(self.tau_guess >= 0.0 && self.noise_var >= 0.0) {
            return Err(invalid("delay guess and noise variance must be non-negative"));
        }
        if self.k_model < self.i_order {
            return Err(invalid(format!(
                "output model order K = {} is below the input order I = {}",
                self.k_model, self.i_order
            )));
        }
        if !(self.p_grid.min > 0.0 && self.p_grid.max >= self.p_grid.min) || self.p_grid.points == 0 {
            return Err(invalid("p grid must be a non-empty positive range"));
        }
        if self.u_grid < 2 {
            return Err(invalid("input grid needs at least 2 points per coefficient"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    FirstCoefficientNotPositive,
    OddCoefficientNegative(usize),
    EvenCoefficientUnpaired(usize),
    EnergyExceeded,
    DiscontinuousStart,
    EvenLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
    pub energy: f64,
    /// `sum_k u_k`, proportional to `u(0)`.
    pub initial_sum: f64,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// True if only the continuity condition fails.
    pub fn pattern_ok(&self) -> bool {
        self.violations.iter().all(|v| *v == Violation::DiscontinuousStart)
    }
}

/// Checks the admissibility constraints listed in the module docs.
pub fn validate_constraints(u: &[f64], eta: f64) -> ConstraintReport {
    let mut violations = Vec::new();
    let alt = |k: usize| if k.is_multiple_of(2) { u[k] } else { -u[k] };
    if u.is_empty() || !(alt(0) > 0.0) {
        violations.push(Violation::FirstCoefficientNotPositive);
    }
    if !u.is_empty() && u.len() % 2 == 1 {
        violations.push(Violation::EvenLength);
    }
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for k in 1..u.len() {
        if k % 2 == 1 {
            if alt(k) < -PATTERN_TOL * scale {
                violations.push(Violation::OddCoefficientNegative(k));
            }
        } else if (alt(k) + alt(k - 1)).abs() > PATTERN_TOL * scale {
            violations.push(Violation::EvenCoefficientUnpaired(k));
        }
    }
    let energy: f64 = u.iter().map(|v| v * v).sum();
    if energy > eta * (1.0 + 1e-12) {
        violations.push(Violation::EnergyExceeded);
    }
    let initial_sum: f64 = u.iter().sum();
    if initial_sum.abs() > CONTINUITY_TOL * energy.sqrt().max(1.0) {
        violations.push(Violation::DiscontinuousStart);
    }
    ConstraintReport {
        violations,
        energy,
        initial_sum,
    }
}

/// Builds the input spectrum from the free alternating-sign coefficients
/// `[v_1, v_3, ..., v_I]`, projected onto the energy ball.
pub fn input_from_free(free: &[f64], eta: f64) -> Option<Vec<f64>> {
    let i_order = 2 * free.len() - 1;
    let mut v = vec![0.0; i_order + 1];
    let (pairs, last) = free.split_at(free.len() - 1);
    for (j, &a) in pairs.iter().enumerate() {
        v[2 * j + 1] = a;
        v[2 * j + 2] = -a;
    }
    v[i_order] = last[0];
    v[0] = 2.0 * pairs.iter().sum::<f64>() + last[0];
    if !(v[0] > 0.0) || free.iter().any(|a| *a < 0.0) {
        return None;
    }
    let mut u: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(k, x)| if k % 2 == 0 { *x } else { -x })
        .collect();
    let energy: f64 = u.iter().map(|x| x * x).sum();
    if energy > eta {
        let s = (eta / energy).sqrt();
        u.iter_mut().for_each(|x| *x *= s);
    }
    Some(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DesignOutcome {
    pub design: InputDesign,
    pub objective: f64,
    pub constraints: ConstraintReport,
    pub evaluations: usize,
}

struct Candidate {
    p: f64,
    free: Vec<f64>,
    objective: f64,
}

fn score(model: &MarkovMseModel, free: &[f64], problem: &DesignProblem) -> Option<f64> {
    let u = input_from_free(free, problem.energy_bound)?;
    model.mse(&u, problem.noise_var).ok().filter(|v| v.is_finite())
}

fn model_for(p: f64, problem: &DesignProblem) -> Result<MarkovMseModel> {
    MarkovMseModel::new(
        p,
        problem.k_model,
        problem.delta,
        problem.n_samples(),
        problem.i_order + 1,
        problem.tau_guess,
    )
}

/// Grid search over `p` and the free input coefficients, then coordinate
/// descent from the best grid point. Ties keep the first grid minimum.
pub fn optimize_design(problem: &DesignProblem) -> Result<DesignOutcome> {
    problem.check()?;
    let n_free = problem.i_order.div_ceil(2);
    let step = problem.energy_bound.sqrt() / (problem.u_grid - 1) as f64;
    let combos = problem.u_grid.pow(n_free as u32);
    let mut best: Option<Candidate> = None;
    let mut evaluations = 0;
    for p in problem.p_grid.values() {
        let model = match model_for(p, problem) {
            Ok(m) => m,
            Err(Error::IllConditioned { .. }) => continue,
            Err(e) => return Err(e),
        };
        let mut free = vec![0.0; n_free];
        for idx in 0..combos {
            let mut rest = idx;
            for f in free.iter_mut() {
                *f = (rest % problem.u_grid) as f64 * step;
                rest /= problem.u_grid;
            }
            if let Some(obj) = score(&model, &free, problem) {
                evaluations += 1;
                if best.as_ref().is_none_or(|b| obj < b.objective) {
                    best = Some(Candidate {
                        p,
                        free: free.clone(),
                        objective: obj,
                    });
                }
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::Infeasible("no grid point satisfies the constraints".into()))?;
    if problem.refine {
        evaluations += refine(&mut best, problem)?;
    }
    let u = input_from_free(&best.free, problem.energy_bound)
        .ok_or_else(|| Error::Infeasible("refined point left the feasible set".into()))?;
    let constraints = validate_constraints(&u, problem.energy_bound);
    let design = InputDesign {
        p: best.p,
        u,
        eta: problem.energy_bound,
        delta: problem.delta,
        horizon: problem.horizon,
        tau_guess: problem.tau_guess,
    };
    Ok(DesignOutcome {
        design,
        objective: best.objective,
        constraints,
        evaluations,
    })
}

/// Cyclic coordinate descent over `(ln p, free...)` with shrinking steps;
/// stops once a full sweep improves the objective by less than 1e-4 relative.
fn refine(best: &mut Candidate, problem: &DesignProblem) -> Result<usize> {
    let mut evaluations = 0;
    let p_ratio = if problem.p_grid.points > 1 {
        (problem.p_grid.max / problem.p_grid.min).powf(1.0 / (problem.p_grid.points - 1) as f64)
    } else {
        1.5
    };
    let mut log_step = p_ratio.ln();
    let mut u_step = problem.energy_bound.sqrt() / (problem.u_grid - 1) as f64;
    let mut model = model_for(best.p, problem)?;
    let p_fixed = problem.p_grid.points == 1 || problem.p_grid.min == problem.p_grid.max;
    for _ in 0..60 {
        let start = best.objective;
        for dir in [-1.0, 1.0] {
            if p_fixed {
                break;
            }
            let p = best.p * (dir * log_step).exp();
            if let Ok(m) = model_for(p, problem) {
                if let Some(obj) = score(&m, &best.free, problem) {
                    evaluations += 1;
                    if obj < best.objective {
                        best.p = p;
                        best.objective = obj;
                        model = m;
                        break;
                    }
                }
            }
        }
        for i in 0..best.free.len() {
            for dir in [-1.0, 1.0] {
                let mut free = best.free.clone();
                free[i] = (free[i] + dir * u_step).max(0.0);
                if let Some(obj) = score(&model, &free, problem) {
                    evaluations += 1;
                    if obj < best.objective {
                        best.free = free;
                        best.objective = obj;
                        break;
                    }
                }
            }
        }
        let gain = (start - best.objective) / start.abs().max(f64::MIN_POSITIVE);
        if gain < 1e-4 {
            log_step *= 0.5;
            u_step *= 0.5;
            if (p_fixed || log_step < 1e-4) && u_step < 1e-6 {
                break;
            }
        }
    }
    Ok(evaluations)
}

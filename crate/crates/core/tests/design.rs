//! Experiment design: feasibility, optimality over the grid, scaling and
//! determinism.

use lagdelay::analysis::{markov_mse, MarkovMseModel};
use lagdelay::design::{input_from_free, optimize_design, validate_constraints, DesignProblem, PGrid};
use lagdelay::quad::GaussLegendre;
use lagdelay::signal::{synthesize_input, InputDesign};

fn small_problem(refine: bool) -> DesignProblem {
    DesignProblem {
        delta: 3e-4,
        horizon: 0.5,
        i_order: 3,
        energy_bound: 2.0,
        tau_guess: 3e-4,
        noise_var: 0.01,
        k_model: 8,
        p_grid: PGrid { min: 10.0, max: 80.0, points: 5 },
        u_grid: 6,
        refine,
    }
}

#[test]
fn returned_design_is_feasible() {
    for refine in [false, true] {
        let out = optimize_design(&small_problem(refine)).unwrap();
        let report = validate_constraints(&out.design.u, out.design.eta);
        assert!(report.is_feasible(), "{report:?}");
        assert_eq!(report, out.constraints);
        assert!(out.design.initial_value().abs() < 1e-9);
        assert!(out.design.energy() <= 2.0 + 1e-12);
    }
}

#[test]
fn grid_result_is_no_worse_than_any_grid_point() {
    let problem = small_problem(false);
    let out = optimize_design(&problem).unwrap();
    let step = problem.energy_bound.sqrt() / (problem.u_grid - 1) as f64;
    let mut seen = 0;
    for p in problem.p_grid.values() {
        let model = MarkovMseModel::new(p, problem.k_model, problem.delta, problem.n_samples(), 4, problem.tau_guess)
            .unwrap();
        for a in 0..problem.u_grid {
            for b in 0..problem.u_grid {
                let Some(u) = input_from_free(&[a as f64 * step, b as f64 * step], problem.energy_bound) else {
                    continue;
                };
                let obj = model.mse(&u, problem.noise_var).unwrap();
                assert!(out.objective <= obj, "grid point p = {p}, u = {u:?}: {obj} < {}", out.objective);
                seen += 1;
            }
        }
    }
    assert_eq!(seen, out.evaluations);

    // the stored objective is the model MSE of the returned design
    let check = markov_mse(&out.design, problem.k_model, problem.noise_var, problem.tau_guess).unwrap();
    assert!((check.mse - out.objective).abs() <= 1e-9 * out.objective);

    let refined = optimize_design(&small_problem(true)).unwrap();
    assert!(refined.objective <= out.objective);
}

#[test]
fn variance_scales_inversely_with_input_amplitude() {
    let design = InputDesign {
        p: 50.0,
        u: vec![1.2, -0.3, -0.3, -0.6],
        eta: 2.0,
        delta: 3e-4,
        horizon: 0.5,
        tau_guess: 3e-4,
    };
    let model = MarkovMseModel::for_design(&design, 8, 3e-4).unwrap();
    let base = model.variance_trace(&design.u, 0.01).unwrap();
    for c in [0.9, 0.5, 0.1] {
        let scaled: Vec<f64> = design.u.iter().map(|v| c * v).collect();
        let v = model.variance_trace(&scaled, 0.01).unwrap();
        assert!((v * c * c / base - 1.0).abs() < 1e-10, "c = {c}");
        // the bias of H_hat does not depend on the amplitude
        let b0 = model.bias(&design.u).unwrap();
        let b1 = model.bias(&scaled).unwrap();
        for (x, y) in b0.iter().zip(&b1) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }
    let acc = markov_mse(&design, 8, 0.01, 3e-4).unwrap();
    assert!((acc.variance_trace() - base).abs() < 1e-10 * base);
}

#[test]
fn design_is_deterministic() {
    let a = optimize_design(&small_problem(true)).unwrap();
    let b = optimize_design(&small_problem(true)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn designed_input_obeys_parseval() {
    let out = optimize_design(&small_problem(true)).unwrap();
    let d = &out.design;
    let energy = GaussLegendre::new(12).integrate(0.0, 60.0 / d.p, 400, |t| synthesize_input(d, t).powi(2));
    assert!((energy - d.energy()).abs() < 1e-6, "{energy} vs {}", d.energy());
}

#[test]
fn fixed_laguerre_parameter_is_kept() {
    let mut problem = small_problem(true);
    problem.p_grid = PGrid { min: 50.0, max: 50.0, points: 1 };
    let out = optimize_design(&problem).unwrap();
    assert_eq!(out.design.p, 50.0);
}

#[test]
fn higher_input_order() {
    let mut problem = small_problem(false);
    problem.i_order = 5;
    problem.u_grid = 4;
    let out = optimize_design(&problem).unwrap();
    assert_eq!(out.design.u.len(), 6);
    assert!(out.constraints.is_feasible());
}

#[test]
fn fine_sampling_design_lands_in_the_expected_range() {
    // Delta = 1e-4, K = 6: the objective is flat in p over roughly [20, 40].
    let problem = DesignProblem {
        delta: 1e-4,
        horizon: 0.5,
        i_order: 3,
        energy_bound: 2.0,
        tau_guess: 1e-4,
        noise_var: 0.01,
        k_model: 6,
        p_grid: PGrid::default(),
        u_grid: 25,
        refine: true,
    };
    let out = optimize_design(&problem).unwrap();
    assert!((10.0..=45.0).contains(&out.design.p), "p = {}", out.design.p);
    assert!(out.constraints.is_feasible());
}

#[test]
fn pinned_parameter_design_is_frozen() {
    // K = 12, p held at 50, coarse sampling; the coefficients feed the
    // Monte-Carlo comparison.
    let problem = DesignProblem {
        delta: 3e-4,
        horizon: 0.5,
        i_order: 3,
        energy_bound: 2.0,
        tau_guess: 3e-4,
        noise_var: 0.01,
        k_model: 12,
        p_grid: PGrid { min: 50.0, max: 50.0, points: 1 },
        u_grid: 25,
        refine: true,
    };
    let out = optimize_design(&problem).unwrap();
    let frozen = [1.2144932686814107, -0.33028639703378243, -0.33028639703378243, -0.5539204746138457];
    for (a, b) in out.design.u.iter().zip(&frozen) {
        assert!((a - b).abs() < 1e-9, "{:?}", out.design.u);
    }
    assert!((out.objective - 1.579e-4).abs() < 1e-7, "{}", out.objective);
}

//! Limit and corrector solvers: representation oracles, manufactured
//! solutions, symmetry, conservation and the discrete-derivative property
//! of the corrector.

mod common;

use thinflow::problem::TimePoly;
use thinflow::reduced1d::{
    advective_coefficient, advective_form_check, mass_balance, pressure_from_representation,
    solve_corrector, solve_limit, solve_linearized, Grid1D,
};

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn representation_from_saturation_matches_linear_profile() {
    // uniform saturation and k₁ = 1/λ(s̄) give λk₁ ≡ 1
    let mut spec = common::constant_spec(1.0, 0.0);
    let d = spec.derived().unwrap();
    let s = 0.45;
    spec.coefficients.k1 = thinflow::problem::SineProfile::constant(1.0 / d.lambda(s));
    spec.q0 = TimePoly::new(vec![1.0]);
    let n = 20;
    let p = pressure_from_representation(&vec![s; n + 1], 1.0, &spec, true).unwrap();
    for (j, v) in p.iter().enumerate() {
        assert!((v - (1.0 - j as f64 / n as f64)).abs() < 1e-13);
    }
    assert_eq!(p[0], 1.0);
    assert_eq!(p[n], 0.0);
    assert!(pressure_from_representation(&[0.5, 1.2, 0.5], 1.0, &spec, true).is_err());
}

#[test]
fn constant_data_stay_constant() {
    let spec = common::constant_spec(1.0, 0.0);
    let grid = Grid1D::for_spec(&spec, 16, 10).unwrap();
    let sol = solve_limit(&spec, grid).unwrap();
    for (p, s) in sol.p0.iter().zip(&sol.s0) {
        assert!(p.iter().all(|v| v.abs() < 1e-14));
        assert!(s.iter().all(|v| (v - 0.45).abs() < 1e-12));
    }
    assert!(advective_form_check(&spec, &sol).unwrap() < 1e-10);
}

#[test]
fn manufactured_solution_converges_in_space_and_time() {
    let space: Vec<f64> = [(20, 100), (40, 400), (80, 1600)]
        .iter()
        .map(|&(nx, nt)| common::mms::final_error(nx, nt))
        .collect();
    for w in space.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "spatial errors {space:?}");
    }
    let time: Vec<f64> = [10, 20, 40]
        .iter()
        .map(|&nt| common::mms::final_error(400, nt))
        .collect();
    for w in time.windows(2) {
        assert!((w[0] / w[1]).log2() >= 0.9, "temporal errors {time:?}");
    }
}

#[test]
fn limit_solution_respects_bounds_and_endpoint_data() {
    let spec = common::case1_spec(0.0);
    let grid = Grid1D::for_spec(&spec, 50, 50).unwrap();
    let sol = solve_limit(&spec, grid).unwrap();
    let (lo, hi) = spec.saturation_bounds();
    for (n, (p, s)) in sol.p0.iter().zip(&sol.s0).enumerate() {
        let t = sol.times[n];
        assert_eq!(p[0], spec.q0.value(t));
        assert_eq!(p[grid.n_x], spec.q_ell.value(t));
        assert!(s.iter().all(|v| *v >= lo - 1e-6 && *v <= hi + 1e-6));
        assert_eq!(s[0], spec.s0(0.0, t));
    }
    assert!(sol.substeps.iter().all(|k| *k == 1));
}

#[test]
fn symmetric_data_give_symmetric_saturation() {
    let mut spec = common::case1_spec(0.0);
    spec.q0 = TimePoly::new(vec![0.0]);
    spec.saturation.rise_right = spec.saturation.rise_left;
    let grid = Grid1D::for_spec(&spec, 40, 20).unwrap();
    let sol = solve_limit(&spec, grid).unwrap();
    for s in &sol.s0 {
        for j in 0..=grid.n_x {
            assert!((s[j] - s[grid.n_x - j]).abs() < 1e-9);
        }
    }
}

#[test]
fn discrete_mass_balance_closes() {
    let spec = common::case1_spec(0.0);
    let grid = Grid1D::for_spec(&spec, 40, 40).unwrap();
    let sol = solve_limit(&spec, grid).unwrap();
    let mb = mass_balance(&spec, &sol).unwrap();
    let worst = mb.iter().fold(0.0f64, |a, b| a.max(*b)) * grid.dt();
    assert!(worst <= 1e-9, "mass residual {worst:e}");
}

#[test]
fn advective_coefficient_without_source_matches_direct_formula() {
    let mut spec = common::case1_spec(0.0);
    spec.lateral = thinflow::problem::LateralFlow::zero();
    let d = spec.derived().unwrap();
    let grid = Grid1D::for_spec(&spec, 30, 10).unwrap();
    let sol = solve_limit(&spec, grid).unwrap();
    let n = 7;
    let a = advective_coefficient(&spec, &sol, n).unwrap();
    let dx = grid.dx();
    let s_lag = &sol.s0[n - 1];
    let inv = |j: usize| 1.0 / (d.lambda(s_lag[j]) * spec.k1(grid.x(j)));
    let integral: f64 = (0..grid.n_x)
        .map(|f| 0.5 * dx * (inv(f) + inv(f + 1)))
        .sum();
    let t = sol.times[n];
    let c = (spec.q_ell.value(t) - spec.q0.value(t)) / integral;
    for j in 1..grid.n_x {
        let expect = d.state(sol.s0[n][j]).d_b * c;
        assert!((a[j - 1] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
    }
}

#[test]
fn advective_form_residual_is_second_order() {
    let spec = common::case1_spec(0.0);
    let res: Vec<f64> = [25, 50, 100]
        .iter()
        .map(|&n| {
            let grid = Grid1D::for_spec(&spec, n, 20).unwrap();
            advective_form_check(&spec, &solve_limit(&spec, grid).unwrap()).unwrap()
        })
        .collect();
    for w in res.windows(2) {
        assert!(w[0] / w[1] >= 1.8, "residuals {res:?}");
    }
}

#[test]
fn corrector_vanishes_without_source_and_scales_with_it() {
    let mut spec = common::spec(2.0, 0.0);
    let grid = Grid1D::for_spec(&spec, 30, 20).unwrap();
    let base = solve_limit(&spec, grid).unwrap();
    let c1 = solve_corrector(&spec, &base, grid).unwrap();
    spec.lateral.amplitude *= 2.0;
    let base2 = solve_limit(&spec, grid).unwrap();
    assert_eq!(base2.s0, base.s0);
    let c2 = solve_corrector(&spec, &base2, grid).unwrap();
    for n in 0..=grid.n_t {
        let scale = c1.s[n].iter().fold(1.0f64, |a, b| a.max(b.abs()));
        assert!(
            max_abs_diff(
                &c2.s[n],
                &c1.s[n].iter().map(|v| 2.0 * v).collect::<Vec<_>>()
            ) <= 1e-10 * scale
        );
        assert!(
            max_abs_diff(
                &c2.p[n],
                &c1.p[n].iter().map(|v| 2.0 * v).collect::<Vec<_>>()
            ) <= 1e-10 * scale
        );
        assert_eq!(c1.s[n][0], 0.0);
        assert_eq!(c1.p[n][grid.n_x], 0.0);
    }
    assert!(c1.s.last().unwrap().iter().any(|v| v.abs() > 1e-6));

    spec.lateral = thinflow::problem::LateralFlow::zero();
    let base0 = solve_limit(&spec, grid).unwrap();
    let c0 = solve_corrector(&spec, &base0, grid).unwrap();
    assert!(c0
        .s
        .iter()
        .chain(&c0.p)
        .all(|v| v.iter().all(|x| *x == 0.0)));
}

#[test]
fn case1_linearized_problem_with_zero_data_is_trivial() {
    let spec = common::case1_spec(0.0);
    let grid = Grid1D::for_spec(&spec, 30, 20).unwrap();
    let base = solve_limit(&spec, grid).unwrap();
    let c = solve_linearized(&spec, &base, |_, _| 0.0).unwrap();
    assert!(c.s.iter().chain(&c.p).all(|v| v.iter().all(|x| *x == 0.0)));
    assert!(solve_corrector(&spec, &base, grid).is_err());
}

#[test]
fn corrector_is_the_derivative_of_the_discrete_scheme() {
    // a Case 1 solve with source strength η approximates s₀ + η s' to O(η²)
    let spec2 = common::spec(2.0, 0.0);
    let grid = Grid1D::for_spec(&spec2, 30, 20).unwrap();
    let base = solve_limit(&spec2, grid).unwrap();
    let corr = solve_corrector(&spec2, &base, grid).unwrap();
    let mut errs = Vec::new();
    for eta in [1e-2, 5e-3] {
        let mut spec1 = common::spec(1.0, 0.0);
        spec1.lateral.amplitude *= eta;
        let pert = solve_limit(&spec1, grid).unwrap();
        let mut e = 0.0f64;
        for n in 0..=grid.n_t {
            for j in 0..=grid.n_x {
                let fd = (pert.s0[n][j] - base.s0[n][j]) / eta;
                e = e.max((fd - corr.s[n][j]).abs());
                let fdp = (pert.p0[n][j] - base.p0[n][j]) / eta;
                e = e.max((fdp - corr.p[n][j]).abs());
            }
        }
        errs.push(e);
    }
    assert!(
        errs[0] / errs[1] > 1.8 && errs[0] / errs[1] < 2.2,
        "errors {errs:?}"
    );
}

#[test]
fn corrector_converges_under_refinement() {
    let spec = common::spec(2.0, 0.0);
    let finals: Vec<(usize, Vec<f64>)> = [20, 40, 80]
        .iter()
        .map(|&n| {
            let grid = Grid1D::for_spec(&spec, n, n).unwrap();
            let base = solve_limit(&spec, grid).unwrap();
            let c = solve_corrector(&spec, &base, grid).unwrap();
            (n, c.s.last().unwrap().clone())
        })
        .collect();
    let coarse = |k: usize, v: &Vec<f64>| -> Vec<f64> { (0..=20).map(|j| v[j * k]).collect() };
    let d1 = max_abs_diff(&coarse(2, &finals[1].1), &finals[0].1);
    let d2 = max_abs_diff(&coarse(4, &finals[2].1), &coarse(2, &finals[1].1));
    let order = (d1 / d2).log2();
    assert!(order >= 1.0, "observed order {order} ({d1:e}, {d2:e})");
}

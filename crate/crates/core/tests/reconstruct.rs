//! Approximation fields: vanishing cell terms, the analytic cell value at
//! the axis, velocities of a linear pressure, the phase-velocity identity
//! and phase pressures.

mod common;

use thinflow::constitutive::{Capillary, PhaseClosures};
use thinflow::problem::{LateralFlow, SaturationData, SineProfile, TimePoly};
use thinflow::reconstruct::{
    assemble_pressure_at, assemble_state, reconstruct, reconstruct_phase_pressures,
    reconstruct_velocities, CellCache,
};
use thinflow::reduced1d::Grid1D;
use thinflow::reference::AxisymMesh;
use thinflow::verify::reduced_solution;

fn setup(
    spec: &thinflow::problem::ProblemSpec,
    n_x: usize,
    n_t: usize,
    n_r: usize,
) -> (thinflow::reduced1d::ReducedSolution, AxisymMesh, CellCache) {
    let grid = Grid1D::for_spec(spec, n_x, n_t).unwrap();
    let reduced = reduced_solution(spec, grid).unwrap();
    let mesh = AxisymMesh::new(n_x, n_r, spec.geometry.length, spec.geometry.epsilon).unwrap();
    let cache = CellCache::build(spec, &mesh).unwrap();
    (reduced, mesh, cache)
}

#[test]
fn without_lateral_flow_the_state_is_the_limit() {
    let mut spec = common::case1_spec(0.0);
    spec.lateral = LateralFlow::zero();
    let (reduced, mesh, cache) = setup(&spec, 20, 10, 8);
    for n in [0, 4, 10] {
        let (p, s) = assemble_state(&spec, &reduced, &cache, &mesh, n).unwrap();
        for j in 0..=mesh.n_x {
            for k in 0..mesh.n_r {
                assert_eq!(p[mesh.index(j, k)], reduced.p0[n][j]);
                assert_eq!(s[mesh.index(j, k)], reduced.s0[n][j]);
            }
        }
    }
}

#[test]
fn saturation_correction_scales_with_the_corrector_weight() {
    let spec = common::spec(2.5, 0.0);
    let (reduced, mesh, cache) = setup(&spec, 20, 10, 8);
    let half = AxisymMesh::new(20, 8, 1.0, 0.05).unwrap();
    let (_, s1) = assemble_state(&spec, &reduced, &cache, &mesh, 10).unwrap();
    let (_, s2) = assemble_state(&spec, &reduced, &cache, &half, 10).unwrap();
    let ratio = 0.5f64.powf(1.5);
    let mut checked = 0;
    for j in 0..=20 {
        let i = mesh.index(j, 3);
        let (d1, d2) = (s1[i] - reduced.s0[10][j], s2[i] - reduced.s0[10][j]);
        if d1.abs() > 1e-8 {
            assert!((d2 / d1 - ratio).abs() < 1e-6, "node {j}: {}", d2 / d1);
            checked += 1;
        }
    }
    assert!(checked > 5);
}

#[test]
fn axis_value_matches_the_analytic_cell_solution() {
    // Q/λ(s₀) = 1 at x = 1/2, t = T: λ(1/2) = 1/2 for equal Corey exponents
    // and viscosities, and the bump profile equals one at the centre
    let mut spec = common::case1_spec(0.0);
    spec.closures = PhaseClosures::corey(
        2.0,
        2.0,
        1.0,
        1.0,
        Capillary::Linear {
            entry_pressure: 0.5,
        },
    );
    spec.saturation = SaturationData::constant(0.5);
    spec.q0 = TimePoly::new(vec![0.0]);
    spec.lateral.amplitude = 0.5;
    spec.lateral.time = TimePoly::new(vec![1.0]);
    let (reduced, mesh, cache) = setup(&spec, 20, 10, 32);
    let d = spec.derived().unwrap();
    assert!((d.lambda(reduced.s0[9][10]) - 0.5).abs() < 1e-12);
    let p = assemble_pressure_at(&spec, &reduced, &cache, &mesh, 10, 10, 0.0).unwrap();
    let eps = spec.geometry.epsilon;
    let value = (p - reduced.p0[10][10]) / (eps * eps);
    assert!((value - 0.25).abs() < 1e-3, "u(0) = {value}");
}

#[test]
fn linear_pressure_gives_uniform_velocities() {
    let mut spec = common::constant_spec(1.0, 0.0);
    let d = spec.derived().unwrap();
    let s = 0.45;
    spec.coefficients.k1 = SineProfile::constant(1.0 / d.lambda(s));
    spec.q0 = TimePoly::new(vec![1.0]);
    let (reduced, mesh, cache) = setup(&spec, 16, 8, 6);
    let v = reconstruct_velocities(&spec, &reduced, &cache, &mesh, 8).unwrap();
    for (vx, wx) in v.x_total.iter().zip(&v.x_water) {
        assert!((vx - 1.0).abs() < 1e-12);
        assert!((wx - d.b(s)).abs() < 1e-12);
    }
    assert!(v.r_total.iter().chain(&v.r_water).all(|x| *x == 0.0));
}

#[test]
fn oil_and_water_velocities_add_up() {
    for (a, b) in [(1.0, 0.0), (2.0, 0.0), (2.0, 1.0)] {
        let spec = common::spec(a, b);
        let (reduced, mesh, cache) = setup(&spec, 20, 10, 8);
        let approx = reconstruct(&spec, &reduced, &cache, &mesh).unwrap();
        for v in &approx.velocity {
            for ((t, w), o) in v.x_total.iter().zip(&v.x_water).zip(&v.x_oil) {
                assert!((w + o - t).abs() <= 1e-15 * t.abs().max(1.0));
            }
            for ((t, w), o) in v.r_total.iter().zip(&v.r_water).zip(&v.r_oil) {
                assert!((w + o - t).abs() <= 1e-15 * t.abs().max(1.0));
            }
        }
    }
}

#[test]
fn nonzero_beta_has_no_transverse_velocity() {
    for (a, b) in [(1.0, 1.0), (1.0, -0.5), (2.0, 1.0)] {
        let spec = common::spec(a, b);
        let (reduced, mesh, cache) = setup(&spec, 20, 10, 8);
        for n in 1..=10 {
            let v = reconstruct_velocities(&spec, &reduced, &cache, &mesh, n).unwrap();
            assert!(v.r_total.iter().all(|x| *x == 0.0));
        }
    }
    let spec = common::spec(1.0, 0.0);
    let (reduced, mesh, cache) = setup(&spec, 20, 10, 8);
    let v = reconstruct_velocities(&spec, &reduced, &cache, &mesh, 10).unwrap();
    assert!(v.r_total.iter().any(|x| x.abs() > 1e-6));
}

#[test]
fn phase_pressure_examples() {
    let lin = PhaseClosures::corey(
        2.0,
        2.0,
        1.0,
        1.0,
        Capillary::Linear {
            entry_pressure: 1.0,
        },
    )
    .build()
    .unwrap();
    let (pw, po) = reconstruct_phase_pressures(&[0.5; 4], &[0.3, -1.0, 2.0, 0.0], &lin).unwrap();
    for (w, o) in pw.iter().zip(&po) {
        assert!((o - w - 0.5).abs() < 1e-14);
    }
    // symmetric Corey: shift(1) = −1/2
    assert!((lin.reduced_shift(1.0) + 0.5).abs() < 1e-10);
    let (pw, _) = reconstruct_phase_pressures(&[1.0 - 1e-12], &[0.7], &lin).unwrap();
    assert!((pw[0] - 1.2).abs() < 1e-9);
    assert!(reconstruct_phase_pressures(&[1.0], &[0.0], &lin).is_err());
    assert!(reconstruct_phase_pressures(&[0.5, 0.5], &[0.0], &lin).is_err());
}

#[test]
fn phase_pressure_round_trip() {
    let d = common::spec(1.0, 0.0).derived().unwrap();
    let s: Vec<f64> = (1..50).map(|i| i as f64 / 50.0).collect();
    let p: Vec<f64> = s.iter().map(|v| (3.0 * v).sin()).collect();
    let (pw, _) = reconstruct_phase_pressures(&s, &p, &d).unwrap();
    for ((w, sv), pv) in pw.iter().zip(&s).zip(&p) {
        assert!((w + d.reduced_shift(*sv) - pv).abs() < 1e-10);
    }
}

#[test]
fn unsupported_or_incomplete_inputs_are_rejected() {
    let spec = common::spec(2.0, 0.0);
    let (mut reduced, mesh, cache) = setup(&spec, 20, 10, 8);
    reduced.corrector = None;
    assert!(assemble_state(&spec, &reduced, &cache, &mesh, 1).is_err());
    let other = AxisymMesh::new(20, 6, 1.0, 0.1).unwrap();
    let case1 = common::spec(1.0, 0.0);
    let (r1, _, _) = setup(&case1, 20, 10, 8);
    assert!(assemble_state(&case1, &r1, &cache, &other, 1).is_err());
}

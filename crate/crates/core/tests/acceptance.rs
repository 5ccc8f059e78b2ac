//! Acceptance suite: runs every acceptance criterion at its stated
//! tolerance and prints one PASS/FAIL line per criterion. The process exits
//! with a failure status if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thinflow::cell::{solve_cell, DiskMesh};
use thinflow::constitutive::{Capillary, PhaseClosures, SAMPLES};
use thinflow::problem::{
    classify, validate_problem, Coefficients, Geometry, LateralFlow, ProblemSpec, Regime,
    SaturationData, SineProfile, TimePoly, UnsupportedReason,
};
use thinflow::reconstruct::{reconstruct, CellCache};
use thinflow::reduced1d::{face_fields, solve_limit, solve_linearized, Grid1D};
use thinflow::reference::{solve_reference, velocity_field, AxisymMesh};
use thinflow::verify::{
    reduced_solution, sweep, NormId, NormKind, Quantity, RateReport, SweepConfig,
};

/// Longitudinal cells and time steps of the rate sweeps.
const SWEEP_N: usize = 128;
/// Rings of the reference mesh in the rate sweeps.
const SWEEP_RINGS: usize = 32;

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = (bool, String);

fn run(id: usize, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (mut ok, mut detail) = match res {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    if let Some(l) = limit {
        if elapsed > l {
            ok = false;
            detail.push_str(&format!("; runtime limit {:.0?} exceeded", l));
        }
    }
    println!(
        "{} criterion {id:2} [{title}] ({:.2} s): {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn sweep_config() -> SweepConfig {
    SweepConfig {
        n_x: SWEEP_N,
        n_t: SWEEP_N,
        n_r: SWEEP_RINGS,
        ..Default::default()
    }
}

fn slopes_at_least(report: &RateReport, norms: &[NormId], min: f64) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for &id in norms {
        match report.rate(id) {
            Some(row) => {
                ok &= row.fit.slope >= min;
                parts.push(format!("{id} {:.3}", row.fit.slope));
            }
            None => {
                ok = false;
                parts.push(format!("{id} missing"));
            }
        }
    }
    (ok, format!("slopes {} (need >= {min})", parts.join(", ")))
}

fn state_norms(report: &RateReport) -> Vec<NormId> {
    report
        .rates
        .iter()
        .map(|r| r.norm)
        .filter(|n| matches!(n.quantity, Quantity::Pressure | Quantity::Saturation))
        .collect()
}

// ---------------------------------------------------------------------------

fn cell_analytic() -> Outcome {
    let identity = |_: f64, _: f64| [[1.0, 0.0], [0.0, 1.0]];
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let mesh = DiskMesh::new(n, n).unwrap();
            let sol = solve_cell(&mesh, identity, |_, _| 2.0, |_| 1.0).unwrap();
            let mut err = 0.0f64;
            for i in 0..mesh.n_r {
                let r = mesh.radius(i);
                for j in 0..mesh.n_theta {
                    err = err.max((sol.values[mesh.index(i, j)] - (0.25 - 0.5 * r * r)).abs());
                }
            }
            err
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = errors[2] <= 1e-5 && ratios.iter().all(|r| *r >= 3.5);
    (
        ok,
        format!(
            "max node error at 64 = {:.3e} (need <= 1e-5), ratios {:?} (need >= 3.5)",
            errors[2],
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn reduced_mms() -> Outcome {
    let space: Vec<f64> = [(20, 100), (40, 400), (80, 1600), (160, 6400)]
        .iter()
        .map(|&(nx, nt)| common::mms::final_error(nx, nt))
        .collect();
    let time: Vec<f64> = [10, 20, 40, 80]
        .iter()
        .map(|&nt| common::mms::final_error(400, nt))
        .collect();
    let orders = |e: &[f64]| -> Vec<f64> { e.windows(2).map(|w| (w[0] / w[1]).log2()).collect() };
    let (so, to) = (orders(&space), orders(&time));
    let ok = so.iter().all(|o| *o >= 1.8) && to.iter().all(|o| *o >= 0.9);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|o| format!("{o:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    (
        ok,
        format!(
            "spatial orders [{}] (need >= 1.8), temporal orders [{}] (need >= 0.9)",
            fmt(&so),
            fmt(&to)
        ),
    )
}

/// Random admissible problem with exponents drawn from one regime class.
fn random_spec(rng: &mut ChaCha8Rng, class: usize) -> ProblemSpec {
    loop {
        let (alpha, beta) = match class {
            0 => (1.0, 0.0),
            1 => (
                1.0,
                [-1.0, -0.5, 0.5, 1.0, 1.5][rng.random_range(0..5)] * rng.random_range(0.5..1.0),
            ),
            2 => (rng.random_range(1.3..3.0), 0.0),
            _ => {
                let a: f64 = rng.random_range(1.3..3.0);
                let b = if rng.random_bool(0.5) {
                    rng.random_range(0.2..1.5f64.min(a + 0.8))
                } else {
                    rng.random_range(-1.0..-0.2)
                };
                (a, b)
            }
        };
        let capillary = if rng.random_bool(0.5) {
            Capillary::Linear {
                entry_pressure: rng.random_range(0.2..1.0),
            }
        } else {
            Capillary::Exponential {
                entry_pressure: rng.random_range(0.2..1.0),
                decay: rng.random_range(0.5..2.0),
            }
        };
        let delta = 0.1;
        let a = delta + rng.random_range(0.0..0.1);
        let b = 1.0 - delta - rng.random_range(0.0..0.1);
        let spec = ProblemSpec {
            geometry: Geometry {
                length: 1.0,
                epsilon: rng.random_range(0.05..0.2),
                horizon: 1.0,
            },
            closures: PhaseClosures::corey(
                rng.random_range(2.0..4.0),
                rng.random_range(2.0..4.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..4.0),
                capillary,
            ),
            coefficients: Coefficients {
                k1: SineProfile {
                    base: rng.random_range(0.5..2.0),
                    amplitude: rng.random_range(0.0..0.3),
                },
                k_perp: SineProfile {
                    base: rng.random_range(0.5..2.0),
                    amplitude: rng.random_range(0.0..0.3),
                },
                k_perp_radial: 0.0,
                swirl: 0.0,
                porosity: SineProfile {
                    base: rng.random_range(0.15..0.5),
                    amplitude: rng.random_range(0.0..0.3),
                },
            },
            q0: TimePoly::new(vec![rng.random_range(0.5..2.0)]),
            q_ell: TimePoly::new(vec![0.0]),
            saturation: SaturationData {
                base: rng.random_range(0.2..0.6),
                bump: rng.random_range(0.0..0.2),
                rise_left: rng.random_range(0.0..0.2),
                rise_right: rng.random_range(0.0..0.1),
                rise_time: TimePoly::new(vec![0.0, 1.0]),
            },
            lateral: LateralFlow {
                amplitude: rng.random_range(-2.0..2.0),
                support: (a, b),
                time: TimePoly::new(vec![1.0]),
                cos_mode: 0.0,
            },
            support_delta: delta,
            alpha,
            beta,
        };
        if validate_problem(&spec).is_ok() {
            return spec;
        }
    }
}

fn maximum_principle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst_low = f64::INFINITY;
    let mut worst_high = f64::INFINITY;
    let mut failures = Vec::new();
    let mut runs = 0;
    for class in 0..4 {
        for k in 0..10 {
            let spec = random_spec(&mut rng, class);
            let (lo, hi) = spec.saturation_bounds();
            let (n, n_r) = (40, 32);
            let grid = Grid1D::for_spec(&spec, n, n).unwrap();
            let mesh = AxisymMesh::new(n, n_r, 1.0, spec.geometry.epsilon).unwrap();
            let fields = reduced_solution(&spec, grid)
                .map(|r| r.s0)
                .and_then(|s0| solve_reference(&spec, mesh, grid).map(|f| (s0, f.s)));
            match fields {
                Ok((s0, s_ref)) => {
                    for level in s0.iter().chain(&s_ref) {
                        for v in level {
                            worst_low = worst_low.min(v - (lo - 1e-6));
                            worst_high = worst_high.min((hi + 1e-3) - v);
                        }
                    }
                }
                Err(e) => failures.push(format!("class {class} config {k}: {e}")),
            }
            runs += 1;
        }
    }
    let ok = failures.is_empty() && worst_low >= 0.0 && worst_high >= 0.0;
    (
        ok,
        format!(
            "{runs} configs, smallest margin below {worst_low:.3e}, above {worst_high:.3e}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; errors: {}", failures.join("; "))
            }
        ),
    )
}

fn case1_identity() -> Outcome {
    let spec = common::spec(1.0, 0.0);
    let n = 40;
    let grid = Grid1D::for_spec(&spec, n, 20).unwrap();
    let reduced = reduced_solution(&spec, grid).unwrap();
    let mesh = AxisymMesh::new(n, 16, 1.0, 0.1).unwrap();
    let cache = CellCache::build(&spec, &mesh).unwrap();
    let approx = reconstruct(&spec, &reduced, &cache, &mesh).unwrap();
    let reference = solve_reference(&spec, mesh, grid).unwrap();
    let mut worst = 0.0f64;
    let mut check = |t: &[f64], w: &[f64], o: &[f64]| {
        for ((t, w), o) in t.iter().zip(w).zip(o) {
            worst = worst.max((w + o - t).abs() / t.abs().max(1.0));
        }
    };
    for n in 1..=grid.n_t {
        let v = &approx.velocity[n - 1];
        check(&v.x_total, &v.x_water, &v.x_oil);
        check(&v.r_total, &v.r_water, &v.r_oil);
        let r = velocity_field(&spec, &reference, n).unwrap();
        check(&r.x_total, &r.x_water, &r.x_oil);
        check(&r.r_total, &r.r_water, &r.r_oil);
    }
    (
        worst <= 1e-15,
        format!("max relative |Vw + Vo - V| = {worst:.2e}"),
    )
}

fn closure_invariants() -> Outcome {
    let mut problems = Vec::new();
    for n_w in [2.0, 3.0, 4.0] {
        for n_o in [2.0, 3.0, 4.0] {
            let c = PhaseClosures::corey(
                n_w,
                n_o,
                1.0,
                2.0,
                Capillary::Linear {
                    entry_pressure: 0.5,
                },
            );
            match c.build() {
                Ok(d) => {
                    for p in d.audit(SAMPLES) {
                        problems.push(format!("({n_w}, {n_o}): {p}"));
                    }
                }
                Err(e) => problems.push(format!("({n_w}, {n_o}): {e}")),
            }
        }
    }
    (
        problems.is_empty(),
        if problems.is_empty() {
            format!("9 Corey families clean on {SAMPLES} samples")
        } else {
            problems.join("; ")
        },
    )
}

fn classifier_partition() -> Outcome {
    let mut bad = Vec::new();
    let mut counts = [0usize; 3];
    for i in 0..200 {
        for j in 0..200 {
            let alpha = 4.0 * i as f64 / 199.0;
            let beta = -2.0 + 6.0 * j as f64 / 199.0;
            let in1 = alpha == 1.0 && beta < 2.0;
            let in2 = alpha > beta - 1.0 && alpha > 1.0;
            let r = classify(alpha, beta);
            let slot = match r {
                Regime::Case1 { .. } => 0,
                Regime::Case2 { .. } => 1,
                Regime::Unsupported { .. } => 2,
            };
            counts[slot] += 1;
            let expected = if in1 {
                0
            } else if in2 {
                1
            } else {
                2
            };
            if in1 && in2 || slot != expected {
                bad.push(format!("({alpha}, {beta})"));
            }
        }
    }
    // boundary lines α = 1, β = 2 and α = β − 1
    for k in 0..=40 {
        let b = -2.0 + 0.1 * k as f64;
        let on_one = classify(1.0, b);
        let ok = if b < 2.0 {
            on_one.is_case1()
        } else {
            matches!(
                on_one,
                Regime::Unsupported {
                    reason: UnsupportedReason::CriticalLine,
                    ..
                }
            )
        };
        if !ok {
            bad.push(format!("alpha = 1, beta = {b}"));
        }
        let b2 = 2.0 + 0.05 * k as f64;
        if b2 > 2.0
            && !matches!(
                classify(b2 - 1.0, b2),
                Regime::Unsupported {
                    reason: UnsupportedReason::DualPorosity,
                    ..
                }
            )
        {
            bad.push(format!("dual line beta = {b2}"));
        }
        let a = 1.0 + 0.05 * (k + 1) as f64;
        if !matches!(classify(a, 1.999), Regime::Case2 { .. }) {
            bad.push(format!("({a}, 1.999)"));
        }
    }
    (
        bad.is_empty(),
        format!(
            "40000 grid points ({} Case1, {} Case2, {} Unsupported) and 123 points on the boundary lines; {} mismatches",
            counts[0],
            counts[1],
            counts[2],
            bad.len()
        ),
    )
}

fn vanishing_corrector() -> Outcome {
    let spec = common::case1_spec(0.0);
    let grid = Grid1D::for_spec(&spec, 40, 20).unwrap();
    let mut base = solve_limit(&spec, grid).unwrap();
    let c = solve_linearized(&spec, &base, |_, _| 0.0).unwrap();
    let zero_state = c.p.iter().chain(&c.s).all(|v| v.iter().all(|x| *x == 0.0));
    base.corrector = Some(c);
    let mut zero_velocity = true;
    for n in 1..=grid.n_t {
        let f = face_fields(&spec, &base, n).unwrap();
        let (dv, db, dd) = f.corrector.unwrap();
        zero_velocity &= dv.iter().chain(&db).chain(&dd).all(|x| *x == 0.0);
    }
    (
        zero_state && zero_velocity,
        format!("pressure and saturation correctors zero: {zero_state}; velocity corrector zero: {zero_velocity}"),
    )
}

fn main() {
    let minutes = |m: u64| Some(Duration::from_secs(60 * m));
    let mut results = Vec::new();
    results.push(run(
        1,
        "cell analytic case",
        Some(Duration::from_secs(1)),
        cell_analytic,
    ));
    results.push(run(
        2,
        "reduced manufactured solution",
        Some(Duration::from_secs(30)),
        reduced_mms,
    ));
    results.push(run(3, "maximum principle", minutes(5), maximum_principle));

    let cfg = sweep_config();
    let mut case1: Option<RateReport> = None;
    results.push(run(4, "rate alpha=1 beta=0", minutes(15), || {
        let rep = sweep(&common::spec(1.0, 0.0), &cfg).unwrap();
        let out = slopes_at_least(
            &rep,
            &[
                NormId::new(Quantity::Saturation, NormKind::MaxTL2),
                NormId::new(Quantity::Pressure, NormKind::MaxTH1),
            ],
            1.7,
        );
        case1 = Some(rep);
        out
    }));
    results.push(run(5, "rate alpha=1 beta=1", minutes(15), || {
        let rep = sweep(&common::spec(1.0, 1.0), &cfg).unwrap();
        let energy: Vec<NormId> = rep
            .rates
            .iter()
            .map(|r| r.norm)
            .filter(|n| matches!(n.kind, NormKind::MaxTEnergy | NormKind::L2TEnergy))
            .collect();
        slopes_at_least(&rep, &energy, 0.35)
    }));
    results.push(run(6, "rate alpha=2 beta=0", minutes(15), || {
        let rep = sweep(&common::spec(2.0, 0.0), &cfg).unwrap();
        slopes_at_least(&rep, &state_norms(&rep), 1.7)
    }));
    results.push(run(7, "rate alpha=2 beta=1", minutes(15), || {
        let rep = sweep(&common::spec(2.0, 1.0), &cfg).unwrap();
        slopes_at_least(&rep, &state_norms(&rep), 0.7)
    }));
    results.push(run(8, "cross-section means", None, || match &case1 {
        Some(rep) => slopes_at_least(
            &rep,
            &[NormId::new(Quantity::MeanPressure, NormKind::Sup)],
            1.7,
        ),
        None => (false, "sweep of criterion 4 unavailable".into()),
    }));
    results.push(run(9, "velocities", None, || {
        let Some(rep) = &case1 else {
            return (false, "sweep of criterion 4 unavailable".into());
        };
        let norms: Vec<NormId> = rep
            .rates
            .iter()
            .map(|r| r.norm)
            .filter(|n| n.quantity.is_velocity())
            .collect();
        let (a, da) = slopes_at_least(rep, &norms, 1.7);
        let (b, db) = case1_identity();
        (a && b, format!("{da}; {db}"))
    }));
    results.push(run(
        10,
        "closure invariants",
        Some(Duration::from_secs(1)),
        closure_invariants,
    ));
    results.push(run(
        11,
        "regime classifier",
        Some(Duration::from_secs(1)),
        classifier_partition,
    ));
    results.push(run(12, "vanishing corrector", None, vanishing_corrector));

    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

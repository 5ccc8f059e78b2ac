//! Problem specifications shared by the integration tests.

#![allow(dead_code)]

use thinflow::constitutive::{Capillary, PhaseClosures};
use thinflow::problem::{
    Coefficients, Geometry, LateralFlow, ProblemSpec, SaturationData, SineProfile, TimePoly,
};

/// Nontrivial thin-cylinder problem with the given exponents.
pub fn spec(alpha: f64, beta: f64) -> ProblemSpec {
    ProblemSpec {
        geometry: Geometry {
            length: 1.0,
            epsilon: 0.1,
            horizon: 1.0,
        },
        closures: PhaseClosures::corey(
            2.0,
            2.0,
            1.0,
            2.0,
            Capillary::Linear {
                entry_pressure: 0.5,
            },
        ),
        coefficients: Coefficients {
            k1: SineProfile {
                base: 1.0,
                amplitude: 0.2,
            },
            k_perp: SineProfile::constant(1.0),
            k_perp_radial: 0.0,
            swirl: 0.0,
            porosity: SineProfile::constant(0.3),
        },
        q0: TimePoly::new(vec![1.0]),
        q_ell: TimePoly::new(vec![0.0]),
        saturation: SaturationData {
            base: 0.4,
            bump: 0.1,
            rise_left: 0.1,
            rise_right: 0.0,
            rise_time: TimePoly::new(vec![0.0, 1.0]),
        },
        lateral: LateralFlow {
            amplitude: 1.0,
            support: (0.2, 0.8),
            time: TimePoly::new(vec![1.0]),
            cos_mode: 0.0,
        },
        support_delta: 0.1,
        alpha,
        beta,
    }
}

/// Case 1 problem with transverse exponent `beta`.
pub fn case1_spec(beta: f64) -> ProblemSpec {
    spec(1.0, beta)
}

/// Constant data: no lateral flow, equal end pressures, uniform saturation.
pub fn constant_spec(alpha: f64, beta: f64) -> ProblemSpec {
    let mut s = spec(alpha, beta);
    s.lateral = LateralFlow::zero();
    s.q0 = TimePoly::new(vec![0.0]);
    s.q_ell = TimePoly::new(vec![0.0]);
    s.saturation = SaturationData::constant(0.45);
    s
}

/// Manufactured saturation `s*(x, t) = s̄ + 0.1 sin(πx/ℓ) t²` for the limit
/// problem without lateral flow, together with the forcing that makes it
/// exact.
pub mod mms {
    use std::f64::consts::PI;
    use std::sync::Mutex;

    use thinflow::constitutive::DerivedClosures;
    use thinflow::problem::{LateralFlow, ProblemSpec, SaturationData, TimePoly};
    use thinflow::quadrature::adaptive_simpson;
    use thinflow::reduced1d::{solve_limit_with, Grid1D, LimitOptions};

    pub const BASE: f64 = 0.4;
    pub const AMP: f64 = 0.1;

    pub fn spec() -> ProblemSpec {
        let mut s = super::case1_spec(0.0);
        s.lateral = LateralFlow::zero();
        s.q0 = TimePoly::new(vec![1.0]);
        s.q_ell = TimePoly::new(vec![0.0]);
        s.saturation = SaturationData::constant(BASE);
        s
    }

    pub fn exact(x: f64, t: f64, l: f64) -> f64 {
        BASE + AMP * (PI * x / l).sin() * t * t
    }

    /// Forcing `φ s_t + b'(s) s_x V − ∂ₓ(Λ k₁ s_x)` with `V(t) = −C(t)`
    /// and `C = (q_ℓ − q₀)/∫ 1/(λ(s*) k₁)`.
    pub struct Forcing {
        spec: ProblemSpec,
        d: DerivedClosures,
        cache: Mutex<(f64, f64)>,
    }

    impl Forcing {
        pub fn new(spec: &ProblemSpec) -> Self {
            Self {
                spec: spec.clone(),
                d: spec.derived().unwrap(),
                cache: Mutex::new((f64::NAN, 0.0)),
            }
        }

        fn velocity(&self, t: f64) -> f64 {
            let mut c = self.cache.lock().unwrap();
            if c.0 != t {
                let l = self.spec.geometry.length;
                let inv = |x: f64| 1.0 / (self.d.lambda(exact(x, t, l)) * self.spec.k1(x));
                let r = adaptive_simpson(&inv, 0.0, l, 1e-14).unwrap();
                let cc = (self.spec.q_ell.value(t) - self.spec.q0.value(t)) / r;
                *c = (t, -cc);
            }
            c.1
        }

        pub fn eval(&self, x: f64, t: f64) -> f64 {
            let l = self.spec.geometry.length;
            let k = PI / l;
            let s = exact(x, t, l);
            let st = 2.0 * AMP * (k * x).sin() * t;
            let sx = AMP * k * (k * x).cos() * t * t;
            let sxx = -AMP * k * k * (k * x).sin() * t * t;
            let c = self.d.state(s);
            let k1 = self.spec.k1(x);
            let p = self.spec.coefficients.k1;
            let k1x = p.base * p.amplitude * k * (k * x).cos();
            let diff = c.d_cap_diff * sx * sx * k1 + c.cap_diff * (k1x * sx + k1 * sxx);
            self.spec.porosity(x) * st + c.d_b * sx * self.velocity(t) - diff
        }
    }

    /// Max nodal error at the final time on an `n_x × n_t` grid.
    pub fn final_error(n_x: usize, n_t: usize) -> f64 {
        let spec = spec();
        let f = Forcing::new(&spec);
        let g = |x: f64, t: f64| f.eval(x, t);
        let grid = Grid1D::for_spec(&spec, n_x, n_t).unwrap();
        let hi = BASE + AMP * spec.geometry.horizon.powi(2);
        let sol = solve_limit_with(
            &spec,
            grid,
            LimitOptions {
                forcing: Some(&g),
                bounds: Some((BASE, hi)),
            },
        )
        .unwrap();
        let t = grid.horizon;
        let last = sol.s0.last().unwrap();
        (0..=n_x)
            .map(|j| (last[j] - exact(grid.x(j), t, grid.length)).abs())
            .fold(0.0, f64::max)
    }
}

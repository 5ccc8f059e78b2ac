//! Phase closures (relative permeabilities, viscosities, capillary pressure)
//! and the derived fractional-flow quantities: phase and total mobilities,
//! fractional flow `b`, capillary diffusion `Λ`, the reduced-pressure shift
//! and the Kirchhoff potential of `Λ`.

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, HermiteTable};

/// Number of uniform samples used by every invariant check.
pub const SAMPLES: usize = 1001;

/// Panels of the cubic Hermite tables for the shift and Kirchhoff integrals.
const TABLE_PANELS: usize = 4096;

/// Relative-permeability family, written in terms of the phase's own
/// saturation (`S` for water, `1 - S` for oil).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelPerm {
    /// Corey power law `k = u^n`.
    Corey {
        /// Exponent `n >= 2`.
        exponent: f64,
    },
}

impl RelPerm {
    /// Value and first two derivatives at phase saturation `u`.
    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        match *self {
            RelPerm::Corey { exponent: n } => {
                let u = u.clamp(0.0, 1.0);
                let d2 = if n == 2.0 {
                    2.0
                } else {
                    n * (n - 1.0) * u.powf(n - 2.0)
                };
                (u.powf(n), n * u.powf(n - 1.0), d2)
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            RelPerm::Corey { exponent } => {
                if !(exponent.is_finite() && exponent >= 2.0) {
                    return Err(Error::InvalidParameter {
                        name: name.into(),
                        reason: format!("Corey exponent must be >= 2, got {exponent}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Non-singular capillary-pressure family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capillary {
    /// `p_c(S) = p_e (1 - S)`.
    Linear {
        /// Entry pressure `p_e > 0`.
        entry_pressure: f64,
    },
    /// `p_c(S) = p_e (exp(-γ S) - exp(-γ))`.
    Exponential {
        /// Entry pressure `p_e > 0`.
        entry_pressure: f64,
        /// Decay rate `γ > 0`.
        decay: f64,
    },
}

impl Capillary {
    /// Value and first two derivatives at saturation `s`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            Capillary::Linear { entry_pressure: p } => (p * (1.0 - s), -p, 0.0),
            Capillary::Exponential {
                entry_pressure: p,
                decay: g,
            } => {
                let e = (-g * s).exp();
                (p * (e - (-g).exp()), -p * g * e, p * g * g * e)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| Error::InvalidParameter {
            name: name.into(),
            reason: format!("must be positive and finite, got {v}"),
        };
        match *self {
            Capillary::Linear { entry_pressure } => {
                if !(entry_pressure.is_finite() && entry_pressure > 0.0) {
                    return Err(bad("entry_pressure", entry_pressure));
                }
            }
            Capillary::Exponential {
                entry_pressure,
                decay,
            } => {
                if !(entry_pressure.is_finite() && entry_pressure > 0.0) {
                    return Err(bad("entry_pressure", entry_pressure));
                }
                if !(decay.is_finite() && decay > 0.0) {
                    return Err(bad("capillary_decay", decay));
                }
            }
        }
        Ok(())
    }
}

/// Phase closures of the two-phase model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseClosures {
    /// Water relative permeability, as a function of `S`.
    pub relperm_w: RelPerm,
    /// Oil relative permeability, as a function of `1 - S`.
    pub relperm_o: RelPerm,
    /// Water viscosity.
    pub visc_w: f64,
    /// Oil viscosity.
    pub visc_o: f64,
    /// Capillary pressure.
    pub capillary: Capillary,
}

impl PhaseClosures {
    /// Corey closures with the given exponents and viscosities.
    pub fn corey(n_w: f64, n_o: f64, visc_w: f64, visc_o: f64, capillary: Capillary) -> Self {
        Self {
            relperm_w: RelPerm::Corey { exponent: n_w },
            relperm_o: RelPerm::Corey { exponent: n_o },
            visc_w,
            visc_o,
            capillary,
        }
    }

    /// Water relative permeability and its derivatives with respect to `S`.
    pub fn kr_w(&self, s: f64) -> (f64, f64, f64) {
        self.relperm_w.eval(s)
    }

    /// Oil relative permeability and its derivatives with respect to `S`.
    pub fn kr_o(&self, s: f64) -> (f64, f64, f64) {
        let (k, d1, d2) = self.relperm_o.eval(1.0 - s);
        (k, -d1, d2)
    }

    /// Checks the structural assumptions on a uniform grid of
    /// [`SAMPLES`] points.
    ///
    /// Strict monotonicity of the relative permeabilities is required at
    /// interior samples; at the end points, where power laws have a
    /// vanishing derivative, only the non-strict sign is required.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("visc_w", self.visc_w), ("visc_o", self.visc_o)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("viscosity must be positive, got {v}"),
                });
            }
        }
        self.relperm_w.validate("n_w")?;
        self.relperm_o.validate("n_o")?;
        self.capillary.validate()?;
        let fail = |invariant: &str, s: f64| {
            Err(Error::Closure {
                invariant: invariant.into(),
                sample: s,
            })
        };
        if self.kr_w(0.0).0 != 0.0 {
            return fail("relperm_w(0) = 0", 0.0);
        }
        if self.kr_o(1.0).0 != 0.0 {
            return fail("relperm_o(1) = 0", 1.0);
        }
        for i in 0..SAMPLES {
            let s = i as f64 / (SAMPLES - 1) as f64;
            let interior = i > 0 && i + 1 < SAMPLES;
            let (kw, dkw, _) = self.kr_w(s);
            let (ko, dko, _) = self.kr_o(s);
            let (_, dpc, _) = self.capillary.eval(s);
            if !(kw >= 0.0 && ko >= 0.0) {
                return fail("relative permeabilities non-negative", s);
            }
            if (interior && dkw <= 0.0) || dkw < 0.0 {
                return fail("relperm_w' > 0", s);
            }
            if (interior && dko >= 0.0) || dko > 0.0 {
                return fail("relperm_o' < 0", s);
            }
            if !(dpc < 0.0) {
                return fail("capillary' < 0", s);
            }
        }
        Ok(())
    }

    /// Validates the closures and builds the derived quantities.
    pub fn build(&self) -> Result<DerivedClosures> {
        self.validate()?;
        DerivedClosures::new(*self)
    }
}

/// Point values of the mobility-related closures at one saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureState {
    /// Water mobility `λ_w`.
    pub lambda_w: f64,
    /// Oil mobility `λ_o`.
    pub lambda_o: f64,
    /// Total mobility `λ`.
    pub lambda: f64,
    /// `dλ_w/dS`.
    pub d_lambda_w: f64,
    /// `dλ_o/dS`.
    pub d_lambda_o: f64,
    /// `dλ/dS`.
    pub d_lambda: f64,
    /// Fractional flow `b = λ_w/λ`.
    pub b: f64,
    /// `db/dS`.
    pub d_b: f64,
    /// Capillary diffusion `Λ = -(λ_w λ_o/λ) p_c'`.
    pub cap_diff: f64,
    /// `dΛ/dS`.
    pub d_cap_diff: f64,
}

/// Closures derived from [`PhaseClosures`]; immutable after construction.
#[derive(Debug, Clone)]
pub struct DerivedClosures {
    closures: PhaseClosures,
    /// Lower bound of the total mobility on the sampling grid.
    pub c1: f64,
    /// Upper bound of the total mobility on the sampling grid.
    pub c2: f64,
    shift: HermiteTable,
    kirchhoff: HermiteTable,
}

impl DerivedClosures {
    fn new(closures: PhaseClosures) -> Result<Self> {
        let mut c1 = f64::INFINITY;
        let mut c2 = 0.0f64;
        for i in 0..SAMPLES {
            let s = i as f64 / (SAMPLES - 1) as f64;
            let l = state_of(&closures, s).lambda;
            c1 = c1.min(l);
            c2 = c2.max(l);
        }
        if !(c1 > 0.0) {
            return Err(Error::Closure {
                invariant: "total mobility bounded below by c1 > 0".into(),
                sample: c1,
            });
        }
        let shift = HermiteTable::antiderivative(|s| shift_integrand(&closures, s), TABLE_PANELS);
        let kirchhoff =
            HermiteTable::antiderivative(|s| state_of(&closures, s).cap_diff, TABLE_PANELS);
        Ok(Self {
            closures,
            c1,
            c2,
            shift,
            kirchhoff,
        })
    }

    /// The underlying phase closures.
    pub fn closures(&self) -> &PhaseClosures {
        &self.closures
    }

    /// All mobility quantities at saturation `s`.
    #[inline]
    pub fn state(&self, s: f64) -> ClosureState {
        state_of(&self.closures, s)
    }

    /// Water mobility.
    pub fn lambda_w(&self, s: f64) -> f64 {
        self.state(s).lambda_w
    }

    /// Oil mobility.
    pub fn lambda_o(&self, s: f64) -> f64 {
        self.state(s).lambda_o
    }

    /// Total mobility.
    pub fn lambda(&self, s: f64) -> f64 {
        self.state(s).lambda
    }

    /// Fractional flow.
    pub fn b(&self, s: f64) -> f64 {
        self.state(s).b
    }

    /// Capillary diffusion coefficient.
    pub fn cap_diff(&self, s: f64) -> f64 {
        self.state(s).cap_diff
    }

    /// Capillary pressure `p_c(S)`.
    pub fn capillary(&self, s: f64) -> f64 {
        self.closures.capillary.eval(s).0
    }

    /// Reduced-pressure shift `∫₀ˢ (λ_o/λ) p_c'` from the precomputed table.
    pub fn reduced_shift(&self, s: f64) -> f64 {
        self.shift.eval(s)
    }

    /// Kirchhoff potential `∫₀ˢ Λ` from the precomputed table.
    pub fn kirchhoff(&self, s: f64) -> f64 {
        self.kirchhoff.eval(s)
    }

    /// Smallest ratio `Λ(s)/b'(s)` over `[lo, hi]` (sampled).
    ///
    /// Used to decide when a centred advective flux keeps the saturation
    /// scheme monotone.
    pub fn diffusion_advection_ratio(&self, lo: f64, hi: f64) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..SAMPLES {
            let s = lo + (hi - lo) * i as f64 / (SAMPLES - 1) as f64;
            let st = self.state(s);
            if st.d_b > 0.0 {
                m = m.min(st.cap_diff / st.d_b);
            }
        }
        m.max(0.0)
    }

    /// Checks every invariant of the derived closures on a uniform grid of
    /// `samples` points and returns a description of each violation.
    pub fn audit(&self, samples: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.c1 > 0.0) {
            out.push(format!("c1 = {} is not positive", self.c1));
        }
        let mut prev_b = f64::NEG_INFINITY;
        for i in 0..samples {
            let s = i as f64 / (samples - 1) as f64;
            let st = self.state(s);
            let interior = i > 0 && i + 1 < samples;
            if !(self.c1 <= st.lambda * (1.0 + 1e-14) && st.lambda <= self.c2 * (1.0 + 1e-14)) {
                out.push(format!("lambda({s}) = {} outside [c1, c2]", st.lambda));
            }
            if !(0.0 <= st.lambda_w && st.lambda_w <= self.c2 * (1.0 + 1e-14)) {
                out.push(format!("lambda_w({s}) = {} outside [0, c2]", st.lambda_w));
            }
            if !(0.0 <= st.lambda_o && st.lambda_o <= self.c2 * (1.0 + 1e-14)) {
                out.push(format!("lambda_o({s}) = {} outside [0, c2]", st.lambda_o));
            }
            if !(0.0..=1.0).contains(&st.b) {
                out.push(format!("b({s}) = {} outside [0, 1]", st.b));
            }
            if st.b < prev_b || (interior && !(st.d_b > 0.0)) {
                out.push(format!("b not strictly increasing at {s}"));
            }
            prev_b = st.b;
            if interior && !(st.cap_diff > 0.0) {
                out.push(format!("Lambda({s}) = {} not positive", st.cap_diff));
            }
            let (_, dpc, _) = self.closures.capillary.eval(s);
            let lhs = st.cap_diff * st.lambda;
            let rhs = -st.lambda_w * st.lambda_o * dpc;
            if (lhs - rhs).abs() > 1e-12 * rhs.abs().max(f64::MIN_POSITIVE) && lhs != rhs {
                out.push(format!("Lambda*lambda identity fails at {s}"));
            }
        }
        let b0 = self.b(0.0);
        let b1 = self.b(1.0);
        if b0 != 0.0 {
            out.push(format!("b(0) = {b0}"));
        }
        if b1 != 1.0 {
            out.push(format!("b(1) = {b1}"));
        }
        let l0 = self.cap_diff(0.0);
        let l1 = self.cap_diff(1.0);
        if l0 != 0.0 {
            out.push(format!("Lambda(0) = {l0}"));
        }
        if l1 != 0.0 {
            out.push(format!("Lambda(1) = {l1}"));
        }
        out
    }
}

fn shift_integrand(c: &PhaseClosures, s: f64) -> f64 {
    let st = state_of(c, s);
    st.lambda_o / st.lambda * c.capillary.eval(s).1
}

fn state_of(c: &PhaseClosures, s: f64) -> ClosureState {
    let (kw, dkw, _) = c.kr_w(s);
    let (ko, dko, _) = c.kr_o(s);
    let (_, dpc, d2pc) = c.capillary.eval(s);
    let lambda_w = kw / c.visc_w;
    let lambda_o = ko / c.visc_o;
    let d_lambda_w = dkw / c.visc_w;
    let d_lambda_o = dko / c.visc_o;
    let lambda = lambda_w + lambda_o;
    let d_lambda = d_lambda_w + d_lambda_o;
    let b = lambda_w / lambda;
    let d_b = (d_lambda_w * lambda - lambda_w * d_lambda) / (lambda * lambda);
    let g = lambda_w * lambda_o / lambda;
    let dg = (d_lambda_w * lambda_o + lambda_w * d_lambda_o) / lambda
        - lambda_w * lambda_o * d_lambda / (lambda * lambda);
    ClosureState {
        lambda_w,
        lambda_o,
        lambda,
        d_lambda_w,
        d_lambda_o,
        d_lambda,
        b,
        d_b,
        cap_diff: -g * dpc,
        d_cap_diff: -(dg * dpc + g * d2pc),
    }
}

/// Reduced-pressure shift `∫₀ˢ (λ_o/λ) p_c'` by adaptive quadrature.
pub fn reduced_pressure_shift(closures: &PhaseClosures, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter {
            name: "S".into(),
            reason: format!("saturation must lie in [0, 1], got {s}"),
        });
    }
    adaptive_simpson(&|x| shift_integrand(closures, x), 0.0, s, 1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric() -> PhaseClosures {
        PhaseClosures::corey(
            2.0,
            2.0,
            1.0,
            1.0,
            Capillary::Linear {
                entry_pressure: 1.0,
            },
        )
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = PhaseClosures::corey(
            3.0,
            2.5,
            0.7,
            1.9,
            Capillary::Exponential {
                entry_pressure: 0.4,
                decay: 2.0,
            },
        );
        let d = c.build().unwrap();
        let h = 1e-6;
        for i in 1..20 {
            let s = i as f64 / 20.0;
            let (a, b) = (d.state(s + h), d.state(s - h));
            let st = d.state(s);
            let fd = |p: f64, m: f64| (p - m) / (2.0 * h);
            assert!((fd(a.lambda, b.lambda) - st.d_lambda).abs() < 1e-7);
            assert!((fd(a.lambda_w, b.lambda_w) - st.d_lambda_w).abs() < 1e-7);
            assert!((fd(a.b, b.b) - st.d_b).abs() < 1e-7);
            assert!((fd(a.cap_diff, b.cap_diff) - st.d_cap_diff).abs() < 1e-7);
        }
    }

    #[test]
    fn table_shift_agrees_with_adaptive_quadrature() {
        let c = symmetric();
        let d = c.build().unwrap();
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            let q = reduced_pressure_shift(&c, s).unwrap();
            assert!((d.reduced_shift(s) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn small_corey_exponent_is_rejected() {
        let c = PhaseClosures::corey(
            1.5,
            2.0,
            1.0,
            1.0,
            Capillary::Linear {
                entry_pressure: 1.0,
            },
        );
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn non_positive_viscosity_is_rejected() {
        let c = PhaseClosures::corey(
            2.0,
            2.0,
            0.0,
            1.0,
            Capillary::Linear {
                entry_pressure: 1.0,
            },
        );
        assert!(c.validate().is_err());
    }
}

//! Thin-cylinder problem definition: geometry, coefficient fields, boundary
//! and initial data, the (α, β) regime classification and the
//! cross-section average of the lateral source.

use std::f64::consts::PI;
use std::fmt;

use crate::constitutive::{DerivedClosures, PhaseClosures};
use crate::error::{Error, Result};

/// Boundary points used for the perimeter quadrature of the lateral source.
pub const PERIMETER_POINTS: usize = 64;

/// Tolerance used to decide that (α, β) lies on a boundary line.
pub const LINE_TOL: f64 = 1e-12;

/// Thin-cylinder geometry with unit-disk cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Longitudinal extent ℓ.
    pub length: f64,
    /// Cross-section scale ε used by single runs.
    pub epsilon: f64,
    /// Final time T.
    pub horizon: f64,
}

/// Polynomial in `t` without constant term: `Σ c_k t^(k+1)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimePoly {
    /// Coefficients of `t, t², t³, …`.
    pub coeffs: Vec<f64>,
}

impl TimePoly {
    /// Polynomial with the given coefficients of `t, t², …`.
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Value at `t`.
    pub fn value(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| (acc + c) * t)
    }

    /// First derivative at `t`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (k + 1) as f64 * c * t.powi(k as i32))
            .sum()
    }
}

/// Longitudinal profile `base · (1 + amplitude · sin(π x/ℓ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineProfile {
    /// Value at the end cross-sections.
    pub base: f64,
    /// Relative mid-length variation.
    pub amplitude: f64,
}

impl SineProfile {
    /// Constant profile.
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            amplitude: 0.0,
        }
    }

    /// Value at `x` on a cylinder of length `length`.
    pub fn value(&self, x: f64, length: f64) -> f64 {
        self.base * (1.0 + self.amplitude * (PI * x / length).sin())
    }
}

/// Permeability and porosity fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// Longitudinal permeability `k₁(x)`.
    pub k1: SineProfile,
    /// Longitudinal part of the transverse permeability.
    pub k_perp: SineProfile,
    /// Radial factor: `k_⊥(x, ρ) = k_perp(x) (1 + k_perp_radial ρ²)`.
    pub k_perp_radial: f64,
    /// Tangential anisotropy of the cell tensor:
    /// `K = k_⊥ (I + swirl ρ² e_θ e_θᵀ)`.
    pub swirl: f64,
    /// Porosity `φ(x)`.
    pub porosity: SineProfile,
}

/// Initial and boundary saturation
/// `S⁰(x, t) = s̄ + σ_w w(x) + ρ(t) (σ₀ (1 - x/ℓ) + σ_ℓ x/ℓ)` with
/// `w(x) = sin⁴(π x/ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationData {
    /// Background saturation `s̄`.
    pub base: f64,
    /// Amplitude `σ_w` of the interior bump.
    pub bump: f64,
    /// Boundary rise `σ₀` at `x = 0`.
    pub rise_left: f64,
    /// Boundary rise `σ_ℓ` at `x = ℓ`.
    pub rise_right: f64,
    /// Time profile `ρ(t)` of the boundary rise.
    pub rise_time: TimePoly,
}

impl SaturationData {
    /// Constant saturation `s̄`.
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            bump: 0.0,
            rise_left: 0.0,
            rise_right: 0.0,
            rise_time: TimePoly::default(),
        }
    }

    /// `S⁰(x, t)`.
    pub fn value(&self, x: f64, t: f64, length: f64) -> f64 {
        let z = PI * x / length;
        let w = z.sin().powi(4);
        let lin = self.rise_left * (1.0 - x / length) + self.rise_right * x / length;
        self.base + self.bump * w + self.rise_time.value(t) * lin
    }

    /// `∂ₓS⁰`, `∂ₓₓS⁰` and `∂ₜS⁰`.
    pub fn derivatives(&self, x: f64, t: f64, length: f64) -> (f64, f64, f64) {
        let k = PI / length;
        let (s, c) = (k * x).sin_cos();
        let w1 = 4.0 * k * s.powi(3) * c;
        let w2 = 4.0 * k * k * (3.0 * s * s * c * c - s.powi(4));
        let dlin = (self.rise_right - self.rise_left) / length;
        let lin = self.rise_left * (1.0 - x / length) + self.rise_right * x / length;
        (
            self.bump * w1 + self.rise_time.value(t) * dlin,
            self.bump * w2,
            self.rise_time.derivative(t) * lin,
        )
    }
}

/// Lateral mixture flow rate
/// `Q(x, θ, t) = A · bump(x; a, b) · τ(t) · (1 + c cos θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralFlow {
    /// Amplitude `A`.
    pub amplitude: f64,
    /// Open support `(a, b)` of the smooth bump.
    pub support: (f64, f64),
    /// Time profile `τ(t)`.
    pub time: TimePoly,
    /// Angular mode coefficient `c`.
    pub cos_mode: f64,
}

impl LateralFlow {
    /// Identically zero lateral flow.
    pub fn zero() -> Self {
        Self {
            amplitude: 0.0,
            support: (0.0, 1.0),
            time: TimePoly::default(),
            cos_mode: 0.0,
        }
    }

    /// Smooth bump profile with unit maximum, zero outside the support.
    pub fn profile(&self, x: f64) -> f64 {
        let (a, b) = self.support;
        let z = (2.0 * x - a - b) / (b - a);
        if z.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - z * z)).exp()
        }
    }

    /// Angle-independent factor `A · bump(x) · τ(t)`.
    pub fn magnitude(&self, x: f64, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * self.profile(x) * self.time.value(t)
    }

    /// `Q(x, θ, t)`.
    pub fn value(&self, x: f64, theta: f64, t: f64) -> f64 {
        self.magnitude(x, t) * (1.0 + self.cos_mode * theta.cos())
    }

    /// True if `Q` vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || self.time.coeffs.iter().all(|c| *c == 0.0)
    }
}

/// Reason attached to an unsupported (α, β) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnsupportedReason {
    /// α < 1, or α < β − 1.
    HighLateralConductivity,
    /// α = β − 1 with β ≥ 2.
    DualPorosity,
    /// α = 1 with β ≥ 2.
    CriticalLine,
}

impl fmt::Display for UnsupportedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnsupportedReason::HighLateralConductivity => "high-lateral-conductivity",
            UnsupportedReason::DualPorosity => "dual-porosity",
            UnsupportedReason::CriticalLine => "critical-line",
        })
    }
}

/// Asymptotic regime of an (α, β) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// α = 1 and β < 2.
    Case1 {
        /// Lateral-flux exponent.
        alpha: f64,
        /// Transverse-permeability exponent.
        beta: f64,
    },
    /// α > β − 1 and α > 1.
    Case2 {
        /// Lateral-flux exponent.
        alpha: f64,
        /// Transverse-permeability exponent.
        beta: f64,
    },
    /// Outside both supported regions.
    Unsupported {
        /// Lateral-flux exponent.
        alpha: f64,
        /// Transverse-permeability exponent.
        beta: f64,
        /// Why the pair is not supported.
        reason: UnsupportedReason,
    },
}

impl Regime {
    /// (α, β) of the regime.
    pub fn exponents(&self) -> (f64, f64) {
        match *self {
            Regime::Case1 { alpha, beta }
            | Regime::Case2 { alpha, beta }
            | Regime::Unsupported { alpha, beta, .. } => (alpha, beta),
        }
    }

    /// True for Case 1 and Case 2.
    pub fn is_supported(&self) -> bool {
        !matches!(self, Regime::Unsupported { .. })
    }

    /// True for Case 1.
    pub fn is_case1(&self) -> bool {
        matches!(self, Regime::Case1 { .. })
    }

    /// True if β is zero (within [`LINE_TOL`]).
    pub fn beta_is_zero(&self) -> bool {
        self.exponents().1.abs() <= LINE_TOL
    }

    /// Short tag: `Case1`, `Case2` or `Unsupported`.
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Case1 { .. } => "Case1",
            Regime::Case2 { .. } => "Case2",
            Regime::Unsupported { .. } => "Unsupported",
        }
    }

    /// Error value for an unsupported regime; `Ok` otherwise.
    pub fn require_supported(&self) -> Result<()> {
        match *self {
            Regime::Unsupported {
                alpha,
                beta,
                reason,
            } => Err(Error::UnsupportedRegime {
                alpha,
                beta,
                reason: reason.to_string(),
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Unsupported { reason, .. } => write!(f, "Unsupported ({reason})"),
            other => f.write_str(other.tag()),
        }
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= LINE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Classifies an (α, β) pair.
pub fn classify(alpha: f64, beta: f64) -> Regime {
    let on_alpha_one = near(alpha, 1.0);
    let on_dual_line = near(alpha, beta - 1.0);
    if on_alpha_one && beta < 2.0 {
        return Regime::Case1 { alpha, beta };
    }
    if alpha > beta - 1.0 && !on_dual_line && alpha > 1.0 && !on_alpha_one {
        return Regime::Case2 { alpha, beta };
    }
    let reason = if on_alpha_one {
        UnsupportedReason::CriticalLine
    } else if on_dual_line && beta >= 2.0 {
        UnsupportedReason::DualPorosity
    } else {
        UnsupportedReason::HighLateralConductivity
    };
    Regime::Unsupported {
        alpha,
        beta,
        reason,
    }
}

/// Complete problem specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Geometry.
    pub geometry: Geometry,
    /// Phase closures.
    pub closures: PhaseClosures,
    /// Permeability and porosity.
    pub coefficients: Coefficients,
    /// Reduced pressure at `x = 0`.
    pub q0: TimePoly,
    /// Reduced pressure at `x = ℓ`.
    pub q_ell: TimePoly,
    /// Initial and boundary saturation.
    pub saturation: SaturationData,
    /// Lateral mixture flow rate.
    pub lateral: LateralFlow,
    /// Support margin δ.
    pub support_delta: f64,
    /// Lateral-flux exponent α.
    pub alpha: f64,
    /// Transverse-permeability exponent β.
    pub beta: f64,
}

impl ProblemSpec {
    /// Regime of the problem's (α, β).
    pub fn regime(&self) -> Regime {
        classify(self.alpha, self.beta)
    }

    /// Builds the derived closures.
    pub fn derived(&self) -> Result<DerivedClosures> {
        self.closures.build()
    }

    /// Longitudinal permeability.
    pub fn k1(&self, x: f64) -> f64 {
        self.coefficients.k1.value(x, self.geometry.length)
    }

    /// Isotropic transverse permeability at `(x, ρ)`, `ρ = r/ε`.
    pub fn k_perp(&self, x: f64, rho: f64) -> f64 {
        self.coefficients.k_perp.value(x, self.geometry.length)
            * (1.0 + self.coefficients.k_perp_radial * rho * rho)
    }

    /// Cell tensor `K(x, ξ)` in Cartesian components.
    pub fn cell_tensor(&self, x: f64, xi2: f64, xi3: f64) -> [[f64; 2]; 2] {
        let rho2 = xi2 * xi2 + xi3 * xi3;
        let k = self.k_perp(x, rho2.sqrt());
        let a = self.coefficients.swirl;
        // ρ² e_θ e_θᵀ = [[ξ₃², −ξ₂ξ₃], [−ξ₂ξ₃, ξ₂²]]
        [
            [k * (1.0 + a * xi3 * xi3), -k * a * xi2 * xi3],
            [-k * a * xi2 * xi3, k * (1.0 + a * xi2 * xi2)],
        ]
    }

    /// True if the cell tensor does not depend on `x`.
    pub fn cell_tensor_is_uniform_in_x(&self) -> bool {
        self.coefficients.k_perp.amplitude == 0.0
    }

    /// Porosity.
    pub fn porosity(&self, x: f64) -> f64 {
        self.coefficients.porosity.value(x, self.geometry.length)
    }

    /// `S⁰(x, t)`.
    pub fn s0(&self, x: f64, t: f64) -> f64 {
        self.saturation.value(x, t, self.geometry.length)
    }

    /// `Q(x, θ, t)`.
    pub fn q_lateral(&self, x: f64, theta: f64, t: f64) -> f64 {
        self.lateral.value(x, theta, t)
    }

    /// Cross-section average source `Q̂(x, t)`.
    pub fn qhat(&self, x: f64, t: f64) -> f64 {
        qhat(self, x, t)
    }

    /// Bounds `(δ₀, δ₁)` of the initial and boundary saturation data.
    pub fn saturation_bounds(&self) -> (f64, f64) {
        let n = 4001;
        let (l, tt) = (self.geometry.length, self.geometry.horizon);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let u = i as f64 / (n - 1) as f64;
            for v in [
                self.s0(u * l, 0.0),
                self.s0(0.0, u * tt),
                self.s0(l, u * tt),
            ] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// Cross-section average `(1/|ϖ|) ∮ Q dσ` of the lateral flow rate over the
/// unit disk, by the periodic midpoint rule on the boundary circle.
pub fn qhat(spec: &ProblemSpec, x1: f64, t: f64) -> f64 {
    let lat = &spec.lateral;
    let m = lat.magnitude(x1, t);
    if m == 0.0 {
        return 0.0;
    }
    let dtheta = 2.0 * PI / PERIMETER_POINTS as f64;
    let sum: f64 = (0..PERIMETER_POINTS)
        .map(|j| lat.value(x1, (j as f64 + 0.5) * dtheta, t))
        .sum();
    sum * dtheta / PI
}

/// One failed assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Name of the assumption.
    pub assumption: String,
    /// Where and how it failed.
    pub detail: String,
}

/// Result of [`validate_problem`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    /// All violations found; empty on success.
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// True if no violation was found.
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, assumption: &str, detail: String) {
        self.violations.push(Violation {
            assumption: assumption.into(),
            detail,
        });
    }

    /// Converts a failed report into an error.
    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Validation(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.assumption, v.detail)?;
        }
        Ok(())
    }
}

/// Checks every data assumption of the problem, including the first-order
/// compatibility of the saturation data at the corners `{0, ℓ} × {0}`.
pub fn validate_problem(spec: &ProblemSpec) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let g = spec.geometry;
    if !(g.length > 0.0 && g.length.is_finite()) {
        rep.push(
            "geometry",
            format!("length must be positive, got {}", g.length),
        );
        return rep;
    }
    if !(g.epsilon > 0.0 && g.epsilon < g.length) {
        rep.push(
            "geometry",
            format!("need 0 < epsilon < length, got {}", g.epsilon),
        );
    }
    if !(g.horizon > 0.0 && g.horizon.is_finite()) {
        rep.push(
            "geometry",
            format!("horizon must be positive, got {}", g.horizon),
        );
        return rep;
    }
    let derived = match spec.closures.build() {
        Ok(d) => Some(d),
        Err(e) => {
            rep.push("closures", e.to_string());
            None
        }
    };
    if let Regime::Unsupported { reason, .. } = spec.regime() {
        rep.push(
            "regime",
            format!(
                "(alpha, beta) = ({}, {}) is {reason}",
                spec.alpha, spec.beta
            ),
        );
    }
    let (l, tt) = (g.length, g.horizon);
    let n = 1001;
    let xs: Vec<f64> = (0..n).map(|i| l * i as f64 / (n - 1) as f64).collect();
    let ts: Vec<f64> = (0..n).map(|i| tt * i as f64 / (n - 1) as f64).collect();

    if let Some(x) = xs.iter().find(|&&x| !(spec.k1(x) > 0.0)) {
        rep.push("k1 positive", format!("k1({x}) = {}", spec.k1(*x)));
    }
    if let Some(x) = xs.iter().find(|&&x| {
        let p = spec.porosity(x);
        !(p > 0.0 && p < 1.0)
    }) {
        rep.push(
            "porosity in (0, 1)",
            format!("phi({x}) = {}", spec.porosity(*x)),
        );
    }
    'tensor: for x in xs.iter().step_by(50) {
        for i in 0..=20 {
            let rho = i as f64 / 20.0;
            for j in 0..16 {
                let th = 2.0 * PI * j as f64 / 16.0;
                let k = spec.cell_tensor(*x, rho * th.cos(), rho * th.sin());
                let tr = k[0][0] + k[1][1];
                let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
                let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
                let emin = 0.5 * tr - disc;
                if (k[0][1] - k[1][0]).abs() > 0.0 || !(emin > 0.0) {
                    rep.push(
                        "transverse tensor positive definite",
                        format!("smallest eigenvalue {emin} at x = {x}, rho = {rho}"),
                    );
                    break 'tensor;
                }
            }
        }
    }

    if spec.q0.value(0.0) != 0.0 || spec.q_ell.value(0.0) != 0.0 {
        rep.push(
            "boundary pressure at t = 0",
            "q0(0) and q_ell(0) must vanish".into(),
        );
    }
    if let Some(t) = ts.iter().skip(1).find(|&&t| {
        let (a, b) = (spec.q0.value(t), spec.q_ell.value(t));
        !(a > b && a > 0.0)
    }) {
        rep.push(
            "boundary pressure ordering",
            format!(
                "q0({t}) = {}, q_ell({t}) = {}",
                spec.q0.value(*t),
                spec.q_ell.value(*t)
            ),
        );
    }

    let mut smin = (f64::INFINITY, 0.0, 0.0);
    let mut smax = (f64::NEG_INFINITY, 0.0, 0.0);
    for x in xs.iter().step_by(5) {
        for t in ts.iter().step_by(5) {
            let v = spec.s0(*x, *t);
            if v < smin.0 {
                smin = (v, *x, *t);
            }
            if v > smax.0 {
                smax = (v, *x, *t);
            }
        }
    }
    if !(smin.0 > 0.0) {
        rep.push(
            "saturation data in (0, 1)",
            format!("S0({}, {}) = {}", smin.1, smin.2, smin.0),
        );
    }
    if !(smax.0 < 1.0) {
        rep.push(
            "saturation data in (0, 1)",
            format!("S0({}, {}) = {}", smax.1, smax.2, smax.0),
        );
    }

    let delta = spec.support_delta;
    if !(delta > 0.0 && 2.0 * delta < l) {
        rep.push(
            "support margin",
            format!("delta = {delta} must lie in (0, length/2)"),
        );
    } else if !spec.lateral.is_zero() {
        let (a, b) = spec.lateral.support;
        if !(a < b) {
            rep.push("support margin", format!("empty support ({a}, {b})"));
        }
        let m = 501;
        'margin: for side in 0..2 {
            for i in 0..m {
                let x = if side == 0 {
                    delta * i as f64 / (m - 1) as f64
                } else {
                    l - delta * i as f64 / (m - 1) as f64
                };
                for t in ts.iter().step_by(100).chain(std::iter::once(&tt)) {
                    let q = spec.q_lateral(x, 0.0, *t).abs() + spec.q_lateral(x, PI, *t).abs();
                    if q != 0.0 {
                        rep.push(
                            "support margin",
                            format!("Q({x}, ., {t}) = {q} inside the margin delta = {delta}"),
                        );
                        break 'margin;
                    }
                }
            }
        }
        if spec.lateral.time.value(0.0) != 0.0 {
            rep.push("lateral flow at t = 0", "tau(0) must vanish".into());
        }
    }

    if let Some(d) = &derived {
        for x in [0.0, l] {
            let s = spec.s0(x, 0.0);
            let (sx, sxx, st) = spec.saturation.derivatives(x, 0.0, l);
            let c = d.state(s);
            let r = st - (c.d_cap_diff * sx * sx + c.cap_diff * sxx);
            if r.abs() > 1e-10 {
                rep.push(
                    "first-order compatibility",
                    format!("residual {r:e} at (x, t) = ({x}, 0)"),
                );
            }
        }
    }
    rep
}

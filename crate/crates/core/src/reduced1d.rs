//! One-dimensional limit problem and its linear corrector.
//!
//! The grid is vertex centred: nodes `x_j = j Δx`, `j = 0..=n_x`, with
//! Dirichlet data at both ends. Each time step first evaluates the pressure
//! from its quadrature representation with the mobility of the previous
//! saturation, then advances the saturation by one implicit Euler step
//! solved with damped Newton. The water flux through a face is
//! `V·B − k₁ (𝒦(s_{j+1}) − 𝒦(s_j))/Δx`, with `𝒦` the Kirchhoff potential
//! of the capillary diffusion and `B` the centred fractional flow when that
//! keeps the scheme monotone, the upwind one otherwise.
//!
//! The corrector is the derivative of the discrete scheme with respect to
//! the strength of the lateral source, computed with the same matrices.

use crate::constitutive::DerivedClosures;
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::problem::{ProblemSpec, Regime};
use crate::scheme::{
    advection_rule, check_bounds, newton, water_flux, Advection, BandedSystem, MAX_HALVINGS,
};

/// Slack allowed on the maximum principle of the limit saturation.
pub const BOUND_SLACK: f64 = 1e-6;

/// Uniform space-time grid on `[0, ℓ] × [0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    /// Number of cells in `x` (nodes `0..=n_x`).
    pub n_x: usize,
    /// Number of time steps.
    pub n_t: usize,
    /// Length ℓ.
    pub length: f64,
    /// Final time T.
    pub horizon: f64,
}

impl Grid1D {
    /// Builds a grid; both resolutions must be at least 8.
    pub fn new(n_x: usize, n_t: usize, length: f64, horizon: f64) -> Result<Self> {
        if n_x < 8 || n_t < 8 {
            return Err(Error::InvalidParameter {
                name: "grid".into(),
                reason: format!("need n_x >= 8 and n_t >= 8, got {n_x} and {n_t}"),
            });
        }
        if !(length > 0.0 && horizon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "grid".into(),
                reason: "length and horizon must be positive".into(),
            });
        }
        Ok(Self {
            n_x,
            n_t,
            length,
            horizon,
        })
    }

    /// Grid over the geometry of `spec`.
    pub fn for_spec(spec: &ProblemSpec, n_x: usize, n_t: usize) -> Result<Self> {
        Self::new(n_x, n_t, spec.geometry.length, spec.geometry.horizon)
    }

    /// Mesh width.
    pub fn dx(&self) -> f64 {
        self.length / self.n_x as f64
    }

    /// Time step.
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_t as f64
    }

    /// Node `j`.
    pub fn x(&self, j: usize) -> f64 {
        self.length * j as f64 / self.n_x as f64
    }

    /// Time level `n`.
    pub fn t(&self, n: usize) -> f64 {
        self.horizon * n as f64 / self.n_t as f64
    }

    /// Length of the control volume of node `j` (half cells at the ends).
    pub fn node_width(&self, j: usize) -> f64 {
        if j == 0 || j == self.n_x {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }
}

/// Discrete pressure representation on one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    /// Nodal pressure.
    pub p: Vec<f64>,
    /// Face velocity `V_{j+½} = −(G_{j+½} + C)`.
    pub velocity: Vec<f64>,
    /// Face resistances `R_{j+½} = Δx (1/a_j + 1/a_{j+1})/2`.
    pub resistance: Vec<f64>,
    /// Accumulated source `G_{j+½} = Δx Σ_{k=1..j} Q̂_k`.
    pub accumulated: Vec<f64>,
    /// Integration constant `C` (minus the velocity at `x = 0`).
    pub constant: f64,
}

/// Evaluates the quadrature representation of the pressure
/// `(a p')' = Q̂, p(0) = q0, p(ℓ) = q_ell` for nodal conductivities
/// `a_j = λ(s_j) k₁(x_j)` and nodal sources `Q̂_j`.
pub fn pressure_representation(
    conductivity: &[f64],
    source: &[f64],
    dx: f64,
    q0: f64,
    q_ell: f64,
) -> Representation {
    let n = conductivity.len() - 1;
    let mut resistance = Vec::with_capacity(n);
    let mut accumulated = Vec::with_capacity(n);
    let mut g = 0.0;
    for f in 0..n {
        if f > 0 {
            g += dx * source[f];
        }
        accumulated.push(g);
        resistance.push(0.5 * dx * (1.0 / conductivity[f] + 1.0 / conductivity[f + 1]));
    }
    let sum_r: f64 = resistance.iter().sum();
    let sum_gr: f64 = accumulated
        .iter()
        .zip(&resistance)
        .map(|(g, r)| g * r)
        .sum();
    let constant = (q_ell - q0 - sum_gr) / sum_r;
    let mut p = Vec::with_capacity(n + 1);
    p.push(q0);
    let mut velocity = Vec::with_capacity(n);
    for f in 0..n {
        let flux = accumulated[f] + constant;
        velocity.push(-flux);
        p.push(p[f] + flux * resistance[f]);
    }
    p[n] = q_ell;
    Representation {
        p,
        velocity,
        resistance,
        accumulated,
        constant,
    }
}

/// Pressure of the limit problem on one time level from its quadrature
/// representation, using the mobility of `s0_slice`. With `use_qhat` off
/// the lateral source is dropped.
pub fn pressure_from_representation(
    s0_slice: &[f64],
    t: f64,
    spec: &ProblemSpec,
    use_qhat: bool,
) -> Result<Vec<f64>> {
    if s0_slice.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "s0_slice".into(),
            reason: "need at least two nodes".into(),
        });
    }
    if let Some(s) = s0_slice.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return Err(Error::InvalidParameter {
            name: "s0_slice".into(),
            reason: format!("saturation {s} outside (0, 1)"),
        });
    }
    let d = spec.derived()?;
    let n = s0_slice.len() - 1;
    let ctx = Context::new(spec, &d, n, if use_qhat { 1.0 } else { 0.0 }, None)?;
    Ok(ctx.pressure(s0_slice, t).p)
}

/// Optional modifications of a limit solve, used by manufactured-solution
/// studies.
#[derive(Clone, Copy, Default)]
pub struct LimitOptions<'a> {
    /// Extra source `f(x, t)` added to the saturation equation.
    pub forcing: Option<&'a (dyn Fn(f64, f64) -> f64 + Sync)>,
    /// Saturation range `(δ₀, δ₁)` used for the monotonicity bound and the
    /// maximum-principle check; defaults to the range of the data.
    pub bounds: Option<(f64, f64)>,
}

/// Linear corrector fields on every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorFields {
    /// Pressure corrector.
    pub p: Vec<Vec<f64>>,
    /// Saturation corrector.
    pub s: Vec<Vec<f64>>,
}

/// Limit (and optionally corrector) solution on all time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSolution {
    /// Grid.
    pub grid: Grid1D,
    /// Regime the solution belongs to.
    pub regime: Regime,
    /// Strength of the lateral source in the limit equations (1 in Case 1,
    /// 0 in Case 2).
    pub source_scale: f64,
    /// Time levels.
    pub times: Vec<f64>,
    /// Pressure `p₀` per level.
    pub p0: Vec<Vec<f64>>,
    /// Saturation `s₀` per level.
    pub s0: Vec<Vec<f64>>,
    /// Corrector `(p_{α−1}, s_{α−1})` in Case 2.
    pub corrector: Option<CorrectorFields>,
    /// Number of sub-steps used for each step (1 unless halving occurred).
    pub substeps: Vec<usize>,
    /// Saturation range used for the maximum principle.
    pub bounds: (f64, f64),
    forced: bool,
}

impl ReducedSolution {
    /// True if the solve included a manufactured forcing.
    pub fn is_forced(&self) -> bool {
        self.forced
    }
}

/// Face quantities of one time level `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFields {
    /// Total velocity.
    pub velocity: Vec<f64>,
    /// Fractional flow used on each face.
    pub frac: Vec<f64>,
    /// Capillary diffusive flux `k₁ ∂ₓ𝒦`.
    pub diffusion: Vec<f64>,
    /// Derivatives along the corrector, if present: velocity, fractional
    /// flow and diffusive flux.
    pub corrector: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl FaceFields {
    /// Water flux `V·B − D` on each face.
    pub fn water(&self) -> Vec<f64> {
        self.velocity
            .iter()
            .zip(&self.frac)
            .zip(&self.diffusion)
            .map(|((v, b), d)| v * b - d)
            .collect()
    }
}

/// Per-solve constants.
pub(crate) struct Context<'a> {
    spec: &'a ProblemSpec,
    pub(crate) d: &'a DerivedClosures,
    n_x: usize,
    dx: f64,
    k1: Vec<f64>,
    porosity: Vec<f64>,
    t_diff: Vec<f64>,
    ratio: f64,
    source_scale: f64,
    bounds: (f64, f64),
}

impl<'a> Context<'a> {
    fn new(
        spec: &'a ProblemSpec,
        d: &'a DerivedClosures,
        n_x: usize,
        source_scale: f64,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        let l = spec.geometry.length;
        let dx = l / n_x as f64;
        let k1: Vec<f64> = (0..=n_x).map(|j| spec.k1(j as f64 * dx)).collect();
        let porosity = (0..=n_x).map(|j| spec.porosity(j as f64 * dx)).collect();
        let t_diff = (0..n_x)
            .map(|f| spec.k1((f as f64 + 0.5) * dx) / dx)
            .collect();
        let bounds = bounds.unwrap_or_else(|| spec.saturation_bounds());
        let ratio = d.diffusion_advection_ratio(bounds.0.max(0.0), bounds.1.min(1.0));
        Ok(Self {
            spec,
            d,
            n_x,
            dx,
            k1,
            porosity,
            t_diff,
            ratio,
            source_scale,
            bounds,
        })
    }

    fn qhat(&self, t: f64) -> Vec<f64> {
        (0..=self.n_x)
            .map(|j| self.spec.qhat(j as f64 * self.dx, t))
            .collect()
    }

    fn pressure(&self, s: &[f64], t: f64) -> Representation {
        let a: Vec<f64> = s
            .iter()
            .zip(&self.k1)
            .map(|(s, k)| self.d.lambda(*s) * k)
            .collect();
        let q: Vec<f64> = self
            .qhat(t)
            .into_iter()
            .map(|v| v * self.source_scale)
            .collect();
        pressure_representation(
            &a,
            &q,
            self.dx,
            self.spec.q0.value(t),
            self.spec.q_ell.value(t),
        )
    }

    fn rules(&self, velocity: &[f64]) -> Vec<Advection> {
        velocity
            .iter()
            .zip(&self.t_diff)
            .map(|(v, td)| advection_rule(*v, *td, self.ratio))
            .collect()
    }
}

struct SaturationSystem<'c, 'a> {
    ctx: &'c Context<'a>,
    s_old: &'c [f64],
    left: f64,
    right: f64,
    velocity: &'c [f64],
    rules: &'c [Advection],
    dt: f64,
    qhat: Vec<f64>,
    forcing: Vec<f64>,
}

impl SaturationSystem<'_, '_> {
    fn full(&self, s: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(s.len() + 2);
        v.push(self.left);
        v.extend_from_slice(s);
        v.push(self.right);
        v
    }
}

impl BandedSystem for SaturationSystem<'_, '_> {
    fn len(&self) -> usize {
        self.ctx.n_x - 1
    }

    fn bandwidth(&self) -> usize {
        1
    }

    fn eval(&self, s: &[f64], res: &mut [f64], mut jac: Option<&mut BandMatrix>) {
        let c = self.ctx;
        let full = self.full(s);
        let n = c.n_x;
        let fluxes: Vec<_> = (0..n)
            .map(|f| {
                water_flux(
                    c.d,
                    self.rules[f],
                    self.velocity[f],
                    c.t_diff[f],
                    full[f],
                    full[f + 1],
                )
            })
            .collect();
        for j in 1..n {
            let i = j - 1;
            let st = c.d.state(full[j]);
            let acc = c.porosity[j] * c.dx / self.dt;
            let src = c.source_scale * self.qhat[j] * c.dx;
            res[i] = acc * (full[j] - self.s_old[j]) + fluxes[j].value - fluxes[j - 1].value
                + src * st.b
                - self.forcing[j] * c.dx;
            if let Some(m) = jac.as_deref_mut() {
                m.add(
                    i,
                    i,
                    acc + fluxes[j].d_left - fluxes[j - 1].d_right + src * st.d_b,
                );
                if j + 1 < n {
                    m.add(i, i + 1, fluxes[j].d_right);
                }
                if j > 1 {
                    m.add(i, i - 1, -fluxes[j - 1].d_left);
                }
            }
        }
    }

    fn scale(&self, i: usize) -> f64 {
        self.dt / (self.ctx.porosity[i + 1] * self.ctx.dx)
    }
}

struct StepResult {
    pressure: Representation,
    s: Vec<f64>,
    substeps: usize,
}

fn advance(
    ctx: &Context<'_>,
    forcing: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>,
    s_old: &[f64],
    t0: f64,
    dt: f64,
    depth: usize,
) -> Result<StepResult> {
    let t1 = t0 + dt;
    let pressure = ctx.pressure(s_old, t1);
    let rules = ctx.rules(&pressure.velocity);
    let l = ctx.spec.geometry.length;
    let forcing_values = (0..=ctx.n_x)
        .map(|j| forcing.map_or(0.0, |f| f(j as f64 * ctx.dx, t1)))
        .collect();
    let sys = SaturationSystem {
        ctx,
        s_old,
        left: ctx.spec.saturation.value(0.0, t1, l),
        right: ctx.spec.saturation.value(l, t1, l),
        velocity: &pressure.velocity,
        rules: &rules,
        dt,
        qhat: ctx.qhat(t1),
        forcing: forcing_values,
    };
    let mut interior = s_old[1..ctx.n_x].to_vec();
    match newton(&sys, &mut interior) {
        Ok(_) => Ok(StepResult {
            s: sys.full(&interior),
            pressure,
            substeps: 1,
        }),
        Err(residual) => {
            if depth >= MAX_HALVINGS {
                return Err(Error::Newton {
                    time: t1,
                    halvings: depth,
                    residual,
                });
            }
            let half = 0.5 * dt;
            let a = advance(ctx, forcing, s_old, t0, half, depth + 1)?;
            let b = advance(ctx, forcing, &a.s, t0 + half, half, depth + 1)?;
            Ok(StepResult {
                substeps: a.substeps + b.substeps,
                ..b
            })
        }
    }
}

fn source_scale_of(regime: &Regime) -> Result<f64> {
    regime.require_supported()?;
    Ok(match regime {
        Regime::Case1 { .. } => 1.0,
        _ => 0.0,
    })
}

/// Solves the limit problem for the regime of `spec`: with the averaged lateral
/// source in Case 1 and without it in Case 2.
pub fn solve_limit(spec: &ProblemSpec, grid: Grid1D) -> Result<ReducedSolution> {
    solve_limit_with(spec, grid, LimitOptions::default())
}

/// [`solve_limit`] with extra options.
pub fn solve_limit_with(
    spec: &ProblemSpec,
    grid: Grid1D,
    options: LimitOptions<'_>,
) -> Result<ReducedSolution> {
    let regime = spec.regime();
    let scale = source_scale_of(&regime)?;
    let d = spec.derived()?;
    let ctx = Context::new(spec, &d, grid.n_x, scale, options.bounds)?;
    let (lo, hi) = (ctx.bounds.0 - BOUND_SLACK, ctx.bounds.1 + BOUND_SLACK);
    let l = spec.geometry.length;
    let s_init: Vec<f64> = (0..=grid.n_x)
        .map(|j| spec.saturation.value(grid.x(j), 0.0, l))
        .collect();
    let p_init = ctx.pressure(&s_init, 0.0).p;
    let mut times = vec![0.0];
    let mut p0 = vec![p_init];
    let mut s0 = vec![s_init];
    let mut substeps = Vec::with_capacity(grid.n_t);
    for n in 0..grid.n_t {
        let t0 = grid.t(n);
        let step = advance(&ctx, options.forcing, &s0[n], t0, grid.t(n + 1) - t0, 0)?;
        if options.forcing.is_none() {
            check_bounds(grid.t(n + 1), &step.s, lo, hi, |i| i)?;
        }
        times.push(grid.t(n + 1));
        p0.push(step.pressure.p);
        s0.push(step.s);
        substeps.push(step.substeps);
    }
    Ok(ReducedSolution {
        grid,
        regime,
        source_scale: scale,
        times,
        p0,
        s0,
        corrector: None,
        substeps,
        bounds: ctx.bounds,
        forced: options.forcing.is_some(),
    })
}

fn context_of<'a>(
    spec: &'a ProblemSpec,
    d: &'a DerivedClosures,
    base: &ReducedSolution,
) -> Result<Context<'a>> {
    Context::new(spec, d, base.grid.n_x, base.source_scale, Some(base.bounds))
}

/// Solves the linear corrector problem for a Case 2 limit solution.
pub fn solve_corrector(
    spec: &ProblemSpec,
    base: &ReducedSolution,
    grid: Grid1D,
) -> Result<CorrectorFields> {
    if !matches!(base.regime, Regime::Case2 { .. }) {
        return Err(Error::InvalidParameter {
            name: "regime".into(),
            reason: format!("the corrector is defined in Case 2, got {}", base.regime),
        });
    }
    if grid != base.grid {
        return Err(Error::InvalidParameter {
            name: "grid".into(),
            reason: "corrector grid differs from the limit grid".into(),
        });
    }
    solve_linearized(spec, base, |x, t| spec.qhat(x, t))
}

/// Derivative of the discrete limit solution with respect to an extra
/// lateral source `δ·g(x, t)` at `δ = 0`. With `g = Q̂` and a Case 2 base
/// this is the corrector; with `g = 0` the result vanishes identically.
pub fn solve_linearized(
    spec: &ProblemSpec,
    base: &ReducedSolution,
    g: impl Fn(f64, f64) -> f64,
) -> Result<CorrectorFields> {
    if base.is_forced() {
        return Err(Error::InvalidParameter {
            name: "base".into(),
            reason: "linearization of a forced solve is not supported".into(),
        });
    }
    if let Some(n) = base.substeps.iter().position(|k| *k != 1) {
        return Err(Error::InvalidParameter {
            name: "base".into(),
            reason: format!("step {n} used time-step halving; refine the time grid"),
        });
    }
    let d = spec.derived()?;
    let ctx = context_of(spec, &d, base)?;
    let grid = base.grid;
    let n_x = grid.n_x;
    let dx = grid.dx();
    let dt = grid.dt();
    let mut p_c = vec![vec![0.0; n_x + 1]];
    let mut s_c = vec![vec![0.0; n_x + 1]];
    for n in 0..grid.n_t {
        let t1 = grid.t(n + 1);
        let s_old = &base.s0[n];
        let s_new = &base.s0[n + 1];
        let ds_old = &s_c[n];
        let rep = ctx.pressure(s_old, t1);
        let gval: Vec<f64> = (0..=n_x).map(|j| g(grid.x(j), t1)).collect();
        let pert = pressure_representation(&vec![1.0; n_x + 1], &gval, dx, 0.0, 0.0).accumulated;
        // resistance derivatives from the mobility sensitivity
        let a_prime: Vec<f64> = (0..=n_x)
            .map(|j| {
                let st = d.state(s_old[j]);
                let a = st.lambda * ctx.k1[j];
                -st.d_lambda * ctx.k1[j] * ds_old[j] / (a * a)
            })
            .collect();
        let r_prime: Vec<f64> = (0..n_x)
            .map(|f| 0.5 * dx * (a_prime[f] + a_prime[f + 1]))
            .collect();
        let sum_r: f64 = rep.resistance.iter().sum();
        let sum_rp: f64 = r_prime.iter().sum();
        let sum_gr: f64 = pert.iter().zip(&rep.resistance).map(|(a, b)| a * b).sum();
        let sum_grp: f64 = rep
            .accumulated
            .iter()
            .zip(&r_prime)
            .map(|(a, b)| a * b)
            .sum();
        let c_prime = (-sum_gr - sum_grp - rep.constant * sum_rp) / sum_r;
        let mut p = vec![0.0; n_x + 1];
        let mut v_prime = vec![0.0; n_x];
        for f in 0..n_x {
            let dp = (pert[f] + c_prime) * rep.resistance[f]
                + (rep.accumulated[f] + rep.constant) * r_prime[f];
            p[f + 1] = p[f] + dp;
            v_prime[f] = -(pert[f] + c_prime);
        }
        p[n_x] = 0.0;

        let rules = ctx.rules(&rep.velocity);
        let sys = SaturationSystem {
            ctx: &ctx,
            s_old,
            left: s_new[0],
            right: s_new[n_x],
            velocity: &rep.velocity,
            rules: &rules,
            dt,
            qhat: ctx.qhat(t1),
            forcing: vec![0.0; n_x + 1],
        };
        let mut jac = BandMatrix::zeros(n_x - 1, 1, 1);
        let mut res = vec![0.0; n_x - 1];
        sys.eval(&s_new[1..n_x], &mut res, Some(&mut jac));
        let fracs: Vec<f64> = (0..n_x)
            .map(|f| {
                water_flux(
                    &d,
                    rules[f],
                    rep.velocity[f],
                    ctx.t_diff[f],
                    s_new[f],
                    s_new[f + 1],
                )
                .frac
            })
            .collect();
        let mut rhs: Vec<f64> = (1..n_x)
            .map(|j| {
                ctx.porosity[j] * dx / dt * ds_old[j]
                    - (v_prime[j] * fracs[j] - v_prime[j - 1] * fracs[j - 1])
                    - d.b(s_new[j]) * gval[j] * dx
            })
            .collect();
        jac.factor()?.solve(&mut rhs);
        let mut s = vec![0.0; n_x + 1];
        s[1..n_x].copy_from_slice(&rhs);
        p_c.push(p);
        s_c.push(s);
    }
    Ok(CorrectorFields { p: p_c, s: s_c })
}

/// Face velocities, fractional flows and diffusive fluxes of level `n ≥ 1`,
/// plus their derivatives along the corrector when present.
pub fn face_fields(spec: &ProblemSpec, sol: &ReducedSolution, n: usize) -> Result<FaceFields> {
    if n == 0 || n > sol.grid.n_t {
        return Err(Error::InvalidParameter {
            name: "level".into(),
            reason: format!("face fields exist for levels 1..={}, got {n}", sol.grid.n_t),
        });
    }
    let d = spec.derived()?;
    let ctx = context_of(spec, &d, sol)?;
    let n_x = sol.grid.n_x;
    let t1 = sol.times[n];
    let rep = ctx.pressure(&sol.s0[n - 1], t1);
    let rules = ctx.rules(&rep.velocity);
    let s = &sol.s0[n];
    let mut frac = Vec::with_capacity(n_x);
    let mut diffusion = Vec::with_capacity(n_x);
    for f in 0..n_x {
        let w = water_flux(&d, rules[f], rep.velocity[f], ctx.t_diff[f], s[f], s[f + 1]);
        frac.push(w.frac);
        diffusion.push(ctx.t_diff[f] * (d.kirchhoff(s[f + 1]) - d.kirchhoff(s[f])));
    }
    let corrector = match &sol.corrector {
        None => None,
        Some(c) => {
            let ds = &c.s[n];
            let dso = &c.s[n - 1];
            // velocity derivative from the pressure corrector increments
            let a_prime: Vec<f64> = (0..=n_x)
                .map(|j| {
                    let st = d.state(sol.s0[n - 1][j]);
                    let a = st.lambda * ctx.k1[j];
                    -st.d_lambda * ctx.k1[j] * dso[j] / (a * a)
                })
                .collect();
            let dx = sol.grid.dx();
            let mut dv = Vec::with_capacity(n_x);
            let mut db = Vec::with_capacity(n_x);
            let mut dd = Vec::with_capacity(n_x);
            for f in 0..n_x {
                let r_prime = 0.5 * dx * (a_prime[f] + a_prime[f + 1]);
                let dp = c.p[n][f + 1] - c.p[n][f];
                // Δp' = (G' + C')R + (G + C)R' and V' = −(G' + C')
                dv.push(-(dp + rep.velocity[f] * r_prime) / rep.resistance[f]);
                let w = water_flux(&d, rules[f], rep.velocity[f], ctx.t_diff[f], s[f], s[f + 1]);
                db.push(w.d_frac.0 * ds[f] + w.d_frac.1 * ds[f + 1]);
                dd.push(
                    ctx.t_diff[f] * (d.cap_diff(s[f + 1]) * ds[f + 1] - d.cap_diff(s[f]) * ds[f]),
                );
            }
            Some((dv, db, dd))
        }
    };
    Ok(FaceFields {
        velocity: rep.velocity,
        frac,
        diffusion,
        corrector,
    })
}

/// Per-step discrete mass balance of the limit saturation:
/// `|Σ φ Δx (sⁿ⁺¹ − sⁿ)/Δt + W_out − W_in + Σ b(s) Q̂ Δx|`
/// normalized by `Σ φ Δx` over the interior nodes.
pub fn mass_balance(spec: &ProblemSpec, sol: &ReducedSolution) -> Result<Vec<f64>> {
    if sol.is_forced() {
        return Err(Error::InvalidParameter {
            name: "sol".into(),
            reason: "mass balance of a forced solve is not supported".into(),
        });
    }
    let d = spec.derived()?;
    let ctx = context_of(spec, &d, sol)?;
    let grid = sol.grid;
    let (n_x, dx, dt) = (grid.n_x, grid.dx(), grid.dt());
    let pore: f64 = (1..n_x).map(|j| ctx.porosity[j] * dx).sum();
    let mut out = Vec::with_capacity(grid.n_t);
    for n in 1..=grid.n_t {
        let ff = face_fields(spec, sol, n)?;
        let w = ff.water();
        let q = ctx.qhat(sol.times[n]);
        let s = &sol.s0[n];
        let mut total = w[n_x - 1] - w[0];
        for j in 1..n_x {
            total += ctx.porosity[j] * dx * (s[j] - sol.s0[n - 1][j]) / dt
                + sol.source_scale * d.b(s[j]) * q[j] * dx;
        }
        out.push(total.abs() / pore);
    }
    Ok(out)
}

/// Coefficient `a = b'(s) (G + C)` of the scalar advective form
/// `φ ∂ₜs = ∂ₓ(Λ k₁ ∂ₓs) + a ∂ₓs` at every interior node of level `n ≥ 1`,
/// with `G` and `C` taken from the pressure representation of that level.
pub fn advective_coefficient(
    spec: &ProblemSpec,
    sol: &ReducedSolution,
    n: usize,
) -> Result<Vec<f64>> {
    let d = spec.derived()?;
    let ctx = context_of(spec, &d, sol)?;
    let rep = ctx.pressure(&sol.s0[n - 1], sol.times[n]);
    let s = &sol.s0[n];
    Ok((1..sol.grid.n_x)
        .map(|j| {
            let g = 0.5 * (rep.accumulated[j - 1] + rep.accumulated[j]);
            d.state(s[j]).d_b * (g + rep.constant)
        })
        .collect())
}

/// Largest residual of the scalar advective form, discretized by central
/// differences, on a Case 1 limit solution.
pub fn advective_form_check(spec: &ProblemSpec, base: &ReducedSolution) -> Result<f64> {
    if !matches!(base.regime, Regime::Case1 { .. }) || base.is_forced() {
        return Err(Error::InvalidParameter {
            name: "base".into(),
            reason: "the advective form check needs an unforced Case 1 solution".into(),
        });
    }
    let d = spec.derived()?;
    let ctx = context_of(spec, &d, base)?;
    let grid = base.grid;
    let (dx, dt) = (grid.dx(), grid.dt());
    let mut worst = 0.0f64;
    for n in 1..=grid.n_t {
        let a = advective_coefficient(spec, base, n)?;
        let s = &base.s0[n];
        let so = &base.s0[n - 1];
        for j in 1..grid.n_x {
            let kp = d.kirchhoff(s[j + 1]);
            let k0 = d.kirchhoff(s[j]);
            let km = d.kirchhoff(s[j - 1]);
            let diff = (ctx.t_diff[j] * (kp - k0) - ctx.t_diff[j - 1] * (k0 - km)) / dx;
            let adv = a[j - 1] * (s[j + 1] - s[j - 1]) / (2.0 * dx);
            let r = ctx.porosity[j] * (s[j] - so[j]) / dt - diff - adv;
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representation_linear_profile() {
        let n = 10;
        let rep = pressure_representation(&vec![1.0; n + 1], &vec![0.0; n + 1], 0.1, 1.0, 0.0);
        for (j, p) in rep.p.iter().enumerate() {
            assert!((p - (1.0 - 0.1 * j as f64)).abs() < 1e-14);
        }
        assert!(rep.velocity.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn representation_quadratic_profile() {
        let n = 16;
        let dx = 1.0 / n as f64;
        let rep = pressure_representation(&vec![1.0; n + 1], &vec![1.0; n + 1], dx, 0.0, 0.0);
        for (j, p) in rep.p.iter().enumerate() {
            let x = j as f64 * dx;
            assert!((p - 0.5 * (x * x - x)).abs() < 1e-14, "node {j}: {p}");
        }
    }

    #[test]
    fn representation_constant_profile() {
        let rep = pressure_representation(&[0.3, 2.0, 1.1, 0.7, 5.0], &[0.0; 5], 0.25, 0.8, 0.8);
        assert!(rep.p.iter().all(|p| (p - 0.8).abs() < 1e-15));
    }

    #[test]
    fn grid_rejects_coarse_resolution() {
        assert!(Grid1D::new(7, 10, 1.0, 1.0).is_err());
        assert!(Grid1D::new(10, 7, 1.0, 1.0).is_err());
        let g = Grid1D::new(10, 8, 2.0, 1.0).unwrap();
        assert_eq!(g.dx(), 0.2);
        assert_eq!(g.node_width(0), 0.1);
    }
}

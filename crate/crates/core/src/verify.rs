//! Volume-scaled norms on the reference mesh, convergence-rate fits and the
//! ε-sweep comparing reference solutions with the asymptotic approximation.
//!
//! All three-dimensional norms are divided by `√|Ω_ε| = √(π ε² ℓ)`; on the
//! stretched mesh this turns every integral into a weighted sum with
//! weights `Â_k w_j / ℓ` (nodes), `Â_k Δx / ℓ` (x-faces) and
//! `2 ρ_f Δρ w_j / ℓ` (radial faces). Transverse derivatives carry the
//! factor `1/ε` of the stretching. Norms of cross-section means are plain
//! one-dimensional norms on `(0, ℓ)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, Regime};
use crate::reconstruct::{reconstruct, reconstruct_phase_pressures, ApproxFields, CellCache};
use crate::reduced1d::{solve_corrector, solve_limit, Grid1D, ReducedSolution};
use crate::reference::{
    solve_reference, velocity_field, AxisymMesh, FullSolution, VelocityField, DEFAULT_RINGS,
};

/// Default ε ladder of a sweep.
pub const DEFAULT_LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Default slack of a rate verdict.
pub const DEFAULT_SLACK: f64 = 0.3;

/// Default number of finest ε values used by the fit.
pub const DEFAULT_FIT_POINTS: usize = 3;

/// Norm applied to a space-time field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// `max_t ‖e(t)‖_{L²}`.
    MaxTL2,
    /// `max_t ‖e(t)‖_{H¹}`.
    MaxTH1,
    /// `‖e‖_{L²(0,T;H¹)}`.
    L2TH1,
    /// `max_t (‖∂ₓe‖² + ε^β ‖∇⊥e‖²)^{1/2}`.
    MaxTEnergy,
    /// `(∫₀ᵀ ‖∂ₓe‖² + ε^β ‖∇⊥e‖² dt)^{1/2}`.
    L2TEnergy,
    /// `max_{x,t} |e|` of a one-dimensional field.
    Sup,
    /// `max_t ‖e(t)‖_{H¹(0,ℓ)}` of a one-dimensional field.
    MaxTH1Line,
    /// `‖e‖_{L²(0,T;H¹(0,ℓ))}` of a one-dimensional field.
    L2TH1Line,
    /// `‖e‖_{L²(0,T;C([0,ℓ]))}` of a one-dimensional field.
    L2TSupLine,
    /// `max_t ‖e(t)‖_{L²}` of a vector field.
    VectorMaxTL2,
    /// `‖e‖_{L²(0,T;L²)}` of a vector field.
    VectorL2T,
}

impl NormKind {
    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::MaxTL2 => "maxT_L2",
            NormKind::MaxTH1 => "maxT_H1",
            NormKind::L2TH1 => "L2T_H1",
            NormKind::MaxTEnergy => "maxT_energy",
            NormKind::L2TEnergy => "L2T_energy",
            NormKind::Sup => "sup",
            NormKind::MaxTH1Line => "maxT_H1",
            NormKind::L2TH1Line => "L2T_H1",
            NormKind::L2TSupLine => "L2T_sup",
            NormKind::VectorMaxTL2 => "maxT_L2",
            NormKind::VectorL2T => "L2T",
        }
    }
}

/// Compared quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// Global pressure.
    Pressure,
    /// Water saturation.
    Saturation,
    /// Cross-section mean of the pressure.
    MeanPressure,
    /// Cross-section mean of the saturation.
    MeanSaturation,
    /// Total velocity.
    Velocity,
    /// Water velocity.
    WaterVelocity,
    /// Oil velocity.
    OilVelocity,
    /// Water pressure.
    WaterPressure,
    /// Oil pressure.
    OilPressure,
}

impl Quantity {
    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Pressure => "P",
            Quantity::Saturation => "S",
            Quantity::MeanPressure => "meanP",
            Quantity::MeanSaturation => "meanS",
            Quantity::Velocity => "V",
            Quantity::WaterVelocity => "Vw",
            Quantity::OilVelocity => "Vo",
            Quantity::WaterPressure => "Pw",
            Quantity::OilPressure => "Po",
        }
    }

    /// True for velocities.
    pub fn is_velocity(&self) -> bool {
        matches!(
            self,
            Quantity::Velocity | Quantity::WaterVelocity | Quantity::OilVelocity
        )
    }
}

/// A quantity measured in a norm, e.g. `S:maxT_L2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NormId {
    /// Compared quantity.
    pub quantity: Quantity,
    /// Norm.
    pub kind: NormKind,
}

impl NormId {
    /// Builds an id.
    pub const fn new(quantity: Quantity, kind: NormKind) -> Self {
        Self { quantity, kind }
    }
}

impl fmt::Display for NormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.quantity.name(), self.kind.name())
    }
}

/// Norms reported for a regime.
pub fn norms_for(regime: &Regime) -> Vec<NormId> {
    use NormKind::*;
    use Quantity::*;
    let (state_h1, state_l2t, phase) = if regime.beta_is_zero() {
        (MaxTH1, L2TH1, L2TH1)
    } else {
        (MaxTEnergy, L2TEnergy, L2TEnergy)
    };
    vec![
        NormId::new(Pressure, state_h1),
        NormId::new(Saturation, MaxTL2),
        NormId::new(Saturation, state_l2t),
        NormId::new(MeanPressure, Sup),
        NormId::new(MeanPressure, MaxTH1Line),
        NormId::new(MeanSaturation, L2TH1Line),
        NormId::new(MeanSaturation, L2TSupLine),
        NormId::new(Velocity, VectorMaxTL2),
        NormId::new(WaterVelocity, VectorL2T),
        NormId::new(OilVelocity, VectorL2T),
        NormId::new(WaterPressure, phase),
        NormId::new(OilPressure, phase),
    ]
}

/// Predicted convergence exponent of a norm in a regime, or `None` where
/// no rate is available.
pub fn predicted_rate(regime: &Regime, id: NormId) -> Option<f64> {
    let (alpha, beta) = regime.exponents();
    let velocity = id.quantity.is_velocity();
    match regime {
        Regime::Unsupported { .. } => None,
        Regime::Case1 { .. } if regime.beta_is_zero() => Some(2.0),
        Regime::Case1 { .. } => {
            let state = 1.0 - beta / 2.0;
            Some(if velocity { state.min(1.0) } else { state })
        }
        Regime::Case2 { .. } if regime.beta_is_zero() => {
            Some((2.0 * (alpha - 1.0)).min(alpha + 1.0))
        }
        Regime::Case2 { .. } => {
            let state = (alpha - 1.0).min((alpha - beta + 1.0) / 2.0);
            if !velocity {
                return Some(state);
            }
            if beta > 0.0 {
                Some(if alpha >= 3.0 - beta {
                    (alpha - beta + 1.0) / 2.0
                } else {
                    alpha - 1.0
                })
            } else if alpha >= 3.0 - beta {
                Some((alpha + 1.0) / 2.0)
            } else if alpha > 1.0 - beta / 2.0 {
                Some(alpha - 1.0 + beta / 2.0)
            } else {
                None
            }
        }
    }
}

/// Nodal field on the reference mesh at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    /// Mesh.
    pub mesh: AxisymMesh,
    /// Time grid.
    pub grid: Grid1D,
    /// Values per level, indexed by [`AxisymMesh::index`].
    pub levels: Vec<Vec<f64>>,
}

/// Squared scaled `L²` norm of a nodal slice.
fn slice_l2_sq(mesh: &AxisymMesh, e: &[f64]) -> f64 {
    let l = mesh.length;
    let mut acc = 0.0;
    for j in 0..=mesh.n_x {
        let w = mesh.node_width(j) / l;
        for k in 0..mesh.n_r {
            acc += mesh.area_fraction(k) * w * e[mesh.index(j, k)].powi(2);
        }
    }
    acc
}

/// Squared scaled norms of the longitudinal and transverse gradients of a
/// nodal slice.
fn slice_grad_sq(mesh: &AxisymMesh, e: &[f64]) -> (f64, f64) {
    let l = mesh.length;
    let dx = mesh.dx();
    let mut gx = 0.0;
    for f in 0..mesh.n_x {
        for k in 0..mesh.n_r {
            let g = (e[mesh.index(f + 1, k)] - e[mesh.index(f, k)]) / dx;
            gx += mesh.area_fraction(k) * dx / l * g * g;
        }
    }
    let dr = mesh.d_rho();
    let mut gr = 0.0;
    for j in 0..=mesh.n_x {
        let w = mesh.node_width(j) / l;
        for k in 0..mesh.n_r - 1 {
            let g = (e[mesh.index(j, k + 1)] - e[mesh.index(j, k)]) / (dr * mesh.epsilon);
            gr += 2.0 * mesh.rho_face(k) * dr * w * g * g;
        }
    }
    (gx, gr)
}

/// Squared scaled `L²` norm of a face-based vector field.
fn vector_l2_sq(mesh: &AxisymMesh, x: &[f64], r: &[f64]) -> f64 {
    let l = mesh.length;
    let dx = mesh.dx();
    let nr = mesh.n_r;
    let mut acc = 0.0;
    for (e, v) in x.iter().enumerate() {
        acc += mesh.area_fraction(e % nr) * dx / l * v * v;
    }
    let dr = mesh.d_rho();
    for (e, v) in r.iter().enumerate() {
        let (j, k) = (e / (nr - 1), e % (nr - 1));
        acc += 2.0 * mesh.rho_face(k) * dr * mesh.node_width(j) / l * v * v;
    }
    acc
}

fn max_over_levels(levels: impl Iterator<Item = f64>) -> f64 {
    levels.fold(0.0, f64::max)
}

/// Scaled norm of a nodal space-time field. `beta` weights the transverse
/// part of the energy norms. One-dimensional and vector norms are rejected.
pub fn scaled_norm(field: &SpaceTimeField, kind: NormKind, beta: f64) -> Result<f64> {
    let m = &field.mesh;
    let dt = field.grid.dt();
    let wb = m.epsilon.powf(beta);
    let h1 = |e: &Vec<f64>| {
        let (gx, gr) = slice_grad_sq(m, e);
        slice_l2_sq(m, e) + gx + gr
    };
    let energy = |e: &Vec<f64>| {
        let (gx, gr) = slice_grad_sq(m, e);
        gx + wb * gr
    };
    let later = || field.levels.iter().skip(1);
    Ok(match kind {
        NormKind::MaxTL2 => max_over_levels(field.levels.iter().map(|e| slice_l2_sq(m, e))).sqrt(),
        NormKind::MaxTH1 => max_over_levels(field.levels.iter().map(h1)).sqrt(),
        NormKind::MaxTEnergy => max_over_levels(field.levels.iter().map(energy)).sqrt(),
        NormKind::L2TH1 => (dt * later().map(h1).sum::<f64>()).sqrt(),
        NormKind::L2TEnergy => (dt * later().map(energy).sum::<f64>()).sqrt(),
        other => {
            return Err(Error::InvalidParameter {
                name: "norm".into(),
                reason: format!("{} is not a norm of nodal fields", other.name()),
            })
        }
    })
}

/// Scaled norm of a velocity difference given per level `1..=n_t`.
pub fn velocity_norm(
    mesh: &AxisymMesh,
    grid: &Grid1D,
    levels: &[(Vec<f64>, Vec<f64>)],
    kind: NormKind,
) -> Result<f64> {
    let sq = levels.iter().map(|(x, r)| vector_l2_sq(mesh, x, r));
    Ok(match kind {
        NormKind::VectorMaxTL2 => max_over_levels(sq).sqrt(),
        NormKind::VectorL2T => (grid.dt() * sq.sum::<f64>()).sqrt(),
        other => {
            return Err(Error::InvalidParameter {
                name: "norm".into(),
                reason: format!("{} is not a norm of vector fields", other.name()),
            })
        }
    })
}

/// Norm of a one-dimensional field given per level on the nodes of `grid`.
pub fn line_norm(grid: &Grid1D, levels: &[Vec<f64>], kind: NormKind) -> Result<f64> {
    let dx = grid.dx();
    let dt = grid.dt();
    let h1 = |e: &Vec<f64>| {
        let l2: f64 = e
            .iter()
            .enumerate()
            .map(|(j, v)| grid.node_width(j) * v * v)
            .sum();
        let g: f64 = e.windows(2).map(|w| (w[1] - w[0]).powi(2) / dx).sum();
        l2 + g
    };
    let sup = |e: &Vec<f64>| e.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(match kind {
        NormKind::Sup => max_over_levels(levels.iter().map(sup)),
        NormKind::MaxTH1Line => max_over_levels(levels.iter().map(h1)).sqrt(),
        NormKind::L2TH1Line => (dt * levels.iter().skip(1).map(h1).sum::<f64>()).sqrt(),
        NormKind::L2TSupLine => {
            (dt * levels.iter().skip(1).map(|e| sup(e).powi(2)).sum::<f64>()).sqrt()
        }
        other => {
            return Err(Error::InvalidParameter {
                name: "norm".into(),
                reason: format!("{} is not a norm of line fields", other.name()),
            })
        }
    })
}

/// Cross-section mean `Σ_k Â_k e_{j,k}` of a nodal slice, per node.
pub fn cross_section_mean(field: &[f64], mesh: &AxisymMesh) -> Vec<f64> {
    (0..=mesh.n_x)
        .map(|j| {
            (0..mesh.n_r)
                .map(|k| mesh.area_fraction(k) * field[mesh.index(j, k)])
                .sum()
        })
        .collect()
}

/// Least-squares line through `(log ε, log error)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    /// Fitted slope (the observed rate).
    pub slope: f64,
    /// Fitted intercept.
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
}

/// Fits `log e = intercept + slope · log ε`. Errors that vanish to round-off
/// on every point give an infinite slope.
pub fn fit_slope(eps: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    if eps.len() != errors.len() || eps.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "fit".into(),
            reason: format!(
                "need at least two matching points, got {} and {}",
                eps.len(),
                errors.len()
            ),
        });
    }
    if errors.iter().all(|e| *e <= f64::MIN_POSITIVE) {
        return Ok(SlopeFit {
            slope: f64::INFINITY,
            intercept: f64::NEG_INFINITY,
            residual: 0.0,
        });
    }
    if errors.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "fit".into(),
            reason: "errors and ε must be positive and finite".into(),
        });
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
    })
}

/// Outcome of comparing an observed rate with the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Observed slope ≥ predicted − slack.
    Pass,
    /// Observed slope below predicted − slack.
    Fail,
    /// No predicted rate exists.
    Unavailable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unavailable => "unavailable",
        })
    }
}

/// One measured error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    /// Thickness.
    pub epsilon: f64,
    /// Norm.
    pub norm: NormId,
    /// Error value.
    pub value: f64,
}

/// Fitted and predicted rate of one norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    /// Norm.
    pub norm: NormId,
    /// Fit over the finest ε values.
    pub fit: SlopeFit,
    /// Predicted exponent.
    pub predicted: Option<f64>,
    /// Verdict.
    pub verdict: Verdict,
}

/// Result of an ε-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Regime of the sweep.
    pub regime: Regime,
    /// Every measured error, ordered by ε then norm.
    pub records: Vec<ErrorRecord>,
    /// One row per norm.
    pub rates: Vec<RateRow>,
    /// Slack used by the verdicts.
    pub slack: f64,
}

impl RateReport {
    /// Row of a norm.
    pub fn rate(&self, norm: NormId) -> Option<&RateRow> {
        self.rates.iter().find(|r| r.norm == norm)
    }

    /// Errors of a norm in ladder order.
    pub fn errors(&self, norm: NormId) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter(|r| r.norm == norm)
            .map(|r| (r.epsilon, r.value))
            .collect()
    }

    /// True if no verdict is a failure.
    pub fn passed(&self) -> bool {
        self.rates.iter().all(|r| r.verdict != Verdict::Fail)
    }
}

/// Builds a report from records; the fit uses the `fit_points` smallest ε.
pub fn rate_report(
    regime: Regime,
    records: Vec<ErrorRecord>,
    fit_points: usize,
    slack: f64,
) -> Result<RateReport> {
    let mut norms: Vec<NormId> = Vec::new();
    for r in &records {
        if !norms.contains(&r.norm) {
            norms.push(r.norm);
        }
    }
    let mut rates = Vec::with_capacity(norms.len());
    for norm in norms {
        let mut pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.norm == norm)
            .map(|r| (r.epsilon, r.value))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.truncate(fit_points.max(2));
        let (e, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let fit = fit_slope(&e, &v)?;
        let predicted = predicted_rate(&regime, norm);
        let verdict = match predicted {
            None => Verdict::Unavailable,
            Some(p) if fit.slope >= p - slack => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        rates.push(RateRow {
            norm,
            fit,
            predicted,
            verdict,
        });
    }
    Ok(RateReport {
        regime,
        records,
        rates,
        slack,
    })
}

/// Discretization and fitting parameters of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Strictly decreasing ε ladder (at least three values).
    pub ladder: Vec<f64>,
    /// Longitudinal cells.
    pub n_x: usize,
    /// Time steps.
    pub n_t: usize,
    /// Rings of the reference mesh.
    pub n_r: usize,
    /// Number of finest ε values used by the fit.
    pub fit_points: usize,
    /// Verdict slack.
    pub slack: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ladder: DEFAULT_LADDER.to_vec(),
            n_x: 200,
            n_t: 200,
            n_r: DEFAULT_RINGS,
            fit_points: DEFAULT_FIT_POINTS,
            slack: DEFAULT_SLACK,
        }
    }
}

/// Limit solution (with corrector where the regime needs one).
pub fn reduced_solution(spec: &ProblemSpec, grid: Grid1D) -> Result<ReducedSolution> {
    let mut base = solve_limit(spec, grid)?;
    if !spec.regime().is_case1() {
        base.corrector = Some(solve_corrector(spec, &base, grid)?);
    }
    Ok(base)
}

/// Every norm of the regime for one reference run against its
/// approximation.
pub fn measure(
    spec: &ProblemSpec,
    reference: &FullSolution,
    approx: &ApproxFields,
    reduced: &ReducedSolution,
) -> Result<Vec<(NormId, f64)>> {
    let regime = spec.regime();
    let mesh = reference.mesh;
    let grid = reference.grid;
    let d = spec.derived()?;
    let levels = reference.times.len();
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let field = |f: &dyn Fn(usize) -> Vec<f64>| SpaceTimeField {
        mesh,
        grid,
        levels: (0..levels).map(f).collect(),
    };
    let p_err = field(&|n| diff(&reference.p[n], &approx.p[n]));
    let s_err = field(&|n| diff(&reference.s[n], &approx.s[n]));
    let mut pw_err = Vec::with_capacity(levels);
    let mut po_err = Vec::with_capacity(levels);
    for n in 0..levels {
        let (pw, po) = reconstruct_phase_pressures(&reference.s[n], &reference.p[n], &d)?;
        pw_err.push(diff(&pw, &approx.pw[n]));
        po_err.push(diff(&po, &approx.po[n]));
    }
    let pw_err = SpaceTimeField {
        mesh,
        grid,
        levels: pw_err,
    };
    let po_err = SpaceTimeField {
        mesh,
        grid,
        levels: po_err,
    };
    let e = mesh.epsilon.powf(spec.alpha - 1.0);
    let line = |n: usize, pressure: bool| -> Vec<f64> {
        let mean = cross_section_mean(
            if pressure {
                &reference.p[n]
            } else {
                &reference.s[n]
            },
            &mesh,
        );
        (0..=mesh.n_x)
            .map(|j| {
                let mut a = if pressure {
                    reduced.p0[n][j]
                } else {
                    reduced.s0[n][j]
                };
                if let (false, Some(c)) = (regime.is_case1(), &reduced.corrector) {
                    a += e * if pressure { c.p[n][j] } else { c.s[n][j] };
                }
                mean[j] - a
            })
            .collect()
    };
    let mp: Vec<Vec<f64>> = (0..levels).map(|n| line(n, true)).collect();
    let ms: Vec<Vec<f64>> = (0..levels).map(|n| line(n, false)).collect();
    let mut v_err = Vec::with_capacity(levels - 1);
    let mut vw_err = Vec::with_capacity(levels - 1);
    let mut vo_err = Vec::with_capacity(levels - 1);
    for n in 1..levels {
        let r: VelocityField = velocity_field(spec, reference, n)?;
        let a = &approx.velocity[n - 1];
        v_err.push((diff(&r.x_total, &a.x_total), diff(&r.r_total, &a.r_total)));
        vw_err.push((diff(&r.x_water, &a.x_water), diff(&r.r_water, &a.r_water)));
        vo_err.push((diff(&r.x_oil, &a.x_oil), diff(&r.r_oil, &a.r_oil)));
    }
    let beta = spec.beta;
    norms_for(&regime)
        .into_iter()
        .map(|id| {
            let v = match id.quantity {
                Quantity::Pressure => scaled_norm(&p_err, id.kind, beta)?,
                Quantity::Saturation => scaled_norm(&s_err, id.kind, beta)?,
                Quantity::WaterPressure => scaled_norm(&pw_err, id.kind, beta)?,
                Quantity::OilPressure => scaled_norm(&po_err, id.kind, beta)?,
                Quantity::MeanPressure => line_norm(&grid, &mp, id.kind)?,
                Quantity::MeanSaturation => line_norm(&grid, &ms, id.kind)?,
                Quantity::Velocity => velocity_norm(&mesh, &grid, &v_err, id.kind)?,
                Quantity::WaterVelocity => velocity_norm(&mesh, &grid, &vw_err, id.kind)?,
                Quantity::OilVelocity => velocity_norm(&mesh, &grid, &vo_err, id.kind)?,
            };
            Ok((id, v))
        })
        .collect()
}

/// Runs the ε-sweep: the limit solution, its corrector and the cell cache
/// are computed once; the reference solves run concurrently, one per ε.
pub fn sweep(spec: &ProblemSpec, config: &SweepConfig) -> Result<RateReport> {
    let regime = spec.regime();
    regime.require_supported()?;
    let ladder = &config.ladder;
    if ladder.len() < 3 || ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter {
            name: "ladder".into(),
            reason: "need at least three strictly decreasing values of epsilon".into(),
        });
    }
    if spec.lateral.cos_mode != 0.0 {
        return Err(Error::InvalidParameter {
            name: "cos_mode".into(),
            reason: "sweeps need angle-independent lateral flow".into(),
        });
    }
    let length = spec.geometry.length;
    let grid = Grid1D::for_spec(spec, config.n_x, config.n_t)?;
    let reduced = reduced_solution(spec, grid)?;
    let probe = AxisymMesh::new(config.n_x, config.n_r, length, ladder[0].min(0.5 * length))?;
    let cache = CellCache::build(spec, &probe)?;
    let results: Vec<Result<Vec<(NormId, f64)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ladder
            .iter()
            .map(|&eps| {
                let (reduced, cache) = (&reduced, &cache);
                scope.spawn(move || -> Result<Vec<(NormId, f64)>> {
                    let run = || -> Result<Vec<(NormId, f64)>> {
                        let mut local = spec.clone();
                        local.geometry.epsilon = eps;
                        let mesh = AxisymMesh::new(config.n_x, config.n_r, length, eps)?;
                        let reference = solve_reference(&local, mesh, grid)?;
                        let approx = reconstruct(&local, reduced, cache, &mesh)?;
                        measure(&local, &reference, &approx, reduced)
                    };
                    run().map_err(|e| Error::Sweep(format!("epsilon = {eps}: {e}")))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Sweep("worker panicked".into())))
            })
            .collect()
    });
    let mut records = Vec::new();
    for (eps, res) in ladder.iter().zip(results) {
        for (norm, value) in res? {
            records.push(ErrorRecord {
                epsilon: *eps,
                norm,
                value,
            });
        }
    }
    rate_report(regime, records, config.fit_points, config.slack)
}

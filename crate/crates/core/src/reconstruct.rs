//! Asymptotic approximation of pressure, saturation, velocities and phase
//! pressures on the reference mesh, assembled from the limit solution, its
//! corrector and the cell problem.
//!
//! The cell correction is `u(x, ξ, t) = Q(x, t)/λ(s₀) · U(x, ξ)`, where `U`
//! solves the cell problem with source 2 and boundary flux 1. `U` is
//! computed once per longitudinal node (once overall when the cell tensor
//! does not depend on `x`) and evaluated at the ring centres of the
//! reference mesh. The mobility is taken from the previous time level, as in
//! the pressure step of both solvers.

use crate::cell::{evaluate_cell, solve_cell_at, CellSolution, DiskMesh};
use crate::constitutive::DerivedClosures;
use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, Regime};
use crate::reduced1d::{face_fields, ReducedSolution};
use crate::reference::{AxisymMesh, VelocityField};

/// Angular resolution of the cell meshes used for the reconstruction.
pub const CELL_SECTORS: usize = 8;

/// Cell profile `U(ρ)` at the ring centres and its radial difference
/// quotients at the interior ring interfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    /// `U(ρ_k)` for each ring.
    pub values: Vec<f64>,
    /// `(U(ρ_{k+1}) − U(ρ_k))/Δρ` at each interior interface.
    pub slopes: Vec<f64>,
}

/// Unit-data cell solutions per longitudinal node, with a zero shortcut
/// where the lateral flow vanishes.
#[derive(Debug, Clone)]
pub struct CellCache {
    n_r: usize,
    solutions: Vec<Option<CellSolution>>,
    profiles: Vec<Option<RadialProfile>>,
}

impl CellCache {
    /// Solves the unit-data cell problems for every longitudinal node of
    /// `mesh` on a disk mesh with the same radial resolution.
    pub fn build(spec: &ProblemSpec, mesh: &AxisymMesh) -> Result<Self> {
        let disk = DiskMesh::new(mesh.n_r.max(3), CELL_SECTORS)?;
        let uniform = spec.cell_tensor_is_uniform_in_x();
        let mut shared: Option<CellSolution> = None;
        let mut solutions = Vec::with_capacity(mesh.n_x + 1);
        for j in 0..=mesh.n_x {
            let x = mesh.x(j);
            if spec.lateral.amplitude == 0.0 || spec.lateral.profile(x) == 0.0 {
                solutions.push(None);
                continue;
            }
            let sol = match (&shared, uniform) {
                (Some(s), true) => s.clone(),
                _ => {
                    let s = solve_cell_at(
                        &disk,
                        |a, b| spec.cell_tensor(x, a, b),
                        |_, _| 2.0,
                        |_| 1.0,
                        x,
                        0.0,
                    )?;
                    if uniform {
                        shared = Some(s.clone());
                    }
                    s
                }
            };
            solutions.push(Some(sol));
        }
        let mut profiles = Vec::with_capacity(solutions.len());
        for sol in &solutions {
            profiles.push(match sol {
                None => None,
                Some(s) => Some(radial_profile(s, mesh)?),
            });
        }
        Ok(Self {
            n_r: mesh.n_r,
            solutions,
            profiles,
        })
    }

    /// Number of longitudinal nodes covered.
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    /// True if the cache covers no nodes.
    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Profile at node `j` (`None` where the lateral flow vanishes).
    pub fn profile(&self, j: usize) -> Option<&RadialProfile> {
        self.profiles[j].as_ref()
    }

    /// `U(ρ)` at node `j` for any `ρ ∈ [0, 1]`.
    pub fn value_at(&self, j: usize, rho: f64) -> Result<f64> {
        match &self.solutions[j] {
            None => Ok(0.0),
            Some(s) => Ok(evaluate_cell(s, rho, 0.0)?.0),
        }
    }

    fn check(&self, mesh: &AxisymMesh) -> Result<()> {
        if self.n_r != mesh.n_r || self.len() != mesh.n_x + 1 {
            return Err(Error::InvalidParameter {
                name: "cell cache".into(),
                reason: "cache was built for a different mesh".into(),
            });
        }
        Ok(())
    }
}

fn radial_profile(sol: &CellSolution, mesh: &AxisymMesh) -> Result<RadialProfile> {
    let values = (0..mesh.n_r)
        .map(|k| evaluate_cell(sol, mesh.rho(k), 0.0).map(|v| v.0))
        .collect::<Result<Vec<f64>>>()?;
    let slopes = values
        .windows(2)
        .map(|w| (w[1] - w[0]) / mesh.d_rho())
        .collect();
    Ok(RadialProfile { values, slopes })
}

/// Approximation fields on the reference mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxFields {
    /// Regime the formulas were taken from.
    pub regime: Regime,
    /// Mesh the fields live on.
    pub mesh: AxisymMesh,
    /// Pressure approximation per level.
    pub p: Vec<Vec<f64>>,
    /// Saturation approximation per level.
    pub s: Vec<Vec<f64>>,
    /// Water-pressure approximation per level.
    pub pw: Vec<Vec<f64>>,
    /// Oil-pressure approximation per level.
    pub po: Vec<Vec<f64>>,
    /// Velocity approximations for levels `1..=n_t` (entry `n − 1`).
    pub velocity: Vec<VelocityField>,
}

/// Exponents `(γ_u, e)` of the cell term and of the corrector weight.
struct Exponents {
    cell: f64,
    corrector: Option<f64>,
}

fn exponents(regime: &Regime, alpha: f64, beta: f64, eps: f64) -> Result<Exponents> {
    regime.require_supported()?;
    Ok(match regime {
        Regime::Case1 { .. } => Exponents {
            cell: eps.powf(2.0 - beta),
            corrector: None,
        },
        _ => Exponents {
            cell: eps.powf(alpha - beta + 1.0),
            corrector: Some(eps.powf(alpha - 1.0)),
        },
    })
}

fn check_inputs(reduced: &ReducedSolution, mesh: &AxisymMesh, cache: &CellCache) -> Result<()> {
    cache.check(mesh)?;
    if reduced.grid.n_x != mesh.n_x {
        return Err(Error::InvalidParameter {
            name: "mesh".into(),
            reason: "reduced solution and mesh must share the longitudinal grid".into(),
        });
    }
    if !reduced.regime.is_case1() && reduced.corrector.is_none() {
        return Err(Error::InvalidParameter {
            name: "corrector".into(),
            reason: "the two-term approximation needs the corrector".into(),
        });
    }
    Ok(())
}

/// Amplitude `Q(x_j, t_n)/λ(s₀)` of the cell term, with the mobility of the
/// previous level.
fn cell_amplitude(
    spec: &ProblemSpec,
    d: &DerivedClosures,
    reduced: &ReducedSolution,
    j: usize,
    n: usize,
) -> f64 {
    let x = reduced.grid.x(j);
    let q = spec.lateral.magnitude(x, reduced.times[n]);
    if q == 0.0 {
        return 0.0;
    }
    q / d.lambda(reduced.s0[n.saturating_sub(1)][j])
}

/// Pressure and saturation approximations at level `n`, indexed by
/// [`AxisymMesh::index`].
pub fn assemble_state(
    spec: &ProblemSpec,
    reduced: &ReducedSolution,
    cache: &CellCache,
    mesh: &AxisymMesh,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_inputs(reduced, mesh, cache)?;
    let d = spec.derived()?;
    let ex = exponents(&reduced.regime, spec.alpha, spec.beta, mesh.epsilon)?;
    let mut p = vec![0.0; mesh.len()];
    let mut s = vec![0.0; mesh.len()];
    for j in 0..=mesh.n_x {
        let (mut pj, mut sj) = (reduced.p0[n][j], reduced.s0[n][j]);
        if let (Some(e), Some(c)) = (ex.corrector, &reduced.corrector) {
            pj += e * c.p[n][j];
            sj += e * c.s[n][j];
        }
        let amp = ex.cell * cell_amplitude(spec, &d, reduced, j, n);
        for k in 0..mesh.n_r {
            let i = mesh.index(j, k);
            p[i] = pj + cache.profile(j).map_or(0.0, |u| amp * u.values[k]);
            s[i] = sj;
        }
    }
    Ok((p, s))
}

/// Pressure approximation at level `n`, node `j` and arbitrary stretched
/// radius `ρ ∈ [0, 1]`.
pub fn assemble_pressure_at(
    spec: &ProblemSpec,
    reduced: &ReducedSolution,
    cache: &CellCache,
    mesh: &AxisymMesh,
    n: usize,
    j: usize,
    rho: f64,
) -> Result<f64> {
    check_inputs(reduced, mesh, cache)?;
    let d = spec.derived()?;
    let ex = exponents(&reduced.regime, spec.alpha, spec.beta, mesh.epsilon)?;
    let mut p = reduced.p0[n][j];
    if let (Some(e), Some(c)) = (ex.corrector, &reduced.corrector) {
        p += e * c.p[n][j];
    }
    Ok(p + ex.cell * cell_amplitude(spec, &d, reduced, j, n) * cache.value_at(j, rho)?)
}

/// Velocity approximations at level `n ≥ 1` on the x-faces and interior
/// radial faces of the reference mesh.
pub fn reconstruct_velocities(
    spec: &ProblemSpec,
    reduced: &ReducedSolution,
    cache: &CellCache,
    mesh: &AxisymMesh,
    n: usize,
) -> Result<VelocityField> {
    check_inputs(reduced, mesh, cache)?;
    let d = spec.derived()?;
    let regime = reduced.regime;
    exponents(&regime, spec.alpha, spec.beta, mesh.epsilon)?;
    let faces = face_fields(spec, reduced, n)?;
    let (nx, nr) = (mesh.n_x, mesh.n_r);
    let eps = mesh.epsilon;
    let with_corrector = !regime.is_case1() && regime.beta_is_zero();
    let e = eps.powf(spec.alpha - 1.0);

    let mut line_v = faces.velocity.clone();
    let mut line_w = faces.water();
    if with_corrector {
        let (dv, db, dd) = faces
            .corrector
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter {
                name: "corrector".into(),
                reason: "the two-term approximation needs the corrector".into(),
            })?;
        for f in 0..nx {
            let v = faces.velocity[f] + e * dv[f];
            line_v[f] = v;
            line_w[f] = (faces.frac[f] + e * db[f]) * v - (faces.diffusion[f] + e * dd[f]);
        }
    }
    let mut x_total = Vec::with_capacity(nx * nr);
    let mut x_water = Vec::with_capacity(nx * nr);
    for f in 0..nx {
        for _ in 0..nr {
            x_total.push(line_v[f]);
            x_water.push(line_w[f]);
        }
    }

    let mut r_total = vec![0.0; (nx + 1) * (nr - 1)];
    let mut r_water = vec![0.0; (nx + 1) * (nr - 1)];
    if regime.beta_is_zero() {
        let scale = eps.powf(spec.alpha);
        let t = reduced.times[n];
        for j in 0..=nx {
            let Some(u) = cache.profile(j) else { continue };
            let x = mesh.x(j);
            let m = spec.lateral.magnitude(x, t);
            let s0 = reduced.s0[n][j];
            let mut frac = d.b(s0);
            if with_corrector {
                let c = reduced.corrector.as_ref().expect("checked above");
                frac += e * d.state(s0).d_b * c.s[n][j];
            }
            for k in 0..nr - 1 {
                // −ε^α λ(s₀) k⊥ ∂ρu with u = Q/λ(s₀) · U
                let v = -scale * spec.k_perp(x, mesh.rho_face(k)) * m * u.slopes[k];
                r_total[j * (nr - 1) + k] = v;
                r_water[j * (nr - 1) + k] = frac * v;
            }
        }
    }
    Ok(VelocityField::from_total_and_water(
        x_total, r_total, x_water, r_water,
    ))
}

/// Phase pressures `P_w = P − ∫₀^S (λ_o/λ) p_c'` and `P_o = P_w + p_c(S)`
/// for nodal pressure and saturation arrays.
pub fn reconstruct_phase_pressures(
    s: &[f64],
    p: &[f64],
    closures: &DerivedClosures,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if s.len() != p.len() {
        return Err(Error::InvalidParameter {
            name: "fields".into(),
            reason: format!(
                "saturation and pressure lengths differ ({} vs {})",
                s.len(),
                p.len()
            ),
        });
    }
    let mut pw = Vec::with_capacity(p.len());
    let mut po = Vec::with_capacity(p.len());
    for (sv, pv) in s.iter().zip(p) {
        if !(*sv > 0.0 && *sv < 1.0) {
            return Err(Error::InvalidParameter {
                name: "saturation".into(),
                reason: format!("phase pressures need values in (0, 1), got {sv}"),
            });
        }
        let w = pv - closures.reduced_shift(*sv);
        pw.push(w);
        po.push(w + closures.capillary(*sv));
    }
    Ok((pw, po))
}

/// All approximation fields of the regime on `mesh`.
pub fn reconstruct(
    spec: &ProblemSpec,
    reduced: &ReducedSolution,
    cache: &CellCache,
    mesh: &AxisymMesh,
) -> Result<ApproxFields> {
    let d = spec.derived()?;
    let levels = reduced.times.len();
    let case1 = reduced.regime.is_case1();
    let mut p = Vec::with_capacity(levels);
    let mut s = Vec::with_capacity(levels);
    let mut pw = Vec::with_capacity(levels);
    let mut po = Vec::with_capacity(levels);
    for n in 0..levels {
        let (pn, sn) = assemble_state(spec, reduced, cache, mesh, n)?;
        let (w, o) = if case1 {
            let s0: Vec<f64> = (0..mesh.len())
                .map(|i| reduced.s0[n][i / mesh.n_r])
                .collect();
            reconstruct_phase_pressures(&s0, &pn, &d)?
        } else {
            reconstruct_phase_pressures(&sn, &pn, &d)?
        };
        p.push(pn);
        s.push(sn);
        pw.push(w);
        po.push(o);
    }
    let velocity = (1..levels)
        .map(|n| reconstruct_velocities(spec, reduced, cache, mesh, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(ApproxFields {
        regime: reduced.regime,
        mesh: *mesh,
        p,
        s,
        pw,
        po,
        velocity,
    })
}

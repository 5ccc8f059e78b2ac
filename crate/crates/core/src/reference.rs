//! Axisymmetric finite-volume solver for the full problem on the thin
//! cylinder `(0, ℓ) × εϖ` with angle-independent data.
//!
//! The cross-section is resolved in the stretched radius `ρ = r/ε` by
//! `n_r` cell-centred rings; the longitudinal grid is the vertex-centred
//! grid of the limit solver. All balances are divided by `π ε²`, so an
//! x-face of ring `k` has area fraction `Â_k = ρ_{k+½}² − ρ_{k−½}²` and a
//! radial face at `ρ_f` next to node `j` has transmissibility
//! `2 ρ_f w_j ε^{β−2} h / Δρ`. Each time step solves the pressure with the
//! mobility of the previous saturation, then advances the saturation by an
//! implicit Euler step with the face-flux rule of the limit solver.

use crate::constitutive::DerivedClosures;
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::problem::ProblemSpec;
use crate::reduced1d::Grid1D;
use crate::scheme::{
    advection_rule, check_bounds, newton, water_flux, Advection, BandedSystem, MAX_HALVINGS,
};

/// Default number of rings.
pub const DEFAULT_RINGS: usize = 32;

/// Slack allowed on the maximum principle away from the lateral boundary.
pub const INTERIOR_SLACK: f64 = 1e-6;

/// Slack allowed on the maximum principle in the outermost ring.
pub const BOUNDARY_SLACK: f64 = 1e-3;

/// Longitudinal nodes times radial rings on `(0, ℓ) × (0, ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisymMesh {
    /// Number of longitudinal cells (nodes `0..=n_x`).
    pub n_x: usize,
    /// Number of rings.
    pub n_r: usize,
    /// Length ℓ.
    pub length: f64,
    /// Cross-section radius ε.
    pub epsilon: f64,
}

impl AxisymMesh {
    /// Builds a mesh; needs `n_x ≥ 8`, `n_r ≥ 2` and `0 < ε < ℓ`.
    pub fn new(n_x: usize, n_r: usize, length: f64, epsilon: f64) -> Result<Self> {
        if n_x < 8 || n_r < 2 {
            return Err(Error::InvalidParameter {
                name: "mesh".into(),
                reason: format!("need n_x >= 8 and n_r >= 2, got {n_x} and {n_r}"),
            });
        }
        if !(epsilon > 0.0 && epsilon < length) {
            return Err(Error::InvalidParameter {
                name: "epsilon".into(),
                reason: format!("need 0 < epsilon < length, got {epsilon}"),
            });
        }
        Ok(Self {
            n_x,
            n_r,
            length,
            epsilon,
        })
    }

    /// Number of nodes `(n_x + 1) n_r`.
    pub fn len(&self) -> usize {
        (self.n_x + 1) * self.n_r
    }

    /// True if the mesh has no nodes (never the case for a built mesh).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of node `j`, ring `k`.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.n_r + k
    }

    /// Longitudinal mesh width.
    pub fn dx(&self) -> f64 {
        self.length / self.n_x as f64
    }

    /// Longitudinal node `j`.
    pub fn x(&self, j: usize) -> f64 {
        self.length * j as f64 / self.n_x as f64
    }

    /// Longitudinal control-volume length of node `j`.
    pub fn node_width(&self, j: usize) -> f64 {
        if j == 0 || j == self.n_x {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }

    /// Ring width in `ρ`.
    pub fn d_rho(&self) -> f64 {
        1.0 / self.n_r as f64
    }

    /// Centre of ring `k` in `ρ`.
    pub fn rho(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.d_rho()
    }

    /// Outer edge of ring `k` in `ρ`.
    pub fn rho_face(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.d_rho()
    }

    /// Area fraction `Â_k` of ring `k` (the fractions sum to one).
    pub fn area_fraction(&self, k: usize) -> f64 {
        let h = self.d_rho();
        (2 * k + 1) as f64 * h * h
    }

    /// Physical volume of the control volume of node `(j, k)`.
    pub fn volume(&self, j: usize, k: usize) -> f64 {
        std::f64::consts::PI
            * self.epsilon
            * self.epsilon
            * self.area_fraction(k)
            * self.node_width(j)
    }

    /// Total volume `π ε² ℓ`.
    pub fn total_volume(&self) -> f64 {
        (0..=self.n_x)
            .flat_map(|j| (0..self.n_r).map(move |k| (j, k)))
            .map(|(j, k)| self.volume(j, k))
            .sum()
    }
}

/// Reference solution on all time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSolution {
    /// Mesh.
    pub mesh: AxisymMesh,
    /// Time grid (shares `n_x` with the mesh).
    pub grid: Grid1D,
    /// Lateral-flux exponent α.
    pub alpha: f64,
    /// Transverse-permeability exponent β.
    pub beta: f64,
    /// Time levels.
    pub times: Vec<f64>,
    /// Pressure per level, indexed by [`AxisymMesh::index`].
    pub p: Vec<Vec<f64>>,
    /// Saturation per level, indexed by [`AxisymMesh::index`].
    pub s: Vec<Vec<f64>>,
    /// Number of sub-steps per step (1 unless halving occurred).
    pub substeps: Vec<usize>,
}

impl FullSolution {
    /// Cross-section radius ε.
    pub fn epsilon(&self) -> f64 {
        self.mesh.epsilon
    }
}

/// Face fluxes of one level, in the scaled units of the balances.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    /// Total flux through x-face `(f, k)` at index `f n_r + k`.
    pub x_total: Vec<f64>,
    /// Total flux through the radial face outside ring `k` of node `j`, at
    /// index `j (n_r − 1) + k` (interior faces only; zero at end nodes).
    pub r_total: Vec<f64>,
    /// Water flux through the same x-faces.
    pub x_water: Vec<f64>,
    /// Water flux through the same radial faces.
    pub r_water: Vec<f64>,
    /// Lateral mixture outflow per node.
    pub lateral: Vec<f64>,
}

/// Physical velocities of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    /// Longitudinal total velocity on x-faces (`f n_r + k`).
    pub x_total: Vec<f64>,
    /// Radial total velocity on interior radial faces (`j (n_r − 1) + k`).
    pub r_total: Vec<f64>,
    /// Longitudinal water velocity on x-faces.
    pub x_water: Vec<f64>,
    /// Radial water velocity on interior radial faces.
    pub r_water: Vec<f64>,
    /// Longitudinal oil velocity `V − V_w` on x-faces.
    pub x_oil: Vec<f64>,
    /// Radial oil velocity `V − V_w` on interior radial faces.
    pub r_oil: Vec<f64>,
}

impl VelocityField {
    /// Builds the field from total and water components, setting the oil
    /// components to their difference.
    pub fn from_total_and_water(
        x_total: Vec<f64>,
        r_total: Vec<f64>,
        x_water: Vec<f64>,
        r_water: Vec<f64>,
    ) -> Self {
        let x_oil = x_total.iter().zip(&x_water).map(|(v, w)| v - w).collect();
        let r_oil = r_total.iter().zip(&r_water).map(|(v, w)| v - w).collect();
        Self {
            x_total,
            r_total,
            x_water,
            r_water,
            x_oil,
            r_oil,
        }
    }
}

struct Operator<'a> {
    spec: &'a ProblemSpec,
    d: &'a DerivedClosures,
    mesh: AxisymMesh,
    k1: Vec<f64>,
    porosity: Vec<f64>,
    /// x diffusion transmissibility per face and ring.
    tdx: Vec<f64>,
    /// radial diffusion transmissibility per node and interior face.
    tdr: Vec<f64>,
    /// radial geometric factor `2 ρ_f w_j ε^{β−2}/Δρ` per node and face.
    geo_r: Vec<f64>,
    /// transverse permeability per node and ring.
    kperp: Vec<f64>,
    ratio: f64,
    lateral_scale: f64,
    bounds: (f64, f64),
}

impl<'a> Operator<'a> {
    fn new(spec: &'a ProblemSpec, d: &'a DerivedClosures, mesh: AxisymMesh) -> Self {
        let (nx, nr) = (mesh.n_x, mesh.n_r);
        let dx = mesh.dx();
        let eps = mesh.epsilon;
        let k1 = (0..=nx).map(|j| spec.k1(mesh.x(j))).collect();
        let porosity = (0..=nx).map(|j| spec.porosity(mesh.x(j))).collect();
        let mut tdx = Vec::with_capacity(nx * nr);
        for f in 0..nx {
            let kf = spec.k1((f as f64 + 0.5) * dx);
            for k in 0..nr {
                tdx.push(mesh.area_fraction(k) * kf / dx);
            }
        }
        let scale = eps.powf(spec.beta - 2.0);
        let mut geo_r = Vec::with_capacity((nx + 1) * (nr - 1));
        let mut tdr = Vec::with_capacity((nx + 1) * (nr - 1));
        for j in 0..=nx {
            for k in 0..nr - 1 {
                let rf = mesh.rho_face(k);
                let g = 2.0 * rf * mesh.node_width(j) * scale / mesh.d_rho();
                geo_r.push(g);
                tdr.push(g * spec.k_perp(mesh.x(j), rf));
            }
        }
        let mut kperp = Vec::with_capacity(mesh.len());
        for j in 0..=nx {
            for k in 0..nr {
                kperp.push(spec.k_perp(mesh.x(j), mesh.rho(k)));
            }
        }
        let bounds = spec.saturation_bounds();
        Self {
            spec,
            d,
            mesh,
            k1,
            porosity,
            tdx,
            tdr,
            geo_r,
            kperp,
            ratio: d.diffusion_advection_ratio(bounds.0, bounds.1),
            lateral_scale: eps.powf(spec.alpha - 1.0),
            bounds,
        }
    }

    fn unknowns(&self) -> usize {
        (self.mesh.n_x - 1) * self.mesh.n_r
    }

    /// Unknown number of node `(j, k)`, if it is not a Dirichlet node.
    #[inline]
    fn unknown(&self, j: usize, k: usize) -> Option<usize> {
        if j == 0 || j == self.mesh.n_x {
            None
        } else {
            Some((j - 1) * self.mesh.n_r + k)
        }
    }

    fn lateral(&self, t: f64) -> Vec<f64> {
        (0..=self.mesh.n_x)
            .map(|j| {
                self.lateral_scale * self.spec.qhat(self.mesh.x(j), t) * self.mesh.node_width(j)
            })
            .collect()
    }

    /// Total transmissibilities for the mobility of `s`.
    fn transmissibilities(&self, s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.mesh;
        let (nx, nr) = (m.n_x, m.n_r);
        let lam: Vec<f64> = s.iter().map(|v| self.d.lambda(*v)).collect();
        let mut tx = Vec::with_capacity(nx * nr);
        for f in 0..nx {
            for k in 0..nr {
                let a = lam[m.index(f, k)] * self.k1[f];
                let b = lam[m.index(f + 1, k)] * self.k1[f + 1];
                tx.push(m.area_fraction(k) * 2.0 * a * b / (a + b) / m.dx());
            }
        }
        let mut tr = Vec::with_capacity((nx + 1) * (nr - 1));
        for j in 0..=nx {
            for k in 0..nr - 1 {
                let a = lam[m.index(j, k)] * self.kperp[m.index(j, k)];
                let b = lam[m.index(j, k + 1)] * self.kperp[m.index(j, k + 1)];
                tr.push(self.geo_r[j * (nr - 1) + k] * 2.0 * a * b / (a + b));
            }
        }
        (tx, tr)
    }

    /// Solves the pressure equation at time `t` with the mobility of `s`.
    fn pressure(&self, s: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let m = self.mesh;
        let (nx, nr) = (m.n_x, m.n_r);
        let (tx, tr) = self.transmissibilities(s);
        let lateral = self.lateral(t);
        let (q0, ql) = (self.spec.q0.value(t), self.spec.q_ell.value(t));
        let n = self.unknowns();
        let mut a = BandMatrix::zeros(n, nr, nr);
        let mut rhs = vec![0.0; n];
        for j in 1..nx {
            rhs[self.unknown(j, nr - 1).unwrap()] -= lateral[j];
        }
        let couple = |a: &mut BandMatrix,
                      rhs: &mut [f64],
                      c1: (usize, usize),
                      c2: (usize, usize),
                      t: f64,
                      p_dir: [f64; 2]| {
            let u1 = self.unknown(c1.0, c1.1);
            let u2 = self.unknown(c2.0, c2.1);
            if let Some(i) = u1 {
                a.add(i, i, t);
                match u2 {
                    Some(k) => a.add(i, k, -t),
                    None => rhs[i] += t * p_dir[1],
                }
            }
            if let Some(i) = u2 {
                a.add(i, i, t);
                match u1 {
                    Some(k) => a.add(i, k, -t),
                    None => rhs[i] += t * p_dir[0],
                }
            }
        };
        let dir = |j: usize| if j == 0 { q0 } else { ql };
        for f in 0..nx {
            for k in 0..nr {
                couple(
                    &mut a,
                    &mut rhs,
                    (f, k),
                    (f + 1, k),
                    tx[f * nr + k],
                    [dir(f), dir(f + 1)],
                );
            }
        }
        for j in 1..nx {
            for k in 0..nr - 1 {
                couple(
                    &mut a,
                    &mut rhs,
                    (j, k),
                    (j, k + 1),
                    tr[j * (nr - 1) + k],
                    [0.0, 0.0],
                );
            }
        }
        a.factor()?.solve(&mut rhs);
        let mut p = vec![0.0; m.len()];
        for k in 0..nr {
            p[m.index(0, k)] = q0;
            p[m.index(nx, k)] = ql;
        }
        for j in 1..nx {
            for k in 0..nr {
                p[m.index(j, k)] = rhs[self.unknown(j, k).unwrap()];
            }
        }
        Ok((p, tx, tr))
    }

    /// Total face fluxes of pressure `p` with transmissibilities `(tx, tr)`.
    fn total_fluxes(&self, p: &[f64], tx: &[f64], tr: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.mesh;
        let (nx, nr) = (m.n_x, m.n_r);
        let mut fx = Vec::with_capacity(nx * nr);
        for f in 0..nx {
            for k in 0..nr {
                fx.push(tx[f * nr + k] * (p[m.index(f, k)] - p[m.index(f + 1, k)]));
            }
        }
        let mut fr = Vec::with_capacity((nx + 1) * (nr - 1));
        for j in 0..=nx {
            for k in 0..nr - 1 {
                fr.push(tr[j * (nr - 1) + k] * (p[m.index(j, k)] - p[m.index(j, k + 1)]));
            }
        }
        (fx, fr)
    }

    fn rules(&self, fx: &[f64], fr: &[f64]) -> (Vec<Advection>, Vec<Advection>) {
        (
            fx.iter()
                .zip(&self.tdx)
                .map(|(f, t)| advection_rule(*f, *t, self.ratio))
                .collect(),
            fr.iter()
                .zip(&self.tdr)
                .map(|(f, t)| advection_rule(*f, *t, self.ratio))
                .collect(),
        )
    }
}

struct SaturationSystem<'o, 'a> {
    op: &'o Operator<'a>,
    s_old: &'o [f64],
    s_left: f64,
    s_right: f64,
    fx: &'o [f64],
    fr: &'o [f64],
    rx: &'o [Advection],
    rr: &'o [Advection],
    lateral: &'o [f64],
    dt: f64,
}

impl SaturationSystem<'_, '_> {
    fn full(&self, s: &[f64]) -> Vec<f64> {
        let m = self.op.mesh;
        let mut v = vec![0.0; m.len()];
        for k in 0..m.n_r {
            v[m.index(0, k)] = self.s_left;
            v[m.index(m.n_x, k)] = self.s_right;
        }
        v[m.n_r..m.n_x * m.n_r].copy_from_slice(s);
        v
    }
}

impl BandedSystem for SaturationSystem<'_, '_> {
    fn len(&self) -> usize {
        self.op.unknowns()
    }

    fn bandwidth(&self) -> usize {
        self.op.mesh.n_r
    }

    fn eval(&self, s: &[f64], res: &mut [f64], mut jac: Option<&mut BandMatrix>) {
        let op = self.op;
        let m = op.mesh;
        let (nx, nr) = (m.n_x, m.n_r);
        let full = self.full(s);
        let dx = m.dx();
        for j in 1..nx {
            for k in 0..nr {
                let i = op.unknown(j, k).unwrap();
                let acc = op.porosity[j] * m.area_fraction(k) * dx / self.dt;
                let v = full[m.index(j, k)];
                res[i] = acc * (v - self.s_old[m.index(j, k)]);
                if let Some(a) = jac.as_deref_mut() {
                    a.add(i, i, acc);
                }
                if k == nr - 1 {
                    let st = op.d.state(v);
                    res[i] += st.b * self.lateral[j];
                    if let Some(a) = jac.as_deref_mut() {
                        a.add(i, i, st.d_b * self.lateral[j]);
                    }
                }
            }
        }
        let face = |c1: (usize, usize),
                    c2: (usize, usize),
                    rule,
                    f,
                    td,
                    res: &mut [f64],
                    jac: &mut Option<&mut BandMatrix>| {
            let w = water_flux(
                op.d,
                rule,
                f,
                td,
                full[m.index(c1.0, c1.1)],
                full[m.index(c2.0, c2.1)],
            );
            let u1 = op.unknown(c1.0, c1.1);
            let u2 = op.unknown(c2.0, c2.1);
            if let Some(i) = u1 {
                res[i] += w.value;
            }
            if let Some(i) = u2 {
                res[i] -= w.value;
            }
            if let Some(a) = jac.as_deref_mut() {
                if let Some(i) = u1 {
                    a.add(i, i, w.d_left);
                    if let Some(k) = u2 {
                        a.add(i, k, w.d_right);
                    }
                }
                if let Some(i) = u2 {
                    a.add(i, i, -w.d_right);
                    if let Some(k) = u1 {
                        a.add(i, k, -w.d_left);
                    }
                }
            }
        };
        for f in 0..nx {
            for k in 0..nr {
                let e = f * nr + k;
                face(
                    (f, k),
                    (f + 1, k),
                    self.rx[e],
                    self.fx[e],
                    op.tdx[e],
                    res,
                    &mut jac,
                );
            }
        }
        for j in 1..nx {
            for k in 0..nr - 1 {
                let e = j * (nr - 1) + k;
                face(
                    (j, k),
                    (j, k + 1),
                    self.rr[e],
                    self.fr[e],
                    op.tdr[e],
                    res,
                    &mut jac,
                );
            }
        }
    }

    fn scale(&self, i: usize) -> f64 {
        let m = self.op.mesh;
        let j = i / m.n_r + 1;
        let k = i % m.n_r;
        self.dt / (self.op.porosity[j] * m.area_fraction(k) * m.dx())
    }
}

struct StepResult {
    p: Vec<f64>,
    s: Vec<f64>,
    substeps: usize,
}

fn advance(op: &Operator<'_>, s_old: &[f64], t0: f64, dt: f64, depth: usize) -> Result<StepResult> {
    let t1 = t0 + dt;
    let (p, tx, tr) = op.pressure(s_old, t1)?;
    let (fx, fr) = op.total_fluxes(&p, &tx, &tr);
    let (rx, rr) = op.rules(&fx, &fr);
    let lateral = op.lateral(t1);
    let l = op.mesh.length;
    let sys = SaturationSystem {
        op,
        s_old,
        s_left: op.spec.saturation.value(0.0, t1, l),
        s_right: op.spec.saturation.value(l, t1, l),
        fx: &fx,
        fr: &fr,
        rx: &rx,
        rr: &rr,
        lateral: &lateral,
        dt,
    };
    let m = op.mesh;
    let mut interior = s_old[m.n_r..m.n_x * m.n_r].to_vec();
    match newton(&sys, &mut interior) {
        Ok(_) => Ok(StepResult {
            s: sys.full(&interior),
            p,
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
            let a = advance(op, s_old, t0, half, depth + 1)?;
            let b = advance(op, &a.s, t0 + half, half, depth + 1)?;
            Ok(StepResult {
                substeps: a.substeps + b.substeps,
                ..b
            })
        }
    }
}

/// Solves the full problem at thickness `mesh.epsilon` on the time grid
/// `grid`, storing pressure and saturation at every level.
pub fn solve_reference(spec: &ProblemSpec, mesh: AxisymMesh, grid: Grid1D) -> Result<FullSolution> {
    spec.regime().require_supported()?;
    if spec.lateral.cos_mode != 0.0 {
        return Err(Error::InvalidParameter {
            name: "cos_mode".into(),
            reason: "the axisymmetric reference solver needs angle-independent lateral flow".into(),
        });
    }
    if grid.n_x != mesh.n_x || grid.length != mesh.length {
        return Err(Error::InvalidParameter {
            name: "mesh".into(),
            reason: "mesh and time grid must share the longitudinal grid".into(),
        });
    }
    let d = spec.derived()?;
    let op = Operator::new(spec, &d, mesh);
    let (nx, nr) = (mesh.n_x, mesh.n_r);
    let l = mesh.length;
    let mut s_init = vec![0.0; mesh.len()];
    for j in 0..=nx {
        let v = spec.saturation.value(mesh.x(j), 0.0, l);
        for k in 0..nr {
            s_init[mesh.index(j, k)] = v;
        }
    }
    let (p_init, _, _) = op.pressure(&s_init, 0.0)?;
    let (lo, hi) = op.bounds;
    let mut times = vec![0.0];
    let mut p = vec![p_init];
    let mut s = vec![s_init];
    let mut substeps = Vec::with_capacity(grid.n_t);
    for n in 0..grid.n_t {
        let t0 = grid.t(n);
        let step = advance(&op, &s[n], t0, grid.t(n + 1) - t0, 0)?;
        let t1 = grid.t(n + 1);
        for j in 0..=nx {
            let row = &step.s[mesh.index(j, 0)..mesh.index(j, 0) + nr];
            check_bounds(
                t1,
                &row[..nr - 1],
                lo - INTERIOR_SLACK,
                hi + INTERIOR_SLACK,
                |k| mesh.index(j, k),
            )?;
            check_bounds(
                t1,
                &row[nr - 1..],
                lo - BOUNDARY_SLACK,
                hi + BOUNDARY_SLACK,
                |_| mesh.index(j, nr - 1),
            )?;
        }
        times.push(t1);
        p.push(step.p);
        s.push(step.s);
        substeps.push(step.substeps);
    }
    Ok(FullSolution {
        mesh,
        grid,
        alpha: spec.alpha,
        beta: spec.beta,
        times,
        p,
        s,
        substeps,
    })
}

/// Scaled face fluxes of level `n ≥ 1`, recomputed from the stored
/// pressure, the previous saturation (mobility) and the new saturation.
pub fn flux_field(spec: &ProblemSpec, sol: &FullSolution, n: usize) -> Result<FluxField> {
    if n == 0 || n >= sol.times.len() {
        return Err(Error::InvalidParameter {
            name: "level".into(),
            reason: format!(
                "fluxes exist for levels 1..={}, got {n}",
                sol.times.len() - 1
            ),
        });
    }
    let d = spec.derived()?;
    let m = sol.mesh;
    let op = Operator::new(spec, &d, m);
    let (tx, tr) = op.transmissibilities(&sol.s[n - 1]);
    let (fx, fr) = op.total_fluxes(&sol.p[n], &tx, &tr);
    let (rx, rr) = op.rules(&fx, &fr);
    let s = &sol.s[n];
    let (nx, nr) = (m.n_x, m.n_r);
    let mut wx = Vec::with_capacity(fx.len());
    for f in 0..nx {
        for k in 0..nr {
            let e = f * nr + k;
            let w = water_flux(
                &d,
                rx[e],
                fx[e],
                op.tdx[e],
                s[m.index(f, k)],
                s[m.index(f + 1, k)],
            );
            wx.push(w.value);
        }
    }
    let mut wr = Vec::with_capacity(fr.len());
    for j in 0..=nx {
        for k in 0..nr - 1 {
            let e = j * (nr - 1) + k;
            let w = water_flux(
                &d,
                rr[e],
                fr[e],
                op.tdr[e],
                s[m.index(j, k)],
                s[m.index(j, k + 1)],
            );
            wr.push(w.value);
        }
    }
    Ok(FluxField {
        x_total: fx,
        r_total: fr,
        x_water: wx,
        r_water: wr,
        lateral: op.lateral(sol.times[n]),
    })
}

/// Physical velocities of level `n ≥ 1` on x-faces and interior radial
/// faces.
pub fn velocity_field(spec: &ProblemSpec, sol: &FullSolution, n: usize) -> Result<VelocityField> {
    let fl = flux_field(spec, sol, n)?;
    let m = sol.mesh;
    let (nx, nr) = (m.n_x, m.n_r);
    let eps = m.epsilon;
    let per_area = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(e, f)| f / m.area_fraction(e % nr))
            .collect()
    };
    let radial = |v: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len());
        for j in 0..=nx {
            for k in 0..nr - 1 {
                let e = j * (nr - 1) + k;
                out.push(eps * v[e] / (2.0 * m.rho_face(k) * m.node_width(j)));
            }
        }
        out
    };
    Ok(VelocityField::from_total_and_water(
        per_area(&fl.x_total),
        radial(&fl.r_total),
        per_area(&fl.x_water),
        radial(&fl.r_water),
    ))
}

/// Per-step conservation report of a reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct MassBalance {
    /// `|storage + boundary outflow + lateral water outflow|` normalized by
    /// the pore volume, per step.
    pub residual: Vec<f64>,
    /// Lateral water outflow `Σ b(S) ε^{α−1} Q̂ w` per step (scaled units).
    pub lateral: Vec<f64>,
}

/// Water mass balance of every step of a reference run.
pub fn mass_balance_report(spec: &ProblemSpec, sol: &FullSolution) -> Result<MassBalance> {
    let d = spec.derived()?;
    let m = sol.mesh;
    let (nx, nr) = (m.n_x, m.n_r);
    let dt = sol.grid.dt();
    let porosity: Vec<f64> = (0..=nx).map(|j| spec.porosity(m.x(j))).collect();
    let pore: f64 = (1..nx)
        .flat_map(|j| (0..nr).map(move |k| (j, k)))
        .map(|(j, k)| porosity[j] * m.area_fraction(k) * m.dx())
        .sum();
    let mut residual = Vec::with_capacity(sol.grid.n_t);
    let mut lateral = Vec::with_capacity(sol.grid.n_t);
    for n in 1..sol.times.len() {
        let fl = flux_field(spec, sol, n)?;
        let s = &sol.s[n];
        let so = &sol.s[n - 1];
        let mut total = 0.0;
        let mut lat = 0.0;
        for j in 1..nx {
            for k in 0..nr {
                let i = m.index(j, k);
                total += porosity[j] * m.area_fraction(k) * m.dx() * (s[i] - so[i]) / dt;
            }
            lat += d.b(s[m.index(j, nr - 1)]) * fl.lateral[j];
        }
        for k in 0..nr {
            total += fl.x_water[(nx - 1) * nr + k] - fl.x_water[k];
        }
        residual.push((total + lat).abs() / pore);
        lateral.push(lat);
    }
    Ok(MassBalance { residual, lateral })
}

/// Largest residual of the discrete pressure equation (divergence of the
/// total flux plus lateral outflow) over the interior nodes of level `n`.
pub fn divergence_residual(spec: &ProblemSpec, sol: &FullSolution, n: usize) -> Result<f64> {
    let fl = flux_field(spec, sol, n)?;
    let m = sol.mesh;
    let (nx, nr) = (m.n_x, m.n_r);
    let mut worst = 0.0f64;
    for j in 1..nx {
        for k in 0..nr {
            let mut div = fl.x_total[j * nr + k] - fl.x_total[(j - 1) * nr + k];
            if k + 1 < nr {
                div += fl.r_total[j * (nr - 1) + k];
            } else {
                div += fl.lateral[j];
            }
            if k > 0 {
                div -= fl.r_total[j * (nr - 1) + k - 1];
            }
            worst = worst.max(div.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_volumes_sum_to_cylinder_volume() {
        let m = AxisymMesh::new(40, 32, 1.3, 0.05).unwrap();
        let exact = std::f64::consts::PI * 0.05 * 0.05 * 1.3;
        assert!((m.total_volume() - exact).abs() <= 1e-10 * exact);
        let a: f64 = (0..m.n_r).map(|k| m.area_fraction(k)).sum();
        assert!((a - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mesh_rejects_bad_parameters() {
        assert!(AxisymMesh::new(4, 32, 1.0, 0.1).is_err());
        assert!(AxisymMesh::new(10, 32, 1.0, 1.5).is_err());
    }
}

//! Cross-section Neumann problems on the unit disk:
//! `-∇·(K∇u) = f` in the disk, `-(K∇u)·ν = g` on the circle, mean of `u` zero.
//!
//! Cell-centred finite volumes on a polar grid. Ring `i` spans
//! `[iΔr, (i+1)Δr]`, so no unknown sits at the origin; the innermost ring
//! of wedges closes its flux balance with a zero-area face at `r = 0`.

use std::f64::consts::PI;

use crate::constitutive::DerivedClosures;
use crate::error::{Error, Result};
use crate::linalg::pcg;
use crate::problem::{qhat, ProblemSpec};

/// Relative residual required from the conjugate-gradient solve.
pub const CG_TOL: f64 = 1e-12;

/// Polar grid on the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskMesh {
    /// Number of rings.
    pub n_r: usize,
    /// Number of angular sectors (even).
    pub n_theta: usize,
    /// Ring width.
    pub dr: f64,
    /// Sector angle.
    pub dtheta: f64,
}

impl DiskMesh {
    /// Mesh with `n_r` rings and `n_theta` sectors.
    pub fn new(n_r: usize, n_theta: usize) -> Result<Self> {
        if n_r < 3 || n_theta < 4 || n_theta % 2 != 0 {
            return Err(Error::InvalidParameter {
                name: "cell mesh".into(),
                reason: format!("need n_r >= 3 and an even n_theta >= 4, got {n_r} x {n_theta}"),
            });
        }
        Ok(Self {
            n_r,
            n_theta,
            dr: 1.0 / n_r as f64,
            dtheta: 2.0 * PI / n_theta as f64,
        })
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    /// True if the mesh has no cells (never for a valid mesh).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of cell (ring `i`, sector `j`).
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// Radius of the nodes of ring `i`.
    #[inline]
    pub fn radius(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr
    }

    /// Angle of the nodes of sector `j`.
    #[inline]
    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    /// Area of a cell in ring `i`.
    #[inline]
    pub fn cell_area(&self, i: usize) -> f64 {
        let (a, b) = (i as f64 * self.dr, (i + 1) as f64 * self.dr);
        0.5 * (b * b - a * a) * self.dtheta
    }

    /// Length of each boundary arc.
    pub fn boundary_arc(&self) -> f64 {
        self.dtheta
    }

    /// Cartesian coordinates of node (i, j).
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let (r, th) = (self.radius(i), self.angle(j));
        (r * th.cos(), r * th.sin())
    }
}

/// Mean-zero solution of a cell problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// Mesh the solution lives on.
    pub mesh: DiskMesh,
    /// Nodal values.
    pub values: Vec<f64>,
    /// Nodal Cartesian gradient `(∂u/∂ξ₂, ∂u/∂ξ₃)`.
    pub gradient: Vec<[f64; 2]>,
    /// Longitudinal position the problem was posed at.
    pub x1: f64,
    /// Time the problem was posed at.
    pub t: f64,
    /// Conjugate-gradient iterations used.
    pub iterations: usize,
}

impl CellSolution {
    /// Identically zero solution.
    pub fn zero(mesh: &DiskMesh, x1: f64, t: f64) -> Self {
        Self {
            mesh: mesh.clone(),
            values: vec![0.0; mesh.len()],
            gradient: vec![[0.0; 2]; mesh.len()],
            x1,
            t,
            iterations: 0,
        }
    }

    /// Area-weighted mean over the disk.
    pub fn mean(&self) -> f64 {
        let m = &self.mesh;
        let mut s = 0.0;
        for i in 0..m.n_r {
            let a = m.cell_area(i);
            for j in 0..m.n_theta {
                s += a * self.values[m.index(i, j)];
            }
        }
        s / PI
    }

    /// Multiplies the solution by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out.gradient.iter_mut().for_each(|g| {
            g[0] *= c;
            g[1] *= c;
        });
        out
    }
}

/// Data of the cell problem at one `(x₁, t)`: constant interior source and
/// boundary flux `flux_magnitude · (1 + cos_mode · cos θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellInputs {
    /// Interior source `Q̂/λ(s₀)`.
    pub source: f64,
    /// Angle-independent factor of `Q/λ(s₀)`.
    pub flux_magnitude: f64,
    /// Angular mode coefficient.
    pub cos_mode: f64,
}

impl CellInputs {
    /// Boundary flux at angle `theta`.
    pub fn flux(&self, theta: f64) -> f64 {
        self.flux_magnitude * (1.0 + self.cos_mode * theta.cos())
    }

    /// True if both source and flux vanish.
    pub fn is_zero(&self) -> bool {
        self.source == 0.0 && self.flux_magnitude == 0.0
    }
}

/// Cell-problem data `(Q̂/λ(s₀), Q/λ(s₀))` at `(x₁, t)`.
pub fn build_cell_inputs(
    spec: &ProblemSpec,
    derived: &DerivedClosures,
    s0_value: f64,
    x1: f64,
    t: f64,
) -> Result<CellInputs> {
    if !(s0_value > 0.0 && s0_value < 1.0) {
        return Err(Error::InvalidParameter {
            name: "s0".into(),
            reason: format!("saturation must lie in (0, 1), got {s0_value}"),
        });
    }
    let lam = derived.lambda(s0_value);
    Ok(CellInputs {
        source: qhat(spec, x1, t) / lam,
        flux_magnitude: spec.lateral.magnitude(x1, t) / lam,
        cos_mode: spec.lateral.cos_mode,
    })
}

/// Solves the cell problem with tensor `k(ξ₂, ξ₃)`, interior source
/// `source(ξ₂, ξ₃)` and boundary flux `flux(θ)`.
///
/// The tensor must be diagonal in the polar frame (radial/tangential
/// orthotropy), which keeps the discrete operator symmetric.
pub fn solve_cell<K, S, G>(mesh: &DiskMesh, k: K, source: S, flux: G) -> Result<CellSolution>
where
    K: Fn(f64, f64) -> [[f64; 2]; 2],
    S: Fn(f64, f64) -> f64,
    G: Fn(f64) -> f64,
{
    solve_cell_at(mesh, k, source, flux, 0.0, 0.0)
}

/// As [`solve_cell`], recording the `(x₁, t)` the problem belongs to.
pub fn solve_cell_at<K, S, G>(
    mesh: &DiskMesh,
    k: K,
    source: S,
    flux: G,
    x1: f64,
    t: f64,
) -> Result<CellSolution>
where
    K: Fn(f64, f64) -> [[f64; 2]; 2],
    S: Fn(f64, f64) -> f64,
    G: Fn(f64) -> f64,
{
    let (nr, nt) = (mesh.n_r, mesh.n_theta);
    let n = mesh.len();
    let polar = |r: f64, th: f64| -> Result<(f64, f64)> {
        let (c, s) = (th.cos(), th.sin());
        let kk = k(r * c, r * s);
        let krr = c * (kk[0][0] * c + kk[0][1] * s) + s * (kk[1][0] * c + kk[1][1] * s);
        let ktt = -s * (-kk[0][0] * s + kk[0][1] * c) + c * (-kk[1][0] * s + kk[1][1] * c);
        let krt = c * (-kk[0][0] * s + kk[0][1] * c) + s * (-kk[1][0] * s + kk[1][1] * c);
        if krt.abs() > 1e-10 * (krr.abs() + ktt.abs()) {
            return Err(Error::InvalidParameter {
                name: "cell tensor".into(),
                reason: format!(
                    "must be diagonal in the polar frame; K_r_theta = {krt} at r = {r}"
                ),
            });
        }
        if !(krr > 0.0 && ktt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "cell tensor".into(),
                reason: format!("not positive definite at r = {r}, theta = {th}"),
            });
        }
        Ok((krr, ktt))
    };
    // radial face i+1/2 between rings i and i+1; angular face j+1/2 in ring i
    let mut t_rad = vec![0.0; (nr - 1) * nt];
    let mut t_ang = vec![0.0; n];
    for i in 0..nr {
        for j in 0..nt {
            let th = mesh.angle(j);
            if i + 1 < nr {
                let rf = (i + 1) as f64 * mesh.dr;
                let (krr, _) = polar(rf, th)?;
                t_rad[i * nt + j] = krr * rf * mesh.dtheta / mesh.dr;
            }
            let r = mesh.radius(i);
            let (_, ktt) = polar(r, th + 0.5 * mesh.dtheta)?;
            t_ang[mesh.index(i, j)] = ktt * mesh.dr / (r * mesh.dtheta);
        }
    }

    let mut rhs = vec![0.0; n];
    let mut src_total = 0.0;
    let mut flux_total = 0.0;
    let mut flux_abs = 0.0;
    for i in 0..nr {
        let a = mesh.cell_area(i);
        for j in 0..nt {
            let (x, y) = mesh.node(i, j);
            let f = source(x, y) * a;
            rhs[mesh.index(i, j)] = f;
            src_total += f;
        }
    }
    for j in 0..nt {
        let g = flux(mesh.angle(j)) * mesh.boundary_arc();
        rhs[mesh.index(nr - 1, j)] -= g;
        flux_total += g;
        flux_abs += g.abs();
    }
    if (src_total - flux_total).abs() > 1e-10 * flux_abs.max(1.0) {
        return Err(Error::Compatibility {
            source_integral: src_total,
            flux_integral: flux_total,
        });
    }
    if rhs.iter().all(|v| *v == 0.0) {
        return Ok(CellSolution::zero(mesh, x1, t));
    }
    // project onto the range of the singular operator (orthogonal to constants)
    let mean = rhs.iter().sum::<f64>() / n as f64;
    rhs.iter_mut().for_each(|v| *v -= mean);

    let mut diag = vec![0.0; n];
    for i in 0..nr {
        for j in 0..nt {
            let jm = (j + nt - 1) % nt;
            let mut d = t_ang[mesh.index(i, j)] + t_ang[mesh.index(i, jm)];
            if i + 1 < nr {
                d += t_rad[i * nt + j];
            }
            if i > 0 {
                d += t_rad[(i - 1) * nt + j];
            }
            diag[mesh.index(i, j)] = d;
        }
    }
    let apply = |u: &[f64], out: &mut [f64]| {
        for i in 0..nr {
            for j in 0..nt {
                let p = i * nt + j;
                let jp = if j + 1 == nt { 0 } else { j + 1 };
                let jm = if j == 0 { nt - 1 } else { j - 1 };
                let mut s = diag[p] * u[p];
                s -= t_ang[p] * u[i * nt + jp];
                s -= t_ang[i * nt + jm] * u[i * nt + jm];
                if i + 1 < nr {
                    s -= t_rad[p] * u[p + nt];
                }
                if i > 0 {
                    s -= t_rad[p - nt] * u[p - nt];
                }
                out[p] = s;
            }
        }
    };
    let mut u = vec![0.0; n];
    let rep = pcg(apply, &diag, &rhs, &mut u, CG_TOL, 20 * n)?;
    let mut sol = CellSolution {
        mesh: mesh.clone(),
        values: u,
        gradient: vec![[0.0; 2]; n],
        x1,
        t,
        iterations: rep.iterations,
    };
    let m = sol.mean();
    sol.values.iter_mut().for_each(|v| *v -= m);
    sol.gradient = nodal_gradient(mesh, &sol.values);
    Ok(sol)
}

fn nodal_gradient(mesh: &DiskMesh, u: &[f64]) -> Vec<[f64; 2]> {
    let (nr, nt) = (mesh.n_r, mesh.n_theta);
    let half = nt / 2;
    let mut g = vec![[0.0; 2]; u.len()];
    for i in 0..nr {
        let r = mesh.radius(i);
        for j in 0..nt {
            let ur = if i == 0 {
                (u[mesh.index(1, j)] - u[mesh.index(0, (j + half) % nt)]) / (2.0 * mesh.dr)
            } else if i + 1 == nr {
                (3.0 * u[mesh.index(i, j)] - 4.0 * u[mesh.index(i - 1, j)]
                    + u[mesh.index(i - 2, j)])
                    / (2.0 * mesh.dr)
            } else {
                (u[mesh.index(i + 1, j)] - u[mesh.index(i - 1, j)]) / (2.0 * mesh.dr)
            };
            let ut = (u[mesh.index(i, (j + 1) % nt)] - u[mesh.index(i, (j + nt - 1) % nt)])
                / (2.0 * mesh.dtheta);
            let th = mesh.angle(j);
            let (c, s) = (th.cos(), th.sin());
            g[mesh.index(i, j)] = [c * ur - s * ut / r, s * ur + c * ut / r];
        }
    }
    g
}

fn snap(v: f64) -> (usize, f64) {
    let f = v.floor();
    let w = v - f;
    if (v - v.round()).abs() < 1e-9 {
        (v.round() as usize, 0.0)
    } else {
        (f as usize, w)
    }
}

/// Value and Cartesian gradient of a cell solution at `ξ = (ξ₂, ξ₃)` by
/// bilinear interpolation in (signed radius, angle).
pub fn evaluate_cell(sol: &CellSolution, xi2: f64, xi3: f64) -> Result<(f64, [f64; 2])> {
    let m = &sol.mesh;
    let r = (xi2 * xi2 + xi3 * xi3).sqrt();
    if !(r <= 1.0 + 1e-12) {
        return Err(Error::OutsideDisk(xi2, xi3));
    }
    let theta = xi3.atan2(xi2).rem_euclid(2.0 * PI);
    let ring = |i: usize, th: f64| -> (f64, [f64; 2]) {
        let (j0, w) = snap(th / m.dtheta);
        let j0 = j0 % m.n_theta;
        let j1 = (j0 + 1) % m.n_theta;
        let (a, b) = (m.index(i, j0), m.index(i, j1));
        let v = (1.0 - w) * sol.values[a] + w * sol.values[b];
        let g = [
            (1.0 - w) * sol.gradient[a][0] + w * sol.gradient[b][0],
            (1.0 - w) * sol.gradient[a][1] + w * sol.gradient[b][1],
        ];
        (v, g)
    };
    let lerp = |p: (f64, [f64; 2]), q: (f64, [f64; 2]), w: f64| {
        (
            (1.0 - w) * p.0 + w * q.0,
            [
                (1.0 - w) * p.1[0] + w * q.1[0],
                (1.0 - w) * p.1[1] + w * q.1[1],
            ],
        )
    };
    let r0 = m.radius(0);
    if r < r0 {
        let inner = ring(0, (theta + PI).rem_euclid(2.0 * PI));
        let outer = ring(0, theta);
        return Ok(lerp(inner, outer, (r + r0) / (2.0 * r0)));
    }
    let (mut i0, mut w) = snap((r - r0) / m.dr);
    if i0 + 1 >= m.n_r {
        // linear extrapolation over the outer half ring
        w += (i0 + 1 - (m.n_r - 1)) as f64;
        i0 = m.n_r - 2;
    }
    if w == 0.0 {
        return Ok(ring(i0, theta));
    }
    Ok(lerp(ring(i0, theta), ring(i0 + 1, theta), w))
}

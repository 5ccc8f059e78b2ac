//! Finite-volume building blocks shared by the one-dimensional limit solver
//! and the axisymmetric reference solver: the water flux through a face,
//! its derivatives, and the damped Newton iteration with step halving.

use crate::constitutive::DerivedClosures;
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, BandMatrix};

/// Tolerance on the scaled nonlinear residual (saturation units).
pub const NEWTON_TOL: f64 = 1e-10;

/// Maximum number of Newton iterations per step.
pub const NEWTON_MAX_ITER: usize = 40;

/// Maximum number of time-step halvings after a Newton failure.
pub const MAX_HALVINGS: usize = 10;

/// Water flux through one face, oriented from the left cell to the right
/// cell, with its derivatives with respect to both saturations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFlux {
    /// Flux value.
    pub value: f64,
    /// Derivative with respect to the left saturation.
    pub d_left: f64,
    /// Derivative with respect to the right saturation.
    pub d_right: f64,
    /// Fractional flow used for the advective part.
    pub frac: f64,
    /// Derivatives of `frac` with respect to the left and right saturation.
    pub d_frac: (f64, f64),
}

/// How the advective part of a face flux picks its fractional flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advection {
    /// Arithmetic mean of both sides.
    Central,
    /// Value from the upstream side.
    Upwind,
}

/// Chooses the centred fractional flow when it keeps the face monotone:
/// `|F| ≤ 2 T_D m`, where `m` bounds `Λ/b'` from below on the saturation
/// range. Otherwise the face is upwinded.
pub fn advection_rule(total_flux: f64, diffusion_transmissibility: f64, ratio: f64) -> Advection {
    if total_flux.abs() <= 2.0 * diffusion_transmissibility * ratio {
        Advection::Central
    } else {
        Advection::Upwind
    }
}

/// Water flux `F·B + T_D (𝒦(s_l) − 𝒦(s_r))` through a face carrying total
/// flux `total_flux` (left to right) with diffusion transmissibility
/// `t_diff`, where `𝒦` is the Kirchhoff potential of `Λ`.
pub fn water_flux(
    d: &DerivedClosures,
    rule: Advection,
    total_flux: f64,
    t_diff: f64,
    sl: f64,
    sr: f64,
) -> FaceFlux {
    let l = d.state(sl);
    let r = d.state(sr);
    let (frac, d_frac) = match rule {
        Advection::Central => (0.5 * (l.b + r.b), (0.5 * l.d_b, 0.5 * r.d_b)),
        Advection::Upwind if total_flux >= 0.0 => (l.b, (l.d_b, 0.0)),
        Advection::Upwind => (r.b, (0.0, r.d_b)),
    };
    FaceFlux {
        value: total_flux * frac + t_diff * (d.kirchhoff(sl) - d.kirchhoff(sr)),
        d_left: total_flux * d_frac.0 + t_diff * l.cap_diff,
        d_right: total_flux * d_frac.1 - t_diff * r.cap_diff,
        frac,
        d_frac,
    }
}

/// A nonlinear system `R(s) = 0` with banded Jacobian.
pub trait BandedSystem {
    /// Number of unknowns.
    fn len(&self) -> usize;
    /// Lower and upper bandwidth of the Jacobian.
    fn bandwidth(&self) -> usize;
    /// Residual and, if requested, Jacobian at `s`.
    fn eval(&self, s: &[f64], res: &mut [f64], jac: Option<&mut BandMatrix>);
    /// Factor turning residual entries into saturation units.
    fn scale(&self, i: usize) -> f64;
}

/// Outcome of a converged Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    /// Iterations used.
    pub iterations: usize,
    /// Final scaled residual.
    pub residual: f64,
}

fn scaled_norm<S: BandedSystem>(sys: &S, res: &[f64]) -> f64 {
    res.iter()
        .enumerate()
        .map(|(i, r)| (r * sys.scale(i)).abs())
        .fold(0.0, f64::max)
}

/// Damped Newton iteration from the initial guess in `s`. Iterates are kept
/// inside (0, 1) and the step is halved while the scaled residual grows.
/// On failure returns the last scaled residual.
pub fn newton<S: BandedSystem>(sys: &S, s: &mut [f64]) -> std::result::Result<NewtonReport, f64> {
    let n = sys.len();
    let kb = sys.bandwidth();
    let mut res = vec![0.0; n];
    let mut trial_res = vec![0.0; n];
    let mut trial = vec![0.0; n];
    sys.eval(s, &mut res, None);
    let mut norm = scaled_norm(sys, &res);
    for it in 0..NEWTON_MAX_ITER {
        if norm <= NEWTON_TOL {
            return Ok(NewtonReport {
                iterations: it,
                residual: norm,
            });
        }
        let mut jac = BandMatrix::zeros(n, kb, kb);
        sys.eval(s, &mut res, Some(&mut jac));
        let lu = jac.factor().map_err(|_| norm)?;
        let mut step: Vec<f64> = res.iter().map(|r| -r).collect();
        lu.solve(&mut step);
        // keep the iterate strictly inside (0, 1)
        let mut theta = 1.0f64;
        for (si, di) in s.iter().zip(&step) {
            let target = si + di;
            if target <= 0.0 {
                theta = theta.min(0.9 * si / -di);
            } else if target >= 1.0 {
                theta = theta.min(0.9 * (1.0 - si) / di);
            }
        }
        let mut accepted = false;
        for _ in 0..12 {
            for i in 0..n {
                trial[i] = s[i] + theta * step[i];
            }
            sys.eval(&trial, &mut trial_res, None);
            let tn = scaled_norm(sys, &trial_res);
            if tn.is_finite() && (tn < norm || tn <= NEWTON_TOL) {
                s.copy_from_slice(&trial);
                std::mem::swap(&mut res, &mut trial_res);
                norm = tn;
                accepted = true;
                break;
            }
            theta *= 0.5;
        }
        if !accepted {
            // stagnation at round-off level counts as converged
            if norm_inf(&step) * theta <= 1e-15 && norm <= 1e3 * NEWTON_TOL {
                return Ok(NewtonReport {
                    iterations: it,
                    residual: norm,
                });
            }
            return Err(norm);
        }
    }
    if norm <= NEWTON_TOL {
        Ok(NewtonReport {
            iterations: NEWTON_MAX_ITER,
            residual: norm,
        })
    } else {
        Err(norm)
    }
}

/// Checks that every saturation value lies in `[lower, upper]`.
pub fn check_bounds(
    time: f64,
    values: &[f64],
    lower: f64,
    upper: f64,
    node_of: impl Fn(usize) -> usize,
) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !(*v >= lower && *v <= upper) {
            return Err(Error::MaximumPrinciple {
                time,
                node: node_of(i),
                value: *v,
                lower,
                upper,
            });
        }
    }
    Ok(())
}

//! Implicit Fokker-Planck relaxation in the symmetrized variable
//! `h = f / sqrt(M)`.
//!
//! With `s = sqrt(M_{u,i})` on the velocity grid the operator is the 5-point
//! stencil
//!
//! ```text
//! (L h)_m = (sum_{n ~ m} h_n - Mbar_m h_m) / dv^2,   Mbar_m = sum_{n ~ m} s_n / s_m
//! ```
//!
//! where neighbours outside the velocity box are dropped (zero `h` ghosts and
//! no matching term in `Mbar`). `L` is symmetric, negative semidefinite and
//! `L s = 0`. One implicit step solves
//!
//! ```text
//! (W - tau L) h = W rhs / s,   f = s h,
//! ```
//!
//! cell by cell, with `W` the tensor trapezoid weights (one inside the box,
//! 1/2 on edge rows). The weighting makes the solve conserve the trapezoid
//! density of `rhs` exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{size_five_thirds, FpSolverSettings, PhaseDistribution, ScalarField, VectorField};
use crate::krylov::{conjugate_gradient, dot, CgSettings};
use crate::moments::VelocityQuadrature;

/// `sqrt(M_{u,i})` on the velocity grid.
pub fn sqrt_maxwellian_block(u: [f64; 2], size: usize, v: &[f64], out: &mut [f64]) {
    let nv = v.len();
    let s = size as f64;
    let pref = (s / (2.0 * std::f64::consts::PI)).sqrt();
    let g1: Vec<f64> = v.iter().map(|&x| (-0.25 * s * (x - u[0]).powi(2)).exp()).collect();
    let g2: Vec<f64> = v.iter().map(|&x| (-0.25 * s * (x - u[1]).powi(2)).exp()).collect();
    for m1 in 0..nv {
        for m2 in 0..nv {
            out[m1 * nv + m2] = pref * g1[m1] * g2[m2];
        }
    }
}

/// Per-direction part of `Mbar`: the sum of the in-box neighbour ratios
/// `s_n / s_m` along one velocity axis, in closed form.
fn mbar_axis(size: usize, v: &[f64], c: f64) -> Vec<f64> {
    let nv = v.len();
    let s = size as f64;
    // s_n / s_m = exp(-s ((v_n - c)^2 - (v_m - c)^2) / 4).
    let ratio = |x_from: f64, x_to: f64| (-0.25 * s * ((x_to - c).powi(2) - (x_from - c).powi(2))).exp();
    (0..nv)
        .map(|m| {
            let mut acc = 0.0;
            if m + 1 < nv {
                acc += ratio(v[m], v[m + 1]);
            }
            if m > 0 {
                acc += ratio(v[m], v[m - 1]);
            }
            acc
        })
        .collect()
}

/// `Mbar` for one velocity block. The Gaussian factorizes, so `Mbar` is the
/// sum of the two per-axis neighbour sums.
pub fn mbar_block(u: [f64; 2], size: usize, v: &[f64], out: &mut [f64]) {
    let nv = v.len();
    let r1 = mbar_axis(size, v, u[0]);
    let r2 = mbar_axis(size, v, u[1]);
    for m1 in 0..nv {
        for m2 in 0..nv {
            out[m1 * nv + m2] = r1[m1] + r2[m2];
        }
    }
}

/// Bound `4 exp(i dv (2 |v - u| + dv) / 2)` on `Mbar`.
pub fn mbar_bound(u: [f64; 2], size: usize, v: [f64; 2], dv: f64) -> f64 {
    let d = (v[0] - u[0]).hypot(v[1] - u[1]);
    4.0 * (size as f64 * dv * (2.0 * d + dv) * 0.5).exp()
}

/// Sum of the in-box neighbours of every entry.
#[inline]
fn neighbour_sum(h: &[f64], nv: usize, m1: usize, m2: usize) -> f64 {
    let k = m1 * nv + m2;
    let mut acc = 0.0;
    if m1 + 1 < nv {
        acc += h[k + nv];
    }
    if m1 > 0 {
        acc += h[k - nv];
    }
    if m2 + 1 < nv {
        acc += h[k + 1];
    }
    if m2 > 0 {
        acc += h[k - 1];
    }
    acc
}

/// Applies the symmetrized operator to one velocity block.
pub fn apply_l_tilde(h: &[f64], mbar: &[f64], nv: usize, dv: f64, out: &mut [f64]) {
    let inv = 1.0 / (dv * dv);
    for m1 in 0..nv {
        for m2 in 0..nv {
            let k = m1 * nv + m2;
            out[k] = (neighbour_sum(h, nv, m1, m2) - mbar[k] * h[k]) * inv;
        }
    }
}

/// One per-cell linear system `(W - tau L) h = b`.
#[derive(Debug, Clone)]
pub struct CellSystem {
    pub nv: usize,
    pub s: Vec<f64>,
    pub mbar: Vec<f64>,
    /// Tensor trapezoid weights without the `dv^2` factor.
    pub w: Vec<f64>,
    /// `tau / dv^2`.
    pub c: f64,
}

impl CellSystem {
    pub fn new(u: [f64; 2], size: usize, tau: f64, v: &[f64], trapezoid: &[f64], dv: f64) -> Self {
        let nv = v.len();
        let mut s = vec![0.0; nv * nv];
        sqrt_maxwellian_block(u, size, v, &mut s);
        let mut mbar = vec![0.0; nv * nv];
        mbar_block(u, size, v, &mut mbar);
        let mut w = vec![0.0; nv * nv];
        for m1 in 0..nv {
            for m2 in 0..nv {
                w[m1 * nv + m2] = trapezoid[m1] * trapezoid[m2];
            }
        }
        CellSystem {
            nv,
            s,
            mbar,
            w,
            c: tau / (dv * dv),
        }
    }

    pub fn diagonal(&self, k: usize) -> f64 {
        self.w[k] + self.c * self.mbar[k]
    }

    pub fn apply(&self, h: &[f64], out: &mut [f64]) {
        let nv = self.nv;
        let c = self.c;
        for k in 0..nv * nv {
            out[k] = (self.w[k] + c * self.mbar[k]) * h[k];
        }
        // Neighbours along the first axis: whole rows at once.
        for m1 in 0..nv - 1 {
            let (lo, hi) = (m1 * nv, (m1 + 1) * nv);
            for m2 in 0..nv {
                out[lo + m2] -= c * h[hi + m2];
                out[hi + m2] -= c * h[lo + m2];
            }
        }
        for m1 in 0..nv {
            let row = m1 * nv;
            for m2 in 0..nv - 1 {
                out[row + m2] -= c * h[row + m2 + 1];
                out[row + m2 + 1] -= c * h[row + m2];
            }
        }
    }

    /// `sum_m W_m s_m h_m`: the trapezoid density of `s h` up to `dv^2`.
    pub fn weighted_mass(&self, h: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..h.len() {
            acc += self.w[k] * self.s[k] * h[k];
        }
        acc
    }
}

/// Outcome of one cell solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSolve {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Solves one cell system for the f-space data `rhs`, writing `f = s h`.
///
/// The `s`-component of the data is split off exactly, `h = c0 s + y` with
/// `A s = W s`, so equilibrium data is reproduced without iterating and the
/// correction `y` is computed without the `tau`-sized cancellation of the
/// stiff regime. The preconditioned directions stay `W s`-orthogonal, which
/// preserves `sum W s h = sum W rhs` up to round-off.
pub fn solve_cell(sys: &CellSystem, rhs: &[f64], settings: &FpSolverSettings, max_iter: usize, f_out: &mut [f64]) -> CellSolve {
    let n = rhs.len();
    let s = &sys.s;
    let b: Vec<f64> = (0..n).map(|k| sys.w[k] * rhs[k] / s[k]).collect();
    let ws: Vec<f64> = (0..n).map(|k| sys.w[k] * s[k]).collect();
    let ws_s = dot(&ws, s);
    let c0 = dot(&b, s) / ws_s;
    let b1: Vec<f64> = (0..n).map(|k| b[k] - c0 * ws[k]).collect();
    let diag: Vec<f64> = (0..n).map(|k| sys.diagonal(k)).collect();
    let project = |z: &mut [f64]| {
        let t = dot(&ws, z) / ws_s;
        for k in 0..n {
            z[k] -= t * s[k];
        }
    };
    let mut y: Vec<f64> = (0..n).map(|k| b1[k] / diag[k]).collect();
    project(&mut y);
    let precond = |r: &[f64], z: &mut [f64]| {
        if settings.jacobi {
            for k in 0..n {
                z[k] = r[k] / diag[k];
            }
        } else {
            for k in 0..n {
                z[k] = r[k] / sys.w[k];
            }
        }
        project(z);
    };
    // Stopping test on the f-space residual s r / W relative to the data.
    let weights: Vec<f64> = (0..n).map(|k| s[k] / sys.w[k]).collect();
    let rhs_norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cg = CgSettings {
        tol: settings.tol,
        max_iter,
        abs_inf_tol: None,
        reference_norm: Some(if rhs_norm > 0.0 { rhs_norm } else { 1.0 }),
    };
    let rep = conjugate_gradient(|h, out| sys.apply(h, out), &b1, &mut y, Some(&precond), Some(&weights), None, &cg);
    for k in 0..n {
        let mut f = s[k] * (c0 * s[k] + y[k]);
        if settings.clip_negative && f < 0.0 {
            f = 0.0;
        }
        f_out[k] = f;
    }
    CellSolve {
        iterations: rep.iterations,
        rel_residual: rep.rel_residual,
        converged: rep.converged,
    }
}

/// Iteration statistics of one [`solve_fp`] call.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FpStats {
    pub max_iterations: usize,
    pub total_iterations: usize,
    pub worst_residual: f64,
}

/// Implicit relaxation of species `size`: for every interior cell solves
/// `(W - tau L) h = W rhs / s` with `tau = theta / (i^{5/3} eps)` and returns
/// `f = s h`. `theta` is `dt` for the first-order scheme and `2 dt / 3` for
/// BDF2 (where `rhs` already carries the 1/3 factor).
pub fn solve_fp(
    rhs: &PhaseDistribution,
    u: &VectorField,
    eps: &ScalarField,
    theta: f64,
    size: usize,
    quad: &VelocityQuadrature,
    trapezoid: &[f64],
    settings: &FpSolverSettings,
) -> Result<(PhaseDistribution, FpStats)> {
    let spec = rhs.spec;
    let n = spec.nx;
    let nv = spec.nv;
    let bs = spec.block();
    let np = spec.np();
    let dv = spec.dv();
    let max_iter = settings.max_iter.unwrap_or(10 * nv * nv);
    let i53 = size_five_thirds(size);
    let v = &quad.v;
    let mut out = PhaseDistribution::zeros(spec);
    let rows: Vec<Result<FpStats>> = out
        .data
        .par_chunks_mut(np * bs)
        .enumerate()
        .filter(|(a, _)| *a >= 1 && *a <= n)
        .map(|(a, row)| {
            let mut st = FpStats::default();
            for b in 1..=n {
                let uc = u.at(a, b);
                let tau = theta / (i53 * eps.at(a, b));
                let sys = CellSystem::new(uc, size, tau, v, trapezoid, dv);
                check_overflow(&sys, uc, size, v, dv, a, b)?;
                let o = &mut row[b * bs..(b + 1) * bs];
                let r = rhs.block(a, b);
                if r.iter().all(|&x| x == 0.0) {
                    o.fill(0.0);
                    continue;
                }
                let cs = solve_cell(&sys, r, settings, max_iter, o);
                if !cs.converged || !cs.rel_residual.is_finite() {
                    return Err(Error::FokkerPlanckDivergence {
                        species: size,
                        cell_x: a,
                        cell_y: b,
                        residual: cs.rel_residual,
                        iterations: cs.iterations,
                    });
                }
                st.max_iterations = st.max_iterations.max(cs.iterations);
                st.total_iterations += cs.iterations;
                st.worst_residual = st.worst_residual.max(cs.rel_residual);
            }
            Ok(st)
        })
        .collect();
    let mut stats = FpStats::default();
    for r in rows {
        let r = r?;
        stats.max_iterations = stats.max_iterations.max(r.max_iterations);
        stats.total_iterations += r.total_iterations;
        stats.worst_residual = stats.worst_residual.max(r.worst_residual);
    }
    Ok((out, stats))
}

fn check_overflow(sys: &CellSystem, u: [f64; 2], size: usize, v: &[f64], dv: f64, a: usize, b: usize) -> Result<()> {
    let nv = sys.nv;
    let err = || Error::MaxwellianOverflow {
        species: size,
        cell_x: a,
        cell_y: b,
    };
    if !(u[0].is_finite() && u[1].is_finite()) {
        return Err(err());
    }
    // max(|v1 - u1|, |v2 - u2|) <= |v - u| gives a cheap separable lower
    // bound of the sentinel; the exact bound is evaluated only above it.
    let half = 0.5 * size as f64 * dv;
    let e1: Vec<f64> = v.iter().map(|&x| 4.0 * (half * (2.0 * (x - u[0]).abs() + dv)).exp()).collect();
    let e2: Vec<f64> = v.iter().map(|&x| 4.0 * (half * (2.0 * (x - u[1]).abs() + dv)).exp()).collect();
    for m1 in 0..nv {
        for m2 in 0..nv {
            let k = m1 * nv + m2;
            let mb = sys.mbar[k];
            if !(sys.s[k] > 0.0) || !mb.is_finite() {
                return Err(err());
            }
            if mb > e1[m1].max(e2[m2]) && mb > mbar_bound(u, size, [v[m1], v[m2]], dv) * (1.0 + 1e-12) {
                return Err(err());
            }
        }
    }
    Ok(())
}

//! Ghost-cell filling for the wall boundary laws and the injection inflow.
//!
//! Corners are filled by applying the x-wall rule first and then the y-wall
//! rule over the full padded x range.

use crate::grid::{PhaseDistribution, ScalarField, VectorField};

/// Specular reflection: each wall ghost copies the adjacent interior cell with
/// the wall-normal velocity index reflected, `m -> nv - 1 - m`.
pub fn fill_ghost_f_specular(f: &mut PhaseDistribution) {
    let spec = f.spec;
    let n = spec.nx;
    for b in 1..=n {
        reflect_block(f, (1, b), (0, b), Wall::X);
        reflect_block(f, (n, b), (n + 1, b), Wall::X);
    }
    for a in 0..=n + 1 {
        reflect_block(f, (a, 1), (a, 0), Wall::Y);
        reflect_block(f, (a, n), (a, n + 1), Wall::Y);
    }
}

#[derive(Clone, Copy)]
enum Wall {
    X,
    Y,
}

fn reflect_block(f: &mut PhaseDistribution, src: (usize, usize), dst: (usize, usize), wall: Wall) {
    let nv = f.spec.nv;
    let so = f.block_offset(src.0, src.1);
    let d0 = f.block_offset(dst.0, dst.1);
    for m1 in 0..nv {
        for m2 in 0..nv {
            let s = match wall {
                Wall::X => so + (nv - 1 - m1) * nv + m2,
                Wall::Y => so + m1 * nv + (nv - 1 - m2),
            };
            f.data[d0 + m1 * nv + m2] = f.data[s];
        }
    }
}

/// Inlet segment on the left wall for species `i` (sizes 1 and 2 only).
pub fn injection_window(species: usize) -> Option<(f64, f64)> {
    match species {
        1 => Some((0.475, 0.575)),
        2 => Some((0.45, 0.55)),
        _ => None,
    }
}

/// Overwrites left-wall ghost cells whose center lies in the species' inlet
/// with the indicator of `2 <= v1 <= 3` (membership by velocity-cell center).
/// Other ghosts are left as they are, so call after specular filling.
pub fn apply_injection(f: &mut PhaseDistribution, species: usize) {
    let Some((lo, hi)) = injection_window(species) else {
        return;
    };
    let spec = f.spec;
    let nv = spec.nv;
    let profile: Vec<f64> = (0..nv)
        .map(|m1| {
            let v1 = spec.v_center(m1);
            if (2.0..=3.0).contains(&v1) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for b in 1..=spec.nx {
        let y = spec.x_center(b);
        if y < lo || y > hi {
            continue;
        }
        let block = f.block_mut(0, b);
        for m1 in 0..nv {
            for m2 in 0..nv {
                block[m1 * nv + m2] = profile[m1];
            }
        }
    }
}

fn fill_ghost_scalar(f: &mut ScalarField, sign: f64) {
    let n = f.nx;
    for b in 1..=n {
        let v = sign * f.at(1, b);
        f.set(0, b, v);
        let v = sign * f.at(n, b);
        f.set(n + 1, b, v);
    }
    for a in 0..=n + 1 {
        let v = sign * f.at(a, 1);
        f.set(a, 0, v);
        let v = sign * f.at(a, n);
        f.set(a, n + 1, v);
    }
}

/// No-slip walls: ghost equals minus the adjacent interior value, so the
/// wall-midpoint average vanishes.
pub fn fill_ghost_u_noslip(u: &mut VectorField) {
    for c in u.comp.iter_mut() {
        fill_ghost_scalar(c, -1.0);
    }
}

/// Homogeneous Neumann walls: ghost equals the adjacent interior value.
pub fn fill_ghost_p_neumann(p: &mut ScalarField) {
    fill_ghost_scalar(p, 1.0);
}

/// Zero ghosts: used for scalar fields whose wall value must vanish.
pub fn fill_ghost_odd(p: &mut ScalarField) {
    fill_ghost_scalar(p, -1.0);
}

/// Specular filling followed by the inlet overwrite when enabled.
pub fn fill_ghost_f(f: &mut PhaseDistribution, species: usize, injection: bool) {
    fill_ghost_f_specular(f);
    if injection {
        apply_injection(f, species);
    }
}

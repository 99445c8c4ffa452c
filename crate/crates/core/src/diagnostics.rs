//! Monitored quantities: Maxwellian distances, the energy-entropy
//! functional, discrete norms and grid-to-grid errors.

use crate::boundary::fill_ghost_u_noslip;
use crate::error::{Error, Result};
use crate::grid::{size_five_thirds, GridSpec, PhaseDistribution, ScalarField, SchemeParams, VectorField};
use crate::integrator::SimState;
use crate::moments::{maxwellian_block, VelocityQuadrature};

/// Lower clamp of `f` inside the entropy.
pub const ENTROPY_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
        }
    }
}

/// `||f_i - n_i M_{u,i}||_1`, trapezoid in `v` and cell sums in `x`.
pub fn maxwellian_distance(f: &PhaseDistribution, n: &ScalarField, u: &VectorField, size: usize) -> f64 {
    let spec = f.spec;
    let quad = VelocityQuadrature::from_spec(spec);
    let dx = spec.dx();
    let mut m = vec![0.0; spec.block()];
    let mut diff = vec![0.0; spec.block()];
    let mut total = 0.0;
    for a in 1..=spec.nx {
        for b in 1..=spec.nx {
            maxwellian_block(u.at(a, b), size, &quad.v, &mut m);
            let nab = n.at(a, b);
            for ((d, fv), mv) in diff.iter_mut().zip(f.block(a, b)).zip(&m) {
                *d = (fv - nab * mv).abs();
            }
            total += quad.density(&diff);
        }
    }
    total * dx * dx
}

/// Maxwellian distance of every species of a state.
pub fn maxwellian_distances(state: &SimState) -> Vec<f64> {
    state
        .f
        .iter()
        .zip(&state.moments)
        .enumerate()
        .map(|(s, (f, m))| maxwellian_distance(f, &m.n, &state.u, s + 1))
        .collect()
}

/// Energy-entropy functional and the two dissipation rates of its balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEntropy {
    /// `kappa sum_i int f_i (ln f_i + 1 + i Phi + i|v|^2/2) + int |u|^2/2`.
    pub functional: f64,
    /// `int |grad u|^2`.
    pub viscous: f64,
    /// `kappa/eps sum_i int |(v-u) sqrt(i^(1/3) f) + grad_v f / sqrt(i^(5/3) f)|^2`.
    pub fp_dissipation: f64,
}

/// Evaluates the energy-entropy balance of `state` with the fluid velocity in
/// the dissipation term.
pub fn energy_entropy(state: &SimState, params: &SchemeParams) -> EnergyEntropy {
    let spec = state.spec;
    let nx = spec.nx;
    let nv = spec.nv;
    let dx = spec.dx();
    let dv = spec.dv();
    let quad = VelocityQuadrature::from_spec(spec);
    let cell = dx * dx;

    let mut kinetic = 0.0;
    let mut dissipation = 0.0;
    let mut work = vec![0.0; spec.block()];
    for (s, f) in state.f.iter().enumerate() {
        let size = (s + 1) as f64;
        let c = 1.0 / size_five_thirds(s + 1);
        for a in 1..=nx {
            for b in 1..=nx {
                let blk = f.block(a, b);
                let phi = params.phi.at(a, b);
                for m1 in 0..nv {
                    for m2 in 0..nv {
                        let fv = blk[m1 * nv + m2].max(ENTROPY_FLOOR);
                        let v2 = quad.v[m1] * quad.v[m1] + quad.v[m2] * quad.v[m2];
                        work[m1 * nv + m2] = fv * (fv.ln() + 1.0 + size * phi + 0.5 * size * v2);
                    }
                }
                kinetic += quad.density(&work) * cell;

                // With M_face the geometric mean of the neighbouring
                // Maxwellians, i (v - u) f + grad f = M grad(f / M) on each
                // face, which vanishes exactly for f proportional to M.
                let u = state.u.at(a, b);
                let mut face_sum = 0.0;
                for axis in 0..2 {
                    for m in 0..nv - 1 {
                        let vf = 0.5 * (quad.v[m] + quad.v[m + 1]);
                        let e = (0.5 * size * dv * (vf - u[axis])).exp();
                        let mut row = 0.0;
                        for k in 0..nv {
                            let (lo, hi) = if axis == 0 { (m * nv + k, (m + 1) * nv + k) } else { (k * nv + m, k * nv + m + 1) };
                            let (fl, fh) = (blk[lo].max(ENTROPY_FLOOR), blk[hi].max(ENTROPY_FLOOR));
                            let flux = (fh * e - fl / e) / dv;
                            row += quad.w[k] * flux * flux / (0.5 * (fl + fh));
                        }
                        face_sum += dv * row;
                    }
                }
                dissipation += c * face_sum * cell / params.eps.at(a, b);
            }
        }
    }

    let mut fluid = 0.0;
    for a in 1..=nx {
        for b in 1..=nx {
            let u = state.u.at(a, b);
            fluid += 0.5 * (u[0] * u[0] + u[1] * u[1]) * cell;
        }
    }
    // Face differences with the no-slip ghosts; dx^2 cancels the 1/dx^2.
    let mut ug = state.u.clone();
    fill_ghost_u_noslip(&mut ug);
    let mut viscous = 0.0;
    for comp in &ug.comp {
        for a in 0..=nx {
            for b in 1..=nx {
                let dxu = comp.at(a + 1, b) - comp.at(a, b);
                let dyu = comp.at(b, a + 1) - comp.at(b, a);
                viscous += dxu * dxu + dyu * dyu;
            }
        }
    }

    EnergyEntropy {
        functional: params.kappa * kinetic + fluid,
        viscous,
        fp_dissipation: params.kappa * dissipation,
    }
}

/// `sum_x n_i dx^2` per species.
pub fn species_masses(state: &SimState) -> Vec<f64> {
    state.masses()
}

/// Discrete `l^p` norm of a distribution with the trapezoid measure in `v`
/// and `dx^2` in space.
pub fn phase_norm(f: &PhaseDistribution, norm: Norm) -> f64 {
    let spec = f.spec;
    let quad = VelocityQuadrature::from_spec(spec);
    let mut work = vec![0.0; spec.block()];
    let mut total = 0.0;
    for a in 1..=spec.nx {
        for b in 1..=spec.nx {
            for (w, v) in work.iter_mut().zip(f.block(a, b)) {
                *w = match norm {
                    Norm::L1 => v.abs(),
                    Norm::L2 => v * v,
                };
            }
            total += quad.density(&work);
        }
    }
    finish(total * spec.dx() * spec.dx(), norm)
}

/// Discrete `l^p` norm of a vector field with measure `dx^2`.
pub fn vector_norm(u: &VectorField, norm: Norm) -> f64 {
    let nx = u.nx();
    let dx = 1.0 / nx as f64;
    let mut total = 0.0;
    for a in 1..=nx {
        for b in 1..=nx {
            let v = u.at(a, b);
            total += match norm {
                Norm::L1 => v[0].abs() + v[1].abs(),
                Norm::L2 => v[0] * v[0] + v[1] * v[1],
            };
        }
    }
    finish(total * dx * dx, norm)
}

fn finish(sum: f64, norm: Norm) -> f64 {
    match norm {
        Norm::L1 => sum,
        Norm::L2 => sum.sqrt(),
    }
}

/// Conservative average of a fine distribution onto `coarse`: 2x2 in space,
/// and 2x2 in velocity when the fine velocity grid is twice as fine.
pub fn coarsen_phase(fine: &PhaseDistribution, coarse: GridSpec) -> Result<PhaseDistribution> {
    let fs = fine.spec;
    if fs.nx != 2 * coarse.nx || fs.v_max != coarse.v_max {
        return Err(Error::GridMismatch(format!(
            "cannot restrict nx = {} onto nx = {}",
            fs.nx, coarse.nx
        )));
    }
    let rv = if fs.nv == coarse.nv {
        1
    } else if fs.nv == 2 * coarse.nv {
        2
    } else {
        return Err(Error::GridMismatch(format!("cannot restrict nv = {} onto nv = {}", fs.nv, coarse.nv)));
    };
    let (nvf, nvc) = (fs.nv, coarse.nv);
    let mut out = PhaseDistribution::zeros(coarse);
    let scale = 1.0 / (4 * rv * rv) as f64;
    for a in 1..=coarse.nx {
        for b in 1..=coarse.nx {
            let blk = out.block_mut(a, b);
            for (da, db) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let src = fine.block(2 * a - 1 + da, 2 * b - 1 + db);
                for m1 in 0..nvc {
                    for m2 in 0..nvc {
                        let mut s = 0.0;
                        for k1 in 0..rv {
                            for k2 in 0..rv {
                                s += src[(rv * m1 + k1) * nvf + rv * m2 + k2];
                            }
                        }
                        blk[m1 * nvc + m2] += s * scale;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// 2x2 cell average of a vector field.
pub fn coarsen_vector(fine: &VectorField) -> Result<VectorField> {
    let nf = fine.nx();
    if !nf.is_multiple_of(2) {
        return Err(Error::GridMismatch(format!("cannot coarsen nx = {nf}")));
    }
    let nc = nf / 2;
    let mut out = VectorField::zeros(nc);
    for c in 0..2 {
        for a in 1..=nc {
            for b in 1..=nc {
                let f = &fine.comp[c];
                let s = f.at(2 * a - 1, 2 * b - 1) + f.at(2 * a, 2 * b - 1) + f.at(2 * a - 1, 2 * b) + f.at(2 * a, 2 * b);
                out.comp[c].set(a, b, 0.25 * s);
            }
        }
    }
    Ok(out)
}

/// `||restrict(fine) - coarse||_p`.
pub fn phase_difference(fine: &PhaseDistribution, coarse: &PhaseDistribution, norm: Norm) -> Result<f64> {
    let mut r = coarsen_phase(fine, coarse.spec)?;
    for (x, y) in r.data.iter_mut().zip(&coarse.data) {
        *x -= y;
    }
    Ok(phase_norm(&r, norm))
}

/// `||restrict(fine) - coarse||_p` for velocity fields.
pub fn vector_difference(fine: &VectorField, coarse: &VectorField, norm: Norm) -> Result<f64> {
    let mut r = coarsen_vector(fine)?;
    if r.nx() != coarse.nx() {
        return Err(Error::GridMismatch(format!("cannot compare nx = {} with nx = {}", fine.nx(), coarse.nx())));
    }
    for c in 0..2 {
        for (x, y) in r.comp[c].data.iter_mut().zip(&coarse.comp[c].data) {
            *x -= y;
        }
    }
    Ok(vector_norm(&r, norm))
}

/// Running `max_t ||fine(t) - coarse(t)||` divided by a reference norm of
/// the coarse solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelativeError {
    pub max_difference: f64,
    pub reference: f64,
}

impl RelativeError {
    pub fn observe(&mut self, difference: f64) {
        self.max_difference = self.max_difference.max(difference);
    }

    /// `max_difference / reference`; zero when both vanish.
    pub fn value(&self) -> f64 {
        if self.max_difference == 0.0 {
            0.0
        } else {
            self.max_difference / self.reference
        }
    }
}

/// `log2(e_coarse / e_fine)` for errors measured at `2 dx` and `dx`.
pub fn convergence_order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, BoundaryMode};
    use crate::moments::maxwellian_distribution;

    fn state(spec: GridSpec, n: &ScalarField, up: &VectorField, u: VectorField) -> SimState {
        let grid = build_grid(spec).unwrap();
        let f = (1..=2).map(|i| maxwellian_distribution(spec, &grid.v, n, up, i)).collect();
        SimState::new(spec, f, u, ScalarField::zeros(spec.nx), BoundaryMode::Walls).unwrap()
    }

    #[test]
    fn distance_vanishes_at_equilibrium_only() {
        let spec = GridSpec::new(6, 16, 8.0).unwrap();
        let n = ScalarField::from_fn(&spec, |x, y| 1.0 + x * y);
        let u = VectorField::from_fn(&spec, |x, y| [0.3 * y, -0.2 * x]);
        let st = state(spec, &n, &u, u.clone());
        for (s, d) in maxwellian_distances(&st).into_iter().enumerate() {
            // n is the quadrature density of the sampled Maxwellian, so the
            // difference is only the quadrature defect of the sampled M.
            let m = &st.moments[s].n;
            let rel = (m.at(3, 3) - n.at(3, 3)).abs() / n.at(3, 3);
            assert!(d < 1e-10 + 10.0 * rel, "{d}");
        }
        let shifted = VectorField::from_fn(&spec, |_, _| [0.5, 0.0]);
        let other = state(spec, &n, &u, shifted);
        assert!(maxwellian_distances(&other).iter().all(|&d| d > 1e-2));
    }

    #[test]
    fn floor_state_functional() {
        // f = floor everywhere, u = 0, Phi = 0: the functional is
        // kappa sum_i floor * sum_v w (ln floor + 1 + i|v|^2/2) over the unit square.
        let spec = GridSpec::new(4, 8, 8.0).unwrap();
        let params = SchemeParams::new(&spec, 2, 2.0, 1.0, 1.0);
        let mut f = PhaseDistribution::zeros(spec);
        f.data.iter_mut().for_each(|x| *x = ENTROPY_FLOOR);
        let st = SimState::new(spec, vec![f.clone(), f], VectorField::zeros(4), ScalarField::zeros(4), BoundaryMode::Walls).unwrap();
        let ee = energy_entropy(&st, &params);
        let grid = build_grid(spec).unwrap();
        let dv = spec.dv();
        let (mut w, mut wv2) = (0.0, 0.0);
        for m1 in 0..8 {
            for m2 in 0..8 {
                let ww = grid.trapezoid[m1] * grid.trapezoid[m2] * dv * dv;
                w += ww;
                wv2 += ww * (grid.v[m1].powi(2) + grid.v[m2].powi(2));
            }
        }
        let fl = ENTROPY_FLOOR;
        let expected: f64 = (1..=2).map(|i| 2.0 * fl * ((fl.ln() + 1.0) * w + 0.5 * i as f64 * wv2)).sum();
        assert!((ee.functional - expected).abs() <= 1e-12 * expected.abs(), "{} {}", ee.functional, expected);
        assert_eq!(ee.viscous, 0.0);
    }

    #[test]
    fn equilibrium_has_no_fp_dissipation() {
        let spec = GridSpec::new(4, 16, 8.0).unwrap();
        let params = SchemeParams::new(&spec, 2, 2.0, 1.0, 1e-3);
        let n = ScalarField::constant(4, 0.8);
        let u = VectorField::from_fn(&spec, |x, _| [0.4 * x, -0.1]);
        let st = state(spec, &n, &u, u.clone());
        let ee = energy_entropy(&st, &params);
        assert!(ee.fp_dissipation.abs() < 1e-12, "{}", ee.fp_dissipation);
        assert!(ee.viscous > 0.0);

        let st = state(spec, &n, &VectorField::zeros(4), u);
        assert!(energy_entropy(&st, &params).fp_dissipation > 1.0);
    }

    #[test]
    fn coarsening_keeps_mass_and_constants() {
        let fine = GridSpec::new(8, 16, 8.0).unwrap();
        let coarse = GridSpec::new(4, 8, 8.0).unwrap();
        let mut f = PhaseDistribution::zeros(fine);
        for (k, x) in f.data.iter_mut().enumerate() {
            *x = ((k * 7919) % 101) as f64 / 101.0;
        }
        let c = coarsen_phase(&f, coarse).unwrap();
        let sum = |p: &PhaseDistribution, h: f64, dv: f64| -> f64 {
            let mut s = 0.0;
            for a in 1..=p.spec.nx {
                for b in 1..=p.spec.nx {
                    s += p.block(a, b).iter().sum::<f64>();
                }
            }
            s * h * h * dv * dv
        };
        let (mf, mc) = (sum(&f, fine.dx(), fine.dv()), sum(&c, coarse.dx(), coarse.dv()));
        assert!((mf - mc).abs() < 1e-12 * mf);
        assert!(matches!(coarsen_phase(&f, GridSpec::new(4, 6, 8.0).unwrap()), Err(Error::GridMismatch(_))));

        let u = VectorField::from_fn(&fine, |_, _| [1.5, -2.0]);
        let uc = coarsen_vector(&u).unwrap();
        assert_eq!(uc.at(2, 3), [1.5, -2.0]);
        assert_eq!(vector_difference(&u, &uc, Norm::L2).unwrap(), 0.0);
    }

    #[test]
    fn norms_scale_and_orders() {
        let spec = GridSpec::new(4, 4, 8.0).unwrap();
        let u = VectorField::from_fn(&spec, |x, y| [x - y, x * y]);
        let mut u3 = u.clone();
        for c in 0..2 {
            u3.comp[c].data.iter_mut().for_each(|v| *v *= -3.0);
        }
        for norm in [Norm::L1, Norm::L2] {
            assert!((vector_norm(&u3, norm) - 3.0 * vector_norm(&u, norm)).abs() < 1e-14);
        }
        assert!((convergence_order(4.0e-3, 1.0e-3) - 2.0).abs() < 1e-15);
        assert_eq!(convergence_order(8.0, 2.0), convergence_order(4.0, 1.0));
        let e = RelativeError::default();
        assert_eq!(e.value(), 0.0);
    }
}

//! Velocity moments by the tensor trapezoid rule, local Maxwellians and the
//! mixture densities.
//!
//! Every velocity reduction adds the contributions of `v_m` and `-v_m`
//! together before accumulating, first along `v2` and then along `v1`. The
//! fixed order makes moments bit-reproducible and makes odd integrands cancel
//! exactly on the symmetric grid.

use std::f64::consts::PI;

use crate::grid::{size_two_thirds, Grid, GridSpec, Order, PhaseDistribution, ScalarField, VectorField};

/// Tensor-product trapezoid rule on the velocity grid.
#[derive(Debug, Clone)]
pub struct VelocityQuadrature {
    pub nv: usize,
    pub v: Vec<f64>,
    /// One-dimensional weights including the `dv` factor.
    pub w: Vec<f64>,
}

impl VelocityQuadrature {
    pub fn new(grid: &Grid) -> Self {
        let dv = grid.spec.dv();
        VelocityQuadrature {
            nv: grid.spec.nv,
            v: grid.v.clone(),
            w: grid.trapezoid.iter().map(|w| w * dv).collect(),
        }
    }

    pub fn from_spec(spec: GridSpec) -> Self {
        // build_grid only fails on an invalid spec, which GridSpec::new rejects.
        Self::new(&crate::grid::build_grid(spec).expect("valid grid spec"))
    }

    /// `sum_m w_m1 w_m2 g(m1, m2) block[m]` with the symmetric pairing order.
    #[inline]
    pub fn reduce(&self, block: &[f64], g: impl Fn(usize, usize) -> f64) -> f64 {
        let nv = self.nv;
        let half = nv / 2;
        let row = |m1: usize| -> f64 {
            let base = m1 * nv;
            let mut s = 0.0;
            for m2 in 0..half {
                let q = nv - 1 - m2;
                s += self.w[m2] * g(m1, m2) * block[base + m2] + self.w[q] * g(m1, q) * block[base + q];
            }
            s
        };
        let mut total = 0.0;
        for m1 in 0..half {
            let q = nv - 1 - m1;
            total += self.w[m1] * row(m1) + self.w[q] * row(q);
        }
        total
    }

    pub fn density(&self, block: &[f64]) -> f64 {
        self.reduce(block, |_, _| 1.0)
    }

    /// `int v f dv` (without the size factor).
    pub fn first(&self, block: &[f64]) -> [f64; 2] {
        [
            self.reduce(block, |m1, _| self.v[m1]),
            self.reduce(block, |_, m2| self.v[m2]),
        ]
    }

    /// `int v (x) v f dv` as `[xx, xy, yy]`.
    pub fn second(&self, block: &[f64]) -> [f64; 3] {
        [
            self.reduce(block, |m1, _| self.v[m1] * self.v[m1]),
            self.reduce(block, |m1, m2| self.v[m1] * self.v[m2]),
            self.reduce(block, |_, m2| self.v[m2] * self.v[m2]),
        ]
    }
}

/// Density, momentum `J = i int v f` and stress `P = i int v (x) v f`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesMoments {
    pub n: ScalarField,
    pub j: VectorField,
    /// `[P_xx, P_xy, P_yy]`.
    pub p: [ScalarField; 3],
}

impl SpeciesMoments {
    pub fn compute(f: &PhaseDistribution, quad: &VelocityQuadrature, size: usize) -> Self {
        let nx = f.spec.nx;
        let s = size as f64;
        let mut n = ScalarField::zeros(nx);
        let mut j = VectorField::zeros(nx);
        let mut p = [ScalarField::zeros(nx), ScalarField::zeros(nx), ScalarField::zeros(nx)];
        for a in 1..=nx {
            for b in 1..=nx {
                let blk = f.block(a, b);
                n.set(a, b, quad.density(blk));
                let m1 = quad.first(blk);
                j.comp[0].set(a, b, s * m1[0]);
                j.comp[1].set(a, b, s * m1[1]);
                let m2 = quad.second(blk);
                for k in 0..3 {
                    p[k].set(a, b, s * m2[k]);
                }
            }
        }
        SpeciesMoments { n, j, p }
    }
}

/// Density of every interior velocity block.
pub fn density_field(f: &PhaseDistribution, quad: &VelocityQuadrature) -> ScalarField {
    let nx = f.spec.nx;
    let mut n = ScalarField::zeros(nx);
    for a in 1..=nx {
        for b in 1..=nx {
            n.set(a, b, quad.density(f.block(a, b)));
        }
    }
    n
}

/// `int v g dv` for every interior cell (no size factor).
pub fn first_moment_field(g: &PhaseDistribution, quad: &VelocityQuadrature) -> VectorField {
    let nx = g.spec.nx;
    let mut out = VectorField::zeros(nx);
    for a in 1..=nx {
        for b in 1..=nx {
            let m = quad.first(g.block(a, b));
            out.comp[0].set(a, b, m[0]);
            out.comp[1].set(a, b, m[1]);
        }
    }
    out
}

/// Generic weighted moment of one species over all interior cells.
pub fn trapezoid_moment(
    f: &PhaseDistribution,
    quad: &VelocityQuadrature,
    weight: impl Fn(f64, f64) -> f64,
) -> ScalarField {
    let nx = f.spec.nx;
    let mut out = ScalarField::zeros(nx);
    for a in 1..=nx {
        for b in 1..=nx {
            let v = quad.reduce(f.block(a, b), |m1, m2| weight(quad.v[m1], quad.v[m2]));
            out.set(a, b, v);
        }
    }
    out
}

/// `M_{u,i}(v) = i/(2 pi) exp(-i |v - u|^2 / 2)`.
#[inline]
pub fn maxwellian_value(u: [f64; 2], size: usize, v: [f64; 2]) -> f64 {
    let s = size as f64;
    let d1 = v[0] - u[0];
    let d2 = v[1] - u[1];
    s / (2.0 * PI) * (-0.5 * s * (d1 * d1 + d2 * d2)).exp()
}

/// Fills `out` with the Maxwellian of size `i` centered at `u`.
pub fn maxwellian_block(u: [f64; 2], size: usize, v: &[f64], out: &mut [f64]) {
    let nv = v.len();
    let s = size as f64;
    let pref = s / (2.0 * PI);
    // Separable: exp(-s d1^2/2) * exp(-s d2^2/2).
    let g1: Vec<f64> = v.iter().map(|&x| (-0.5 * s * (x - u[0]).powi(2)).exp()).collect();
    let g2: Vec<f64> = v.iter().map(|&x| (-0.5 * s * (x - u[1]).powi(2)).exp()).collect();
    for m1 in 0..nv {
        for m2 in 0..nv {
            out[m1 * nv + m2] = pref * g1[m1] * g2[m2];
        }
    }
}

/// `n * M_{u,i}` on every interior cell; ghosts are zero.
pub fn maxwellian_distribution(
    spec: GridSpec,
    v: &[f64],
    n: &ScalarField,
    u: &VectorField,
    size: usize,
) -> PhaseDistribution {
    let mut f = PhaseDistribution::zeros(spec);
    for a in 1..=spec.nx {
        for b in 1..=spec.nx {
            let dens = n.at(a, b);
            let blk = f.block_mut(a, b);
            maxwellian_block(u.at(a, b), size, v, blk);
            for x in blk.iter_mut() {
                *x *= dens;
            }
        }
    }
    f
}

/// `nu = sum_i i n_i` with `densities[k]` belonging to size `k + 1`.
pub fn composite_density(densities: &[&ScalarField]) -> ScalarField {
    let nx = densities.first().map(|n| n.nx).unwrap_or(0);
    let mut nu = ScalarField::zeros(nx);
    for (k, n) in densities.iter().enumerate() {
        let s = (k + 1) as f64;
        for (o, x) in nu.data.iter_mut().zip(&n.data) {
            *o += s * x;
        }
    }
    nu
}

/// Time-step factor of the implicit drag in the projection step:
/// `dt` (first order) or `2 dt / 3` (BDF2).
#[inline]
pub fn projection_time_factor(dt: f64, order: Order) -> f64 {
    match order {
        Order::First => dt,
        Order::Second => 2.0 * dt / 3.0,
    }
}

/// `kappa (alpha / (i^{2/3} eps)) / (1/theta + alpha / (i^{2/3} eps))` written so
/// that it stays finite as `eps -> 0`; tends to `kappa`.
#[inline]
pub fn projection_drag_coeff(kappa: f64, alpha: f64, eps: f64, size: usize, theta: f64) -> f64 {
    kappa * alpha / (alpha + size_two_thirds(size) * eps / theta)
}

/// Effective density of the projection step,
/// `1 + sum_i c_i i n_i` with `c_i` from [`projection_drag_coeff`].
pub fn rho_eps(
    densities: &[&ScalarField],
    eps: &ScalarField,
    kappa: f64,
    alpha: f64,
    dt: f64,
    order: Order,
) -> ScalarField {
    let nx = eps.nx;
    let theta = projection_time_factor(dt, order);
    let mut rho = ScalarField::constant(nx, 1.0);
    for a in 1..=nx {
        for b in 1..=nx {
            let e = eps.at(a, b);
            let mut r = 1.0;
            for (k, n) in densities.iter().enumerate() {
                let size = k + 1;
                r += projection_drag_coeff(kappa, alpha, e, size, theta) * size as f64 * n.at(a, b);
            }
            rho.set(a, b, r);
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn quad(nx: usize, nv: usize, vmax: f64) -> (GridSpec, VelocityQuadrature) {
        let spec = GridSpec::new(nx, nv, vmax).unwrap();
        (spec, VelocityQuadrature::new(&build_grid(spec).unwrap()))
    }

    /// Composite Simpson on a fine grid: independent reference for the
    /// truncated Gaussian integral over the box.
    fn simpson_gauss_box(size: f64, u: f64, vmax: f64) -> f64 {
        let n = 20_000;
        let h = 2.0 * vmax / n as f64;
        let g = |x: f64| (size / (2.0 * PI)).sqrt() * (-0.5 * size * (x - u) * (x - u)).exp();
        let mut s = g(-vmax) + g(vmax);
        for k in 1..n {
            let x = -vmax + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(x);
        }
        s * h / 3.0
    }

    #[test]
    fn maxwellian_density_matches_quadrature_reference() {
        let (spec, q) = quad(4, 32, 8.0);
        let mut blk = vec![0.0; 32 * 32];
        maxwellian_block([0.0, 0.0], 1, &q.v, &mut blk);
        let n = q.density(&blk);
        let reference = simpson_gauss_box(1.0, 0.0, 8.0).powi(2);
        assert!((reference - 1.0).abs() < 1e-12);
        assert!((n - reference).abs() < 1e-6, "{n}");
        let _ = spec;
    }

    #[test]
    fn maxwellian_peak_values() {
        let p1 = maxwellian_value([0.0, 0.0], 1, [0.0, 0.0]);
        assert!((p1 - 0.159_154_943_091_895_35).abs() < 1e-15);
        let p2 = maxwellian_value([0.0, 0.0], 2, [0.0, 0.0]);
        assert!((p2 - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
        let u = [0.3, -1.2];
        for w in [[0.5, 0.25], [1.0, -2.0], [3.0, 0.0]] {
            let a = maxwellian_value(u, 2, [u[0] + w[0], u[1] + w[1]]);
            let b = maxwellian_value(u, 2, [u[0] - w[0], u[1] - w[1]]);
            assert!((a - b).abs() <= 1e-16 * a.max(1e-300));
        }
    }

    #[test]
    fn odd_moments_vanish_exactly() {
        let (_, q) = quad(4, 16, 8.0);
        let mut blk = vec![0.0; 256];
        for m1 in 0..16 {
            for m2 in 0..16 {
                let (v1, v2) = (q.v[m1], q.v[m2]);
                blk[m1 * 16 + m2] = (-(v1 * v1) * 0.7).exp() * (1.0 + 0.3 * v2 + v2 * v2);
            }
        }
        assert_eq!(q.first(&blk)[0], 0.0);
        assert_eq!(q.second(&blk)[1], 0.0);
        assert_eq!(q.density(&[0.0; 256]), 0.0);
    }

    #[test]
    fn maxwellian_moments() {
        let (spec, q) = quad(4, 32, 8.0);
        for size in [1usize, 2, 3] {
            for u in [[0.0, 0.0], [1.5, -0.7], [-2.0, 2.0]] {
                let mut blk = vec![0.0; 1024];
                maxwellian_block(u, size, &q.v, &mut blk);
                let n = q.density(&blk);
                assert!((n - 1.0).abs() < 1e-6, "size {size} u {u:?}: {n}");
                let j = q.first(&blk);
                let s = size as f64;
                let un = u[0].abs().max(u[1].abs());
                for c in 0..2 {
                    assert!((s * j[c] - s * u[c]).abs() <= 1e-5 * (1.0 + un));
                }
                let p = q.second(&blk);
                // i n (u (x) u) + n I
                assert!((s * p[0] - (s * u[0] * u[0] + 1.0)).abs() < 1e-5);
                assert!((s * p[1] - s * u[0] * u[1]).abs() < 1e-5);
                assert!((s * p[2] - (s * u[1] * u[1] + 1.0)).abs() < 1e-5);
            }
        }
        let _ = spec;
    }

    #[test]
    fn composite_density_examples() {
        let one = ScalarField::constant(4, 1.0);
        let nu = composite_density(&[&one, &one]);
        assert_eq!(nu.at(2, 2), 3.0);
        let nu1 = composite_density(&[&one]);
        assert_eq!(nu1, one);
        let zero = ScalarField::zeros(4);
        assert_eq!(composite_density(&[&zero, &zero]), zero);
    }

    #[test]
    fn rho_eps_examples() {
        let n = ScalarField::constant(4, 1.0);
        let eps = ScalarField::constant(4, 1.0);
        let rho = rho_eps(&[&n], &eps, 2.0, 0.5, 1.0, Order::First);
        assert!((rho.at(1, 1) - 5.0 / 3.0).abs() < 1e-15);

        let zero = ScalarField::zeros(4);
        let rho = rho_eps(&[&zero, &zero], &eps, 2.0, 0.5, 0.01, Order::Second);
        assert_eq!(rho.at(2, 3), 1.0);

        // eps -> 0: rho -> 1 + kappa nu.
        let tiny = ScalarField::constant(4, 1e-14);
        let rho = rho_eps(&[&n, &n], &tiny, 2.0, 0.5, 1e-3, Order::First);
        assert!((rho.at(2, 2) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn moments_are_linear() {
        let (spec, q) = quad(4, 8, 4.0);
        let mut f = PhaseDistribution::zeros(spec);
        let mut g = PhaseDistribution::zeros(spec);
        for (k, (x, y)) in f.data.iter_mut().zip(g.data.iter_mut()).enumerate() {
            *x = ((k * 37 % 101) as f64) / 101.0;
            *y = ((k * 53 % 97) as f64) / 97.0;
        }
        let sum = PhaseDistribution {
            spec,
            data: f.data.iter().zip(&g.data).map(|(a, b)| 2.0 * a + b).collect(),
        };
        let mf = SpeciesMoments::compute(&f, &q, 2);
        let mg = SpeciesMoments::compute(&g, &q, 2);
        let ms = SpeciesMoments::compute(&sum, &q, 2);
        for a in 1..=4 {
            for b in 1..=4 {
                let want = 2.0 * mf.n.at(a, b) + mg.n.at(a, b);
                assert!((ms.n.at(a, b) - want).abs() < 1e-12);
                let want = 2.0 * mf.j.comp[1].at(a, b) + mg.j.comp[1].at(a, b);
                assert!((ms.j.comp[1].at(a, b) - want).abs() < 1e-12);
            }
        }
    }
}

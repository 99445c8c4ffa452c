//! Solver for the hydrodynamic limit: incompressible Navier-Stokes with the
//! composite density `1 + kappa nu`, `nu = sum_i i n_i`,
//!
//! ```text
//! d_t nu + div(nu u) = 0
//! d_t((1 + kappa nu) u) + div((1 + kappa nu) u (x) u) + grad(p + kappa nu)
//!     + kappa nu grad Phi - Delta u / Re = 0,   div u = 0.
//! ```
//!
//! It reuses the Helmholtz and projection solvers of the full scheme and
//! serves as the reference the stiff kinetic runs are compared against.

use std::str::FromStr;

use crate::boundary::{fill_ghost_f_specular, fill_ghost_p_neumann, fill_ghost_u_noslip};
use crate::error::{Error, Result};
use crate::fluid::{convection, gradient, project, solve_helmholtz, weighted_convection};
use crate::grid::{build_grid, GridSpec, Order, ScalarField, SchemeParams, VectorField};
use crate::integrator::SimState;
use crate::moments::{density_field, first_moment_field, maxwellian_distribution, projection_time_factor, VelocityQuadrature};
use crate::presets::ExperimentPreset;
use crate::transport::{advect_scalar, advect_x, centered_gradient, reconstructed_gradient};

/// Discretization of the particle fluxes `div(n_i u)` and of the particle
/// momentum flux `div(kappa nu u (x) u) + kappa grad nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LimitFlux {
    /// Limited upwind advection of each density with the fluid velocity and
    /// the reconstructed gradient of `nu`.
    Upwind,
    #[default]
    /// Moments of the phase-space transport applied to the local
    /// Maxwellians `n_i M_{u,i}`: the discrete limit of the kinetic scheme.
    Kinetic,
}

impl LimitFlux {
    pub fn name(self) -> &'static str {
        match self {
            LimitFlux::Upwind => "upwind",
            LimitFlux::Kinetic => "kinetic",
        }
    }
}

impl FromStr for LimitFlux {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => Ok(LimitFlux::Upwind),
            "kinetic" => Ok(LimitFlux::Kinetic),
            _ => Err(Error::InvalidParams(format!("unknown limit flux '{s}' (expected upwind or kinetic)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitLevel {
    pub n: Vec<ScalarField>,
    pub u: VectorField,
    pub p: ScalarField,
}

/// Densities `n_i` (sizes `1..=N`), velocity and pressure of the limit
/// system; `nu = sum_i i n_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub spec: GridSpec,
    pub step: usize,
    pub time: f64,
    pub n: Vec<ScalarField>,
    pub u: VectorField,
    pub p: ScalarField,
    pub previous: Option<LimitLevel>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LimitReport {
    pub divergence: f64,
    pub helmholtz_iterations: usize,
    pub pressure_iterations: usize,
}

fn composite(n: &[ScalarField]) -> ScalarField {
    let mut nu = ScalarField::zeros(n[0].nx);
    for (s, ns) in n.iter().enumerate() {
        for (o, v) in nu.data.iter_mut().zip(&ns.data) {
            *o += (s + 1) as f64 * v;
        }
    }
    nu
}

impl LimitState {
    pub fn new(spec: GridSpec, n: Vec<ScalarField>, mut u: VectorField, mut p: ScalarField) -> Result<Self> {
        spec.validate()?;
        if n.is_empty() {
            return Err(Error::InvalidParams("at least one density is required".into()));
        }
        if n.iter().any(|f| f.nx != spec.nx) || u.nx() != spec.nx || p.nx != spec.nx {
            return Err(Error::GridMismatch("limit fields do not match the grid".into()));
        }
        let mut n = n;
        for f in n.iter_mut() {
            if f.min_interior() < 0.0 {
                return Err(Error::InvalidParams("densities must be nonnegative".into()));
            }
            fill_ghost_p_neumann(f);
        }
        fill_ghost_u_noslip(&mut u);
        fill_ghost_p_neumann(&mut p);
        Ok(LimitState {
            spec,
            step: 0,
            time: 0.0,
            n,
            u,
            p,
            previous: None,
        })
    }

    /// Densities, `u` and `p` of a kinetic state.
    pub fn from_sim_state(state: &SimState) -> Result<Self> {
        let n = state.moments.iter().map(|m| m.n.clone()).collect();
        LimitState::new(state.spec, n, state.u.clone(), state.p.clone())
    }

    /// Limit data of a preset with `species` species, `p = 0`.
    pub fn from_preset(preset: ExperimentPreset, spec: GridSpec, species: usize) -> Result<Self> {
        let n = (0..species).map(|_| ScalarField::from_fn(&spec, |x, y| preset.density(x, y))).collect();
        let u = VectorField::from_fn(&spec, |x, y| preset.fluid_velocity(x, y));
        LimitState::new(spec, n, u, ScalarField::zeros(spec.nx))
    }

    /// `nu = sum_i i n_i` with Neumann ghosts.
    pub fn nu(&self) -> ScalarField {
        let mut nu = composite(&self.n);
        fill_ghost_p_neumann(&mut nu);
        nu
    }

    /// `sum_x nu dx^2`.
    pub fn mass(&self) -> f64 {
        self.nu().sum() * self.spec.dx() * self.spec.dx()
    }

    fn level(&self) -> LimitLevel {
        LimitLevel {
            n: self.n.clone(),
            u: self.u.clone(),
            p: self.p.clone(),
        }
    }
}

fn density(nu: &ScalarField, kappa: f64) -> ScalarField {
    let mut rho = nu.clone();
    for v in rho.data.iter_mut() {
        *v = 1.0 + kappa * *v;
    }
    rho
}

/// Explicit terms of one level: per-species density fluxes and the
/// momentum flux `div((1 + kappa nu) u (x) u) + kappa grad nu`.
struct Explicit {
    flux: Vec<ScalarField>,
    momentum: VectorField,
}

fn explicit_terms(n: &[ScalarField], u: &VectorField, spec: GridSpec, kappa: f64, kind: LimitFlux) -> Result<Explicit> {
    let dx = spec.dx();
    let nx = spec.nx;
    let mut nu = composite(n);
    fill_ghost_p_neumann(&mut nu);
    match kind {
        LimitFlux::Upwind => {
            let flux = n.iter().map(|ns| advect_scalar(ns, u, dx)).collect();
            let mut momentum = weighted_convection(u, &density(&nu, kappa), dx);
            let g = reconstructed_gradient(&nu, dx);
            for c in 0..2 {
                for (m, gv) in momentum.comp[c].data.iter_mut().zip(&g.comp[c].data) {
                    *m += kappa * gv;
                }
            }
            Ok(Explicit { flux, momentum })
        }
        LimitFlux::Kinetic => {
            let grid = build_grid(spec)?;
            let quad = VelocityQuadrature::new(&grid);
            let mut flux = Vec::with_capacity(n.len());
            let mut momentum = convection(u, dx);
            for (s, ns) in n.iter().enumerate() {
                let size = s + 1;
                let mut f = maxwellian_distribution(spec, &grid.v, ns, u, size);
                // Ghost Maxwellians from the ghost density and velocity, then
                // reflected like the kinetic walls.
                fill_ghost_f_specular(&mut f);
                let t = advect_x(&f, &grid.v);
                flux.push(density_field(&t, &quad));
                let m = first_moment_field(&t, &quad);
                for c in 0..2 {
                    for a in 1..=nx {
                        for b in 1..=nx {
                            let v = momentum.comp[c].at(a, b) + kappa * size as f64 * m.comp[c].at(a, b);
                            momentum.comp[c].set(a, b, v);
                        }
                    }
                }
            }
            Ok(Explicit { flux, momentum })
        }
    }
}

/// One step of the limit system. The first-order scheme is used when
/// `order` is first or no history exists yet.
pub fn limit_step(state: &LimitState, params: &SchemeParams, order: Order, kind: LimitFlux) -> Result<(LimitState, LimitReport)> {
    match (order, &state.previous) {
        (Order::Second, Some(prev)) => advance(state, Some(prev), params, kind),
        _ => advance(state, None, params, kind),
    }
}

pub fn limit_step_first_order(state: &LimitState, params: &SchemeParams, kind: LimitFlux) -> Result<(LimitState, LimitReport)> {
    advance(state, None, params, kind)
}

pub fn limit_step_second_order(state: &LimitState, params: &SchemeParams, kind: LimitFlux) -> Result<(LimitState, LimitReport)> {
    let prev = state.previous.as_ref().ok_or(Error::MissingHistory)?;
    advance(state, Some(prev), params, kind)
}

fn advance(state: &LimitState, prev: Option<&LimitLevel>, params: &SchemeParams, kind: LimitFlux) -> Result<(LimitState, LimitReport)> {
    let spec = state.spec;
    let n = spec.nx;
    let dx = spec.dx();
    let kappa = params.kappa;
    let species = state.n.len();
    if let Some(pl) = prev {
        if pl.n.len() != species {
            return Err(Error::GridMismatch("previous limit level has a different species count".into()));
        }
    }
    let order = if prev.is_some() { Order::Second } else { Order::First };
    let theta = projection_time_factor(params.dt, order);
    let nu_k = state.nu();
    let rho_k = density(&nu_k, kappa);
    let ex_k = explicit_terms(&state.n, &state.u, spec, kappa, kind)?;

    // History combinations a^k or (4 a^k - a^{k-1}) / 3, explicit terms at k
    // or extrapolated.
    let mut n_new: Vec<ScalarField> = (0..species).map(|_| ScalarField::zeros(n)).collect();
    let mut mom_hist = VectorField::zeros(n);
    let mut momentum = ex_k.momentum.clone();
    let mut nu_force = nu_k.clone();
    let mut grad_p = None;
    match prev {
        None => {
            for s in 0..species {
                for a in 1..=n {
                    for b in 1..=n {
                        n_new[s].set(a, b, state.n[s].at(a, b) - theta * ex_k.flux[s].at(a, b));
                    }
                }
            }
            for a in 1..=n {
                for b in 1..=n {
                    for c in 0..2 {
                        mom_hist.comp[c].set(a, b, rho_k.at(a, b) * state.u.comp[c].at(a, b));
                    }
                }
            }
        }
        Some(pl) => {
            let nu_p = composite(&pl.n);
            let rho_p = density(&nu_p, kappa);
            let ex_p = explicit_terms(&pl.n, &pl.u, spec, kappa, kind)?;
            for s in 0..species {
                for a in 1..=n {
                    for b in 1..=n {
                        let hist = (4.0 * state.n[s].at(a, b) - pl.n[s].at(a, b)) / 3.0;
                        let fl = 2.0 * ex_k.flux[s].at(a, b) - ex_p.flux[s].at(a, b);
                        n_new[s].set(a, b, hist - theta * fl);
                    }
                }
            }
            for a in 1..=n {
                for b in 1..=n {
                    nu_force.set(a, b, 2.0 * nu_k.at(a, b) - nu_p.at(a, b));
                    for c in 0..2 {
                        let m = (4.0 * rho_k.at(a, b) * state.u.comp[c].at(a, b) - rho_p.at(a, b) * pl.u.comp[c].at(a, b)) / 3.0;
                        mom_hist.comp[c].set(a, b, m);
                        momentum.comp[c].set(a, b, 2.0 * ex_k.momentum.comp[c].at(a, b) - ex_p.momentum.comp[c].at(a, b));
                    }
                }
            }
            grad_p = Some(gradient(&state.p, dx));
        }
    }
    for f in n_new.iter_mut() {
        fill_ghost_p_neumann(f);
    }
    let rho_new = density(&composite(&n_new), kappa);
    let grad_phi = centered_gradient(&params.phi, dx);

    let mut reaction = ScalarField::zeros(n);
    let mut rhs = VectorField::zeros(n);
    for a in 1..=n {
        for b in 1..=n {
            reaction.set(a, b, rho_new.at(a, b) / theta);
            for c in 0..2 {
                let mut r = mom_hist.comp[c].at(a, b) / theta
                    - momentum.comp[c].at(a, b)
                    - kappa * nu_force.at(a, b) * grad_phi.comp[c].at(a, b);
                if let Some(g) = &grad_p {
                    r -= g.comp[c].at(a, b);
                }
                rhs.comp[c].set(a, b, r);
            }
        }
    }
    let (u_star, helm) = solve_helmholtz(&reaction, params.re, &rhs, &state.u, dx, params)?;
    let p_old = prev.map(|_| &state.p);
    let proj = project(&rho_new, &u_star, p_old, theta, params, dx)?;
    let next = LimitState {
        spec,
        step: state.step + 1,
        time: state.time + params.dt,
        n: n_new,
        u: proj.u,
        p: proj.p,
        previous: Some(state.level()),
    };
    Ok((
        next,
        LimitReport {
            divergence: proj.divergence,
            helmholtz_iterations: helm,
            pressure_iterations: proj.iterations,
        },
    ))
}

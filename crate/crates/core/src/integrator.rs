//! One full time step: densities, pressureless fluid step, projection and the
//! implicit kinetic update, for the first-order scheme and for BDF2.

use crate::boundary::{fill_ghost_f, fill_ghost_p_neumann, fill_ghost_u_noslip};
use crate::error::{Error, Result};
use crate::fluid::{convection_noslip, gradient, pressureless_step, projection_step, PressurelessInput};
use crate::fokker_planck::solve_fp;
use crate::grid::{build_grid, BoundaryMode, GridSpec, Order, PhaseDistribution, ScalarField, SchemeParams, VectorField};
use crate::moments::{density_field, first_moment_field, projection_time_factor, SpeciesMoments, VelocityQuadrature};
use crate::transport::{accel_v, advect_x, centered_gradient};

/// Stored copy of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub f: Vec<PhaseDistribution>,
    pub n: Vec<ScalarField>,
    pub j: Vec<VectorField>,
    pub u: VectorField,
    pub p: ScalarField,
}

/// Full simulation state at step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub spec: GridSpec,
    pub step: usize,
    pub time: f64,
    pub u: VectorField,
    pub p: ScalarField,
    pub f: Vec<PhaseDistribution>,
    pub moments: Vec<SpeciesMoments>,
    pub previous: Option<Level>,
}

impl SimState {
    /// State at step 0 from distributions and fluid data; moments are
    /// computed and ghosts filled.
    pub fn new(spec: GridSpec, f: Vec<PhaseDistribution>, mut u: VectorField, mut p: ScalarField, boundary: BoundaryMode) -> Result<Self> {
        spec.validate()?;
        if f.iter().any(|g| g.spec != spec) || u.nx() != spec.nx || p.nx != spec.nx {
            return Err(Error::GridMismatch("state fields do not match the grid".into()));
        }
        let quad = VelocityQuadrature::from_spec(spec);
        let mut f = f;
        for (s, g) in f.iter_mut().enumerate() {
            fill_ghost_f(g, s + 1, boundary == BoundaryMode::WallsWithInjection);
        }
        let moments = f.iter().enumerate().map(|(s, g)| SpeciesMoments::compute(g, &quad, s + 1)).collect();
        fill_ghost_u_noslip(&mut u);
        fill_ghost_p_neumann(&mut p);
        Ok(SimState {
            spec,
            step: 0,
            time: 0.0,
            u,
            p,
            f,
            moments,
            previous: None,
        })
    }

    pub fn species(&self) -> usize {
        self.f.len()
    }

    /// Copy of the current level.
    pub fn level(&self) -> Level {
        Level {
            f: self.f.clone(),
            n: self.moments.iter().map(|m| m.n.clone()).collect(),
            j: self.moments.iter().map(|m| m.j.clone()).collect(),
            u: self.u.clone(),
            p: self.p.clone(),
        }
    }

    /// `sum_x n_i dx^2` per species.
    pub fn masses(&self) -> Vec<f64> {
        let dx2 = self.spec.dx() * self.spec.dx();
        self.moments.iter().map(|m| m.n.sum() * dx2).collect()
    }

    /// Current level together with the stored previous one.
    pub fn pair(&self) -> Result<ExtrapolationPair<'_>> {
        match &self.previous {
            Some(prev) => Ok(ExtrapolationPair { current: self, previous: prev }),
            None => Err(Error::MissingHistory),
        }
    }
}

/// Two consecutive levels with the extrapolation `b† = 2 b^k - b^{k-1}`.
#[derive(Debug, Clone, Copy)]
pub struct ExtrapolationPair<'a> {
    pub current: &'a SimState,
    pub previous: &'a Level,
}

fn combine_scalar(x: &ScalarField, y: &ScalarField, a: f64, b: f64) -> ScalarField {
    let mut out = x.clone();
    for (o, v) in out.data.iter_mut().zip(&y.data) {
        *o = a * *o + b * v;
    }
    out
}

fn combine_vector(x: &VectorField, y: &VectorField, a: f64, b: f64) -> VectorField {
    VectorField {
        comp: [combine_scalar(&x.comp[0], &y.comp[0], a, b), combine_scalar(&x.comp[1], &y.comp[1], a, b)],
    }
}

fn combine_phase(x: &PhaseDistribution, y: &PhaseDistribution, a: f64, b: f64) -> PhaseDistribution {
    let mut out = x.clone();
    for (o, v) in out.data.iter_mut().zip(&y.data) {
        *o = a * *o + b * v;
    }
    out
}

impl ExtrapolationPair<'_> {
    pub fn f_dagger(&self, s: usize) -> PhaseDistribution {
        self.current.f[s].extrapolate(&self.previous.f[s])
    }

    pub fn n_dagger(&self, s: usize) -> ScalarField {
        combine_scalar(&self.current.moments[s].n, &self.previous.n[s], 2.0, -1.0)
    }

    pub fn u_dagger(&self) -> VectorField {
        combine_vector(&self.current.u, &self.previous.u, 2.0, -1.0)
    }
}

/// Scalars collected during one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// `max |n^{k+1} - density(f^{k+1})|` over species and cells.
    pub density_gap: f64,
    pub divergence: f64,
    pub rho_min: f64,
    pub helmholtz_iterations: usize,
    pub pressure_iterations: usize,
    pub fp_max_iterations: usize,
    pub fp_total_iterations: usize,
    pub fp_worst_residual: f64,
    /// Smallest interior value of any distribution after the step.
    pub min_f: f64,
}

/// History-dependent inputs that differ between the two schemes.
struct Explicit {
    theta: f64,
    order: Order,
    /// Distribution the transport terms act on (`f^k` or `f†`), ghosts filled.
    f_trans: Vec<PhaseDistribution>,
    /// `f^k` or `(4 f^k - f^{k-1}) / 3`.
    f_hist: Vec<PhaseDistribution>,
    n_hist: Vec<ScalarField>,
    n_trans: Vec<ScalarField>,
    j_hist: Vec<VectorField>,
    u_hist: VectorField,
    conv: VectorField,
    grad_p: Option<VectorField>,
    p_old: Option<ScalarField>,
}

fn advance(state: &SimState, params: &SchemeParams, ex: Explicit) -> Result<(SimState, StepReport)> {
    let spec = state.spec;
    params.check_cfl(&spec)?;
    let grid = build_grid(spec)?;
    let quad = VelocityQuadrature::new(&grid);
    let dx = spec.dx();
    let theta = ex.theta;
    let species = state.species();
    let injection = params.boundary == BoundaryMode::WallsWithInjection;

    // Step 1: densities from the transport moment.
    let trans: Vec<PhaseDistribution> = ex.f_trans.iter().map(|f| advect_x(f, &grid.v)).collect();
    let mut n_new = Vec::with_capacity(species);
    for s in 0..species {
        let m0 = density_field(&trans[s], &quad);
        n_new.push(combine_scalar(&ex.n_hist[s], &m0, 1.0, -theta));
    }

    // Step 2: explicit momentum sources -i int v (v . grad f) - i n grad Phi.
    let grad_phi = centered_gradient(&params.phi, dx);
    let mut source = Vec::with_capacity(species);
    for s in 0..species {
        let size = (s + 1) as f64;
        let stress = first_moment_field(&trans[s], &quad);
        let mut g = VectorField::zeros(spec.nx);
        for a in 1..=spec.nx {
            for b in 1..=spec.nx {
                let n = ex.n_trans[s].at(a, b);
                for c in 0..2 {
                    let v = -size * (stress.comp[c].at(a, b) + n * grad_phi.comp[c].at(a, b));
                    g.comp[c].set(a, b, v);
                }
            }
        }
        source.push(g);
    }
    let alpha = params.alpha(ex.order);
    let input = PressurelessInput {
        u_hist: &ex.u_hist,
        convection: &ex.conv,
        grad_p: ex.grad_p.as_ref(),
        j_hist: &ex.j_hist,
        source: &source,
        n_new: &n_new,
        theta,
        alpha,
    };
    let pl = pressureless_step(&input, params, dx)?;

    // Step 3: projection.
    let pr = projection_step(&pl.u_star, &pl.j_star, &n_new, ex.p_old.as_ref(), theta, alpha, params, dx)?;

    // Step 4: implicit relaxation around u^{k+1}.
    let mut f_new = Vec::with_capacity(species);
    let mut report = StepReport {
        divergence: pr.divergence,
        rho_min: pr.rho.min_interior(),
        helmholtz_iterations: pl.iterations,
        pressure_iterations: pr.iterations,
        min_f: f64::INFINITY,
        ..StepReport::default()
    };
    for s in 0..species {
        let acc = accel_v(&ex.f_trans[s], &params.phi);
        let mut rhs = ex.f_hist[s].clone();
        for ((r, t), q) in rhs.data.iter_mut().zip(&trans[s].data).zip(&acc.data) {
            *r += theta * (q - t);
        }
        let (mut f, st) = solve_fp(&rhs, &pr.u, &params.eps, theta, s + 1, &quad, &grid.trapezoid, &params.fp)?;
        fill_ghost_f(&mut f, s + 1, injection);
        report.fp_max_iterations = report.fp_max_iterations.max(st.max_iterations);
        report.fp_total_iterations += st.total_iterations;
        report.fp_worst_residual = report.fp_worst_residual.max(st.worst_residual);
        report.min_f = report.min_f.min(f.min_interior());
        f_new.push(f);
    }
    let moments: Vec<SpeciesMoments> = f_new.iter().enumerate().map(|(s, f)| SpeciesMoments::compute(f, &quad, s + 1)).collect();
    for s in 0..species {
        let mut gap: f64 = 0.0;
        for a in 1..=spec.nx {
            for b in 1..=spec.nx {
                gap = gap.max((moments[s].n.at(a, b) - n_new[s].at(a, b)).abs());
            }
        }
        report.density_gap = report.density_gap.max(gap);
    }
    let next = SimState {
        spec,
        step: state.step + 1,
        time: state.time + params.dt,
        u: pr.u,
        p: pr.p,
        f: f_new,
        moments,
        previous: Some(state.level()),
    };
    if !next.u.is_finite() || next.f.iter().any(|f| !f.is_finite()) {
        return Err(Error::FluidSolverDivergence {
            solver: "step",
            residual: f64::NAN,
            iterations: 0,
        });
    }
    Ok((next, report))
}

/// First-order step. The result keeps the input as its previous level.
pub fn step_first_order(state: &SimState, params: &SchemeParams) -> Result<(SimState, StepReport)> {
    let species = state.species();
    check_species(state, params)?;
    let dt = params.dt;
    let ex = Explicit {
        theta: projection_time_factor(dt, Order::First),
        order: Order::First,
        f_trans: state.f.clone(),
        f_hist: state.f.clone(),
        n_hist: (0..species).map(|s| state.moments[s].n.clone()).collect(),
        n_trans: (0..species).map(|s| state.moments[s].n.clone()).collect(),
        j_hist: (0..species).map(|s| state.moments[s].j.clone()).collect(),
        u_hist: state.u.clone(),
        conv: convection_noslip(&state.u, state.spec.dx()),
        grad_p: None,
        p_old: None,
    };
    advance(state, params, ex)
}

/// BDF2 step from the current level and the stored previous one.
pub fn step_second_order(pair: ExtrapolationPair, params: &SchemeParams) -> Result<(SimState, StepReport)> {
    let state = pair.current;
    let prev = pair.previous;
    check_species(state, params)?;
    if prev.f.len() != state.species() || prev.f.iter().any(|f| f.spec != state.spec) {
        return Err(Error::GridMismatch("previous level does not match the current one".into()));
    }
    let species = state.species();
    let dx = state.spec.dx();
    let injection = params.boundary == BoundaryMode::WallsWithInjection;
    let third = 1.0 / 3.0;
    let f_trans = (0..species)
        .map(|s| {
            let mut f = pair.f_dagger(s);
            fill_ghost_f(&mut f, s + 1, injection);
            f
        })
        .collect();
    let f_hist = (0..species).map(|s| combine_phase(&state.f[s], &prev.f[s], 4.0 * third, -third)).collect();
    let n_hist = (0..species).map(|s| combine_scalar(&state.moments[s].n, &prev.n[s], 4.0 * third, -third)).collect();
    let j_hist = (0..species).map(|s| combine_vector(&state.moments[s].j, &prev.j[s], 4.0 * third, -third)).collect();
    let conv = combine_vector(&convection_noslip(&state.u, dx), &convection_noslip(&prev.u, dx), 2.0, -1.0);
    let mut p = state.p.clone();
    fill_ghost_p_neumann(&mut p);
    let ex = Explicit {
        theta: projection_time_factor(params.dt, Order::Second),
        order: Order::Second,
        f_trans,
        f_hist,
        n_hist,
        n_trans: (0..species).map(|s| pair.n_dagger(s)).collect(),
        j_hist,
        u_hist: combine_vector(&state.u, &prev.u, 4.0 * third, -third),
        conv,
        grad_p: Some(gradient(&p, dx)),
        p_old: Some(p),
    };
    advance(state, params, ex)
}

/// First-order step from the initial state; the result carries level 0 as
/// its previous level and seeds the BDF2 loop.
pub fn bootstrap(state: &SimState, params: &SchemeParams) -> Result<(SimState, StepReport)> {
    step_first_order(state, params)
}

/// Advances by one step of the requested order, using the first-order
/// bootstrap when no history exists yet.
pub fn step(state: &SimState, params: &SchemeParams, order: Order) -> Result<(SimState, StepReport)> {
    match (order, &state.previous) {
        (Order::First, _) => step_first_order(state, params),
        (Order::Second, None) => bootstrap(state, params),
        (Order::Second, Some(_)) => step_second_order(state.pair()?, params),
    }
}

fn check_species(state: &SimState, params: &SchemeParams) -> Result<()> {
    if state.species() != params.species {
        return Err(Error::InvalidParams(format!(
            "state has {} species but parameters have {}",
            state.species(),
            params.species
        )));
    }
    if params.eps.nx != state.spec.nx {
        return Err(Error::GridMismatch("parameter fields do not match the state grid".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::maxwellian_distribution;

    fn equilibrium(spec: GridSpec, species: usize, c: f64) -> SimState {
        let grid = build_grid(spec).unwrap();
        let n = ScalarField::constant(spec.nx, c);
        let u = VectorField::zeros(spec.nx);
        let f = (1..=species).map(|i| maxwellian_distribution(spec, &grid.v, &n, &u, i)).collect();
        SimState::new(spec, f, u, ScalarField::zeros(spec.nx), BoundaryMode::Walls).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let spec = GridSpec::new(8, 8, 8.0).unwrap();
        let params = SchemeParams::new(&spec, 2, 2.0, 1.0, 1e-3);
        let st = equilibrium(spec, 2, 0.0);
        let (s1, _) = step_first_order(&st, &params).unwrap();
        let (s2, _) = step_second_order(s1.pair().unwrap(), &params).unwrap();
        assert!(s2.f.iter().all(|f| f.data.iter().all(|&x| x == 0.0)));
        assert_eq!(s2.u.max_norm(), 0.0);
    }

    #[test]
    fn global_equilibrium_is_steady() {
        let spec = GridSpec::new(8, 8, 8.0).unwrap();
        for eps in [1.0, 1e-6] {
            let params = SchemeParams::new(&spec, 2, 2.0, 1.0, eps);
            let st = equilibrium(spec, 2, 0.8);
            let (s1, r1) = step(&st, &params, Order::Second).unwrap();
            let (s2, _) = step(&s1, &params, Order::Second).unwrap();
            for s in 0..2 {
                let diff = s2.f[s].data.iter().zip(&st.f[s].data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(diff < 1e-12, "{diff}");
            }
            assert!(s2.u.max_norm() < 1e-12);
            assert!(r1.divergence < 1e-12);
        }
    }

    #[test]
    fn second_order_needs_history() {
        let spec = GridSpec::new(8, 8, 8.0).unwrap();
        let st = equilibrium(spec, 1, 1.0);
        assert!(matches!(st.pair(), Err(Error::MissingHistory)));
    }

    #[test]
    fn mass_is_conserved() {
        let spec = GridSpec::new(12, 8, 8.0).unwrap();
        let grid = build_grid(spec).unwrap();
        let params = SchemeParams::new(&spec, 2, 2.0, 1.0, 1e-2);
        let n = ScalarField::from_fn(&spec, |x, y| 1.0 + 0.5 * (6.0 * x).sin() * (4.0 * y).cos());
        let up = VectorField::from_fn(&spec, |x, y| [(3.0 * y).sin(), -(2.0 * x).cos()]);
        let f = (1..=2).map(|i| maxwellian_distribution(spec, &grid.v, &n, &up, i)).collect();
        let u = VectorField::from_fn(&spec, |x, y| [x * (1.0 - x) * y, 0.0]);
        let mut st = SimState::new(spec, f, u, ScalarField::zeros(spec.nx), BoundaryMode::Walls).unwrap();
        let m0 = st.masses();
        for _ in 0..4 {
            let (next, r) = step(&st, &params, Order::Second).unwrap();
            assert!(r.divergence <= 1e-8);
            assert!(r.rho_min >= 1.0);
            assert!(r.density_gap < 1e-12, "{}", r.density_gap);
            st = next;
        }
        for (a, b) in st.masses().iter().zip(&m0) {
            assert!(((a - b) / b).abs() < 4e-12);
        }
    }
}

//! Grids, parameters and field storage.
//!
//! Space is the unit square `[0,1]^2` split into `nx * nx` cells, velocity is
//! `[-v_max, v_max]^2` split into `nv * nv` cells; all unknowns live at cell
//! centers.
//!
//! Storage layout, shared by every module:
//!
//! * Spatial fields carry one ghost ring and are stored row-major over the
//!   padded `(nx + 2) x (nx + 2)` index set with `y` fastest:
//!   `idx(a, b) = a * (nx + 2) + b`, where `a` is the x index and `b` the y
//!   index. Interior cells are `1..=nx` in both directions.
//! * Phase-space fields store one contiguous `nv * nv` velocity block per
//!   padded spatial cell, blocks ordered like spatial fields. Inside a block
//!   the layout is `m1 * nv + m2` (`v2` fastest).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reference temperature; the scaled system is written with it fixed to one.
pub const THETA_BAR: f64 = 1.0;

/// Size of the uniform Cartesian phase-space grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
}

impl GridSpec {
    pub fn new(nx: usize, nv: usize, v_max: f64) -> Result<Self> {
        let spec = GridSpec { nx, nv, v_max };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 {
            return Err(Error::InvalidGrid(format!("nx = {} must be at least 4", self.nx)));
        }
        if self.nv < 4 {
            return Err(Error::InvalidGrid(format!("nv = {} must be at least 4", self.nv)));
        }
        if !self.nv.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("nv = {} must be even", self.nv)));
        }
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(Error::InvalidGrid(format!("v_max = {} must be positive", self.v_max)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.nv as f64
    }

    /// Padded side length of spatial arrays.
    pub fn np(&self) -> usize {
        self.nx + 2
    }

    /// Number of values in one velocity block.
    pub fn block(&self) -> usize {
        self.nv * self.nv
    }

    /// Center of padded spatial index `a` (0 and `nx + 1` are ghosts).
    pub fn x_center(&self, a: usize) -> f64 {
        (a as f64 - 0.5) * self.dx()
    }

    /// Center of velocity index `m` in `0..nv`.
    pub fn v_center(&self, m: usize) -> f64 {
        (m as f64 + 0.5) * self.dv() - self.v_max
    }
}

/// Cell-center coordinate tables and velocity quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    /// Interior cell centers `x_j`, `j = 1..nx`.
    pub x: Vec<f64>,
    /// Velocity cell centers `v_m`, `m = 1..nv`.
    pub v: Vec<f64>,
    /// One-dimensional trapezoid weights (1/2 at both ends, 1 inside).
    pub trapezoid: Vec<f64>,
}

pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let x = (1..=spec.nx).map(|a| spec.x_center(a)).collect();
    let half = spec.nv / 2;
    let mut v = vec![0.0; spec.nv];
    // Fill the negative half and mirror it so the table is exactly symmetric.
    for m in 0..half {
        let vm = spec.v_center(m);
        v[m] = vm;
        v[spec.nv - 1 - m] = -vm;
    }
    let mut trapezoid = vec![1.0; spec.nv];
    trapezoid[0] = 0.5;
    trapezoid[spec.nv - 1] = 0.5;
    Ok(Grid {
        spec,
        x,
        v,
        trapezoid,
    })
}

/// Time step `dx / (5 v_max)` used by all experiments.
pub fn cfl_timestep(spec: &GridSpec) -> f64 {
    spec.dx() / (5.0 * spec.v_max)
}

/// Scalar field on the padded spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub nx: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(nx: usize) -> Self {
        ScalarField {
            nx,
            data: vec![0.0; (nx + 2) * (nx + 2)],
        }
    }

    pub fn constant(nx: usize, value: f64) -> Self {
        let mut f = Self::zeros(nx);
        for a in 1..=nx {
            for b in 1..=nx {
                f.set(a, b, value);
            }
        }
        f
    }

    /// Samples `func(x, y)` at interior cell centers; ghosts stay zero.
    pub fn from_fn(spec: &GridSpec, func: impl Fn(f64, f64) -> f64) -> Self {
        let mut f = Self::zeros(spec.nx);
        for a in 1..=spec.nx {
            let x = spec.x_center(a);
            for b in 1..=spec.nx {
                f.set(a, b, func(x, spec.x_center(b)));
            }
        }
        f
    }

    #[inline]
    pub fn idx(&self, a: usize, b: usize) -> usize {
        a * (self.nx + 2) + b
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.data[a * (self.nx + 2) + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, value: f64) {
        let i = self.idx(a, b);
        self.data[i] = value;
    }

    /// Interior values in `(a, b)` order, `b` fastest.
    pub fn interior(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nx * self.nx);
        for a in 1..=self.nx {
            for b in 1..=self.nx {
                out.push(self.at(a, b));
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for a in 1..=self.nx {
            for b in 1..=self.nx {
                m = m.max(self.at(a, b).abs());
            }
        }
        m
    }

    pub fn min_interior(&self) -> f64 {
        let mut m = f64::INFINITY;
        for a in 1..=self.nx {
            for b in 1..=self.nx {
                m = m.min(self.at(a, b));
            }
        }
        m
    }

    /// Sum of interior values.
    pub fn sum(&self) -> f64 {
        let mut s = 0.0;
        for a in 1..=self.nx {
            for b in 1..=self.nx {
                s += self.at(a, b);
            }
        }
        s
    }

    /// Ghost fill by linear extrapolation, exact for affine fields.
    /// Corners are extrapolated along x from the already filled y ghosts.
    pub fn fill_ghost_linear(&mut self) {
        let n = self.nx;
        for a in 1..=n {
            let v = 2.0 * self.at(a, 1) - self.at(a, 2);
            self.set(a, 0, v);
            let v = 2.0 * self.at(a, n) - self.at(a, n - 1);
            self.set(a, n + 1, v);
        }
        for b in 0..=n + 1 {
            let v = 2.0 * self.at(1, b) - self.at(2, b);
            self.set(0, b, v);
            let v = 2.0 * self.at(n, b) - self.at(n - 1, b);
            self.set(n + 1, b, v);
        }
    }

    pub fn is_finite(&self) -> bool {
        (1..=self.nx).all(|a| (1..=self.nx).all(|b| self.at(a, b).is_finite()))
    }
}

/// Two-component vector field on the padded spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub comp: [ScalarField; 2],
}

impl VectorField {
    pub fn zeros(nx: usize) -> Self {
        VectorField {
            comp: [ScalarField::zeros(nx), ScalarField::zeros(nx)],
        }
    }

    pub fn from_fn(spec: &GridSpec, func: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        VectorField {
            comp: [
                ScalarField::from_fn(spec, |x, y| func(x, y)[0]),
                ScalarField::from_fn(spec, |x, y| func(x, y)[1]),
            ],
        }
    }

    pub fn nx(&self) -> usize {
        self.comp[0].nx
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> [f64; 2] {
        [self.comp[0].at(a, b), self.comp[1].at(a, b)]
    }

    /// Largest pointwise Euclidean norm over interior cells.
    pub fn max_norm(&self) -> f64 {
        let n = self.nx();
        let mut m: f64 = 0.0;
        for a in 1..=n {
            for b in 1..=n {
                let [x, y] = self.at(a, b);
                m = m.max(x.hypot(y));
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.comp.iter().all(ScalarField::is_finite)
    }
}

/// Distribution of one species on the phase grid (velocity block per padded
/// spatial cell).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDistribution {
    pub spec: GridSpec,
    pub data: Vec<f64>,
}

impl PhaseDistribution {
    pub fn zeros(spec: GridSpec) -> Self {
        PhaseDistribution {
            spec,
            data: vec![0.0; spec.np() * spec.np() * spec.block()],
        }
    }

    #[inline]
    pub fn block_offset(&self, a: usize, b: usize) -> usize {
        (a * self.spec.np() + b) * self.spec.block()
    }

    #[inline]
    pub fn block(&self, a: usize, b: usize) -> &[f64] {
        let o = self.block_offset(a, b);
        &self.data[o..o + self.spec.block()]
    }

    #[inline]
    pub fn block_mut(&mut self, a: usize, b: usize) -> &mut [f64] {
        let o = self.block_offset(a, b);
        let len = self.spec.block();
        &mut self.data[o..o + len]
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize, m1: usize, m2: usize) -> f64 {
        self.data[self.block_offset(a, b) + m1 * self.spec.nv + m2]
    }

    /// `2 self - older`, the two-level extrapolation.
    pub fn extrapolate(&self, older: &PhaseDistribution) -> PhaseDistribution {
        let data = self
            .data
            .iter()
            .zip(&older.data)
            .map(|(a, b)| 2.0 * a - b)
            .collect();
        PhaseDistribution {
            spec: self.spec,
            data,
        }
    }

    /// Smallest interior value.
    pub fn min_interior(&self) -> f64 {
        let n = self.spec.nx;
        let mut m = f64::INFINITY;
        for a in 1..=n {
            for b in 1..=n {
                for &v in self.block(a, b) {
                    m = m.min(v);
                }
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        let n = self.spec.nx;
        (1..=n).all(|a| (1..=n).all(|b| self.block(a, b).iter().all(|v| v.is_finite())))
    }
}

/// Samples the external potential `g * y`; ghosts by linear extrapolation.
pub fn gravity_potential(spec: &GridSpec, g: f64) -> ScalarField {
    let mut phi = ScalarField::from_fn(spec, |_, y| g * y);
    phi.fill_ghost_linear();
    phi
}

/// Stokes-number field that switches from `eps0` to order one along an
/// S-shaped curve through the middle of the domain.
pub fn epsilon_profile(spec: &GridSpec, eps0: f64) -> ScalarField {
    let mut eps = ScalarField::from_fn(spec, |x, y| epsilon_profile_value(eps0, x, y));
    eps.fill_ghost_linear();
    eps
}

pub fn epsilon_profile_value(eps0: f64, x: f64, y: f64) -> f64 {
    let s = x - 0.5 - 0.25 * (2.0 * PI * y).sin();
    eps0 + 0.5 * ((10.0 - 80.0 * s).tanh() + (10.0 + 80.0 * s).tanh())
}

/// Time-discretization order of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::InvalidParams(format!("order must be 1 or 2, got {v}"))),
        }
    }
}

/// How the stiff drag is split between the viscous and projection steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaPolicy {
    /// 1/2 for the first-order scheme, `min(1/2, dt)` for BDF2.
    Standard,
    /// Same weight for both orders.
    Fixed(f64),
}

impl AlphaPolicy {
    pub fn alpha(&self, order: Order, dt: f64) -> f64 {
        match (*self, order) {
            (AlphaPolicy::Standard, Order::First) => 0.5,
            (AlphaPolicy::Standard, Order::Second) => dt.min(0.5),
            (AlphaPolicy::Fixed(a), _) => a,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            AlphaPolicy::Standard => "standard".to_string(),
            AlphaPolicy::Fixed(a) => format!("fixed:{a:.17e}"),
        }
    }
}

/// Wall treatment for the particle distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Walls,
    WallsWithInjection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpSolverSettings {
    pub tol: f64,
    /// `None` means `10 * nv^2`.
    pub max_iter: Option<usize>,
    /// Diagonal preconditioning of the velocity CG; without it the
    /// trapezoid weights are the preconditioner.
    pub jacobi: bool,
    pub clip_negative: bool,
}

impl Default for FpSolverSettings {
    fn default() -> Self {
        FpSolverSettings {
            tol: 1e-10,
            max_iter: None,
            jacobi: true,
            clip_negative: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidSolverSettings {
    pub tol: f64,
    /// `None` means `10 * nx^2`.
    pub max_iter: Option<usize>,
    /// Bound on the pointwise discrete divergence after projection.
    pub div_tol: f64,
}

impl Default for FluidSolverSettings {
    fn default() -> Self {
        FluidSolverSettings {
            tol: 1e-10,
            max_iter: None,
            div_tol: 1e-10,
        }
    }
}

/// Physical and numerical parameters of one run. Species sizes are `1..=species`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub species: usize,
    pub kappa: f64,
    pub re: f64,
    /// Stokes number, always stored as a field.
    pub eps: ScalarField,
    /// External potential with ghosts filled.
    pub phi: ScalarField,
    pub dt: f64,
    pub alpha: AlphaPolicy,
    pub boundary: BoundaryMode,
    pub fp: FpSolverSettings,
    pub fluid: FluidSolverSettings,
}

impl SchemeParams {
    /// Parameters with constant Stokes number, no potential and walls.
    pub fn new(spec: &GridSpec, species: usize, kappa: f64, re: f64, eps: f64) -> Self {
        let mut eps_field = ScalarField::constant(spec.nx, eps);
        eps_field.fill_ghost_linear();
        SchemeParams {
            species,
            kappa,
            re,
            eps: eps_field,
            phi: ScalarField::zeros(spec.nx),
            dt: cfl_timestep(spec),
            alpha: AlphaPolicy::Standard,
            boundary: BoundaryMode::Walls,
            fp: FpSolverSettings::default(),
            fluid: FluidSolverSettings::default(),
        }
    }

    pub fn alpha(&self, order: Order) -> f64 {
        self.alpha.alpha(order, self.dt)
    }

    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.species == 0 {
            return bad("at least one species is required".into());
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa = {} must be positive", self.kappa));
        }
        if !(self.re > 0.0 && self.re.is_finite()) {
            return bad(format!("Re = {} must be positive", self.re));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if self.eps.nx != spec.nx || self.phi.nx != spec.nx {
            return bad("eps/phi fields do not match the grid".into());
        }
        for a in 1..=spec.nx {
            for b in 1..=spec.nx {
                let e = self.eps.at(a, b);
                if !(e > 0.0 && e.is_finite()) {
                    return bad(format!("eps = {e} at cell ({a}, {b}) must be positive"));
                }
                if !self.phi.at(a, b).is_finite() {
                    return bad(format!("potential not finite at cell ({a}, {b})"));
                }
            }
        }
        for order in [Order::First, Order::Second] {
            let alpha = self.alpha(order);
            if !(alpha > 0.0 && alpha < 1.0) {
                return bad(format!("alpha = {alpha} must lie in (0, 1)"));
            }
        }
        if !(self.fp.tol > 0.0 && self.fluid.tol > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        Ok(())
    }

    /// `Err` when `dt * v_max > dx`.
    pub fn check_cfl(&self, spec: &GridSpec) -> Result<()> {
        let dt_vmax = self.dt * spec.v_max;
        if dt_vmax > spec.dx() {
            return Err(Error::CflViolation {
                dt_vmax,
                dx: spec.dx(),
            });
        }
        Ok(())
    }
}

/// `i^(2/3)` for species size `i`.
#[inline]
pub fn size_two_thirds(i: usize) -> f64 {
    (i as f64).powf(2.0 / 3.0)
}

/// `i^(5/3)` for species size `i`.
#[inline]
pub fn size_five_thirds(i: usize) -> f64 {
    (i as f64).powf(5.0 / 3.0)
}

//! The four experiment configurations: smooth accuracy data, the volcano AP
//! test, the gravity-driven dam and the injection problem.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{
    build_grid, cfl_timestep, epsilon_profile, gravity_potential, BoundaryMode, GridSpec, ScalarField, SchemeParams,
    VectorField,
};
use crate::integrator::SimState;
use crate::moments::maxwellian_distribution;

/// Background density used to keep vacuum regions positive.
pub const BACKGROUND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentPreset {
    Accuracy,
    Volcano,
    Dam,
    Injection,
}

/// How the Stokes number is laid out in space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsProfile {
    Constant,
    /// Smooth S-shaped transition from `eps0` to `O(1)`.
    Ex30,
}

impl EpsProfile {
    pub fn name(self) -> &'static str {
        match self {
            EpsProfile::Constant => "constant",
            EpsProfile::Ex30 => "ex30",
        }
    }
}

impl FromStr for EpsProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(EpsProfile::Constant),
            "ex30" => Ok(EpsProfile::Ex30),
            _ => Err(Error::InvalidParams(format!("unknown eps profile '{s}' (expected constant or ex30)"))),
        }
    }
}

impl ExperimentPreset {
    pub const ALL: [ExperimentPreset; 4] = [
        ExperimentPreset::Accuracy,
        ExperimentPreset::Volcano,
        ExperimentPreset::Dam,
        ExperimentPreset::Injection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentPreset::Accuracy => "accuracy",
            ExperimentPreset::Volcano => "volcano",
            ExperimentPreset::Dam => "dam",
            ExperimentPreset::Injection => "injection",
        }
    }

    pub fn default_re(self) -> f64 {
        match self {
            ExperimentPreset::Accuracy | ExperimentPreset::Volcano => 1.0,
            ExperimentPreset::Dam | ExperimentPreset::Injection => 1000.0,
        }
    }

    pub fn default_eps(self) -> f64 {
        match self {
            ExperimentPreset::Injection => 1e-3,
            _ => 1.0,
        }
    }

    pub fn default_eps_profile(self) -> EpsProfile {
        match self {
            ExperimentPreset::Injection => EpsProfile::Ex30,
            _ => EpsProfile::Constant,
        }
    }

    /// Gravity constant of `Phi = g y`, zero when the preset has no potential.
    pub fn gravity(self) -> f64 {
        match self {
            ExperimentPreset::Dam | ExperimentPreset::Injection => 1.0,
            _ => 0.0,
        }
    }

    pub fn boundary(self) -> BoundaryMode {
        match self {
            ExperimentPreset::Injection => BoundaryMode::WallsWithInjection,
            _ => BoundaryMode::Walls,
        }
    }

    /// End time of the reference runs.
    pub fn default_tmax(self, spec: &GridSpec) -> f64 {
        match self {
            ExperimentPreset::Accuracy => 0.025,
            ExperimentPreset::Volcano => 500.0 * cfl_timestep(spec),
            ExperimentPreset::Dam | ExperimentPreset::Injection => 5.0,
        }
    }

    /// Initial density of every species.
    pub fn density(self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - 0.5, y - 0.5);
        let r2 = dx * dx + dy * dy;
        match self {
            ExperimentPreset::Accuracy => BACKGROUND + (-80.0 * r2).exp(),
            ExperimentPreset::Volcano => (0.5 + 100.0 * r2) * (-40.0 * r2).exp(),
            ExperimentPreset::Dam => BACKGROUND + if (0.0..=0.5).contains(&x) { 1.0 } else { 0.0 },
            ExperimentPreset::Injection => BACKGROUND,
        }
    }

    /// Initial mean particle velocity of every species.
    pub fn particle_velocity(self, x: f64, y: f64) -> [f64; 2] {
        use std::f64::consts::PI;
        match self {
            ExperimentPreset::Accuracy => {
                let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
                [sx * sx * (2.0 * PI * y).sin(), -sy * sy * (2.0 * PI * x).sin()]
            }
            ExperimentPreset::Volcano => {
                let env = (-20.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp();
                [-(2.0 * PI * (y - 0.5)).sin() * env, (2.0 * PI * (x - 0.5)).sin() * env]
            }
            ExperimentPreset::Dam | ExperimentPreset::Injection => [0.0, 0.0],
        }
    }

    /// Initial fluid velocity.
    pub fn fluid_velocity(self, x: f64, y: f64) -> [f64; 2] {
        match self {
            ExperimentPreset::Accuracy => self.particle_velocity(x, y),
            _ => [0.0, 0.0],
        }
    }

    /// Scheme parameters of the preset with `species` species, coupling
    /// `kappa`, Reynolds number `re` and Stokes number `eps0` laid out by
    /// `profile`.
    pub fn params(self, spec: &GridSpec, species: usize, kappa: f64, re: f64, eps0: f64, profile: EpsProfile) -> SchemeParams {
        let mut p = SchemeParams::new(spec, species, kappa, re, eps0);
        if profile == EpsProfile::Ex30 {
            p.eps = epsilon_profile(spec, eps0);
        }
        p.phi = gravity_potential(spec, self.gravity());
        p.boundary = self.boundary();
        p
    }

    /// Parameters with the reference defaults (`kappa = 2`, two species).
    pub fn default_params(self, spec: &GridSpec) -> SchemeParams {
        self.params(spec, 2, 2.0, self.default_re(), self.default_eps(), self.default_eps_profile())
    }
}

impl fmt::Display for ExperimentPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidPreset(s.to_string()))
    }
}

/// `f_i(0) = n(0) M_{u_p(0), i}` at cell centers, `u(0)` from the preset and
/// `p(0) = 0`.
pub fn build_initial_state(preset: ExperimentPreset, spec: GridSpec, params: &SchemeParams) -> Result<SimState> {
    let grid = build_grid(spec)?;
    params.validate(&spec)?;
    let n = ScalarField::from_fn(&spec, |x, y| preset.density(x, y));
    let up = VectorField::from_fn(&spec, |x, y| preset.particle_velocity(x, y));
    let u = VectorField::from_fn(&spec, |x, y| preset.fluid_velocity(x, y));
    let f = (1..=params.species)
        .map(|i| maxwellian_distribution(spec, &grid.v, &n, &up, i))
        .collect();
    SimState::new(spec, f, u, ScalarField::zeros(spec.nx), params.boundary)
}

//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment. `preset` selects the defaults
//! that the remaining keys override. Unknown or repeated keys are errors.
//! Optional values accept `auto`.
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `preset` | accuracy, volcano, dam, injection | required |
//! | `nx`, `nv` | integer | 128, 32 |
//! | `v_max` | float | 8 |
//! | `species` | integer | 2 |
//! | `kappa` | float | 2 |
//! | `re` | float | per preset |
//! | `eps` | float | per preset |
//! | `eps_profile` | constant, ex30 | per preset |
//! | `order` | 1, 2 | 2 |
//! | `dt` | float or auto | `dx / (5 v_max)` |
//! | `steps` | integer or auto | 500 for volcano, else from `tmax` |
//! | `tmax` | float | per preset |
//! | `snapshot_every` | integer, 0 = initial state only | 0 |
//! | `alpha` | standard or `fixed:<value>` | standard |
//! | `fp_tol`, `fluid_tol`, `div_tol` | float | 1e-10 |
//! | `fp_max_iter`, `fluid_max_iter` | integer or auto | auto |
//! | `fp_jacobi`, `fp_clip_negative` | bool | true, false |
//! | `limit_flux` | kinetic, upwind | kinetic |
//! | `version` | string, ignored | |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{AlphaPolicy, GridSpec, Order, SchemeParams};
use crate::limit::LimitFlux;
use crate::presets::{EpsProfile, ExperimentPreset};

pub const KEYS: [&str; 24] = [
    "preset",
    "nx",
    "nv",
    "v_max",
    "species",
    "kappa",
    "re",
    "eps",
    "eps_profile",
    "order",
    "dt",
    "steps",
    "tmax",
    "snapshot_every",
    "alpha",
    "fp_tol",
    "fp_max_iter",
    "fp_jacobi",
    "fp_clip_negative",
    "fluid_tol",
    "fluid_max_iter",
    "div_tol",
    "limit_flux",
    "version",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: ExperimentPreset,
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    pub species: usize,
    pub kappa: f64,
    pub re: f64,
    pub eps: f64,
    pub eps_profile: EpsProfile,
    pub order: Order,
    /// `None` is the CFL time step.
    pub dt: Option<f64>,
    /// `None` runs to `tmax`.
    pub steps: Option<usize>,
    pub tmax: f64,
    pub snapshot_every: usize,
    pub alpha: AlphaPolicy,
    pub fp_tol: f64,
    pub fp_max_iter: Option<usize>,
    pub fp_jacobi: bool,
    pub fp_clip_negative: bool,
    pub fluid_tol: f64,
    pub fluid_max_iter: Option<usize>,
    pub div_tol: f64,
    pub limit_flux: LimitFlux,
}

impl RunConfig {
    /// Defaults of a preset at `nx = 128`, `nv = 32`.
    pub fn for_preset(preset: ExperimentPreset) -> Self {
        let (nx, nv, v_max) = (128, 32, 8.0);
        let spec = GridSpec { nx, nv, v_max };
        RunConfig {
            preset,
            nx,
            nv,
            v_max,
            species: 2,
            kappa: 2.0,
            re: preset.default_re(),
            eps: preset.default_eps(),
            eps_profile: preset.default_eps_profile(),
            order: Order::Second,
            dt: None,
            steps: (preset == ExperimentPreset::Volcano).then_some(500),
            tmax: preset.default_tmax(&spec),
            snapshot_every: 0,
            alpha: AlphaPolicy::Standard,
            fp_tol: 1e-10,
            fp_max_iter: None,
            fp_jacobi: true,
            fp_clip_negative: false,
            fluid_tol: 1e-10,
            fluid_max_iter: None,
            div_tol: 1e-10,
            limit_flux: LimitFlux::Kinetic,
        }
    }

    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.nx, self.nv, self.v_max)
    }

    /// Grid and validated scheme parameters.
    pub fn build(&self) -> Result<(GridSpec, SchemeParams)> {
        let spec = self.spec()?;
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParams(format!("eps = {} must be positive", self.eps)));
        }
        let mut params = self.preset.params(&spec, self.species, self.kappa, self.re, self.eps, self.eps_profile);
        if let Some(dt) = self.dt {
            params.dt = dt;
        }
        params.alpha = self.alpha;
        params.fp.tol = self.fp_tol;
        params.fp.max_iter = self.fp_max_iter;
        params.fp.jacobi = self.fp_jacobi;
        params.fp.clip_negative = self.fp_clip_negative;
        params.fluid.tol = self.fluid_tol;
        params.fluid.max_iter = self.fluid_max_iter;
        params.fluid.div_tol = self.div_tol;
        params.validate(&spec)?;
        params.check_cfl(&spec)?;
        Ok((spec, params))
    }

    /// `steps`, or the number of steps of size `dt` that reach `tmax`.
    pub fn num_steps(&self, dt: f64) -> usize {
        match self.steps {
            Some(s) => s,
            None => ((self.tmax / dt) * (1.0 - 1e-12)).ceil().max(0.0) as usize,
        }
    }

    /// Parses a configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected key = value, got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("unknown key '{key}'"),
                });
            }
            if entries.insert(key, (line_no, value)).is_some() {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("repeated key '{key}'"),
                });
            }
        }
        let (line, preset) = entries.remove("preset").ok_or(Error::Config {
            line: 0,
            message: "missing key 'preset'".into(),
        })?;
        let preset: ExperimentPreset = preset.parse().map_err(|e: Error| Error::Config { line, message: e.to_string() })?;
        let mut cfg = RunConfig::for_preset(preset);
        for (key, (line, value)) in entries {
            cfg.set(key, value).map_err(|message| Error::Config { line, message })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "preset" => self.preset = value.parse().map_err(|e: Error| e.to_string())?,
            "nx" => self.nx = parse(key, value)?,
            "nv" => self.nv = parse(key, value)?,
            "v_max" => self.v_max = parse(key, value)?,
            "species" => self.species = parse(key, value)?,
            "kappa" => self.kappa = parse(key, value)?,
            "re" => self.re = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "eps_profile" => self.eps_profile = value.parse().map_err(|e: Error| e.to_string())?,
            "order" => self.order = Order::from_u8(parse(key, value)?).map_err(|e| e.to_string())?,
            "dt" => self.dt = parse_auto(key, value)?,
            "steps" => self.steps = parse_auto(key, value)?,
            "tmax" => self.tmax = parse(key, value)?,
            "snapshot_every" => self.snapshot_every = parse(key, value)?,
            "alpha" => self.alpha = parse_alpha(value)?,
            "fp_tol" => self.fp_tol = parse(key, value)?,
            "fp_max_iter" => self.fp_max_iter = parse_auto(key, value)?,
            "fp_jacobi" => self.fp_jacobi = parse(key, value)?,
            "fp_clip_negative" => self.fp_clip_negative = parse(key, value)?,
            "fluid_tol" => self.fluid_tol = parse(key, value)?,
            "fluid_max_iter" => self.fluid_max_iter = parse_auto(key, value)?,
            "div_tol" => self.div_tol = parse(key, value)?,
            "limit_flux" => self.limit_flux = value.parse().map_err(|e: Error| e.to_string())?,
            "version" => {}
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Text form readable by [`RunConfig::parse`]; floats are written in
    /// their shortest exact decimal form.
    pub fn to_text(&self) -> String {
        let auto = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("preset", self.preset.name().into());
        kv("nx", self.nx.to_string());
        kv("nv", self.nv.to_string());
        kv("v_max", self.v_max.to_string());
        kv("species", self.species.to_string());
        kv("kappa", self.kappa.to_string());
        kv("re", self.re.to_string());
        kv("eps", self.eps.to_string());
        kv("eps_profile", self.eps_profile.name().into());
        kv("order", self.order.as_u8().to_string());
        kv("dt", auto(self.dt.map(|v| v.to_string())));
        kv("steps", auto(self.steps.map(|v| v.to_string())));
        kv("tmax", self.tmax.to_string());
        kv("snapshot_every", self.snapshot_every.to_string());
        kv("alpha", alpha_text(self.alpha));
        kv("fp_tol", self.fp_tol.to_string());
        kv("fp_max_iter", auto(self.fp_max_iter.map(|v| v.to_string())));
        kv("fp_jacobi", self.fp_jacobi.to_string());
        kv("fp_clip_negative", self.fp_clip_negative.to_string());
        kv("fluid_tol", self.fluid_tol.to_string());
        kv("fluid_max_iter", auto(self.fluid_max_iter.map(|v| v.to_string())));
        kv("div_tol", self.div_tol.to_string());
        kv("limit_flux", self.limit_flux.name().into());
        s
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid value '{value}' for '{key}'"))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> std::result::Result<Option<T>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_alpha(value: &str) -> std::result::Result<AlphaPolicy, String> {
    if value == "standard" {
        return Ok(AlphaPolicy::Standard);
    }
    match value.strip_prefix("fixed:") {
        Some(v) => v.parse().map(AlphaPolicy::Fixed).map_err(|_| format!("invalid alpha '{value}'")),
        None => Err(format!("invalid alpha '{value}' (expected standard or fixed:<value>)")),
    }
}

fn alpha_text(a: AlphaPolicy) -> String {
    match a {
        AlphaPolicy::Standard => "standard".into(),
        AlphaPolicy::Fixed(v) => format!("fixed:{v}"),
    }
}

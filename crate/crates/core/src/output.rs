//! Run artifacts: `metadata.txt`, `diagnostics.csv` and
//! `snapshots/step_K_field.txt`.
//!
//! Snapshot files start with `# key = value` header lines (`nx`, `dx`,
//! `step`, `time`, `columns`) followed by one whitespace-separated row per
//! cell, `x` index outer and `y` index inner.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, SchemeParams, VectorField};
use crate::integrator::SimState;

/// Version string written to run metadata.
pub const VERSION: &str = concat!("apmix ", env!("CARGO_PKG_VERSION"));

/// Scalar diagnostics of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub time: f64,
    /// `sum n_i dx^2` per species.
    pub mass: Vec<f64>,
    /// `||f_i - n_i M_{u,i}||_1` per species.
    pub maxwellian: Vec<f64>,
    pub functional: f64,
    pub viscous: f64,
    pub fp_dissipation: f64,
    /// Max pointwise divergence of `u`.
    pub divergence: f64,
    pub max_u: f64,
    pub helmholtz_iterations: usize,
    pub pressure_iterations: usize,
    pub fp_max_iterations: usize,
    pub fp_total_iterations: usize,
}

pub fn csv_header(species: usize) -> String {
    let mut h = vec!["step".to_string(), "time".to_string()];
    h.extend((1..=species).map(|i| format!("mass_{i}")));
    h.extend((1..=species).map(|i| format!("maxwellian_distance_{i}")));
    for k in [
        "energy_functional",
        "viscous_dissipation",
        "fp_dissipation",
        "divergence",
        "max_u",
        "helmholtz_iterations",
        "pressure_iterations",
        "fp_max_iterations",
        "fp_total_iterations",
    ] {
        h.push(k.to_string());
    }
    h.join(",")
}

/// 17 significant digits, which reads back to the same double.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_row(row: &DiagnosticsRow) -> String {
    let mut cols = vec![row.step.to_string(), real(row.time)];
    cols.extend(row.mass.iter().map(|&v| real(v)));
    cols.extend(row.maxwellian.iter().map(|&v| real(v)));
    for v in [row.functional, row.viscous, row.fp_dissipation, row.divergence, row.max_u] {
        cols.push(real(v));
    }
    for v in [
        row.helmholtz_iterations,
        row.pressure_iterations,
        row.fp_max_iterations,
        row.fp_total_iterations,
    ] {
        cols.push(v.to_string());
    }
    cols.join(",")
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let species = rows.first().map_or(0, |r| r.mass.len());
    let mut s = csv_header(species);
    s.push('\n');
    for r in rows {
        s.push_str(&format_row(r));
        s.push('\n');
    }
    s
}

/// Parses the text written by [`diagnostics_csv`].
pub fn parse_diagnostics(text: &str) -> Result<Vec<DiagnosticsRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty diagnostics file".into()))?;
    let ncol = header.split(',').count();
    if ncol < 11 || (ncol - 11) % 2 != 0 {
        return Err(Error::Parse(format!("unexpected diagnostics header '{header}'")));
    }
    let species = (ncol - 11) / 2;
    if header != csv_header(species) {
        return Err(Error::Parse(format!("unexpected diagnostics header '{header}'")));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != ncol {
            return Err(Error::Parse(format!("row {} has {} columns, expected {ncol}", k + 1, cols.len())));
        }
        let f = |i: usize| -> Result<f64> {
            cols[i]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number '{}'", k + 1, cols[i])))
        };
        let u = |i: usize| -> Result<usize> {
            cols[i]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad count '{}'", k + 1, cols[i])))
        };
        let base = 2 + 2 * species;
        rows.push(DiagnosticsRow {
            step: u(0)?,
            time: f(1)?,
            mass: (0..species).map(|s| f(2 + s)).collect::<Result<_>>()?,
            maxwellian: (0..species).map(|s| f(2 + species + s)).collect::<Result<_>>()?,
            functional: f(base)?,
            viscous: f(base + 1)?,
            fp_dissipation: f(base + 2)?,
            divergence: f(base + 3)?,
            max_u: f(base + 4)?,
            helmholtz_iterations: u(base + 5)?,
            pressure_iterations: u(base + 6)?,
            fp_max_iterations: u(base + 7)?,
            fp_total_iterations: u(base + 8)?,
        });
    }
    Ok(rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Configuration keys followed by derived quantities as comments; the file
/// reads back with [`RunConfig::parse`].
pub fn metadata_text(config: &RunConfig, params: &SchemeParams, steps: usize) -> String {
    let mut s = config.to_text();
    let _ = writeln!(s, "version = {VERSION}");
    let _ = writeln!(s, "# dx = {}", 1.0 / config.nx as f64);
    let _ = writeln!(s, "# dv = {}", 2.0 * config.v_max / config.nv as f64);
    let _ = writeln!(s, "# dt_used = {}", params.dt);
    let _ = writeln!(s, "# steps_used = {steps}");
    let _ = writeln!(s, "# limiter = van_leer");
    let _ = writeln!(s, "# alpha_first = {}", params.alpha(crate::grid::Order::First));
    let _ = writeln!(s, "# alpha_second = {}", params.alpha(crate::grid::Order::Second));
    s
}

/// Stream function with `u_x = d psi / dy`, `psi = 0` on the bottom wall,
/// by midpoint integration along `y`.
pub fn streamfunction(u: &VectorField) -> ScalarField {
    let n = u.nx();
    let dx = 1.0 / n as f64;
    let mut psi = ScalarField::zeros(n);
    for a in 1..=n {
        let mut acc = 0.0;
        for b in 1..=n {
            let ux = u.comp[0].at(a, b);
            psi.set(a, b, acc + 0.5 * dx * ux);
            acc += dx * ux;
        }
    }
    psi
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join("snapshots").join(format!("step_{step}_field.txt"))
}

/// Named cell fields of one snapshot.
pub struct SnapshotFields<'a> {
    pub step: usize,
    pub time: f64,
    pub columns: Vec<(String, &'a ScalarField)>,
}

pub fn snapshot_text(fields: &SnapshotFields) -> Result<String> {
    let nx = fields.columns.first().map_or(0, |c| c.1.nx);
    if fields.columns.iter().any(|c| c.1.nx != nx) {
        return Err(Error::GridMismatch("snapshot columns differ in size".into()));
    }
    let dx = 1.0 / nx as f64;
    let mut s = String::new();
    let _ = writeln!(s, "# nx = {nx}");
    let _ = writeln!(s, "# dx = {}", real(dx));
    let _ = writeln!(s, "# step = {}", fields.step);
    let _ = writeln!(s, "# time = {}", real(fields.time));
    let names: Vec<&str> = fields.columns.iter().map(|c| c.0.as_str()).collect();
    let _ = writeln!(s, "# columns = x y {}", names.join(" "));
    for a in 1..=nx {
        for b in 1..=nx {
            let _ = write!(s, "{} {}", real((a as f64 - 0.5) * dx), real((b as f64 - 0.5) * dx));
            for c in &fields.columns {
                let _ = write!(s, " {}", real(c.1.at(a, b)));
            }
            s.push('\n');
        }
    }
    Ok(s)
}

/// Writes `n_i`, `u`, `p`, `nu`, the stream function and `eps` of a state.
pub fn write_state_snapshot(dir: &Path, state: &SimState, params: &SchemeParams) -> Result<PathBuf> {
    let nu = {
        let mut nu = ScalarField::zeros(state.spec.nx);
        for (s, m) in state.moments.iter().enumerate() {
            for (o, v) in nu.data.iter_mut().zip(&m.n.data) {
                *o += (s + 1) as f64 * v;
            }
        }
        nu
    };
    let psi = streamfunction(&state.u);
    let mut columns: Vec<(String, &ScalarField)> = state
        .moments
        .iter()
        .enumerate()
        .map(|(s, m)| (format!("n_{}", s + 1), &m.n))
        .collect();
    columns.push(("u_x".into(), &state.u.comp[0]));
    columns.push(("u_y".into(), &state.u.comp[1]));
    columns.push(("p".into(), &state.p));
    columns.push(("nu".into(), &nu));
    columns.push(("psi".into(), &psi));
    columns.push(("eps".into(), &params.eps));
    let text = snapshot_text(&SnapshotFields {
        step: state.step,
        time: state.time,
        columns,
    })?;
    let path = snapshot_path(dir, state.step);
    write_text(&path, &text)?;
    Ok(path)
}

/// Parsed snapshot: header values and one column vector per field.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub step: usize,
    pub time: f64,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.values[k].as_slice())
    }
}

pub fn parse_snapshot(text: &str) -> Result<Snapshot> {
    let mut nx = None;
    let mut step = None;
    let mut time = None;
    let mut names: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix('#') {
            let (k, v) = h.split_once('=').ok_or_else(|| Error::Parse(format!("bad header '{line}'")))?;
            let v = v.trim();
            match k.trim() {
                "nx" => nx = v.parse().ok(),
                "step" => step = v.parse().ok(),
                "time" => time = v.parse().ok(),
                "columns" => {
                    names = v.split_whitespace().map(String::from).collect();
                    values = vec![Vec::new(); names.len()];
                }
                _ => {}
            }
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad value '{t}'"))))
            .collect::<Result<_>>()?;
        if row.len() != names.len() {
            return Err(Error::Parse(format!("row has {} values, expected {}", row.len(), names.len())));
        }
        for (col, v) in values.iter_mut().zip(row) {
            col.push(v);
        }
    }
    let missing = |k: &str| Error::Parse(format!("snapshot header lacks '{k}'"));
    Ok(Snapshot {
        nx: nx.ok_or_else(|| missing("nx"))?,
        step: step.ok_or_else(|| missing("step"))?,
        time: time.ok_or_else(|| missing("time"))?,
        names,
        values,
    })
}

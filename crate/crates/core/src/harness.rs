//! Drivers behind the CLI: single runs, the grid convergence study, twin
//! runs across Stokes numbers and limit-system runs.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::diagnostics::{
    convergence_order, energy_entropy, maxwellian_distances, phase_difference, phase_norm, vector_difference, vector_norm, Norm,
    RelativeError,
};
use crate::error::{Error, Result};
use crate::fluid::divergence_noslip;
use crate::grid::{SchemeParams, ScalarField};
use crate::integrator::{step, SimState, StepReport};
use crate::limit::{limit_step, LimitState};
use crate::output::{
    diagnostics_csv, metadata_text, snapshot_path, snapshot_text, streamfunction, write_state_snapshot, write_text, DiagnosticsRow,
    SnapshotFields,
};
use crate::presets::build_initial_state;

/// Scalar diagnostics of `state`; iteration counts come from the step that
/// produced it.
pub fn diagnostics_row(state: &SimState, params: &SchemeParams, report: Option<&StepReport>) -> DiagnosticsRow {
    let ee = energy_entropy(state, params);
    let divergence = match report {
        Some(r) => r.divergence,
        None => divergence_noslip(&state.u, state.spec.dx()).max_abs(),
    };
    let r = report.cloned().unwrap_or_default();
    DiagnosticsRow {
        step: state.step,
        time: state.time,
        mass: state.masses(),
        maxwellian: maxwellian_distances(state),
        functional: ee.functional,
        viscous: ee.viscous,
        fp_dissipation: ee.fp_dissipation,
        divergence,
        max_u: state.u.max_norm(),
        helmholtz_iterations: r.helmholtz_iterations,
        pressure_iterations: r.pressure_iterations,
        fp_max_iterations: r.fp_max_iterations,
        fp_total_iterations: r.fp_total_iterations,
    }
}

pub struct RunOutput {
    pub rows: Vec<DiagnosticsRow>,
    pub state: SimState,
}

/// Runs a configuration. With `out`, writes `metadata.txt`, the initial
/// snapshot, snapshots every `snapshot_every` steps and `diagnostics.csv`.
pub fn run(config: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    let (spec, params) = config.build()?;
    let steps = config.num_steps(params.dt);
    let mut state = build_initial_state(config.preset, spec, &params)?;
    if let Some(dir) = out {
        write_text(&dir.join("metadata.txt"), &metadata_text(config, &params, steps))?;
        write_state_snapshot(dir, &state, &params)?;
    }
    let mut rows = vec![diagnostics_row(&state, &params, None)];
    for k in 1..=steps {
        let (next, report) = step(&state, &params, config.order)?;
        state = next;
        rows.push(diagnostics_row(&state, &params, Some(&report)));
        if let Some(dir) = out {
            if config.snapshot_every > 0 && k % config.snapshot_every == 0 {
                write_state_snapshot(dir, &state, &params)?;
            }
        }
    }
    if let Some(dir) = out {
        write_text(&dir.join("diagnostics.csv"), &diagnostics_csv(&rows))?;
    }
    Ok(RunOutput { rows, state })
}

/// Errors of one grid pair: `max_t ||restrict(fine) - coarse||` normalised by
/// `||f_coarse(0)||` for distributions and `||u_coarse(t_max)||` for `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairErrors {
    pub nx_coarse: usize,
    pub nx_fine: usize,
    pub f_l1: Vec<f64>,
    pub f_l2: Vec<f64>,
    pub u_l2: f64,
}

/// Runs the `nx` and `2 nx` grids of `base` in lockstep with the CFL time
/// steps and compares them at every coarse time level.
pub fn pair_errors(base: &RunConfig, nx: usize, eps: f64) -> Result<PairErrors> {
    let mut cc = base.clone();
    cc.nx = nx;
    cc.eps = eps;
    cc.dt = None;
    let mut cf = cc.clone();
    cf.nx = 2 * nx;
    let (sc, pc) = cc.build()?;
    let (sf, pf) = cf.build()?;
    let steps = cc.num_steps(pc.dt);
    let mut coarse = build_initial_state(cc.preset, sc, &pc)?;
    let mut fine = build_initial_state(cf.preset, sf, &pf)?;
    let species = pc.species;
    let mut e1: Vec<RelativeError> = coarse.f.iter().map(|f| RelativeError { max_difference: 0.0, reference: phase_norm(f, Norm::L1) }).collect();
    let mut e2: Vec<RelativeError> = coarse.f.iter().map(|f| RelativeError { max_difference: 0.0, reference: phase_norm(f, Norm::L2) }).collect();
    let mut eu = RelativeError::default();
    for _ in 0..steps {
        coarse = step(&coarse, &pc, cc.order)?.0;
        fine = step(&fine, &pf, cf.order)?.0;
        fine = step(&fine, &pf, cf.order)?.0;
        for s in 0..species {
            e1[s].observe(phase_difference(&fine.f[s], &coarse.f[s], Norm::L1)?);
            e2[s].observe(phase_difference(&fine.f[s], &coarse.f[s], Norm::L2)?);
        }
        eu.observe(vector_difference(&fine.u, &coarse.u, Norm::L2)?);
    }
    eu.reference = vector_norm(&coarse.u, Norm::L2);
    Ok(PairErrors {
        nx_coarse: nx,
        nx_fine: 2 * nx,
        f_l1: e1.iter().map(RelativeError::value).collect(),
        f_l2: e2.iter().map(RelativeError::value).collect(),
        u_l2: eu.value(),
    })
}

/// One order estimate from the errors at `nx_mid` (pair `nx_mid/2, nx_mid`)
/// and `nx_fine` (pair `nx_mid, nx_fine`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub field: String,
    pub norm: Norm,
    pub nx_mid: usize,
    pub nx_fine: usize,
    pub error_mid: f64,
    pub error_fine: f64,
    pub order: f64,
}

/// Grid study over `nx_list` (successive doublings) for every Stokes number.
pub fn convergence_study(base: &RunConfig, nx_list: &[usize], eps_list: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if nx_list.len() < 3 || nx_list.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidParams(format!(
            "nx list {nx_list:?} must hold at least three successive doublings"
        )));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let pairs: Vec<PairErrors> = nx_list[..nx_list.len() - 1]
            .iter()
            .map(|&nx| pair_errors(base, nx, eps))
            .collect::<Result<_>>()?;
        for w in pairs.windows(2) {
            let (m, f) = (&w[0], &w[1]);
            let mut push = |field: String, norm: Norm, em: f64, ef: f64| {
                rows.push(ConvergenceRow {
                    eps,
                    field,
                    norm,
                    nx_mid: m.nx_fine,
                    nx_fine: f.nx_fine,
                    error_mid: em,
                    error_fine: ef,
                    order: convergence_order(em, ef),
                });
            };
            for s in 0..m.f_l1.len() {
                push(format!("f_{}", s + 1), Norm::L1, m.f_l1[s], f.f_l1[s]);
                push(format!("f_{}", s + 1), Norm::L2, m.f_l2[s], f.f_l2[s]);
            }
            push("u".into(), Norm::L2, m.u_l2, f.u_l2);
        }
    }
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("eps,field,norm,nx_mid,nx_fine,error_mid,error_fine,order\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.16e},{},{},{},{},{:.16e},{:.16e},{:.16e}",
            r.eps,
            r.field,
            r.norm.name(),
            r.nx_mid,
            r.nx_fine,
            r.error_mid,
            r.error_fine,
            r.order
        );
    }
    s
}

/// Maxwellian distances of one twin run at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ApSeries {
    pub eps: f64,
    pub time: Vec<f64>,
    /// `distance[k][s]` at step `k` for species `s + 1`.
    pub distance: Vec<Vec<f64>>,
}

/// Runs `base` for every Stokes number and records the Maxwellian distances.
pub fn ap_test(base: &RunConfig, eps_list: &[f64]) -> Result<Vec<ApSeries>> {
    eps_list
        .iter()
        .map(|&eps| {
            let mut cfg = base.clone();
            cfg.eps = eps;
            let (spec, params) = cfg.build()?;
            let steps = cfg.num_steps(params.dt);
            let mut state = build_initial_state(cfg.preset, spec, &params)?;
            let mut series = ApSeries {
                eps,
                time: vec![0.0],
                distance: vec![maxwellian_distances(&state)],
            };
            for _ in 0..steps {
                state = step(&state, &params, cfg.order)?.0;
                series.time.push(state.time);
                series.distance.push(maxwellian_distances(&state));
            }
            Ok(series)
        })
        .collect()
}

pub fn ap_csv(series: &[ApSeries]) -> String {
    let species = series.first().and_then(|s| s.distance.first()).map_or(0, Vec::len);
    let mut s = String::from("eps,step,time");
    for i in 1..=species {
        let _ = write!(s, ",maxwellian_distance_{i}");
    }
    s.push('\n');
    for ser in series {
        for (k, (t, d)) in ser.time.iter().zip(&ser.distance).enumerate() {
            let _ = write!(s, "{:.16e},{k},{:.16e}", ser.eps, t);
            for v in d {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub divergence: f64,
    pub max_u: f64,
    pub helmholtz_iterations: usize,
    pub pressure_iterations: usize,
}

/// Runs the limit system from the preset's densities and velocity.
pub fn limit_run(config: &RunConfig, out: Option<&Path>) -> Result<(Vec<LimitRow>, LimitState)> {
    let (spec, params) = config.build()?;
    let steps = config.num_steps(params.dt);
    let mut state = LimitState::from_preset(config.preset, spec, config.species)?;
    let write = |dir: &Path, st: &LimitState| -> Result<()> {
        let nu = st.nu();
        let psi = streamfunction(&st.u);
        let mut columns: Vec<(String, &ScalarField)> = st.n.iter().enumerate().map(|(s, n)| (format!("n_{}", s + 1), n)).collect();
        columns.push(("u_x".into(), &st.u.comp[0]));
        columns.push(("u_y".into(), &st.u.comp[1]));
        columns.push(("p".into(), &st.p));
        columns.push(("nu".into(), &nu));
        columns.push(("psi".into(), &psi));
        let text = snapshot_text(&SnapshotFields {
            step: st.step,
            time: st.time,
            columns,
        })?;
        write_text(&snapshot_path(dir, st.step), &text)
    };
    if let Some(dir) = out {
        write_text(&dir.join("metadata.txt"), &metadata_text(config, &params, steps))?;
        write(dir, &state)?;
    }
    let mut rows = vec![LimitRow {
        step: 0,
        time: 0.0,
        mass: state.mass(),
        divergence: divergence_noslip(&state.u, spec.dx()).max_abs(),
        max_u: state.u.max_norm(),
        helmholtz_iterations: 0,
        pressure_iterations: 0,
    }];
    for k in 1..=steps {
        let (next, r) = limit_step(&state, &params, config.order, config.limit_flux)?;
        state = next;
        rows.push(LimitRow {
            step: state.step,
            time: state.time,
            mass: state.mass(),
            divergence: r.divergence,
            max_u: state.u.max_norm(),
            helmholtz_iterations: r.helmholtz_iterations,
            pressure_iterations: r.pressure_iterations,
        });
        if let Some(dir) = out {
            if config.snapshot_every > 0 && k % config.snapshot_every == 0 {
                write(dir, &state)?;
            }
        }
    }
    if let Some(dir) = out {
        let mut s = String::from("step,time,mass,divergence,max_u,helmholtz_iterations,pressure_iterations\n");
        for r in &rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.step, r.time, r.mass, r.divergence, r.max_u, r.helmholtz_iterations, r.pressure_iterations
            );
        }
        write_text(&dir.join("diagnostics.csv"), &s)?;
    }
    Ok((rows, state))
}

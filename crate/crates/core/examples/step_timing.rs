//! Wall-clock cost of BDF2 steps on a preset.
//!
//! `cargo run --release --example step_timing -- volcano 64 16 1e-5 20`

use apmix::grid::{GridSpec, Order};
use apmix::integrator::step;
use apmix::presets::{build_initial_state, ExperimentPreset};

fn main() -> apmix::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let preset: ExperimentPreset = args.first().map_or("volcano", String::as_str).parse()?;
    let nx = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let nv = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(16);
    let eps = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-5);
    let steps = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(20);
    let spec = GridSpec::new(nx, nv, 8.0)?;
    let mut params = preset.default_params(&spec);
    params.eps = apmix::grid::ScalarField::constant(nx, eps);
    params.eps.fill_ghost_linear();
    let mut state = build_initial_state(preset, spec, &params)?;
    let m0 = state.masses();
    let start = std::time::Instant::now();
    for _ in 0..steps {
        let (next, r) = step(&state, &params, Order::Second)?;
        println!(
            "step {:4} div {:.2e} gap {:.2e} helm {:3} pres {:4} fp {:3} umax {:.3e} minf {:.2e}",
            next.step, r.divergence, r.density_gap, r.helmholtz_iterations, r.pressure_iterations, r.fp_max_iterations, next.u.max_norm(), r.min_f
        );
        state = next;
    }
    let el = start.elapsed().as_secs_f64();
    let drift: Vec<f64> = state.masses().iter().zip(&m0).map(|(a, b)| (a - b) / b).collect();
    println!("{steps} steps in {el:.2}s ({:.3}s/step), mass drift {drift:?}", el / steps as f64);
    Ok(())
}

//! Full solver against the limit solver on the dam data.
//!
//! `cargo run --release --example ap_twin -- 32 16 1e-6 10`

use apmix::grid::{GridSpec, Order, ScalarField};
use apmix::integrator::step;
use apmix::limit::{limit_step, LimitFlux, LimitState};
use apmix::presets::{build_initial_state, ExperimentPreset};

fn main() -> apmix::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nx = args.first().and_then(|s| s.parse().ok()).unwrap_or(32);
    let nv = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let kind: LimitFlux = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(LimitFlux::Kinetic);
    let eps = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-6);
    let steps = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
    let spec = GridSpec::new(nx, nv, 8.0)?;
    let preset = ExperimentPreset::Dam;
    let mut params = preset.default_params(&spec);
    params.eps = ScalarField::constant(nx, eps);
    params.eps.fill_ghost_linear();
    for order in [Order::First, Order::Second] {
        let mut full = build_initial_state(preset, spec, &params)?;
        let mut lim = LimitState::from_sim_state(&full)?;
        for _ in 0..steps {
            full = step(&full, &params, order)?.0;
            lim = limit_step(&lim, &params, order, kind)?.0;
            let (mut num, mut den) = (0.0, 0.0);
            for c in 0..2 {
                for (a, b) in full.u.comp[c].interior().iter().zip(lim.u.comp[c].interior()) {
                    num += (a - b) * (a - b);
                    den += b * b;
                }
            }
            let nu_full = LimitState::from_sim_state(&full)?.nu();
            let nu_lim = lim.nu();
            let (mut dn, mut nn) = (0.0, 0.0);
            for (a, b) in nu_full.interior().iter().zip(nu_lim.interior()) {
                dn += (a - b) * (a - b);
                nn += b * b;
            }
            println!(
                "{order:?} step {} rel {:.4e} nu {:.3e} |u| {:.3e} {:.3e}",
                full.step,
                (num / den).sqrt(),
                (dn / nn).sqrt(),
                full.u.max_norm(),
                lim.u.max_norm()
            );
        }
    }
    Ok(())
}

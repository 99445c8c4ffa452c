"""Smoke test for the apmix_py extension.

Build and run from the repository root:

    cargo build -p apmix-py --release --features extension-module
    cp target/release/libapmix_py.so python/apmix_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import apmix_py as ap


def main():
    assert set(ap.presets()) == {"accuracy", "volcano", "dam", "injection"}
    assert abs(ap.convergence_order(4.0, 1.0) - 2.0) < 1e-15

    cfg = ap.RunConfig("volcano")
    cfg.set("nx", "16")
    cfg.set("nv", "8")
    cfg.set("steps", "3")
    cfg.set("eps", "1e-3")
    again = ap.RunConfig.parse(cfg.to_text())
    assert again.to_text() == cfg.to_text()
    dt, steps = cfg.resolved()
    assert steps == 3 and math.isclose(dt, ap.cfl_timestep(16, 8, cfg_vmax(cfg)))

    sim = ap.Simulation(cfg)
    m0 = sim.masses()
    report = sim.step(3)
    m1 = sim.masses()
    assert sim.steps_taken == 3
    assert all(abs(a - b) <= 1e-12 * a for a, b in zip(m0, m1)), (m0, m1)
    assert report["divergence"] < 1e-8, report
    assert report["min_f"] >= 0.0
    functional, viscous, fp = sim.energy_entropy()
    assert viscous >= 0.0 and fp >= 0.0
    ux, uy = sim.velocity()
    assert len(ux) == 16 and len(ux[0]) == 16
    assert len(sim.density(1)) == 16

    lim = ap.LimitSimulation(cfg)
    mass = lim.mass()
    lim.step(3)
    assert abs(lim.mass() - mass) <= 1e-12 * mass

    with tempfile.TemporaryDirectory() as out:
        csv = ap.run(cfg, out)
        assert csv.splitlines()[0].startswith("step,time")
        assert len(csv.strip().splitlines()) == 5
        assert os.path.exists(os.path.join(out, "diagnostics.csv"))

    try:
        cfg.set("nx", "banana")
    except ap.ApmixError:
        pass
    else:
        raise AssertionError("bad value accepted")

    print(f"apmix_py {ap.__version__}: smoke test passed "
          f"(functional={functional:.6e}, max|u_x|={max(abs(v) for r in ux for v in r):.3e})")


def cfg_vmax(cfg):
    for line in cfg.to_text().splitlines():
        key, _, value = line.partition("=")
        if key.strip() == "v_max":
            return float(value)
    raise KeyError("v_max")


if __name__ == "__main__":
    main()

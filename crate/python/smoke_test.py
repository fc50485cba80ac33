"""Smoke test for the `splitfem` extension module.

Build and place the module next to this script first:

    cargo build --release -p splitfem-py
    cp ../target/release/libsplitfem.so splitfem.so
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import splitfem


def rel_change(series, key):
    first = series[0][key]
    return max(abs(r[key] - first) for r in series) / abs(first)


def main():
    m = splitfem.Model(65, closure="gp1-gp0")
    assert m.n == 65 and m.closure == "gp1-gp0"
    u, v, h = m.initial_state("tc1")
    assert len(h) == 65 and min(h) > 0.0

    du, dv, dh = m.rhs(u, v, h)
    assert max(map(abs, du + dv + dh)) < 0.5

    d = m.diagnostics(u, v, h)
    assert abs(d["total_pv"] - 10.0) < 1e-12, d

    out = m.run(u, v, h, t_end=0.2, sample_every=50)
    for key in ("mass_e", "mass_n", "total_pv"):
        assert rel_change(out["diagnostics"], key) < 1e-12, key

    k, omega = splitfem.dispersion_curve("avg-avg", 32)
    dx = 1.0 / 32
    for ki, wi in zip(k, omega):
        assert abs(wi - splitfem.dispersion_avg_analytic(ki, 1.0, 1.0, dx)) < 1e-10 / dx

    try:
        splitfem.Model(64, closure="gp0-gp0")
    except ValueError:
        pass
    else:
        raise AssertionError("even n with a GP0 closure must be rejected")

    print(f"ok: {out['steps']} steps, dt = {out['dt']:.3e}, omega(pi/2dx) = {omega[8]:.6f}")


if __name__ == "__main__":
    main()

"""Time the numba and numpy propagators on one default pump cycle.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""

import argparse
import time

import numpy as np

from sluicepump import _accel, _kernels
from sluicepump.circuit import EnvCircuitParams
from sluicepump.master import CouplingSpec, CycleContext, IntegratorConfig
from sluicepump.sluice import PumpSchedule, SluiceParams


def best_of(func, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = func()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=65536)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--frame", default="adiabatic", choices=("adiabatic", "superadiabatic"))
    args = ap.parse_args()

    p = SluiceParams.defaults()
    cs = CouplingSpec.flux(EnvCircuitParams(phi_ctrl=0.3), p.phi0)
    ctx = CycleContext(p, PumpSchedule.default(p), cs,
                       IntegratorConfig(steps_per_cycle=args.steps, frame=args.frame))
    t_setup, (M, c, dt, pre, post) = best_of(lambda: ctx.stage_arrays(slice(None)), 1)
    X0 = np.array([[1.0, 0.0, 0.0], [0.5, 0.1, 0.0], [0.0, 0.0, 0.0], [0.2, 0.0, 0.3]])

    print(f"steps {ctx.n_steps}, states {len(X0)}, frame {args.frame}")
    print(f"generator setup (vectorized numpy): {t_setup * 1e3:8.1f} ms")
    results = {}
    if _accel.NUMBA_AVAILABLE:
        _kernels.propagate(M[:8], c[:8], dt[:8], None if pre is None else pre[:8],
                           None if post is None else post[:8], X0, use_numba=True)  # compile
        t, results["numba"] = best_of(lambda: _kernels.propagate(M, c, dt, pre, post, X0, True),
                                      args.repeat)
        print(f"numba RK4 loop:                     {t * 1e3:8.1f} ms")
    else:
        print("numba not installed; skipping")
    t, results["numpy"] = best_of(lambda: _kernels.propagate(M, c, dt, pre, post, X0, False),
                                  args.repeat)
    print(f"numpy propagators + prefix scan:    {t * 1e3:8.1f} ms")
    if len(results) == 2:
        diff = np.abs(results["numba"] - results["numpy"]).max()
        print(f"max |numba - numpy|: {diff:.2e}")


if __name__ == "__main__":
    main()

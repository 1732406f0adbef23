"""Benchmark the compiled flow kernel against the numpy fallback.

Usage: python -m imcflow.bench [--sizes 64,256,1024] [--reps 2000] [--flow]

Reports per-call RHS time for both backends, their speed ratio, the maximum
absolute disagreement of the speed fields, and (with --flow) wall time of a
short flow run on each backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ._backend import get_backend
from .ambient import AmbientParams
from .flow import FlowConfig, _AxisymKernel, run
from .sphere import build_grid
from .surface import perturbed_sphere


def _time_rhs(kernel, phi, out, reps: int) -> float:
    kernel.rhs(phi, out)  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        kernel.rhs(phi, out)
    return (time.perf_counter() - t0) / reps


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="64,256,1024")
    parser.add_argument("--reps", type=int, default=2000)
    parser.add_argument("--flow", action="store_true",
                        help="also time a short flow run per backend")
    args = parser.parse_args(argv)

    try:
        compiled = get_backend("compiled")
    except ImportError:
        compiled = None
        print("compiled kernel not built; benchmarking numpy only")
    numpy_backend = get_backend("numpy")

    ambient = AmbientParams(3, 1.0)
    print(f"{'N':>6} {'numpy us':>10} {'compiled us':>12} {'speedup':>8} "
          f"{'max |diff|':>12}")
    for N in [int(x) for x in args.sizes.split(",")]:
        grid = build_grid("axisym_1d", 3, N)
        surf = perturbed_sphere(grid, ambient, 4.0, 2, 0.1, t_end=1.0)
        out_np = np.empty(N)
        kn = _AxisymKernel(surf, numpy_backend)
        t_np = _time_rhs(kn, surf.phi, out_np, args.reps)
        if compiled is not None:
            out_cy = np.empty(N)
            kc = _AxisymKernel(surf, compiled)
            t_cy = _time_rhs(kc, surf.phi, out_cy, args.reps)
            diff = float(np.max(np.abs(out_np - out_cy)))
            print(f"{N:>6} {t_np * 1e6:>10.2f} {t_cy * 1e6:>12.2f} "
                  f"{t_np / t_cy:>8.2f} {diff:>12.3e}")
        else:
            print(f"{N:>6} {t_np * 1e6:>10.2f} {'-':>12} {'-':>8} {'-':>12}")

    if args.flow:
        grid = build_grid("axisym_1d", 3, 256)
        surf = perturbed_sphere(grid, ambient, 4.0, 2, 0.1, t_end=2.0)
        cfg = FlowConfig(t_end=2.0, snapshot_interval=0.5)
        for name, backend in (("numpy", numpy_backend), ("compiled", compiled)):
            if backend is None:
                continue
            t0 = time.perf_counter()
            trace = run(surf, cfg, backend=backend)
            dt = time.perf_counter() - t0
            print(f"flow t_end=2 N=256 on {name}: {dt:.2f} s "
                  f"({trace.meta['steps']} steps)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

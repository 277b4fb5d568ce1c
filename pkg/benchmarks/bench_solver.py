"""Compare the compiled and pure-python self-consistent kernels.

Runs the same set of voltage points through both backends, checks they
agree, and reports per-pixel timings:

    python benchmarks/bench_solver.py [--pixels N] [--grid G]
"""

import argparse
import time

import numpy as np

from qdsim import _scf_py
from qdsim.device import mean_device, total_potential
from qdsim.solver import SolverConfig, interaction_matrix

try:
    from qdsim import _scf
except ImportError:
    _scf = None


def run(kernel, b0_list, C, params, config):
    start = time.perf_counter()
    results = [
        kernel(b0, C, params.g_0, params.beta, params.mu, config.mix,
               config.ramp_iters, config.tol, config.max_iter)
        for b0 in b0_list
    ]
    return time.perf_counter() - start, results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--pixels", type=int, default=64)
    parser.add_argument("--grid", type=int, default=121)
    args = parser.parse_args()

    device = mean_device(grid_points=args.grid)
    params = device.physics
    config = SolverConfig()
    C = np.ascontiguousarray(interaction_matrix(device.grid, params))

    rng = np.random.default_rng(1)
    voltages = rng.uniform(0.0, 400.0, size=(args.pixels, 2))
    b0_list = [
        np.ascontiguousarray(total_potential(device, (v1, v2)) / 1000.0)
        for v1, v2 in voltages
    ]

    t_pure, res_pure = run(_scf_py.scf_fixed_point, b0_list, C, params, config)
    print(f"pure-python: {t_pure:.3f} s total, {t_pure / args.pixels * 1e3:.2f} ms/pixel")

    if _scf is None:
        print("compiled kernel not built; nothing to compare")
        return

    t_comp, res_comp = run(_scf.scf_fixed_point, b0_list, C, params, config)
    print(f"compiled:    {t_comp:.3f} s total, {t_comp / args.pixels * 1e3:.2f} ms/pixel")
    print(f"speedup:     {t_pure / t_comp:.1f}x")

    worst = max(
        float(np.max(np.abs(a[0] - b[0])))
        for a, b in zip(res_pure, res_comp)
    )
    print(f"max |n_pure - n_compiled| over {args.pixels} pixels: {worst:.3e}")
    assert worst < 1e-9, "backends disagree"


if __name__ == "__main__":
    main()

import numpy as np
import pytest

from qdsim import _scf_py
from qdsim.backend import BACKEND
from qdsim.device import mean_device, total_potential
from qdsim.solver import SolverConfig, interaction_matrix

compiled = pytest.importorskip("qdsim._scf", reason="compiled kernel not built")


def test_backend_selected():
    assert BACKEND in {"pure", "compiled"}


@pytest.mark.parametrize("voltages", [(0.0, 0.0), (150.0, 150.0),
                                      (320.0, 40.0), (400.0, 400.0)])
def test_kernels_agree(voltages):
    device = mean_device()
    params = device.physics
    config = SolverConfig()
    b0 = np.ascontiguousarray(total_potential(device, voltages) / 1000.0)
    C = np.ascontiguousarray(interaction_matrix(device.grid, params))
    args = (C, params.g_0, params.beta, params.mu, config.mix,
            config.ramp_iters, config.tol, config.max_iter)
    n_p, band_p, res_p, it_p, conv_p = _scf_py.scf_fixed_point(b0, *args)
    n_c, band_c, res_c, it_c, conv_c = compiled.scf_fixed_point(b0, *args)
    assert it_p == it_c
    assert conv_p and conv_c
    assert np.max(np.abs(n_p - n_c)) < 1e-13
    assert np.max(np.abs(band_p - band_c)) < 1e-13


def test_kernels_agree_without_ramp_or_mixing():
    device = mean_device()
    params = device.physics
    b0 = np.ascontiguousarray(total_potential(device, (200.0, 100.0)) / 1000.0)
    C = np.ascontiguousarray(interaction_matrix(device.grid, params))
    args = (C, params.g_0, params.beta, params.mu, 1.0, 0, 1e-10, 2000)
    n_p = _scf_py.scf_fixed_point(b0, *args)[0]
    n_c = compiled.scf_fixed_point(b0, *args)[0]
    assert np.max(np.abs(n_p - n_c)) < 1e-13

"""Self-consistent Thomas-Fermi electron density on the 1D channel.

The electron density and the band minimum obey the coupled pair

    n(x)    = (g_0 / beta) * ln(1 + exp(-beta * (eps0'(x) - mu)))
    eps0'(x) = eps_0 + U(x) + integral K(x, x') n(x') dx'

where ``U`` is the external potential-energy profile (the device module
produces it in meV; here it is converted to eV), ``K`` is the softened
Coulomb kernel, and the density expression is the closed-form Fermi
integral for a constant density of states. ``solve_self_consistent``
iterates the pair from n = 0 with linear mixing and a linear ramp of the
Coulomb strength, delegating the inner loop to the selected backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import BACKEND, scf_fixed_point
from .device import PhysicsParams

__all__ = [
    "BACKEND", "SolverConfig", "DensityProfile", "coulomb_kernel",
    "kernel_matrix", "trapezoid_weights", "fermi_density",
    "interaction_matrix", "modified_band_min", "solve_self_consistent",
]

MEV_PER_EV = 1000.0


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-point controls.

    tol        stopping tolerance on the max-abs fixed-point residual (nm^-1)
    max_iter   iteration cap; exceeding it returns converged=False
    mix        linear mixing (damping) factor in (0, 1]
    ramp_iters iterations over which the Coulomb strength rises to full
    """

    tol: float = 1e-10
    max_iter: int = 2000
    mix: float = 0.1
    ramp_iters: int = 50

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.mix <= 1:
            raise ValueError("mix must be in (0, 1]")
        if self.ramp_iters < 0 or self.max_iter < 1:
            raise ValueError("ramp_iters must be >= 0 and max_iter >= 1")


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """Converged density n(x) (nm^-1), band minimum (eV), and solve metadata."""

    n: np.ndarray
    band_min: np.ndarray
    residual: float
    iterations: int
    converged: bool


def coulomb_kernel(x, x_prime, params: PhysicsParams):
    """Softened Coulomb interaction K(x, x') in meV."""
    return params.K_0 / np.sqrt((np.asarray(x, dtype=float) - x_prime) ** 2
                                + params.sigma ** 2)


def kernel_matrix(x: np.ndarray, params: PhysicsParams) -> np.ndarray:
    """K(x_i, x_j) on the grid; symmetric by construction."""
    x = np.asarray(x, dtype=float)
    return coulomb_kernel(x[:, None], x[None, :], params)


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    """Trapezoidal quadrature weights for an arbitrary 1D grid."""
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * np.diff(x)
    w[1:] += 0.5 * np.diff(x)
    return w


def fermi_density(band_min, params: PhysicsParams):
    """Closed-form Fermi integral for a constant density of states (nm^-1).

    Equals g_0/beta * ln(1 + exp(-beta * (band_min - mu))); evaluated
    through log-sum-exp so neither tail overflows.
    """
    z = -params.beta * (np.asarray(band_min, dtype=float) - params.mu)
    return (params.g_0 / params.beta) * np.logaddexp(0.0, z)


def interaction_matrix(x: np.ndarray, params: PhysicsParams) -> np.ndarray:
    """Kernel times quadrature weights, scaled to eV per unit density."""
    return kernel_matrix(x, params) * trapezoid_weights(x) / MEV_PER_EV


def modified_band_min(n, x, potential_mev, params: PhysicsParams,
                      ramp: float = 1.0):
    """Band minimum eps_0 + U(x) + ramp * integral K(x, x') n(x') dx', in eV.

    ``potential_mev`` is the external potential-energy profile in meV; the
    interaction integral uses the trapezoidal rule on the grid.
    """
    n = np.asarray(n, dtype=float)
    base = params.epsilon_0 + np.asarray(potential_mev, dtype=float) / MEV_PER_EV
    if ramp == 0.0:
        return base + np.zeros_like(n)
    return base + ramp * (interaction_matrix(x, params) @ n)


def solve_self_consistent(x, potential_mev, params: PhysicsParams,
                          config: SolverConfig | None = None,
                          interaction: np.ndarray | None = None) -> DensityProfile:
    """Solve the density/band-minimum pair to a fixed point.

    Starts from n = 0, mixes updates by ``config.mix``, and ramps the
    Coulomb strength linearly over ``config.ramp_iters`` iterations to
    avoid the convergence pathologies of switching the interaction on at
    once. Returns converged=False (with the last iterate and residual)
    instead of raising when ``config.max_iter`` is exhausted.

    ``interaction`` may carry a precomputed ``interaction_matrix(x, params)``
    so sweeps do not rebuild it per pixel.
    """
    config = config or SolverConfig()
    x = np.asarray(x, dtype=float)
    b0 = params.epsilon_0 + np.asarray(potential_mev, dtype=float) / MEV_PER_EV
    if b0.shape != x.shape:
        raise ValueError("potential profile and grid must have the same shape")
    if interaction is None:
        interaction = interaction_matrix(x, params)
    C = np.ascontiguousarray(interaction, dtype=float)
    n, band_min, residual, iterations, converged = scf_fixed_point(
        np.ascontiguousarray(b0, dtype=float), C, params.g_0, params.beta,
        params.mu, config.mix, config.ramp_iters, config.tol, config.max_iter)
    return DensityProfile(n=n, band_min=band_min, residual=residual,
                          iterations=iterations, converged=bool(converged))

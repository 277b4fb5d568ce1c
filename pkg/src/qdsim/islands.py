"""Island segmentation, capacitance model, and ground-state charges.

An island is a maximal contiguous run of grid points whose density exceeds
a threshold; runs touching either end of the grid belong to the leads and
are excluded. Each island carries a continuous induced charge Z_i (its
integrated density) and the islands couple through an inverse-capacitance
matrix estimated directly from the density. The stable charge configuration
is the integer vector minimizing the quadratic charging energy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .device import PhysicsParams
from .solver import coulomb_kernel, trapezoid_weights

#: density below this (nm^-1) is treated as empty when segmenting
DEFAULT_THRESHOLD = 1e-6

#: runs narrower than this many grid points carry no integrable charge
MIN_ISLAND_POINTS = 2

#: half-width of the enumeration box around the rounded induced charge
CHARGE_SEARCH_MARGIN = 2


class CapacitanceModelError(ValueError):
    """Raised for degenerate islands or an indefinite capacitance matrix."""


@dataclass(frozen=True, eq=False)
class IslandModel:
    """Segmented islands with induced charges and inverse capacitance.

    islands       (start, stop) inclusive grid-index ranges, left to right
    Z             continuous induced charge per island (electrons)
    E             inverse-capacitance matrix (meV per electron^2)
    dot_positions density-peak position of each island (nm)
    """

    islands: tuple[tuple[int, int], ...]
    Z: np.ndarray
    E: np.ndarray
    dot_positions: np.ndarray


@dataclass(frozen=True)
class ChargeState:
    """Integer electrons per island and the associated charging energy (meV)."""

    Q: tuple[int, ...]
    energy: float

    def __post_init__(self):
        if any(q < 0 for q in self.Q):
            raise CapacitanceModelError(f"charges must be non-negative, got {self.Q}")


def segment_islands(n, threshold: float = DEFAULT_THRESHOLD,
                    min_points: int = MIN_ISLAND_POINTS) -> tuple[tuple[int, int], ...]:
    """Maximal runs with n > threshold, dropping lead runs at the grid ends."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    n = np.asarray(n, dtype=float)
    above = n > threshold
    islands = []
    start = None
    for i, flag in enumerate(above):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            islands.append((start, i - 1))
            start = None
    if start is not None:
        islands.append((start, len(n) - 1))
    return tuple(
        (a, b) for a, b in islands
        if a > 0 and b < len(n) - 1 and b - a + 1 >= min_points
    )


def induced_charges(n, x, islands) -> np.ndarray:
    """Trapezoidal integral of the density over each island (electrons)."""
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.array([np.trapezoid(n[a:b + 1], x[a:b + 1]) for a, b in islands])


def inverse_capacitance(n, x, islands, params: PhysicsParams) -> np.ndarray:
    """Inverse-capacitance estimate E_ij from the density (meV per electron^2).

    E_ij = [c_k delta_ij int_i n^2 dx + int_i int_j K(x,x') n(x) n(x') dx dx']
           / (int_i n dx)(int_j n dx)
    """
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    k = len(islands)
    Z = induced_charges(n, x, islands)
    if np.any(Z <= 0.0):
        raise CapacitanceModelError(f"island with non-positive charge: Z={Z}")
    weighted = []  # quadrature-weighted density per island
    for a, b in islands:
        w = trapezoid_weights(x[a:b + 1])
        weighted.append(w * n[a:b + 1])
    E = np.empty((k, k))
    for i, (ai, bi) in enumerate(islands):
        for j, (aj, bj) in enumerate(islands):
            K_sub = coulomb_kernel(x[ai:bi + 1, None], x[None, aj:bj + 1], params)
            coulomb = weighted[i] @ K_sub @ weighted[j]
            kinetic = 0.0
            if i == j:
                kinetic = params.c_k * np.sum(weighted[i] * n[ai:bi + 1])
            E[i, j] = (kinetic + coulomb) / (Z[i] * Z[j])
    return E


def dot_positions(n, x, islands) -> np.ndarray:
    """Density-peak position within each island (nm)."""
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.array([x[a + int(np.argmax(n[a:b + 1]))] for a, b in islands])


def build_island_model(n, x, params: PhysicsParams,
                       threshold: float = DEFAULT_THRESHOLD) -> IslandModel:
    """Segment the density and assemble the full capacitance model."""
    islands = segment_islands(n, threshold)
    return IslandModel(
        islands=islands,
        Z=induced_charges(n, x, islands),
        E=inverse_capacitance(n, x, islands, params) if islands else np.zeros((0, 0)),
        dot_positions=dot_positions(n, x, islands),
    )


def charging_energy(Q, model: IslandModel) -> float:
    """Quadratic charging energy sum_ij E_ij (Q-Z)_i (Q-Z)_j in meV."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape != model.Z.shape:
        raise CapacitanceModelError(
            f"charge vector has dimension {Q.shape}, expected {model.Z.shape}")
    d = Q - model.Z
    return float(d @ model.E @ d)


def ground_state_charges(model: IslandModel,
                         margin: int = CHARGE_SEARCH_MARGIN) -> ChargeState:
    """Integer minimizer of the charging energy by exhaustive enumeration.

    Candidates range over [max(0, floor(Z_i) - margin), ceil(Z_i) + margin]
    per island; ties break toward smaller total charge, then
    lexicographically. Requires a positive-semidefinite E.
    """
    k = len(model.Z)
    if k == 0:
        return ChargeState(Q=(), energy=0.0)
    eigmin = float(np.linalg.eigvalsh(model.E)[0])
    if eigmin < -1e-9 * max(1.0, float(np.abs(model.E).max())):
        raise CapacitanceModelError(
            f"inverse-capacitance matrix is not positive semidefinite "
            f"(min eigenvalue {eigmin:.3e})")
    ranges = [
        range(max(0, math.floor(z) - margin), math.ceil(z) + margin + 1)
        for z in model.Z
    ]
    best = None
    for q in itertools.product(*ranges):
        key = (charging_energy(q, model), sum(q), q)
        if best is None or key < best:
            best = key
    energy, _, q = best
    return ChargeState(Q=tuple(int(v) for v in q), energy=energy)

"""Device-state classification, WKB tunnel rates, and master-equation current.

The charge states around the ground configuration form a continuous-time
Markov chain whose moves are single-electron tunneling events between
adjacent islands or between an edge island and its neighboring lead. Each
move carries a WKB barrier factor and a thermal acceptance factor
f(dE) = 1 / (1 + exp(dE / kT)); lead exchanges are offset by the +-bias/2
chemical potentials of the contacts. The current is the net stationary
probability flux through the left contact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .device import PhysicsParams
from .islands import ChargeState, IslandModel, charging_energy

SHORT_CIRCUIT = -1
BARRIER = 0
SINGLE_DOT = 1
DOUBLE_DOT = 2

STATE_NAMES = {SHORT_CIRCUIT: "SC", BARRIER: "QPC", SINGLE_DOT: "SD", DOUBLE_DOT: "DD"}

MEV_PER_EV = 1000.0


class StateClassificationError(ValueError):
    """More islands than the 5-gate geometry can produce."""


class MarkovChainError(ValueError):
    """Reducible or numerically singular chain."""


@dataclass(frozen=True)
class Transition:
    """One directed tunneling move.

    barrier is "left"/"right" for lead exchanges or "island:i" for the
    barrier between islands i and i+1; delta is +1 when an electron enters
    the device from a lead (or hops i -> i+1) and -1 for the reverse. The
    move keeps its own rate because distinct moves (left- vs right-lead
    exchange on a single island) can connect the same pair of states, whose
    generator entry then holds only the sum.
    """

    src: int
    dst: int
    barrier: str
    delta: int
    rate: float


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Charge states, generator matrix (rates, arbitrary units), and moves."""

    states: tuple[tuple[int, ...], ...]
    generator: np.ndarray
    transitions: tuple[Transition, ...]


def classify_state(islands, band_min, params: PhysicsParams) -> int:
    """State label: SC (-1), barrier/QPC (0), single dot (1), double dot (2).

    Short circuit means the converged band minimum sits below the lead
    chemical potential everywhere, so nothing blocks the channel.
    """
    if float(np.max(band_min)) < params.mu:
        return SHORT_CIRCUIT
    count = len(islands)
    if count > 2:
        raise StateClassificationError(
            f"{count} islands cannot occur in the 5-gate geometry")
    return count


def wkb_rate(band_min_segment, x_segment, params: PhysicsParams) -> float:
    """Tunneling rate through one barrier region (arbitrary units).

    rate = attempt_rate_coef * exp(-WKB_coeff * integral sqrt(eps0' - mu) dx)
    with the integrand clipped at zero and integrated by the trapezoidal
    rule in (eV)^(1/2) nm. An empty region is transparent.
    """
    band = np.asarray(band_min_segment, dtype=float)
    if band.size < 2:
        return params.attempt_rate_coef
    integrand = np.sqrt(np.clip(band - params.mu, 0.0, None))
    action = np.trapezoid(integrand, np.asarray(x_segment, dtype=float))
    return params.attempt_rate_coef * float(np.exp(-params.WKB_coeff * action))


def thermal_factor(delta_e_ev: float, params: PhysicsParams) -> float:
    """Acceptance factor 1 / (1 + exp(dE / kT)); overflow-safe."""
    return float(expit(-delta_e_ev / params.kT))


def barrier_rates(model: IslandModel, band_min, x, params: PhysicsParams) -> dict[str, float]:
    """WKB rate of every barrier: left lead, inter-island, right lead."""
    band = np.asarray(band_min, dtype=float)
    x = np.asarray(x, dtype=float)
    rates: dict[str, float] = {}
    if not model.islands:
        return rates
    first_start = model.islands[0][0]
    last_stop = model.islands[-1][1]
    rates["left"] = wkb_rate(band[:first_start], x[:first_start], params)
    rates["right"] = wkb_rate(band[last_stop + 1:], x[last_stop + 1:], params)
    for i in range(len(model.islands) - 1):
        gap = slice(model.islands[i][1] + 1, model.islands[i + 1][0])
        rates[f"island:{i}"] = wkb_rate(band[gap], x[gap], params)
    return rates


def build_markov_chain(ground: ChargeState, model: IslandModel, band_min, x,
                       params: PhysicsParams) -> MarkovChain:
    """Chain over charge states within one electron of the ground state.

    dE for a move is the charging-energy change; exchanges with lead L/R
    are additionally offset by -/+ bias/2 for an entering electron (the
    left lead sits at +bias/2, V_L > 0 > V_R).
    """
    k = len(ground.Q)
    if k == 0:
        raise MarkovChainError("chain requires at least one island")
    state_ranges = [
        sorted({q for q in (g - 1, g, g + 1) if q >= 0}) for g in ground.Q
    ]
    states = tuple(itertools.product(*state_ranges))
    index = {s: i for i, s in enumerate(states)}
    energies = {s: charging_energy(s, model) / MEV_PER_EV for s in states}
    gammas = barrier_rates(model, band_min, x, params)
    half_bias = 0.5 * params.bias

    moves: list[tuple[tuple[int, ...], tuple[int, ...], str, int, float]] = []
    for s in states:
        # lead exchanges on the edge islands; a single island talks to both
        for island, barrier, offset in ((0, "left", half_bias),
                                        (k - 1, "right", -half_bias)):
            for step in (+1, -1):
                t = list(s)
                t[island] += step
                t = tuple(t)
                if t not in index:
                    continue
                delta_e = energies[t] - energies[s] - step * offset
                moves.append((s, t, barrier, step, gammas[barrier]
                              * thermal_factor(delta_e, params)))
        # single-electron hops between adjacent islands
        for i in range(k - 1):
            for step in (+1, -1):  # +1: electron moves i -> i+1
                t = list(s)
                t[i] -= step
                t[i + 1] += step
                t = tuple(t)
                if t not in index:
                    continue
                delta_e = energies[t] - energies[s]
                moves.append((s, t, f"island:{i}", step,
                              gammas[f"island:{i}"] * thermal_factor(delta_e, params)))

    m = len(states)
    generator = np.zeros((m, m))
    transitions = []
    for s, t, barrier, step, rate in moves:
        a, b = index[s], index[t]
        generator[a, b] += rate
        transitions.append(Transition(src=a, dst=b, barrier=barrier,
                                      delta=step, rate=rate))
    np.fill_diagonal(generator, 0.0)
    np.fill_diagonal(generator, -generator.sum(axis=1))
    return MarkovChain(states=states, generator=generator,
                       transitions=tuple(transitions))


def stationary_distribution(chain: MarkovChain) -> np.ndarray:
    """Probability vector pi with pi @ G = 0 and sum(pi) = 1."""
    G = chain.generator
    m = G.shape[0]
    A = G.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise MarkovChainError(f"singular generator (reducible chain?): {exc}") from exc
    if np.any(pi < -1e-9):
        raise MarkovChainError(f"stationary solve produced negative weight: {pi}")
    # concentrated distributions leave roundoff-scale negatives on the
    # unoccupied states; clamp them without renormalizing
    return np.where(pi < 0.0, 0.0, pi)


def compute_current(chain: MarkovChain | None, pi: np.ndarray | None, state: int,
                    params: PhysicsParams, band_min=None, x=None) -> float:
    """Current through the device (arbitrary units).

    Short circuit maps to the fixed short_circuit_current; the barrier
    state carries barrier_current * barrier_tunnel_rate * (WKB rate of the
    whole channel); otherwise the net stationary probability flux across
    the left contact, counted +1 per electron entering from the left.
    """
    if state == SHORT_CIRCUIT:
        return params.short_circuit_current
    if state == BARRIER:
        if band_min is None or x is None:
            raise ValueError("barrier-state current needs the band minimum profile")
        return (params.barrier_current * params.barrier_tunnel_rate
                * wkb_rate(band_min, x, params))
    if chain is None or pi is None:
        raise ValueError("dot-state current needs a chain and its stationary state")
    current = 0.0
    for t in chain.transitions:
        if t.barrier == "left":
            current += t.delta * pi[t.src] * t.rate
    return current


def contact_current(chain: MarkovChain, pi: np.ndarray, barrier: str) -> float:
    """Net stationary flux through one named barrier (diagnostic use)."""
    return sum(t.delta * pi[t.src] * t.rate
               for t in chain.transitions if t.barrier == barrier)

"""Device geometry, gate parameterization, and ensemble sampling.

Positions are in nm. Gate peaks are electron potential energies in meV: a
gate at applied voltage V contributes a profile whose value at the gate
center is ``-alpha * V`` (in meV for V in mV), so the 0..+400 mV plunger
sweep digs wells down to -400 meV while the -200 mV barrier gates sit at
+200 meV. All solver-facing energies derived from these profiles are
converted to eV at the solver boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

GATE_NAMES = ("B1", "P1", "B2", "P2", "B3")
PLUNGER_INDICES = (1, 3)
BARRIER_INDICES = (0, 2, 4)

#: default factor of all sampled-parameter standard deviations
DEFAULT_REL_STD = 0.05

_MAX_SAMPLE_RETRIES = 100


class DeviceError(ValueError):
    """Raised for invalid gate or device parameters."""


@dataclass(frozen=True)
class GateSpec:
    """One cylindrical gate above the 1D channel.

    peak    potential-energy height at the gate center (meV)
    x0      gate position along the channel (nm)
    h       height of the gate above the 2DEG (nm)
    r0      gate radius (nm)
    screen  screening length of the exponential cutoff (nm)
    alpha   lever arm applied multiplicatively to the peak
    """

    peak: float
    x0: float
    h: float
    r0: float
    screen: float
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.h > 0 and self.r0 > 0):
            raise DeviceError(f"gate radius/height must be positive (h={self.h}, r0={self.r0})")
        if not self.h > self.r0:
            raise DeviceError(f"gate height must exceed radius (h={self.h}, r0={self.r0})")
        if not self.screen > 0:
            raise DeviceError(f"screening length must be positive ({self.screen})")
        if not self.alpha > 0:
            raise DeviceError(f"lever arm must be positive ({self.alpha})")


@dataclass(frozen=True)
class PhysicsParams:
    """Physical constants of one device realization.

    Units: K_0 in meV, sigma in nm, g_0 in (eV nm)^-1, c_k in meV nm,
    beta in eV^-1, mu/kT/bias in eV, V_L/V_R in V, sensor positions in nm.
    Current scales (barrier_current, short_circuit_current) and the rate
    coefficients are in arbitrary units matching the stored record.

    The default density-of-states/softening pair (g_0=0.5, sigma=2.0) keeps
    the reference device in the few-electron (0..10) regime across the full
    plunger sweep; the alternative stored-record pair (g_0=1.0, sigma=3.0)
    pushes the deepest single-dot fillings to ~11 electrons and can be set
    explicitly where that behavior is wanted.
    """

    K_0: float = 10.0
    sigma: float = 2.0
    g_0: float = 0.5
    c_k: float = 1.0
    beta: float = 1000.0
    mu: float = 0.1
    kT: float = 50e-6
    bias: float = 100e-6
    V_L: float = 50e-6
    V_R: float = -50e-6
    WKB_coeff: float = 0.5
    attempt_rate_coef: float = 1.0
    barrier_tunnel_rate: float = 10.0
    barrier_current: float = 1.0
    short_circuit_current: float = 100.0
    sensor_gate_coeff: float = 0.1
    sensors: tuple[tuple[float, float], ...] = ((-20.0, 50.0), (20.0, 50.0))
    epsilon_0: float = 0.0

    def __post_init__(self):
        if self.beta <= 0 or self.kT <= 0:
            raise DeviceError("beta and kT must be positive")
        if self.mu <= 0:
            raise DeviceError("lead chemical potential must be positive")
        if self.sigma <= 0 or self.K_0 < 0:
            raise DeviceError("invalid Coulomb kernel parameters")
        for sx, sy in self.sensors:
            if sy == 0.0:
                raise DeviceError("sensors must sit off the channel axis")
        if not math.isclose(self.bias, self.V_L - self.V_R, rel_tol=0, abs_tol=1e-12):
            raise DeviceError(
                f"bias ({self.bias}) must equal V_L - V_R ({self.V_L - self.V_R})")


@dataclass(frozen=True, eq=False)
class DeviceSpec:
    """Five ordered gates (B1, P1, B2, P2, B3), spatial grid, and physics."""

    gates: tuple[GateSpec, ...]
    grid: np.ndarray
    physics: PhysicsParams

    def __post_init__(self):
        if len(self.gates) != len(GATE_NAMES):
            raise DeviceError(f"expected {len(GATE_NAMES)} gates, got {len(self.gates)}")
        x0s = [g.x0 for g in self.gates]
        if any(b >= a for b, a in zip(x0s, x0s[1:])):
            raise DeviceError(f"gates must be ordered by position, got {x0s}")
        x = np.asarray(self.grid, dtype=float)
        if x.ndim != 1 or len(x) < 2:
            raise DeviceError("grid must be a 1D array of at least two points")
        dx = np.diff(x)
        if np.any(dx <= 0):
            raise DeviceError("grid must be strictly increasing")
        if not np.allclose(dx, dx[0], rtol=0, atol=1e-9):
            raise DeviceError("grid must be uniform")
        if x[0] > min(x0s) or x[-1] < max(x0s):
            raise DeviceError("grid must cover all gate positions")
        object.__setattr__(self, "grid", x)

    def __eq__(self, other):
        if not isinstance(other, DeviceSpec):
            return NotImplemented
        return (self.gates == other.gates
                and np.array_equal(self.grid, other.grid)
                and self.physics == other.physics)


def gate_potential(x, gate: GateSpec):
    """Potential-energy profile of a single gate, in meV.

    The shape is the log profile of a cylindrical conductor at height ``h``
    cut off exponentially over the screening length; it equals
    ``alpha * peak`` exactly at the gate center.
    """
    x = np.asarray(x, dtype=float)
    d2 = (x - gate.x0) ** 2
    shape = np.log(np.sqrt(d2 + gate.h ** 2) / gate.r0) / math.log(gate.h / gate.r0)
    screen = np.exp(-np.abs(x - gate.x0) / gate.screen)
    return gate.alpha * gate.peak * shape * screen


def effective_gate_peaks(spec: DeviceSpec, plunger_mv: tuple[float, float]) -> np.ndarray:
    """Lever-arm-scaled peaks (meV) with plungers set from applied voltages (mV)."""
    v1, v2 = plunger_mv
    peaks = []
    for i, g in enumerate(spec.gates):
        raw = -v1 if i == PLUNGER_INDICES[0] else -v2 if i == PLUNGER_INDICES[1] else g.peak
        peaks.append(g.alpha * raw)
    return np.array(peaks)


def total_potential(spec: DeviceSpec, plunger_mv: tuple[float, float]) -> np.ndarray:
    """Summed potential-energy profile over the grid (meV) at the given plunger voltages."""
    v1, v2 = plunger_mv
    total = np.zeros_like(spec.grid)
    for i, g in enumerate(spec.gates):
        if i == PLUNGER_INDICES[0]:
            g = replace(g, peak=-v1)
        elif i == PLUNGER_INDICES[1]:
            g = replace(g, peak=-v2)
        total += gate_potential(spec.grid, g)
    return total


def mean_device(grid_points: int = 121, span: tuple[float, float] = (-60.0, 60.0),
                physics: PhysicsParams | None = None) -> DeviceSpec:
    """Reference 5-gate device: barriers at +200 meV, plunger positions +-20 nm."""
    gates = tuple(
        GateSpec(peak=peak, x0=x0, h=50.0, r0=5.0, screen=20.0, alpha=1.0)
        for peak, x0 in zip((200.0, -400.0, 200.0, -400.0, 200.0),
                            (-40.0, -20.0, 0.0, 20.0, 40.0))
    )
    grid = np.linspace(span[0], span[1], grid_points)
    return DeviceSpec(gates=gates, grid=grid, physics=physics or PhysicsParams())


def sample_device(mean: DeviceSpec, seed: int, rel_std: float = DEFAULT_REL_STD) -> DeviceSpec:
    """Draw one device realization around ``mean``.

    Every varied parameter is drawn independently from a Gaussian with the
    mean value and standard deviation ``rel_std * |mean|``. Varied: K_0,
    g_0, c_k, the gate-shared alpha/h/r0/screen, and per-gate position and
    peak. The grid, softening sigma, temperatures, rates, and sensor
    positions are copied unchanged. Deterministic for a fixed seed; draws
    violating a type invariant are resampled (bounded retries).
    """
    rng = np.random.default_rng(seed)

    def draw(value: float) -> float:
        return rng.normal(value, rel_std * abs(value))

    last_err = None
    for _ in range(_MAX_SAMPLE_RETRIES):
        try:
            physics = replace(
                mean.physics,
                K_0=draw(mean.physics.K_0),
                g_0=draw(mean.physics.g_0),
                c_k=draw(mean.physics.c_k),
            )
            alpha = draw(mean.gates[0].alpha)
            h = draw(mean.gates[0].h)
            r0 = draw(mean.gates[0].r0)
            screen = draw(mean.gates[0].screen)
            gates = tuple(
                GateSpec(peak=draw(g.peak), x0=draw(g.x0), h=h, r0=r0,
                         screen=screen, alpha=alpha)
                for g in mean.gates
            )
            return DeviceSpec(gates=gates, grid=mean.grid.copy(), physics=physics)
        except DeviceError as err:
            last_err = err
    raise DeviceError(f"could not sample a valid device after "
                      f"{_MAX_SAMPLE_RETRIES} retries: {last_err}")


# ---------------------------------------------------------------------------
# plain-text configuration files
#
# One key per line, ``key = value``; '#' starts a comment. Keys follow the
# stored-record names: K_0, sigma, g_0, c_k, beta, kT, mu, bias, WKB_coeff,
# attempt_rate_coef, barrier_tunnel_rate, barrier_current,
# short_circuit_current, sensor_gate_coeff, sensors, and gates.{alpha, h,
# mean, peak, rho, screen}. Scalar gate keys may hold one shared value or a
# comma-separated list of five; sensors hold (x, y) pairs.

_SCALAR_PHYSICS_KEYS = {
    "K_0", "sigma", "g_0", "c_k", "beta", "kT", "mu", "bias", "V_L", "V_R",
    "WKB_coeff", "attempt_rate_coef", "barrier_tunnel_rate",
    "barrier_current", "short_circuit_current", "sensor_gate_coeff",
    "epsilon_0",
}
_GATE_KEY_TO_FIELD = {"alpha": "alpha", "h": "h", "mean": "x0",
                      "peak": "peak", "rho": "r0", "screen": "screen"}


def _parse_sensors(text: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for chunk in text.replace("(", " ").replace(")", " ").split(","):
        chunk = chunk.strip()
        if chunk:
            pairs.append(float(chunk))
    if len(pairs) % 2:
        raise DeviceError(f"sensors need (x, y) pairs, got {text!r}")
    return tuple((pairs[i], pairs[i + 1]) for i in range(0, len(pairs), 2))


def load_device_config(path) -> DeviceSpec:
    """Build the mean device described by a key/value configuration file."""
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DeviceError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value

    base = mean_device()
    physics_kwargs = {}
    gate_values: dict[str, list[float]] = {}
    for key, value in entries.items():
        if key in _SCALAR_PHYSICS_KEYS:
            physics_kwargs[key] = float(value)
        elif key == "sensors":
            physics_kwargs["sensors"] = _parse_sensors(value)
        elif key.startswith("gates."):
            gate_key = key[len("gates."):]
            if gate_key not in _GATE_KEY_TO_FIELD:
                raise DeviceError(f"unknown gate key {key!r}")
            vals = [float(v) for v in value.split(",")]
            if len(vals) == 1:
                vals = vals * len(GATE_NAMES)
            if len(vals) != len(GATE_NAMES):
                raise DeviceError(f"{key!r} needs 1 or {len(GATE_NAMES)} values")
            gate_values[_GATE_KEY_TO_FIELD[gate_key]] = vals
        elif key in {"grid_points", "x_min", "x_max"}:
            physics_kwargs[key] = float(value)  # handled below
        else:
            raise DeviceError(f"unknown configuration key {key!r}")

    grid_points = int(physics_kwargs.pop("grid_points", len(base.grid)))
    x_min = physics_kwargs.pop("x_min", base.grid[0])
    x_max = physics_kwargs.pop("x_max", base.grid[-1])
    physics = replace(base.physics, **physics_kwargs)
    gates = tuple(
        replace(g, **{fieldname: vals[i] for fieldname, vals in gate_values.items()})
        for i, g in enumerate(base.gates)
    )
    return DeviceSpec(gates=gates, grid=np.linspace(x_min, x_max, grid_points),
                      physics=physics)

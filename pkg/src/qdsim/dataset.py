"""Voltage sweeps, device ensembles, patches, and file serialization.

A device map runs the full pipeline (potential -> density -> islands ->
charges -> current -> sensor -> label) at every point of a plunger-voltage
grid. Maps serialize to a self-describing JSON container: a header with the
voltage vectors and the full physics record (stored-record key names), plus
columnar ``output`` arrays for charge, current, sensor, and state in
row-major pixel order with V_P1 outermost. Serialization is canonical
(sorted keys, fixed separators), so equal maps produce identical bytes
regardless of worker count.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .device import (GATE_NAMES, DeviceSpec, GateSpec, PhysicsParams,
                     sample_device, total_potential)
from .islands import (DEFAULT_THRESHOLD, IslandModel, dot_positions,
                      induced_charges, inverse_capacitance,
                      ground_state_charges, segment_islands)
from .sensor import device_sensor_response
from .solver import SolverConfig, interaction_matrix, solve_self_consistent
from .transport import (BARRIER, SHORT_CIRCUIT, build_markov_chain,
                        classify_state, compute_current,
                        stationary_distribution)

SCHEMA_VERSION = 1
MAP_TYPE = "quantum-dot stability map: charge/current/sensor/state vs plunger voltages"
MANIFEST_TYPE = "quantum-dot device ensemble manifest"
PATCH_TYPE = "labeled training patches from quantum-dot stability maps"

#: number of charge slots in the serialized columnar output
CHARGE_SLOTS = 2

STATE_ORDER = (-1, 0, 1, 2)  # fraction-vector order [SC, QPC, SD, DD]

DEFAULT_GRID = 100
DEFAULT_V_RANGE = (0.0, 400.0)
DEFAULT_PATCH_SIZE = 30
DEFAULT_PATCHES_PER_DEVICE = 10


class SchemaError(ValueError):
    """Malformed, truncated, or wrong-version data file."""


@dataclass(frozen=True)
class PixelRecord:
    """Per-voltage-point output: charge tuple, current, sensor readouts, label.

    The charge tuple has one entry per island (a single 0 for the short
    circuit and barrier states).
    """

    charge: tuple[int, ...]
    current: float
    sensor: tuple[float, ...]
    state: int

    def __post_init__(self):
        if self.state not in STATE_ORDER:
            raise ValueError(f"state must be one of {STATE_ORDER}, got {self.state}")
        if any(q < 0 for q in self.charge):
            raise ValueError(f"charges must be non-negative, got {self.charge}")


@dataclass(frozen=True)
class DeviceMap:
    """Full sweep over (V_P1, V_P2), row-major with V_P1 outermost."""

    v_p1: tuple[float, ...]
    v_p2: tuple[float, ...]
    records: tuple[PixelRecord, ...]
    device: DeviceSpec
    diagnostics: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.records) != len(self.v_p1) * len(self.v_p2):
            raise SchemaError("record count does not match the voltage grid")
        for name in ("v_p1", "v_p2"):
            v = getattr(self, name)
            if any(b >= a for b, a in zip(v, v[1:])):
                raise SchemaError(f"{name} must be strictly increasing")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.v_p1), len(self.v_p2)

    def record(self, i: int, j: int) -> PixelRecord:
        return self.records[i * len(self.v_p2) + j]

    def state_map(self) -> np.ndarray:
        return np.array([r.state for r in self.records]).reshape(self.shape)

    def current_map(self) -> np.ndarray:
        return np.array([r.current for r in self.records]).reshape(self.shape)

    def sensor_map(self, sensor_index: int = 0) -> np.ndarray:
        return np.array([r.sensor[sensor_index] for r in self.records]).reshape(self.shape)

    def charge_map(self) -> np.ndarray:
        """Total electron number per pixel."""
        return np.array([sum(r.charge) for r in self.records]).reshape(self.shape)

    def charge_columns(self) -> np.ndarray:
        """(grid^2, CHARGE_SLOTS) integer array, zero-padded."""
        out = np.zeros((len(self.records), CHARGE_SLOTS), dtype=int)
        for k, r in enumerate(self.records):
            out[k, :len(r.charge)] = r.charge
        return out


@dataclass(frozen=True, eq=False)
class Patch:
    """One channel sub-image with its state-fraction vector [SC, QPC, SD, DD]."""

    pixels: np.ndarray
    fractions: tuple[float, float, float, float]
    majority_label: int

    def __post_init__(self):
        total = sum(self.fractions)
        if not np.isclose(total, 1.0, rtol=0, atol=1e-12):
            raise ValueError(f"fractions must sum to 1, got {total}")
        if any(f < 0 for f in self.fractions):
            raise ValueError("fractions must be non-negative")

    def __eq__(self, other):
        if not isinstance(other, Patch):
            return NotImplemented
        return (np.array_equal(self.pixels, other.pixels)
                and self.fractions == other.fractions
                and self.majority_label == other.majority_label)


# ---------------------------------------------------------------------------
# per-pixel pipeline

def solve_pixel(device: DeviceSpec, v1: float, v2: float,
                config: SolverConfig | None = None,
                threshold: float = DEFAULT_THRESHOLD,
                interaction: np.ndarray | None = None
                ) -> tuple[PixelRecord, str | None]:
    """Run the full pipeline at one voltage point.

    Never raises for per-pixel physics failures: those return a defaulted
    record plus a diagnostic string (second element, None when clean).
    """
    params = device.physics
    x = device.grid
    config = config or SolverConfig()
    potential = total_potential(device, (v1, v2))
    profile = solve_self_consistent(x, potential, params, config,
                                    interaction=interaction)
    diag = None
    if not profile.converged:
        diag = (f"pixel ({v1:g}, {v2:g}) mV: solver not converged after "
                f"{profile.iterations} iterations (residual {profile.residual:.3e})")
    try:
        isl = segment_islands(profile.n, threshold)
        label = classify_state(isl, profile.band_min, params)
        if label in (SHORT_CIRCUIT, BARRIER):
            current = compute_current(None, None, label, params,
                                      band_min=profile.band_min, x=x)
            sensor = device_sensor_response(device, (v1, v2), (), ())
            record = PixelRecord(charge=(0,), current=current,
                                 sensor=sensor, state=label)
        else:
            model = IslandModel(
                islands=isl,
                Z=induced_charges(profile.n, x, isl),
                E=inverse_capacitance(profile.n, x, isl, params),
                dot_positions=dot_positions(profile.n, x, isl),
            )
            ground = ground_state_charges(model)
            chain = build_markov_chain(ground, model, profile.band_min, x, params)
            pi = stationary_distribution(chain)
            current = compute_current(chain, pi, label, params)
            sensor = device_sensor_response(device, (v1, v2), ground.Q,
                                            model.dot_positions)
            record = PixelRecord(charge=ground.Q, current=current,
                                 sensor=sensor, state=label)
    except Exception as exc:  # flagged pixel; the sweep must not abort
        diag = f"pixel ({v1:g}, {v2:g}) mV: {type(exc).__name__}: {exc}"
        sensor = device_sensor_response(device, (v1, v2), (), ())
        record = PixelRecord(charge=(0,), current=0.0, sensor=sensor, state=BARRIER)
    return record, diag


def _sweep_rows(device: DeviceSpec, v1_values, v2_values, config: SolverConfig,
                threshold: float) -> tuple[list[PixelRecord], list[str]]:
    interaction = interaction_matrix(device.grid, device.physics)
    records, diags = [], []
    for v1 in v1_values:
        for v2 in v2_values:
            record, diag = solve_pixel(device, v1, v2, config, threshold,
                                       interaction=interaction)
            records.append(record)
            if diag:
                diags.append(diag)
    return records, diags


def _sweep_row_task(args):
    device, v1, v2_values, config, threshold = args
    return _sweep_rows(device, [v1], v2_values, config, threshold)


def sweep_map(device: DeviceSpec, grid_size: int = DEFAULT_GRID,
              v_range: tuple[float, float] = DEFAULT_V_RANGE,
              config: SolverConfig | None = None,
              threshold: float = DEFAULT_THRESHOLD,
              workers: int = 1) -> DeviceMap:
    """Sweep the pipeline over a grid_size x grid_size plunger-voltage map.

    Rows (fixed V_P1) are independent work items; with ``workers`` > 1 they
    fan out over processes and are reassembled in index order, so the result
    is identical for any worker count. Per-pixel failures become diagnostics
    on the returned map, never an aborted sweep.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    config = config or SolverConfig()
    v1 = np.linspace(v_range[0], v_range[1], grid_size)
    v2 = np.linspace(v_range[0], v_range[1], grid_size)
    if workers > 1:
        tasks = [(device, float(v), v2, config, threshold) for v in v1]
        records: list[PixelRecord] = []
        diags: list[str] = []
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for row_records, row_diags in pool.map(_sweep_row_task, tasks):
                records.extend(row_records)
                diags.extend(row_diags)
    else:
        records, diags = _sweep_rows(device, v1, v2, config, threshold)
    return DeviceMap(v_p1=tuple(float(v) for v in v1),
                     v_p2=tuple(float(v) for v in v2),
                     records=tuple(records), device=device,
                     diagnostics=tuple(diags))


# ---------------------------------------------------------------------------
# derived channels and patches

def differential_conductance(device_map: DeviceMap, sensor_index: int = 0) -> np.ndarray:
    """Magnitude of the 2D central-difference gradient of a sensor channel.

    One-sided differences at the edges; spacing taken from the voltage
    vectors, so units are conductance per mV.
    """
    sensor = device_map.sensor_map(sensor_index)
    g1, g2 = np.gradient(sensor, np.array(device_map.v_p1),
                         np.array(device_map.v_p2))
    return np.hypot(g1, g2)


def state_fractions(states: np.ndarray) -> tuple[float, float, float, float]:
    """Fractions of [SC, QPC, SD, DD] pixels in a label array."""
    total = states.size
    return tuple(float(np.count_nonzero(states == s)) / total for s in STATE_ORDER)


def sample_patches(device_map: DeviceMap, channel: str = "current",
                   size: int = DEFAULT_PATCH_SIZE,
                   count: int = DEFAULT_PATCHES_PER_DEVICE,
                   seed: int = 0, sensor_index: int = 0) -> list[Patch]:
    """Random sub-images of one channel with their state-fraction labels.

    ``channel`` is "current" for the raw current map or "sensor" for the
    differential conductance of one sensor. Offsets are uniform over all
    valid top-left positions; the majority label is the argmax of the
    fraction vector with ties to the lower index.
    """
    n1, n2 = device_map.shape
    if size > min(n1, n2):
        raise ValueError(f"patch size {size} exceeds map size {(n1, n2)}")
    if channel == "current":
        source = device_map.current_map()
    elif channel == "sensor":
        source = differential_conductance(device_map, sensor_index)
    else:
        raise ValueError(f"channel must be 'current' or 'sensor', not {channel!r}")
    states = device_map.state_map()
    rng = np.random.default_rng(seed)
    patches = []
    for _ in range(count):
        i = int(rng.integers(0, n1 - size + 1))
        j = int(rng.integers(0, n2 - size + 1))
        fractions = state_fractions(states[i:i + size, j:j + size])
        majority = STATE_ORDER[int(np.argmax(fractions))]
        patches.append(Patch(pixels=source[i:i + size, j:j + size].copy(),
                             fractions=fractions, majority_label=majority))
    return patches


# ---------------------------------------------------------------------------
# serialization

def _canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def _physics_payload(device: DeviceSpec) -> dict:
    p = device.physics
    return {
        "attempt_rate_coef": p.attempt_rate_coef,
        "barrier_current": p.barrier_current,
        "barrier_tunnel_rate": p.barrier_tunnel_rate,
        "beta": p.beta,
        "bias": p.bias,
        "c_k": p.c_k,
        "D": 2,
        "epsilon_0": p.epsilon_0,
        "g_0": p.g_0,
        "gates": {
            "alpha": [g.alpha for g in device.gates],
            "h": [g.h for g in device.gates],
            "mean": [g.x0 for g in device.gates],
            "peak": [g.peak for g in device.gates],
            "rho": [g.r0 for g in device.gates],
            "screen": [g.screen for g in device.gates],
        },
        "K_0": p.K_0,
        "kT": p.kT,
        "mu": p.mu,
        "sensor_gate_coeff": p.sensor_gate_coeff,
        "sensors": [list(s) for s in p.sensors],
        "short_circuit_current": p.short_circuit_current,
        "sigma": p.sigma,
        "V_L": p.V_L,
        "V_R": p.V_R,
        "WKB_coeff": p.WKB_coeff,
        "x": [float(v) for v in device.grid],
    }


def _device_from_physics(physics: dict) -> DeviceSpec:
    gates_payload = physics["gates"]
    gates = tuple(
        GateSpec(peak=gates_payload["peak"][i], x0=gates_payload["mean"][i],
                 h=gates_payload["h"][i], r0=gates_payload["rho"][i],
                 screen=gates_payload["screen"][i], alpha=gates_payload["alpha"][i])
        for i in range(len(GATE_NAMES))
    )
    params = PhysicsParams(
        K_0=physics["K_0"], sigma=physics["sigma"], g_0=physics["g_0"],
        c_k=physics["c_k"], beta=physics["beta"], mu=physics["mu"],
        kT=physics["kT"], bias=physics["bias"], V_L=physics["V_L"],
        V_R=physics["V_R"], WKB_coeff=physics["WKB_coeff"],
        attempt_rate_coef=physics["attempt_rate_coef"],
        barrier_tunnel_rate=physics["barrier_tunnel_rate"],
        barrier_current=physics["barrier_current"],
        short_circuit_current=physics["short_circuit_current"],
        sensor_gate_coeff=physics["sensor_gate_coeff"],
        sensors=tuple(tuple(s) for s in physics["sensors"]),
        epsilon_0=physics["epsilon_0"],
    )
    return DeviceSpec(gates=gates, grid=np.array(physics["x"], dtype=float),
                      physics=params)


def serialize(device_map: DeviceMap) -> str:
    """Canonical JSON text for one device map."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "type": MAP_TYPE,
        "V_P1_vec": list(device_map.v_p1),
        "V_P2_vec": list(device_map.v_p2),
        "physics": _physics_payload(device_map.device),
        "output": {
            "charge": device_map.charge_columns().tolist(),
            "current": [r.current for r in device_map.records],
            "sensor": [list(r.sensor) for r in device_map.records],
            "state": [r.state for r in device_map.records],
        },
        "diagnostics": list(device_map.diagnostics),
    }
    return _canonical_json(payload)


def deserialize(text: str) -> DeviceMap:
    """Rebuild a DeviceMap from serialized text; exact round-trip inverse."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a valid map file: {exc}") from exc
    for key in ("schema_version", "type", "V_P1_vec", "V_P2_vec", "physics", "output"):
        if key not in payload:
            raise SchemaError(f"map file missing key {key!r}")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {payload['schema_version']!r} "
                          f"(expected {SCHEMA_VERSION})")
    output = payload["output"]
    v1 = tuple(payload["V_P1_vec"])
    v2 = tuple(payload["V_P2_vec"])
    n_pixels = len(v1) * len(v2)
    columns = (output["charge"], output["current"], output["sensor"], output["state"])
    if any(len(col) != n_pixels for col in columns):
        raise SchemaError(f"output columns must all have length {n_pixels}")
    records = []
    for charge, current, sensor, state in zip(*columns):
        width = 2 if state == 2 else 1
        records.append(PixelRecord(charge=tuple(int(c) for c in charge[:width]),
                                   current=float(current),
                                   sensor=tuple(float(s) for s in sensor),
                                   state=int(state)))
    return DeviceMap(v_p1=v1, v_p2=v2, records=tuple(records),
                     device=_device_from_physics(payload["physics"]),
                     diagnostics=tuple(payload.get("diagnostics", [])))


def save_map(device_map: DeviceMap, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(device_map))


def load_map(path) -> DeviceMap:
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())


def save_patches(patches: list[Patch], channel: str, seed: int, path,
                 source: list[str] | None = None) -> None:
    """Flat patch container: per-patch flattened pixels, fractions, label."""
    if not patches:
        raise ValueError("no patches to save")
    size = patches[0].pixels.shape[0]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "type": PATCH_TYPE,
        "channel": channel,
        "patch_size": size,
        "seed": seed,
        "source": source or [],
        "pixels": [p.pixels.ravel().tolist() for p in patches],
        "fractions": [list(p.fractions) for p in patches],
        "majority": [p.majority_label for p in patches],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_canonical_json(payload))


def load_patches(path) -> list[Patch]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("type") != PATCH_TYPE:
        raise SchemaError(f"{path} is not a patch container")
    size = payload["patch_size"]
    patches = []
    for pixels, fractions, majority in zip(payload["pixels"], payload["fractions"],
                                           payload["majority"]):
        patches.append(Patch(pixels=np.array(pixels, dtype=float).reshape(size, size),
                             fractions=tuple(fractions), majority_label=majority))
    return patches


# ---------------------------------------------------------------------------
# ensembles

def device_seed(seed: int, index: int) -> int:
    """Per-device seed: first 8 bytes of sha256(f"{seed}:{index}"), big-endian."""
    digest = hashlib.sha256(f"{seed}:{index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def _map_summary(device_map: DeviceMap) -> dict:
    states = device_map.state_map()
    return {
        "labels": {str(s): int(np.count_nonzero(states == s)) for s in STATE_ORDER},
        "max_charge": int(max(max(r.charge) for r in device_map.records)),
        "diagnostics": len(device_map.diagnostics),
    }


def generate_ensemble(mean: DeviceSpec, count: int, seed: int, output_dir,
                      grid_size: int = DEFAULT_GRID,
                      v_range: tuple[float, float] = DEFAULT_V_RANGE,
                      config: SolverConfig | None = None,
                      threshold: float = DEFAULT_THRESHOLD,
                      workers: int = 1) -> dict:
    """Sample ``count`` devices around ``mean``, sweep and store each one.

    Writes device_###.json per device plus manifest.json listing files,
    seeds, and per-map summaries. Deterministic for fixed (seed, count):
    per-device seeds derive from sha256(seed, index), independent of worker
    scheduling. I/O failures abort after writing a partial manifest.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    os.makedirs(output_dir, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "type": MANIFEST_TYPE,
        "seed": seed,
        "count": count,
        "grid": grid_size,
        "v_range": list(v_range),
        "entries": [],
    }
    manifest_path = os.path.join(output_dir, "manifest.json")
    try:
        for index in range(count):
            dev_seed = device_seed(seed, index)
            device = sample_device(mean, dev_seed)
            device_map = sweep_map(device, grid_size=grid_size, v_range=v_range,
                                   config=config, threshold=threshold,
                                   workers=workers)
            filename = f"device_{index:03d}.json"
            save_map(device_map, os.path.join(output_dir, filename))
            manifest["entries"].append({
                "index": index,
                "seed": dev_seed,
                "file": filename,
                "summary": _map_summary(device_map),
            })
    except OSError as exc:
        manifest["error"] = f"aborted: {exc}"
        with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_canonical_json(manifest))
        raise
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_canonical_json(manifest))
    return manifest

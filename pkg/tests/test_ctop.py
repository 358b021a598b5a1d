import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tacosim import ctop


@pytest.fixture
def small_instance():
    return ctop.generate_scenario(3, 5, 3, grid=4, horizon=8, seed=22)


class TestBundleCodec:
    def test_bundle_count(self, small_instance):
        assert small_instance.n_choices == 3**5 == 243

    @given(index=st.integers(0, 242))
    def test_bijection(self, index):
        assert ctop.encode_bundle(ctop.decode_bundle(index, 3, 5), 3) == index

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            ctop.decode_bundle(243, 3, 5)


class TestOccupancy:
    def test_empty_flights(self):
        inst = ctop.CtopInstance(
            sectors=(ctop.Sector(0, 1, 0, 1),), grid=2, horizon=3, flights=()
        )
        assert not np.any(ctop.occupancy(inst, 0, []))

    def test_single_waypoint(self):
        # one flight, one waypoint at bin 2 landing in cell 7 of a 4x4 grid
        traj = ((0.8, 0.3, 2),)  # col 3, row 1 -> cell 7
        inst = ctop.CtopInstance(
            sectors=(ctop.Sector(0, 1, 0, 1),),
            grid=4,
            horizon=4,
            flights=(ctop.Flight(departure=2, options=(traj,)),),
        )
        counts = ctop.occupancy(inst, 0, [0])
        assert counts[2, 7] == 1
        assert counts.sum() == 1

    def test_two_identical_flights_double(self):
        traj = ((0.1, 0.1, 0), (0.6, 0.6, 1))
        flight = ctop.Flight(departure=0, options=(traj,))
        one = ctop.CtopInstance(
            sectors=(ctop.Sector(0, 1, 0, 1),), grid=3, horizon=2, flights=(flight,)
        )
        two = ctop.CtopInstance(
            sectors=(ctop.Sector(0, 1, 0, 1),), grid=3, horizon=2, flights=(flight, flight)
        )
        assert np.array_equal(
            ctop.occupancy(two, 0, [0, 0]), 2 * ctop.occupancy(one, 0, [0])
        )

    def test_subset_restriction(self):
        traj = ((0.1, 0.1, 0),)
        flight = ctop.Flight(departure=0, options=(traj,))
        inst = ctop.CtopInstance(
            sectors=(ctop.Sector(0, 1, 0, 1),), grid=2, horizon=1, flights=(flight, flight)
        )
        assert ctop.occupancy(inst, 0, [0, 0], include=[1]).sum() == 1


class TestEigenComplexity:
    def test_zero_matrix(self):
        assert ctop.eigen_complexity(np.zeros((4, 9))) == 0.0

    def test_constant_occupancy(self):
        assert ctop.eigen_complexity(np.full((5, 4), 3.0)) == 0.0

    def test_rank_one_variance(self):
        # single varying cell: covariance is 1x1-supported, lambda = variance
        x = np.zeros((4, 3))
        x[:, 1] = [0.0, 2.0, 0.0, 2.0]
        v = np.var(x[:, 1])  # population variance, 1/T normalization
        assert ctop.eigen_complexity(x) == pytest.approx(v, rel=1e-9)

    def test_nonnegative_and_matches_eigh(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            g = int(rng.integers(2, 5))
            t = int(rng.integers(2, 10))
            x = rng.integers(0, 4, size=(t, g * g)).astype(float)
            lam = ctop.eigen_complexity(x)
            xc = x - x.mean(axis=0)
            cov = xc.T @ xc / t
            expected = float(np.linalg.eigvalsh(cov)[-1])
            assert lam >= 0
            if expected > 0:
                assert abs(lam - expected) <= 1e-6 * expected
            else:
                assert lam == 0.0

    def test_permutation_invariance_in_cells(self):
        rng = np.random.default_rng(11)
        x = rng.integers(0, 5, size=(6, 8)).astype(float)
        perm = rng.permutation(8)
        assert ctop.eigen_complexity(x) == pytest.approx(
            ctop.eigen_complexity(x[:, perm]), rel=1e-9
        )

    def test_degenerate_leading_pair(self):
        # two independent identical-variance cells: repeated top eigenvalue
        x = np.zeros((4, 2))
        x[:, 0] = [0, 2, 0, 2]
        x[:, 1] = [2, 0, 2, 0]
        expected = float(np.linalg.eigvalsh((x - x.mean(0)).T @ (x - x.mean(0)) / 4)[-1])
        assert ctop.eigen_complexity(x) == pytest.approx(expected, rel=1e-6)


class TestCostOracle:
    def test_avoiding_flight_leaves_cost_unchanged(self):
        # flight 1's option 0 stays in sector 1's half; sector 0's cost i unchanged
        sectors = (ctop.Sector(0, 0.5, 0, 1), ctop.Sector(0.5, 1, 0, 1))
        f0 = ctop.Flight(departure=0, options=(((0.2, 0.5, 0), (0.3, 0.6, 1)),))
        f1 = ctop.Flight(departure=0, options=(((0.7, 0.5, 0), (0.8, 0.6, 1)),))
        inst_one = ctop.CtopInstance(sectors=sectors, grid=4, horizon=3, flights=(f0,))
        inst_two = ctop.CtopInstance(sectors=sectors, grid=4, horizon=3, flights=(f0, f1))
        assert ctop.bundle_cost(inst_two, 0, [0, 0]) == pytest.approx(
            ctop.bundle_cost(inst_one, 0, [0])
        )


class TestGenerator:
    def test_deterministic_byte_identical(self, tmp_path):
        a = ctop.generate_scenario(3, 5, 3, seed=42)
        b = ctop.generate_scenario(3, 5, 3, seed=42)
        assert a == b
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        ctop.save_instance(a, pa)
        ctop.save_instance(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_different_seeds_differ(self):
        assert ctop.generate_scenario(3, 5, 3, seed=1) != ctop.generate_scenario(3, 5, 3, seed=2)

    def test_every_trajectory_crosses_a_sector(self):
        for seed in range(100):
            inst = ctop.generate_scenario(3, 2, 2, seed=seed)
            assert inst.validate() == []

    def test_counts_validated(self):
        with pytest.raises(ValueError):
            ctop.generate_scenario(0, 5, 3)
        with pytest.raises(ValueError):
            ctop.generate_scenario(3, 5, 3, horizon=3)


class TestInstanceIO:
    def test_round_trip(self, tmp_path, small_instance):
        path = tmp_path / "inst.json"
        ctop.save_instance(small_instance, path)
        assert ctop.load_instance(path) == small_instance

    def test_missing_flights_key(self, tmp_path):
        path = tmp_path / "bad.json"
        data = ctop.instance_to_dict(ctop.generate_scenario(2, 2, 2, seed=0))
        del data["flights"]
        path.write_text(json.dumps(data))
        with pytest.raises(ctop.SchemaError, match="flights"):
            ctop.load_instance(path)

    def test_option_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.json"
        data = ctop.instance_to_dict(ctop.generate_scenario(2, 2, 2, seed=0))
        data["flights"][1]["options"] = data["flights"][1]["options"][:1]
        path.write_text(json.dumps(data))
        with pytest.raises(ctop.SchemaError, match="options"):
            ctop.load_instance(path)

    def test_waypoint_outside_map(self, tmp_path):
        path = tmp_path / "bad.json"
        data = ctop.instance_to_dict(ctop.generate_scenario(2, 2, 2, seed=0))
        data["flights"][0]["options"][0][0][0] = 1.5
        path.write_text(json.dumps(data))
        with pytest.raises(ctop.SchemaError, match="unit square"):
            ctop.load_instance(path)

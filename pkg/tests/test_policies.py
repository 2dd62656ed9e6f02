import math

import numpy as np
import pytest

from activenav.errors import EmptyDatasetError
from activenav.fields import AngularLobe, ConfidenceField
from activenav.geometry import Pose, Proposal, WorldConfig, make_grid, observe, pose_at
from activenav.labels import NavigationLabel, generate_dataset
from activenav.network import init_net
from activenav.policies import (
    DirectionClass,
    class_centroid,
    load_classifier,
    policy_oracle,
    policy_random,
    policy_regression,
    policy_static,
    quantize_label,
    save_classifier,
    softmax,
    train_classifier,
)


def small_dataset(obs_dim=8):
    world = WorldConfig(grid=make_grid(12, 4, 1.0, 6.0), obs_dim=obs_dim)
    field = ConfidenceField(lobes=(AngularLobe(1.0, 0.6, 0.95),),
                            r_half=3.0, r_slope=1.0, bias=0.02)
    return generate_dataset(world, field, p_thres=0.85)


class TestStaticPolicy:
    def test_always_zero(self):
        policy = policy_static()
        rng = np.random.default_rng(0)
        for _ in range(10):
            prop = policy.propose(rng.normal(size=8), Pose(1.0, 2.0), rng)
            assert prop == Proposal(0.0, 0.0)


class TestRandomPolicy:
    def setup_method(self):
        self.grid = make_grid(8, 5, 1.0, 10.0)

    def test_deterministic_per_seed(self):
        a = policy_random(self.grid, seed=3)
        b = policy_random(self.grid, seed=3)
        for _ in range(5):
            assert a.propose(None, None) == b.propose(None, None)

    def test_uses_supplied_stream(self):
        policy = policy_random(self.grid, seed=3)
        r1 = np.random.default_rng(77)
        r2 = np.random.default_rng(77)
        assert policy.propose(None, None, r1) == policy.propose(None, None, r2)

    def test_mean_near_zero(self):
        policy = policy_random(self.grid, seed=5)
        draws = [policy.propose(None, None) for _ in range(10000)]
        assert abs(np.mean([d.dtheta for d in draws])) < 0.1
        assert abs(np.mean([d.dr for d in draws])) < 0.25

    def test_bounds(self):
        policy = policy_random(self.grid, seed=6)
        span = self.grid.radial_span
        for _ in range(1000):
            prop = policy.propose(None, None)
            assert -math.pi <= prop.dtheta <= math.pi
            assert -span <= prop.dr <= span


class TestQuantize:
    def test_fig_example(self):
        cls = quantize_label(NavigationLabel(0.40, 0.0))
        assert (cls.theta_bin, cls.r_bin) == (1, 0)

    def test_zero_label(self):
        cls = quantize_label(NavigationLabel(0.0, 0.0))
        assert (cls.theta_bin, cls.r_bin) == (0, 0)

    def test_large_bins(self):
        cls = quantize_label(NavigationLabel(-2.0, 30.0))
        assert (cls.theta_bin, cls.r_bin) == (-2, 2)

    def test_boundaries_inclusive(self):
        assert quantize_label(NavigationLabel(0.05, 0.5)).theta_bin == 0
        assert quantize_label(NavigationLabel(0.05, 0.5)).r_bin == 0
        assert quantize_label(NavigationLabel(0.5, 5.0)).theta_bin == 1
        assert quantize_label(NavigationLabel(0.5, 5.0)).r_bin == 1

    def test_index_round_trip(self):
        for tb in range(-2, 3):
            for rb in range(-2, 3):
                cls = DirectionClass(tb, rb)
                assert DirectionClass.from_index(cls.index) == cls


class TestClassCentroid:
    def setup_method(self):
        self.grid = make_grid(8, 5, 1.0, 10.0)

    def test_mean_of_members(self):
        labels = [NavigationLabel(0.2, 0.0), NavigationLabel(0.4, 0.0),
                  NavigationLabel(2.0, 0.0)]  # third falls in bin +2
        prop = class_centroid(DirectionClass(1, 0), labels, self.grid)
        assert prop.dtheta == pytest.approx(0.3)
        assert prop.dr == pytest.approx(0.0)

    def test_empty_class_midpoint(self):
        prop = class_centroid(DirectionClass(1, 0), [], self.grid)
        assert prop.dtheta == pytest.approx((0.05 + 0.5) / 2)
        assert prop.dr == 0.0
        prop = class_centroid(DirectionClass(-2, 2), [], self.grid)
        assert prop.dtheta == pytest.approx(-(0.5 + math.pi) / 2)
        assert prop.dr == pytest.approx((5.0 + self.grid.radial_span) / 2)


class TestSoftmax:
    def test_sums_to_one(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            probs = softmax(rng.normal(scale=5.0, size=25))
            assert probs.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(probs >= 0.0)

    def test_argmax_shift_invariant(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            logits = rng.normal(size=25)
            assert np.argmax(softmax(logits)) == np.argmax(softmax(logits + 123.4))


class TestClassifier:
    def test_single_class_dataset(self):
        # constant field above threshold -> every label (0, 0) -> one class
        world = WorldConfig(grid=make_grid(8, 3, 1.0, 3.0), obs_dim=8)
        field = ConfidenceField(lobes=(AngularLobe(0.0, 1e6, 1.0),),
                                r_half=1e9, r_slope=1.0)
        dataset = generate_dataset(world, field, p_thres=0.5)
        policy, report = train_classifier(dataset, epochs=30, seed=0)
        want = DirectionClass(0, 0)
        for rec in dataset.records:
            assert policy.predict_class(rec.observation) == want
        assert report.train_accuracy == 1.0

    def test_learns_labels(self):
        dataset = small_dataset()
        policy, report = train_classifier(dataset, epochs=500, seed=0)
        assert report.train_accuracy > 0.95
        assert all(np.isfinite(l) for l in report.epoch_losses)

    def test_deterministic(self):
        dataset = small_dataset()
        a, _ = train_classifier(dataset, epochs=10, seed=4)
        b, _ = train_classifier(dataset, epochs=10, seed=4)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_empty_dataset_rejected(self):
        dataset = small_dataset()
        empty = type(dataset)(world=dataset.world, field=dataset.field,
                              p_thres=dataset.p_thres,
                              radial_weight=dataset.radial_weight,
                              noise_seed=dataset.noise_seed, records=[])
        with pytest.raises(EmptyDatasetError):
            train_classifier(empty)

    def test_round_trip(self, tmp_path):
        dataset = small_dataset()
        policy, _ = train_classifier(dataset, epochs=10, seed=0)
        path = tmp_path / "classifier.json"
        save_classifier(policy, path)
        back = load_classifier(path)
        for wa, wb in zip(policy.weights, back.weights):
            np.testing.assert_array_equal(wa, wb)
        assert back.centroids == policy.centroids
        obs = dataset.records[3].observation
        assert back.propose(obs, None) == policy.propose(obs, None)


class TestRegressionPolicy:
    def test_wraps_predict_proposal(self):
        grid = make_grid(8, 3, 1.0, 3.0)
        net = init_net([8, 4, 2], seed=0)
        for w in net.weights:
            w[:] = 0.0
        policy = policy_regression(net, grid)
        prop = policy.propose(np.zeros(8), Pose(0, 2))
        assert prop == Proposal(0.0, 0.0)

    def test_bounds(self):
        grid = make_grid(8, 3, 1.0, 3.0)
        net = init_net([8, 16, 2], seed=1)
        policy = policy_regression(net, grid)
        rng = np.random.default_rng(3)
        for _ in range(100):
            prop = policy.propose(rng.normal(size=8), None)
            assert abs(prop.dtheta) < math.pi
            assert abs(prop.dr) < grid.radial_span


class TestOraclePolicy:
    def test_exact_lookup_at_grid_points(self):
        dataset = small_dataset()
        policy = policy_oracle(dataset)
        world = dataset.world
        for rec in dataset.records[::7]:
            obs = observe(world, rec.pose, 0)
            prop = policy.propose(obs, rec.pose)
            assert prop.dtheta == rec.label.dtheta
            assert prop.dr == rec.label.dr

    def test_snaps_off_grid_poses(self):
        dataset = small_dataset()
        grid = dataset.world.grid
        policy = policy_oracle(dataset)
        rec = dataset.records[9]
        nudged = Pose(rec.pose.theta + 0.3 * grid.angle_step,
                      rec.pose.r + 0.3 * grid.radius_step)
        prop = policy.propose(None, nudged)
        assert prop.dtheta == rec.label.dtheta
        assert prop.dr == rec.label.dr

    def test_clamps_out_of_bounds(self):
        dataset = small_dataset()
        grid = dataset.world.grid
        policy = policy_oracle(dataset)
        prop = policy.propose(None, Pose(0.0, grid.r_max + 50.0))
        edge = next(r for r in dataset.records
                    if r.angle_idx == 0 and r.radius_idx == grid.n_radii - 1)
        assert prop.dtheta == edge.label.dtheta

    def test_requires_complete_dataset(self):
        dataset = small_dataset()
        partial = type(dataset)(world=dataset.world, field=dataset.field,
                                p_thres=dataset.p_thres,
                                radial_weight=dataset.radial_weight,
                                noise_seed=dataset.noise_seed,
                                records=dataset.records[:5])
        with pytest.raises(EmptyDatasetError):
            policy_oracle(partial)

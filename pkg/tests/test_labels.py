import json
import math

import numpy as np
import pytest

from activenav.errors import DataFormatError, FieldError, GridError
from activenav.fields import AngularLobe, ConfidenceField, confidence, export_manifold
from activenav.geometry import Pose, WorldConfig, make_grid, pose_at
from activenav.labels import (
    NavigationLabel,
    denormalize,
    generate_dataset,
    label_from_target,
    nearest_above,
    normalize,
    read_dataset,
    write_dataset,
)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Independent brute-force oracle: plain-python scan over every grid point with
# explicit tie-break comparisons. Kept structurally separate from the library
# implementation on purpose.

def brute_force_nearest(values, grid, source, p_thres, radial_weight):
    sa, sr = source
    r_source = grid.r_min + sr * grid.radius_step
    best_key = None
    best = None
    argmax = None
    argmax_p = -1.0
    for ai in range(grid.n_angles):
        k = (ai - sa) % grid.n_angles
        if k > grid.n_angles // 2:
            k -= grid.n_angles
        dtheta = k * grid.angle_step
        if dtheta > math.pi:
            dtheta = math.pi
        elif dtheta < -math.pi:
            dtheta = -math.pi
        for ri in range(grid.n_radii):
            p = values[ai][ri]
            if p > argmax_p:
                argmax_p = p
                argmax = (ai, ri)
            if p < p_thres:
                continue
            dr = (grid.r_min + ri * grid.radius_step) - r_source
            arc = dtheta * r_source
            rad = radial_weight * dr
            d2 = arc * arc + rad * rad
            key = (d2, dtheta <= 0.0, abs(dr), dr <= 0.0)
            if best_key is None or key < best_key:
                best_key = key
                best = (ai, ri)
    if best is None:
        return argmax, False
    return best, True


def random_field(rng):
    n_lobes = int(rng.integers(1, 4))
    lobes = tuple(
        AngularLobe(mu=float(rng.uniform(0, TWO_PI)),
                    sigma=float(rng.uniform(0.2, 2.0)),
                    weight=float(rng.uniform(0.3, 1.0)))
        for _ in range(n_lobes)
    )
    return ConfidenceField(lobes=lobes,
                           r_half=float(rng.uniform(2.0, 40.0)),
                           r_slope=float(rng.uniform(0.5, 10.0)),
                           bias=float(rng.uniform(0.0, 0.2)))


class TestNearestAbove:
    def test_source_already_above(self):
        field = ConfidenceField(lobes=(AngularLobe(0.0, 1e6, 1.0),),
                                r_half=1e9, r_slope=1.0)
        grid = make_grid(8, 3, 1.0, 3.0)
        target, reachable = nearest_above(field, grid, (3, 1), p_thres=0.5)
        assert target == (3, 1) and reachable

    def test_positive_rotation_tie_break(self):
        # single-radius circle, two qualifying points at equal arc distance:
        # two steps forward beats two steps backward
        confs = [0.5, 0.6, 0.95, 0.5, 0.5, 0.5, 0.92, 0.5]
        field = _circle_field(confs)
        grid = make_grid(8, 1, 5.0, 5.0)
        values = export_manifold(field, grid).values
        np.testing.assert_allclose(values[:, 0], confs, atol=1e-9)
        target, reachable = nearest_above(field, grid, (0, 0), p_thres=0.9)
        assert reachable
        assert target == (2, 0)

    def test_unreachable_falls_back_to_argmax(self):
        confs = [0.1, 0.2, 0.7, 0.3, 0.1, 0.2, 0.4, 0.1]
        field = _circle_field(confs)
        grid = make_grid(8, 1, 5.0, 5.0)
        target, reachable = nearest_above(field, grid, (0, 0), p_thres=0.9)
        assert not reachable
        assert target == (2, 0)

    def test_invalid_inputs(self):
        field = _circle_field([0.5] * 8)
        grid = make_grid(8, 1, 5.0, 5.0)
        with pytest.raises(GridError):
            nearest_above(field, grid, (8, 0), p_thres=0.9)
        with pytest.raises(FieldError):
            nearest_above(field, grid, (0, 0), p_thres=1.5)
        with pytest.raises(FieldError):
            nearest_above(field, grid, (0, 0), p_thres=0.9, radial_weight=0.0)

    def test_matches_brute_force_on_random_fields(self):
        rng = np.random.default_rng(2024)
        for trial in range(6):
            n_angles = int(rng.integers(2, 16))
            n_radii = int(rng.integers(1, 10))
            r_min = float(rng.uniform(0.5, 3.0))
            r_max = r_min + float(rng.uniform(0.0, 30.0))
            grid = make_grid(n_angles, n_radii, r_min, r_max)
            field = random_field(rng)
            p_thres = float(rng.uniform(0.2, 0.95))
            w = float(rng.uniform(0.25, 3.0))
            values = export_manifold(field, grid).values
            for sa in range(n_angles):
                for sr in range(n_radii):
                    got = nearest_above(field, grid, (sa, sr), p_thres, w)
                    want = brute_force_nearest(values, grid, (sa, sr), p_thres, w)
                    assert got == want, (trial, sa, sr)


def _circle_field(confs):
    """A field whose single-radius manifold approximates the given values:
    narrow lobes centered on each grid angle."""
    n = len(confs)
    step = TWO_PI / n
    lobes = tuple(AngularLobe(mu=i * step, sigma=step / 12.0, weight=c)
                  for i, c in enumerate(confs))
    return ConfidenceField(lobes=lobes, r_half=1e9, r_slope=1.0, bias=0.0)


class TestLabelFromTarget:
    def setup_method(self):
        self.grid = make_grid(8, 3, 1.0, 3.0)

    def test_forward_rotation(self):
        label = label_from_target(self.grid, (0, 0), (2, 0))
        assert label.dtheta == pytest.approx(math.pi / 2)
        assert label.dr == 0.0

    def test_self_target(self):
        label = label_from_target(self.grid, (3, 1), (3, 1))
        assert label.dtheta == 0.0 and label.dr == 0.0

    def test_wraps_to_shortest_signed(self):
        # one step back across the wrap: -step, not +7 steps
        label = label_from_target(self.grid, (0, 0), (7, 0))
        assert label.dtheta == pytest.approx(-self.grid.angle_step)

    def test_antipode_positive(self):
        label = label_from_target(self.grid, (1, 0), (5, 0))
        assert label.dtheta == pytest.approx(math.pi)
        assert label.dtheta > 0

    def test_radial_component(self):
        label = label_from_target(self.grid, (0, 2), (0, 0))
        assert label.dr == pytest.approx(-2.0)

    def test_bounds(self):
        grid = make_grid(7, 4, 1.0, 9.0)
        for sa in range(7):
            for ta in range(7):
                label = label_from_target(grid, (sa, 0), (ta, 3))
                assert abs(label.dtheta) <= math.pi
                assert abs(label.dr) <= grid.radial_span


class TestNormalize:
    def setup_method(self):
        self.grid = make_grid(76, 65, 1.0, 60.0)

    def test_zero_label_is_midpoint(self):
        assert normalize(NavigationLabel(0.0, 0.0), self.grid) == (0.5, 0.5)

    def test_upper_bound(self):
        span = self.grid.radial_span
        u, v = normalize(NavigationLabel(math.pi, span), self.grid)
        assert u == 1.0 and v == 1.0

    def test_fig_example(self):
        u, v = normalize(NavigationLabel(0.40, 0.0), self.grid)
        assert u == pytest.approx((0.40 + math.pi) / TWO_PI)
        assert v == 0.5

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        span = self.grid.radial_span
        for _ in range(200):
            label = NavigationLabel(float(rng.uniform(-math.pi, math.pi)),
                                    float(rng.uniform(-span, span)))
            dtheta, dr = denormalize(normalize(label, self.grid), self.grid)
            assert dtheta == pytest.approx(label.dtheta, abs=1e-12)
            assert dr == pytest.approx(label.dr, abs=1e-12)

    def test_single_radius_grid(self):
        grid = make_grid(8, 1, 5.0, 5.0)
        u, v = normalize(NavigationLabel(0.3, 0.0), grid)
        assert v == 0.5
        assert denormalize((u, v), grid)[1] == 0.0


class TestGenerateDataset:
    def test_record_count_paper_grid(self):
        world = WorldConfig(grid=make_grid(76, 65, 1.0, 60.0))
        field = ConfidenceField(lobes=(AngularLobe(math.pi / 2, 0.5, 0.95),),
                                r_half=20.0, r_slope=5.0, bias=0.03)
        dataset = generate_dataset(world, field, p_thres=0.9)
        assert len(dataset) == 4940
        # angle-major ordering
        assert dataset.records[0].angle_idx == 0
        assert dataset.records[64].radius_idx == 64
        assert dataset.records[65].angle_idx == 1

    def test_constant_field_all_zero_labels(self):
        world = WorldConfig(grid=make_grid(8, 3, 1.0, 3.0))
        field = ConfidenceField(lobes=(AngularLobe(0.0, 1e6, 1.0),),
                                r_half=1e9, r_slope=1.0)
        dataset = generate_dataset(world, field, p_thres=0.5)
        for rec in dataset.records:
            assert rec.label.dtheta == 0.0 and rec.label.dr == 0.0
            assert rec.label.reachable

    def test_circle_labels_match_brute_force(self):
        confs = [0.5, 0.6, 0.95, 0.5, 0.5, 0.5, 0.92, 0.5]
        field = _circle_field(confs)
        grid = make_grid(8, 1, 5.0, 5.0)
        world = WorldConfig(grid=grid)
        values = export_manifold(field, grid).values
        dataset = generate_dataset(world, field, p_thres=0.9)
        for rec in dataset.records:
            target, reachable = brute_force_nearest(
                values, grid, (rec.angle_idx, rec.radius_idx), 0.9, 1.0)
            expected = label_from_target(grid, (rec.angle_idx, rec.radius_idx),
                                         target, reachable)
            assert rec.label == expected

    def test_zero_label_and_fixed_point_properties(self):
        world = WorldConfig(grid=make_grid(20, 12, 1.0, 30.0))
        field = ConfidenceField(lobes=(AngularLobe(1.0, 0.6, 0.95),),
                                r_half=15.0, r_slope=4.0, bias=0.02)
        grid = world.grid
        dataset = generate_dataset(world, field, p_thres=0.9)
        assert any(r.label.reachable for r in dataset.records)
        for rec in dataset.records:
            if rec.p >= 0.9:
                assert rec.label.dtheta == 0.0 and rec.label.dr == 0.0
            if rec.label.reachable:
                landed = Pose(rec.pose.theta + rec.label.dtheta,
                              grid.clamp_r(rec.pose.r + rec.label.dr))
                ai, ri = grid.snap(landed)
                assert confidence(field, pose_at(grid, ai, ri)) >= 0.9

    def test_deterministic(self):
        world = WorldConfig(grid=make_grid(8, 3, 1.0, 3.0), obs_noise_sigma=0.2)
        field = _circle_field([0.5] * 8)
        a = generate_dataset(world, field, noise_seed=7)
        b = generate_dataset(world, field, noise_seed=7)
        for ra, rb in zip(a.records, b.records):
            np.testing.assert_array_equal(ra.observation, rb.observation)
            assert ra.label == rb.label


class TestDatasetIO:
    def _dataset(self):
        world = WorldConfig(grid=make_grid(8, 3, 1.0, 3.0), obs_dim=8)
        field = ConfidenceField(lobes=(AngularLobe(0.5, 0.8, 0.9),),
                                r_half=2.5, r_slope=0.7, bias=0.05)
        return generate_dataset(world, field, p_thres=0.8, noise_seed=3)

    def test_round_trip_fields(self, tmp_path):
        dataset = self._dataset()
        path = tmp_path / "dataset.jsonl"
        write_dataset(dataset, path)
        back = read_dataset(path)
        assert len(back) == len(dataset)
        assert back.p_thres == dataset.p_thres
        assert back.world.grid == dataset.world.grid
        assert back.world.obs_dim == dataset.world.obs_dim
        assert back.field == dataset.field
        for ra, rb in zip(dataset.records, back.records):
            assert (ra.angle_idx, ra.radius_idx) == (rb.angle_idx, rb.radius_idx)
            assert rb.p == pytest.approx(ra.p, rel=1e-8)
            assert rb.label.dtheta == pytest.approx(ra.label.dtheta, rel=1e-8, abs=1e-12)
            assert rb.label.dr == pytest.approx(ra.label.dr, rel=1e-8, abs=1e-12)
            assert rb.label.reachable == ra.label.reachable
            np.testing.assert_allclose(rb.observation, ra.observation, rtol=1e-8)

    def test_write_is_idempotent_after_read(self, tmp_path):
        # 9-significant-digit rounding is a fixed point of write -> read -> write
        dataset = self._dataset()
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        write_dataset(dataset, first)
        write_dataset(read_dataset(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_truncated_record_names_line(self, tmp_path):
        dataset = self._dataset()
        path = tmp_path / "dataset.jsonl"
        write_dataset(dataset, path)
        lines = path.read_text().splitlines()
        lines[3] = lines[3][: len(lines[3]) // 2]
        broken = tmp_path / "broken.jsonl"
        broken.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataFormatError, match="line 4"):
            read_dataset(broken)

    def test_missing_key_names_line(self, tmp_path):
        dataset = self._dataset()
        path = tmp_path / "dataset.jsonl"
        write_dataset(dataset, path)
        lines = path.read_text().splitlines()
        row = json.loads(lines[2])
        del row["obs"]
        lines[2] = json.dumps(row)
        broken = tmp_path / "broken.jsonl"
        broken.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataFormatError, match="line 3.*obs"):
            read_dataset(broken)

    def test_header_only_file(self, tmp_path):
        dataset = self._dataset()
        empty = type(dataset)(world=dataset.world, field=dataset.field,
                              p_thres=dataset.p_thres,
                              radial_weight=dataset.radial_weight,
                              noise_seed=dataset.noise_seed, records=[])
        path = tmp_path / "empty.jsonl"
        write_dataset(empty, path)
        back = read_dataset(path)
        assert len(back) == 0
        assert back.field == dataset.field

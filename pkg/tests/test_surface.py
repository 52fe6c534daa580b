import math

import numpy as np
import pytest

from orisurface.cpg import CpgParams
from orisurface.kinematics import PlatePose, plate_polygon
from orisurface.polygons import (DegeneratePolygonError, box_footprint,
                                 convex_hull, intersection_area,
                                 polygon_area, square)
from orisurface.surface import (GridTooSmallError, ModuleGrid, assign_rotation,
                                assign_translation, contact_ratio,
                                contact_ratios, controller_step, parse_mode)

PI = math.pi
X_AXIS = PI / 2.0


def make_params(**kw):
    base = dict(h_amp=0.015, psi_amp=0.45, freq=0.5, h0=0.03, psi0=0.0,
                sigma=1.6, phi=PI, epsilon=0.3)
    base.update(kw)
    return CpgParams(**base)


class TestPolygons:
    def test_area_square(self):
        assert polygon_area(square(0.0, 0.0, 2.0)) == pytest.approx(4.0)

    def test_clip_identical(self):
        s = square(0.0, 0.0, 1.0)
        assert intersection_area(s, s) == pytest.approx(1.0)

    def test_clip_disjoint(self):
        assert intersection_area(square(0, 0, 1), square(5, 5, 1)) == 0.0

    def test_clip_half_overlap_oracle(self):
        # axis-aligned rectangles: intersection area has a closed form
        a = square(0.0, 0.0, 1.0)
        b = square(0.5, 0.0, 1.0)
        expected = max(0.0, (0.5 - 0.0 + 0.5)) * 1.0 * 0.5  # 0.5 x 1.0
        assert intersection_area(a, b) == pytest.approx(expected)

    def test_clip_quarter(self):
        assert intersection_area(square(0, 0, 2), square(1, 1, 2)) == pytest.approx(1.0)

    def test_hull_of_box(self):
        pts = [(0, 0), (1, 0), (0.5, 0.5), (1, 1), (0, 1), (0.2, 0.8)]
        hull = convex_hull(pts)
        assert abs(polygon_area(hull)) == pytest.approx(1.0)
        assert len(hull) == 4

    def test_box_footprint_flat(self):
        fp = box_footprint((0.1, 0.2, 0.5), np.eye(3), (0.15, 0.1, 0.02))
        assert abs(polygon_area(fp)) == pytest.approx(0.3 * 0.2)

    def test_box_footprint_yawed(self):
        c, s = math.cos(0.4), math.sin(0.4)
        rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        fp = box_footprint((0, 0, 0), rot, (0.1, 0.1, 0.01))
        assert abs(polygon_area(fp)) == pytest.approx(0.04, abs=1e-12)


class TestContactRatio:
    def test_full_coverage(self, geom):
        plate = plate_polygon(PlatePose(0, 0, 0.03), (0.0, 0.0), geom)
        obj = square(0.0, 0.0, 1.0)
        assert contact_ratio(plate, obj) == pytest.approx(1.0)

    def test_no_overlap(self, geom):
        plate = plate_polygon(PlatePose(0, 0, 0.03), (0.0, 0.0), geom)
        assert contact_ratio(plate, square(1.0, 1.0, 0.2)) == 0.0

    def test_half_coverage_oracle(self, geom):
        plate = plate_polygon(PlatePose(0, 0, 0.03), (0.0, 0.0), geom)
        # object edge bisecting the plate: covers x >= 0 half exactly
        obj = np.array([[0.0, -1.0], [1.0, -1.0], [1.0, 1.0], [0.0, 1.0]])
        assert contact_ratio(plate, obj) == pytest.approx(0.5)

    def test_degenerate_plate(self):
        zero = np.zeros((4, 2))
        with pytest.raises(DegeneratePolygonError):
            contact_ratio(zero, square(0, 0, 1))


class TestTranslationAssignment:
    def test_checkerboard_groups(self):
        plan = assign_translation(ModuleGrid(), "y", 1)
        g = plan.group.reshape(5, 5)
        assert g[0, 0] == 1
        assert g[0, 1] == 2
        assert g[1, 0] == 2
        assert np.sum(plan.group == 1) == 13
        assert np.sum(plan.group == 2) == 12

    def test_y_positive_direction(self):
        plan = assign_translation(ModuleGrid(), "y", 1)
        assert np.all(plan.delta_cmd == 0.0)
        assert np.all(plan.sign == 1)

    def test_x_negative_direction(self):
        plan = assign_translation(ModuleGrid(), "x", -1)
        assert np.all(plan.delta_cmd == X_AXIS)
        assert np.all(plan.sign == -1)


class TestRotationAssignment:
    def test_cw_layout_5x5(self):
        plan = assign_rotation(ModuleGrid(), "cw")
        # module (0,0): group 1, pushes +X; module (0,4): group 2, pushes -Y
        assert plan.group[0] == 1
        assert plan.delta_cmd[0] == pytest.approx(X_AXIS)
        assert plan.sign[0] == 1
        assert plan.group[4] == 2
        assert plan.delta_cmd[4] == pytest.approx(0.0)
        assert plan.sign[4] == -1

    def test_center_module_rests(self):
        plan = assign_rotation(ModuleGrid(), "cw")
        center = 2 * 5 + 2
        assert plan.rest[center]
        assert plan.rest.sum() == 1

    def test_ccw_flips_signs(self):
        cw = assign_rotation(ModuleGrid(), "cw")
        ccw = assign_rotation(ModuleGrid(), "ccw")
        live = ~cw.rest
        assert np.array_equal(ccw.sign[live], -cw.sign[live])
        assert np.array_equal(ccw.group, cw.group)
        assert np.array_equal(ccw.delta_cmd, cw.delta_cmd)

    def test_2x2_one_per_quadrant(self):
        plan = assign_rotation(ModuleGrid(rows=2, cols=2, spacing=0.12), "cw")
        assert plan.rest.sum() == 0
        combos = {(int(g), float(d), int(s))
                  for g, d, s in zip(plan.group, plan.delta_cmd, plan.sign)}
        assert combos == {(1, X_AXIS, 1), (1, X_AXIS, -1), (2, 0.0, 1), (2, 0.0, -1)}

    def test_too_small_grid(self):
        with pytest.raises(GridTooSmallError):
            assign_rotation(ModuleGrid(rows=1, cols=1), "cw")

    def test_boundary_ties_go_to_group_1(self):
        plan = assign_rotation(ModuleGrid(), "cw")
        g = plan.group.reshape(5, 5)
        # center row/column boundary modules (excluding the resting center)
        assert g[2, 0] == 1 and g[2, 4] == 1
        assert g[0, 2] == 1 and g[4, 2] == 1


class TestControllerStep:
    def test_no_object_all_rest(self, geom):
        plan = assign_translation(ModuleGrid(), "y", 1)
        p = make_params()
        commands, active = controller_step(0.7, None, plan, p, geom)
        assert not active.any()
        assert np.allclose(commands[:, 0], 0.0)
        assert np.allclose(commands[:, 1], p.psi0)
        assert np.allclose(commands[:, 2], p.h0)

    def test_center_block_activation(self, geom):
        grid = ModuleGrid()
        plan = assign_translation(grid, "y", 1)
        p = make_params(epsilon=0.3)
        # square fully covering the 3x3 center plates and no others
        fp = square(0.24, 0.24, 0.34)
        commands, active = controller_step(0.0, fp, plan, p, geom)
        expected = np.zeros((5, 5), bool)
        expected[1:4, 1:4] = True
        assert np.array_equal(active.reshape(5, 5), expected)

    def test_threshold_gate(self, geom):
        grid = ModuleGrid(rows=1, cols=1)
        plan = assign_translation(grid, "y", 1)
        # footprint covering 20% of the plate
        fp = square(0.0, -0.08, 0.1)  # overlap strip 0.02 x 0.1 = 20%
        ratio = contact_ratios(fp, grid, geom)[0]
        assert ratio == pytest.approx(0.2)
        _, active_high = controller_step(0.0, fp, plan, make_params(epsilon=0.25), geom)
        _, active_low = controller_step(0.0, fp, plan, make_params(epsilon=0.15), geom)
        assert not active_high[0]
        assert active_low[0]

    def test_activation_monotone_in_footprint(self, geom):
        grid = ModuleGrid()
        plan = assign_translation(grid, "y", 1)
        p = make_params(epsilon=0.2)
        rng = np.random.default_rng(5)
        for _ in range(20):
            side = rng.uniform(0.05, 0.4)
            cx, cy = rng.uniform(0.0, 0.48, 2)
            small = square(cx, cy, side)
            big = square(cx, cy, side + rng.uniform(0.01, 0.2))
            _, a_small = controller_step(0.0, small, plan, p, geom)
            _, a_big = controller_step(0.0, big, plan, p, geom)
            assert np.all(a_big[a_small])

    def test_stateless_replay(self, geom):
        plan = assign_translation(ModuleGrid(), "x", -1)
        p = make_params()
        fp = square(0.2, 0.3, 0.25)
        c1, a1 = controller_step(1.234, fp, plan, p, geom)
        c2, a2 = controller_step(1.234, fp, plan, p, geom)
        assert np.array_equal(c1, c2)
        assert np.array_equal(a1, a2)

    def test_commands_quantized_to_tick(self, geom):
        plan = assign_translation(ModuleGrid(), "y", 1)
        p = make_params()
        fp = square(0.24, 0.24, 0.5)
        c1, _ = controller_step(0.100, fp, plan, p, geom, controller_period=0.05)
        c2, _ = controller_step(0.149, fp, plan, p, geom, controller_period=0.05)
        c3, _ = controller_step(0.151, fp, plan, p, geom, controller_period=0.05)
        assert np.array_equal(c1, c2)
        assert not np.array_equal(c1, c3)

    def test_active_commands_follow_oscillator(self, geom):
        plan = assign_translation(ModuleGrid(), "y", 1)
        p = make_params(psi0=0.1)
        fp = square(0.24, 0.24, 0.62)  # covers everything
        t = 0.35
        commands, active = controller_step(t, fp, plan, p, geom)
        assert active.all()
        from orisurface.cpg import Direction, module_command
        for k in (0, 7, 13):
            phase = 0.0 if plan.group[k] == 1 else p.phi
            pose = module_command(0.35, p, phase, Direction(plan.delta_cmd[k], int(plan.sign[k])))
            assert commands[k, 1] == pytest.approx(pose.psi, abs=1e-12)
            assert commands[k, 2] == pytest.approx(pose.height, abs=1e-12)


def test_parse_mode_forms():
    m = parse_mode("translate:+y:fast")
    assert (m.kind, m.axis, m.sign, m.profile) == ("translate", "y", 1, "fast")
    m = parse_mode("fast:+y")
    assert (m.kind, m.axis, m.sign, m.profile) == ("translate", "y", 1, "fast")
    m = parse_mode("smooth:-x")
    assert (m.kind, m.axis, m.sign, m.profile) == ("translate", "x", -1, "smooth")
    m = parse_mode("rotate:ccw")
    assert (m.kind, m.sense, m.profile) == ("rotate", "ccw", "rotation")
    with pytest.raises(ValueError):
        parse_mode("sideways")

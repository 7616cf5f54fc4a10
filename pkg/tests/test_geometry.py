import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ssflow import elastica
from ssflow import geometry as geo
from ssflow.geometry import Curve, DegenerateCurveError, GridField


def circle_arc(radius, a, b, n):
    t = np.linspace(a, b, n)
    return Curve(radius * np.column_stack([np.cos(t), np.sin(t)]), radius * t, True)


def segment(n=11, length=1.0):
    x = np.linspace(0, length, n)
    return Curve(np.column_stack([x, np.zeros(n)]), x, True)


class TestCurveValidation:
    def test_too_few_points(self):
        with pytest.raises(DegenerateCurveError):
            Curve(np.zeros((4, 2)), np.arange(4.0))

    def test_param_not_increasing(self):
        pts = np.column_stack([np.arange(6.0), np.zeros(6)])
        with pytest.raises(DegenerateCurveError):
            Curve(pts, np.array([0, 1, 2, 2, 3, 4.0]))

    def test_repeated_point(self):
        pts = np.column_stack([[0, 1, 1, 2, 3, 4.0], np.zeros(6)])
        with pytest.raises(DegenerateCurveError, match="repeated"):
            Curve(pts, np.arange(6.0))

    def test_immutable(self):
        c = segment()
        with pytest.raises(ValueError):
            c.points[0, 0] = 5.0


class TestResample:
    def test_clustered_segment_becomes_uniform(self):
        u = np.linspace(0, 1, 41) ** 3
        c = Curve(np.column_stack([u, np.zeros_like(u)]), np.arange(41.0))
        r = geo.resample_arclength(c, 41)
        assert r.is_arclength
        assert np.allclose(np.diff(r.points[:, 0]), 1 / 40, atol=1e-12)

    def test_quarter_circle(self):
        t = np.linspace(0, np.pi / 2, 61) ** 1.3 / (np.pi / 2) ** 0.3
        c = Curve(np.column_stack([np.cos(t), np.sin(t)]), t)
        r = geo.resample_arclength(c, 101)
        assert r.param[-1] - r.param[0] == pytest.approx(np.pi / 2, abs=1e-4)
        ds = r.chords
        assert np.ptp(ds) < 1e-6
        assert np.allclose(np.hypot(*r.points.T), 1.0, atol=1e-6)

    def test_sech_graph_length_matches_quadrature(self):
        x = np.linspace(-5, 5, 201)
        c = Curve(np.column_stack([x, 1 / np.cosh(x)]), x)
        r = geo.resample_arclength(c, 201)
        exact, _ = quad(lambda u: np.sqrt(1 + (np.tanh(u) / np.cosh(u)) ** 2), -5, 5, epsabs=1e-13)
        assert r.param[-1] - r.param[0] == pytest.approx(exact, rel=1e-5)

    def test_carry_labels_follow_points(self):
        x = np.linspace(0, 1, 31) ** 2
        c = Curve(np.column_stack([x, np.zeros_like(x)]), np.arange(31.0))
        r, lab = geo.resample_arclength(c, 31, carry=x.copy())
        assert np.allclose(lab, r.points[:, 0], atol=1e-10)


class TestCurvature:
    def test_line_is_flat(self):
        c = segment(21, 3.0).transformed(0.7, (1.0, -2.0))
        assert np.max(np.abs(geo.curvature(c).values)) < 1e-12

    def test_circle_radius_two(self):
        c = circle_arc(2.0, 0.0, 2.0, 201)
        k = geo.curvature(c).values
        assert np.max(np.abs(k - 0.5)) < 1e-3

    def test_borderline_reconstruction_second_order(self):
        errs = []
        for n in (401, 801, 1601):
            prof = elastica.borderline_profile(1.0, 0.0, 1, (-20.0, 20.0, n))
            c = geo.build_from_curvature(prof)
            errs.append(np.max(np.abs(geo.curvature_values(c) - prof.values)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert errs[-1] < 1e-3
        assert np.all(orders > 1.8)

    def test_convergence_order_on_ellipse(self):
        errs = []
        for n in (101, 201, 401):
            t = np.linspace(0, 2, n)
            c = Curve(np.column_stack([2 * np.cos(t), np.sin(t)]), t)
            exact = 2 / (4 * np.sin(t) ** 2 + np.cos(t) ** 2) ** 1.5
            errs.append(np.max(np.abs(geo.curvature_values(c) - exact)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all((orders > 1.8) & (orders < 2.2))


class TestEnergyIndex:
    def test_segment_energy(self):
        e = geo.energy(segment(31, 3.0), 2.0)
        assert e.length == pytest.approx(3.0, abs=1e-12)
        assert e.bending == pytest.approx(0.0, abs=1e-20)
        assert e.total == pytest.approx(12.0, abs=1e-12)

    def test_energy_rejects_bad_lambda(self):
        with pytest.raises(ValueError):
            geo.energy(segment(), 0.0)

    def test_full_circle(self):
        c = circle_arc(1.5, 0.0, 2 * np.pi, 2001)
        e = geo.energy(c, 1.0)
        assert e.length == pytest.approx(3 * np.pi, rel=1e-5)
        assert e.bending == pytest.approx(2 * np.pi / 1.5, rel=1e-5)
        assert geo.index(c) == pytest.approx(2 * np.pi, abs=1e-3)

    def test_borderline_bending_and_index(self):
        c = elastica.borderline_curve(1.0, 0.0, 1, (-40.0, 40.0, 8001))
        assert geo.energy(c, 1.0).bending == pytest.approx(4 * np.sqrt(2), abs=1e-3)
        assert geo.index(c) == pytest.approx(2 * np.pi, abs=1e-2)

    def test_segment_index_zero(self):
        assert geo.index(segment()) == pytest.approx(0.0, abs=1e-14)


class TestBuildFromCurvature:
    def test_zero_curvature_gives_segment(self):
        c = geo.build_from_curvature(GridField(np.zeros(21), 0.1))
        assert np.allclose(c.points[:, 1], 0.0)
        assert np.allclose(c.points[:, 0], np.linspace(0, 2, 21))

    def test_unit_curvature_closes(self):
        n = 629
        h = 2 * np.pi / (n - 1)
        c = geo.build_from_curvature(GridField(np.ones(n), h))
        assert np.hypot(*(c.points[-1] - c.points[0])) < 1e-6

    def test_borderline_tails_flat(self):
        prof = elastica.borderline_profile(1.0, 0.0, 1, (-40.0, 40.0, 8001))
        theta = geo.turning_angle(prof)
        assert abs(theta[0]) < 1e-2
        assert abs(theta[-1] - 2 * np.pi) < 1e-2


angles = st.floats(-np.pi, np.pi)
shifts = st.tuples(st.floats(-10, 10), st.floats(-10, 10))


@settings(max_examples=30, deadline=None)
@given(angle=angles, shift=shifts)
def test_rigid_motion_invariance(angle, shift):
    c = circle_arc(1.0, 0.0, 1.5, 41)
    moved = c.transformed(angle, shift)
    assert np.allclose(geo.curvature_values(moved), geo.curvature_values(c), atol=1e-9)
    assert geo.energy(moved, 1.3).total == pytest.approx(geo.energy(c, 1.3).total, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(radius=st.floats(0.5, 5.0), sweep=st.floats(0.3, 3.0))
def test_reversal_flips_sign(radius, sweep):
    c = circle_arc(radius, 0.0, sweep, 41)
    r = c.reversed()
    assert np.allclose(geo.curvature_values(r), -geo.curvature_values(c)[::-1], atol=1e-9)
    assert geo.index(r) == pytest.approx(-geo.index(c), abs=1e-12)


def test_hausdorff():
    a = segment(11)
    b = a.transformed(0.0, (0.0, 0.25))
    assert geo.hausdorff(a, b) == pytest.approx(0.25)
    assert geo.hausdorff(a, a) == 0.0


def test_csv_round_trip(tmp_path):
    c = circle_arc(1.0, 0.0, 1.0, 17)
    geo.write_curve_csv(c, tmp_path / "c.csv")
    back = geo.read_curve_csv(tmp_path / "c.csv")
    assert np.array_equal(back.points, c.points)
    f = GridField(np.sin(np.linspace(0, 1, 9)), 0.125, -0.5)
    geo.write_field_csv(f, tmp_path / "f.csv")
    g = geo.read_field_csv(tmp_path / "f.csv")
    assert np.array_equal(g.values, f.values) and g.origin == -0.5 and g.spacing == pytest.approx(0.125)

import numpy as np
import pytest

from ssflow import flow_graph as fg
from ssflow import flow_param as fp
from ssflow import geometry as geo
from ssflow import harness
from ssflow.flow_graph import ChartFailure, GraphState
from ssflow.geometry import Curve, GridField


def straight(n=161, length=np.pi):
    x = np.linspace(0, length, n)
    return Curve(np.column_stack([x, np.zeros(n)]), x, True)


def unit_arc(n=161, sweep=2.0):
    t = np.linspace(0, sweep, n)
    return Curve(np.column_stack([np.cos(t), np.sin(t)]), t, True)


def sine_curvature_base(n, length=4.0, amp=0.5):
    s = np.linspace(0, length, n)
    k = amp * np.sin(np.pi * s / length)
    return geo.build_from_curvature(GridField(k, s[1], 0.0)), s, k


class TestState:
    def test_node_count_mismatch(self):
        b = straight(21)
        with pytest.raises(ValueError):
            GraphState(b, GridField(np.zeros(20), 0.1), GridField(np.zeros(21), 0.1))

    def test_from_base_resamples(self):
        st = GraphState.from_base(harness.perturbed_line(41), 1.0)
        assert st.base.is_arclength
        assert np.ptp(st.base.chords) < 1e-6

    def test_zero_offset_reconstructs_base(self):
        st = GraphState.from_base(unit_arc(41), 1.0)
        assert np.array_equal(st.to_curve().points, st.base.points)


class TestMetric:
    def test_zero_offset(self):
        st = GraphState.from_base(straight(41), 1.0)
        assert np.all(fg.metric(st).values == 1.0)

    def test_zero_offset_curved_base(self):
        # on a curved base the hinged ghosts bend d at the ends, so only the interior is exact
        st = GraphState.from_base(unit_arc(41), 1.0)
        m = fg.metric(st).values
        assert np.all(m[1:-1] == 1.0)
        assert abs(m[0] - 1) < st.h**2

    def test_straight_base_quadratic(self):
        b = straight(101, 2.0)
        x, eps = b.param, 0.1
        st = GraphState.from_base(b, 1.0, eps * x * (2.0 - x))
        exact = np.sqrt(1 + (eps * (2.0 - 2 * x)) ** 2)
        # the quadratic has d'' != 0 at the ends, so the hinged ghosts only leave the interior exact
        assert np.max(np.abs(fg.metric(st).values - exact)[1:-1]) < 1e-12

    def test_unit_circle_constant_offset(self):
        st = GraphState.from_base(unit_arc(161), 1.0, np.full(161, 0.3))
        m = fg.metric(st).values
        direct = geo.speed(st.to_curve(), order=4)
        mid = slice(10, -10)
        assert np.max(np.abs(m[mid] - 0.7)) < 1e-6
        assert np.max(np.abs(m[mid] - direct[mid])) < 1e-6

    def test_chart_failure(self):
        st = GraphState.from_base(unit_arc(41), 1.0, np.full(41, 1.2))
        with pytest.raises(ChartFailure):
            fg.metric(st)


class TestRhs:
    def test_straight_zero(self):
        assert np.all(fg.rhs(GraphState.from_base(straight(), 1.0)).values == 0.0)

    def test_curved_base_matches_normal_speed(self):
        errs = []
        for n in (81, 161, 321):
            b, s, k = sine_curvature_base(n)
            exact = 2 * (np.pi / 4.0) ** 2 * k - k**3 + k
            r = fg.rhs(GraphState.from_base(b, 1.0)).values
            F = fp.normal_speed(b, 1.0)
            assert np.max(np.abs(r - F)[1:-1]) < 1e-3 * np.max(np.abs(F))
            errs.append(np.max(np.abs(r - exact)[1:-1]))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 1.8)

    def test_linearisation_on_sine(self):
        b = straight()
        x = b.param
        eps = 1e-6
        st = GraphState.from_base(b, 1.0, eps * np.sin(x))
        lin = -eps * (2 + 1) * np.sin(x)  # -2 d'''' + lam^2 d'' on sin x
        r = fg.rhs(st).values
        assert np.max(np.abs(r - lin)) < 1e-3 * np.max(np.abs(lin))

    def test_chart_violation(self):
        st = GraphState.from_base(unit_arc(41), 1.0, np.full(41, 1.2))
        with pytest.raises(ChartFailure):
            fg.rhs(st)


class TestStep:
    def test_fixed_point(self):
        st = GraphState.from_base(straight(), 1.0)
        new, rep = fg.step(st, 0.1)
        assert np.all(new.offset.values == 0.0) and rep.max_offset_change == 0.0

    def test_sine_mode_scalar_factor(self):
        b = straight()
        h, dt = b.param[1], 1e-3
        st = GraphState.from_base(b, 1.0, 1e-6 * np.sin(b.param))
        new, _ = fg.step(st, dt)
        # discrete symbols of d'' and d'''' on sin x with odd ghosts
        mu2 = 4 * np.sin(h / 2) ** 2 / h**2
        factor = (1 - dt * mu2) / (1 + 2 * dt * mu2**2)
        ratio = new.offset.values[1:-1] / st.offset.values[1:-1]
        assert np.max(np.abs(ratio / factor - 1)) < 1e-8
        assert factor < 1

    def test_energy_nonincreasing_at_dt_stable(self):
        st = GraphState.from_base(straight(), 1.0, 0.05 * np.sin(straight().param))
        e0 = geo.energy(st.to_curve(), 1.0).total
        for _ in range(20):
            st, rep = fg.step(st, fg.dt_stable(st))
            assert rep.energy_after <= e0 + 1e-8 * abs(e0)
            e0 = rep.energy_after

    def test_ends_stay_pinned(self):
        st = GraphState.from_base(harness.shallow_arc(81), 1.0)
        for _ in range(5):
            st, _ = fg.step(st, 1e-3)
        assert st.offset.values[0] == 0.0 and st.offset.values[-1] == 0.0

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            fg.step(GraphState.from_base(straight(), 1.0), -1.0)


class TestEvolve:
    def test_sine_offset_decays(self):
        b = straight(81)
        st = GraphState.from_base(b, 1.0, 0.05 * np.sin(b.param))
        tr = fg.evolve(st, fp.FlowConfig(dt=2e-3, t_final=10.0))
        assert tr.stationary
        assert np.max(np.abs(tr.final.offset.values)) < 1e-6
        e = tr.column("energy")
        assert np.all(np.diff(e) <= 1e-8 * np.abs(e[:-1]))
        # hinged data on a straight base: the discrete d'' vanishes at both ends
        mid = tr.states[len(tr.states) // 2]
        d = mid.offset.values
        ext = fg._extend_offset(d, mid.base_curvature.values, mid.h)
        d2 = ext[2:] - 2 * ext[1:-1] + ext[:-2]
        ends = max(abs(d2[1]), abs(d2[-2]))
        assert ends < 1e-8 * np.max(np.abs(d2))

    def test_arc_converges_to_chord(self):
        arc = harness.shallow_arc(161)
        R = np.hypot(*(arc.points[-1] - arc.points[0]))
        tr = fg.evolve(GraphState.from_base(arc, 1.0), fp.FlowConfig(dt=2e-3, t_final=8.0))
        assert tr.stationary
        assert tr.column("energy")[-1] == pytest.approx(R, abs=1e-3)
        assert harness.check_energy_bound(tr).passed
        assert harness.check_energy_monotone(tr).passed

    def test_end_curvature_stays_zero(self):
        tr = fg.evolve(GraphState.from_base(harness.shallow_arc(161), 1.0), fp.FlowConfig(dt=1e-3, t_final=0.2))
        for s in tr.states[1:]:
            k = fg.graph_curvature(s)
            assert max(abs(k[0]), abs(k[-1])) < 1e-6 * np.max(np.abs(k))

    def test_line_is_immediately_stationary(self):
        tr = fg.evolve(GraphState.from_base(straight(), 1.0), fp.FlowConfig(dt=1e-3, t_final=1.0))
        assert tr.stationary and len(tr.diagnostics) <= 2

    def test_agrees_with_parametric_mode(self):
        c = harness.perturbed_line(161)
        cfg = fp.FlowConfig(dt=1e-3, t_final=0.1, resample_every=0)
        g = fg.evolve(GraphState.from_base(c, 1.0), cfg).final.to_curve()
        p = fp.evolve(fp.ParamState(geo.resample_arclength(c, 161), 1.0), cfg).final.curve
        diam = np.hypot(*(c.points[-1] - c.points[0]))
        assert geo.hausdorff(g, p) <= 5e-3 * diam

    def test_rebase_keeps_curve(self, monkeypatch):
        monkeypatch.setattr(fg, "REBASE_OFFSET", 1e-3)
        tr = fg.evolve(GraphState.from_base(harness.shallow_arc(161), 1.0), fp.FlowConfig(dt=1e-3, t_final=0.3))
        assert tr.final.rebases > 0
        e = tr.column("energy")
        assert np.all(np.diff(e) <= 1e-8 * np.abs(e[:-1]))

    def test_rebase_budget_abort(self, monkeypatch):
        monkeypatch.setattr(fg, "REBASE_OFFSET", 1e-3)
        cfg = fp.FlowConfig(dt=1e-3, t_final=0.3, rebase_budget=0)
        tr = fg.evolve(GraphState.from_base(harness.shallow_arc(161), 1.0), cfg)
        assert tr.status == "rebase_budget"
        assert "budget" in tr.message and tr.final.time < 0.3

    def test_start_time_respected(self):
        st = GraphState.from_base(harness.shallow_arc(81), 1.0)
        st, _ = fg.step(st, 1e-3)
        tr = fg.evolve(st, fp.FlowConfig(dt=1e-3, t_final=3e-3))
        assert len(tr.diagnostics) == 3

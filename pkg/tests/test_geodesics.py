import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finsler_twist.cylinder import SHEAR_JACOBIAN, TwistMapSpec, twist_apply, twist_jacobian
from finsler_twist.errors import DomainError, NumericalError
from finsler_twist.finsler import finsler_eval, lagrangian_full_eval
from finsler_twist.geodesics import (
    ReturnMap, SectionState, conjugacy_g, conjugacy_g_inverse, conjugated_return_map, el_residual,
    el_rhs, free_flat_geodesic, hamiltonian_cross_check, integrate_graph, return_map,
    return_map_jacobian,
)
from finsler_twist.phase import CylinderPoint

K = 10.0
unit = st.floats(0, 1, exclude_max=True)


def wrap(d):
    return (np.asarray(d) + 0.5) % 1.0 - 0.5


class TestEulerLagrange:
    def test_free_motion_in_flat_band(self, model):
        v = np.linspace(-K, K, 21)
        assert np.array_equal(el_rhs(model(0.0), 0.3, 0.2, v), np.zeros(21))

    @given(unit, unit, st.floats(K + 1e-9, K + 20), st.sampled_from([-1.0, 1.0]))
    def test_free_motion_outside_band(self, model, t, th, a, sign):
        assert el_rhs(model(1.2), t, th, sign * a) == 0.0

    def test_matches_hamiltonian_oracle(self, model, reference):
        for case in reference["el_cases"]:
            got = el_rhs(model(case["epsilon"]), case["t"], case["theta"], case["thetadot"])
            assert got == pytest.approx(case["acc"], rel=1e-9, abs=1e-9), case


class TestGraphs:
    def test_fixture_against_hamiltonian_oracle(self, model, reference):
        ref = reference["graph_eps0.3_h0_s0.5"]
        tr = integrate_graph(model(0.3), 0.0, 0.5)
        assert abs(tr.theta[-1] - ref["theta1"]) <= 1e-9
        assert abs(tr.thetadot[-1] - ref["thetadot1"]) <= 1e-9

    @pytest.mark.parametrize("slope", [-12.0, -7.0, -0.3, 0.5, 3.9, 9.5, 12.0])
    def test_euler_lagrange_residual(self, model, slope):
        m = model(0.5)
        tr = integrate_graph(m, 0.3, slope)
        assert np.all(np.isfinite(tr.thetadot))
        assert el_residual(m, tr) <= 1e-7

    def test_free_geodesic_is_straight(self, model):
        tr = integrate_graph(model(0.0), 0.2, 0.5)
        assert np.allclose(tr.theta, 0.2 + 0.5 * tr.t, rtol=0, atol=1e-14)
        assert np.all(tr.thetadot == 0.5)

    def test_metadata_and_csv(self, model):
        tr = integrate_graph(model(0.3), 0.0, 0.5, n_samples=11)
        assert tr.meta["method"] == "DOP853" and tr.meta["order"] == 8
        assert tr.meta["endpoint_residual"] <= 1e-10
        text = tr.to_csv(io.StringIO())
        rows = [r for r in text.splitlines() if not r.startswith("#")]
        assert rows[0] == "t,theta,thetadot" and len(rows) == 12

    @pytest.mark.filterwarnings("ignore")
    def test_unreachable_tolerance_is_reported(self, model):
        with pytest.raises(NumericalError):
            integrate_graph(model(1.2), 0.5, 0.1, tol=1e-17)

    def test_cross_check_with_hamiltonian_flow(self, model):
        rng = np.random.default_rng(11)
        gap = hamiltonian_cross_check(model(0.5), rng.random(20), rng.uniform(-K, K, 20),
                                      np.linspace(0, 1, 21))
        assert gap <= 1e-8

    def test_flat_sector_lines(self):
        pts = free_flat_geodesic([0.1, 0.2], [-1.0, 0.5], [0.0, 2.0])
        assert np.array_equal(pts, [[0.1, 0.2], [-1.9, 1.2]])


class TestSection:
    def test_state_requires_forward_v1(self):
        with pytest.raises(DomainError):
            SectionState(0.2, 0.0, 1.0)
        with pytest.raises(DomainError):
            SectionState(np.array([0.2, 0.3]), np.array([0.1, -0.1]), np.array([1.0, 1.0]))

    def test_state_reduces_h(self):
        assert SectionState(1.25, 0.5, 0.1).h == 0.25

    def test_g_example(self, model):
        m = model(0.3)
        f = finsler_eval(m, 0.0, 0.2, 1.0, 0.5)
        p = conjugacy_g(SectionState(0.2, 1.0 / f, 0.5 / f))
        assert p.x == 0.2 and p.y == pytest.approx(0.5, abs=1e-15)

    def test_g_inverse_examples(self, model):
        m = model(0.3)
        s = conjugacy_g_inverse(m, CylinderPoint(0.0, m.D + 3))
        w = np.sqrt(m.A + m.B * (m.D + 3) ** 2)
        assert (s.v1, s.v2) == pytest.approx((1.0 / w, (m.D + 3) / w), rel=1e-14)
        s = conjugacy_g_inverse(m, CylinderPoint(0.5, 0.0))
        lag = lagrangian_full_eval(m, 0.0, 0.5, 0.0)
        assert (s.h, s.v1, s.v2) == (0.5, pytest.approx(1.0 / lag, rel=1e-14), 0.0)

    @given(unit, st.floats(-K - 3, K + 3))
    def test_g_round_trip_and_unit_speed(self, model, x, y):
        m = model(0.5)
        s = conjugacy_g_inverse(m, CylinderPoint(x, y))
        assert abs(s.speed(m) - 1.0) <= 1e-10
        p = conjugacy_g(s)
        assert abs(wrap(p.x - x)) <= 1e-15 and p.y == pytest.approx(y, rel=1e-14, abs=1e-15)


class TestReturnMap:
    def test_flat_example(self, model):
        m = model(0.0)
        f = finsler_eval(m, 0.0, 0.2, 1.0, 0.5)
        r = return_map(m, SectionState(0.2, 1.0 / f, 0.5 / f))
        assert r.h == pytest.approx(0.7, abs=1e-12)
        assert r.v2 / r.v1 == pytest.approx(0.5, abs=1e-14)
        assert abs(r.speed(m) - 1.0) <= 1e-10

    @given(unit, st.floats(K + 1e-6, K + 3), st.sampled_from([-1.0, 1.0]))
    def test_shear_outside_band(self, model, x, a, sign):
        y = sign * a
        q = conjugated_return_map(model(0.5), CylinderPoint(x, y))
        assert abs(wrap(q.x - x - y)) <= 1e-8 and abs(q.y - y) <= 1e-8

    def test_conjugates_to_twist_fixture(self, model, reference):
        ref = reference["twist_eps0.3_p0_0.5"]
        q = conjugated_return_map(model(0.3), CylinderPoint(0.0, 0.5))
        assert abs(wrap(q.x - ref["x_lift"])) <= 1e-9 and abs(q.y - ref["y"]) <= 1e-9

    @given(unit, st.floats(-K, K), st.sampled_from([0.1, 0.5, 1.2]))
    def test_conjugacy_identity(self, model, x, y, eps):
        p = CylinderPoint(x, y)
        q = conjugated_return_map(model(eps), p)
        f = twist_apply(TwistMapSpec(eps), p)
        assert abs(wrap(q.x - f.x)) <= 1e-6 and abs(q.y - f.y) <= 1e-6

    @given(unit, st.floats(-K - 2, K + 2))
    def test_outputs_are_unit_speed(self, model, x, y):
        m = model(1.2)
        r = return_map(m, conjugacy_g_inverse(m, CylinderPoint(x, y)))
        assert abs(r.speed(m) - 1.0) <= 1e-10 and r.v1 > 0

    def test_jacobian_examples(self, model):
        J = return_map_jacobian(model(0.0), conjugacy_g_inverse(model(0.0), CylinderPoint(0.3, 0.4)))
        assert np.abs(J - SHEAR_JACOBIAN).max() <= 1e-12
        m = model(0.5)
        J = return_map_jacobian(m, conjugacy_g_inverse(m, CylinderPoint(0.3, K + 1)))
        assert np.abs(J - SHEAR_JACOBIAN).max() <= 1e-8

    def test_jacobian_matches_twist_jacobian(self, model):
        m = model(0.3)
        p = CylinderPoint(0.0, 0.5)
        J = return_map_jacobian(m, conjugacy_g_inverse(m, p))
        assert np.abs(J - twist_jacobian(TwistMapSpec(0.3), p)).max() <= 1e-6

    @given(unit, st.floats(-K, K), st.sampled_from([0.3, 1.2]))
    def test_area_preservation(self, model, x, y, eps):
        m = model(eps)
        J = return_map_jacobian(m, conjugacy_g_inverse(m, CylinderPoint(x, y)))
        assert abs(np.linalg.det(J) - 1.0) <= 1e-6

    def test_callable_form(self, model):
        m = model(0.3)
        rm = ReturnMap(m)
        x, y = np.array([0.1, 0.7]), np.array([0.4, -2.0])
        a = rm(x, y)
        q = conjugated_return_map(m, CylinderPoint(x, y))
        assert np.allclose(a[0], q.x, rtol=0, atol=1e-14) and np.allclose(a[1], q.y, atol=1e-14)
        _, _, J = rm.step(x, y)
        assert J.shape == (2, 2, 2)

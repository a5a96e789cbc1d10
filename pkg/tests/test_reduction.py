import math

import numpy as np
import pytest

from rosochatius import FullState, ReducedState
from rosochatius.dynamics import Method, SystemKind, Trajectory, hamiltonian_full, hamiltonian_reduced, integrate, integrate_oracle
from rosochatius.errors import AxisSingularity, NegativeK
from rosochatius.invariants import IntegralId, angular_momentum, evaluate_along, relative_drift
from rosochatius.model import sample_full_state, sample_reduced_state
from rosochatius.reduction import (
    MultipolarCoords,
    consistency_check,
    from_multipolar,
    inherited_integrals,
    lift,
    reduce_trajectory,
    reduced_params_for,
    to_multipolar,
)

from conftest import params

TWO_PI = 2 * math.pi


class TestMultipolar:
    def test_circular_data(self):
        m = to_multipolar(params([1]), FullState([1, 0], [0, 1]))
        np.testing.assert_array_equal([m.x[0], m.phi[0], m.p[0], m.ell[0]], [1, 0, 0, 1])

    def test_hand_example(self):
        m = to_multipolar(params([1]), FullState([0, 2], [3, 0]))
        assert m.x[0] == 2
        assert m.phi[0] == pytest.approx(math.pi / 2, abs=1e-15)
        assert m.p[0] == 0
        assert m.ell[0] == -6

    def test_angles_in_range(self):
        m = to_multipolar(params([1, 1]), FullState([0, -1, -1, -1e-20], [0, 0, 0, 0]))
        assert np.all((m.phi >= 0) & (m.phi < TWO_PI))
        assert m.phi[0] == pytest.approx(1.5 * math.pi)

    def test_round_trip(self, rng):
        p = params([1, 2, 3])
        for _ in range(100):
            s = sample_full_state(p, rng)
            back = from_multipolar(p, to_multipolar(p, s))
            np.testing.assert_allclose(back.y, s.y, rtol=1e-13, atol=1e-14)
            np.testing.assert_allclose(back.phat, s.phat, rtol=1e-13, atol=1e-13)

    def test_ell_is_plane_angular_momentum(self, rng):
        p = params([2, 3])
        s = sample_full_state(p, rng)
        m = to_multipolar(p, s)
        assert m.ell[1] == angular_momentum(s, 3, 4)

    def test_axis_rejected(self):
        with pytest.raises(AxisSingularity) as info:
            to_multipolar(params([1, 1]), FullState([1, 0, 0, 0], [0, 1, 1, 0]))
        assert info.value.plane == 2

    def test_type_requires_positive_radius(self):
        with pytest.raises(AxisSingularity):
            MultipolarCoords([0.0], [0.0], [0.0], [0.0])


class TestLift:
    def test_zero_k_gives_line_motion(self, rng):
        p = params([1, 2])
        s = sample_reduced_state(p, rng)
        f = lift(p, s, [0.4, 1.9])
        assert angular_momentum(f, 1, 2) == pytest.approx(0.0, abs=1e-15)
        assert angular_momentum(f, 3, 4) == pytest.approx(0.0, abs=1e-15)
        traj = integrate(p, "full", f, 0.01, 3.0)
        for l, a in enumerate([0.4, 1.9]):
            # every point stays on the line through the origin at angle a
            cross = traj.q[:, 2 * l] * math.sin(a) - traj.q[:, 2 * l + 1] * math.cos(a)
            assert np.max(np.abs(cross)) < 1e-12

    def test_multipolar_image(self, rng):
        p = params([1, 2], [0.5, 2.0])
        s = sample_reduced_state(p, rng)
        m = to_multipolar(p, lift(p, s, [0.1, 6.0]))
        np.testing.assert_allclose(m.x, s.x, rtol=1e-14)
        np.testing.assert_allclose(m.p, s.p, rtol=1e-13, atol=1e-14)
        np.testing.assert_allclose(m.phi, [0.1, 6.0], rtol=1e-14)
        np.testing.assert_allclose(m.ell, np.sqrt([0.5, 2.0]), rtol=1e-14)

    def test_energy_matches(self, rng):
        p = params([1, 2, 3], [0.3, 1.8, 0.0], omega=1.2)
        for _ in range(100):
            s = sample_reduced_state(p, rng)
            f = lift(p, s, rng.uniform(0, TWO_PI, 3))
            assert hamiltonian_full(p, f) == pytest.approx(hamiltonian_reduced(p, s), rel=1e-12)

    def test_negative_k_rejected(self):
        with pytest.raises(NegativeK) as info:
            lift(params([1, 1], [1.0, -0.5]), ReducedState([1.0, 1.0], [0.0, 0.0]))
        assert info.value.index == 2

    def test_ell_conserved_along_full_flow(self, rng):
        p = params([1, 2, 3], [0.5, 1.0, 1.5])
        f = lift(p, sample_reduced_state(p, rng), rng.uniform(0, TWO_PI, 3))
        oracle = integrate_oracle(p, "full", f, 10 * TWO_PI, 1e-12)
        split = integrate(p, "full", f, 1e-3 * TWO_PI, 10 * TWO_PI)
        for l in (1, 2, 3):
            iid = IntegralId("L", (2 * l - 1, 2 * l))
            ell = evaluate_along(p, oracle, iid)
            assert ell[0] == pytest.approx(math.sqrt(p.k[l - 1]), rel=1e-14)
            assert relative_drift(ell) < 1e-9
            # rotations commute with both halves of the splitting, so ell is kept to rounding
            assert relative_drift(evaluate_along(p, split, iid)) < 1e-12

    def test_reduced_params_for(self, rng):
        p = params([1, 2], [0.0, 0.0])
        s = sample_full_state(p, rng)
        k = reduced_params_for(p, s).k
        assert k[0] == pytest.approx(angular_momentum(s, 1, 2) ** 2, rel=1e-14)


class TestReduceTrajectory:
    def test_projects_and_keeps_times(self, rng):
        p = params([1, 2], [0.5, 0.5])
        s = sample_reduced_state(p, rng)
        full = integrate(p, "full", lift(p, s), 0.01, 1.0)
        red = reduce_trajectory(p, full)
        np.testing.assert_array_equal(red.t, full.t)
        assert red.q.shape == (len(full), 2)
        np.testing.assert_allclose(red.q[0], s.x, rtol=1e-14)

    def test_axis_reports_time_index(self):
        p = params([1])
        t = np.linspace(0, 1, 4)
        q = np.array([[1.0, 0.0], [0.5, 0.0], [0.0, 0.0], [-0.5, 0.0]])
        full = Trajectory(SystemKind.FULL, Method.YOSHIDA4, t, q, np.zeros_like(q), 1 / 3)
        with pytest.raises(AxisSingularity) as info:
            reduce_trajectory(p, full)
        assert info.value.time_index == 2

    def test_rejects_reduced_input(self):
        p = params([1])
        red = integrate(p, "reduced", ReducedState([1.0], [0.0]), 0.1, 0.2)
        with pytest.raises(ValueError):
            reduce_trajectory(p, red)


class TestConsistency:
    @pytest.mark.parametrize("n,k,x,p", [
        ((1,), (1.0,), [1.2], [0.3]),
        ((1, 2), (0.5, 0.25), [1.0, 0.8], [0.3, -0.2]),
    ])
    def test_reduced_and_projected_flows_agree(self, n, k, x, p):
        rep = consistency_check(params(n, k), ReducedState(x, p), 5 * TWO_PI, 1e-3)
        assert rep.max_dev < 1e-6
        assert not rep.truncated
        assert rep.t_stop == pytest.approx(5 * TWO_PI, abs=1e-3)
        assert set(rep.to_dict()) >= {"max_dev", "t_of_max", "dt", "method"}

    def test_zero_k_stops_at_axis(self):
        p = params([1], [0.0])
        rep = consistency_check(p, ReducedState([1.0], [0.5]), 5 * TWO_PI, 1e-3)
        assert rep.truncated
        # the line orbit x = cos t + 0.5 sin t reaches the origin at t = pi - atan(2)
        assert rep.t_stop == pytest.approx(math.pi - math.atan(2.0), abs=1e-3)
        assert rep.max_dev < 1e-12

    def test_fourth_order_in_dt(self):
        p = params([1, 2], [0.5, 0.25])
        s = ReducedState([1.0, 0.8], [0.3, -0.2])
        a = consistency_check(p, s, 5 * TWO_PI, 0.01 * TWO_PI).max_dev
        b = consistency_check(p, s, 5 * TWO_PI, 0.005 * TWO_PI).max_dev
        assert a / b >= 12

    def test_rejects_non_positive_start(self):
        with pytest.raises(AxisSingularity):
            consistency_check(params([1], [1.0]), ReducedState([-1.0], [0.0]), 1.0, 0.01)


class TestInheritedIntegrals:
    def test_match_full_invariants(self, rng):
        p = params([1, 2, 3], [0.5, 1.0, 1.5])
        f = lift(p, sample_reduced_state(p, rng), [0.3, 1.3, 2.3])
        full = integrate(p, "full", f, 1e-3 * TWO_PI, TWO_PI)
        for norm in (True, False):
            for name, mismatch in inherited_integrals(p, full, norm).items():
                assert mismatch < 1e-9, name

    def test_any_off_axis_full_trajectory(self, rng):
        p = params([2, 3])
        full = integrate(p, "full", sample_full_state(p, rng), 1e-3 * TWO_PI, 0.5)
        result = inherited_integrals(p, full)
        assert len(result) == 2 + 1 + 2
        assert max(result.values()) < 1e-9

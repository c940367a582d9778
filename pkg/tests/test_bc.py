import numpy as np
import pytest

from evoflux.bc import (
    DirichletObject,
    SpongeZone,
    apply_dirichlet,
    apply_sponge,
    plane_membership,
    point_membership,
    relaxation_rows,
)
from evoflux.evolve import MarchConfig, march


def wall(dim=1, value=1.0, c_s=10.0, target_val=2.0):
    return DirichletObject(
        name="wall",
        membership=plane_membership(dim, value),
        target=lambda pts, t: np.full((pts.shape[0], 1), target_val),
        c_s=c_s,
    )


class TestDirichlet:
    def test_matching_state_gives_zero_rhs(self):
        pts = np.array([[0.5, 1.0], [0.5, 0.3]])
        rhs = np.array([[7.0], [7.0]])
        states = np.array([[2.0], [0.1]])
        out = apply_dirichlet([wall()], pts, 0.0, rhs, states)
        assert out[0, 0] == 0.0  # on the wall, state equals target
        assert out[1, 0] == 7.0  # off the wall, untouched

    def test_outside_rows_bit_identical(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 0.9, size=(20, 2))
        rhs = rng.standard_normal((20, 3))
        states = rng.standard_normal((20, 3))
        obj = DirichletObject(
            name="w",
            membership=plane_membership(1, 1.0),
            target=lambda p, t: np.zeros((p.shape[0], 3)),
            c_s=1.0,
        )
        out = apply_dirichlet([obj], pts, 0.0, rhs, states)
        assert np.array_equal(out, rhs)

    def test_replacement_semantics_no_pde_term_inside(self):
        pts = np.array([[0.2, 1.0]])
        rhs = np.array([[123.0]])  # would-be PDE value must vanish entirely
        states = np.array([[1.5]])
        out = apply_dirichlet([wall(c_s=4.0, target_val=2.0)], pts, 0.0, rhs, states)
        assert out[0, 0] == 4.0 * (2.0 - 1.5)

    def test_wall_rate_one_over_dt(self):
        dt = 1e-3
        delta = 0.01
        pts = np.array([[0.0, 1.0]])
        out = apply_dirichlet(
            [wall(c_s=1.0 / dt, target_val=1.0)], pts, 0.0, np.zeros((1, 1)), np.array([[1.0 - delta]])
        )
        assert np.isclose(out[0, 0], delta / dt)

    def test_point_membership(self):
        mem = point_membership([0.0])
        assert mem(np.array([[0.0], [1e-3]]), 0.0).tolist() == [True, False]

    def test_relaxation_rows_time_dependent_target(self):
        obj = DirichletObject(
            name="inflow",
            membership=point_membership([0.0]),
            target=lambda p, t: np.full((p.shape[0], 1), np.sin(t)),
            c_s=2.0,
            extra_points=np.array([[0.0]]),
        )
        rows = relaxation_rows(obj, t=np.pi / 2, states_at_extra=np.array([[0.25]]))
        assert np.isclose(rows[0, 0], 2.0 * (1.0 - 0.25))

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError):
            wall(c_s=0.0)


class TestSponge:
    def test_zero_rate_leaves_rhs_unchanged(self):
        zone = SpongeZone(
            name="z",
            c_s_field=lambda p: np.zeros(p.shape[0]),
            target=lambda p, t: np.ones((p.shape[0], 1)),
        )
        rhs = np.array([[3.0], [4.0]])
        out = apply_sponge(zone, np.zeros((2, 1)), 0.0, rhs, np.zeros((2, 1)))
        assert np.array_equal(out, rhs)

    def test_state_at_target_unchanged(self):
        zone = SpongeZone(
            name="z",
            c_s_field=lambda p: np.full(p.shape[0], 5.0),
            target=lambda p, t: np.full((p.shape[0], 1), 2.0),
        )
        rhs = np.array([[1.0]])
        out = apply_sponge(zone, np.zeros((1, 1)), 0.0, rhs, np.array([[2.0]]))
        assert np.array_equal(out, rhs)

    def test_constant_rate_uniform_offset(self):
        c, delta = 3.0, 0.2
        zone = SpongeZone(
            name="z",
            c_s_field=lambda p: np.full(p.shape[0], c),
            target=lambda p, t: np.full((p.shape[0], 1), 1.0),
        )
        rhs = np.array([[0.5], [0.7]])
        out = apply_sponge(zone, np.zeros((2, 1)), 0.0, rhs, np.full((2, 1), 1.0 - delta))
        assert np.allclose(out, rhs + c * delta)


class TestRelaxationContraction:
    def test_euler_mismatch_contracts_by_half_or_better(self):
        # single-parameter network, c_s = 1/dt: explicit Euler multiplies the
        # mismatch by (1 - c_s dt) = 0 each step
        dt, b = 1e-2, 0.8
        c_s = 1.0 / dt
        rhs = lambda t, s, f: {"w": c_s * (b - s["w"])}
        w = {"w": np.array([0.0])}
        for _ in range(3):
            before = abs(w["w"][0] - b)
            w = march(w, rhs, MarchConfig(integrator="explicit-euler", dt=dt, steps=1))
            after = abs(w["w"][0] - b)
            assert after <= 0.5 * before
    def test_rk4_mismatch_contracts(self):
        dt, b = 1e-2, -0.3
        c_s = 1.0 / dt
        rhs = lambda t, s, f: {"w": c_s * (b - s["w"])}
        w = march({"w": np.array([1.0])}, rhs, MarchConfig(dt=dt, steps=1))
        # RK4 stability polynomial at z = -1: 1 - 1 + 1/2 - 1/6 + 1/24 = 0.375
        assert np.isclose(abs(w["w"][0] - b), 0.375 * abs(1.0 - b), rtol=1e-12)

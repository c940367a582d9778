import numpy as np
import pytest
import sympy as sp

from evoflux.pde import (
    Advection,
    CompressibleNS,
    Diffusion,
    StateEval,
    StateValidityError,
    conserved,
    generic_rhs,
    inviscid_flux,
    max_wavespeed,
    ns_rhs,
    primitives,
    viscous_flux,
)


def ns2d(alpha=0.0, Re=100.0):
    return CompressibleNS(Re=Re, ndim=2, alpha=alpha)


class TestInviscidFlux:
    def test_advection_scalar(self):
        f = inviscid_flux(Advection(u=(1.0,)), np.array([[2.0]]))
        assert f.shape == (1, 1, 1) and f[0, 0, 0] == 2.0

    def test_diffusion_is_zero(self):
        assert np.all(inviscid_flux(Diffusion(nu=1.0, ndim=2), np.array([[3.0]])) == 0.0)

    def test_ns_rest_state(self):
        model = ns2d()
        p_b = 1.0 / model.gamma
        q = conserved(model, 1.0, [[0.0, 0.0]], p_b)
        f = inviscid_flux(model, q)
        assert np.allclose(f[0, 0, :], 0.0)
        assert np.allclose(f[0, 1:3, :], p_b * np.eye(2))
        assert np.allclose(f[0, 3, :], 0.0)

    def test_ns_rejects_nonpositive_density(self):
        model = ns2d()
        with pytest.raises(StateValidityError):
            inviscid_flux(model, np.array([[0.0, 0.0, 0.0, 1.0]]))


class TestViscousFlux:
    def test_zero_gradient_zero_flux(self):
        model = ns2d()
        q = conserved(model, 1.0, [[0.1, 0.2]], 0.7)
        a = np.zeros((1, 4, 2))
        assert np.all(viscous_flux(model, q, a) == 0.0)
        assert np.all(viscous_flux(Diffusion(nu=1.0, ndim=2), np.array([[1.0]]), np.zeros((1, 1, 2))) == 0.0)
        assert np.all(viscous_flux(Advection(u=(1.0, 0.0)), np.array([[1.0]]), np.zeros((1, 1, 2))) == 0.0)

    def test_diffusion_flux_is_minus_nu_a(self):
        a = np.array([[[1.0, 0.0]]])
        f = viscous_flux(Diffusion(nu=1.0, ndim=2), np.array([[5.0]]), a)
        assert np.allclose(f, [[[-1.0, 0.0]]])

    def test_ns_pure_shear(self):
        # du1/dx2 = 1 at rest density 1, alpha=0 so mu=1: tau_12 = 1/Re
        model = ns2d(alpha=0.0)
        q = conserved(model, 1.0, [[0.0, 0.0]], 1.0 / model.gamma)
        a = np.zeros((1, 4, 2))
        a[0, 1, 1] = 1.0  # d(rho u1)/dy = 1 -> du1/dy = 1 at rho=1, u=0
        f = viscous_flux(model, q, a)
        # momentum row s=0, direction i=1 carries -tau_01
        assert np.isclose(f[0, 1, 1], -1.0 / model.Re)
        assert np.isclose(f[0, 2, 0], -1.0 / model.Re)

    def test_linearity_in_gradient(self):
        rng = np.random.default_rng(0)
        model = ns2d(alpha=0.0)  # constant viscosity: flux linear in a
        q = conserved(model, 1.1, [[0.2, -0.1]], 0.8)
        a1 = rng.standard_normal((1, 4, 2))
        a2 = rng.standard_normal((1, 4, 2))
        f = viscous_flux(model, q, a1 + a2)
        assert np.allclose(f, viscous_flux(model, q, a1) + viscous_flux(model, q, a2), atol=1e-13)
        d = Diffusion(nu=0.7, ndim=2)
        qd = np.array([[2.0]])
        b1, b2 = rng.standard_normal((1, 1, 2)), rng.standard_normal((1, 1, 2))
        assert np.allclose(
            viscous_flux(d, qd, b1 + b2), viscous_flux(d, qd, b1) + viscous_flux(d, qd, b2)
        )


class TestPrimitives:
    def test_round_trip_identity(self):
        rng = np.random.default_rng(1)
        model = ns2d()
        for _ in range(50):
            rho = rng.uniform(0.3, 3.0, size=1)
            u = rng.uniform(-2, 2, size=(1, 2))
            p = rng.uniform(0.1, 5.0, size=1)
            q = conserved(model, rho, u, p)
            pr = primitives(model, q)
            back = conserved(model, pr.rho, pr.u, pr.p)
            assert np.max(np.abs(back - q)) <= 1e-14 * np.max(np.abs(q))


class TestGenericRhs:
    def test_advection_constant_state(self):
        st = StateEval(q=np.array([[4.0]]), grad_q=np.zeros((1, 1, 1)))
        assert np.allclose(generic_rhs(Advection(u=(1.0,)), st), 0.0)

    def test_advection_gaussian_peak_zero_slope(self):
        st = StateEval(q=np.array([[1.0]]), grad_q=np.zeros((1, 1, 1)))
        assert generic_rhs(Advection(u=(2.0,)), st)[0, 0] == 0.0

    def test_diffusion_sine_laplacian(self):
        # a = grad(sin x sin y) at (pi/2, pi/2); grad_aux = hessian -> rhs = -2 nu
        x = y = np.pi / 2
        ga = np.zeros((1, 1, 2, 2))
        ga[0, 0, 0, 0] = -np.sin(x) * np.sin(y)
        ga[0, 0, 1, 1] = -np.sin(x) * np.sin(y)
        st = StateEval(
            q=np.array([[np.sin(x) * np.sin(y)]]),
            grad_q=np.zeros((1, 1, 2)),
            grad_aux=ga,
        )
        nu = 0.8
        assert np.isclose(generic_rhs(Diffusion(nu=nu, ndim=2), st)[0, 0], -2.0 * nu)


class TestMaxWavespeed:
    def test_equal_rest_states_give_unit_sound_speed(self):
        model = ns2d()
        q = conserved(model, 1.0, [[0.0, 0.0]], 1.0 / model.gamma)
        s = max_wavespeed(model, q, q, np.array([[1.0, 0.0]]))
        assert np.isclose(s[0], 1.0, rtol=1e-14)

    def test_pressure_doubling_scales_acoustic_by_sqrt2(self):
        model = ns2d()
        q1 = conserved(model, 1.0, [[0.0, 0.0]], 0.5)
        q2 = conserved(model, 1.0, [[0.0, 0.0]], 1.0)
        n = np.array([[1.0, 0.0]])
        assert np.isclose(max_wavespeed(model, q2, q2, n)[0], np.sqrt(2) * max_wavespeed(model, q1, q1, n)[0])

    def test_normal_velocity_adds_linearly(self):
        model = ns2d()
        n = np.array([[0.0, 1.0]])
        q0 = conserved(model, 1.0, [[0.0, 0.0]], 0.9)
        qU = conserved(model, 1.0, [[0.3, 0.7]], 0.9)
        assert np.isclose(
            max_wavespeed(model, qU, qU, n)[0], max_wavespeed(model, q0, q0, n)[0] + 0.7
        )


def _symbolic_fields(alpha):
    """Manufactured smooth 2D state; returns sympy exprs for q_k(x, y)."""
    x, y = sp.symbols("x y", real=True)
    gamma = sp.Rational(7, 5)
    rg = (gamma - 1) / gamma
    rho = 1 + sp.Rational(1, 10) * x + sp.Rational(1, 20) * sp.sin(x) * sp.cos(y)
    u1 = x**2 + sp.Rational(1, 5) * sp.cos(x) * sp.sin(y)
    u2 = sp.Rational(1, 10) * sp.sin(x) + sp.Rational(1, 20) * y**2
    temp = 1 / (gamma - 1) * (1 + sp.Rational(1, 10) * x * y)
    p = rg * rho * temp
    e_tot = p / (gamma - 1) + rho * (u1**2 + u2**2) / 2
    q = [rho, rho * u1, rho * u2, e_tot]
    return x, y, gamma, rg, q, (u1, u2, p, temp)


def _symbolic_rhs(alpha):
    """Exact -div(F_inv + F_vis) for the manufactured fields."""
    x, y, gamma, rg, q, (u1, u2, p, temp) = _symbolic_fields(alpha)
    Re, Pr, mu_b = 100, sp.Rational(18, 25), sp.Rational(3, 5)
    xs = (x, y)
    u = (u1, u2)
    mu = ((gamma - 1) * temp) ** alpha
    div_u = sum(sp.diff(u[l], xs[l]) for l in range(2))
    tau = [[0, 0], [0, 0]]
    for k in range(2):
        for i in range(2):
            tau[k][i] = mu / Re * (sp.diff(u[i], xs[k]) + sp.diff(u[k], xs[i]))
            if k == i:
                tau[k][i] += (mu_b - mu / 2) / Re * div_u
    theta = [-mu / (Re * Pr) * sp.diff(temp, xs[i]) for i in range(2)]
    f_inv = [[q[1], q[2]],
             [q[1] * u1 + p, q[1] * u2],
             [q[2] * u1, q[2] * u2 + p],
             [u1 * (q[3] + p), u2 * (q[3] + p)]]
    f_vis = [[0, 0],
             [-tau[0][0], -tau[0][1]],
             [-tau[1][0], -tau[1][1]],
             [-(u1 * tau[0][0] + u2 * tau[1][0]) + theta[0],
              -(u1 * tau[0][1] + u2 * tau[1][1]) + theta[1]]]
    rhs = [
        -sum(sp.diff(f_inv[k][i] + f_vis[k][i], xs[i]) for i in range(2)) for k in range(4)
    ]
    return x, y, q, rhs


def _num(expr, x, y, xv, yv):
    val = sp.lambdify((x, y), expr, "numpy")(xv, yv)
    return np.broadcast_to(np.asarray(val, dtype=float), xv.shape)


def _exact_state(xv, yv, q_exprs, x, y):
    m = xv.shape[0]
    qa = np.empty((m, 4))
    gq = np.empty((m, 4, 2))
    hq = np.empty((m, 4, 2, 2))
    xs = (x, y)
    for k, expr in enumerate(q_exprs):
        qa[:, k] = _num(expr, x, y, xv, yv)
        for i in range(2):
            gq[:, k, i] = _num(sp.diff(expr, xs[i]), x, y, xv, yv)
            for j in range(2):
                hq[:, k, i, j] = _num(sp.diff(expr, xs[i], xs[j]), x, y, xv, yv)
    return qa, gq, hq


class TestNsRhs:
    def test_uniform_state_gives_zero(self):
        model = ns2d()
        q = conserved(model, 1.0, [[0.3, -0.2]], 0.9)
        st = StateEval(
            q=q,
            grad_q=np.zeros((1, 4, 2)),
            hess_q=np.zeros((1, 4, 2, 2)),
            aux=np.zeros((1, 4, 2)),
            grad_aux=np.zeros((1, 4, 2, 2)),
        )
        assert np.allclose(ns_rhs(model, st), 0.0, atol=1e-14)

    @pytest.mark.parametrize("alpha", [0, 1])
    def test_matches_symbolic_divergence_with_zero_correction(self, alpha):
        # aux = grad_q, grad_aux = hess_q: the split collapses and the result
        # must equal the exact divergence of the total flux.
        x, y, q_exprs, rhs_exprs = _symbolic_rhs(alpha)
        rng = np.random.default_rng(2)
        xv = rng.uniform(0.1, 0.6, size=6)
        yv = rng.uniform(0.1, 0.6, size=6)
        qa, gq, hq = _exact_state(xv, yv, q_exprs, x, y)
        model = CompressibleNS(Re=100.0, ndim=2, alpha=float(alpha))
        st = StateEval(q=qa, grad_q=gq, hess_q=hq, aux=gq.copy(), grad_aux=hq.copy())
        got = ns_rhs(model, st)
        want = np.stack([_num(ex, x, y, xv, yv) for ex in rhs_exprs], axis=-1)
        scale = np.max(np.abs(want)) + 1.0
        assert np.max(np.abs(got - want)) <= 1e-9 * scale

    @pytest.mark.parametrize("alpha", [0, 1])
    def test_corrected_family_matches_independent_symbolic_build(self, alpha):
        # independent symbolic evaluation of the corrected/discontinuous split
        # with an aux family that is NOT the state gradient
        x, y, gamma, rg, q_exprs, _ = _symbolic_fields(alpha)
        xs = (x, y)
        Re, Pr, mu_b = 100, sp.Rational(18, 25), sp.Rational(3, 5)
        # shadow fields define aux = grad(q_shadow), grad_aux = hess(q_shadow)
        shadow = [
            expr + sp.Rational(1, 50) * sp.sin(2 * x + k) * sp.cos(y - k)
            for k, expr in enumerate(q_exprs)
        ]

        rho_b = q_exprs[0]
        u_b = [q_exprs[1] / rho_b, q_exprs[2] / rho_b]
        p_b = (gamma - 1) * (q_exprs[3] - (q_exprs[1] ** 2 + q_exprs[2] ** 2) / (2 * rho_b))
        t_b = p_b / (rg * rho_b)
        mu_bar = ((gamma - 1) * t_b) ** alpha
        du_bar = [[sp.diff(u_b[i], xs[j]) for j in range(2)] for i in range(2)]
        # corrected velocity gradient: overline coefficients, shadow derivatives
        du_c = [
            [
                (sp.diff(shadow[1 + i], xs[j]) - u_b[i] * sp.diff(shadow[0], xs[j])) / rho_b
                for j in range(2)
            ]
            for i in range(2)
        ]
        dp_c = [
            (gamma - 1)
            * (
                sp.diff(shadow[3], xs[j])
                - sp.Rational(1, 2)
                * sum(
                    u_b[k] * sp.diff(shadow[1 + k], xs[j]) + q_exprs[1 + k] * du_c[k][j]
                    for k in range(2)
                )
            )
            for j in range(2)
        ]
        dt_c = [(dp_c[j] - rg * t_b * sp.diff(shadow[0], xs[j])) / (rg * rho_b) for j in range(2)]
        div_u_c = du_c[0][0] + du_c[1][1]
        tau_c = [[0, 0], [0, 0]]
        for k in range(2):
            for i in range(2):
                tau_c[k][i] = mu_bar / Re * (du_c[i][k] + du_c[k][i])
                if k == i:
                    tau_c[k][i] += (mu_b - mu_bar / 2) / Re * div_u_c
        theta_c = [-mu_bar / (Re * Pr) * dt_c[i] for i in range(2)]
        # divergences: differentiate the corrected expressions directly; the
        # symbolic derivative applies the same product rule the code must.
        div_inv = [
            sum(sp.diff(col, xs[i]) for i, col in enumerate(cols))
            for cols in (
                [q_exprs[1], q_exprs[2]],
                [q_exprs[1] * u_b[0] + p_b, q_exprs[1] * u_b[1]],
                [q_exprs[2] * u_b[0], q_exprs[2] * u_b[1] + p_b],
                [u_b[0] * (q_exprs[3] + p_b), u_b[1] * (q_exprs[3] + p_b)],
            )
        ]
        dtau_div = [sum(sp.diff(tau_c[k][i], xs[i]) for i in range(2)) for k in range(2)]
        div_vis_mom = [-dtau_div[k] for k in range(2)]
        div_vis_e = (
            -sum(du_bar[k][i] * tau_c[k][i] for k in range(2) for i in range(2))
            - sum(u_b[k] * dtau_div[k] for k in range(2))
            + sum(sp.diff(theta_c[i], xs[i]) for i in range(2))
        )
        want_exprs = [
            -div_inv[0],
            -div_inv[1] - div_vis_mom[0],
            -div_inv[2] - div_vis_mom[1],
            -div_inv[3] - div_vis_e,
        ]

        rng = np.random.default_rng(3)
        xv = rng.uniform(0.1, 0.5, size=4)
        yv = rng.uniform(0.1, 0.5, size=4)
        qa, gq, hq = _exact_state(xv, yv, q_exprs, x, y)
        _, aux, gaux = _exact_state(xv, yv, shadow, x, y)
        model = CompressibleNS(Re=100.0, ndim=2, alpha=float(alpha))
        st = StateEval(q=qa, grad_q=gq, hess_q=hq, aux=aux, grad_aux=gaux)
        got = ns_rhs(model, st)
        want = np.stack([_num(ex, x, y, xv, yv) for ex in want_exprs], axis=-1)
        scale = np.max(np.abs(want)) + 1.0
        assert np.max(np.abs(got - want)) <= 1e-9 * scale

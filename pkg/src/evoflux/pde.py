"""Flux models: linear advection, linear diffusion, compressible Navier-Stokes.

States are batched: q (M, K), gradients (M, K, S), Hessians (M, K, S, S).
The auxiliary variable `aux` is the corrected solution gradient produced
by the domain coupling; `grad_aux` its gradient. The Navier-Stokes
right-hand side keeps the two gradient families separate: quantities
derived from (q, grad_q) alone are "discontinuous", quantities that pull
in (aux, grad_aux) are "corrected". Mixing them up changes the answer
whenever interface corrections are active, so the helper names carry a
d-/c- prefix throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DENSITY_FLOOR = 1e-12  # reject, never clamp: silent clamping hides divergence


class StateValidityError(ValueError):
    """Non-physical density or pressure encountered."""


@dataclass(frozen=True)
class Advection:
    """d q/dt + div(u q) = 0 with prescribed constant velocity."""

    u: tuple[float, ...]

    @property
    def ndim(self) -> int:
        return len(self.u)

    n_vars = 1
    var_names = ("q",)
    has_inviscid = True
    has_viscous = False


@dataclass(frozen=True)
class Diffusion:
    """d q/dt + div(-nu grad q) = 0."""

    nu: float
    ndim: int = 1

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")

    n_vars = 1
    var_names = ("q",)
    has_inviscid = False
    has_viscous = True


@dataclass(frozen=True)
class CompressibleNS:
    """Nondimensional compressible Navier-Stokes in conserved variables.

    Scaled by sound speed, so the wall/flow speeds are Mach numbers and
    Re is based on the sound speed. R_g defaults to (gamma-1)/gamma so
    that T = 1/(gamma-1) gives unit sound speed and p = R_g*T.
    """

    Re: float
    ndim: int = 2
    gamma: float = 1.4
    Pr: float = 0.72
    mu_b: float = 0.6
    alpha: float = 0.0  # viscosity power-law exponent, mu = ((gamma-1) T)^alpha
    R_g: float | None = None

    def __post_init__(self):
        if self.Re <= 0 or self.Pr <= 0 or self.gamma <= 1:
            raise ValueError("need Re > 0, Pr > 0, gamma > 1")
        if self.R_g is None:
            object.__setattr__(self, "R_g", (self.gamma - 1.0) / self.gamma)
        if self.R_g <= 0:
            raise ValueError("R_g must be positive")

    @property
    def n_vars(self) -> int:
        return self.ndim + 2

    @property
    def var_names(self) -> tuple[str, ...]:
        mom = tuple(f"rho_u{i + 1}" for i in range(self.ndim))
        return ("rho", *mom, "rho_e")

    has_inviscid = True
    has_viscous = True


FluxModel = Advection | Diffusion | CompressibleNS


@dataclass
class StateEval:
    """Solution data at sample points, as assembled by the coupling layer."""

    q: np.ndarray  # (M, K)
    grad_q: np.ndarray  # (M, K, S)
    hess_q: np.ndarray | None = None  # (M, K, S, S)
    aux: np.ndarray | None = None  # (M, K, S) corrected gradient
    grad_aux: np.ndarray | None = None  # (M, K, S, S)


@dataclass
class NsPrimitives:
    rho: np.ndarray  # (M,)
    u: np.ndarray  # (M, S)
    p: np.ndarray  # (M,)
    T: np.ndarray  # (M,)
    mu: np.ndarray  # (M,)


def primitives(model: CompressibleNS, q: np.ndarray, *, check: bool = True) -> NsPrimitives:
    q = np.atleast_2d(q)
    rho = q[:, 0]
    if check and np.any(rho <= DENSITY_FLOOR):
        raise StateValidityError(f"density below {DENSITY_FLOOR}")
    u = q[:, 1:-1] / rho[:, None]
    ke = 0.5 * np.einsum("ms,ms->m", q[:, 1:-1], u)
    p = (model.gamma - 1.0) * (q[:, -1] - ke)
    if check and np.any(p <= DENSITY_FLOOR):
        raise StateValidityError(f"pressure below {DENSITY_FLOOR}")
    temp = p / (model.R_g * rho)
    mu = ((model.gamma - 1.0) * temp) ** model.alpha
    return NsPrimitives(rho=rho, u=u, p=p, T=temp, mu=mu)


def conserved(model: CompressibleNS, rho, u, p) -> np.ndarray:
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.empty((rho.shape[0], model.n_vars))
    q[:, 0] = rho
    q[:, 1:-1] = rho[:, None] * u
    q[:, -1] = p / (model.gamma - 1.0) + 0.5 * rho * np.einsum("ms,ms->m", u, u)
    return q


def inviscid_flux(model: FluxModel, q: np.ndarray) -> np.ndarray:
    """Flux columns f[:, k, i] per direction i; zero for pure diffusion."""
    q = np.atleast_2d(q)
    m = q.shape[0]
    if isinstance(model, Advection):
        return q[:, :, None] * np.asarray(model.u)[None, None, :]
    if isinstance(model, Diffusion):
        return np.zeros((m, 1, model.ndim))
    pr = primitives(model, q)
    s = model.ndim
    f = np.empty((m, model.n_vars, s))
    f[:, 0, :] = q[:, 1:-1]
    for i in range(s):
        f[:, 1 : 1 + s, i] = q[:, 1:-1] * pr.u[:, i : i + 1]
        f[:, 1 + i, i] += pr.p
        f[:, -1, i] = pr.u[:, i] * (q[:, -1] + pr.p)
    return f


def _stress(model: CompressibleNS, mu: np.ndarray, du: np.ndarray) -> np.ndarray:
    """Viscous stress tau[:, k, i] from a velocity gradient du[:, i, j]=du_i/dx_j."""
    s = model.ndim
    div_u = np.einsum("mll->m", du)
    tau = (mu[:, None, None] / model.Re) * (np.swapaxes(du, 1, 2) + du)
    bulk = (model.mu_b - (s - 1) / s * mu) / model.Re * div_u
    tau[:, np.arange(s), np.arange(s)] += bulk[:, None]
    return tau


def _c_velocity_gradient(pr: NsPrimitives, a: np.ndarray) -> np.ndarray:
    """Velocity gradient du_i/dx_j built from a gradient family `a`."""
    return (a[:, 1:-1, :] - pr.u[:, :, None] * a[:, 0:1, :]) / pr.rho[:, None, None]


def _c_pressure_gradient(model, q, pr, a, du) -> np.ndarray:
    # d p/dx_j = (g-1)(d(rho e) - 0.5*(u_k d(rho u_k) + rho u_k du_k))
    terms = np.einsum("mk,mkj->mj", pr.u, a[:, 1:-1, :])
    terms += np.einsum("mk,mkj->mj", q[:, 1:-1], du)
    return (model.gamma - 1.0) * (a[:, -1, :] - 0.5 * terms)


def _c_temperature_gradient(model, pr, a, dp) -> np.ndarray:
    return (dp - model.R_g * pr.T[:, None] * a[:, 0, :]) / (model.R_g * pr.rho[:, None])


def viscous_flux(model: FluxModel, q: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Viscous flux columns from state q and corrected gradient a."""
    q = np.atleast_2d(q)
    m = q.shape[0]
    if isinstance(model, Advection):
        return np.zeros((m, 1, model.ndim))
    if isinstance(model, Diffusion):
        return -model.nu * np.atleast_3d(a)
    pr = primitives(model, q)
    du = _c_velocity_gradient(pr, a)
    dp = _c_pressure_gradient(model, q, pr, a, du)
    dT = _c_temperature_gradient(model, pr, a, dp)
    tau = _stress(model, pr.mu, du)
    theta = -(pr.mu[:, None] / (model.Re * model.Pr)) * dT
    s = model.ndim
    f = np.zeros((m, model.n_vars, s))
    f[:, 1 : 1 + s, :] = -np.swapaxes(tau, 1, 2)  # row s, column i -> -tau_si
    f[:, -1, :] = -np.einsum("mk,mki->mi", pr.u, tau) + theta
    return f


def ns_rhs(model: CompressibleNS, st: StateEval) -> np.ndarray:
    """-div f_inv - div f_vis with the corrected/discontinuous split.

    The inviscid divergence uses (q, grad_q) only. Inside the viscous
    divergence the transport coefficients and the factor velocities stay
    discontinuous while every differentiated velocity/temperature uses
    the corrected family (aux, grad_aux).
    """
    q = np.atleast_2d(st.q)
    gq, hq = st.grad_q, st.hess_q
    a = st.aux if st.aux is not None else gq
    ga = st.grad_aux if st.grad_aux is not None else hq
    if ga is None or hq is None:
        raise ValueError("ns_rhs needs second-order state data")
    m, s = q.shape[0], model.ndim
    pr = primitives(model, q)

    # discontinuous family
    d_du = _c_velocity_gradient(pr, gq)
    d_dp = _c_pressure_gradient(model, q, pr, gq, d_du)
    d_dT = _c_temperature_gradient(model, pr, gq, d_dp)
    gm1t = (model.gamma - 1.0) * pr.T
    d_dmu = model.alpha * gm1t[:, None] ** (model.alpha - 1.0) * (model.gamma - 1.0) * d_dT

    # corrected family
    c_du = _c_velocity_gradient(pr, a)
    c_dp = _c_pressure_gradient(model, q, pr, a, c_du)
    c_dT = _c_temperature_gradient(model, pr, a, c_dp)

    # second corrected velocity derivatives: d/dx_l of c_du[:, i, j]
    rho = pr.rho[:, None, None, None]
    c_du2 = ga[:, 1:-1, :, :]
    c_du2 = c_du2 - np.einsum("mil,mj->mijl", d_du, a[:, 0, :])
    c_du2 = c_du2 - np.einsum("mi,mjl->mijl", pr.u, ga[:, 0, :, :])
    c_du2 = c_du2 / rho
    c_du2 = c_du2 - np.einsum("mij,ml->mijl", c_du, gq[:, 0, :]) / rho

    # second corrected pressure/temperature derivatives
    half_terms = np.einsum("mkl,mkj->mjl", d_du, a[:, 1:-1, :])
    half_terms += np.einsum("mk,mkjl->mjl", pr.u, ga[:, 1:-1, :, :])
    half_terms += np.einsum("mkl,mkj->mjl", gq[:, 1:-1, :], c_du)
    half_terms += np.einsum("mk,mkjl->mjl", q[:, 1:-1], c_du2)
    c_dp2 = (model.gamma - 1.0) * (ga[:, -1, :, :] - 0.5 * half_terms)
    c_dT2 = c_dp2 - model.R_g * (
        np.einsum("ml,mj->mjl", d_dT, a[:, 0, :]) + pr.T[:, None, None] * ga[:, 0, :, :]
    )
    c_dT2 = c_dT2 / (model.R_g * pr.rho[:, None, None])
    c_dT2 = c_dT2 - np.einsum("mj,ml->mjl", c_dT, gq[:, 0, :]) / pr.rho[:, None, None]

    tau = _stress(model, pr.mu, c_du)

    # div tau: sum_i d tau[k, i]/dx_i
    c_s = (s - 1) / s
    div_c_du = np.einsum("mll->m", c_du)
    grad_div_u = np.einsum("mllk->mk", c_du2)  # d(div u)/dx_k
    dtau = np.einsum("mi,mik->mk", d_dmu, c_du + np.swapaxes(c_du, 1, 2)) / model.Re
    dtau += (pr.mu[:, None] / model.Re) * (
        np.einsum("miki->mk", c_du2) + np.einsum("mkii->mk", c_du2)
    )
    dtau += (-c_s * d_dmu * div_c_du[:, None] + (model.mu_b - c_s * pr.mu[:, None]) * grad_div_u) / model.Re

    # div theta
    div_theta = -(np.einsum("mi,mi->m", d_dmu, c_dT) + pr.mu * np.einsum("mii->m", c_dT2)) / (
        model.Re * model.Pr
    )

    # inviscid divergence, discontinuous throughout
    div_inv = np.empty((m, model.n_vars))
    div_inv[:, 0] = np.einsum("mii->m", gq[:, 1 : 1 + s, :])
    d_divu = np.einsum("mll->m", d_du)
    div_inv[:, 1 : 1 + s] = (
        np.einsum("mki,mi->mk", gq[:, 1 : 1 + s, :], pr.u)
        + q[:, 1 : 1 + s] * d_divu[:, None]
        + d_dp
    )
    div_inv[:, -1] = d_divu * (q[:, -1] + pr.p) + np.einsum(
        "mi,mi->m", pr.u, gq[:, -1, :] + d_dp
    )

    # viscous divergence per Appendix-style split
    div_vis = np.zeros((m, model.n_vars))
    div_vis[:, 1 : 1 + s] = -dtau
    div_vis[:, -1] = (
        -np.einsum("mki,mki->m", d_du, tau) - np.einsum("mk,mk->m", pr.u, dtau) + div_theta
    )
    return -div_inv - div_vis


def generic_rhs(model: FluxModel, st: StateEval) -> np.ndarray:
    """PDE operator N = -div f at the sample points."""
    if isinstance(model, Advection):
        u = np.asarray(model.u)
        return -np.einsum("mks,s->mk", st.grad_q, u)
    if isinstance(model, Diffusion):
        ga = st.grad_aux if st.grad_aux is not None else st.hess_q
        if ga is None:
            raise ValueError("diffusion rhs needs grad_aux or hess_q")
        return model.nu * np.einsum("mkii->mk", ga)
    return ns_rhs(model, st)


def max_wavespeed(model: CompressibleNS, q_minus, q_plus, n) -> np.ndarray:
    """Wavespeed estimate sqrt(gamma (p-+p+)/(rho-+rho+)) + |n.(u-+u+)|/2."""
    pm = primitives(model, np.atleast_2d(q_minus))
    pp = primitives(model, np.atleast_2d(q_plus))
    n = np.atleast_2d(n)
    acoustic = np.sqrt(model.gamma * (pm.p + pp.p) / (pm.rho + pp.rho))
    return acoustic + 0.5 * np.abs(np.einsum("ms,ms->m", n, pm.u + pp.u))

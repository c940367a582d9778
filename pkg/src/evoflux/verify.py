"""Property suites behind the `verify` command.

Each suite returns measured worst-case values against its pinned
tolerance so regressions show up as numbers, not just booleans.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pde
from .coupling import (
    CoupledOperator,
    MonomialCorrection,
    RiemannConfig,
    common_inviscid_normal_flux,
    common_solution,
    common_viscous_normal_flux,
    correction_eval,
)
from .evolve import MarchConfig, march
from .experiments import couette_state_eval, couette_steady
from .mesh import HIGH, LOW, ElementMesh, ElementPoints
from .net import (
    AFFINE_SCALE,
    PERIODIC_TORUS,
    FeatureLayer,
    NetworkSpec,
    eval_derivs,
    forward,
    init_params,
    param_jacobian,
)
from .sampling import adapt_points


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.tolerance


def suite_derivatives(n_cases: int = 100, seed: int = 99) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst_g = worst_h = worst_j = 0.0
    for _ in range(n_cases):
        s = int(rng.integers(1, 3))
        kind = AFFINE_SCALE if rng.random() < 0.7 else PERIODIC_TORUS
        box = tuple((0.0, float(rng.uniform(0.5, 3.0))) for _ in range(s))
        hidden = tuple(int(rng.integers(4, 11)) for _ in range(int(rng.integers(1, 3))))
        spec = NetworkSpec(FeatureLayer(kind, box), hidden=hidden)
        w = init_params(spec, rng)
        x = np.array([rng.uniform(0.1, 0.9) * box[d][1] for d in range(s)])
        ev = eval_derivs(spec, w, x)
        h1, h2 = 1e-5, 1e-4
        gscale = max(np.max(np.abs(ev.grad_x)), 1e-8)
        hscale = max(np.max(np.abs(ev.hess_x)), 1e-6)
        for d in range(s):
            dp, dm = x.copy(), x.copy()
            dp[d] += h1
            dm[d] -= h1
            fd = (forward(spec, w, dp) - forward(spec, w, dm)) / (2 * h1)
            worst_g = max(worst_g, abs(ev.grad_x[d] - fd) / gscale)
        for a in range(s):
            for b in range(s):
                pp, pm, mp, mm = (x.copy() for _ in range(4))
                pp[a] += h2; pp[b] += h2
                pm[a] += h2; pm[b] -= h2
                mp[a] -= h2; mp[b] += h2
                mm[a] -= h2; mm[b] -= h2
                fd = (
                    forward(spec, w, pp) - forward(spec, w, pm)
                    - forward(spec, w, mp) + forward(spec, w, mm)
                ) / (4 * h2 * h2)
                worst_h = max(worst_h, abs(ev.hess_x[a, b] - fd) / hscale)
        col = int(rng.integers(0, spec.n_params))
        wp, wm = w.copy(), w.copy()
        wp[col] += 1e-6
        wm[col] -= 1e-6
        fdj = (forward(spec, wp, x) - forward(spec, wm, x)) / 2e-6
        jac = param_jacobian(spec, w, x[None, :])[0, col]
        worst_j = max(worst_j, abs(jac - fdj) / max(abs(fdj), 1e-8))
    return [
        Check("gradient vs finite differences (relative)", worst_g, 1e-6),
        Check("hessian vs finite differences (relative)", worst_h, 1e-5),
        Check("parameter jacobian vs finite differences (relative)", worst_j, 1e-5),
    ]


def suite_riemann(seed: int = 4) -> list[Check]:
    rng = np.random.default_rng(seed)
    model = pde.CompressibleNS(Re=80.0, ndim=2, alpha=0.0)
    m = 16
    qm = pde.conserved(model, rng.uniform(0.5, 2, m), rng.uniform(-1, 1, (m, 2)), rng.uniform(0.4, 2, m))
    qp = pde.conserved(model, rng.uniform(0.5, 2, m), rng.uniform(-1, 1, (m, 2)), rng.uniform(0.4, 2, m))
    n = np.tile([1.0, 0.0], (m, 1))
    un = rng.standard_normal(m)
    worst_cons = worst_anti = 0.0
    for cfg in (RiemannConfig(inviscid="lax-friedrichs", r1=0.6), RiemannConfig(inviscid="rusanov")):
        f_eq = common_inviscid_normal_flux(cfg, model, qm, qm, n, un=un)
        want = np.einsum("mki,mi->mk", pde.inviscid_flux(model, qm), n)
        worst_cons = max(worst_cons, float(np.max(np.abs(f_eq - want))))
        a = common_inviscid_normal_flux(cfg, model, qm, qp, n, un=un)
        b = common_inviscid_normal_flux(cfg, model, qp, qm, -n, un=-un)
        worst_anti = max(worst_anti, float(np.max(np.abs(a + b))))
    fm = rng.standard_normal((m, 4))
    fp = rng.standard_normal((m, 4))
    cfg = RiemannConfig(r2=0.25)
    f_eq = common_viscous_normal_flux(cfg, fm, fm, qm, qm, un)
    worst_cons = max(worst_cons, float(np.max(np.abs(f_eq - fm))))
    a = common_viscous_normal_flux(cfg, fm, fp, qm, qp, un)
    b = common_viscous_normal_flux(cfg, -fp, -fm, qp, qm, -un)
    worst_anti = max(worst_anti, float(np.max(np.abs(a + b))))
    qs_eq = common_solution(qm, qm, un)
    worst_cons = max(worst_cons, float(np.max(np.abs(qs_eq - qm))))
    return [
        Check("riemann consistency F*(q,q) = F.n", worst_cons, 1e-13),
        Check("riemann antisymmetric pairing", worst_anti, 1e-13),
    ]


def suite_correction() -> list[Check]:
    worst_ep = 0.0
    worst_supp = 0.0
    worst_sym = 0.0
    worst_d2 = 0.0
    for p, w in [(15, 0.1), (3, 0.25), (3, 0.2), (1, 0.5), (5, 2.0)]:
        c = MonomialCorrection(p, w)
        gl, _, _ = correction_eval(c, "L", np.array([-1.0, 1.0]))
        gr, _, _ = correction_eval(c, "R", np.array([-1.0, 1.0]))
        worst_ep = max(worst_ep, abs(gl[0] - 1.0), abs(gl[1]), abs(gr[1] - 1.0), abs(gr[0]))
        r = np.linspace(-1, 1, 257)
        g, dg, d2g = correction_eval(c, "L", r)
        outside = r > -1.0 + w
        if np.any(outside):
            worst_supp = max(
                worst_supp,
                float(np.max(np.abs(g[outside]))),
                float(np.max(np.abs(dg[outside]))),
                float(np.max(np.abs(d2g[outside]))),
            )
        gr2, dgr2, d2gr2 = correction_eval(c, "R", -r)
        worst_sym = max(worst_sym, float(np.max(np.abs(g - gr2))), float(np.max(np.abs(dg + dgr2))))
        if p >= 3:
            _, _, edge = correction_eval(c, "L", -1.0 + w)
            worst_d2 = max(worst_d2, abs(float(edge)))
    return [
        Check("correction endpoint conditions", worst_ep, 1e-15),
        Check("correction zero outside support", worst_supp, 0.0),
        Check("correction left/right symmetry", worst_sym, 1e-15),
        # the float edge coordinate -1+w lands one ulp off the exact edge,
        # amplified by p(p-1)/w^2; 1e-12 is the honest machine-precision scale
        Check("correction d2g continuity at support edge (p>=3)", worst_d2, 1e-12),
    ]


def _two_element_operator(bounds, counts, seed, dims=1):
    mesh = ElementMesh(bounds, [2] + [1] * (dims - 1), [False] * dims)
    model = pde.Diffusion(nu=1.0, ndim=dims)
    specs, points, weights = {}, {}, {}
    rng = np.random.default_rng(seed)
    for e in mesh.elements:
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(e.bounds, counts)]
        points[e.eid] = ElementPoints(e, axes)
        spec = NetworkSpec(FeatureLayer(AFFINE_SCALE, e.bounds), hidden=(8, 8))
        specs[(e.eid, "q")] = spec
        weights[(e.eid, "q")] = init_params(spec, rng)
    op = CoupledOperator(
        mesh,
        model,
        specs,
        points,
        RiemannConfig(direction=(1.0,) * dims),
        solution_correction=MonomialCorrection(3, 0.25),
        flux_correction=MonomialCorrection(3, 0.25),
    )
    return op, weights


def suite_continuity(seed: int = 12) -> list[Check]:
    op, weights = _two_element_operator([(0.0, 2.0)], [17], seed)
    stage = op.exchange(weights)
    va = op.corrected_value(0, (0, HIGH), stage)
    vb = op.corrected_value(1, (0, LOW), stage)
    worst_1d = float(np.max(np.abs(va - vb)))
    op2, weights2 = _two_element_operator([(0.0, 2.0), (0.0, 1.0)], [9, 9], seed + 1, dims=2)
    stage2 = op2.exchange(weights2)
    va2 = op2.corrected_value(0, (0, HIGH), stage2)
    vb2 = op2.corrected_value(1, (0, LOW), stage2)
    r_y = op2.points[0].reference((0, HIGH), 1)
    away = np.abs(r_y) < 1.0 - 0.25 - 1e-12
    worst_2d = float(np.max(np.abs(va2[away] - vb2[away])))
    return [
        Check("corrected-solution continuity, 1d shared point", worst_1d, 1e-12),
        Check("corrected-solution continuity, 2d away from corners", worst_2d, 1e-12),
    ]


def suite_sampling(seed: int = 5) -> list[Check]:
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 2.0, 24)
    h = rng.uniform(0.1, 9.0, 24)
    out = adapt_points(x, h, beta=0.0)
    dev = float(np.max(np.abs(out - np.linspace(0, 2, 24))))
    out2 = adapt_points(x, h, beta=0.9)
    total = abs(float(np.sum(np.diff(out2))) - 2.0)
    return [
        Check("adaptive beta=0 equispaced", dev, 1e-13),
        Check("adaptive spacings sum to interval", total, 1e-13),
    ]


def suite_rk4() -> list[Check]:
    dts = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 1e-3]
    errs = []
    for dt in dts:
        w = march(
            {"w": np.array([1.0])},
            lambda t, s, f: {"w": -s["w"]},
            MarchConfig(dt=dt, steps=round(1.0 / dt)),
        )
        errs.append(abs(w["w"][0] - np.exp(-1.0)))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return [Check("rk4 convergence slope within 4 +- 0.2", abs(slope - 4.0), 0.2)]


def suite_couette() -> list[Check]:
    checks = []
    y = np.linspace(0.0, 1.0, 41)
    worst_rel = 0.0
    worst_mono = 0.0
    for mach in (0.2, 2.0):
        u1, temp, p = couette_steady(y, mach)
        gamma, pr = 1.4, 0.72
        b = 0.5 * pr * (gamma - 1.0) * mach * mach
        phi = u1 / mach
        resid = phi * (1 + b) - (b / 3) * phi**3 - (1 + 2 * b / 3) * y
        worst_rel = max(worst_rel, float(np.max(np.abs(resid))))
        worst_mono = max(worst_mono, float(np.max(np.diff(u1) <= 0)))
    checks.append(Check("couette implicit relation residual", worst_rel, 1e-12))
    checks.append(Check("couette velocity monotone in y", worst_mono, 0.0))
    worst_rhs = 0.0
    for mach in (0.2, 2.0):
        model = pde.CompressibleNS(Re=100.0, ndim=2, alpha=1.0)
        st = couette_state_eval(model, np.linspace(0.02, 0.98, 20), mach)
        rhs = pde.ns_rhs(model, st)
        worst_rhs = max(worst_rhs, float(np.max(np.abs(rhs))))
    checks.append(Check("couette steady-state rhs residual", worst_rhs, 1e-8))
    return checks


SUITES = {
    "derivatives": suite_derivatives,
    "riemann": suite_riemann,
    "correction": suite_correction,
    "continuity": suite_continuity,
    "sampling": suite_sampling,
    "rk4": suite_rk4,
    "couette": suite_couette,
}


class UnknownSuite(ValueError):
    def __init__(self, name):
        super().__init__(f"unknown suite {name!r}; available: {', '.join(sorted(SUITES))}")


def run_suites(names=None) -> tuple[list[tuple[str, Check]], bool]:
    names = list(names) if names else sorted(SUITES)
    for name in names:
        if name not in SUITES:
            raise UnknownSuite(name)
    results = []
    ok = True
    for name in names:
        for check in SUITES[name]():
            results.append((name, check))
            ok = ok and check.passed
    return results, ok

import numpy as np
import pytest

from evoflux import pde
from evoflux.coupling import (
    CoupledOperator,
    MonomialCorrection,
    RiemannConfig,
    common_inviscid_normal_flux,
    common_solution,
    common_viscous_normal_flux,
    correction_eval,
)
from evoflux.mesh import (
    HIGH,
    LOW,
    ElementMesh,
    ElementPoints,
    face_normal,
    validate_pair_points,
)
from evoflux.net import (
    AFFINE_SCALE,
    PERIODIC_TORUS,
    FeatureLayer,
    NetworkSpec,
    fit_initial,
    init_params,
)
from evoflux.sampling import uniform_grid


class TestMesh:
    def test_elements_tile_domain(self):
        mesh = ElementMesh([(-np.pi, np.pi), (-np.pi, np.pi)], [2, 2], [True, True])
        assert len(mesh.elements) == 4
        los = sorted(tuple(e.bounds[0]) for e in mesh.elements)
        assert los[0] == (-np.pi, 0.0) and los[-1] == (0.0, np.pi)

    def test_interior_and_periodic_pairs(self):
        mesh = ElementMesh([(0.0, 2.0)], [2], [True])
        assert len(mesh.pairs) == 2
        interior = [p for p in mesh.pairs if p.shift == (0.0,)]
        wrap = [p for p in mesh.pairs if p.shift != (0.0,)]
        assert len(interior) == 1 and len(wrap) == 1
        assert wrap[0].shift == (-2.0,)

    def test_pairing_is_involution(self):
        mesh = ElementMesh([(0.0, 1.0), (0.0, 1.0)], [2, 3], [True, False])
        seen = set()
        for pair in mesh.pairs:
            assert pair.minus not in seen and pair.plus not in seen
            seen.add(pair.minus)
            seen.add(pair.plus)
        # y is not periodic: bottom/top boundary faces stay unpaired
        for e in mesh.elements:
            if e.bounds[1][0] == 0.0:
                assert (e.eid, 1, LOW) not in mesh.face_to_pair

    def test_single_element_periodic_self_pair(self):
        mesh = ElementMesh([(0.0, 1.0)], [1], [True])
        assert len(mesh.pairs) == 1
        assert mesh.pairs[0].minus[0] == mesh.pairs[0].plus[0] == 0

    def test_projection_indices(self):
        mesh = ElementMesh([(0.0, 1.0), (0.0, 2.0)], [1, 1], [False, False])
        ep = ElementPoints(mesh.elements[0], [np.linspace(0, 1, 3), np.linspace(0, 2, 4)])
        proj = ep.proj("interior", 0, LOW)  # onto the x-low face: index = j
        multi = np.indices((3, 4)).reshape(2, -1).T
        assert np.array_equal(proj, multi[:, 1])
        face_pts = ep.coords((0, LOW))
        assert face_pts.shape == (4, 2)
        assert np.allclose(face_pts[:, 0], 0.0)
        # face->face projection lands on corners
        proj_ff = ep.proj((0, LOW), 1, HIGH)
        assert np.array_equal(proj_ff, [0, 0, 0, 0][:4]) or proj_ff.shape == (4,)

    def test_validate_pair_points_detects_mismatch(self):
        mesh = ElementMesh([(0.0, 2.0)], [2], [False])
        pts = {
            0: ElementPoints(mesh.elements[0], [np.linspace(0, 1, 5)]),
            1: ElementPoints(mesh.elements[1], [np.linspace(1, 2, 5)]),
        }
        validate_pair_points(mesh, pts)  # conforming: fine

    def test_face_normals(self):
        assert np.allclose(face_normal(2, 0, LOW), [-1, 0])
        assert np.allclose(face_normal(2, 1, HIGH), [0, 1])


class TestCorrectionFunctions:
    @pytest.mark.parametrize("p,w", [(15, 0.1), (3, 0.25), (3, 0.2), (1, 0.5), (2, 1.0), (5, 2.0)])
    def test_endpoint_conditions(self, p, w):
        c = MonomialCorrection(p=p, w=w)
        gl, _, _ = correction_eval(c, "L", np.array([-1.0, 1.0]))
        gr, _, _ = correction_eval(c, "R", np.array([-1.0, 1.0]))
        assert gl[0] == 1.0 and gl[1] == 0.0
        assert gr[1] == 1.0 and gr[0] == 0.0

    def test_monomial_value_at_r(self):
        c = MonomialCorrection(p=15, w=0.1)
        g, _, _ = correction_eval(c, "L", -0.95)
        assert np.isclose(g, 0.5**15, rtol=1e-12)

    def test_zero_outside_support(self):
        c = MonomialCorrection(p=4, w=0.3)
        r = np.linspace(-1 + 0.3 + 1e-12, 1.0, 50)
        g, dg, d2g = correction_eval(c, "L", r)
        assert np.all(g == 0.0) and np.all(dg == 0.0) and np.all(d2g == 0.0)

    def test_left_right_symmetry(self):
        c = MonomialCorrection(p=7, w=0.4)
        r = np.linspace(-1, 1, 101)
        gl, dgl, d2gl = correction_eval(c, "L", r)
        gr, dgr, d2gr = correction_eval(c, "R", -r)
        assert np.allclose(gl, gr, atol=0)
        assert np.allclose(dgl, -dgr, atol=0)
        assert np.allclose(d2gl, d2gr, atol=0)

    def test_second_derivative_continuous_at_support_edge_for_p_ge_3(self):
        for p in (3, 4, 9):
            c = MonomialCorrection(p=p, w=0.25)
            _, _, d2g = correction_eval(c, "L", -1 + 0.25)
            assert d2g == 0.0
        # p = 2 keeps a kink: constant curvature inside, zero outside
        _, _, d2g = correction_eval(MonomialCorrection(p=2, w=0.25), "L", -1 + 0.25 - 1e-9)
        assert d2g != 0.0

    def test_derivative_value_at_face(self):
        c = MonomialCorrection(p=15, w=0.1)
        _, dg, _ = correction_eval(c, "L", -1.0)
        assert np.isclose(dg, -15.0 / 0.1)


class TestRiemannSolvers:
    def setup_method(self):
        self.ns = pde.CompressibleNS(Re=50.0, ndim=2, alpha=0.0)
        rng = np.random.default_rng(0)
        self.qm = pde.conserved(self.ns, rng.uniform(0.5, 2, 4), rng.uniform(-1, 1, (4, 2)), rng.uniform(0.4, 2, 4))
        self.qp = pde.conserved(self.ns, rng.uniform(0.5, 2, 4), rng.uniform(-1, 1, (4, 2)), rng.uniform(0.4, 2, 4))
        self.n = np.tile([1.0, 0.0], (4, 1))

    def test_common_solution_upwind_sides(self):
        qm, qp = np.array([[1.0, 2.0]]), np.array([[3.0, 5.0]])
        assert np.allclose(common_solution(qm, qp, np.array([0.7])), qm)
        assert np.allclose(common_solution(qm, qp, np.array([-0.7])), qp)
        assert np.allclose(common_solution(qm, qp, np.array([0.0])), 0.5 * (qm + qp))
        assert np.allclose(common_solution(qm, qm, np.array([0.3])), qm)

    def test_lax_friedrichs_central_when_r1_zero(self):
        model = pde.Advection(u=(1.0,))
        cfg = RiemannConfig(r1=0.0)
        qm, qp = np.array([[1.0]]), np.array([[0.0]])
        n = np.array([[1.0]])
        f = common_inviscid_normal_flux(cfg, model, qm, qp, n, un=np.array([1.0]))
        assert np.isclose(f[0, 0], 0.5)

    def test_lax_friedrichs_fully_upwind_example(self):
        model = pde.Advection(u=(1.0,))
        cfg = RiemannConfig(r1=1.0)
        f = common_inviscid_normal_flux(
            cfg, model, np.array([[1.0]]), np.array([[0.0]]), np.array([[1.0]]), un=np.array([1.0])
        )
        assert np.isclose(f[0, 0], 1.0)

    def test_consistency_equal_states(self):
        # all three operators return f(q, a) . n for identical traces
        for cfg in (RiemannConfig(inviscid="lax-friedrichs"), RiemannConfig(inviscid="rusanov")):
            f = common_inviscid_normal_flux(cfg, self.ns, self.qm, self.qm, self.n,
                                            un=np.zeros(4) if cfg.inviscid != "rusanov" else None)
            want = np.einsum("mki,mi->mk", pde.inviscid_flux(self.ns, self.qm), self.n)
            assert np.max(np.abs(f - want)) <= 1e-13 * max(1.0, np.max(np.abs(want)))
        rng = np.random.default_rng(1)
        fm = rng.standard_normal((4, 4))
        f = common_viscous_normal_flux(RiemannConfig(), fm, fm, self.qm, self.qm, rng.standard_normal(4))
        assert np.max(np.abs(f - fm)) <= 1e-13

    def test_ldg_downwind_side_and_penalty(self):
        cfg = RiemannConfig(r2=0.1)
        fm = np.array([[2.0]])
        fp = np.array([[6.0]])
        qm, qp = np.array([[1.0]]), np.array([[0.5]])
        f = common_viscous_normal_flux(cfg, fm, fp, qm, qp, np.array([1.0]))
        assert np.isclose(f[0, 0], 6.0 + 0.1 * 0.5)  # downwind flux + jump penalty
        f0 = common_viscous_normal_flux(cfg, fm, fm, qm, qp, np.array([0.0]))
        assert np.isclose(f0[0, 0], 2.0 + 0.1 * 0.5)

    def test_conservation_pairing_antisymmetry(self):
        # swapping sides and flipping the normal negates each common flux
        rng = np.random.default_rng(2)
        un = rng.standard_normal(4)
        for cfg in (RiemannConfig(inviscid="lax-friedrichs", r1=0.73), RiemannConfig(inviscid="rusanov")):
            a = common_inviscid_normal_flux(cfg, self.ns, self.qm, self.qp, self.n, un=un)
            b = common_inviscid_normal_flux(cfg, self.ns, self.qp, self.qm, -self.n, un=-un)
            assert np.max(np.abs(a + b)) <= 1e-13 * max(1.0, np.max(np.abs(a)))
        fm = rng.standard_normal((4, 4))
        fp = rng.standard_normal((4, 4))
        cfg = RiemannConfig(r2=0.3)
        a = common_viscous_normal_flux(cfg, fm, fp, self.qm, self.qp, un)
        b = common_viscous_normal_flux(cfg, -fp, -fm, self.qp, self.qm, -un)
        assert np.max(np.abs(a + b)) <= 1e-13 * max(1.0, np.max(np.abs(a)))

    def test_advection_upwind_scalar_matches_trace(self):
        # u.n > 0: fully upwind LF flux equals u * q_minus
        model = pde.Advection(u=(2.0,))
        cfg = RiemannConfig(r1=1.0)
        qm, qp = np.array([[0.8]]), np.array([[0.1]])
        f = common_inviscid_normal_flux(cfg, model, qm, qp, np.array([[1.0]]), un=np.array([2.0]))
        assert np.isclose(f[0, 0], 2.0 * 0.8)


def diffusion_operator(mesh, pts_per_dim, hidden=(8, 8), g=MonomialCorrection(3, 0.25),
                       h=MonomialCorrection(3, 0.25), feature=AFFINE_SCALE, seed=0):
    model = pde.Diffusion(nu=1.0, ndim=mesh.ndim)
    specs, points, weights = {}, {}, {}
    rng = np.random.default_rng(seed)
    for e in mesh.elements:
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(e.bounds, pts_per_dim)]
        points[e.eid] = ElementPoints(e, axes)
        spec = NetworkSpec(FeatureLayer(feature, e.bounds), hidden=hidden)
        specs[(e.eid, "q")] = spec
        weights[(e.eid, "q")] = init_params(spec, rng)
    op = CoupledOperator(mesh, model, specs, points, RiemannConfig(direction=(1.0,) * mesh.ndim),
                         solution_correction=g, flux_correction=h)
    validate_pair_points(mesh, points)
    return op, weights


class TestCoupledOperator:
    def test_zero_jump_leaves_gradients_uncorrected(self):
        # identical weights on both elements of a periodic pair produce
        # identical traces, zero jumps, and aux == grad exactly
        mesh = ElementMesh([(0.0, 2.0)], [2], [True])
        op, weights = diffusion_operator(mesh, [21])
        weights[(1, "q")] = weights[(0, "q")].copy()
        # same parameters but different boxes still give different traces;
        # instead test the single-element periodic wrap with torus features
        mesh1 = ElementMesh([(0.0, 1.0)], [1], [True])
        model = pde.Diffusion(nu=1.0, ndim=1)
        e = mesh1.elements[0]
        ep = ElementPoints(e, [np.linspace(0, 1, 31)])
        spec = NetworkSpec(FeatureLayer(PERIODIC_TORUS, e.bounds), hidden=(8,))
        w = init_params(spec, np.random.default_rng(3))
        op1 = CoupledOperator(mesh1, model, {(0, "q"): spec}, {0: ep},
                              RiemannConfig(direction=(1.0,)),
                              solution_correction=MonomialCorrection(3, 0.25),
                              flux_correction=MonomialCorrection(3, 0.25))
        stage = op1.exchange({(0, "q"): w})
        # identical wrap traces up to the ulp-level row reordering of the
        # batched evaluation: all interface corrections sit at machine zero
        assert np.max(np.abs(stage.qdelta[(0, 0, HIGH)])) <= 1e-15
        assert np.max(np.abs(stage.qdelta[(0, 0, LOW)])) <= 1e-15
        assert np.max(np.abs(stage.fdelta[(0, 0, HIGH)])) <= 1e-13
        assert np.max(np.abs(stage.fdelta[(0, 0, LOW)])) <= 1e-13
        st = op1.corrected_state(0, stage)
        ev = stage.evals[0]
        assert np.allclose(st.aux, ev.grad_q, atol=1e-14)
        assert np.allclose(st.grad_aux, ev.hess_q, atol=1e-13)
        rhs = op1.element_rhs(0, stage)
        want = pde.generic_rhs(model, pde.StateEval(q=ev.q, grad_q=ev.grad_q,
                                                    hess_q=ev.hess_q, aux=ev.grad_q,
                                                    grad_aux=ev.hess_q))
        assert np.allclose(rhs, want, atol=1e-12)

    def test_interior_points_beyond_width_see_no_correction(self):
        mesh = ElementMesh([(0.0, 2.0)], [2], [True])
        op, weights = diffusion_operator(mesh, [41], g=MonomialCorrection(3, 0.2),
                                         h=MonomialCorrection(3, 0.2))
        stage = op.exchange(weights)
        st = op.corrected_state(0, stage)
        ev = stage.evals[0]
        r = op.points[0].reference("interior", 0)
        far = np.abs(r) < 1.0 - 0.2 - 1e-12  # outside both faces' support
        assert np.max(np.abs(st.aux[far] - ev.grad_q[far])) == 0.0
        near = ~far
        assert np.max(np.abs(st.aux[near] - ev.grad_q[near])) > 0.0

    def test_two_element_corrected_solution_continuity(self):
        # the shared common solution forces both corrected traces to agree
        mesh = ElementMesh([(0.0, 2.0)], [2], [False])
        op, weights = diffusion_operator(mesh, [17], seed=5)
        stage = op.exchange(weights)
        va = op.corrected_value(0, (0, HIGH), stage)
        vb = op.corrected_value(1, (0, LOW), stage)
        jump_before = abs(float(stage.evals[0].face_q[(0, HIGH)][0, 0]
                                - stage.evals[1].face_q[(0, LOW)][0, 0]))
        assert jump_before > 1e-3  # random nets genuinely disagree
        assert np.max(np.abs(va - vb)) <= 1e-12

    def test_corrected_solution_continuity_2d_away_from_corners(self):
        mesh = ElementMesh([(0.0, 2.0), (0.0, 1.0)], [2, 1], [False, False])
        w = 0.25
        op, weights = diffusion_operator(mesh, [9, 9], g=MonomialCorrection(3, w),
                                         h=MonomialCorrection(3, w), seed=7)
        stage = op.exchange(weights)
        va = op.corrected_value(0, (0, HIGH), stage)
        vb = op.corrected_value(1, (0, LOW), stage)
        r_y = op.points[0].reference((0, HIGH), 1)
        interiorish = np.abs(r_y) < 1.0 - w - 1e-12
        assert interiorish.sum() >= 3
        assert np.max(np.abs(va[interiorish] - vb[interiorish])) <= 1e-12

    def test_missing_neighbor_data_raises(self):
        from evoflux.coupling import SynchronizationError

        mesh = ElementMesh([(0.0, 2.0)], [2], [True])
        op, weights = diffusion_operator(mesh, [11])
        stage = op.exchange(weights)
        stage.qdelta.pop((0, 0, HIGH))
        with pytest.raises(SynchronizationError, match="element 0"):
            op.corrected_state(0, stage)

    def test_rhs_matches_laplacian_for_fitted_sine(self):
        # single periodic element, torus features, fitted to sin x sin y:
        # N at an interior grid point approximates the analytic Laplacian
        mesh = ElementMesh([(-np.pi, np.pi), (-np.pi, np.pi)], [1, 1], [True, True])
        model = pde.Diffusion(nu=1.0, ndim=2)
        e = mesh.elements[0]
        ep = ElementPoints(e, [np.linspace(-np.pi, np.pi, 33)] * 2)
        spec = NetworkSpec(FeatureLayer(PERIODIC_TORUS, e.bounds), hidden=(12, 12),
                           out_range=(-1.0, 1.0))
        res = fit_initial(spec, lambda p: np.sin(p[:, 0]) * np.sin(p[:, 1]),
                          ep.coords("interior"), tol=2e-6, max_iters=800, seed=2,
                          gn_iters=300, restarts=2)
        assert res.rms <= 5e-5
        op = CoupledOperator(mesh, model, {(0, "q"): spec}, {0: ep},
                             RiemannConfig(direction=(1.0, 1.0)),
                             solution_correction=MonomialCorrection(3, 0.25),
                             flux_correction=MonomialCorrection(3, 0.25))
        stage = op.exchange({(0, "q"): res.weights})
        rhs = op.element_rhs(0, stage)
        pts = ep.coords("interior")
        # N = nu * laplacian(sin x sin y) = -2 nu sin x sin y
        want = -2.0 * model.nu * np.sin(pts[:, 0]) * np.sin(pts[:, 1])
        idx = np.argmin(np.abs(pts[:, 0] - np.pi / 2) + np.abs(pts[:, 1] - np.pi / 2))
        assert abs(rhs[idx, 0] - want[idx]) <= 2e-2
        assert np.max(np.abs(rhs[:, 0] - want)) <= 0.1

"""Interface coupling: correction functions, Riemann solvers, element operator.

Per stage, each element publishes its boundary traces, the common
interface values are computed once per interface, and the resulting
solution/flux corrections are spread into the element interiors through
one-sided monomial correction functions. The per-element operator is

    N_e = -div f_e^D  -  sum_faces fdelta * d(h)/dx

with the divergence evaluated on the corrected state (auxiliary gradient
family) and fdelta the mismatch between common and local normal fluxes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pde
from .mesh import HIGH, LOW, ElementMesh, ElementPoints, face_normal
from .net import NetworkSpec, evaluate


@dataclass(frozen=True)
class MonomialCorrection:
    """One-sided monomial of order p supported within width w of a face.

    The left-face function is ((r+1-w)/(-w))^p for r <= -1+w and zero
    elsewhere; the right-face function is its mirror image. Value 1 on
    the owning face, 0 from the support edge inward. The second
    derivative is continuous at the support edge only for p >= 3.
    """

    p: int
    w: float

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("order p must be >= 1")
        if not 0.0 < self.w <= 2.0:
            raise ValueError("width w must lie in (0, 2]")


def correction_eval(c: MonomialCorrection, side: str, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value and first two derivatives (in r) of the one-sided monomial."""
    r = np.asarray(r, dtype=float)
    if side == "R":
        g, dg, d2g = correction_eval(c, "L", -r)
        return g, -dg, d2g
    if side != "L":
        raise ValueError("side must be 'L' or 'R'")
    xi = (r + 1.0 - c.w) / (-c.w)
    inside = r <= -1.0 + c.w
    g = np.where(inside, xi**c.p, 0.0)
    dg = np.where(inside, c.p * xi ** (c.p - 1) * (-1.0 / c.w), 0.0)
    if c.p >= 2:
        d2g = np.where(inside, c.p * (c.p - 1) * xi ** (c.p - 2) / c.w**2, 0.0)
    else:
        d2g = np.zeros_like(g)
    return g, dg, d2g


@dataclass(frozen=True)
class RiemannConfig:
    """Interface solver choices: upwinded common solution, Lax-Friedrichs or
    Rusanov inviscid flux, downwinded common viscous flux with jump penalty."""

    inviscid: str = "lax-friedrichs"  # or "rusanov"
    r1: float = 1.0  # inviscid jump weight; 0 central, 1 fully upwind
    r2: float = 0.1  # viscous solution-jump penalty
    direction: tuple[float, ...] | None = None  # prescribed wave direction

    def __post_init__(self):
        if self.inviscid not in ("lax-friedrichs", "rusanov"):
            raise ValueError(f"unknown inviscid solver {self.inviscid!r}")
        if not 0.0 <= self.r1 <= 1.0:
            raise ValueError("r1 must lie in [0, 1]")
        if self.r2 < 0.0:
            raise ValueError("r2 must be nonnegative")


def common_solution(q_minus, q_plus, un) -> np.ndarray:
    """Upwinded common interface solution from the two traces.

    un is the wave direction dotted with the minus-side outward normal;
    un > 0 picks the minus trace, un < 0 the plus trace, 0 the average.
    """
    q_minus, q_plus = np.atleast_2d(q_minus), np.atleast_2d(q_plus)
    sg = np.sign(np.asarray(un))[:, None]
    return 0.5 * (q_minus + q_plus) + sg * 0.5 * (q_minus - q_plus)


def common_inviscid_normal_flux(cfg, model, q_minus, q_plus, n, un=None) -> np.ndarray:
    """Common inviscid flux dotted with the minus-side normal."""
    q_minus, q_plus = np.atleast_2d(q_minus), np.atleast_2d(q_plus)
    n = np.atleast_2d(n)
    fm = np.einsum("mki,mi->mk", pde.inviscid_flux(model, q_minus), n)
    fp = np.einsum("mki,mi->mk", pde.inviscid_flux(model, q_plus), n)
    central = 0.5 * (fm + fp)
    if cfg.inviscid == "rusanov":
        s = pde.max_wavespeed(model, q_minus, q_plus, n)
        return central + 0.5 * s[:, None] * (q_minus - q_plus)
    if un is None:
        raise ValueError("lax-friedrichs needs the normal wave speed un")
    return central + 0.5 * cfg.r1 * np.abs(np.asarray(un))[:, None] * (q_minus - q_plus)


def common_viscous_normal_flux(cfg, f_minus_n, f_plus_n, q_minus, q_plus, un) -> np.ndarray:
    """Downwinded common viscous normal flux with solution-jump penalty.

    Takes the two sides' viscous fluxes already dotted with the
    minus-side normal; downwinding mirrors the upwinded common solution
    so the viscous scheme stays centered.
    """
    sg = np.sign(np.asarray(un))[:, None]
    q_minus, q_plus = np.atleast_2d(q_minus), np.atleast_2d(q_plus)
    return (
        0.5 * (f_minus_n + f_plus_n)
        - sg * 0.5 * (f_minus_n - f_plus_n)
        + cfg.r2 * (q_minus - q_plus)
    )


class SynchronizationError(RuntimeError):
    """Neighbor boundary data missing for a face."""


@dataclass
class ElementEval:
    """Raw per-element network evaluations for one stage."""

    q: np.ndarray  # (M, K) at interior points
    grad_q: np.ndarray  # (M, K, S)
    hess_q: np.ndarray | None  # (M, K, S, S), viscous models only
    face_q: dict  # (dim, side) -> (Mf, K)
    face_grad: dict  # (dim, side) -> (Mf, K, S) when viscous


@dataclass
class StageData:
    """Everything exchanged between elements for one stage."""

    evals: dict[int, ElementEval]
    qdelta: dict  # (eid, dim, side) -> (Mf, K) common-minus-local solution
    fdelta: dict  # (eid, dim, side) -> (Mf, K) flux correction on the face
    max_jump: float = 0.0


class CoupledOperator:
    """Assembles the corrected per-element PDE operator for a mesh.

    Correction-function tables and projection index maps are precomputed
    per element at construction; they depend only on the sample-point
    layout, which is static whenever interfaces are present.
    """

    def __init__(
        self,
        mesh: ElementMesh,
        model: pde.FluxModel,
        specs: dict,  # (eid, var) -> NetworkSpec
        points: dict[int, ElementPoints],
        riemann: RiemannConfig = RiemannConfig(),
        solution_correction: MonomialCorrection | None = None,
        flux_correction: MonomialCorrection | None = None,
        boundary_states: dict | None = None,
        boundary_flux_correction: MonomialCorrection | None = None,
    ):
        self.mesh = mesh
        self.model = model
        self.specs = specs
        self.points = points
        self.riemann = riemann
        self.g_corr = solution_correction
        self.h_corr = flux_correction
        # boundary faces keep their own flux correction: it is the carrier of
        # prescribed boundary data, distinct from the interface correction
        self.hb_corr = boundary_flux_correction or flux_correction
        # (eid, dim, side) -> callable(points, t) -> (Mf, K): exterior trace
        # for a domain-boundary face, entering through the usual common-flux
        # machinery (a boundary Riemann problem with prescribed data)
        self.boundary_states = dict(boundary_states or {})
        self.var_names = model.var_names
        for (eid, d, side) in self.boundary_states:
            if (eid, d, side) in mesh.face_to_pair:
                raise ValueError(f"face {(eid, d, side)} is interior but has boundary data")
            if model.has_viscous:
                raise ValueError("boundary Riemann data currently supports inviscid models only")
        self._tables = {}
        for eid in points:
            self._build_tables(eid)

    def _active_faces(self, eid: int) -> list:
        faces = list(self.mesh.paired_faces(eid))
        for (e, d, side) in self.boundary_states:
            if e == eid:
                faces.append((d, side))
        return faces

    def _face_h(self, eid: int, face) -> MonomialCorrection | None:
        if (eid, *face) in self.boundary_states:
            return self.hb_corr
        return self.h_corr

    # -- static geometry tables ------------------------------------------

    def _build_tables(self, eid: int) -> None:
        """Correction values (chained through dr/dx) per face per point group."""
        ep = self.points[eid]
        faces = self._active_faces(eid)
        groups = ["interior"] + faces
        tab = {}
        for fd, fs in faces:
            lo, hi = ep.element.bounds[fd]
            chain = 2.0 / (hi - lo)
            side = "L" if fs == LOW else "R"
            # the flux mismatch is expressed along the face's outward normal,
            # so the vector correction function points outward too; on low
            # faces that flips the divergence sign (f_e . n = f* on the face
            # forces h(face) . n = 1, and conservation breaks otherwise)
            orient = -1.0 if fs == LOW else 1.0
            for grp in groups:
                r = ep.reference(grp, fd)
                entry = {}
                if self.g_corr is not None:
                    g, dg, d2g = correction_eval(self.g_corr, side, r)
                    entry["g"] = g
                    entry["dg"] = dg * chain
                    entry["d2g"] = d2g * chain * chain
                h_corr = self._face_h(eid, (fd, fs))
                if h_corr is not None:
                    _, dh, _ = correction_eval(h_corr, side, r)
                    entry["divh"] = dh * chain * orient
                entry["proj"] = ep.proj(grp, fd, fs)
                tab[(fd, fs, grp)] = entry
        self._tables[eid] = tab

    def rebuild_tables(self, eid: int) -> None:
        self._build_tables(eid)

    # -- stage evaluation --------------------------------------------------

    def _weights_of(self, weights, eid):
        return [weights[(eid, var)] for var in self.var_names]

    def evaluate_element(self, eid: int, weights) -> ElementEval:
        # one network pass per variable over interior and all face points
        # together; separate small per-face calls cost more in dispatch than
        # the few redundant face Hessians here
        ep = self.points[eid]
        need_hess = self.model.has_viscous
        faces = self._active_faces(eid)
        blocks = [ep.coords("interior")] + [ep.coords(f) for f in faces]
        sizes = [b.shape[0] for b in blocks]
        offs = np.concatenate([[0], np.cumsum(sizes)])
        pts = np.concatenate(blocks, axis=0) if len(blocks) > 1 else blocks[0]
        m = sizes[0]
        k = len(self.var_names)
        s = ep.ndim
        q = np.empty((m, k))
        gq = np.empty((m, k, s))
        hq = np.empty((m, k, s, s)) if need_hess else None
        face_q = {f: np.empty((sizes[1 + i], k)) for i, f in enumerate(faces)}
        face_grad = {f: np.empty((sizes[1 + i], k, s)) for i, f in enumerate(faces)} if need_hess else {}
        wlist = self._weights_of(weights, eid)
        for kk, var in enumerate(self.var_names):
            ev = evaluate(self.specs[(eid, var)], wlist[kk], pts, grad=True, hess=need_hess)
            q[:, kk] = ev.value[: offs[1]]
            gq[:, kk] = ev.grad[: offs[1]]
            if need_hess:
                hq[:, kk] = ev.hess[: offs[1]]
            for i, f in enumerate(faces):
                sl = slice(offs[1 + i], offs[2 + i])
                face_q[f][:, kk] = ev.value[sl]
                if need_hess:
                    face_grad[f][:, kk] = ev.grad[sl]
        return ElementEval(q=q, grad_q=gq, hess_q=hq, face_q=face_q, face_grad=face_grad)

    def _direction(self, pr_minus=None, pr_plus=None, mf=None, dim=None):
        """Wave direction dotted with +e_dim for the LDG sign choices."""
        if isinstance(self.model, pde.Advection):
            return np.full(mf, self.model.u[dim])
        if isinstance(self.model, pde.CompressibleNS):
            return 0.5 * (pr_minus.u[:, dim] + pr_plus.u[:, dim])
        vec = self.riemann.direction or tuple(1.0 for _ in range(self.mesh.ndim))
        return np.full(mf, vec[dim])

    def _face_aux(self, eid, face, evals, qdelta) -> np.ndarray:
        """Corrected gradient at a face's points: own trace gradient plus the
        correction-function gradients driven by every paired face's jump."""
        ev = evals[eid]
        aux = ev.face_grad[face].copy()
        tab = self._tables[eid]
        if self.g_corr is None:
            return aux
        for fd, fs in self._active_faces(eid):
            entry = tab[(fd, fs, face)]
            qd = qdelta.get((eid, fd, fs))
            if qd is None:
                raise SynchronizationError(f"missing interface data on element {eid}, face {(fd, fs)}")
            aux[:, :, fd] += qd[entry["proj"]] * entry["dg"][:, None]
        return aux

    def exchange(self, weights, evals=None, pool=None, t: float = 0.0) -> StageData:
        """Build all interface and boundary data for the current stage weights."""
        if evals is None:
            eids = list(self.points.keys())
            if pool is not None:
                results = list(pool.map(lambda e: self.evaluate_element(e, weights), eids))
                evals = dict(zip(eids, results))
            else:
                evals = {e: self.evaluate_element(e, weights) for e in eids}
        stage = StageData(evals=evals, qdelta={}, fdelta={})
        model = self.model
        viscous = model.has_viscous
        max_jump = 0.0

        # phase 1: common solutions and per-face solution jumps
        pair_dir = {}
        for pair in self.mesh.pairs:
            (e_m, d, _), (e_p, _, _) = pair.minus, pair.plus
            qm = evals[e_m].face_q[(d, HIGH)]
            qp = evals[e_p].face_q[(d, LOW)]
            max_jump = max(max_jump, float(np.max(np.abs(qm - qp))) if qm.size else 0.0)
            if isinstance(model, pde.CompressibleNS):
                un = self._direction(
                    pde.primitives(model, qm), pde.primitives(model, qp), qm.shape[0], d
                )
            else:
                un = self._direction(mf=qm.shape[0], dim=d)
            pair_dir[pair.minus] = un
            if viscous:
                qs = common_solution(qm, qp, un)
                stage.qdelta[(e_m, d, HIGH)] = qs - qm
                stage.qdelta[(e_p, d, LOW)] = qs - qp
            else:
                stage.qdelta[(e_m, d, HIGH)] = np.zeros_like(qm)
                stage.qdelta[(e_p, d, LOW)] = np.zeros_like(qp)

        # phase 2: corrected gradients on faces, then common fluxes
        face_aux = {}
        if viscous:
            for eid in evals:
                for face in self.mesh.paired_faces(eid):
                    face_aux[(eid, *face)] = self._face_aux(eid, face, evals, stage.qdelta)

        for pair in self.mesh.pairs:
            (e_m, d, _), (e_p, _, _) = pair.minus, pair.plus
            qm = evals[e_m].face_q[(d, HIGH)]
            qp = evals[e_p].face_q[(d, LOW)]
            mf = qm.shape[0]
            k = qm.shape[1]
            un = pair_dir[pair.minus]
            n = np.tile(face_normal(self.mesh.ndim, d, HIGH), (mf, 1))
            fstar = np.zeros((mf, k))
            f_loc_m = np.zeros((mf, k))
            f_loc_p = np.zeros((mf, k))
            if model.has_inviscid:
                fstar += common_inviscid_normal_flux(self.riemann, model, qm, qp, n, un)
                f_loc_m += pde.inviscid_flux(model, qm)[:, :, d]
                f_loc_p += pde.inviscid_flux(model, qp)[:, :, d]
            if viscous:
                am = face_aux[(e_m, d, HIGH)]
                ap = face_aux[(e_p, d, LOW)]
                fvm = pde.viscous_flux(model, qm, am)[:, :, d]
                fvp = pde.viscous_flux(model, qp, ap)[:, :, d]
                fstar += common_viscous_normal_flux(self.riemann, fvm, fvp, qm, qp, un)
                f_loc_m += fvm
                f_loc_p += fvp
            stage.fdelta[(e_m, d, HIGH)] = fstar - f_loc_m
            stage.fdelta[(e_p, d, LOW)] = -fstar + f_loc_p

        for (eid, d, side), provider in self.boundary_states.items():
            pts = self.points[eid].coords((d, side))
            qm = evals[eid].face_q[(d, side)]
            q_ext = np.atleast_2d(provider(pts, t))
            max_jump = max(max_jump, float(np.max(np.abs(qm - q_ext))) if qm.size else 0.0)
            n = np.tile(face_normal(self.mesh.ndim, d, side), (pts.shape[0], 1))
            if isinstance(self.model, pde.CompressibleNS):
                un = self._direction(
                    pde.primitives(self.model, qm), pde.primitives(self.model, q_ext),
                    qm.shape[0], d,
                ) * n[:, d]
            else:
                un = self._direction(mf=qm.shape[0], dim=d) * n[:, d]
            stage.qdelta[(eid, d, side)] = common_solution(qm, q_ext, un) - qm
            fstar = common_inviscid_normal_flux(self.riemann, self.model, qm, q_ext, n, un)
            f_loc = np.einsum("mki,mi->mk", pde.inviscid_flux(self.model, qm), n)
            stage.fdelta[(eid, d, side)] = fstar - f_loc
        stage.max_jump = max_jump
        return stage

    # -- corrected state and element operator ------------------------------

    def corrected_state(self, eid: int, stage: StageData) -> pde.StateEval:
        """Interior state with the auxiliary gradient family filled in."""
        ev = stage.evals[eid]
        st = pde.StateEval(q=ev.q, grad_q=ev.grad_q, hess_q=ev.hess_q)
        if not self.model.has_viscous:
            return st
        aux = ev.grad_q.copy()
        gaux = ev.hess_q.copy()
        if self.g_corr is not None:
            tab = self._tables[eid]
            for fd, fs in self._active_faces(eid):
                entry = tab[(fd, fs, "interior")]
                qd = stage.qdelta.get((eid, fd, fs))
                if qd is None:
                    raise SynchronizationError(
                        f"missing interface data on element {eid}, face {(fd, fs)}"
                    )
                qd_at = qd[entry["proj"]]
                aux[:, :, fd] += qd_at * entry["dg"][:, None]
                gaux[:, :, fd, fd] += qd_at * entry["d2g"][:, None]
        st.aux = aux
        st.grad_aux = gaux
        return st

    def corrected_value(self, eid: int, group, stage: StageData) -> np.ndarray:
        """Corrected solution q^D + q^C at a point group, (Mg, K).

        Continuous across interfaces wherever forced by the shared common
        solution: everywhere in 1D, and away from corners in multi-D
        (within a corner's correction width the two sides spread
        different transverse jumps).
        """
        ev = stage.evals[eid]
        vals = ev.q if group == "interior" else ev.face_q[group]
        out = vals.copy()
        if self.g_corr is None:
            return out
        tab = self._tables[eid]
        for fd, fs in self._active_faces(eid):
            entry = tab[(fd, fs, group)]
            qd = stage.qdelta.get((eid, fd, fs))
            if qd is None:
                raise SynchronizationError(f"missing interface data on element {eid}, face {(fd, fs)}")
            out += qd[entry["proj"]] * entry["g"][:, None]
        return out

    def element_rhs(self, eid: int, stage: StageData) -> np.ndarray:
        """N_e at the interior points: corrected divergence plus the
        flux-correction spread, (M, K)."""
        st = self.corrected_state(eid, stage)
        rhs = pde.generic_rhs(self.model, st)
        tab = self._tables[eid]
        for fd, fs in self._active_faces(eid):
            entry = tab[(fd, fs, "interior")]
            if "divh" not in entry:
                continue
            fdelta = stage.fdelta.get((eid, fd, fs))
            if fdelta is None:
                raise SynchronizationError(
                    f"missing flux correction on element {eid}, face {(fd, fs)}"
                )
            rhs -= fdelta[entry["proj"]] * entry["divh"][:, None]
        return rhs

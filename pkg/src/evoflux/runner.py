"""Run orchestration: build the solver, fit, march, stream artifacts.

One run per process. Internal parallelism follows the stage structure:
element evaluations, then interface exchange, then independent
per-network assembly and solves on a shared thread pool. BLAS is pinned
to one thread for the duration of a run; the matrices here are small
enough that multithreaded factorizations lose outright.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import __version__, bc, evolve, experiments, pde
from .config import ConfigError, RunConfig, as_dict, validate
from .coupling import CoupledOperator, MonomialCorrection, RiemannConfig
from .evolve import EvolutionSystem, LstsqConfig, MarchConfig
from .mesh import ElementMesh, ElementPoints, validate_pair_points
from .net import FeatureLayer, NetworkSpec, evaluate, fit_initial, param_jacobian, save_params
from .sampling import adapt_points, mixture_density, uniform_grid

OUTPUT_ROOT_ENV = "EVOFLUX_OUTPUT_ROOT"
METRICS_SCHEMA = "evoflux-metrics-v1"
SNAPSHOT_SCHEMA = "evoflux-snapshot-v1"


@dataclass
class FitReport:
    element: int
    variable: str
    rms: float
    converged: bool
    iterations: int


class Solver:
    """Built run state: mesh, networks, operator, boundary objects."""

    def __init__(self, cfg: RunConfig):
        validate(cfg)
        self.cfg = cfg
        self.model = experiments.build_model(cfg)
        self.mesh = ElementMesh(
            list(zip(cfg.domain.lo, cfg.domain.hi)), cfg.mesh.elements, cfg.domain.periodic
        )
        self.ndim = self.mesh.ndim
        self.points: dict[int, ElementPoints] = {}
        for e in self.mesh.elements:
            self.points[e.eid] = ElementPoints(e, self._initial_axes(e))
        if self.mesh.pairs:
            validate_pair_points(self.mesh, self.points)
        self.initial = experiments.initial_fields(cfg, self.model)
        self.var_names = list(self.model.var_names)
        self.specs = {
            (e.eid, var): self._network_spec(e, var)
            for e in self.mesh.elements
            for var in self.var_names
        }
        self.weights = {key: np.zeros(spec.n_params) for key, spec in self.specs.items()}
        self.lstsq = LstsqConfig(
            rank_cutoff=cfg.march.rank_cutoff, tikhonov_lambda=cfg.march.tikhonov_lambda
        )
        self._build_bc()
        g = cfg.correction.solution
        h = cfg.correction.flux
        hb = cfg.correction.boundary
        self.op = CoupledOperator(
            self.mesh,
            self.model,
            self.specs,
            self.points,
            RiemannConfig(
                inviscid=cfg.riemann.inviscid,
                r1=cfg.riemann.r1,
                r2=cfg.riemann.r2,
                direction=tuple(cfg.riemann.direction) if cfg.riemann.direction else None,
            ),
            solution_correction=MonomialCorrection(int(g[0]), float(g[1])) if g else None,
            flux_correction=MonomialCorrection(int(h[0]), float(h[1])) if h else None,
            boundary_states=self.boundary_states,
            boundary_flux_correction=MonomialCorrection(int(hb[0]), float(hb[1])) if hb else None,
        )
        self.pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
        # in the marching hot path a pool only pays off when the per-network
        # factorizations are big; for small systems the dispatch locks cost
        # more than the solves themselves (fits always use the pool)
        m_pts = max(self.points[e.eid].n_points() for e in self.mesh.elements)
        n_par = max(spec.n_params for spec in self.specs.values())
        self.stage_pool = self.pool if m_pts * n_par >= 200_000 else None
        self.fit_reports: list[FitReport] = []

    # -- construction helpers ----------------------------------------------

    def _initial_axes(self, element):
        cfg = self.cfg
        axes = []
        for d, ((lo, hi), n) in enumerate(zip(element.bounds, cfg.sampling.counts)):
            n = int(n)
            if n >= 2:
                axes.append(np.linspace(lo, hi, n))
            else:
                axes.append(np.array([0.5 * (lo + hi)]))
        return axes

    def _network_spec(self, element, var: str) -> NetworkSpec:
        ncfg = self.cfg.networks
        feature = FeatureLayer(
            kind=ncfg.feature,
            box=element.bounds,
            selected_dims=tuple(ncfg.selected_dims) if ncfg.selected_dims else (),
        )
        if ncfg.output_ranges and var in ncfg.output_ranges:
            lo, hi = (float(v) for v in ncfg.output_ranges[var])
        else:
            vals = self.initial_for(var)(ElementPoints(element, self._initial_axes(element)).coords())
            lo, hi = float(np.min(vals)), float(np.max(vals))
            if hi - lo < 1e-8:
                mid = 0.5 * (lo + hi)
                pad = ncfg.range_pad_fraction * max(1.0, abs(mid))
                lo, hi = mid - pad, mid + pad
        return NetworkSpec(
            feature=feature,
            hidden=tuple(int(hh) for hh in ncfg.hidden),
            activation=ncfg.activation,
            out_range=(lo, hi),
        )

    def initial_for(self, var: str):
        if var not in self.initial:
            raise ConfigError(f"case {self.cfg.case!r} has no initial condition for {var!r}")
        return self.initial[var]

    def _build_bc(self):
        cfg = self.cfg
        self.dirichlet: list[bc.DirichletObject] = []
        self.sponges: list[bc.SpongeZone] = []
        self.extra_by_element: dict[int, list[bc.DirichletObject]] = {}
        self.boundary_states: dict = {}
        for section in cfg.bc:
            c_s = 1.0 / cfg.march.dt if section.c_s == "1/dt" else float(section.c_s)
            target = experiments.bc_target(cfg, self.model, section.target)
            if section.kind == "wall-plane":
                obj = bc.DirichletObject(
                    name=section.target,
                    membership=bc.plane_membership(int(section.dim), float(section.value)),
                    target=target,
                    c_s=c_s,
                )
                self.dirichlet.append(obj)
            elif section.kind == "inflow-point":
                loc = np.asarray(section.location, dtype=float)
                obj = bc.DirichletObject(
                    name=section.target,
                    membership=bc.point_membership(loc),
                    target=target,
                    c_s=c_s,
                    extra_points=loc[None, :],
                )
                self.dirichlet.append(obj)
                eid = self._owning_element(loc)
                self.extra_by_element.setdefault(eid, []).append(obj)
            elif section.kind == "inflow-strip":
                # boundary-data region: the incoming solution is prescribed on
                # [value, value+width] of dimension dim, relaxing many sample
                # rows at once instead of a single stiff point row
                d = int(section.dim or 0)
                lo = float(section.value)
                hi = lo + float(section.width)

                def strip(points, t, d=d, lo=lo, hi=hi):
                    return (points[:, d] >= lo - 1e-12) & (points[:, d] <= hi + 1e-12)

                self.dirichlet.append(
                    bc.DirichletObject(name=section.target, membership=strip, target=target, c_s=c_s)
                )
            elif section.kind == "riemann-inflow":
                # boundary Riemann problem: the named target supplies the
                # exterior trace on every unpaired face of that side
                d = int(section.dim or 0)
                side = 0 if float(section.value) == cfg.domain.lo[d] else 1
                bound = cfg.domain.lo[d] if side == 0 else cfg.domain.hi[d]
                for e in self.mesh.elements:
                    face_at = e.bounds[d][0] if side == 0 else e.bounds[d][1]
                    if abs(face_at - bound) < 1e-12 and (e.eid, d, side) not in self.mesh.face_to_pair:
                        self.boundary_states[(e.eid, d, side)] = target
            elif section.kind == "sponge":
                raise ConfigError("sponge zones need a custom build; none of the named cases use one")
            else:
                raise ConfigError(f"unknown bc kind {section.kind!r}")

    def _owning_element(self, x: np.ndarray) -> int:
        for e in self.mesh.elements:
            if np.all(x >= e.lo - 1e-12) and np.all(x <= e.hi + 1e-12):
                return e.eid
        raise ConfigError(f"extra point {x.tolist()} lies outside every element")

    # -- initial condition ----------------------------------------------------

    def fit(self) -> list[FitReport]:
        cfg = self.cfg.fit
        if self.cfg.sampling.kind == "adaptive-1d" and self.cfg.sampling.init_iterations > 0:
            self._fit_all(cfg)
            for _ in range(int(self.cfg.sampling.init_iterations)):
                self._adapt_once()
        reports = self._fit_all(cfg)
        self.fit_reports = reports
        return reports

    def _fit_all(self, fcfg) -> list[FitReport]:
        keys = list(self.specs.keys())

        def fit_one(key):
            eid, var = key
            pts = self.points[eid].coords("interior")
            seed = self.cfg.seed + 7919 * (self.var_names.index(var) + 1) + 104729 * eid
            res = fit_initial(
                self.specs[key],
                self.initial_for(var),
                pts,
                tol=fcfg.tol,
                max_iters=fcfg.max_iters,
                adam_iters=fcfg.adam_iters,
                gn_iters=fcfg.gn_iters,
                restarts=fcfg.restarts,
                seed=seed,
            )
            return key, res

        results = list(self.pool.map(fit_one, keys)) if self.pool else [fit_one(k) for k in keys]
        reports = []
        for key, res in results:
            self.weights[key] = res.weights
            reports.append(FitReport(key[0], key[1], res.rms, res.converged, res.iterations))
        return reports

    # -- stage assembly (StageProblem protocol) --------------------------------

    def assemble(self, t, weights, frozen=None):
        stage = frozen if frozen is not None else self.op.exchange(weights, pool=self.stage_pool, t=t)

        def element_systems(eid):
            pts = self.points[eid].coords("interior")
            rhs = self.op.element_rhs(eid, stage)
            states = stage.evals[eid].q
            if self.dirichlet:
                rhs = bc.apply_dirichlet(self.dirichlet, pts, t, rhs, states)
            for zone in self.sponges:
                rhs = bc.apply_sponge(zone, pts, t, rhs, states)
            out = {}
            extras = self.extra_by_element.get(eid, ())
            for k, var in enumerate(self.var_names):
                spec = self.specs[(eid, var)]
                w = weights[(eid, var)]
                jac = param_jacobian(spec, w, pts)
                rhs_col = rhs[:, k]
                if extras:
                    jac_rows, rhs_rows = [jac], [rhs_col]
                    for obj in extras:
                        ep = obj.extra_points
                        qhat = np.empty((ep.shape[0], len(self.var_names)))
                        for kk, vv in enumerate(self.var_names):
                            qhat[:, kk] = evaluate(self.specs[(eid, vv)], weights[(eid, vv)], ep).value
                        jac_rows.append(param_jacobian(spec, w, ep))
                        rhs_rows.append(bc.relaxation_rows(obj, t, qhat)[:, k])
                    jac = np.vstack(jac_rows)
                    rhs_col = np.concatenate(rhs_rows)
                out[(eid, var)] = EvolutionSystem(jac, rhs_col)
            return out

        eids = [e.eid for e in self.mesh.elements]
        systems = {}
        if self.stage_pool is not None:
            for part in self.stage_pool.map(element_systems, eids):
                systems.update(part)
        else:
            for eid in eids:
                systems.update(element_systems(eid))
        self.last_max_jump = stage.max_jump
        return systems

    def velocities(self, t, weights, frozen=None):
        return evolve.global_rhs(self, t, weights, frozen, cfg=self.lstsq, pool=self.stage_pool)

    def freeze(self, t, weights):
        return self.op.exchange(weights, pool=self.stage_pool, t=t)

    # -- adaptive sampling ------------------------------------------------------

    def _adapt_once(self):
        d = int(self.cfg.sampling.adapt_dim)
        stage = self.op.exchange(self.weights, pool=self.pool)
        for e in self.mesh.elements:
            rhs = self.op.element_rhs(e.eid, stage)  # raw operator, before bc rows
            ep = self.points[e.eid]
            axis = ep.axes[d]
            order = np.argsort(ep.coords("interior")[:, d], kind="stable")
            h_raw = np.sum(np.abs(rhs), axis=1)[order]
            if h_raw.shape[0] != axis.shape[0]:
                raise ConfigError("adaptive-1d needs exactly one point per axis position")
            new_axis = adapt_points(axis, h_raw, beta=float(self.cfg.sampling.beta))
            self.points[e.eid] = ep.with_axis(d, new_axis)
            self.op.points[e.eid] = self.points[e.eid]
            self.op.rebuild_tables(e.eid)

    def post_step(self, step, t, weights):
        sc = self.cfg.sampling
        if sc.kind == "adaptive-1d" and sc.adapt_every > 0 and step % sc.adapt_every == 0:
            self.weights = weights
            self._adapt_once()

    # -- field evaluation ---------------------------------------------------------

    def eval_grid(self, eid: int):
        """Cell-centered evaluation grid, disjoint from the training points."""
        e = self.mesh.elements[eid]
        refine = int(self.cfg.output.eval_refine)
        axes = []
        for d, (lo, hi) in enumerate(e.bounds):
            n_train = len(self.points[eid].axes[d])
            n_cells = max(refine * max(n_train - 1, 1), 1)
            h = (hi - lo) / n_cells
            axes.append(lo + (np.arange(n_cells) + 0.5) * h)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        cell = float(np.prod([(hi - lo) / len(ax) for (lo, hi), ax in zip(e.bounds, axes)]))
        return pts, cell

    def predict(self, eid: int, pts: np.ndarray, weights=None) -> np.ndarray:
        weights = weights if weights is not None else self.weights
        out = np.empty((pts.shape[0], len(self.var_names)))
        for k, var in enumerate(self.var_names):
            out[:, k] = evaluate(self.specs[(eid, var)], weights[(eid, var)], pts).value
        return out

    def close(self):
        if self.pool is not None:
            self.pool.shutdown(wait=True)
            self.pool = None
        self.stage_pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# -- metrics ---------------------------------------------------------------------


def compute_metrics(solver: Solver, t: float, weights) -> dict:
    """Case-specific metric values on the evaluation grids."""
    cfg = solver.cfg
    case = cfg.case
    model = solver.model
    preds = []
    for e in solver.mesh.elements:
        pts, cell = solver.eval_grid(e.eid)
        preds.append((pts, solver.predict(e.eid, pts, weights), cell))
    out = {"epsilon": "", "E_T": "", "E_K": "", "max_jump": getattr(solver, "last_max_jump", "")}
    if case.startswith("advection"):
        norm_field = experiments.gaussian_wave(
            np.arange(ADV_NORM_SPAN[0], ADV_NORM_SPAN[1], _adv_eval_spacing(solver))
        )
        err, ref = [], []
        for (pts, qp, _), e in zip(preds, solver.mesh.elements):
            qr = experiments.reference_fields(cfg, model, pts, t)["q"]
            err.append(qp[:, 0] - qr)
            ref.append(qr)
            out[f"max_abs_e{e.eid + 1}"] = float(np.max(np.abs(qp[:, 0])))
        out["epsilon"] = float(
            np.linalg.norm(np.concatenate(err)) / np.linalg.norm(norm_field)
        )
    elif case.startswith("diffusion"):
        err_sq = ref_sq = 0.0
        for pts, qp, _ in preds:
            qr = experiments.reference_fields(cfg, model, pts, t)["q"]
            err_sq += float(np.sum((qp[:, 0] - qr) ** 2))
            ref_sq += float(np.sum(qr**2))
        out["epsilon"] = float(np.sqrt(err_sq / ref_sq))
    elif case.startswith("taylor-green"):
        err_sq = ref_sq = 0.0
        e_t = e_k = 0.0
        for pts, qp, cell in preds:
            ref = experiments.reference_fields(cfg, model, pts, t)
            u_p = qp[:, 1] / qp[:, 0]
            v_p = qp[:, 2] / qp[:, 0]
            err_sq += float(np.sum((u_p - ref["u1"]) ** 2) + np.sum((v_p - ref["u2"]) ** 2))
            ref_sq += float(np.sum(ref["u1"] ** 2) + np.sum(ref["u2"] ** 2))
            te, ke = experiments.tg_energies(qp, cell)
            e_t += te
            e_k += ke
        out["epsilon"] = float(np.sqrt(err_sq / ref_sq))
        out["E_T"] = e_t
        out["E_K"] = e_k
    elif case.startswith("couette"):
        err_sq = ref_sq = 0.0
        for pts, qp, _ in preds:
            q_ref, _, _ = experiments.couette_steady_profile(
                model, pts[:, 1], experiments.case_mach(cfg)
            )
            err_sq += float(np.sum((qp - q_ref) ** 2))
            ref_sq += float(np.sum(q_ref**2))
        out["epsilon"] = float(np.sqrt(err_sq / ref_sq))
        walls = np.array([[0.5, 0.0], [0.5, 1.0]])
        mism = 0.0
        for e in solver.mesh.elements:
            qw = solver.predict(e.eid, walls, weights)
            for obj in solver.dirichlet:
                mask = obj.membership(walls, t)
                if np.any(mask):
                    mism += float(np.sum((qw[mask] - obj.target(walls[mask], t)) ** 2))
        out["wall_mismatch"] = float(np.sqrt(mism))
    return out


ADV_NORM_SPAN = (-1.1, 0.1)  # covers the inflow waveform support


def _adv_eval_spacing(solver: Solver) -> float:
    pts, _ = solver.eval_grid(0)
    xs = np.unique(pts[:, 0])
    return float(xs[1] - xs[0])


# -- artifacts ---------------------------------------------------------------------


class ArtifactWriter:
    def __init__(self, outdir, cfg: RunConfig):
        self.dir = outdir
        os.makedirs(outdir, exist_ok=True)
        os.makedirs(os.path.join(outdir, "checkpoints"), exist_ok=True)
        self.cfg = cfg
        self.metric_rows: list[dict] = []
        self.metric_columns = ["case", "step", "t", "epsilon", "E_T", "E_K", "max_jump"]
        self.timings: list[tuple[int, float]] = []

    def manifest(self, solver: Solver, fit_reports):
        data = {
            "schema": "evoflux-manifest-v1",
            "version": __version__,
            "numpy": np.__version__,
            "seed": self.cfg.seed,
            "config": as_dict(self.cfg),
            "derived": {
                "R_g": getattr(solver.model, "R_g", None),
                "variables": solver.var_names,
                "output_ranges": {
                    f"e{eid}.{var}": list(spec.out_range)
                    for (eid, var), spec in solver.specs.items()
                },
                "n_params": {f"e{eid}.{var}": spec.n_params for (eid, var), spec in solver.specs.items()},
                "exchange_per_stage": self.cfg.march.exchange_per_stage,
                "rank_cutoff": self.cfg.march.rank_cutoff,
                "beta": self.cfg.sampling.beta,
                "r1": self.cfg.riemann.r1,
                "r2": self.cfg.riemann.r2,
                "correction": {
                    "solution": self.cfg.correction.solution,
                    "flux": self.cfg.correction.flux,
                },
            },
            "initial_fit": [
                {
                    "element": r.element,
                    "variable": r.variable,
                    "rms": r.rms,
                    "converged": bool(r.converged),
                    "iterations": r.iterations,
                }
                for r in fit_reports
            ],
        }
        with open(os.path.join(self.dir, "manifest.yaml"), "w") as fh:
            yaml.safe_dump(data, fh, sort_keys=False)

    def metrics_row(self, step: int, t: float, values: dict):
        row = {"case": self.cfg.case, "step": step, "t": t}
        row.update(values)
        for col in row:
            if col not in self.metric_columns:
                self.metric_columns.append(col)
        self.metric_rows.append(row)

    def flush_metrics(self):
        path = os.path.join(self.dir, "metrics.csv")
        with open(path, "w") as fh:
            fh.write(f"# schema={METRICS_SCHEMA}\n")
            fh.write(",".join(self.metric_columns) + "\n")
            for row in self.metric_rows:
                cells = []
                for col in self.metric_columns:
                    val = row.get(col, "")
                    cells.append(_fmt(val))
                fh.write(",".join(cells) + "\n")
        return path

    def timing_row(self, step: int, wall: float):
        self.timings.append((step, wall))

    def flush_timings(self):
        path = os.path.join(self.dir, "timings.csv")
        with open(path, "w") as fh:
            fh.write("# schema=evoflux-timings-v1\n")
            fh.write("step,wall_time\n")
            for step, wall in self.timings:
                fh.write(f"{step},{wall:.6f}\n")
        return path

    def snapshot(self, solver: Solver, step: int, t: float, weights):
        cfg = solver.cfg
        rows = []
        header = None
        for e in solver.mesh.elements:
            pts, _ = solver.eval_grid(e.eid)
            qp = solver.predict(e.eid, pts, weights)
            ref = experiments.reference_fields(cfg, solver.model, pts, t)
            cols = {}
            for d in range(solver.ndim):
                cols["xy"[d] if solver.ndim <= 2 else f"x{d}"] = pts[:, d]
            for k, var in enumerate(solver.var_names):
                cols[var] = qp[:, k]
            if cfg.case.startswith("taylor-green"):
                cols["u1"] = qp[:, 1] / qp[:, 0]
                cols["u2"] = qp[:, 2] / qp[:, 0]
            for name, vals in ref.items():
                cols[f"{name}_ref"] = vals
            header = list(cols.keys())
            block = np.stack([np.asarray(cols[h], dtype=float) for h in header], axis=-1)
            rows.append(block)
        data = np.concatenate(rows, axis=0)
        path = os.path.join(self.dir, f"snapshot_step{step:08d}.csv")
        with open(path, "w") as fh:
            fh.write(f"# schema={SNAPSHOT_SCHEMA}\n")
            fh.write(f"# case={cfg.case} step={step} t={_fmt(t)}\n")
            fh.write(",".join(header) + "\n")
            np.savetxt(fh, data, delimiter=",", fmt="%.17g")
        return path

    def checkpoints(self, solver: Solver, step: int, weights):
        for (eid, var), spec in solver.specs.items():
            path = os.path.join(self.dir, "checkpoints", f"e{eid}_{var}_step{step:08d}.txt")
            save_params(path, spec, weights[(eid, var)])



def _fmt(val) -> str:
    if val == "" or val is None:
        return ""
    if isinstance(val, str):
        return val
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    return format(float(val), ".17g")


def default_output_dir(cfg: RunConfig) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return os.path.join(root, cfg.case)


def run(cfg: RunConfig, outdir: str | None = None, quiet: bool = False) -> dict:
    """Execute a configured run; returns a summary with the artifact paths."""
    outdir = outdir or default_output_dir(cfg)
    writer = ArtifactWriter(outdir, cfg)
    t_start = time.perf_counter()
    with threadpool_limits(limits=1):
        with Solver(cfg) as solver:
            reports = solver.fit()
            writer.manifest(solver, reports)
            if not quiet:
                worst = max(reports, key=lambda r: r.rms)
                print(
                    f"[{cfg.case}] fitted {len(reports)} networks; "
                    f"worst rms {worst.rms:.3e} (e{worst.element}/{worst.variable})"
                )

            def on_step(step, t, weights):
                oc = cfg.output
                last = step == cfg.march.steps
                if oc.metrics_every and (step % oc.metrics_every == 0 or last):
                    writer.metrics_row(step, t, compute_metrics(solver, t, weights))
                    writer.timing_row(step, time.perf_counter() - t_start)
                if oc.snapshot_every and (step % oc.snapshot_every == 0) and not last:
                    writer.snapshot(solver, step, t, weights)
                if oc.checkpoint_every and step % oc.checkpoint_every == 0 and not last:
                    writer.checkpoints(solver, step, weights)
                if not quiet and oc.metrics_every and step % max(oc.metrics_every, 1) == 0:
                    print(f"[{cfg.case}] step {step}/{cfg.march.steps} t={t:.6g}")

            writer.metrics_row(0, 0.0, compute_metrics(solver, 0.0, solver.weights))
            writer.snapshot(solver, 0, 0.0, solver.weights)
            try:
                final = evolve.march(
                    solver.weights,
                    solver.velocities,
                    MarchConfig(
                        integrator=cfg.march.integrator,
                        dt=cfg.march.dt,
                        steps=cfg.march.steps,
                        exchange_per_stage=cfg.march.exchange_per_stage,
                    ),
                    freeze=solver.freeze,
                    on_step=on_step,
                    post_step=solver.post_step,
                )
            except evolve.MarchAbort as abort:
                writer.flush_metrics()
                writer.flush_timings()
                return {
                    "status": "aborted",
                    "error": str(abort),
                    "step": abort.step,
                    "outdir": outdir,
                }
            solver.weights = final
            t_end = cfg.march.dt * cfg.march.steps
            writer.snapshot(solver, cfg.march.steps, t_end, final)
            writer.checkpoints(solver, cfg.march.steps, final)
            metrics_path = writer.flush_metrics()
            writer.flush_timings()
    return {
        "status": "ok",
        "outdir": outdir,
        "metrics": metrics_path,
        "steps": cfg.march.steps,
        "wall_time": time.perf_counter() - t_start,
    }

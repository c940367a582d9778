"""Per-network least-squares velocities and time marching.

Every network owns a linear system J Z = N sampled at its element's
points; the parameter velocity is the least-squares solution. Networks
are coupled only through the right-hand sides, so the solves are
independent within a stage and may run on a thread pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

import numpy as np

NetKey = tuple[int, str]  # (element id, variable name)
WeightState = dict[NetKey, np.ndarray]


class NonFiniteError(ValueError):
    """A linear system contained NaN or Inf entries."""


class MarchAbort(RuntimeError):
    """Marching produced non-finite weights."""

    def __init__(self, step: int, key):
        self.step = step
        self.key = key
        if isinstance(key, tuple) and len(key) == 2:
            what = f"element {key[0]}, variable {key[1]!r}"
        else:
            what = f"network {key!r}"
        super().__init__(f"non-finite weights for {what} at step {step}")


@dataclass(frozen=True)
class LstsqConfig:
    rank_cutoff: float = 1e-12  # relative singular-value threshold
    tikhonov_lambda: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rank_cutoff < 1.0:
            raise ValueError("rank_cutoff must lie in (0, 1)")
        if self.tikhonov_lambda < 0.0:
            raise ValueError("tikhonov_lambda must be nonnegative")


@dataclass
class EvolutionSystem:
    """One network's linear system; row pairing is positional."""

    jac: np.ndarray  # (M_total, N)
    rhs: np.ndarray  # (M_total,)

    def __post_init__(self):
        self.jac = np.asarray(self.jac, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        if self.jac.ndim != 2 or self.jac.shape[0] != self.rhs.shape[0]:
            raise ValueError(f"system shapes do not pair: {self.jac.shape} vs {self.rhs.shape}")
        if self.jac.shape[0] < 1:
            raise ValueError("system needs at least one row")


def solve_velocity(sys: EvolutionSystem, cfg: LstsqConfig = LstsqConfig()) -> np.ndarray:
    """Minimum-norm least-squares solution of J Z = N.

    SVD-based with a relative cutoff; a positive tikhonov_lambda solves
    min |JZ-N|^2 + lambda |Z|^2 through the spectral filter s/(s^2+lambda).
    """
    if not np.all(np.isfinite(sys.jac)):
        raise NonFiniteError("Jacobian contains non-finite entries")
    if not np.all(np.isfinite(sys.rhs)):
        raise NonFiniteError("right-hand side contains non-finite entries")
    if cfg.tikhonov_lambda == 0.0:
        return np.linalg.lstsq(sys.jac, sys.rhs, rcond=cfg.rank_cutoff)[0]
    u, s, vt = np.linalg.svd(sys.jac, full_matrices=False)
    keep = s > cfg.rank_cutoff * (s[0] if s.size else 0.0)
    s = s[keep]
    coef = (u[:, keep].T @ sys.rhs) * s / (s * s + cfg.tikhonov_lambda)
    return vt[keep].T @ coef


class StageProblem(Protocol):
    """Assembles the per-network systems for one evaluation of the rhs."""

    def assemble(self, t: float, weights: WeightState, frozen) -> dict[NetKey, EvolutionSystem]:
        ...


def global_rhs(
    problem: StageProblem,
    t: float,
    weights: WeightState,
    frozen=None,
    *,
    cfg: LstsqConfig = LstsqConfig(),
    pool=None,
) -> WeightState:
    """Assemble and solve every network's system at time t."""
    systems = problem.assemble(t, weights, frozen)

    def solve_one(key: NetKey) -> np.ndarray:
        try:
            return solve_velocity(systems[key], cfg)
        except Exception as exc:
            raise type(exc)(f"element {key[0]}, variable {key[1]!r}: {exc}") from exc

    keys = list(systems.keys())
    if pool is None:
        return {k: solve_one(k) for k in keys}
    results = list(pool.map(solve_one, keys))
    return dict(zip(keys, results))


@dataclass(frozen=True)
class MarchConfig:
    integrator: str = "rk4"  # or "explicit-euler"
    dt: float = 1e-3
    steps: int = 0
    exchange_per_stage: bool = True

    def __post_init__(self):
        if self.integrator not in ("rk4", "explicit-euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")


def _axpy(state: WeightState, a: float, vel: WeightState) -> WeightState:
    return {k: state[k] + a * vel[k] for k in state}


def march(
    state: WeightState,
    rhs: Callable[[float, WeightState, object], WeightState],
    cfg: MarchConfig,
    *,
    t0: float = 0.0,
    freeze: Callable[[float, WeightState], object] | None = None,
    on_step: Callable[[int, float, WeightState], None] | None = None,
    post_step: Callable[[int, float, WeightState], None] | None = None,
) -> WeightState:
    """March the concatenated weight vectors over cfg.steps steps.

    `rhs(t, weights, frozen)` returns per-network velocities. With
    exchange_per_stage, frozen is None and interface data is recomputed
    inside rhs at every stage; otherwise `freeze` is called once per step
    and its result passed to all stages. on_step fires after each
    completed step; post_step afterwards may mutate solver state (for
    example to move sample points).
    """
    state = {k: np.array(v, dtype=float) for k, v in state.items()}
    h = cfg.dt
    for step in range(cfg.steps):
        t = t0 + step * h
        frozen = None
        if freeze is not None and not cfg.exchange_per_stage:
            frozen = freeze(t, state)
        if cfg.integrator == "explicit-euler":
            k1 = rhs(t, state, frozen)
            state = _axpy(state, h, k1)
        else:
            k1 = rhs(t, state, frozen)
            k2 = rhs(t + 0.5 * h, _axpy(state, 0.5 * h, k1), frozen)
            k3 = rhs(t + 0.5 * h, _axpy(state, 0.5 * h, k2), frozen)
            k4 = rhs(t + h, _axpy(state, h, k3), frozen)
            state = {
                k: state[k] + (h / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
                for k in state
            }
        for key, w in state.items():
            if not np.all(np.isfinite(w)):
                raise MarchAbort(step, key)
        if on_step is not None:
            on_step(step + 1, t + h, state)
        if post_step is not None:
            post_step(step + 1, t + h, state)
    return state

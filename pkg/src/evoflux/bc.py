"""Weak boundary enforcement by relaxation toward a target state.

Inside a boundary object the PDE operator is replaced by c_s*(q_b - q),
driving the ansatz to the object state; sponge zones add the relaxation
term instead of replacing. Objects that the volume samples can miss
(walls, inflow points) carry explicit extra sample points whose rows the
run assembly appends to the owning element's linear system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MEMBER_TOL = 1e-12


def plane_membership(dim: int, value: float, tol: float = MEMBER_TOL):
    def member(points: np.ndarray, t: float) -> np.ndarray:
        return np.abs(points[:, dim] - value) <= tol

    return member


def point_membership(location, tol: float = MEMBER_TOL):
    loc = np.asarray(location, dtype=float)

    def member(points: np.ndarray, t: float) -> np.ndarray:
        return np.max(np.abs(points - loc[None, :]), axis=1) <= tol

    return member


@dataclass
class DirichletObject:
    """Region with a known, possibly time-dependent state."""

    name: str
    membership: Callable[[np.ndarray, float], np.ndarray]
    target: Callable[[np.ndarray, float], np.ndarray]  # (P, S), t -> (P, K)
    c_s: float
    extra_points: np.ndarray | None = None  # (P, S) samples on the object

    def __post_init__(self):
        if self.c_s <= 0:
            raise ValueError("relaxation rate c_s must be positive")
        if self.extra_points is not None:
            self.extra_points = np.atleast_2d(np.asarray(self.extra_points, dtype=float))


@dataclass
class SpongeZone:
    """Additive relaxation with a spatially varying rate."""

    name: str
    c_s_field: Callable[[np.ndarray], np.ndarray]  # (P, S) -> (P,)
    target: Callable[[np.ndarray, float], np.ndarray]


def apply_dirichlet(
    objects: list[DirichletObject],
    points: np.ndarray,
    t: float,
    rhs: np.ndarray,
    states: np.ndarray,
) -> np.ndarray:
    """Replace the operator with the relaxation term inside each object.

    rhs and states are (M, K) at the same points; rows outside every
    object come back bit-identical.
    """
    out = rhs.copy()
    for obj in objects:
        mask = np.asarray(obj.membership(points, t), dtype=bool)
        if not np.any(mask):
            continue
        out[mask] = obj.c_s * (obj.target(points[mask], t) - states[mask])
    return out


def apply_sponge(
    zone: SpongeZone,
    points: np.ndarray,
    t: float,
    rhs: np.ndarray,
    states: np.ndarray,
) -> np.ndarray:
    """Add the relaxation source term weighted by the sponge rate field."""
    rate = np.asarray(zone.c_s_field(points), dtype=float)
    if np.any(rate < 0):
        raise ValueError("sponge rate field must be nonnegative")
    return rhs + rate[:, None] * (zone.target(points, t) - states)


def relaxation_rows(obj: DirichletObject, t: float, states_at_extra: np.ndarray) -> np.ndarray:
    """Right-hand-side rows for an object's extra sample points, (P, K)."""
    return obj.c_s * (obj.target(obj.extra_points, t) - states_at_extra)

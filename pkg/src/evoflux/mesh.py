"""Conforming axis-aligned box partitions and their interface topology.

Faces are identified by (dim, side) with side 0 the low face and 1 the
high face. Interface pairs always put the high face on the minus side,
so the shared normal is +e_dim. Periodic wrap pairs carry the shift that
maps minus-face point coordinates onto the plus element's face.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOW, HIGH = 0, 1
FaceKey = tuple[int, int, int]  # (element id, dim, side)

MATCH_TOL = 1e-10  # physical-coordinate tolerance for interface point pairing


@dataclass(frozen=True)
class ElementBox:
    eid: int
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"element {self.eid}: empty interval [{lo}, {hi}]")

    @property
    def ndim(self) -> int:
        return len(self.bounds)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def reference_coord(self, x: np.ndarray, dim: int) -> np.ndarray:
        """Affine map of coordinate `dim` onto [-1, 1]."""
        lo, hi = self.bounds[dim]
        return (np.asarray(x) - 0.5 * (lo + hi)) * 2.0 / (hi - lo)


@dataclass(frozen=True)
class FacePair:
    minus: FaceKey  # (eid, dim, HIGH)
    plus: FaceKey  # (eid', dim, LOW)
    shift: tuple[float, ...]  # plus-side coords = minus-side coords + shift


class ElementMesh:
    """Uniform partition of a box domain into conforming elements."""

    def __init__(self, domain, counts, periodic):
        self.domain = tuple((float(a), float(b)) for a, b in domain)
        self.counts = tuple(int(c) for c in counts)
        self.periodic = tuple(bool(p) for p in periodic)
        s = len(self.domain)
        if not (len(self.counts) == len(self.periodic) == s):
            raise ValueError("domain, counts and periodic must share the dimension")
        if any(c < 1 for c in self.counts):
            raise ValueError("need at least one element per dimension")
        edges = [np.linspace(lo, hi, c + 1) for (lo, hi), c in zip(self.domain, self.counts)]
        self.elements: list[ElementBox] = []
        for flat in range(int(np.prod(self.counts))):
            multi = np.unravel_index(flat, self.counts)
            bounds = tuple(
                (float(edges[d][i]), float(edges[d][i + 1])) for d, i in enumerate(multi)
            )
            self.elements.append(ElementBox(eid=flat, bounds=bounds))
        self.pairs: list[FacePair] = []
        self.face_to_pair: dict[FaceKey, tuple[int, bool]] = {}
        for flat in range(len(self.elements)):
            multi = list(np.unravel_index(flat, self.counts))
            for d in range(s):
                nb = multi.copy()
                nb[d] += 1
                shift_d = 0.0
                if nb[d] == self.counts[d]:
                    if not self.periodic[d]:
                        continue
                    nb[d] = 0
                    shift_d = self.domain[d][0] - self.domain[d][1]
                nb_flat = int(np.ravel_multi_index(nb, self.counts))
                shift = tuple(shift_d if k == d else 0.0 for k in range(s))
                pair = FacePair(minus=(flat, d, HIGH), plus=(nb_flat, d, LOW), shift=shift)
                idx = len(self.pairs)
                self.pairs.append(pair)
                self.face_to_pair[pair.minus] = (idx, True)
                self.face_to_pair[pair.plus] = (idx, False)

    @property
    def ndim(self) -> int:
        return len(self.domain)

    def paired_faces(self, eid: int) -> list[tuple[int, int]]:
        """(dim, side) faces of this element that take part in an interface."""
        out = []
        for d in range(self.ndim):
            for side in (LOW, HIGH):
                if (eid, d, side) in self.face_to_pair:
                    out.append((d, side))
        return out


class ElementPoints:
    """Tensor-product sample points of one element plus face projections.

    Every evaluation point carries an integer multi-index into the
    per-dimension axes; face point sets are the unique orthogonal
    projections of the interior points (the grids include endpoints, so
    projections of face points onto other faces land on existing corner
    points). `proj` maps any point group onto rows of a face set.
    """

    def __init__(self, element: ElementBox, axes):
        self.element = element
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        if len(self.axes) != element.ndim:
            raise ValueError("one axis per dimension required")
        for d, ax in enumerate(self.axes):
            lo, hi = element.bounds[d]
            if ax.size == 1:
                # collapsed direction (nothing varies along it); valid only
                # while no face of this dimension joins an interface
                if not lo - MATCH_TOL <= ax[0] <= hi + MATCH_TOL:
                    raise ValueError(f"axis {d} point lies outside the element")
                continue
            if np.any(np.diff(ax) <= 0):
                raise ValueError("axes must be strictly increasing")
            if abs(ax[0] - lo) > MATCH_TOL or abs(ax[-1] - hi) > MATCH_TOL:
                raise ValueError(f"axis {d} must span the element including endpoints")
        self.shape = tuple(len(a) for a in self.axes)
        self._multi = {}
        grids = np.indices(self.shape).reshape(element.ndim, -1).T
        self._multi["interior"] = grids
        for d in range(element.ndim):
            for side in (LOW, HIGH):
                pin = 0 if side == LOW else self.shape[d] - 1
                sel = grids[grids[:, d] == pin]
                self._multi[(d, side)] = sel

    @property
    def ndim(self) -> int:
        return self.element.ndim

    def coords(self, group="interior") -> np.ndarray:
        multi = self._multi[group]
        out = np.empty((multi.shape[0], self.ndim))
        for d in range(self.ndim):
            out[:, d] = self.axes[d][multi[:, d]]
        return out

    def n_points(self, group="interior") -> int:
        return self._multi[group].shape[0]

    def proj(self, group, dim: int, side: int) -> np.ndarray:
        """Row index into the (dim, side) face set for each point of `group`.

        The projection replaces the point's `dim` coordinate with the face
        plane, so only the remaining multi-index components matter.
        """
        multi = self._multi[group]
        rest = [multi[:, d] for d in range(self.ndim) if d != dim]
        rest_shape = tuple(self.shape[d] for d in range(self.ndim) if d != dim)
        if not rest:
            return np.zeros(multi.shape[0], dtype=int)
        return np.ravel_multi_index(rest, rest_shape)

    def reference(self, group, dim: int) -> np.ndarray:
        """Reference coordinate r in [-1, 1] along `dim` for a point group."""
        return self.element.reference_coord(self.coords(group)[:, dim], dim)

    def with_axis(self, dim: int, axis: np.ndarray) -> "ElementPoints":
        axes = list(self.axes)
        axes[dim] = axis
        return ElementPoints(self.element, axes)


def face_normal(ndim: int, dim: int, side: int) -> np.ndarray:
    n = np.zeros(ndim)
    n[dim] = -1.0 if side == LOW else 1.0
    return n


def validate_pair_points(mesh: ElementMesh, points: dict[int, ElementPoints]) -> None:
    """Check that paired face point sets coincide after the periodic shift."""
    for pair in mesh.pairs:
        e_m, d, _ = pair.minus
        e_p = pair.plus[0]
        pm = points[e_m].coords((d, HIGH)) + np.asarray(pair.shift)
        pp = points[e_p].coords((d, LOW))
        if pm.shape != pp.shape or np.max(np.abs(pm - pp)) > MATCH_TOL:
            raise ValueError(
                f"face points of elements {e_m} and {e_p} do not match across dim {d} "
                f"(max offset {np.max(np.abs(pm - pp)) if pm.shape == pp.shape else 'shape'})"
            )

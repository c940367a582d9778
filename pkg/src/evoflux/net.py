"""Small dense networks used as spatial ansatz functions.

Each network maps a spatial point to one state value. An input feature
layer scales (or wraps) the element geometry onto the reference cube and
a linear output is affinely mapped onto a per-variable data range. All
derivatives needed by the time-marching loop are closed form: first and
second input derivatives via forward accumulation through the layers,
the parameter Jacobian via reverse accumulation. Networks are tiny and
fixed-topology, so this beats a general tape.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

AFFINE_SCALE = "affine-scale"
PERIODIC_TORUS = "periodic-torus"
COORDINATE_SELECT = "coordinate-select"

FEATURE_KINDS = (AFFINE_SCALE, PERIODIC_TORUS, COORDINATE_SELECT)
ACTIVATIONS = ("tanh", "linear")


class DimensionError(ValueError):
    """Input point dimension does not match the feature layer."""


@dataclass(frozen=True)
class FeatureLayer:
    """Input feature map from physical coordinates to network features.

    kinds:
      affine-scale      -- maps the element box onto [-1, 1]^S exactly
      periodic-torus    -- per dimension emits (cos th, sin th) with
                           th = 2*pi*(x - lo)/L, so the features are
                           invariant under x -> x + L
      coordinate-select -- keeps only `selected_dims`, each affinely
                           scaled onto [-1, 1]
    """

    kind: str
    box: tuple[tuple[float, float], ...]
    selected_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"degenerate box interval [{lo}, {hi}]")
        object.__setattr__(self, "selected_dims", tuple(int(d) for d in self.selected_dims))
        if self.kind == COORDINATE_SELECT:
            if not self.selected_dims:
                raise ValueError("coordinate-select needs selected_dims")
            if any(d < 0 or d >= self.in_dim for d in self.selected_dims):
                raise ValueError("selected_dims out of range")
        elif self.selected_dims:
            raise ValueError("selected_dims only valid for coordinate-select")

    @property
    def in_dim(self) -> int:
        return len(self.box)

    @property
    def out_dim(self) -> int:
        if self.kind == AFFINE_SCALE:
            return self.in_dim
        if self.kind == PERIODIC_TORUS:
            return 2 * self.in_dim
        return len(self.selected_dims)

    def apply(self, x: np.ndarray, order: int = 2):
        """Feature values and their input derivatives at points x (M, S).

        Returns (vals (M,F), jac (M,F,S), hess (M,F,S,S)); jac/hess are
        None when not requested via `order`.
        """
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(
                f"points have shape {x.shape}, feature layer expects (M, {self.in_dim})"
            )
        m, s = x.shape
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        if self.kind == AFFINE_SCALE:
            scale = 2.0 / (hi - lo)
            vals = (x - 0.5 * (lo + hi)) * scale
            jac = hess = None
            if order >= 1:
                jac = np.zeros((m, s, s))
                jac[:, np.arange(s), np.arange(s)] = scale
            if order >= 2:
                hess = np.zeros((m, s, s, s))
            return vals, jac, hess
        if self.kind == PERIODIC_TORUS:
            k = 2.0 * np.pi / (hi - lo)
            # reduce the phase first so shifts by whole periods reuse the
            # same feature values (bit-exact whenever x+period is exactly
            # representable)
            th = np.mod(x - lo, hi - lo) * k
            c, sn = np.cos(th), np.sin(th)
            vals = np.empty((m, 2 * s))
            vals[:, 0::2], vals[:, 1::2] = c, sn
            jac = hess = None
            if order >= 1:
                jac = np.zeros((m, 2 * s, s))
                d = np.arange(s)
                jac[:, 2 * d, d] = -sn * k
                jac[:, 2 * d + 1, d] = c * k
            if order >= 2:
                hess = np.zeros((m, 2 * s, s, s))
                hess[:, 2 * d, d, d] = -c * k * k
                hess[:, 2 * d + 1, d, d] = -sn * k * k
            return vals, jac, hess
        # coordinate-select: pick dims then scale each onto [-1, 1]
        sel = np.array(self.selected_dims)
        scale = 2.0 / (hi[sel] - lo[sel])
        vals = (x[:, sel] - 0.5 * (lo[sel] + hi[sel])) * scale
        jac = hess = None
        if order >= 1:
            jac = np.zeros((m, len(sel), s))
            jac[:, np.arange(len(sel)), sel] = scale
        if order >= 2:
            hess = np.zeros((m, len(sel), s, s))
        return vals, jac, hess

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "box": [list(b) for b in self.box]}
        if self.selected_dims:
            d["selected_dims"] = list(self.selected_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureLayer":
        return cls(
            kind=d["kind"],
            box=tuple(tuple(b) for b in d["box"]),
            selected_dims=tuple(d.get("selected_dims", ())),
        )


@dataclass(frozen=True)
class NetworkSpec:
    """Topology and scaling of one scalar-output ansatz network.

    The output layer is linear; its value y is mapped affinely so that
    y = -1 gives out_range[0] and y = +1 gives out_range[1]. With all
    parameters zero the network therefore returns the range midpoint.
    """

    feature: FeatureLayer
    hidden: tuple[int, ...]
    activation: str = "tanh"
    out_range: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("need at least one hidden layer of positive width")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "out_range", (float(self.out_range[0]), float(self.out_range[1])))

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.feature.out_dim, *self.hidden, 1)

    @property
    def n_params(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))

    @property
    def out_mid(self) -> float:
        return 0.5 * (self.out_range[0] + self.out_range[1])

    @property
    def out_half(self) -> float:
        return 0.5 * (self.out_range[1] - self.out_range[0])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.to_dict(),
            "hidden": list(self.hidden),
            "activation": self.activation,
            "out_range": list(self.out_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            feature=FeatureLayer.from_dict(d["feature"]),
            hidden=tuple(d["hidden"]),
            activation=d["activation"],
            out_range=tuple(d["out_range"]),
        )

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# Canonical flat parameter order: layer-major, kernel (C-order) before bias.

def unpack_params(spec: NetworkSpec, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.n_params,):
        raise ValueError(f"parameter vector has shape {w.shape}, spec wants ({spec.n_params},)")
    dims = spec.layer_dims
    layers, k = [], 0
    for i in range(len(dims) - 1):
        a, b = dims[i], dims[i + 1]
        kern = w[k : k + a * b].reshape(a, b)
        k += a * b
        bias = w[k : k + b]
        k += b
        layers.append((kern, bias))
    return layers


def pack_params(spec: NetworkSpec, layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for kern, bias in layers:
        parts.append(np.asarray(kern, dtype=float).ravel())
        parts.append(np.asarray(bias, dtype=float).ravel())
    w = np.concatenate(parts)
    assert w.shape == (spec.n_params,)
    return w


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for kernels and biases."""
    dims = spec.layer_dims
    layers = []
    for i in range(len(dims) - 1):
        bound = 1.0 / np.sqrt(dims[i])
        layers.append(
            (
                rng.uniform(-bound, bound, size=(dims[i], dims[i + 1])),
                rng.uniform(-bound, bound, size=dims[i + 1]),
            )
        )
    return pack_params(spec, layers)


@dataclass
class PointEval:
    """Value and spatial derivatives of the ansatz at sample points."""

    value: np.ndarray  # (M,)
    grad_x: np.ndarray | None = None  # (M, S)
    hess_x: np.ndarray | None = None  # (M, S, S), symmetric


@dataclass
class Evaluation:
    value: np.ndarray
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None
    pjac: np.ndarray | None = None  # (M, N)


def _as_points(spec: NetworkSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def evaluate(
    spec: NetworkSpec,
    w: np.ndarray,
    x,
    *,
    grad: bool = False,
    hess: bool = False,
    pjac: bool = False,
) -> Evaluation:
    """One pass through the network computing everything requested.

    Second input derivatives require the first; the parameter Jacobian is
    independent of both. Rows of pjac follow the canonical layer-major
    parameter order.
    """
    pts, _ = _as_points(spec, x)
    layers = unpack_params(spec, w)
    order = 2 if hess else (1 if grad else 0)
    z, gz, hz = spec.feature.apply(pts, order=order)
    m = pts.shape[0]

    # forward pass; keep activations and slopes for the reverse pass
    acts = [z]  # post-activation per layer, acts[0] = features
    slopes = []  # sigma'(pre-activation) per hidden layer
    n_layers = len(layers)
    for li, (kern, bias) in enumerate(layers):
        h = acts[-1] @ kern + bias
        gh = np.einsum("mas,ab->mbs", gz, kern) if order >= 1 else None
        hh = np.einsum("mast,ab->mbst", hz, kern) if order >= 2 else None
        last = li == n_layers - 1
        if last or spec.activation == "linear":
            zc, s1, s2 = h, None, None
            gc, hc = gh, hh
        else:
            t = np.tanh(h)
            s1 = 1.0 - t * t
            s2 = -2.0 * t * s1
            zc = t
            gc = s1[:, :, None] * gh if order >= 1 else None
            hc = None
            if order >= 2:
                hc = s2[:, :, None, None] * gh[:, :, :, None] * gh[:, :, None, :]
                hc += s1[:, :, None, None] * hh
        if not last:
            slopes.append(np.ones_like(h) if spec.activation == "linear" else s1)
        acts.append(zc)
        z, gz, hz = zc, gc, hc

    half, mid = spec.out_half, spec.out_mid
    out = Evaluation(value=mid + half * z[:, 0])
    if order >= 1:
        out.grad = half * gz[:, 0, :]
    if order >= 2:
        out.hess = half * hz[:, 0, :, :]

    if pjac:
        n = spec.n_params
        jac = np.empty((m, n))
        # reverse accumulation: delta[l] = d(output)/d(pre-activation of layer l)
        delta = np.full((m, 1), half)
        offsets = []
        k = 0
        for kern, bias in layers:
            offsets.append(k)
            k += kern.size + bias.size
        for li in range(n_layers - 1, -1, -1):
            kern, bias = layers[li]
            a, b = kern.shape
            off = offsets[li]
            jac[:, off : off + a * b] = np.einsum("ma,mb->mab", acts[li], delta).reshape(m, a * b)
            jac[:, off + a * b : off + a * b + b] = delta
            if li > 0:
                delta = (delta @ kern.T) * slopes[li - 1]
        out.pjac = jac
    return out


def forward(spec: NetworkSpec, w: np.ndarray, x) -> float | np.ndarray:
    """Ansatz value at one point (S,) or a batch (M, S)."""
    pts, single = _as_points(spec, x)
    val = evaluate(spec, w, pts).value
    return float(val[0]) if single else val


def eval_derivs(spec: NetworkSpec, w: np.ndarray, x) -> PointEval:
    """Value, spatial gradient and Hessian at one point or a batch."""
    pts, single = _as_points(spec, x)
    ev = evaluate(spec, w, pts, grad=True, hess=True)
    if single:
        return PointEval(value=ev.value[0], grad_x=ev.grad[0], hess_x=ev.hess[0])
    return PointEval(value=ev.value, grad_x=ev.grad, hess_x=ev.hess)


def param_jacobian(spec: NetworkSpec, w: np.ndarray, points) -> np.ndarray:
    """d(ansatz)/d(parameters) at each point: rows (M,), columns (N,)."""
    pts, _ = _as_points(spec, points)
    return evaluate(spec, w, pts, pjac=True).pjac


@dataclass
class FitResult:
    weights: np.ndarray
    rms: float
    converged: bool
    iterations: int


def fit_initial(
    spec: NetworkSpec,
    target: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    points,
    *,
    tol: float = 1e-6,
    max_iters: int = 2000,
    seed: int = 0,
    w0: np.ndarray | None = None,
    adam_iters: int = 300,
    gn_iters: int = 80,
    restarts: int = 1,
) -> FitResult:
    """Fit the network to target values at the sample points.

    Full-batch Adam to get near the target, then damped Gauss-Newton
    (Levenberg-Marquardt) polish, optionally repeated from `restarts`
    derived seeds keeping the best. Deterministic given the seed.
    `converged` reports whether the RMS misfit reached tol within the
    iteration budget; otherwise the best parameters found are returned.
    """
    best: FitResult | None = None
    for k in range(max(1, restarts)):
        res = _fit_one(
            spec,
            target,
            points,
            tol=tol,
            max_iters=max_iters,
            seed=seed + 1000003 * k,
            w0=w0 if k == 0 else None,
            adam_iters=adam_iters,
            gn_iters=gn_iters,
        )
        if best is None or res.rms < best.rms:
            best = res
        if best.rms <= tol:
            break
    return best


def _fit_one(
    spec: NetworkSpec,
    target,
    points,
    *,
    tol: float,
    max_iters: int,
    seed: int,
    w0: np.ndarray | None,
    adam_iters: int,
    gn_iters: int,
) -> FitResult:
    pts, _ = _as_points(spec, points)
    y = np.asarray(target(pts) if callable(target) else target, dtype=float).reshape(-1)
    if y.shape[0] != pts.shape[0]:
        raise ValueError("target values do not match the number of points")

    def rms_of(wv) -> float:
        return float(np.sqrt(np.mean((forward(spec, wv, pts) - y) ** 2)))

    rng = np.random.default_rng(seed)
    w = np.array(w0, dtype=float) if w0 is not None else init_params(spec, rng)
    best_w, best_rms = w.copy(), rms_of(w)
    iters = 0
    if best_rms <= tol:
        return FitResult(best_w, best_rms, True, 0)

    # phase 1: Adam, full batch
    m1 = np.zeros_like(w)
    m2 = np.zeros_like(w)
    b1, b2, eps = 0.9, 0.999, 1e-8
    n_pts = pts.shape[0]
    for it in range(min(adam_iters, max_iters)):
        ev = evaluate(spec, w, pts, pjac=True)
        r = ev.value - y
        g = (2.0 / n_pts) * (ev.pjac.T @ r)
        lr = 0.02 if it < adam_iters // 2 else 0.005
        m1 = b1 * m1 + (1 - b1) * g
        m2 = b2 * m2 + (1 - b2) * g * g
        t = it + 1
        w = w - lr * (m1 / (1 - b1**t)) / (np.sqrt(m2 / (1 - b2**t)) + eps)
        iters += 1
        cur = float(np.sqrt(np.mean(r * r)))
        if cur < best_rms:
            best_rms, best_w = cur, w.copy()
        if best_rms <= tol:
            return FitResult(best_w, best_rms, True, iters)

    # phase 2: Levenberg-Marquardt. Eigendecompose the smaller Gram matrix
    # once per iteration; the damping sweep then reuses the factors, so
    # failed trial steps are nearly free.
    w = best_w.copy()
    lam2 = 1e-6
    for _ in range(gn_iters):
        if iters >= max_iters or best_rms <= tol:
            break
        ev = evaluate(spec, w, pts, pjac=True)
        r = y - ev.value
        jac = ev.pjac
        m, n = jac.shape
        if n <= m:
            evals, vecs = np.linalg.eigh(jac.T @ jac)
            jr = vecs.T @ (jac.T @ r)
            step_of = lambda l2: vecs @ (jr / (np.maximum(evals, 0.0) + l2))
        else:
            evals, vecs = np.linalg.eigh(jac @ jac.T)
            ur = vecs.T @ r
            step_of = lambda l2: jac.T @ (vecs @ (ur / (np.maximum(evals, 0.0) + l2)))
        emax = float(evals[-1]) if evals.size else 1.0
        lam2 = max(lam2, 1e-14 * emax)
        improved = False
        for _ in range(14):
            cand = w + step_of(lam2)
            c_rms = rms_of(cand)
            if c_rms < best_rms:
                w, best_rms, best_w = cand, c_rms, cand.copy()
                lam2 = max(lam2 * 0.1, 1e-14 * emax)
                improved = True
                break
            lam2 *= 30.0
        iters += 1
        if not improved:
            break
    return FitResult(best_w, best_rms, best_rms <= tol, iters)


def save_params(path, spec: NetworkSpec, w: np.ndarray) -> None:
    """Text dump: header records the length and the spec hash."""
    header = f"count={spec.n_params} spec={spec.hash()}"
    np.savetxt(path, np.asarray(w, dtype=float), header=header, fmt="%.17g")


def load_params(path, spec: NetworkSpec | None = None) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline()
    w = np.loadtxt(path)
    w = np.atleast_1d(w)
    if spec is not None:
        if f"spec={spec.hash()}" not in first:
            raise ValueError(f"checkpoint {path} was written for a different network spec")
        if w.shape != (spec.n_params,):
            raise ValueError(f"checkpoint {path} has {w.shape[0]} values, spec wants {spec.n_params}")
    return w

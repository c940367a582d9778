"""Run configuration: dataclass schema, YAML loading, strict validation.

A run config names a registered case and may override any field of its
preset through nested YAML keys or dotted command-line overrides.
Unknown keys are rejected with their full path before anything is
allocated.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, is_dataclass

import yaml


class ConfigError(ValueError):
    """Schema violation; message carries the offending key path."""


@dataclass
class DomainConfig:
    lo: list = field(default_factory=lambda: [0.0])
    hi: list = field(default_factory=lambda: [1.0])
    periodic: list = field(default_factory=lambda: [False])


@dataclass
class MeshConfig:
    elements: list = field(default_factory=lambda: [1])


@dataclass
class ModelConfig:
    kind: str = "advection"  # advection | diffusion | compressible-ns
    u: list | None = None
    nu: float | None = None
    gamma: float = 1.4
    Pr: float = 0.72
    Re: float | None = None
    mu_b: float = 0.6
    alpha: float = 0.0


@dataclass
class NetworkConfig:
    hidden: list = field(default_factory=lambda: [20, 20])
    activation: str = "tanh"
    feature: str = "affine-scale"
    selected_dims: list | None = None
    output_ranges: dict | None = None  # per-variable [lo, hi]; None: from initial state
    range_pad_fraction: float = 0.05  # widening applied to degenerate auto ranges


@dataclass
class SamplingConfig:
    kind: str = "uniform"  # uniform | adaptive-1d
    counts: list = field(default_factory=lambda: [32])
    adapt_dim: int = 0
    beta: float = 0.9
    init_iterations: int = 20
    adapt_every: int = 1


@dataclass
class RiemannSection:
    inviscid: str = "lax-friedrichs"
    r1: float = 1.0
    r2: float = 0.1
    direction: list | None = None


@dataclass
class CorrectionSection:
    solution: list | None = None  # [order p, width w]
    flux: list | None = None
    boundary: list | None = None  # boundary-face flux correction (default: flux)


@dataclass
class MarchSection:
    integrator: str = "rk4"
    dt: float = 1e-3
    steps: int = 0
    exchange_per_stage: bool = True
    rank_cutoff: float = 1e-12
    tikhonov_lambda: float = 0.0


@dataclass
class FitSection:
    tol: float = 1e-5
    max_iters: int = 700
    adam_iters: int = 300
    gn_iters: int = 400
    restarts: int = 3


@dataclass
class BcObjectSection:
    kind: str = "wall-plane"  # wall-plane | inflow-point | inflow-strip | sponge
    target: str = ""  # named target resolved by the case registry
    dim: int | None = None
    value: float | None = None
    width: float | None = None  # inflow-strip extent above `value`
    location: list | None = None
    c_s: object = "1/dt"  # float, or the string "1/dt"


@dataclass
class OutputSection:
    metrics_every: int = 10
    snapshot_every: int = 0  # 0: first and last step only
    checkpoint_every: int = 0  # 0: final only
    eval_refine: int = 4  # evaluation-grid refinement per dimension


@dataclass
class RunConfig:
    case: str = "custom"
    scale_tag: str = "desk"
    long_running: bool = False
    seed: int = 1234
    threads: int = 2
    domain: DomainConfig = field(default_factory=DomainConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    networks: NetworkConfig = field(default_factory=NetworkConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    riemann: RiemannSection = field(default_factory=RiemannSection)
    correction: CorrectionSection = field(default_factory=CorrectionSection)
    march: MarchSection = field(default_factory=MarchSection)
    fit: FitSection = field(default_factory=FitSection)
    bc: list = field(default_factory=list)  # of BcObjectSection
    output: OutputSection = field(default_factory=OutputSection)


_LIST_ELEMENT_TYPES = {"bc": BcObjectSection}


def _apply(dst, data, path: str):
    """Recursively apply a mapping onto a dataclass tree, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(dst)}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in known:
            raise ConfigError(f"unknown config key {where!r}")
        current = getattr(dst, key)
        if is_dataclass(current) and isinstance(value, dict):
            _apply(current, value, where)
        elif key in _LIST_ELEMENT_TYPES and isinstance(value, list):
            items = []
            for i, entry in enumerate(value):
                item = _LIST_ELEMENT_TYPES[key]()
                _apply(item, entry, f"{where}[{i}]")
                items.append(item)
            setattr(dst, key, items)
        else:
            setattr(dst, key, value)
    return dst


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    return _apply(cfg, overrides, "")


def parse_dotted_override(text: str) -> dict:
    """Turn 'march.dt=1e-3' into a nested mapping."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    value = yaml.safe_load(raw)
    out: dict = {}
    node = out
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    return out


def _merge(base: dict, extra: dict) -> dict:
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = v
    return base


def load_config(path, dotted_overrides=()) -> RunConfig:
    """Read a YAML run config, resolve its case preset, apply overrides."""
    from .experiments import case_preset, known_cases

    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    case = data.pop("case", "custom")
    if case not in known_cases():
        raise ConfigError(f"unknown case {case!r}; available: {', '.join(known_cases())}")
    cfg = case_preset(case)
    for text in dotted_overrides:
        _merge(data, parse_dotted_override(text))
    apply_overrides(cfg, data)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    s = len(cfg.domain.lo)
    if not (len(cfg.domain.hi) == len(cfg.domain.periodic) == s):
        raise ConfigError("domain.lo, domain.hi, domain.periodic must share the dimension")
    if len(cfg.mesh.elements) != s:
        raise ConfigError("mesh.elements must have one entry per dimension")
    if cfg.model.kind not in ("advection", "diffusion", "compressible-ns"):
        raise ConfigError(f"unknown model.kind {cfg.model.kind!r}")
    if cfg.model.kind == "advection" and (cfg.model.u is None or len(cfg.model.u) != s):
        raise ConfigError("advection needs model.u with one entry per dimension")
    if cfg.model.kind == "diffusion" and not cfg.model.nu:
        raise ConfigError("diffusion needs model.nu")
    if cfg.model.kind == "compressible-ns" and not cfg.model.Re:
        raise ConfigError("compressible-ns needs model.Re")
    if cfg.sampling.kind == "uniform":
        if len(cfg.sampling.counts) != s:
            raise ConfigError("sampling.counts must have one entry per dimension")
    elif cfg.sampling.kind == "adaptive-1d":
        n_elems = 1
        for c in cfg.mesh.elements:
            n_elems *= c
        if s > 1 and (n_elems > 1 or any(cfg.domain.periodic)):
            raise ConfigError(
                "adaptive-1d sampling only supports configurations without paired faces"
            )
    else:
        raise ConfigError(f"unknown sampling.kind {cfg.sampling.kind!r}")
    if cfg.march.steps < 0 or cfg.march.dt <= 0:
        raise ConfigError("march.steps must be >= 0 and march.dt > 0")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    for sec in ("solution", "flux", "boundary"):
        val = getattr(cfg.correction, sec)
        if val is not None and (len(val) != 2 or val[0] < 1 or not 0 < val[1] <= 2):
            raise ConfigError(f"correction.{sec} must be [order >= 1, width in (0, 2]]")


def as_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)

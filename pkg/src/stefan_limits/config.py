"""JSON configuration: one block per module, merged into :class:`StudyConfig`."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .model import Grids, PhysicalParams, make_grids
from .spectral import SolverConfig
from .symbols import SampleSpec, SectorSpec
from .transforms import ContourSpec


class ConfigError(ValueError):
    pass


def _freeze(val):
    """JSON lists become (nested) tuples so configs stay hashable and comparable."""
    if isinstance(val, list):
        return tuple(_freeze(v) for v in val)
    return val


def _build(cls, block: Optional[dict], name: str):
    block = dict(block or {})
    known = {f.name for f in fields(cls)}
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"unknown keys in block {name!r}: {sorted(unknown)}")
    for key, val in block.items():
        block[key] = _freeze(val)
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid block {name!r}: {exc}") from exc


def coefficient(spec) -> Any:
    """Coefficient ``a(delta, sigma)`` from a number or ``[a0, a_delta, a_sigma]`` (affine)."""
    if isinstance(spec, (int, float)):
        val = float(spec)
        return lambda d, s: val
    if isinstance(spec, (list, tuple)) and len(spec) == 3:
        a0, ad, as_ = map(float, spec)
        return lambda d, s: a0 + ad * d + as_ * s
    raise ConfigError(f"coefficient must be a number or [a0, a_delta, a_sigma], got {spec!r}")


@dataclass(frozen=True)
class ModelConfig:
    N_x: int = 8
    L_x: float = 6.283185307179586
    Y_max: float = 10.0
    N_y: int = 64
    grading_ratio: float = 1.05
    T: float = 1.0
    N_t: int = 64
    c_plus: float = 1.0
    c_minus: float = 1.0
    kappa: float = 1.0
    p: float = 4.0
    R: float = 1.0
    delta: float = 0.0
    sigma: float = 0.0
    a_plus: Any = 1.0
    a_minus: Any = 1.0
    seed_family: str = "two_mode"
    amplitude: float = 1.0

    def grids(self) -> Grids:
        return make_grids(self.N_x, self.L_x, self.Y_max, self.N_y, self.grading_ratio, self.T, self.N_t)

    def params(self, delta: Optional[float] = None, sigma: Optional[float] = None) -> PhysicalParams:
        return PhysicalParams(c_plus=self.c_plus, c_minus=self.c_minus,
                              delta=self.delta if delta is None else delta,
                              sigma=self.sigma if sigma is None else sigma,
                              kappa=self.kappa, a_plus=coefficient(self.a_plus),
                              a_minus=coefficient(self.a_minus), p=self.p, R=self.R)


@dataclass(frozen=True)
class SectorConfig:
    phi0_over_pi: float = 0.45
    phi_fraction: float = 0.5
    lambda_range: tuple = (1e-3, 1e6)
    z_range: tuple = (1e-3, 1e6)
    n_lambda: int = 40
    n_z: int = 40
    n_delta: int = 5
    n_sigma: int = 5
    n_arg: int = 5
    kappa_list: tuple = tuple(2.0 ** k for k in range(11))
    floor: float = 1e-6
    ceiling: float = 1e6
    stability_tol: float = 0.10

    def sector(self) -> SectorSpec:
        return SectorSpec(self.phi0_over_pi, self.phi_fraction)

    def sample(self) -> SampleSpec:
        return SampleSpec(tuple(self.lambda_range), tuple(self.z_range), self.n_lambda, self.n_z,
                          self.n_delta, self.n_sigma, self.n_arg, self.floor, self.ceiling)


@dataclass(frozen=True)
class ContourConfig:
    kind: str = "talbot"
    N_nodes: int = 48
    tol: float = 1e-7
    refine_max: int = 1

    def spec(self) -> ContourSpec:
        return ContourSpec(kind=self.kind, N_nodes=self.N_nodes, tol=self.tol, refine_max=self.refine_max)


@dataclass(frozen=True)
class UniformityConfig:
    n_delta: int = 5
    n_sigma: int = 5
    ratio_max: float = 10.0


@dataclass(frozen=True)
class LimitConfig:
    limit_type: int = 5
    n_points: int = 7
    factor: float = 0.5
    start: float = 1.0
    delta0: float = 0.5
    sigma0: float = 1.0
    decrease_max: float = 0.25

    def __post_init__(self):
        if self.limit_type not in (1, 2, 3, 4, 5):
            raise ValueError("limit_type must be one of 1..5")
        if not (0 < self.factor < 1) or self.n_points < 2:
            raise ValueError("need 0 < factor < 1 and n_points >= 2")
        if not (self.delta0 > 0 and self.sigma0 > 0 and self.start > 0):
            raise ValueError("delta0, sigma0 and start must be positive")


@dataclass(frozen=True)
class CrossCheckConfig:
    fd_refine: int = 2
    fd_time_refine: int = 4
    tol_rho: float = 1e-3
    tol_v: float = 5e-3
    params: tuple = ((0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 0.0), (0.5, 0.5), (0.5, 1.0),
                     (1.0, 0.0), (1.0, 0.5), (1.0, 1.0))


@dataclass(frozen=True)
class StudyConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    sector: SectorConfig = field(default_factory=SectorConfig)
    contour: ContourConfig = field(default_factory=ContourConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    uniformity: UniformityConfig = field(default_factory=UniformityConfig)
    limit: LimitConfig = field(default_factory=LimitConfig)
    cross_check: CrossCheckConfig = field(default_factory=CrossCheckConfig)

    @staticmethod
    def from_dict(raw: dict) -> "StudyConfig":
        blocks = {"model": ModelConfig, "sector": SectorConfig, "contour": ContourConfig,
                  "solver": SolverConfig, "uniformity": UniformityConfig, "limit": LimitConfig,
                  "cross_check": CrossCheckConfig}
        unknown = set(raw) - set(blocks)
        if unknown:
            raise ConfigError(f"unknown config blocks: {sorted(unknown)}")
        return StudyConfig(**{k: _build(cls, raw.get(k), k) for k, cls in blocks.items()})

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> StudyConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a JSON object")
    return StudyConfig.from_dict(raw)

"""Fourier-Laplace symbols of the linearized two-phase problem and sector probes.

Every function here works on scalars or numpy arrays of ``lambda`` and
``z = |xi|^2`` (the tangential dimension enters only through ``z``).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import PhysicalParams

log = logging.getLogger(__name__)

BRANCH_TOL = 1e-10


class BranchCutWarning(RuntimeWarning):
    pass


def omega(lam, z, c: float, kappa: float):
    """Principal square root of ``lambda + kappa + c z``."""
    w = np.asarray(lam, dtype=complex) + kappa + c * np.asarray(z, dtype=complex)
    near = np.abs(np.pi - np.abs(np.angle(w))) < BRANCH_TOL
    if np.any(near & (w != 0)):
        warnings.warn("lambda + kappa + c z lies on the branch cut of the square root",
                      BranchCutWarning, stacklevel=2)
    out = np.sqrt(w)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SymbolParts:
    """The pieces of ``m`` needed by the solver and the probes."""

    mu: np.ndarray            # lambda + kappa
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    W: np.ndarray             # sqrt(c+) omega+ + sqrt(c-) omega-
    S: np.ndarray             # sigma z + delta (lambda + kappa)
    A: np.ndarray             # a+ sqrt(c+) omega+ + a- sqrt(c-) omega-
    m: np.ndarray


def symbol_parts(lam, z, params: PhysicalParams, kappa: Optional[float] = None) -> SymbolParts:
    kappa = params.kappa if kappa is None else kappa
    lam = np.asarray(lam, dtype=complex)
    z = np.asarray(z, dtype=complex)
    mu = lam + kappa
    wp = omega(lam, z, params.c_plus, kappa)
    wm = omega(lam, z, params.c_minus, kappa)
    sp, sm = np.sqrt(params.c_plus), np.sqrt(params.c_minus)
    a_p, a_m = params.a
    W = sp * wp + sm * wm
    S = params.sigma * z + params.delta * mu
    A = a_p * sp * wp + a_m * sm * wm
    return SymbolParts(mu=mu, omega_plus=wp, omega_minus=wm, W=W, S=S, A=A, m=mu + S * W + A)


@dataclass(frozen=True)
class SectorPoint:
    lam: complex
    z: complex
    delta: float
    sigma: float


@dataclass(frozen=True)
class SectorSpec:
    phi0_over_pi: float = 0.45
    phi_fraction: float = 0.5

    def __post_init__(self):
        if not (1 / 3 < self.phi0_over_pi < 1 / 2):
            raise ValueError("phi0 must lie in (pi/3, pi/2)")
        if not (0 < self.phi_fraction < 1):
            raise ValueError("phi must lie strictly inside (0, phi0 - pi/3)")

    @property
    def phi0(self) -> float:
        return self.phi0_over_pi * np.pi

    @property
    def phi(self) -> float:
        return self.phi_fraction * (self.phi0 - np.pi / 3)

    @property
    def lambda_angle(self) -> float:
        return np.pi - self.phi0


def is_admissible(point: SectorPoint, sector: SectorSpec) -> bool:
    lam, z = complex(point.lam), complex(point.z)
    return (lam != 0 and abs(np.angle(lam)) < sector.lambda_angle
            and (z == 0 or abs(np.angle(z)) < sector.phi))


def m_symbol(point: SectorPoint, params: PhysicalParams) -> complex:
    """``m(lambda, z)`` at a sector point (parameters taken from the point)."""
    p = params.with_params(point.delta, point.sigma)
    return symbol_parts(point.lam, point.z, p).m[()]


def m_family_values(lam, z, params: PhysicalParams) -> np.ndarray:
    """The seven bounded multipliers ``m_0 .. m_6``, stacked along axis 0."""
    parts = symbol_parts(lam, z, params)
    f = parts.m
    z = np.asarray(z, dtype=complex)
    sz = np.sqrt(z)
    smu = np.sqrt(parts.mu)
    d, s = params.delta, params.sigma
    return np.stack([
        1 / f,
        parts.mu / f,
        sz / f,
        s * z * smu / f,
        s * z * sz / f,
        d * parts.mu * smu / f,
        d * parts.mu * sz / f,
    ])


def m_family(point: SectorPoint, params: PhysicalParams) -> np.ndarray:
    p = params.with_params(point.delta, point.sigma)
    return m_family_values(point.lam, point.z, p)


def triangle_ratio(f1, f2):
    """``|f1 + f2| / (|f1| + |f2|)``; undefined (rejected) when both vanish."""
    f1 = np.asarray(f1, dtype=complex)
    f2 = np.asarray(f2, dtype=complex)
    den = np.abs(f1) + np.abs(f2)
    if np.any(den == 0):
        raise ValueError("triangle_ratio is undefined at f1 = f2 = 0")
    out = np.abs(f1 + f2) / den
    return out[()] if out.ndim == 0 else out


def split_symbol(lam, z, params: PhysicalParams) -> tuple[np.ndarray, np.ndarray]:
    """The decomposition ``m = f1 + f2`` used for the triangle-type lower bound.

    ``f1 = (lambda + kappa)(delta W + 1)`` collects the terms carrying the time
    scale and ``f2 = sigma z W + a+ sqrt(c+) omega+ + a- sqrt(c-) omega-`` the rest.
    """
    parts = symbol_parts(lam, z, params)
    f1 = parts.mu * (params.delta * parts.W + 1)
    return f1, parts.m - f1


@dataclass
class SymbolProbe:
    point: SectorPoint
    omega_plus: complex
    omega_minus: complex
    m_value: complex
    m_family: np.ndarray
    triangle_ratio: float


def probe_point(point: SectorPoint, params: PhysicalParams) -> SymbolProbe:
    p = params.with_params(point.delta, point.sigma)
    parts = symbol_parts(point.lam, point.z, p)
    f1, f2 = split_symbol(point.lam, point.z, p)
    return SymbolProbe(point=point, omega_plus=complex(parts.omega_plus),
                       omega_minus=complex(parts.omega_minus), m_value=complex(parts.m),
                       m_family=m_family_values(point.lam, point.z, p),
                       triangle_ratio=float(triangle_ratio(f1, f2)))


# ----------------------------------------------------------------------------- sampling

@dataclass(frozen=True)
class SampleSpec:
    lambda_range: tuple[float, float] = (1e-3, 1e6)
    z_range: tuple[float, float] = (1e-3, 1e6)
    n_lambda: int = 40
    n_z: int = 40
    n_delta: int = 5
    n_sigma: int = 5
    n_arg: int = 7
    floor: float = 1e-6
    ceiling: float = 1e6

    def __post_init__(self):
        if min(self.n_lambda, self.n_z, self.n_arg) < 2 or min(self.n_delta, self.n_sigma) < 1:
            raise ValueError("degenerate sample grid")
        if not (0 < self.lambda_range[0] < self.lambda_range[1]):
            raise ValueError("lambda_range must be increasing and positive")
        if not (0 < self.z_range[0] < self.z_range[1]):
            raise ValueError("z_range must be increasing and positive")

    def refined(self) -> "SampleSpec":
        """Nested refinement: every old sample is also a new sample."""
        return SampleSpec(self.lambda_range, self.z_range, 2 * self.n_lambda - 1, 2 * self.n_z - 1,
                          self.n_delta, self.n_sigma, 2 * self.n_arg - 1, self.floor, self.ceiling)


def sector_samples(sector: SectorSpec, sample: SampleSpec) -> tuple[np.ndarray, np.ndarray]:
    """Tensor samples of ``lambda`` and ``z`` strictly inside their sectors.

    Moduli are log-spaced over the declared ranges; arguments are equispaced
    over ``(1 - 1e-3)`` times the open sector half-angle, endpoints included.
    Returns flattened arrays (``lambda`` samples, ``z`` samples).
    """
    shrink = 1 - 1e-3
    r_l = np.geomspace(*sample.lambda_range, sample.n_lambda)
    a_l = np.linspace(-1, 1, sample.n_arg) * sector.lambda_angle * shrink
    r_z = np.geomspace(*sample.z_range, sample.n_z)
    a_z = np.linspace(-1, 1, sample.n_arg) * sector.phi * shrink
    lam = (r_l[:, None] * np.exp(1j * a_l[None, :])).ravel()
    z = (r_z[:, None] * np.exp(1j * a_z[None, :])).ravel()
    return lam, z


def parameter_samples(R: float, sample: SampleSpec) -> list[tuple[float, float]]:
    return [(float(d), float(s)) for d in np.linspace(0, R, sample.n_delta)
            for s in np.linspace(0, R, sample.n_sigma)]


@dataclass
class BoundReport:
    min_triangle_ratio: float
    min_lower_ratio: float
    sup_m: np.ndarray
    min_re_omega: float
    n_samples: int
    floor: float
    ceiling: float
    admissible: bool
    per_parameter: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return (self.min_triangle_ratio < self.floor or self.min_lower_ratio < self.floor
                or bool(np.any(self.sup_m > self.ceiling)) or not np.all(np.isfinite(self.sup_m))
                or not self.admissible)

    def as_dict(self) -> dict:
        return {"min_triangle_ratio": self.min_triangle_ratio,
                "min_lower_ratio": self.min_lower_ratio,
                "sup_m": [float(v) for v in self.sup_m],
                "min_re_omega": self.min_re_omega,
                "n_samples": self.n_samples, "floor": self.floor, "ceiling": self.ceiling,
                "admissible": self.admissible, "status": "FAIL" if self.failed else "PASS"}


def probe_sector_bounds(params: PhysicalParams, sector: SectorSpec = SectorSpec(),
                        sample: SampleSpec = SampleSpec(), keep_rows: bool = False) -> BoundReport:
    """Sample the triangle ratio, ``|m| / (|f1| + |f2|)`` and ``sup |m_j|``.

    The (lambda, z) tensor grid is evaluated for every (delta, sigma) on the
    ``n_delta x n_sigma`` grid of ``[0, R]^2``; reductions run in a fixed
    enumeration order so results are reproducible.
    """
    lam, z = sector_samples(sector, sample)
    L, Z = np.meshgrid(lam, z, indexing="ij")
    L, Z = L.ravel(), Z.ravel()
    admissible = bool(np.all(np.abs(np.angle(L)) < sector.lambda_angle)
                      and np.all(np.abs(np.angle(Z)) < sector.phi))
    tri_min, low_min, re_min = np.inf, np.inf, np.inf
    sup = np.zeros(7)
    rows = []
    for d, s in parameter_samples(params.R, sample):
        p = params.with_params(d, s)
        parts = symbol_parts(L, Z, p)
        f1 = parts.mu * (d * parts.W + 1)
        f2 = parts.m - f1
        tri = triangle_ratio(f1, f2)
        fam = np.abs(m_family_values(L, Z, p))
        tri_min = min(tri_min, float(tri.min()))
        low_min = min(low_min, float(np.min(np.abs(parts.m) / (np.abs(f1) + np.abs(f2)))))
        re_min = min(re_min, float(min(parts.omega_plus.real.min(), parts.omega_minus.real.min())))
        sup_here = fam.max(axis=1)
        sup = np.maximum(sup, sup_here)
        if keep_rows:
            rows.append((d, s, L, Z, tri, fam))
    rep = BoundReport(min_triangle_ratio=tri_min, min_lower_ratio=low_min, sup_m=sup,
                      min_re_omega=re_min, n_samples=L.size * sample.n_delta * sample.n_sigma,
                      floor=sample.floor, ceiling=sample.ceiling, admissible=admissible,
                      per_parameter=rows)
    log.debug("sector probe: %s", rep.as_dict())
    return rep


def omega_lower_constant(c: float, kappa: float, sector: SectorSpec = SectorSpec(),
                         sample: SampleSpec = SampleSpec()) -> float:
    """Sampled ``min |omega| / (sqrt|lambda| + sqrt(kappa) + c sqrt|z|)``."""
    lam, z = sector_samples(sector, sample)
    L, Z = np.meshgrid(lam, z, indexing="ij")
    w = omega(L, Z, c, kappa)
    return float(np.min(np.abs(w) / (np.sqrt(np.abs(L)) + np.sqrt(kappa) + c * np.sqrt(np.abs(Z)))))


class PerturbationError(RuntimeError):
    pass


def perturbation_margin(params: PhysicalParams, sector: SectorSpec = SectorSpec(),
                        sample: SampleSpec = SampleSpec(), kappa: Optional[float] = None) -> float:
    """``sup |a+ sqrt(c+) omega+ + a- sqrt(c-) omega-| / |m - (that sum)|`` over the sector samples."""
    if params.delta <= 0 and params.sigma <= 0:
        raise ValueError("the perturbation bound needs delta > 0 or sigma > 0")
    p = params if kappa is None else params.with_params(kappa=kappa)
    lam, z = sector_samples(sector, sample)
    L, Z = np.meshgrid(lam, z, indexing="ij")
    parts = symbol_parts(L, Z, p)
    return float(np.max(np.abs(parts.A) / np.abs(parts.m - parts.A)))


def find_kappa(params: PhysicalParams, kappa_list: Sequence[float] = tuple(2.0 ** k for k in range(11)),
               target: float = 0.5, sector: SectorSpec = SectorSpec(),
               sample: SampleSpec = SampleSpec()) -> tuple[float, list[tuple[float, float]]]:
    """Smallest listed ``kappa`` with ``perturbation_margin <= target``."""
    trail = []
    for k in kappa_list:
        marg = perturbation_margin(params, sector, sample, kappa=k)
        trail.append((float(k), marg))
        if marg <= target:
            return float(k), trail
    raise PerturbationError(f"margin stayed above {target} up to kappa={kappa_list[-1]}: {trail[-1][1]:.3g}")

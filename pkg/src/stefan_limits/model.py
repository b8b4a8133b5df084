"""Domain types, grids, parameter validation and compatible-data factory.

Conventions used throughout the package:

* tangential dimension is one; ``x`` lives on a periodic grid of length ``L_x``;
* bulk fields are stored per side as arrays indexed by the *distance* ``s = |y|``
  from the interface, so ``side[..., 0]`` is the one-sided trace;
* ``t_grid`` is uniform and includes ``t = 0`` as its first node;
* interface fields have shape ``(N_t + 1, N_x)``, bulk fields
  ``(N_t + 1, N_x, N_y + 1)`` per side, initial bulk fields ``(N_x, N_y + 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

Coefficient = Callable[[float, float], float]


class ParameterError(ValueError):
    """Raised when a :class:`PhysicalParams` invariant is violated."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class CompatibilityError(ValueError):
    pass


def _unit(delta: float, sigma: float) -> float:
    return 1.0


@dataclass(frozen=True)
class PhysicalParams:
    c_plus: float = 1.0
    c_minus: float = 1.0
    delta: float = 0.0
    sigma: float = 0.0
    kappa: float = 1.0
    a_plus: Coefficient = _unit
    a_minus: Coefficient = _unit
    p: float = 4.0
    R: float = 1.0

    @property
    def a(self) -> tuple[float, float]:
        """``(a_+, a_-)`` evaluated at the current ``(delta, sigma)``."""
        return (float(self.a_plus(self.delta, self.sigma)),
                float(self.a_minus(self.delta, self.sigma)))

    @property
    def c(self) -> tuple[float, float]:
        return (self.c_plus, self.c_minus)

    def with_params(self, delta: Optional[float] = None, sigma: Optional[float] = None,
                    **kw) -> "PhysicalParams":
        if delta is not None:
            kw["delta"] = delta
        if sigma is not None:
            kw["sigma"] = sigma
        return replace(self, **kw)


def validate_params(params: PhysicalParams, n_probe: int = 9) -> PhysicalParams:
    """Return ``params`` unchanged if every invariant holds.

    The first violated invariant is reported through :class:`ParameterError`
    whose ``invariant`` attribute names it. Continuity of ``a_pm`` is probed by
    evaluating on an ``n_probe x n_probe`` grid of ``[0, R]^2``.
    """
    checks = [
        ("c_plus>0", params.c_plus > 0),
        ("c_minus>0", params.c_minus > 0),
        ("kappa>=1", params.kappa >= 1),
        ("R>0", params.R > 0),
        ("0<=delta<=R", 0 <= params.delta <= params.R),
        ("0<=sigma<=R", 0 <= params.sigma <= params.R),
        ("p>3", params.p > 3),
    ]
    for name, ok in checks:
        if not ok:
            raise ParameterError(name, f"violated by {params}")
    for name, fn in (("a_plus(0,0)>0", params.a_plus), ("a_minus(0,0)>0", params.a_minus)):
        if not float(fn(0.0, 0.0)) > 0:
            raise ParameterError(name, f"got {fn(0.0, 0.0)!r}")
    probe = np.linspace(0.0, params.R, n_probe)
    for name, fn in (("a_plus finite", params.a_plus), ("a_minus finite", params.a_minus)):
        vals = np.array([[fn(d, s) for s in probe] for d in probe], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ParameterError(name, "non-finite value on the parameter box")
    return params


@dataclass(frozen=True)
class Grids:
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    xi: np.ndarray
    L_x: float

    @property
    def N_x(self) -> int:
        return self.x.size

    @property
    def N_t(self) -> int:
        return self.t.size - 1

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def dx(self) -> float:
        return self.L_x / self.N_x

    @property
    def Y_max(self) -> float:
        return float(self.y[-1])


def make_grids(N_x: int = 8, L_x: float = 2 * np.pi, Y_max: float = 8.0, N_y: int = 64,
               grading_ratio: float = 1.05, T: float = 1.0, N_t: int = 64) -> Grids:
    """Build the tangential, normal (graded) and time grids.

    The normal grid has ``N_y`` cells with geometrically growing widths
    ``h_i = h_0 r^i`` summing to ``Y_max``.
    """
    if N_x < 8 or N_x % 2:
        raise ValueError("N_x must be even and >= 8")
    if Y_max <= 0 or N_y < 2 or grading_ratio < 1 or T <= 0 or N_t < 1:
        raise ValueError("invalid grid specification")
    x = L_x * np.arange(N_x) / N_x
    widths = grading_ratio ** np.arange(N_y)
    y = np.concatenate([[0.0], np.cumsum(widths)])
    y *= Y_max / y[-1]
    t = np.linspace(0.0, T, N_t + 1)
    k = np.fft.fftfreq(N_x, d=1.0 / N_x)
    xi = 2 * np.pi * k / L_x
    return Grids(x=x, y=y, t=t, xi=xi, L_x=float(L_x))


def fornberg_weights(x0: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``."""
    n = len(nodes)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def trace_derivative(values: np.ndarray, y: np.ndarray, accuracy: int = 2) -> np.ndarray:
    """One-sided derivative ``d/ds`` at ``s = 0`` along the last axis."""
    w = fornberg_weights(0.0, y[:accuracy + 1], 1)
    return values[..., :accuracy + 1] @ w


@dataclass(frozen=True)
class DataTuple:
    """The inhomogeneities ``(f, g, h, v0, rho0)`` on their grids.

    ``dv0`` holds the one-sided derivative traces ``d/ds v0^pm(s=0)`` (distance
    convention); when absent they are computed by one-sided differences.
    """

    f: tuple[np.ndarray, np.ndarray]
    g: np.ndarray
    h: np.ndarray
    v0: tuple[np.ndarray, np.ndarray]
    rho0: np.ndarray
    dv0: Optional[tuple[np.ndarray, np.ndarray]] = None
    report: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arrays = [*self.f, self.g, self.h, *self.v0, self.rho0]
        if self.dv0 is not None:
            arrays += list(self.dv0)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("data fields must be finite")

    def derivative_traces(self, grids: Grids, accuracy: int = 2) -> tuple[np.ndarray, np.ndarray]:
        if self.dv0 is not None:
            return self.dv0
        return tuple(trace_derivative(side, grids.y, accuracy) for side in self.v0)

    def scaled(self, alpha: float) -> "DataTuple":
        return combine(((alpha, self),))

    @staticmethod
    def zeros(grids: Grids) -> "DataTuple":
        nt, nx, ny = grids.t.size, grids.N_x, grids.y.size
        bulk = np.zeros((nt, nx, ny))
        init = np.zeros((nx, ny))
        return DataTuple(f=(bulk, bulk.copy()), g=np.zeros((nt, nx)), h=np.zeros((nt, nx)),
                         v0=(init, init.copy()), rho0=np.zeros(nx),
                         dv0=(np.zeros(nx), np.zeros(nx)))


def combine(terms) -> DataTuple:
    """Linear combination ``sum alpha_i D_i`` of data tuples."""
    terms = list(terms)

    def lin(get):
        return sum(a * get(d) for a, d in terms)

    dv0 = None
    if all(d.dv0 is not None for _, d in terms):
        dv0 = (lin(lambda d: d.dv0[0]), lin(lambda d: d.dv0[1]))
    return DataTuple(f=(lin(lambda d: d.f[0]), lin(lambda d: d.f[1])),
                     g=lin(lambda d: d.g), h=lin(lambda d: d.h),
                     v0=(lin(lambda d: d.v0[0]), lin(lambda d: d.v0[1])),
                     rho0=lin(lambda d: d.rho0), dv0=dv0)


@dataclass(frozen=True)
class SolutionTriple:
    """``(v, rho, rho_E)`` plus the quantities needed for residual checks.

    ``dv`` and ``drhoE`` are one-sided derivative traces ``d/ds`` at the
    interface (distance convention), ``drho`` the time derivative of ``rho``.
    """

    v: tuple[np.ndarray, np.ndarray]
    rho: np.ndarray
    rho_E: tuple[np.ndarray, np.ndarray]
    drho: np.ndarray
    dv: Optional[tuple[np.ndarray, np.ndarray]] = None
    drhoE: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __add__(self, other: "SolutionTriple") -> "SolutionTriple":
        def add(a, b):
            if a is None or b is None:
                return None
            return (a[0] + b[0], a[1] + b[1])
        return SolutionTriple(v=add(self.v, other.v), rho=self.rho + other.rho,
                              rho_E=add(self.rho_E, other.rho_E), drho=self.drho + other.drho,
                              dv=add(self.dv, other.dv), drhoE=add(self.drhoE, other.drhoE))

    def __sub__(self, other: "SolutionTriple") -> "SolutionTriple":
        return self + other.scaled(-1.0)

    def scaled(self, alpha: float) -> "SolutionTriple":
        def sc(a):
            return None if a is None else (alpha * a[0], alpha * a[1])
        return SolutionTriple(v=sc(self.v), rho=alpha * self.rho, rho_E=sc(self.rho_E),
                              drho=alpha * self.drho, dv=sc(self.dv), drhoE=sc(self.drhoE))


@dataclass(frozen=True)
class JumpTrace:
    values: np.ndarray


def jump_trace(w: tuple[np.ndarray, np.ndarray], params: PhysicalParams,
               grids: Optional[Grids] = None,
               derivative: Optional[tuple[np.ndarray, np.ndarray]] = None,
               accuracy: int = 2) -> JumpTrace:
    """``c_+ d_y w^+(0) - c_- d_y w^-(0)`` nodewise.

    In the distance convention ``d_y w^- = -d_s w^-`` so the jump is
    ``c_+ d_s w^+ + c_- d_s w^-``. Analytic derivative traces may be passed in
    ``derivative``; otherwise one-sided differences of the given ``accuracy``
    order are taken on ``grids.y``.
    """
    if derivative is None:
        if grids is None:
            raise ValueError("grids required for finite-difference traces")
        if w[0].shape != w[1].shape or w[0].shape[-1] != grids.y.size:
            raise ValueError("bulk field shape does not match the y grid")
        derivative = (trace_derivative(w[0], grids.y, accuracy),
                      trace_derivative(w[1], grids.y, accuracy))
    return JumpTrace(params.c_plus * derivative[0] + params.c_minus * derivative[1])


# per-mode tangential calculus ---------------------------------------------------------

def fourier_multiplier(field: np.ndarray, grids: Grids, symbol) -> np.ndarray:
    """Apply ``symbol(xi)`` along the last (tangential) axis of a real field."""
    hat = np.fft.fft(field, axis=-1)
    out = np.fft.ifft(hat * symbol(grids.xi), axis=-1)
    return out.real


def laplacian_x(field: np.ndarray, grids: Grids) -> np.ndarray:
    return fourier_multiplier(field, grids, lambda xi: -xi ** 2)


def bessel_x(field: np.ndarray, grids: Grids, power: float) -> np.ndarray:
    """``(1 - Delta_x)^power`` applied per mode."""
    return fourier_multiplier(field, grids, lambda xi: (1.0 + xi ** 2) ** power)


def extension_jump(rho0: np.ndarray, params: PhysicalParams, grids: Grids) -> np.ndarray:
    """``[[c d_y (a e^{-|y|(1-Delta_x)^{1/2}} rho0)]]`` in closed form."""
    a_p, a_m = params.a
    return -(params.c_plus * a_p + params.c_minus * a_m) * bessel_x(rho0, grids, 0.5)


def stefan_initial_rate(data: DataTuple, params: PhysicalParams, grids: Grids,
                        accuracy: int = 2) -> np.ndarray:
    """``q0 = h(0) - [[c gamma d_y (v0 - a e^{-|y|(1-Delta_x)^{1/2}} rho0)]]``."""
    jv0 = jump_trace(data.v0, params, grids, derivative=data.derivative_traces(grids, accuracy)).values
    return data.h[0] - jv0 + extension_jump(data.rho0, params, grids)


def compatibility_residual(data: DataTuple, params: PhysicalParams, grids: Grids,
                           accuracy: int = 2) -> np.ndarray:
    """Residual of the t = 0 compatibility condition on each side, shape (2, N_x)."""
    q0 = stefan_initial_rate(data, params, grids, accuracy)
    rest = -params.sigma * laplacian_x(data.rho0, grids) + params.delta * q0 - data.g[0]
    return np.stack([data.v0[0][:, 0] + rest, data.v0[1][:, 0] + rest])


def make_compatible_data(params: PhysicalParams, grids: Grids, free: DataTuple,
                         g_free: Optional[np.ndarray] = None, accuracy: int = 2) -> DataTuple:
    """Complete seeds into a data tuple satisfying the t = 0 compatibility condition.

    ``g`` is set to ``g_free + exp(-t) G0`` with
    ``G0 = gamma v0 - sigma Delta_x rho0 + delta q0``. ``free.g`` is used as
    ``g_free`` unless given explicitly; it must vanish at ``t = 0``.
    """
    g_free = free.g if g_free is None else g_free
    if np.max(np.abs(g_free[0])) > 1e-12:
        raise CompatibilityError("g_free(0) must vanish")
    trace_p, trace_m = free.v0[0][:, 0], free.v0[1][:, 0]
    if np.max(np.abs(trace_p - trace_m)) > 1e-12:
        raise CompatibilityError("gamma v0^+ and gamma v0^- differ; no single g(0) is compatible")
    q0 = stefan_initial_rate(free, params, grids, accuracy)
    G0 = trace_p - params.sigma * laplacian_x(free.rho0, grids) + params.delta * q0
    g = g_free + np.exp(-grids.t)[:, None] * G0[None, :]
    report = {"G0": G0}
    if params.delta == 0:
        jv0 = jump_trace(free.v0, params, grids,
                         derivative=free.derivative_traces(grids, accuracy)).values
        w = params.sigma * (free.h[0] - jv0)
        from .norms import space_norm
        report["stefan_initial_norm"] = space_norm(w, grids.dx, 2 - 6 / params.p, params.p,
                                               periodic=True)
    return DataTuple(f=free.f, g=g, h=free.h, v0=free.v0, rho0=free.rho0,
                     dv0=free.derivative_traces(grids, accuracy), report=report)


# ----------------------------------------------------------------------------- data families

SEED_FAMILIES = ("two_mode", "zero_trace", "single_mode", "zero")


def seed_family(name: str, grids: Grids, amplitude: float = 1.0) -> DataTuple:
    """Smooth data seeds built from the ``cos x`` and ``cos 2x`` modes.

    ``two_mode`` has nonzero initial values (its ``g`` is the free part that
    :func:`make_compatible_data` completes); ``zero_trace`` vanishes at
    ``t = 0`` and has zero initial values; ``single_mode`` is the one-mode
    Stefan forcing ``h = t exp(-t) cos x``. All seeds are even in ``x`` and
    decay like Gaussians in ``y``.
    """
    if name not in SEED_FAMILIES:
        raise ValueError(f"unknown seed family {name!r}; expected one of {SEED_FAMILIES}")
    z = DataTuple.zeros(grids)
    if name == "zero":
        return z
    T_, X = np.meshgrid(grids.t, grids.x, indexing="ij")
    y = grids.y
    cx, c2 = np.cos(grids.x), np.cos(2 * grids.x)
    if name == "single_mode":
        return DataTuple(f=z.f, g=z.g, h=amplitude * T_ * np.exp(-T_) * np.cos(X), v0=z.v0,
                         rho0=z.rho0, dv0=z.dv0)
    bump = np.exp(-(y - 1) ** 2)
    if name == "zero_trace":
        f = bump[None, None, :] * (T_ * np.cos(2 * X))[:, :, None]
        h = T_ * np.exp(-T_) * np.cos(X) + T_ ** 2 * np.cos(2 * X)
        g = np.sin(2 * T_) * np.cos(X)
        return DataTuple(f=(amplitude * f, 0.5 * amplitude * f), g=amplitude * g, h=amplitude * h,
                         v0=z.v0, rho0=z.rho0, dv0=z.dv0)
    # two_mode: v0 with matching traces on both sides and analytic derivative traces
    v0p = np.outer(cx, (1 + y) * np.exp(-y ** 2)) + 0.3 * np.outer(c2, np.exp(-y ** 2))
    v0m = np.outer(cx, np.exp(-2 * y ** 2)) + 0.3 * np.outer(c2, np.exp(-y))
    dv0 = (cx.copy(), -0.3 * c2)
    f = bump[None, None, :] * (np.cos(T_) * np.cos(2 * X))[:, :, None]
    h = 0.5 * np.cos(3 * T_) * np.cos(X)
    g = np.sin(T_) * np.cos(2 * X)
    rho0 = 0.5 * cx + 0.2 * c2
    a = amplitude
    return DataTuple(f=(a * f, 0.5 * a * f), g=a * g, h=a * h, v0=(a * v0p, a * v0m),
                     rho0=a * rho0, dv0=(a * dv0[0], a * dv0[1]))

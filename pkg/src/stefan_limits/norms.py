"""Discrete Sobolev-Slobodeckij norms and the data/solution norms built from them.

Conventions:

* a norm of order ``s`` combines its pieces in the ``l^p`` way,
  ``||u||_{W^s_p}^p = sum_{k <= [s]} ||d^k u||_p^p + [d^{[s]} u]_{s - [s], p}^p``;
* tangential derivatives are spectral (periodic grid), time and normal
  derivatives use second-order differences;
* a fractional norm on the two-dimensional half planes is the sum of the
  directional norms in ``x`` and ``y`` (the intersection characterization),
  taken over both sides;
* intersection spaces are normed by the sum of their constituent norms.

All quadratures are trapezoidal on the given nodes; the near-diagonal part of
the double integral is integrated in closed form for the local linear
interpolant.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .model import DataTuple, Grids, PhysicalParams, SolutionTriple, jump_trace


@dataclass(frozen=True)
class NormSpec:
    s: float
    p: float = 4.0
    axis: str = "space"
    domain: str = "interval"

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("order must be non-negative")
        if self.domain not in ("interval", "torus"):
            raise ValueError("domain must be 'interval' or 'torus'")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    @property
    def theta(self) -> float:
        return self.s - math.floor(self.s)


def trapezoid_weights(coords: np.ndarray, periodic: bool = False, period: Optional[float] = None) -> np.ndarray:
    if periodic:
        return np.full(coords.size, period / coords.size)
    h = np.diff(coords)
    w = np.zeros(coords.size)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def _derivative(u: np.ndarray, coords: np.ndarray, periodic: bool, period: Optional[float]) -> np.ndarray:
    """First derivative along axis 0."""
    if periodic:
        n = coords.size
        k = np.fft.fftfreq(n, d=1.0 / n) * 2 * np.pi / period
        if n % 2 == 0:
            k[n // 2] = 0.0
        uh = np.fft.fft(u, axis=0)
        return np.fft.ifft(uh * (1j * k).reshape((-1,) + (1,) * (u.ndim - 1)), axis=0).real
    # differencing u - u[0] leaves the result unchanged but makes constants map to exact zeros
    return np.gradient(u - u[:1], coords, axis=0, edge_order=2)


def _seminorm_pow(u: np.ndarray, coords: np.ndarray, theta: float, p: float,
                  xw: np.ndarray, periodic: bool, period: Optional[float],
                  du: Optional[np.ndarray] = None) -> float:
    """``[u]^p`` along axis 0 of ``u`` (shape ``(N, M)``), values in ``L_p`` with weights ``xw``."""
    n = coords.size
    w = trapezoid_weights(coords, periodic, period)
    expo = 1 + theta * p
    total = 0.0
    for i in range(n):
        diff = (np.abs(u[i][None, :] - u) ** p) @ xw
        dist = np.abs(coords[i] - coords)
        if periodic:
            dist = np.minimum(dist, period - dist)
        dist[i] = 1.0
        contrib = w[i] * w * diff / dist ** expo
        contrib[i] = 0.0
        total += contrib.sum()
    if du is None:
        du = _derivative(u, coords, periodic, period)
    q = p * (1 - theta)
    diag = (np.abs(du) ** p) @ xw
    total += float(np.sum(diag * 2 * w ** (q + 1) / (q * (q + 1))))
    return float(total)


def _as2d(u: np.ndarray) -> np.ndarray:
    return u.reshape(u.shape[0], -1)


def slobodeckij_seminorm(u: np.ndarray, coords: np.ndarray, spec: NormSpec,
                         value_weights: Optional[np.ndarray] = None,
                         period: Optional[float] = None) -> float:
    """Seminorm of order ``spec.theta`` along axis 0 of ``u``.

    Trailing axes are treated as values in ``L_p`` with the flattened
    quadrature ``value_weights`` (default: unit weights). ``coords`` are the
    node positions; on the torus ``period`` is required and distances wrap.
    The seminorm of the ``[s]``-th derivative is not taken here; see
    :func:`space_norm`.
    """
    theta = spec.theta
    if not (0 < theta < 1):
        raise ValueError("fractional part of the order must lie in (0, 1)")
    periodic = spec.domain == "torus"
    if periodic and period is None:
        raise ValueError("period required on the torus")
    u2 = _as2d(np.asarray(u, dtype=float))
    xw = np.ones(u2.shape[1]) if value_weights is None else np.asarray(value_weights).ravel()
    return _seminorm_pow(u2, coords, theta, spec.p, xw, periodic, period) ** (1 / spec.p)


def _lp_pow(u2: np.ndarray, w: np.ndarray, xw: np.ndarray, p: float) -> float:
    return float(w @ ((np.abs(u2) ** p) @ xw))


def sobolev_pow(u: np.ndarray, coords: np.ndarray, s: float, p: float, periodic: bool = False,
                period: Optional[float] = None, value_weights: Optional[np.ndarray] = None,
                derivatives: Optional[list] = None) -> float:
    """``||u||^p`` in ``W^s_p`` along axis 0 (values in weighted ``L_p``).

    ``derivatives`` may supply precomputed ``d^k u`` for ``k = 1, 2, ...``
    (e.g. an accurate time derivative); missing ones are differenced.
    """
    u2 = _as2d(np.asarray(u, dtype=float))
    xw = np.ones(u2.shape[1]) if value_weights is None else np.asarray(value_weights).ravel()
    w = trapezoid_weights(coords, periodic, period)
    k_max = int(math.floor(s + 1e-12))
    theta = s - k_max
    derivs = [u2]
    supplied = list(derivatives or [])
    for k in range(1, k_max + 1 + (theta > 1e-12)):
        if k - 1 < len(supplied):
            derivs.append(_as2d(np.asarray(supplied[k - 1], dtype=float)))
        else:
            derivs.append(_derivative(derivs[-1], coords, periodic, period))
    total = sum(_lp_pow(derivs[k], w, xw, p) for k in range(k_max + 1))
    if theta > 1e-12:
        total += _seminorm_pow(derivs[k_max], coords, theta, p, xw, periodic, period,
                               du=derivs[k_max + 1])
    return total


def space_norm(u: np.ndarray, dx: float, s: float, p: float, periodic: bool = True,
               coords: Optional[np.ndarray] = None) -> float:
    """``W^s_p`` norm of a one-dimensional slice.

    On the torus the nodes are ``k dx``; otherwise ``coords`` must be given.
    """
    u = np.asarray(u, dtype=float)
    if periodic:
        n = u.shape[0]
        coords = dx * np.arange(n)
        return sobolev_pow(u, coords, s, p, True, n * dx) ** (1 / p)
    if coords is None:
        raise ValueError("coords required on an interval")
    return sobolev_pow(u, coords, s, p) ** (1 / p)


# ----------------------------------------------------------------------------- field norms

def interface_space_pow(u: np.ndarray, grids: Grids, s: float, p: float) -> float:
    """``||u||^p`` in ``W^s_p`` over the torus for a field ``u(x)`` or ``u(..., x)`` (x last)."""
    u = np.moveaxis(np.asarray(u, dtype=float), -1, 0)
    return sobolev_pow(u, grids.x, s, p, True, grids.L_x)


def bulk_space_pow(u: tuple[np.ndarray, np.ndarray], grids: Grids, s: float, p: float) -> float:
    """``||u||^p`` in ``W^s_p`` over both half planes for slices ``u[side]`` of shape ``(N_x, N_y + 1)``."""
    wy = trapezoid_weights(grids.y)
    wx = np.full(grids.N_x, grids.dx)
    total = 0.0
    for side in u:
        side = np.asarray(side, dtype=float)
        total += sobolev_pow(side, grids.x, s, p, True, grids.L_x, value_weights=wy)
        total += sobolev_pow(side.T, grids.y, s, p, False, value_weights=wx)
        # the zeroth-order term is counted twice above
        total -= _lp_pow(side, wx, wy, p)
    return total


def _time_pow(u: np.ndarray, grids: Grids, s: float, p: float, xw: np.ndarray,
              derivatives: Optional[list] = None) -> float:
    return sobolev_pow(u, grids.t, s, p, False, value_weights=xw, derivatives=derivatives)


def _lp_time_of_space(u: np.ndarray, grids: Grids, s: float, p: float) -> float:
    """``int_J ||u(t)||^p_{W^s_p(torus)} dt``."""
    wt = trapezoid_weights(grids.t)
    return float(sum(wt[n] * interface_space_pow(u[n], grids, s, p) for n in range(u.shape[0])))


def _time_derivatives(u: np.ndarray, grids: Grids, du: Optional[np.ndarray], order: int) -> list:
    ders = []
    cur = u
    for k in range(order):
        if k == 0 and du is not None:
            cur = du
        else:
            cur = np.gradient(cur, grids.t, axis=0, edge_order=2)
        ders.append(cur)
    return ders


INTERFACE_TAGS = ("E2_00", "E2_10", "E2_01", "F2", "F3")


def anisotropic_norm(u, tag: str, params: PhysicalParams, grids: Grids,
                     du: Optional[np.ndarray] = None) -> float:
    """Intersection-space norm of a space-time field.

    Interface tags act on ``u(t, x)``; ``du`` may carry an accurate time
    derivative. ``E1`` acts on a pair of bulk fields ``u[side](t, x, y)``.
    """
    p = params.p
    if tag == "E1":
        return _e1_norm(u, grids, p)
    if tag not in INTERFACE_TAGS:
        raise ValueError(f"unknown norm tag {tag!r}")
    u = np.asarray(u, dtype=float)
    xw = np.full(grids.N_x, grids.dx)
    ders = _time_derivatives(u, grids, du, 3)
    inv = 1 / p
    if tag == "F2":
        parts = [_time_pow(u, grids, 1 - 0.5 * inv, p, xw, ders),
                 _lp_time_of_space(u, grids, 2 - inv, p)]
    elif tag == "F3":
        parts = [_time_pow(u, grids, 0.5 - 0.5 * inv, p, xw, ders),
                 _lp_time_of_space(u, grids, 1 - inv, p)]
    elif tag == "E2_00":
        parts = [_time_pow(u, grids, 1.5 - 0.5 * inv, p, xw, ders),
                 _lp_time_of_space(u, grids, 1 - inv, p) + _lp_time_of_space(ders[0], grids, 1 - inv, p),
                 _lp_time_of_space(u, grids, 2 - inv, p)]
    elif tag == "E2_10":
        parts = [_time_pow(u, grids, 2 - 0.5 * inv, p, xw, ders),
                 _lp_time_of_space(u, grids, 2 - inv, p) + _lp_time_of_space(ders[0], grids, 2 - inv, p)]
    else:  # E2_01
        u_xx = _spectral_xx(u, grids)
        parts = [_time_pow(u, grids, 1 - 0.5 * inv, p, xw, ders)
                 + _time_pow(u_xx, grids, 1 - 0.5 * inv, p, xw)
                 + _time_pow(_spectral_x(u, grids), grids, 1 - 0.5 * inv, p, xw),
                 _lp_time_of_space(u, grids, 4 - inv, p)]
    return float(sum(q ** inv for q in parts))


def _spectral_x(u, grids):
    return np.moveaxis(_derivative(np.moveaxis(u, -1, 0), grids.x, True, grids.L_x), 0, -1)


def _spectral_xx(u, grids):
    return _spectral_x(_spectral_x(u, grids), grids)


def _e1_norm(u, grids: Grids, p: float) -> float:
    """``W^1_p(J; L_p) ∩ L_p(J; W^2_p)`` over both half planes."""
    wt = trapezoid_weights(grids.t)
    wx = np.full(grids.N_x, grids.dx)
    wy = trapezoid_weights(grids.y)
    w3 = wt[:, None, None] * wx[None, :, None] * wy[None, None, :]
    time_part, space_part = 0.0, 0.0
    for side in u:
        side = np.asarray(side, dtype=float)
        dt_ = np.gradient(side, grids.t, axis=0, edge_order=2)
        time_part += np.sum(w3 * (np.abs(side) ** p + np.abs(dt_) ** p))
        ux = _spectral_x(np.moveaxis(side, 2, 1), grids)           # (t, y, x)
        uxx = _spectral_x(ux, grids)
        ux, uxx = np.moveaxis(ux, 1, 2), np.moveaxis(uxx, 1, 2)
        uy = np.gradient(side, grids.y, axis=2, edge_order=2)
        uyy = np.gradient(uy, grids.y, axis=2, edge_order=2)
        uxy = np.gradient(ux, grids.y, axis=2, edge_order=2)
        for d in (side, ux, uy, uxx, uxy, uyy):
            space_part += np.sum(w3 * np.abs(d) ** p)
    return float(time_part ** (1 / p) + space_part ** (1 / p))


# ----------------------------------------------------------------------------- reports

@dataclass
class NormReport:
    E1: float = 0.0
    E1_rhoE: float = 0.0
    E2_00: float = 0.0
    E2_10: float = 0.0
    E2_01: float = 0.0
    E2_param: float = 0.0
    F1: float = 0.0
    F2: float = 0.0
    F3: float = 0.0
    F4: float = 0.0
    F5: float = 0.0
    rho0_high: float = 0.0
    stefan_initial: float = 0.0
    data_00: float = 0.0
    rhs: float = 0.0
    solution: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def data_norm_report(data: DataTuple, params: PhysicalParams, grids: Grids) -> NormReport:
    """Data norms and the right-hand side of the uniform estimate."""
    p = params.p
    wt = trapezoid_weights(grids.t)
    wx = np.full(grids.N_x, grids.dx)
    wy = trapezoid_weights(grids.y)
    w3 = wt[:, None, None] * wx[None, :, None] * wy[None, None, :]
    F1 = float(sum(np.sum(w3 * np.abs(f) ** p) for f in data.f) ** (1 / p))
    F2 = anisotropic_norm(data.g, "F2", params, grids)
    F3 = anisotropic_norm(data.h, "F3", params, grids)
    F4 = bulk_space_pow(data.v0, grids, 2 - 2 / p, p) ** (1 / p)
    F5 = interface_space_pow(data.rho0, grids, 2 - 2 / p, p) ** (1 / p)
    rho0_high = interface_space_pow(data.rho0, grids, 4 - 3 / p, p) ** (1 / p)
    jv0 = jump_trace(data.v0, params, grids, derivative=data.derivative_traces(grids)).values
    stefan_initial = interface_space_pow(data.h[0] - jv0, grids, 2 - 6 / p, p) ** (1 / p)
    data_00 = F1 + F2 + F3 + F4 + F5
    rhs = data_00 + (params.delta + params.sigma) * rho0_high + params.sigma * stefan_initial
    return NormReport(F1=F1, F2=F2, F3=F3, F4=F4, F5=F5, rho0_high=rho0_high,
                      stefan_initial=stefan_initial, data_00=data_00, rhs=rhs)


def solution_norm_report(sol: SolutionTriple, params: PhysicalParams, grids: Grids,
                         report: Optional[NormReport] = None) -> NormReport:
    """``||(v, rho, rho_E)||`` in the parameter-dependent solution space."""
    rep = report if report is not None else NormReport()
    rep.E1 = anisotropic_norm(sol.v, "E1", params, grids)
    rep.E1_rhoE = anisotropic_norm(sol.rho_E, "E1", params, grids)
    rep.E2_00 = anisotropic_norm(sol.rho, "E2_00", params, grids, du=sol.drho)
    rep.E2_10 = anisotropic_norm(sol.rho, "E2_10", params, grids, du=sol.drho)
    rep.E2_01 = anisotropic_norm(sol.rho, "E2_01", params, grids, du=sol.drho)
    rep.E2_param = rep.E2_00 + params.delta * rep.E2_10 + params.sigma * rep.E2_01
    rep.solution = rep.E1 + rep.E2_param + rep.E1_rhoE
    return rep


def solution_norm(sol: SolutionTriple, delta: float, sigma: float, params: PhysicalParams,
                  grids: Grids) -> float:
    """Norm in the solution space with weights ``(delta, sigma)`` (independent of ``params``' own)."""
    p = params.with_params(delta, sigma)
    return solution_norm_report(sol, p, grids).solution

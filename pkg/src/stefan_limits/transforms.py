"""Tangential Fourier diagonalization and contour-quadrature Laplace inversion.

Two contour families are available:

* ``"talbot"``: the optimized modified Talbot contour of Weideman (2006),
  ``z(theta) = (N/t) (-0.6122 + 0.5017 theta cot(0.6407 theta) + 0.2645 i theta)``
  sampled by the midpoint rule on ``(-pi, pi)``;
* ``"bromwich"``: the hyperbolic deformation of the Bromwich line of Weideman and
  Trefethen (2007), ``z(u) = mu (1 + sin(i u - alpha))`` with the parameters
  optimized for a single target time and ``N_nodes + 1`` nodes.

Both converge geometrically for sectorial transforms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline


class ContourConvergenceError(RuntimeError):
    pass


# ----------------------------------------------------------------------------- Fourier

def forward_tangential(field: np.ndarray, n_x: int | None = None, axis: int = -1) -> np.ndarray:
    """Unitary discrete Fourier coefficients along ``axis``."""
    field = np.asarray(field)
    if n_x is not None and field.shape[axis] != n_x:
        raise ValueError(f"expected {n_x} tangential nodes, got {field.shape[axis]}")
    return np.fft.fft(field, axis=axis, norm="ortho")


def inverse_tangential(coeffs: np.ndarray, n_x: int | None = None, axis: int = -1,
                       real: bool = True) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    if n_x is not None and coeffs.shape[axis] != n_x:
        raise ValueError(f"expected {n_x} tangential modes, got {coeffs.shape[axis]}")
    out = np.fft.ifft(coeffs, axis=axis, norm="ortho")
    return out.real if real else out


# ----------------------------------------------------------------------------- contours

@dataclass(frozen=True)
class ContourSpec:
    kind: str = "talbot"
    N_nodes: int = 48
    scale: float = 1.0
    tol: float = 1e-7
    refine_max: int = 1

    def __post_init__(self):
        if self.kind not in ("talbot", "bromwich"):
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if self.N_nodes < 16:
            raise ValueError("N_nodes must be >= 16")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def doubled(self) -> "ContourSpec":
        return ContourSpec(self.kind, 2 * self.N_nodes, self.scale, self.tol, self.refine_max)


_TALBOT = (-0.6122, 0.5017, 0.6407, 0.2645)
_HYPERBOLA = (1.1721, 1.0818, 4.4921)


def contour_nodes(spec: ContourSpec, t) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``z`` and weights ``w`` with ``f(t) ~ sum_k w_k exp(z_k t) F(z_k)``.

    ``t`` may be an array; the returned arrays then have shape ``t.shape + (n,)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("inversion times must be positive")
    N = spec.N_nodes
    tt = t[..., None]
    if spec.kind == "talbot":
        s0, a, b, nu = _TALBOT
        theta = -np.pi + (np.arange(N) + 0.5) * 2 * np.pi / N
        bt = b * theta
        cot = np.cos(bt) / np.sin(bt)
        z = s0 + a * theta * cot + 1j * nu * theta
        dz = a * cot - a * b * theta / np.sin(bt) ** 2 + 1j * nu
        scale = spec.scale * N / tt
        return scale * z, scale * dz / (1j * N)
    alpha, hc, mc = _HYPERBOLA
    n = N // 2
    h = hc / n
    u = h * np.arange(-n, n + 1)
    mu = spec.scale * mc * n / tt
    z = mu * (1 + np.sin(1j * u - alpha))
    dz = mu * 1j * np.cos(1j * u - alpha)
    return z, dz * h / (2j * np.pi)


def _quadrature(F: Callable, t: np.ndarray, spec: ContourSpec, shift: float) -> np.ndarray:
    z, w = contour_nodes(spec, t)
    vals = np.asarray(F(z + shift))
    extra = vals.ndim - z.ndim
    ww = (w * np.exp(z * t[..., None]))[(...,) + (None,) * extra]
    return np.exp(shift * t)[(...,) + (None,) * extra] * np.sum(ww * vals, axis=z.ndim - 1)


def inverse_laplace(F: Callable, t, contour: ContourSpec = ContourSpec(), shift: float = 0.0,
                    check: bool = False):
    """Approximate the inverse Laplace transform of ``F`` at time(s) ``t``.

    ``F`` is evaluated on arrays of contour nodes and may append trailing axes
    (vector-valued transforms). The contour is translated by ``shift``; this is
    the same as inverting ``F(. + shift)`` and multiplying by ``exp(shift t)``.
    With ``check`` the node count is doubled up to ``contour.refine_max`` times
    and :class:`ContourConvergenceError` is raised when the last doubling moves
    the result by more than ``contour.tol`` (relative to ``max(1, |f|)``). The
    value at the requested node count is returned; the doublings only serve
    as an error estimate because roundoff grows with the node count.
    """
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    val = _quadrature(F, tt, contour, shift)
    if check:
        spec, prev = contour, val
        for _ in range(max(1, contour.refine_max)):
            spec = spec.doubled()
            new = _quadrature(F, tt, spec, shift)
            err = np.max(np.abs(new - prev) / np.maximum(1.0, np.abs(new)))
            prev = new
            if err <= contour.tol:
                break
        else:
            raise ContourConvergenceError(
                f"doubling to {spec.N_nodes} nodes changed the result by {err:.3e}")
    return val[0] if scalar else val


# ----------------------------------------------------------------------------- data transforms

def reflect_extension(series: np.ndarray, t_grid: np.ndarray):
    """Return a callable evaluating the reflected extension on ``[0, inf)``.

    The extension equals the cubic-spline interpolant ``u`` on ``[0, T]``,
    ``u(2T - t)`` on ``[T, 2T]`` and zero beyond ``2T``.
    """
    T = t_grid[-1]
    spline = CubicSpline(t_grid, series, axis=0)

    def ext(t):
        t = np.asarray(t, dtype=float)
        r = np.where(t <= T, t, 2 * T - t)
        out = spline(np.clip(r, 0.0, T))
        mask = (t < 0) | (t > 2 * T)
        if np.any(mask):
            out = np.where(mask.reshape(mask.shape + (1,) * (out.ndim - mask.ndim)), 0.0, out)
        return out

    return ext


def clenshaw_curtis(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Clenshaw-Curtis nodes and weights on ``[-1, 1]`` with ``n + 1`` points."""
    k = np.arange(n + 1)
    theta = np.pi * k / n
    x = np.cos(theta)
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    ii = np.arange(1, n)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n ** 2 - 1)
        for j in range(1, n // 2):
            v -= 2 * np.cos(2 * j * theta[ii]) / (4 * j ** 2 - 1)
        v -= np.cos(n * theta[ii]) / (n ** 2 - 1)
    else:
        w[0] = w[n] = 1.0 / n ** 2
        for j in range(1, (n - 1) // 2 + 1):
            v -= 2 * np.cos(2 * j * theta[ii]) / (4 * j ** 2 - 1)
    w[ii] = 2 * v / n
    return x, w


def laplace_of_data(series: np.ndarray, t_grid: np.ndarray, lam, kappa: float = 0.0,
                    zero_trace: bool = False, n_cc: int = 16) -> np.ndarray:
    """Laplace transform of the reflected, exponentially damped datum.

    Computes ``int_0^{2T} exp(-lambda t) exp(-kappa t) E u(t) dt`` for each
    node in ``lam`` by composite Clenshaw-Curtis quadrature over the cells of
    ``t_grid`` and their mirror images, so the reflection kink at ``T`` is a
    panel boundary. Trailing axes of ``series`` are carried through.
    """
    series = np.asarray(series)
    if zero_trace and np.max(np.abs(series[0])) > 1e-12:
        warnings.warn("series does not vanish at t=0 although a zero-trace transform was requested",
                      RuntimeWarning, stacklevel=2)
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    T = t_grid[-1]
    xs, ws = clenshaw_curtis(n_cc)
    a, b = t_grid[:-1], t_grid[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * xs[None, :]
    weights = half[:, None] * ws[None, :]
    nodes = np.concatenate([nodes, 2 * T - nodes]).ravel()
    weights = np.concatenate([weights, weights]).ravel()
    ext = reflect_extension(series, t_grid)
    vals = ext(nodes) * np.exp(-kappa * nodes).reshape((-1,) + (1,) * (series.ndim - 1))
    kern = np.exp(-np.outer(lam, nodes)) * weights[None, :]
    return np.tensordot(kern, vals, axes=(1, 0))


# ----------------------------------------------------------------------------- convolution

def _divide_by(vals: np.ndarray, mu: np.ndarray, power: int) -> np.ndarray:
    return vals / (mu ** power).reshape(mu.shape + (1,) * (vals.ndim - mu.ndim))


def convolve_response(H: Callable, data: np.ndarray, dt: float, contour: ContourSpec,
                      shift: float = 0.0) -> np.ndarray:
    """Time-domain response ``(L^{-1} H) * d`` for piecewise-linear data ``d``.

    ``data`` has shape ``(N_t + 1,) + data_shape`` on a uniform grid starting at
    0 and ``H(mu)`` returns an array of shape ``mu.shape + out_shape``; the two
    trailing shapes are broadcast against each other.

    The transfer function is never multiplied by a transform of the data.
    With ``K2 = L^{-1}[H / mu^2]`` and ``K1 = L^{-1}[H / mu]`` the exact
    convolution of the kernel with the hat-function interpolant of ``d`` is a
    discrete convolution whose weights are second differences of ``K2``.
    The value at ``t = 0`` is returned as zero, which is exact whenever ``H``
    decays at infinity or ``d(0) = 0``.
    """
    data = np.asarray(data)
    n = data.shape[0] - 1
    times = dt * np.arange(1, n + 1)
    K2 = inverse_laplace(lambda mu: _divide_by(np.asarray(H(mu)), mu, 2), times, contour, shift).real
    K2 = np.concatenate([np.zeros_like(K2[:1]), K2])
    W = np.empty_like(K2[:n])
    W[0] = K2[1] / dt
    W[1:] = (K2[2:] - 2 * K2[1:n] + K2[:n - 1]) / dt
    # row m: sum_{k=0}^{m-1} W_k d_{m-k}
    lead = np.broadcast_shapes(data.shape[1:], W.shape[1:])
    resp = np.zeros((n + 1,) + lead, dtype=np.result_type(data.dtype, np.float64))
    for m in range(1, n + 1):
        resp[m] = np.sum(W[:m] * data[m:0:-1], axis=0)
    if np.any(data[0] != 0):
        K1 = inverse_laplace(lambda mu: _divide_by(np.asarray(H(mu)), mu, 1), times, contour,
                             shift).real
        resp[1:] += (K1 - (K2[1:] - K2[:-1]) / dt) * data[0]
    return resp

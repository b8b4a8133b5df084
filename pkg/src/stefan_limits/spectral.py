"""Spectral solver built on the explicit Fourier-Laplace solution formulas.

Per tangential mode with ``z = |xi|^2`` and ``mu = lambda + kappa`` the
zero-trace system has the closed-form solution

* ``eta = (h - Phi+ - Phi- + W g) / m`` with ``Phi = int_0^inf exp(-omega s / sqrt(c)) f(s) ds``;
* ``gamma u = g - S eta``;
* ``u(s) = int_0^inf k(s, r) f(r) dr + exp(-omega s / sqrt(c)) gamma u`` on each side,
  ``k(s, r) = (exp(-beta|s - r|) - exp(-beta (s + r))) / (2 omega sqrt(c))``, ``beta = omega / sqrt(c)``;
* ``eta_E(s) = exp(-beta s) eta``.

The inversion back to time is done by convolving the data with the contour-
inverted kernels of these transfer functions (see
:func:`~stefan_limits.transforms.convolve_response`).

Nonzero initial values are removed first: an auxiliary heat problem absorbs
``v0``, an explicit extension matches ``rho(0)`` and ``d_t rho(0)``, and the
remainder is a zero-trace problem for the formulas above.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fd_oracle import active_modes, rfft_z, solve_half_line
from .model import (CompatibilityError, DataTuple, Grids, PhysicalParams, SolutionTriple,
                    compatibility_residual, fornberg_weights, stefan_initial_rate)
from .transforms import ContourSpec, convolve_response

log = logging.getLogger(__name__)


class ZeroTraceError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol_compat: float = 1e-10
    tol_zero_trace: float = 1e-8
    tol_residual: float = 1e-6
    y_truncation_tol: float = 1e-12
    trace_accuracy: int = 4
    n_sub: int = 1
    svd_rtol: float = 1e-13


# ----------------------------------------------------------------------------- kernels

def _phi_ab(x):
    """``A(x) = (x - 1 + e^-x) / x^2`` and ``B(x) = (1 - (1 + x) e^-x) / x^2``."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    em = np.exp(-xs)
    A = (xs - 1 + em) / xs ** 2
    B = (1 - (1 + xs) * em) / xs ** 2
    A_ser = 0.5 - x / 6 + x ** 2 / 24 - x ** 3 / 120
    B_ser = 0.5 - x / 3 + x ** 2 / 8 - x ** 3 / 30
    return np.where(small, A_ser, A), np.where(small, B_ser, B)


def kernel_integrals(beta: np.ndarray, y: np.ndarray, profile: np.ndarray):
    """Exact integrals of the piecewise-linear ``profile`` against the half-line kernels.

    Returns ``(Phi, U)`` with ``Phi = int_0^Y exp(-beta r) chi(r) dr`` of shape
    ``beta.shape`` and ``U[..., i] = int_0^Y (exp(-beta|y_i - r|) - exp(-beta (y_i + r))) chi(r) dr / 2``
    of shape ``beta.shape + (N_y + 1,)``; the missing ``1 / (omega sqrt(c))`` factor is applied by the caller.
    """
    beta = np.asarray(beta, dtype=complex)
    h = np.diff(y)
    n = y.size
    L = np.zeros(beta.shape + (n,), dtype=complex)
    R = np.zeros(beta.shape + (n,), dtype=complex)
    for i in range(1, n):
        bh = beta * h[i - 1]
        A, B = _phi_ab(bh)
        L[..., i] = np.exp(-bh) * L[..., i - 1] + h[i - 1] * (profile[i] * A + profile[i - 1] * B)
    for i in range(n - 2, -1, -1):
        bh = beta * h[i]
        A, B = _phi_ab(bh)
        R[..., i] = np.exp(-bh) * R[..., i + 1] + h[i] * (profile[i] * A + profile[i + 1] * B)
    Phi = R[..., 0]
    U = 0.5 * (L + R - np.exp(-beta[..., None] * y) * Phi[..., None])
    return Phi, U


@dataclass(frozen=True)
class KernelEval:
    """``k(y, s)`` for one side at given ``omega`` (used for checks and diagnostics)."""

    omega: complex
    c: float

    def __call__(self, y, s):
        beta = self.omega / np.sqrt(self.c)
        y, s = np.asarray(y), np.asarray(s)
        return (np.exp(-beta * np.abs(y - s)) - np.exp(-beta * (y + s))) / (2 * self.omega * np.sqrt(self.c))


# ----------------------------------------------------------------------------- zero-trace per mode

class _ModeTransfer:
    """Vector of transfer functions of one mode for a set of input channels.

    Output layout (last axis): ``rho, drho, dv+, dv-, drhoE+, drhoE-`` followed by
    ``v+`` (N_y+1), ``v-`` (N_y+1), ``rhoE+`` (N_y+1), ``rhoE-`` (N_y+1).
    Channels: ``h``, ``g``, then one per (side, rank) source profile.
    """

    def __init__(self, z: float, params: PhysicalParams, y: np.ndarray, profiles: list):
        self.z, self.params, self.y, self.profiles = z, params, y, profiles
        self.ny = y.size
        self.n_out = 6 + 4 * self.ny
        self.n_ch = 2 + len(profiles)

    def __call__(self, mu: np.ndarray) -> np.ndarray:
        p, z, y = self.params, self.z, self.y
        cp, cm = p.c
        ap, am = p.a
        sq = (np.sqrt(cp), np.sqrt(cm))
        om = (np.sqrt(mu + cp * z + 0j), np.sqrt(mu + cm * z + 0j))
        beta = (om[0] / sq[0], om[1] / sq[1])
        W = sq[0] * om[0] + sq[1] * om[1]
        S = p.sigma * z + p.delta * mu
        A = ap * sq[0] * om[0] + am * sq[1] * om[1]
        m = mu + S * W + A
        out = np.zeros(mu.shape + (self.n_ch, self.n_out), dtype=complex)
        ny = self.ny
        decay = (np.exp(-beta[0][..., None] * y), np.exp(-beta[1][..., None] * y))

        def fill(ch, eta, gu, Phi, U):
            # Phi, U: per side contributions of the source (zeros for h, g channels)
            o = out[..., ch, :]
            o[..., 0] = eta
            o[..., 1] = mu * eta
            for s_ in range(2):
                c = p.c[s_]
                o[..., 2 + s_] = (Phi[s_] - sq[s_] * om[s_] * gu) / c
                o[..., 4 + s_] = -beta[s_] * eta
                o[..., 6 + s_ * ny:6 + (s_ + 1) * ny] = U[s_] + decay[s_] * gu[..., None]
                o[..., 6 + (2 + s_) * ny:6 + (3 + s_) * ny] = decay[s_] * eta[..., None]

        zero = np.zeros(mu.shape, dtype=complex)
        zero_u = (0.0, 0.0)
        eta = 1 / m
        fill(0, eta, -S * eta, (zero, zero), zero_u)
        eta = W / m
        fill(1, eta, 1 - S * eta, (zero, zero), zero_u)
        for ch, (side, prof) in enumerate(self.profiles, start=2):
            Phi_s, U_s = kernel_integrals(beta[side], y, prof)
            U_s = U_s / (om[side] * sq[side])[..., None]
            Phi = [zero, zero]
            U = [0.0, 0.0]
            Phi[side], U[side] = Phi_s, U_s
            eta = -Phi_s / m
            fill(ch, eta, -S * eta, Phi, U)
        return out


def _low_rank(f: np.ndarray, rtol: float):
    """Exact-up-to-``rtol`` separation ``f(t, s) = sum_r a_r(t) b_r(s)``."""
    if not np.any(f):
        return []
    U, s, Vh = np.linalg.svd(f, full_matrices=False)
    keep = s > rtol * s[0]
    return [(U[:, r] * s[r], Vh[r]) for r in np.nonzero(keep)[0]]


@dataclass
class ModeResponse:
    rho: np.ndarray
    drho: np.ndarray
    dv: tuple[np.ndarray, np.ndarray]
    drhoE: tuple[np.ndarray, np.ndarray]
    v: tuple[np.ndarray, np.ndarray]
    rho_E: tuple[np.ndarray, np.ndarray]


def zero_trace_mode(f_hat, g_hat, h_hat, z: float, params: PhysicalParams, grids: Grids,
                    contour: ContourSpec, svd_rtol: float = 1e-13) -> ModeResponse:
    """Zero-trace response of one tangential mode on the time grid."""
    y, t = grids.y, grids.t
    channels = []
    series = [h_hat, g_hat]
    for side in range(2):
        for a, b in _low_rank(f_hat[side], svd_rtol):
            channels.append((side, b))
            series.append(a)
    H = _ModeTransfer(z, params, y, channels)
    data = np.stack(series, axis=1)[:, :, None]
    resp = convolve_response(H, data, grids.dt, contour, shift=params.kappa).sum(axis=1)
    ny = y.size
    return ModeResponse(rho=resp[:, 0], drho=resp[:, 1], dv=(resp[:, 2], resp[:, 3]),
                        drhoE=(resp[:, 4], resp[:, 5]),
                        v=(resp[:, 6:6 + ny], resp[:, 6 + ny:6 + 2 * ny]),
                        rho_E=(resp[:, 6 + 2 * ny:6 + 3 * ny], resp[:, 6 + 3 * ny:6 + 4 * ny]))


def _irfft(a, n, axis):
    return np.fft.irfft(a, n=n, axis=axis)


def truncation_factor(params: PhysicalParams, grids: Grids) -> float:
    """``exp(-sqrt(kappa) Y_max / sqrt(c))`` for the slower side."""
    c = max(params.c_plus, params.c_minus)
    return float(np.exp(-np.sqrt(params.kappa) * grids.Y_max / np.sqrt(c)))


def solve_zero_trace(data: DataTuple, params: PhysicalParams, grids: Grids,
                     contour: ContourSpec = ContourSpec(),
                     config: SolverConfig = SolverConfig()) -> SolutionTriple:
    """Solve the system with ``v0 = 0``, ``rho0 = 0``, ``g(0) = 0``, ``h(0) = 0``."""
    scale = max(1.0, np.max(np.abs(data.g)), np.max(np.abs(data.h)))
    tol = config.tol_zero_trace * scale
    if (np.max(np.abs(data.g[0])) > tol or np.max(np.abs(data.h[0])) > tol
            or np.any(data.rho0 != 0) or any(np.any(a != 0) for a in data.v0)):
        raise ZeroTraceError("zero-trace solve requires v0 = rho0 = 0 and g(0) = h(0) = 0")
    tf = truncation_factor(params, grids)
    if tf > config.y_truncation_tol:
        log.info("normal-grid truncation factor %.2e exceeds %.1e", tf, config.y_truncation_tol)
    g = data.g.copy()
    h = data.h.copy()
    g[0] = 0.0
    h[0] = 0.0
    idx, hat = active_modes(DataTuple(f=data.f, g=g, h=h, v0=data.v0, rho0=data.rho0))
    zs = rfft_z(grids)
    nt, ny, nk, n = grids.t.size, grids.y.size, grids.N_x // 2 + 1, grids.N_x
    acc = {key: np.zeros((nt, nk), complex) for key in ("rho", "drho", "dvp", "dvm", "dep", "dem")}
    bulk = {key: np.zeros((nt, nk, ny), complex) for key in ("vp", "vm", "ep", "em")}
    for k in idx:
        r = zero_trace_mode((hat["f"][0][:, k], hat["f"][1][:, k]), hat["g"][:, k], hat["h"][:, k],
                            float(zs[k]), params, grids, contour, config.svd_rtol)
        acc["rho"][:, k], acc["drho"][:, k] = r.rho, r.drho
        acc["dvp"][:, k], acc["dvm"][:, k] = r.dv
        acc["dep"][:, k], acc["dem"][:, k] = r.drhoE
        bulk["vp"][:, k], bulk["vm"][:, k] = r.v
        bulk["ep"][:, k], bulk["em"][:, k] = r.rho_E
    a = {key: _irfft(val, n, 1) for key, val in acc.items()}
    b = {key: _irfft(val, n, 1) for key, val in bulk.items()}
    return SolutionTriple(v=(b["vp"], b["vm"]), rho=a["rho"], rho_E=(b["ep"], b["em"]),
                          drho=a["drho"], dv=(a["dvp"], a["dvm"]), drhoE=(a["dep"], a["dem"]))


# ----------------------------------------------------------------------------- reduction

def _tangential(field_: np.ndarray, grids: Grids, symbol) -> np.ndarray:
    z = rfft_z(grids)
    return np.fft.irfft(np.fft.rfft(field_, axis=-1) * symbol(z), n=grids.N_x, axis=-1)


def extension_factors(t: np.ndarray, z: np.ndarray):
    """Per-mode factors ``A(t)``, ``B(t)`` and their time derivatives.

    ``rho1 = A rho0 + B eta1`` with ``a = 1 + z``, ``b = sqrt(a)``,
    ``A = (2 e^{-bt} - e^{-2bt})(2 e^{-at} - e^{-2at})`` and
    ``B = e^{-at} (e^{-a^2 t} - e^{-2 a^2 t}) / a^2``.
    """
    t = np.asarray(t, dtype=float)[:, None]
    a = 1.0 + np.asarray(z, dtype=float)[None, :]
    b = np.sqrt(a)
    p, dp = 2 * np.exp(-b * t) - np.exp(-2 * b * t), -2 * b * (np.exp(-b * t) - np.exp(-2 * b * t))
    q, dq = 2 * np.exp(-a * t) - np.exp(-2 * a * t), -2 * a * (np.exp(-a * t) - np.exp(-2 * a * t))
    A, dA = p * q, dp * q + p * dq
    r = -np.expm1(-a ** 2 * t) * np.exp(-a ** 2 * t)   # e^{-a^2 t} - e^{-2 a^2 t}
    dr = -a ** 2 * np.exp(-a ** 2 * t) + 2 * a ** 2 * np.exp(-2 * a ** 2 * t)
    ea = np.exp(-a * t)
    B = ea * r / a ** 2
    dB = (-a * ea * r + ea * dr) / a ** 2
    return A, dA, B, dB


def extend_traces(rho0: np.ndarray, eta1: np.ndarray, params: PhysicalParams, grids: Grids,
                  regime: Optional[str] = None) -> tuple[np.ndarray, np.ndarray]:
    """Interface field with prescribed ``rho1(0) = rho0`` and ``d_t rho1(0) = eta1``.

    One combined formula serves every ``(delta, sigma)`` regime; ``regime`` is
    accepted for bookkeeping only. Returns ``(rho1, d_t rho1)`` on ``(t, x)``.
    """
    z = rfft_z(grids)
    A, dA, B, dB = extension_factors(grids.t, z)
    r0, e1 = np.fft.rfft(rho0), np.fft.rfft(eta1)
    n = grids.N_x
    rho1 = np.fft.irfft(A * r0 + B * e1, n=n, axis=1)
    drho1 = np.fft.irfft(dA * r0 + dB * e1, n=n, axis=1)
    return rho1, drho1


def _corrected_trace(w: np.ndarray, d0: np.ndarray, y: np.ndarray, accuracy: int) -> np.ndarray:
    """``d/ds`` trace: exact value ``d0`` at ``t = 0`` plus a one-sided difference of the increment."""
    wts = fornberg_weights(0.0, y[:accuracy + 1], 1)
    inc = w[..., :accuracy + 1] - w[:1, ..., :accuracy + 1]
    return d0[None] + inc @ wts


def solve_auxiliary_v1(data: DataTuple, zeta: np.ndarray, params: PhysicalParams, grids: Grids,
                       config: SolverConfig = SolverConfig()):
    """Two decoupled half-line heat problems absorbing ``v0`` and ``f``.

    Dirichlet values ``g + exp(-(1 - Delta_x) t) zeta``. Returns the bulk pair
    and its derivative traces (distance convention).
    """
    z = rfft_z(grids)
    n = grids.N_x
    bnd = np.fft.rfft(data.g, axis=1) + np.exp(-np.outer(grids.t, 1 + z)) * np.fft.rfft(zeta)[None]
    dv0 = data.derivative_traces(grids)
    out, traces = [], []
    for side, c in enumerate(params.c):
        fh = np.fft.rfft(data.f[side], axis=1)
        v0h = np.fft.rfft(data.v0[side], axis=0)
        w = np.zeros((grids.t.size, z.size, grids.y.size), complex)
        for k in range(z.size):
            if not (np.any(fh[:, k]) or np.any(v0h[k]) or np.any(bnd[:, k])):
                continue
            w[:, k] = solve_half_line(v0h[k], bnd[:, k], fh[:, k], grids.y, grids.t, c,
                                      float(z[k]), config.n_sub)
        field_ = np.fft.irfft(w, n=n, axis=1)
        out.append(field_)
        traces.append(_corrected_trace(field_, dv0[side], grids.y, config.trace_accuracy))
    return tuple(out), tuple(traces)


def solve_rho_E(rho: np.ndarray, rho0: np.ndarray, params: PhysicalParams, grids: Grids,
                config: SolverConfig = SolverConfig()):
    """Extension fields with Dirichlet value ``rho`` and initial ``exp(-|y|(1 - Delta_x)^{1/2}) rho0``.

    Returns the bulk pair and its derivative traces (distance convention).
    """
    z = rfft_z(grids)
    b = np.sqrt(1 + z)
    n = grids.N_x
    rh = np.fft.rfft(rho, axis=1)
    r0 = np.fft.rfft(rho0)
    init = np.exp(-np.outer(b, grids.y)) * r0[:, None]
    d0 = np.fft.irfft(-b * r0, n=n)
    out, traces = [], []
    for c in params.c:
        w = np.zeros((grids.t.size, z.size, grids.y.size), complex)
        for k in range(z.size):
            if not (np.any(rh[:, k]) or r0[k] != 0):
                continue
            w[:, k] = solve_half_line(init[k], rh[:, k], None, grids.y, grids.t, c, float(z[k]),
                                      config.n_sub)
            w[0, k] = init[k]
        field_ = np.fft.irfft(w, n=n, axis=1)
        out.append(field_)
        traces.append(_corrected_trace(field_, d0, grids.y, config.trace_accuracy))
    return tuple(out), tuple(traces)


@dataclass
class ReductionBundle:
    zeta: np.ndarray
    v1: tuple[np.ndarray, np.ndarray]
    rho1: np.ndarray
    drho1: np.ndarray
    rho1_E: tuple[np.ndarray, np.ndarray]
    reduced_g: np.ndarray
    reduced_h: np.ndarray
    q0: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def solve_full(data: DataTuple, params: PhysicalParams, grids: Grids,
               contour: ContourSpec = ContourSpec(),
               config: SolverConfig = SolverConfig()) -> tuple[SolutionTriple, ReductionBundle]:
    """Fully inhomogeneous solve: reduction to zero traces plus the spectral zero-trace solve."""
    res = compatibility_residual(data, params, grids)
    scale = max(1.0, float(np.max(np.abs(data.g[0]))))
    if np.max(np.abs(res)) > config.tol_compat * scale:
        raise CompatibilityError(f"compatibility residual {np.max(np.abs(res)):.3e} exceeds tolerance")
    zeta = data.v0[0][:, 0] - data.g[0]
    q0 = stefan_initial_rate(data, params, grids)
    (v1p, v1m), (dv1p, dv1m) = solve_auxiliary_v1(data, zeta, params, grids, config)
    rho1, drho1 = extend_traces(data.rho0, q0, params, grids)
    (e1p, e1m), (de1p, de1m) = solve_rho_E(rho1, data.rho0, params, grids, config)
    z = rfft_z(grids)
    ap, am = params.a
    cp, cm = params.c
    lap_rho1 = _tangential(rho1, grids, lambda zz: -zz)
    zeta_t = np.fft.irfft(np.exp(-np.outer(grids.t, 1 + z)) * np.fft.rfft(zeta)[None], n=grids.N_x, axis=1)
    g_red = params.sigma * lap_rho1 - params.delta * drho1 - zeta_t
    jump = cp * (dv1p - ap * de1p) + cm * (dv1m - am * de1m)
    h_red = data.h - drho1 - jump
    zero_bulk = np.zeros_like(data.f[0])
    zero_init = np.zeros_like(data.v0[0])
    red = DataTuple(f=(zero_bulk, zero_bulk), g=g_red, h=h_red, v0=(zero_init, zero_init),
                    rho0=np.zeros_like(data.rho0))
    sol2 = solve_zero_trace(red, params, grids, contour, config)
    sol1 = SolutionTriple(v=(v1p, v1m), rho=rho1, rho_E=(e1p, e1m), drho=drho1,
                          dv=(dv1p, dv1m), drhoE=(de1p, de1m))
    bundle = ReductionBundle(zeta=zeta, v1=(v1p, v1m), rho1=rho1, drho1=drho1, rho1_E=(e1p, e1m),
                             reduced_g=g_red, reduced_h=h_red, q0=q0,
                             diagnostics={"compat_residual": float(np.max(np.abs(res))),
                                          "reduced_g0": float(np.max(np.abs(g_red[0]))),
                                          "reduced_h0": float(np.max(np.abs(h_red[0]))),
                                          "truncation_factor": truncation_factor(params, grids)})
    return sol1 + sol2, bundle


# ----------------------------------------------------------------------------- residuals

def lts_residuals(sol: SolutionTriple, data: DataTuple, params: PhysicalParams, grids: Grids) -> dict:
    """Max-norm residuals of the two interface equations and of the extension trace."""
    if sol.dv is None or sol.drhoE is None:
        raise ValueError("solution carries no derivative traces")
    lap = _tangential(sol.rho, grids, lambda zz: -zz)
    ap, am = params.a
    cp, cm = params.c
    iface = max(float(np.max(np.abs(sol.v[s][..., 0] - params.sigma * lap
                                    + params.delta * sol.drho - data.g))) for s in range(2))
    jump = cp * (sol.dv[0] - ap * sol.drhoE[0]) + cm * (sol.dv[1] - am * sol.drhoE[1])
    stefan = float(np.max(np.abs(sol.drho + jump - data.h)))
    trace = max(float(np.max(np.abs(sol.rho_E[s][..., 0] - sol.rho))) for s in range(2))
    initial = float(np.max(np.abs(sol.rho[0] - data.rho0)))
    return {"interface": iface, "stefan": stefan, "extension_trace": trace, "initial_rho": initial}

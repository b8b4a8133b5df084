"""Per-mode method-of-lines integrators on the graded normal grid.

Two integrators live here:

* :class:`HalfLineHeat`, a Crank-Nicolson solver for
  ``w_t = c (w_ss - z w) + f`` on ``0 < s < Y_max`` with Dirichlet data at
  ``s = 0`` and zero at ``s = Y_max``. The spectral solver reuses it for the
  auxiliary problems with nonzero initial values.
* :class:`ModeIntegrator`, an independent trapezoidal solver for the full
  coupled two-phase mode system (bulk fields, interface height, extension
  fields) whose boundary/Stefan coupling is solved monolithically as one
  bordered sparse system per step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import (DataTuple, Grids, PhysicalParams, SolutionTriple, fornberg_weights)

log = logging.getLogger(__name__)


class IntegratorError(RuntimeError):
    pass


def graded_second_difference(y: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Three-point ``d^2/ds^2`` on the interior nodes of a nonuniform grid.

    Returns ``(D, b)`` where ``D`` acts on interior values ``w[1:-1]`` and
    ``b`` is the column multiplying the boundary value ``w[0]`` (the value at
    ``Y_max`` is taken to be zero).
    """
    h = np.diff(y)
    hl, hr = h[:-1], h[1:]
    lower = 2 / (hl * (hl + hr))
    diag = -2 / (hl * hr)
    upper = 2 / (hr * (hl + hr))
    n = y.size - 2
    D = sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], shape=(n, n), format="csr")
    b = np.zeros(n)
    b[0] = lower[0]
    return D, b


def _solve(lu, rhs: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(rhs):
        return lu.solve(np.ascontiguousarray(rhs.real)) + 1j * lu.solve(np.ascontiguousarray(rhs.imag))
    return lu.solve(rhs)


def _substep_data(d0, d1, k, n_sub):
    a = k / n_sub
    return (1 - a) * d0 + a * d1


class HalfLineHeat:
    """Crank-Nicolson stepping for one tangential mode on one half-line."""

    def __init__(self, y: np.ndarray, c: float, z: float, dt: float):
        self.y, self.c, self.z, self.dt = y, c, z, dt
        D, b = graded_second_difference(y)
        n = D.shape[0]
        self.A = c * D - c * z * sp.identity(n, format="csr")
        self.bcol = c * b
        self.lu = splu((sp.identity(n, format="csc") - 0.5 * dt * self.A).tocsc())

    def step(self, w: np.ndarray, b0, b1, f0, f1) -> np.ndarray:
        rhs = w + 0.5 * self.dt * (self.A @ w + self.bcol * (b0 + b1) + f0 + f1)
        return _solve(self.lu, rhs)


def solve_half_line(w0: np.ndarray, boundary: np.ndarray, source: Optional[np.ndarray],
                    y: np.ndarray, t: np.ndarray, c: float, z: float, n_sub: int = 1) -> np.ndarray:
    """Integrate one mode on one half-line; returns ``w`` of shape ``(N_t + 1, N_y + 1)``.

    ``w0`` is the initial profile on ``y`` (its first entry is replaced by the
    boundary value at ``t = 0``), ``boundary`` the Dirichlet values on ``t``,
    ``source`` the forcing on ``(t, y)`` or ``None``.
    """
    dt = (t[1] - t[0]) / n_sub
    solver = HalfLineHeat(y, c, z, dt)
    dtype = np.result_type(w0, boundary, source if source is not None else 0.0)
    out = np.zeros((t.size, y.size), dtype=dtype)
    w = np.asarray(w0, dtype=dtype)[1:-1].copy()
    out[0, 1:-1] = w
    out[:, 0] = boundary
    zero = np.zeros_like(w)
    for n in range(t.size - 1):
        for k in range(n_sub):
            b0 = _substep_data(boundary[n], boundary[n + 1], k, n_sub)
            b1 = _substep_data(boundary[n], boundary[n + 1], k + 1, n_sub)
            if source is None:
                f0 = f1 = zero
            else:
                f0 = _substep_data(source[n, 1:-1], source[n + 1, 1:-1], k, n_sub)
                f1 = _substep_data(source[n, 1:-1], source[n + 1, 1:-1], k + 1, n_sub)
            w = solver.step(w, b0, b1, f0, f1)
        if not np.all(np.isfinite(w)):
            raise IntegratorError(f"half-line integration blew up at step {n} (z={z})")
        out[n + 1, 1:-1] = w
    return out


# ----------------------------------------------------------------------------- coupled DAE

@dataclass
class ModeSystemState:
    v_hat_plus: np.ndarray
    v_hat_minus: np.ndarray
    rho_hat: complex
    rhoE_hat_plus: np.ndarray
    rhoE_hat_minus: np.ndarray


@dataclass
class ModeSlices:
    """Per-mode data: ``f`` on (t, y) per side, ``g`` and ``h`` on t, initial values."""

    f: tuple[np.ndarray, np.ndarray]
    g: np.ndarray
    h: np.ndarray
    v0: tuple[np.ndarray, np.ndarray]
    rho0: complex


@dataclass
class ModeSolution:
    v: tuple[np.ndarray, np.ndarray]
    rho: np.ndarray
    drho: np.ndarray
    rho_E: tuple[np.ndarray, np.ndarray]
    residuals: dict = field(default_factory=dict)


class ModeIntegrator:
    """Trapezoidal integrator for one tangential mode of the coupled system.

    Unknowns per step: interior values of ``v+``, ``v-``, ``rho_E+``,
    ``rho_E-``, the interface height ``rho`` and the traces ``gamma v+-``.
    Differential rows are discretized by the trapezoidal rule; the boundary
    relation ``gamma v = g - sigma z rho - delta (h - J)`` with
    ``J = [[c d_y (v - a rho_E)]]`` is imposed at the new time level, which
    eliminates ``d_t rho`` through the Stefan row. The linear system is
    assembled once and LU-factorized.
    """

    def __init__(self, y: np.ndarray, z: float, params: PhysicalParams, dt: float):
        self.y, self.z, self.params, self.dt = y, z, params, dt
        n = y.size - 2
        self.n = n
        D, b = graded_second_difference(y)
        I = sp.identity(n, format="csr")
        cp, cm = params.c_plus, params.c_minus
        ap, am = params.a
        self.Lp = cp * D - cp * z * I
        self.Lm = cm * D - cm * z * I
        self.bp, self.bm = cp * b, cm * b
        d = fornberg_weights(0.0, y[:3], 1)
        self.d = d
        # slices into the state vector
        self.s_vp, self.s_vm = slice(0, n), slice(n, 2 * n)
        self.s_ep, self.s_em = slice(2 * n, 3 * n), slice(3 * n, 4 * n)
        self.i_rho, self.i_gp, self.i_gm = 4 * n, 4 * n + 1, 4 * n + 2
        self.size = 4 * n + 3
        # linear map X -> J (jump of c d_s (v - a rho_E), distance convention)
        Jrow = np.zeros(self.size)
        for (sv, se, ig, c, a) in ((self.s_vp, self.s_ep, self.i_gp, cp, ap),
                                   (self.s_vm, self.s_em, self.i_gm, cm, am)):
            Jrow[ig] += c * d[0]
            Jrow[sv.start] += c * d[1]
            Jrow[sv.start + 1] += c * d[2]
            Jrow[self.i_rho] -= c * a * d[0]
            Jrow[se.start] -= c * a * d[1]
            Jrow[se.start + 1] -= c * a * d[2]
        self.Jrow = Jrow
        # differential operator: dX_d/dt = A X + forcing
        A = sp.lil_matrix((self.size, self.size))
        A[self.s_vp, self.s_vp] = self.Lp
        A[self.s_vm, self.s_vm] = self.Lm
        A[self.s_ep, self.s_ep] = self.Lp
        A[self.s_em, self.s_em] = self.Lm
        A[self.s_vp, self.i_gp] = self.bp[:, None]
        A[self.s_vm, self.i_gm] = self.bm[:, None]
        A[self.s_ep, self.i_rho] = self.bp[:, None]
        A[self.s_em, self.i_rho] = self.bm[:, None]
        A[self.i_rho, :] = -Jrow[None, :]
        self.A = A.tocsr()
        # algebraic rows: gamma v + sigma z rho - delta J = g - delta h
        G = sp.lil_matrix((2, self.size))
        for r, ig in enumerate((self.i_gp, self.i_gm)):
            G[r, :] = -params.delta * Jrow[None, :]
            G[r, ig] += 1.0
            G[r, self.i_rho] += params.sigma * z
        self.G = G.tocsr()
        ndiff = 4 * n + 1
        Ad = self.A[:ndiff]
        Id = sp.eye(ndiff, self.size, format="csr")
        M = sp.vstack([Id - 0.5 * dt * Ad, self.G]).tocsc()
        self.lu = splu(M)
        self.ndiff = ndiff

    # -- state conversion ------------------------------------------------------------
    def pack(self, st: ModeSystemState) -> np.ndarray:
        X = np.zeros(self.size, dtype=complex)
        X[self.s_vp] = st.v_hat_plus[1:-1]
        X[self.s_vm] = st.v_hat_minus[1:-1]
        X[self.s_ep] = st.rhoE_hat_plus[1:-1]
        X[self.s_em] = st.rhoE_hat_minus[1:-1]
        X[self.i_rho] = st.rho_hat
        X[self.i_gp] = st.v_hat_plus[0]
        X[self.i_gm] = st.v_hat_minus[0]
        return X

    def unpack(self, X: np.ndarray) -> ModeSystemState:
        def full(trace, interior):
            return np.concatenate([[trace], interior, [0.0]])
        rho = X[self.i_rho]
        return ModeSystemState(v_hat_plus=full(X[self.i_gp], X[self.s_vp]),
                               v_hat_minus=full(X[self.i_gm], X[self.s_vm]),
                               rho_hat=rho,
                               rhoE_hat_plus=full(rho, X[self.s_ep]),
                               rhoE_hat_minus=full(rho, X[self.s_em]))

    def forcing(self, f: tuple[np.ndarray, np.ndarray], h) -> np.ndarray:
        F = np.zeros(self.ndiff, dtype=complex)
        F[self.s_vp] = f[0][1:-1]
        F[self.s_vm] = f[1][1:-1]
        F[self.i_rho] = h
        return F

    def jump(self, X: np.ndarray):
        return self.Jrow @ X

    def step(self, X: np.ndarray, forcing0: np.ndarray, forcing1: np.ndarray,
             g1, h1) -> np.ndarray:
        rhs = np.empty(self.size, dtype=complex)
        rhs[:self.ndiff] = X[:self.ndiff] + 0.5 * self.dt * (
            (self.A @ X)[:self.ndiff] + forcing0 + forcing1)
        rhs[self.ndiff:] = g1 - self.params.delta * h1
        return _solve(self.lu, rhs)


def initial_mode_state(v0: tuple[np.ndarray, np.ndarray], rho0: complex, y: np.ndarray,
                       z: float) -> ModeSystemState:
    b = np.sqrt(1.0 + z)
    ext = np.exp(-b * y) * rho0
    ext[-1] = 0.0
    vp, vm = np.array(v0[0], dtype=complex), np.array(v0[1], dtype=complex)
    vp[-1] = vm[-1] = 0.0
    return ModeSystemState(vp, vm, complex(rho0), ext.copy(), ext.copy())


def step_mode(state: ModeSystemState, z: float, data_n: dict, data_np1: dict,
              params: PhysicalParams, dt: float, y: np.ndarray) -> ModeSystemState:
    """Advance one trapezoidal step.

    ``data_n`` and ``data_np1`` hold the mode slices ``f`` (pair of profiles on
    ``y``), ``g`` and ``h`` at the old and new time levels.
    """
    integ = ModeIntegrator(y, z, params, dt)
    X = integ.pack(state)
    X1 = integ.step(X, integ.forcing(data_n["f"], data_n["h"]),
                    integ.forcing(data_np1["f"], data_np1["h"]), data_np1["g"], data_np1["h"])
    if not np.all(np.isfinite(X1)):
        raise IntegratorError("non-finite state after step")
    return integ.unpack(X1)


def integrate_mode(slices: ModeSlices, z: float, params: PhysicalParams, y: np.ndarray,
                   t: np.ndarray, n_sub: int = 1, blowup: float = 1e12) -> ModeSolution:
    """Integrate the coupled mode system over ``t`` with ``n_sub`` substeps per interval."""
    dt = (t[1] - t[0]) / n_sub
    integ = ModeIntegrator(y, z, params, dt)
    X = integ.pack(initial_mode_state(slices.v0, slices.rho0, y, z))
    nt = t.size
    ny = y.size
    out_v = (np.zeros((nt, ny), complex), np.zeros((nt, ny), complex))
    out_e = (np.zeros((nt, ny), complex), np.zeros((nt, ny), complex))
    rho = np.zeros(nt, complex)
    drho = np.zeros(nt, complex)

    def record(n, X):
        st = integ.unpack(X)
        out_v[0][n], out_v[1][n] = st.v_hat_plus, st.v_hat_minus
        out_e[0][n], out_e[1][n] = st.rhoE_hat_plus, st.rhoE_hat_minus
        rho[n] = st.rho_hat

    record(0, X)
    scale = 1.0 + max(np.max(np.abs(slices.g)), np.max(np.abs(slices.h)),
                      max(np.max(np.abs(a)) for a in slices.f), abs(slices.rho0),
                      max(np.max(np.abs(a)) for a in slices.v0))
    drho[0] = slices.h[0] - integ.jump(X)
    res_initial = float(np.max(np.abs(
        np.array([X[integ.i_gp], X[integ.i_gm]]) + params.sigma * z * X[integ.i_rho]
        + params.delta * drho[0] - slices.g[0])))
    res_interface = 0.0
    res_stefan = 0.0
    for n in range(nt - 1):
        for k in range(n_sub):
            a0, a1 = k / n_sub, (k + 1) / n_sub
            f0 = tuple(_substep_data(s[n], s[n + 1], k, n_sub) for s in slices.f)
            f1 = tuple(_substep_data(s[n], s[n + 1], k + 1, n_sub) for s in slices.f)
            h0 = (1 - a0) * slices.h[n] + a0 * slices.h[n + 1]
            h1 = (1 - a1) * slices.h[n] + a1 * slices.h[n + 1]
            g1 = (1 - a1) * slices.g[n] + a1 * slices.g[n + 1]
            Xn = X
            X = integ.step(X, integ.forcing(f0, h0), integ.forcing(f1, h1), g1, h1)
            stefan = (X[integ.i_rho] - Xn[integ.i_rho]) / dt - 0.5 * (
                h0 - integ.jump(Xn) + h1 - integ.jump(X))
            res_stefan = max(res_stefan, abs(stefan))
        if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > blowup * scale:
            raise IntegratorError(f"residual blow-up at step {n + 1} (z={z})")
        record(n + 1, X)
        drho[n + 1] = slices.h[n + 1] - integ.jump(X)
        res_interface = max(res_interface, np.max(np.abs(
            np.array([X[integ.i_gp], X[integ.i_gm]]) + params.sigma * z * X[integ.i_rho]
            + params.delta * drho[n + 1] - slices.g[n + 1])))
    residuals = {"interface": float(res_interface), "stefan": float(res_stefan),
                 "initial_interface": res_initial}
    return ModeSolution(v=out_v, rho=rho, drho=drho, rho_E=out_e, residuals=residuals)


# ----------------------------------------------------------------------------- full field

def active_modes(data: DataTuple, rtol: float = 1e-14) -> tuple[np.ndarray, dict]:
    """Real-FFT mode indices that carry data, and the transformed data."""
    hat = {
        "f": tuple(np.fft.rfft(a, axis=1) for a in data.f),
        "g": np.fft.rfft(data.g, axis=1),
        "h": np.fft.rfft(data.h, axis=1),
        "v0": tuple(np.fft.rfft(a, axis=0) for a in data.v0),
        "rho0": np.fft.rfft(data.rho0),
    }
    mags = (np.max(np.abs(hat["f"][0]), axis=(0, 2)) + np.max(np.abs(hat["f"][1]), axis=(0, 2))
            + np.max(np.abs(hat["g"]), axis=0) + np.max(np.abs(hat["h"]), axis=0)
            + np.max(np.abs(hat["v0"][0]), axis=1) + np.max(np.abs(hat["v0"][1]), axis=1)
            + np.abs(hat["rho0"]))
    ref = mags.max() if mags.size else 0.0
    idx = np.nonzero(mags > rtol * ref)[0] if ref > 0 else np.array([], dtype=int)
    return idx, hat


def rfft_z(grids: Grids) -> np.ndarray:
    k = np.arange(grids.N_x // 2 + 1)
    return (2 * np.pi * k / grids.L_x) ** 2


@dataclass
class FDResult:
    solution: SolutionTriple
    residuals: dict


def fd_solve(data: DataTuple, params: PhysicalParams, grids: Grids, n_sub: int = 1) -> FDResult:
    """Full-field FD solve: transform, integrate each active mode, transform back."""
    idx, hat = active_modes(data)
    zs = rfft_z(grids)
    nt, ny, nk = grids.t.size, grids.y.size, grids.N_x // 2 + 1
    v = [np.zeros((nt, nk, ny), complex) for _ in range(2)]
    e = [np.zeros((nt, nk, ny), complex) for _ in range(2)]
    rho = np.zeros((nt, nk), complex)
    drho = np.zeros((nt, nk), complex)
    residuals = {}
    for k in idx:
        sl = ModeSlices(f=(hat["f"][0][:, k], hat["f"][1][:, k]), g=hat["g"][:, k],
                        h=hat["h"][:, k], v0=(hat["v0"][0][k], hat["v0"][1][k]),
                        rho0=hat["rho0"][k])
        sol = integrate_mode(sl, float(zs[k]), params, grids.y, grids.t, n_sub)
        for s in range(2):
            v[s][:, k] = sol.v[s]
            e[s][:, k] = sol.rho_E[s]
        rho[:, k] = sol.rho
        drho[:, k] = sol.drho
        residuals[int(k)] = sol.residuals
    n = grids.N_x

    def back(a, axis):
        return np.fft.irfft(a, n=n, axis=axis)

    triple = SolutionTriple(v=(back(v[0], 1), back(v[1], 1)), rho=back(rho, 1),
                            rho_E=(back(e[0], 1), back(e[1], 1)), drho=back(drho, 1))
    return FDResult(triple, residuals)

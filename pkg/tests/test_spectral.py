import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from conftest import rel_l2
from stefan_limits.fd_oracle import fd_solve, graded_second_difference, rfft_z
from stefan_limits.model import (CompatibilityError, DataTuple, PhysicalParams, combine,
                                 make_compatible_data, make_grids, seed_family)
from stefan_limits.spectral import (KernelEval, SolverConfig, ZeroTraceError, extend_traces,
                                    extension_factors, kernel_integrals, lts_residuals,
                                    solve_auxiliary_v1, solve_full, solve_rho_E, solve_zero_trace)
from stefan_limits.transforms import ContourSpec


# ----------------------------------------------------------------------------- kernels

def test_kernel_symmetry_and_boundary():
    k = KernelEval(omega=2.0 + 1.0j, c=1.7)
    y, s = np.meshgrid(np.linspace(0, 3, 7), np.linspace(0, 3, 7))
    np.testing.assert_allclose(k(y, s), k(s, y), atol=1e-15)
    np.testing.assert_array_equal(k(0.0, s), 0.0)


@pytest.mark.parametrize("beta", [0.3, 2.0 + 1.0j, 1e-5, 40.0])
def test_kernel_integrals_against_quadrature(beta):
    y = make_grids(Y_max=4.0, N_y=24, grading_ratio=1.1).y
    prof = np.exp(-(y - 1) ** 2) * np.sin(3 * y)
    chi = lambda r: np.interp(r, y, prof)
    Phi, U = kernel_integrals(np.array(beta), y, prof)

    def cquad(fun, **kw):
        re = quad(lambda r: np.real(fun(r)), 0, y[-1], limit=400, points=y[1:-1], **kw)[0]
        im = quad(lambda r: np.imag(fun(r)), 0, y[-1], limit=400, points=y[1:-1], **kw)[0]
        return re + 1j * im

    assert Phi == pytest.approx(cquad(lambda r: np.exp(-beta * r) * chi(r)), abs=1e-10)
    for i in (0, 5, 17):
        ref = cquad(lambda r: 0.5 * (np.exp(-beta * abs(y[i] - r)) - np.exp(-beta * (y[i] + r))) * chi(r))
        assert U[i] == pytest.approx(ref, abs=1e-10)


# ----------------------------------------------------------------------------- zero-trace solve

def test_zero_data_zero_solution(grids):
    sol = solve_zero_trace(DataTuple.zeros(grids), PhysicalParams(delta=0.5), grids)
    assert not np.any(sol.rho) and not np.any(sol.v[0]) and not np.any(sol.rho_E[1])


def test_zero_trace_violation_rejected(grids):
    bad = seed_family("two_mode", grids)
    with pytest.raises(ZeroTraceError):
        solve_zero_trace(bad, PhysicalParams(), grids)
    z = DataTuple.zeros(grids)
    h = z.h + 1.0
    with pytest.raises(ZeroTraceError):
        solve_zero_trace(DataTuple(f=z.f, g=z.g, h=h, v0=z.v0, rho0=z.rho0), PhysicalParams(), grids)


def test_single_mode_matches_fd(grids, fine_grids):
    p = PhysicalParams()
    sol = solve_zero_trace(seed_family("single_mode", grids), p, grids)
    fd = fd_solve(seed_family("single_mode", fine_grids), p, fine_grids).solution
    assert rel_l2(sol.rho, fd.rho[::4]) <= 1e-3


@pytest.mark.parametrize("delta, sigma", [(0, 0), (1, 0), (0, 1), (0.5, 0.5)])
def test_single_mode_residuals(grids, delta, sigma):
    p = PhysicalParams(delta=delta, sigma=sigma)
    data = seed_family("single_mode", grids)
    res = lts_residuals(solve_zero_trace(data, p, grids), data, p, grids)
    assert max(res.values()) <= 1e-6, res


def test_zero_trace_linearity(grids):
    p = PhysicalParams(delta=0.3, sigma=0.6)
    a, b = seed_family("zero_trace", grids), seed_family("single_mode", grids)
    lhs = solve_zero_trace(combine(((1.5, a), (-2.0, b))), p, grids)
    rhs = solve_zero_trace(a, p, grids).scaled(1.5) - solve_zero_trace(b, p, grids).scaled(2.0)
    np.testing.assert_allclose(lhs.rho, rhs.rho, atol=1e-10)
    np.testing.assert_allclose(lhs.v[1], rhs.v[1], atol=1e-10)


def test_symmetric_data_gives_even_solution(grids):
    p = PhysicalParams(c_plus=1.3, c_minus=1.3, delta=0.4, sigma=0.2)
    zt = seed_family("zero_trace", grids)
    data = DataTuple(f=(zt.f[0], zt.f[0]), g=zt.g, h=zt.h, v0=zt.v0, rho0=zt.rho0, dv0=zt.dv0)
    sol = solve_zero_trace(data, p, grids)
    np.testing.assert_allclose(sol.v[0], sol.v[1], atol=1e-13)


def test_bromwich_contour_agrees(grids):
    p = PhysicalParams(delta=0.5, sigma=0.5)
    data = seed_family("zero_trace", grids)
    a = solve_zero_trace(data, p, grids, ContourSpec("talbot"))
    b = solve_zero_trace(data, p, grids, ContourSpec("bromwich"))
    np.testing.assert_allclose(a.rho, b.rho, atol=1e-9)


# ----------------------------------------------------------------------------- trace extension

def test_extension_without_rate(grids):
    rho0 = np.cos(grids.x) + 0.3 * np.cos(3 * grids.x)
    rho1, drho1 = extend_traces(rho0, np.zeros(grids.N_x), PhysicalParams(), grids)
    np.testing.assert_allclose(rho1[0], rho0, atol=1e-14)
    np.testing.assert_allclose(drho1[0], 0.0, atol=1e-14)


def test_extension_without_initial_value(grids):
    eta1 = np.sin(2 * grids.x) - 0.5
    rho1, drho1 = extend_traces(np.zeros(grids.N_x), eta1, PhysicalParams(), grids)
    np.testing.assert_allclose(rho1[0], 0.0, atol=1e-14)
    np.testing.assert_allclose(drho1[0], eta1, atol=1e-12)


def test_extension_factors_extended_precision():
    mp.mp.dps = 40
    t, z = 0.5, 1.0
    A, dA, B, dB = (v[0, 0] for v in extension_factors(np.array([t]), np.array([z])))
    a = mp.mpf(1) + z
    b = mp.sqrt(a)
    T = mp.mpf(t)
    Aref = (2 * mp.exp(-b * T) - mp.exp(-2 * b * T)) * (2 * mp.exp(-a * T) - mp.exp(-2 * a * T))
    Bref = mp.exp(-a * T) * (mp.exp(-a ** 2 * T) - mp.exp(-2 * a ** 2 * T)) / a ** 2
    dAref = mp.diff(lambda s: (2 * mp.exp(-b * s) - mp.exp(-2 * b * s)) * (2 * mp.exp(-a * s) - mp.exp(-2 * a * s)), T)
    dBref = mp.diff(lambda s: mp.exp(-a * s) * (mp.exp(-a ** 2 * s) - mp.exp(-2 * a ** 2 * s)) / a ** 2, T)
    # single mode rho0 = eta1 = 1 at xi = 1
    assert A + B == pytest.approx(float(Aref + Bref), abs=1e-14)
    assert dA + dB == pytest.approx(float(dAref + dBref), abs=1e-13)


def test_extension_traces_per_mode(grids):
    """(rho1(0), d_t rho1(0)) equal (rho0, eta1) on every mode to 1e-12."""
    rng = np.random.default_rng(3)
    rho0, eta1 = rng.normal(size=grids.N_x), rng.normal(size=grids.N_x)
    rho1, drho1 = extend_traces(rho0, eta1, PhysicalParams(), grids)
    np.testing.assert_allclose(np.fft.rfft(rho1[0]), np.fft.rfft(rho0), atol=1e-12)
    np.testing.assert_allclose(np.fft.rfft(drho1[0]), np.fft.rfft(eta1), atol=1e-12)


# ----------------------------------------------------------------------------- auxiliary problems

def test_auxiliary_zero(grids):
    (vp, vm), _ = solve_auxiliary_v1(DataTuple.zeros(grids), np.zeros(grids.N_x), PhysicalParams(), grids)
    assert not np.any(vp) and not np.any(vm)


def test_auxiliary_gaussian_heat_kernel():
    g = make_grids(Y_max=8.0, N_y=160, grading_ratio=1.02, T=0.1, N_t=80)
    z = DataTuple.zeros(g)
    v0 = np.tile(np.exp(-g.y ** 2), (g.N_x, 1))
    data = DataTuple(f=z.f, g=np.ones_like(z.g), h=z.h, v0=(v0, v0), rho0=z.rho0,
                     dv0=(np.zeros(g.N_x), np.zeros(g.N_x)))
    (vp, vm), _ = solve_auxiliary_v1(data, np.zeros(g.N_x), PhysicalParams(), g)
    tt = g.t[-1]

    def exact(yv):
        k = lambda s: (np.exp(-(yv - s) ** 2 / (4 * tt)) - np.exp(-(yv + s) ** 2 / (4 * tt))) \
            / np.sqrt(4 * np.pi * tt)
        return 1 + quad(lambda s: k(s) * (np.exp(-s ** 2) - 1), 0, 30, limit=200, points=[yv])[0]

    ys = np.arange(0, g.y.size, 10)
    np.testing.assert_allclose(vp[-1, 0, ys], [exact(g.y[i]) for i in ys], atol=1e-4)


def test_auxiliary_boundary_identity(grids):
    p = PhysicalParams(delta=0.5, sigma=0.5)
    data = make_compatible_data(p, grids, seed_family("two_mode", grids))
    zeta = data.v0[0][:, 0] - data.g[0]
    (vp, vm), _ = solve_auxiliary_v1(data, zeta, p, grids)
    z = rfft_z(grids)
    bnd = data.g + np.fft.irfft(np.exp(-np.outer(grids.t, 1 + z)) * np.fft.rfft(zeta)[None],
                                n=grids.N_x, axis=1)
    np.testing.assert_allclose(vp[..., 0], bnd, atol=1e-13)
    np.testing.assert_allclose(vm[..., 0], bnd, atol=1e-13)


def test_rho_E_zero_and_initial_slice(grids):
    zero = np.zeros((grids.t.size, grids.N_x))
    (ep, em), _ = solve_rho_E(zero, np.zeros(grids.N_x), PhysicalParams(), grids)
    assert not np.any(ep) and not np.any(em)
    rho0 = np.cos(2 * grids.x)
    rho = np.tile(rho0, (grids.t.size, 1))
    (ep, em), _ = solve_rho_E(rho, rho0, PhysicalParams(), grids)
    np.testing.assert_allclose(ep[0], np.outer(rho0, np.exp(-np.sqrt(5.0) * grids.y)), atol=1e-12)


def test_rho_E_steady_state():
    g = make_grids(Y_max=10.0, N_y=64, grading_ratio=1.05, T=30.0, N_t=600)
    rho0 = np.cos(g.x)
    rho = np.tile(rho0, (g.t.size, 1))
    (ep, _), _ = solve_rho_E(rho, rho0, PhysicalParams(c_plus=0.8), g)
    D, b = graded_second_difference(g.y)
    n = g.y.size - 2
    from scipy.sparse import identity
    from scipy.sparse.linalg import spsolve
    w = spsolve((D - 1.0 * identity(n)).tocsc(), -b)   # z = 1, boundary value 1
    steady = np.concatenate([[1.0], w, [0.0]])
    np.testing.assert_allclose(ep[-1, 0], steady, atol=1e-8)
    assert np.max(np.abs(steady - np.exp(-g.y))) < 5e-3


# ----------------------------------------------------------------------------- full solve

def test_full_zero(grids):
    p = PhysicalParams(delta=0.5, sigma=0.5)
    data = make_compatible_data(p, grids, seed_family("zero", grids))
    sol, _ = solve_full(data, p, grids)
    assert np.max(np.abs(sol.rho)) == 0 and np.max(np.abs(sol.v[0])) == 0


def test_full_rejects_incompatible(grids):
    p = PhysicalParams(sigma=1.0)
    data = make_compatible_data(p, grids, seed_family("two_mode", grids))
    with pytest.raises(CompatibilityError):
        solve_full(data, PhysicalParams(sigma=0.5), grids)


@pytest.mark.parametrize("delta, sigma", [(0, 0), (0.5, 0), (0, 0.5), (1, 1)])
def test_full_reduction_and_fd(grids, fine_grids, delta, sigma):
    p = PhysicalParams(delta=delta, sigma=sigma)
    data = make_compatible_data(p, grids, seed_family("two_mode", grids))
    sol, bundle = solve_full(data, p, grids)
    assert bundle.diagnostics["reduced_g0"] <= 1e-8
    assert bundle.diagnostics["reduced_h0"] <= 1e-8
    np.testing.assert_allclose(bundle.rho1[0], data.rho0, atol=1e-14)
    np.testing.assert_allclose(bundle.drho1[0], bundle.q0, atol=1e-12)
    res = lts_residuals(sol, data, p, grids)
    assert max(res.values()) <= 1e-6, res
    fd_data = make_compatible_data(p, fine_grids, seed_family("two_mode", fine_grids))
    fd = fd_solve(fd_data, p, fine_grids).solution
    assert rel_l2(sol.rho, fd.rho[::4]) <= 5e-3
    assert rel_l2(sol.v[0], fd.v[0][::4, :, ::2]) <= 5e-3
    assert rel_l2(sol.rho_E[1], fd.rho_E[1][::4, :, ::2]) <= 5e-3

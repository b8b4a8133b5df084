import numpy as np
import pytest

from stefan_limits.fd_oracle import (IntegratorError, ModeSlices, graded_second_difference,
                                     initial_mode_state, integrate_mode, solve_half_line, step_mode)
from stefan_limits.model import DataTuple, PhysicalParams, make_grids, seed_family
from stefan_limits.fd_oracle import fd_solve


def manufactured(params, z, n_y, n_t, ratio=1.08, Y=20.0, T=0.5):
    """Manufactured solution per mode: v = cos(2t) psi(s), rho from the extension ansatz.

    With ``c+ = c-`` the extension ``exp(ct - b s)`` solves the extension heat
    equation exactly, so ``rho = exp(ct)``; otherwise ``rho = 0``.
    """
    g = make_grids(Y_max=Y, N_y=n_y, grading_ratio=ratio, T=T, N_t=n_t)
    y, t = g.y, g.t
    cp, cm = params.c
    ap, am = params.a
    b = np.sqrt(1 + z)
    T_, S = np.meshgrid(t, y, indexing="ij")
    phi, dphi = np.cos(2 * T_), -2 * np.sin(2 * T_)
    psi_p, psi_m = (1 + S) * np.exp(-S ** 2), np.exp(-2 * S ** 2) * (1 - S)
    dpsi_p = np.exp(-S ** 2) * (1 - 2 * S * (1 + S))
    dpsi_m = np.exp(-2 * S ** 2) * (-1 - 4 * S * (1 - S))
    d2p = np.exp(-S ** 2) * (-2 * S * (1 - 2 * S * (1 + S)) - 2 - 4 * S)
    d2m = np.exp(-2 * S ** 2) * (-4 * S * (-1 - 4 * S * (1 - S)) - 4 + 8 * S)
    vp, vm = phi * psi_p, phi * psi_m
    fp = dphi * psi_p - cp * (phi * d2p - z * vp)
    fm = dphi * psi_m - cm * (phi * d2m - z * vm)
    if cp == cm:
        rho = np.exp(cp * t)
        ext = np.exp(cp * T_ - b * S)
        de0 = -b * rho
    else:
        rho, ext, de0 = 0 * t, 0 * T_, 0 * t
    J = cp * (phi[:, 0] * dpsi_p[:, 0] - ap * de0) + cm * (phi[:, 0] * dpsi_m[:, 0] - am * de0)
    drho = cp * rho if cp == cm else 0 * t
    h = drho + J
    gg = phi[:, 0] + params.sigma * z * rho + params.delta * drho
    sl = ModeSlices(f=(fp, fm), g=gg, h=h, v0=(vp[0], vm[0]), rho0=rho[0])
    sol = integrate_mode(sl, z, params, y, t)
    return (np.max(np.abs(sol.rho - rho)),
            max(np.max(np.abs(sol.v[0] - vp)), np.max(np.abs(sol.v[1] - vm))),
            np.max(np.abs(sol.rho_E[0] - ext)), sol.residuals)


MMS_CASES = [
    PhysicalParams(),
    PhysicalParams(delta=0.5, sigma=0.3, a_plus=lambda d, s: 2.0),
    PhysicalParams(c_plus=3.0, c_minus=0.5, delta=1.0, sigma=1.0),
    PhysicalParams(c_plus=2.0, sigma=1.0),
]


@pytest.mark.parametrize("params", MMS_CASES)
def test_manufactured_solution_second_order(params):
    # levels 2..4 (N_y = 128..512); coarser levels are pre-asymptotic for rho when c+ != c-
    errs = [manufactured(params, 1.0, 32 * 2 ** k, 16 * 2 ** k, ratio=1.08 ** (1 / 2 ** k))
            for k in (2, 3, 4)]
    for comp in range(3):
        e = [er[comp] for er in errs]
        if e[0] < 1e-13:
            continue
        rates = [e[k] / e[k + 1] for k in range(2)]
        assert min(rates) > 2.8 and rates[-1] > 3.4, (comp, e)
    assert errs[-1][3]["interface"] < 1e-12


def test_zero_data_zero_state():
    g = make_grids(N_y=16, N_t=8)
    zt = np.zeros((g.t.size, g.y.size))
    sl = ModeSlices(f=(zt, zt), g=np.zeros(g.t.size), h=np.zeros(g.t.size),
                    v0=(np.zeros(g.y.size), np.zeros(g.y.size)), rho0=0.0)
    sol = integrate_mode(sl, 1.0, PhysicalParams(delta=0.5, sigma=0.5), g.y, g.t)
    assert np.all(sol.rho == 0) and np.all(sol.v[0] == 0) and np.all(sol.rho_E[1] == 0)
    st = initial_mode_state(sl.v0, 0.0, g.y, 1.0)
    nxt = step_mode(st, 1.0, {"f": (zt[0], zt[0]), "g": 0.0, "h": 0.0},
                    {"f": (zt[0], zt[0]), "g": 0.0, "h": 0.0}, PhysicalParams(), g.dt, g.y)
    assert nxt.rho_hat == 0 and not np.any(nxt.v_hat_plus)


def test_boundary_row_without_interface_terms():
    """delta = sigma = 0: the boundary value of v equals g at every node."""
    g = make_grids(N_y=32, N_t=32)
    zt = np.zeros((g.t.size, g.y.size))
    gg = np.sin(g.t)
    sl = ModeSlices(f=(zt, zt), g=gg, h=np.cos(g.t), v0=(np.zeros(g.y.size), np.zeros(g.y.size)),
                    rho0=0.0)
    sol = integrate_mode(sl, 2.0, PhysicalParams(), g.y, g.t)
    np.testing.assert_allclose(sol.v[0][:, 0], gg, atol=1e-14)
    np.testing.assert_allclose(sol.v[1][:, 0], gg, atol=1e-14)


def test_kinetic_boundary_residual_every_step():
    g = make_grids(N_y=32, N_t=32)
    zt = np.zeros((g.t.size, g.y.size))
    sl = ModeSlices(f=(zt, zt), g=np.sin(g.t), h=np.cos(g.t) - 1,
                    v0=(np.zeros(g.y.size), np.zeros(g.y.size)), rho0=0.0)
    p = PhysicalParams(delta=0.7, sigma=0.2)
    sol = integrate_mode(sl, 1.0, p, g.y, g.t)
    lhs = sol.v[0][:, 0] + p.sigma * 1.0 * sol.rho + p.delta * sol.drho - sl.g
    assert np.max(np.abs(lhs)) < 1e-12
    assert sol.residuals["stefan"] < 1e-12


def test_integrator_linearity(grids):
    p = PhysicalParams(delta=0.5, sigma=0.5)
    a, b = seed_family("zero_trace", grids), seed_family("single_mode", grids)
    from stefan_limits.model import combine
    s_ab = fd_solve(combine(((2.0, a), (-0.5, b))), p, grids).solution
    s_a, s_b = fd_solve(a, p, grids).solution, fd_solve(b, p, grids).solution
    np.testing.assert_allclose(s_ab.rho, 2 * s_a.rho - 0.5 * s_b.rho, atol=1e-12)
    np.testing.assert_allclose(s_ab.v[0], 2 * s_a.v[0] - 0.5 * s_b.v[0], atol=1e-12)


def test_blowup_aborts():
    g = make_grids(N_y=16, N_t=8)
    zt = np.zeros((g.t.size, g.y.size))
    sl = ModeSlices(f=(zt, zt), g=np.zeros(g.t.size), h=np.ones(g.t.size),
                    v0=(np.zeros(g.y.size), np.zeros(g.y.size)), rho0=0.0)
    with pytest.raises(IntegratorError):
        integrate_mode(sl, 1.0, PhysicalParams(), g.y, g.t, blowup=1e-6)


def test_graded_laplacian_exact_on_quadratics():
    y = make_grids(N_y=20, grading_ratio=1.1, Y_max=3.0).y
    D, bcol = graded_second_difference(y)
    u = (3.0 - y) * (y + 1)   # vanishes at Y_max, second derivative -2
    np.testing.assert_allclose(D @ u[1:-1] + bcol * u[0], -2.0, atol=1e-9)


def test_half_line_heat_gaussian():
    """xi = 0, boundary frozen at v0(0): compare with the Dirichlet heat-kernel solution."""
    from scipy.integrate import quad
    g = make_grids(Y_max=8.0, N_y=160, grading_ratio=1.02, T=0.1, N_t=80)
    w = solve_half_line(np.exp(-g.y ** 2), np.ones(g.t.size), None, g.y, g.t, 1.0, 0.0)
    # v = 1 + u with u solving the homogeneous Dirichlet problem from exp(-y^2) - 1
    tt = g.t[-1]
    ys = g.y[::10]

    def u(yv):
        k = lambda s: (np.exp(-(yv - s) ** 2 / (4 * tt)) - np.exp(-(yv + s) ** 2 / (4 * tt))) \
            / np.sqrt(4 * np.pi * tt)
        return quad(lambda s: k(s) * (np.exp(-s ** 2) - 1), 0, 30, limit=200, points=[yv])[0]

    ref = 1 + np.array([u(yv) for yv in ys])
    np.testing.assert_allclose(w[-1, ::10].real, ref, atol=1e-4)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from stefan_limits.model import (DataTuple, PhysicalParams, SolutionTriple, make_compatible_data,
                                 make_grids, seed_family)
from stefan_limits.norms import (NormReport, NormSpec, anisotropic_norm, data_norm_report,
                                 slobodeckij_seminorm, sobolev_pow, solution_norm,
                                 solution_norm_report, space_norm)

GRID = make_grids(N_x=8, Y_max=6.0, N_y=24, grading_ratio=1.1, T=1.0, N_t=16)


# ----------------------------------------------------------------------------- seminorm

@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("domain", ["interval", "torus"])
def test_constant_has_zero_seminorm(s, domain):
    x = np.linspace(0, 2 * np.pi, 33)[:-1] if domain == "torus" else np.linspace(0, 1, 33) ** 2
    val = slobodeckij_seminorm(np.full(x.size, 3.7), x, NormSpec(s, 4, domain=domain),
                               period=2 * np.pi if domain == "torus" else None)
    assert val == 0.0


def test_order_range_checked():
    x = np.linspace(0, 1, 8)
    with pytest.raises(ValueError):
        slobodeckij_seminorm(x, x, NormSpec(1.0))
    with pytest.raises(ValueError):
        NormSpec(-0.5)
    with pytest.raises(ValueError):
        slobodeckij_seminorm(x, x, NormSpec(0.5, domain="torus"))


def _gaussian_seminorm_oracle(L):
    """Exact ``[e^{-x^2}]^2`` in ``W^{1/2}_2(-L, L)``.

    On the line the value is ``int |xi| |u^(xi)|^2 dxi = 2 pi``; the interval
    loses the pairs with one point outside, where ``u`` is negligible.
    """
    lost = quad(lambda y: np.exp(-2 * y ** 2) * (1 / (L - y) + 1 / (L + y)), -L, L)[0]
    return np.sqrt(2 * np.pi - 2 * lost)


def test_gaussian_seminorm_refinement_and_oracle():
    L = 6.0
    vals = []
    for n in (201, 401, 801):
        x = np.linspace(-L, L, n)
        vals.append(slobodeckij_seminorm(np.exp(-x ** 2), x, NormSpec(0.5, 2)))
    assert abs(vals[1] - vals[2]) / vals[2] < 0.01
    assert abs(vals[0] - vals[1]) > abs(vals[1] - vals[2])
    assert vals[2] == pytest.approx(_gaussian_seminorm_oracle(L), rel=0.01)


def _random_field(seed, n=24):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 1, n))
    x[0], x[-1] = 0.0, 1.0
    return x, rng.normal(size=(n, 3))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(-10, 10), st.floats(0.05, 0.95),
       st.sampled_from([2.0, 4.0, 6.0]))
def test_seminorm_homogeneity_and_triangle(seed, alpha, s, p):
    x, U = _random_field(seed)
    rng = np.random.default_rng(seed + 1)
    V = rng.normal(size=U.shape)
    spec = NormSpec(s, p)
    w = np.array([0.2, 1.0, 0.5])
    nu = slobodeckij_seminorm(U, x, spec, w)
    nv = slobodeckij_seminorm(V, x, spec, w)
    assert slobodeckij_seminorm(alpha * U, x, spec, w) == pytest.approx(abs(alpha) * nu, rel=1e-10, abs=1e-12)
    assert slobodeckij_seminorm(U + V, x, spec, w) <= nu + nv + 1e-10


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(-10, 10), st.floats(0.1, 2.9))
def test_space_norm_homogeneity_and_triangle_torus(seed, alpha, s):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=16), rng.normal(size=16)
    dx = 2 * np.pi / 16
    nu, nv = space_norm(u, dx, s, 4.0), space_norm(v, dx, s, 4.0)
    assert space_norm(alpha * u, dx, s, 4.0) == pytest.approx(abs(alpha) * nu, rel=1e-10, abs=1e-12)
    assert space_norm(u + v, dx, s, 4.0) <= nu + nv + 1e-10


# ----------------------------------------------------------------------------- space norms

def test_space_norm_zero_and_integer_order():
    dx = 2 * np.pi / 32
    x = dx * np.arange(32)
    assert space_norm(np.zeros(32), dx, 1.5, 4.0) == 0.0
    u = np.sin(x)
    expected = (np.sum(np.abs(u) ** 4 + np.abs(np.cos(x)) ** 4 + np.abs(u) ** 4) * dx) ** 0.25
    assert space_norm(u, dx, 2.0, 4.0) == pytest.approx(expected, rel=1e-12)


def test_space_norm_single_mode_richardson():
    """W^{1.5}_4 of cos x on the torus: grid value within 2% of the extrapolated limit."""
    vals = []
    for n in (32, 64, 128):
        dx = 2 * np.pi / n
        vals.append(space_norm(np.cos(dx * np.arange(n)), dx, 1.5, 4.0))
    # increments shrink geometrically; Aitken extrapolation of the last three values
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    limit = vals[2] - d2 ** 2 / (d2 - d1) if d2 != d1 else vals[2]
    assert abs(vals[0] - limit) / limit < 0.02
    assert abs(d2) < abs(d1)


def test_interval_requires_coords():
    with pytest.raises(ValueError):
        space_norm(np.ones(4), 0.1, 0.5, 4.0, periodic=False)


# ----------------------------------------------------------------------------- field norms

TAGS = ("E2_00", "E2_10", "E2_01", "F2", "F3")


@pytest.mark.parametrize("tag", TAGS + ("E1",))
def test_zero_field_every_tag(tag):
    p = PhysicalParams()
    if tag == "E1":
        u = (np.zeros((17, 8, 25)), np.zeros((17, 8, 25)))
    else:
        u = np.zeros((17, 8))
    assert anisotropic_norm(u, tag, p, GRID) == 0.0


def test_unknown_tag():
    with pytest.raises(ValueError):
        anisotropic_norm(np.zeros((17, 8)), "E7", PhysicalParams(), GRID)


def test_interface_norm_homogeneity_and_triangle():
    rng = np.random.default_rng(7)
    T_, X = np.meshgrid(GRID.t, GRID.x, indexing="ij")
    for tag in TAGS:
        for _ in range(3):
            a = rng.normal(size=3)
            u = a[0] * np.sin(2 * T_) * np.cos(X) + a[1] * T_ ** 2 * np.sin(2 * X)
            v = a[2] * np.cos(T_) * np.cos(3 * X)
            nu = anisotropic_norm(u, tag, PhysicalParams(), GRID)
            nv = anisotropic_norm(v, tag, PhysicalParams(), GRID)
            assert anisotropic_norm(-2.5 * u, tag, PhysicalParams(), GRID) == pytest.approx(2.5 * nu, rel=1e-10)
            assert anisotropic_norm(u + v, tag, PhysicalParams(), GRID) <= nu + nv + 1e-10


def test_e1_separable_refinement():
    """E1 of phi(t) psi(x, y): coarse value within 3% of the extrapolated reference."""
    vals = []
    for k in range(3):
        g = make_grids(N_x=8, Y_max=6.0, N_y=24 * 2 ** k, grading_ratio=1.1 ** (1 / 2 ** k),
                       T=1.0, N_t=16 * 2 ** k)
        T_, X, Y = np.meshgrid(g.t, g.x, g.y, indexing="ij")
        u = np.cos(T_) * np.cos(X) * np.exp(-Y ** 2)
        vals.append(anisotropic_norm((u, u), "E1", PhysicalParams(), g))
    ref = vals[2] + (vals[2] - vals[1]) / 3      # second-order Richardson
    assert abs(vals[0] - ref) / ref < 0.03
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])


# ----------------------------------------------------------------------------- reports

def test_zero_data_report(grids):
    rep = data_norm_report(DataTuple.zeros(grids), PhysicalParams(delta=0.5, sigma=0.5), grids)
    assert rep.rhs == 0 and rep.data_00 == 0 and rep.F1 == 0


def test_data_report_scaling(grids):
    p = PhysicalParams(delta=0.3, sigma=0.7)
    d = make_compatible_data(p, grids, seed_family("two_mode", grids))
    r1, r2 = data_norm_report(d, p, grids), data_norm_report(d.scaled(2.0), p, grids)
    for key in ("F1", "F2", "F3", "F4", "F5", "rho0_high", "stefan_initial", "rhs"):
        assert getattr(r2, key) == pytest.approx(2 * getattr(r1, key), rel=1e-12)


def test_rhs_tends_to_origin_value(grids):
    d = seed_family("two_mode", grids)
    base = data_norm_report(make_compatible_data(PhysicalParams(), grids, d), PhysicalParams(), grids)
    ratios = []
    for e in (0.1, 0.01, 0.001):
        p = PhysicalParams(delta=e, sigma=e)
        ratios.append(data_norm_report(make_compatible_data(p, grids, d), p, grids).rhs / base.rhs)
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1) and abs(ratios[-1] - 1) < 0.01


def test_e2_param_identity_and_json(grids):
    from stefan_limits.spectral import solve_full
    p = PhysicalParams(delta=0.4, sigma=0.9)
    d = make_compatible_data(p, grids, seed_family("two_mode", grids))
    sol, _ = solve_full(d, p, grids)
    rep = solution_norm_report(sol, p, grids)
    assert rep.E2_param == rep.E2_00 + p.delta * rep.E2_10 + p.sigma * rep.E2_01
    assert rep.solution == rep.E1 + rep.E2_param + rep.E1_rhoE
    assert solution_norm(sol, 0.4, 0.9, PhysicalParams(), grids) == pytest.approx(rep.solution, rel=1e-14)
    assert '"E2_param"' in rep.to_json()
    assert isinstance(NormReport().to_json(), str)

"""Sweeps over (delta, sigma): uniform-estimate ratios, singular limits, sector probes."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .config import StudyConfig
from .fd_oracle import fd_solve
from .model import (DataTuple, Grids, PhysicalParams, combine, extension_jump, jump_trace,
                    laplacian_x, make_compatible_data, seed_family, validate_params)
from .norms import data_norm_report, interface_space_pow, solution_norm, solution_norm_report
from .spectral import lts_residuals, solve_full, solve_zero_trace
from .symbols import find_kappa, perturbation_margin, probe_sector_bounds

log = logging.getLogger(__name__)

CSV_VERSION = "1"


def max_workers() -> int:
    try:
        n = int(os.environ.get("STEFAN_LIMITS_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def ordered_map(fn: Callable, items: Sequence) -> list:
    """Map in parallel (capped by ``STEFAN_LIMITS_THREADS``), results in input order."""
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def write_csv(path, study: str, columns: Sequence[str], rows: Sequence[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# stefan-limits csv v{CSV_VERSION} study={study}\n")
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in columns})
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def compatible_data(cfg: StudyConfig, params: PhysicalParams, grids: Grids,
                    seeds: Optional[DataTuple] = None) -> DataTuple:
    seeds = seeds if seeds is not None else seed_family(cfg.model.seed_family, grids, cfg.model.amplitude)
    return make_compatible_data(params, grids, seeds)


def kinetic_rate_residual(data: DataTuple, params: PhysicalParams, grids: Grids) -> Optional[float]:
    """For ``delta > 0`` the Stefan initial rate is fixed by the compatibility identity.

    Returns ``max |h(0) - J v0 - (g(0) - gamma v0 + sigma Delta_x rho0) / delta - extension jump|``
    (``None`` when ``delta = 0``). A small value certifies that
    ``sigma (h(0) - J v0)`` is as regular as the data on the left-hand side.
    """
    if params.delta <= 0:
        return None
    jv0 = jump_trace(data.v0, params, grids, derivative=data.derivative_traces(grids)).values
    lhs = data.h[0] - jv0 + extension_jump(data.rho0, params, grids)
    rhs = (data.g[0] - data.v0[0][:, 0] + params.sigma * laplacian_x(data.rho0, grids)) / params.delta
    return float(np.max(np.abs(lhs - rhs)))


# ----------------------------------------------------------------------------- uniformity

@dataclass
class UniformityResult:
    rows: list
    max_min: float
    blow_up: bool
    failed: bool
    summary: dict = field(default_factory=dict)


UNIFORMITY_COLUMNS = ("delta", "sigma", "sol_norm", "rhs", "ratio", "E1", "E2_00", "E2_10", "E2_01",
                      "E1_rhoE", "kinetic_rate_residual", "status")


def _diagonal_blow_up(rows: list, n_delta: int, n_sigma: int) -> bool:
    """Monotone growth toward (0, 0) along the diagonal, ending at more than twice the median ratio."""
    grid = {(r["i"], r["j"]): r["ratio"] for r in rows if math.isfinite(r["ratio"])}
    k = min(n_delta, n_sigma)
    if k < 3:
        return False
    diag = [grid.get((i * (n_delta - 1) // (k - 1), i * (n_sigma - 1) // (k - 1))) for i in range(k)]
    if any(v is None for v in diag):
        return False
    increasing = all(diag[i] > diag[i + 1] for i in range(k - 1))
    median = float(np.median([v for v in grid.values()]))
    return increasing and diag[0] > 2 * median


def run_uniformity_study(cfg: StudyConfig, deltas: Optional[Sequence[float]] = None,
                         sigmas: Optional[Sequence[float]] = None) -> UniformityResult:
    grids = cfg.model.grids()
    R = cfg.model.R
    deltas = list(np.linspace(0, R, cfg.uniformity.n_delta)) if deltas is None else list(deltas)
    sigmas = list(np.linspace(0, R, cfg.uniformity.n_sigma)) if sigmas is None else list(sigmas)
    seeds = seed_family(cfg.model.seed_family, grids, cfg.model.amplitude)
    contour = cfg.contour.spec()
    cells = [(i, j, float(d), float(s)) for i, d in enumerate(deltas) for j, s in enumerate(sigmas)]

    def row(cell):
        i, j, d, s = cell
        out = {"i": i, "j": j, "delta": d, "sigma": s}
        try:
            params = validate_params(cfg.model.params(d, s))
            data = compatible_data(cfg, params, grids, seeds)
            sol, _ = solve_full(data, params, grids, contour, cfg.solver)
            rep = data_norm_report(data, params, grids)
            solution_norm_report(sol, params, grids, rep)
            out.update(sol_norm=rep.solution, rhs=rep.rhs, E1=rep.E1, E2_00=rep.E2_00,
                       E2_10=rep.E2_10, E2_01=rep.E2_01, E1_rhoE=rep.E1_rhoE,
                       kinetic_rate_residual=kinetic_rate_residual(data, params, grids))
            if rep.rhs == 0:
                out.update(ratio=float("nan"), status="DEGENERATE")
            else:
                out.update(ratio=rep.solution / rep.rhs, status="OK")
        except Exception as exc:  # a failing row is reported, the sweep continues
            log.exception("uniformity row (%g, %g) failed", d, s)
            out.update(ratio=float("nan"), status=f"ERROR:{type(exc).__name__}")
        return out

    rows = ordered_map(row, cells)
    ratios = np.array([r["ratio"] for r in rows if r["status"] == "OK"])
    max_min = float(ratios.max() / ratios.min()) if ratios.size and ratios.min() > 0 else float("nan")
    blow = _diagonal_blow_up(rows, len(deltas), len(sigmas))
    failed = (not math.isfinite(max_min) or max_min > cfg.uniformity.ratio_max or blow
              or any(r["status"] != "OK" for r in rows))
    for r in rows:
        if r["status"] == "OK" and failed:
            r["status"] = "FAIL"
    summary = {"max_min": max_min, "blow_up": blow, "ratio_max": cfg.uniformity.ratio_max,
               "max_ratio": float(ratios.max()) if ratios.size else None,
               "min_ratio": float(ratios.min()) if ratios.size else None}
    return UniformityResult(rows, max_min, blow, failed, summary)


# ----------------------------------------------------------------------------- singular limits

LIMIT_DESCRIPTIONS = {
    1: "(delta, sigma) -> (0, 0) with delta, sigma > 0",
    2: "delta -> delta0 > 0 with sigma = 0",
    3: "delta -> 0 with sigma0 > 0 fixed",
    4: "(delta, 0) -> (0, 0)",
    5: "(0, sigma) -> (0, 0)",
}


def limit_sequence(cfg: StudyConfig) -> tuple[tuple[float, float], list[tuple[float, float]]]:
    """Geometric sequence ``mu_k -> mu0`` inside ``[0, R]^2``.

    The distance to ``mu0`` is ``start * room * factor^k`` where ``room`` is
    ``R`` (or ``R - delta0`` for type 2).
    """
    lc = cfg.limit
    R = cfg.model.R
    room = R - lc.delta0 if lc.limit_type == 2 else R
    steps = [lc.start * room * lc.factor ** k for k in range(lc.n_points)]
    if lc.limit_type == 1:
        return (0.0, 0.0), [(e, e) for e in steps]
    if lc.limit_type == 2:
        return (lc.delta0, 0.0), [(lc.delta0 + e, 0.0) for e in steps]
    if lc.limit_type == 3:
        return (0.0, lc.sigma0), [(e, lc.sigma0) for e in steps]
    if lc.limit_type == 4:
        return (0.0, 0.0), [(e, 0.0) for e in steps]
    return (0.0, 0.0), [(0.0, e) for e in steps]


@dataclass
class LimitResult:
    mu0: tuple
    rows: list
    monotone: bool
    decrease: float
    failed: bool
    summary: dict = field(default_factory=dict)


LIMIT_COLUMNS = ("k", "delta", "sigma", "error", "data_gap", "stefan_gap", "rho0_term", "status")


def run_singular_limit(cfg: StudyConfig, sequence: Optional[list] = None,
                       mu0: Optional[tuple] = None) -> LimitResult:
    """Errors ``||(v, rho, rho_E)^mu - (v, rho, rho_E)^mu0||`` in the space at ``mu0``.

    The data at every ``mu`` come from the same seeds completed by the
    compatibility factory, so the data converge as ``mu -> mu0``. The reported
    ``data_gap`` (data distance in the ``(0, 0)`` data norm), ``stefan_gap``
    (``||sigma (h(0) - J v0) - sigma0 (h(0) - J v0)||`` in ``W^{2-6/p}``) and
    ``rho0_term`` (``(delta + sigma) ||rho0||_{W^{4-3/p}}``) document the
    convergence assumptions on the data.
    """
    grids = cfg.model.grids()
    seeds = seed_family(cfg.model.seed_family, grids, cfg.model.amplitude)
    contour = cfg.contour.spec()
    default_mu0, default_seq = limit_sequence(cfg)
    mu0 = default_mu0 if mu0 is None else tuple(mu0)
    seq = default_seq if sequence is None else list(sequence)
    p0 = validate_params(cfg.model.params(*mu0))
    d0 = compatible_data(cfg, p0, grids, seeds)
    ref, _ = solve_full(d0, p0, grids, contour, cfg.solver)
    pp = p0.p
    jv = jump_trace(d0.v0, p0, grids, derivative=d0.derivative_traces(grids)).values
    stefan0 = d0.h[0] - jv

    def row(item):
        k, (d, s) = item
        out = {"k": k, "delta": float(d), "sigma": float(s)}
        try:
            params = validate_params(cfg.model.params(d, s))
            data = compatible_data(cfg, params, grids, seeds)
            sol, _ = solve_full(data, params, grids, contour, cfg.solver)
            err = solution_norm(sol - ref, mu0[0], mu0[1], p0, grids)
            diff = combine(((1.0, data), (-1.0, d0)))
            gap = data_norm_report(diff, p0.with_params(0.0, 0.0), grids).data_00
            jv_mu = jump_trace(data.v0, params, grids, derivative=data.derivative_traces(grids)).values
            sgap = interface_space_pow(s * (data.h[0] - jv_mu) - mu0[1] * stefan0, grids,
                                       2 - 6 / pp, pp) ** (1 / pp)
            r0 = (d + s) * interface_space_pow(data.rho0, grids, 4 - 3 / pp, pp) ** (1 / pp)
            out.update(error=err, data_gap=gap, stefan_gap=sgap, rho0_term=r0, status="OK")
        except Exception as exc:
            log.exception("limit row %d failed", k)
            out.update(error=float("nan"), status=f"ERROR:{type(exc).__name__}")
        return out

    rows = ordered_map(row, list(enumerate(seq)))
    errs = np.array([r["error"] for r in rows])
    finite = bool(np.all(np.isfinite(errs)))
    monotone = finite and bool(np.all(np.diff(errs) < 0))
    decrease = float(errs[-1] / errs[0]) if finite and errs[0] > 0 else float("nan")
    at_target = finite and bool(np.all(errs == 0))
    failed = not at_target and (not monotone or not (decrease <= cfg.limit.decrease_max))
    if failed:
        for r in rows:
            if r["status"] == "OK":
                r["status"] = "FAIL"
    summary = {"limit_type": cfg.limit.limit_type, "description": LIMIT_DESCRIPTIONS[cfg.limit.limit_type],
               "mu0": list(mu0), "monotone": monotone, "decrease": decrease,
               "decrease_max": cfg.limit.decrease_max}
    return LimitResult(mu0, rows, monotone, decrease, failed, summary)


# ----------------------------------------------------------------------------- sector

SECTOR_COLUMNS = ("lambda_re", "lambda_im", "z_re", "z_im", "delta", "sigma", "triangle_ratio",
                  "m0", "m1", "m2", "m3", "m4", "m5", "m6")


@dataclass
class SectorResult:
    report: dict
    refined: dict
    kappa_search: list
    rows: list
    failed: bool


def run_sector_report(cfg: StudyConfig, max_rows: int = 200) -> SectorResult:
    """Sector bounds at a kappa chosen by the perturbation search, plus a refinement study.

    CSV rows list, for every (delta, sigma), the sample with the smallest
    triangle ratio and the samples attaining each ``sup |m_j|``.
    """
    sc = cfg.sector
    sector, sample = sc.sector(), sc.sample()
    base = cfg.model.params(cfg.model.R, 0.0)
    searches = []
    kappa = cfg.model.kappa
    for d, s in ((cfg.model.R, 0.0), (0.0, cfg.model.R)):
        k, trail = find_kappa(base.with_params(d, s), sc.kappa_list, 0.5, sector, sample)
        searches.append({"delta": d, "sigma": s, "kappa": k, "trail": trail})
        kappa = max(kappa, k)
    params = base.with_params(0.0, 0.0, kappa=kappa)
    rep = probe_sector_bounds(params, sector, sample, keep_rows=True)
    ref = probe_sector_bounds(params, sector, sample.refined())
    rows = []
    for d, s, L, Z, tri, fam in rep.per_parameter:
        picks = {int(np.argmin(tri))} | {int(np.argmax(fam[j])) for j in range(7)}
        for idx in sorted(picks):
            rows.append({"lambda_re": float(L[idx].real), "lambda_im": float(L[idx].imag),
                         "z_re": float(Z[idx].real), "z_im": float(Z[idx].imag), "delta": d,
                         "sigma": s, "triangle_ratio": float(tri[idx]),
                         **{f"m{j}": float(fam[j, idx]) for j in range(7)}})
    rows = rows[:max_rows] if max_rows else rows
    rep.per_parameter = []
    base_d, ref_d = rep.as_dict(), ref.as_dict()
    changes = [abs(a - b) / max(abs(b), 1e-300) for a, b in zip(base_d["sup_m"], ref_d["sup_m"]) if b > 0]
    changes.append(abs(base_d["min_triangle_ratio"] - ref_d["min_triangle_ratio"])
                   / ref_d["min_triangle_ratio"])
    stability = float(max(changes))
    base_d.update(kappa=kappa, refinement_change=stability, stability_tol=sc.stability_tol)
    failed = rep.failed or ref.failed or stability > sc.stability_tol
    base_d["status"] = "FAIL" if failed else "PASS"
    return SectorResult(base_d, ref_d, searches, rows, failed)


# ----------------------------------------------------------------------------- validation

def run_validation(cfg: StudyConfig) -> dict:
    """Compatibility, reduction and residual checks on the configured family."""
    grids = cfg.model.grids()
    params = validate_params(cfg.model.params())
    data = compatible_data(cfg, params, grids)
    from .model import compatibility_residual
    compat = float(np.max(np.abs(compatibility_residual(data, params, grids))))
    sol, bundle = solve_full(data, params, grids, cfg.contour.spec(), cfg.solver)
    res = lts_residuals(sol, data, params, grids)
    checks = {
        "compatibility": (compat, 1e-12),
        "reduced_g0": (bundle.diagnostics["reduced_g0"], 1e-8),
        "reduced_h0": (bundle.diagnostics["reduced_h0"], 1e-8),
        "interface_residual": (res["interface"], cfg.solver.tol_residual),
        "stefan_residual": (res["stefan"], cfg.solver.tol_residual),
        "extension_trace": (res["extension_trace"], cfg.solver.tol_residual),
        "initial_rho": (res["initial_rho"], cfg.solver.tol_residual),
    }
    out = {k: {"value": v, "tol": t, "status": "PASS" if v <= t else "FAIL"} for k, (v, t) in checks.items()}
    ra = kinetic_rate_residual(data, params, grids)
    if ra is not None:
        out["kinetic_rate"] = {"value": ra, "tol": 1e-10, "status": "PASS" if ra <= 1e-10 else "FAIL"}
    return out


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))


def run_cross_check(cfg: StudyConfig) -> list[dict]:
    """Spectral zero-trace solve against the FD oracle on a refined grid."""
    m, cc = cfg.model, cfg.cross_check
    grids = m.grids()
    fine = type(m)(**{**m.__dict__, "N_y": m.N_y * cc.fd_refine,
                      "grading_ratio": m.grading_ratio ** (1.0 / cc.fd_refine),
                      "N_t": m.N_t * cc.fd_time_refine}).grids()
    family = "zero_trace" if m.seed_family in ("two_mode",) else m.seed_family
    coarse_data = seed_family(family, grids, m.amplitude)
    fine_data = seed_family(family, fine, m.amplitude)
    contour = cfg.contour.spec()

    def row(ds):
        d, s = ds
        params = validate_params(m.params(d, s))
        sol = solve_zero_trace(coarse_data, params, grids, contour, cfg.solver)
        fd = fd_solve(fine_data, params, fine).solution
        ts, ys = cc.fd_time_refine, cc.fd_refine
        e_rho = relative_l2(sol.rho, fd.rho[::ts])
        e_v = max(relative_l2(sol.v[k], fd.v[k][::ts][:, :, ::ys]) for k in range(2))
        ok = e_rho <= cc.tol_rho and e_v <= cc.tol_v
        return {"delta": d, "sigma": s, "rel_rho": e_rho, "rel_v": e_v,
                "status": "OK" if ok else "FAIL"}

    return ordered_map(row, [tuple(map(float, ds)) for ds in cc.params])

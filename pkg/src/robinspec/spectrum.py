"""Negative-eigenvalue location via the boundary matching condition.

-lambda is an eigenvalue of the half-line operator iff -sqrt(lambda) is an
eigenvalue of F(b; lambda), equivalently iff the mismatch between the Robin
boundary data and the log-derivative of the decaying solution family is
singular at the origin.  The search scans the N sorted eigenvalue branches
of that mismatch matrix D(lambda) over a lambda grid and bisects sign
changes; multiplicities come from the kernel dimension of D at the root.

The mismatch formulation (decaying family integrated backward from b, see
``propagator.decay_mismatch_many``) is used for the scan because its root
basins stay order-one wide for any truncation radius; ``matching_values``
exposes the equivalent spec(F(b)) + sqrt(lambda) values at the endpoint.

Poles of D (the Dirichlet-at-origin resonances) can masquerade as sign
changes; a bisected candidate only survives if the mismatch actually
vanishes there.  Completeness is certified externally by the
finite-difference oracle rather than by oscillation counting.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import PoleError, RobinspecError, SingularEndpointError
from .hermitian import jacobi_eigh, opnorm
from .model import Problem, spectral_bound
from .propagator import (
    RiccatiTrace,
    decay_mismatch_many,
    propagate_many,
    riccati_flow,
)

_COND_LIMIT_FRACTION = 0.5  # rows worse than this fraction of endpoint_cond get nudged


@dataclass(frozen=True)
class SpectralLine:
    lam: float
    multiplicity: int


@dataclass(frozen=True)
class Spectrum:
    """Distinct negative eigenvalues -lambda_n, lambda_1 >= lambda_2 >= ...

    Entries hold distinct lambdas with aggregated multiplicities; summing
    lambda^p with multiplicity weights is equivalent to summing over
    repeated eigenvalues.
    """

    entries: tuple           # of SpectralLine, lam strictly decreasing
    resolution_limited: int  # matching branches still near zero at the search floor
    warnings: tuple = ()
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def ground_multiplicity(self) -> int:
        return self.entries[0].multiplicity if self.entries else 0

    @property
    def lambdas(self):
        return tuple(e.lam for e in self.entries)

    def total_count(self) -> int:
        return sum(e.multiplicity for e in self.entries)


@dataclass(frozen=True)
class BranchTable:
    """Sorted matching-branch values on a decreasing lambda grid."""

    lambda_grid: np.ndarray    # decreasing
    branch_values: np.ndarray  # (G, N), each row ascending
    conds: np.ndarray          # frame condition estimates per row
    wronskian_defect_max: float


@dataclass(frozen=True)
class SearchConfig:
    grid_points: int | None = None
    lambda_min: float | None = None
    lambda_max: float | None = None
    tol: Tolerances = DEFAULT


def matching_values(prob: Problem, lam: float, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Ascending spec(F(b; lambda)) + sqrt(lambda); zeros flag eigenvalues."""
    fs, conds, _ = propagate_many(prob, [lam], tol)
    if not np.isfinite(conds[0]) or conds[0] > tol.endpoint_cond:
        raise SingularEndpointError(lam, conds[0])
    w, _ = jacobi_eigh(fs[0])
    return w + math.sqrt(lam)


def mismatch_values(prob: Problem, lam: float, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Ascending eigenvalues of the Robin/decay mismatch D(lambda)."""
    ds, conds, _ = decay_mismatch_many(prob, [lam], tol)
    if not np.isfinite(conds[0]) or conds[0] > tol.endpoint_cond:
        raise SingularEndpointError(lam, conds[0])
    w, _ = jacobi_eigh(ds[0])
    return w


def _rows(prob, lams, tol):
    """Mismatch-branch rows for a batch; ill-conditioned rows get nudged."""
    lams = np.asarray(lams, dtype=float)
    ds, conds, wdef = decay_mismatch_many(prob, lams, tol)
    n = prob.dim
    rows = np.empty((lams.size, n))
    for i in range(lams.size):
        lam = lams[i]
        d, cond = ds[i], conds[i]
        if not np.isfinite(cond) or cond > _COND_LIMIT_FRACTION * tol.endpoint_cond:
            for attempt in range(1, 4):
                nudged = lam * (1.0 + attempt * 4e-9)
                d2, c2, w2 = decay_mismatch_many(prob, [nudged], tol)
                if np.isfinite(c2[0]) and c2[0] <= _COND_LIMIT_FRACTION * tol.endpoint_cond:
                    d, cond, lam = d2[0], c2[0], nudged
                    wdef = np.maximum(wdef, w2)
                    break
        w, _ = jacobi_eigh(d)
        rows[i] = w
    return rows, conds, float(np.max(wdef))


def scan_branches(prob: Problem, search: SearchConfig = SearchConfig()):
    """Branch table over the search window, refined where rows jump."""
    tol = search.tol
    lam_max = search.lambda_max if search.lambda_max is not None else spectral_bound(prob)
    lam_min = (
        search.lambda_min
        if search.lambda_min is not None
        else tol.lambda_min_factor * lam_max
    )
    points = search.grid_points if search.grid_points is not None else tol.grid_points
    n_geo = max(8, points * 2 // 5)
    n_lin = max(8, points - n_geo)
    switch = 0.1 * lam_max
    grid = np.concatenate(
        [
            np.geomspace(lam_min, switch, n_geo, endpoint=False),
            np.linspace(switch, lam_max * (1.0 - 1e-9), n_lin),
        ]
    )
    grid = np.unique(grid)

    rows, conds, wmax = _rows(prob, grid, tol)
    warnings = []
    pole_flag = 100.0 * (1.0 + math.sqrt(lam_max) + opnorm(prob.boundary))

    # refine where a branch jumps more than its own scale allows, or where a
    # row sits in a pole regime (huge values can hide a nearby root)
    floor = max(64 * tol.root_rel * lam_max, 1e-12 * lam_max)
    for _ in range(tol.refine_depth):
        jumps = np.abs(np.diff(rows, axis=0))
        budget = 0.5 * (1.0 + np.abs(rows[:-1]) + np.abs(rows[1:]))
        near_pole = np.max(np.abs(rows), axis=1) > pole_flag
        bad = (np.any(jumps > budget, axis=1) | near_pole[:-1] | near_pole[1:]) & (
            np.diff(grid) > floor
        )
        if not np.any(bad):
            break
        mids = 0.5 * (grid[:-1][bad] + grid[1:][bad])
        mrows, mconds, mw = _rows(prob, mids, tol)
        wmax = max(wmax, mw)
        grid = np.concatenate([grid, mids])
        order = np.argsort(grid)
        grid = grid[order]
        rows = np.concatenate([rows, mrows])[order]
        conds = np.concatenate([conds, mconds])[order]
    else:
        jumps = np.abs(np.diff(rows, axis=0))
        budget = 0.5 * (1.0 + np.abs(rows[:-1]) + np.abs(rows[1:]))
        if np.any(np.any(jumps > budget, axis=1) & (np.diff(grid) <= floor)):
            warnings.append("branch jump persisted at the grid refinement floor")

    table = BranchTable(
        lambda_grid=grid[::-1].copy(),
        branch_values=rows[::-1].copy(),
        conds=conds[::-1].copy(),
        wronskian_defect_max=wmax,
    )
    return table, grid, rows, warnings


def _branch_value(prob, lam, j, tol):
    try:
        return float(mismatch_values(prob, lam, tol)[j])
    except SingularEndpointError:
        return float(mismatch_values(prob, lam * (1.0 + 4e-9), tol)[j])


def _bisect_branch(prob, j, la, lb, tol):
    """Refine a sign-change bracket of sorted-branch j to relative root_rel."""
    ga = _branch_value(prob, la, j, tol)
    gb = _branch_value(prob, lb, j, tol)
    if ga == 0.0:
        return la
    if gb == 0.0:
        return lb
    if ga * gb > 0:
        return None
    while (lb - la) > tol.root_rel * lb:
        lm = 0.5 * (la + lb)
        gm = _branch_value(prob, lm, j, tol)
        if gm == 0.0:
            return lm
        if ga * gm < 0:
            lb, gb = lm, gm
        else:
            la, ga = lm, gm
    return 0.5 * (la + lb)


def _root_multiplicity(prob, lam, tol, pole_flag):
    """Kernel dimension of D(lam); 0 marks a pole artifact, not an eigenvalue."""
    try:
        vals = mismatch_values(prob, lam, tol)
    except SingularEndpointError:
        return 0
    dnorm = float(np.max(np.abs(vals)))
    if dnorm > pole_flag:
        return 0
    mult_tol = tol.mult_factor * (1.0 + dnorm)
    return int(np.count_nonzero(np.abs(vals) <= mult_tol))


def find_spectrum(prob: Problem, search: SearchConfig = SearchConfig()) -> Spectrum:
    """All negative eigenvalues with multiplicities over the search window."""
    tol = search.tol
    table, grid, rows, warnings = scan_branches(prob, search)
    lam_max = float(grid[-1])
    n = prob.dim
    pole_flag = 100.0 * (1.0 + math.sqrt(lam_max) + opnorm(prob.boundary))

    roots = []
    for j in range(n):
        g = rows[:, j]
        sign_change = np.nonzero((g[:-1] * g[1:] < 0) | (g[:-1] == 0.0))[0]
        for i in sign_change:
            root = _bisect_branch(prob, j, float(grid[i]), float(grid[i + 1]), tol)
            if root is None:
                continue
            if _root_multiplicity(prob, root, tol, pole_flag) > 0:
                roots.append(root)
                continue
            # pole crossing, not an eigenvalue: rescan the interval once
            sub = np.linspace(grid[i], grid[i + 1], 18)[1:-1]
            subrows, _, _ = _rows(prob, sub, tol)
            gs = np.concatenate([[g[i]], subrows[:, j], [g[i + 1]]])
            ls = np.concatenate([[grid[i]], sub, [grid[i + 1]]])
            for ii in np.nonzero(gs[:-1] * gs[1:] < 0)[0]:
                r2 = _bisect_branch(prob, j, float(ls[ii]), float(ls[ii + 1]), tol)
                if r2 is not None and _root_multiplicity(prob, r2, tol, pole_flag) > 0:
                    roots.append(r2)
            continue

    cluster_tol = tol.cluster_factor * lam_max
    reps = []
    for lam in sorted(roots, reverse=True):
        if reps and reps[-1] - lam <= cluster_tol:
            continue
        reps.append(lam)
    lines = []
    for lam in reps:
        mult = _root_multiplicity(prob, lam, tol, pole_flag)
        if mult == 0:
            continue
        if mult > n:
            warnings.append(f"multiplicity {mult} at lambda={lam:.6g} clipped to N={n}")
            mult = n
        lines.append(SpectralLine(lam=float(lam), multiplicity=mult))

    # branches still near zero at the search floor: states below lambda_min
    floor_tol = tol.mult_factor * (1.0 + float(np.max(np.abs(rows[0]))))
    unresolved = int(np.count_nonzero(np.abs(rows[0]) <= floor_tol))

    return Spectrum(
        entries=tuple(lines),
        resolution_limited=unresolved,
        warnings=tuple(warnings),
        diagnostics={
            "lambda_max": lam_max,
            "lambda_min": float(grid[0]),
            "grid_points": int(grid.size),
            "wronskian_defect_max": table.wronskian_defect_max,
            "branch_table": table,
        },
    )


def refine_root(prob: Problem, lam: float, tol: Tolerances = DEFAULT, rel_span: float = 1e-6):
    """Sharpen a root by local bisection of the nearest mismatch branch."""
    vals = mismatch_values(prob, lam, tol)
    j = int(np.argmin(np.abs(vals)))
    la, lb = lam * (1.0 - rel_span), lam * (1.0 + rel_span)
    sharp = tol.override(root_rel=min(tol.root_rel, 1e-13))
    root = _bisect_branch(prob, j, la, lb, sharp)
    return lam if root is None else root


def ground_state_flow(
    prob: Problem,
    spec: Spectrum,
    tol: Tolerances = DEFAULT,
    dx_target: float = 1e-3,
    max_nodes: int = 40001,
) -> RiccatiTrace:
    """Riccati trace at the computed ground state over [0, b].

    The ground state is the one energy where the flow is guaranteed
    pole-free; a pole therefore signals an inaccurate lambda_1, which is
    refined once before giving up.
    """
    if not spec.entries:
        raise RobinspecError("no ground state to flow: spectrum is empty")
    lam1 = spec.entries[0].lam
    b = prob.truncation_radius
    if b <= 0:
        xs = np.linspace(0.0, 1.0, 101)
    else:
        nodes = int(min(max_nodes, max(801, math.ceil(b / dx_target) + 1)))
        xs = np.linspace(0.0, b, nodes)
    try:
        return riccati_flow(prob, lam1, xs, tol)
    except PoleError:
        lam1 = refine_root(prob, lam1, tol)
        return riccati_flow(prob, lam1, xs, tol)

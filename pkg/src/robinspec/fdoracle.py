"""Independent finite-difference eigenvalue oracle.

Discretizes the quadratic form of the operator (not the differential
expression): piecewise-linear differences for the kinetic term, trapezoid
weights for the potential (half weight at the boundary node), the Robin
term attached exactly at node 0, then mass lumping folded to a standard
Hermitian eigenproblem by symmetric diagonal scaling.  Discretizing the
form keeps the Robin and Neumann corners exactly symmetric.

Eigenvalues in the negative window come from LAPACK's banded bisection
solvers (scipy ``eigvals_banded``; tridiagonal fast path when N = 1), which
are independent of the package's own Jacobi eigensolver.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvals_banded

from .errors import DomainError, GridCapError
from .model import Problem, spectral_bound

MAX_SIZE_1D = 120_000
MAX_N1_2D = 64
MAX_N2_2D = 128


@dataclass(frozen=True)
class DiscreteOperator:
    """Hermitian banded matrix in upper-diagonal LAPACK storage."""

    band: np.ndarray       # (u + 1, size); band[u + i - j, j] = A[i, j]
    size: int
    h: float
    L: float
    num_channels: int
    bc0: str               # "robin" | "dirichlet"

    def gershgorin_min(self) -> float:
        diag = self.band[-1].real
        radius = np.zeros(self.size)
        u = self.band.shape[0] - 1
        for k in range(1, u + 1):
            mag = np.abs(self.band[u - k, k:])
            radius[k:] += mag
            radius[:-k] += mag
        return float(np.min(diag - radius))


def _fold_banded(blocks_diag, block_off_scalar, weights, nch):
    """Assemble banded storage from per-node diagonal blocks, the scalar
    nearest-neighbor coupling and the lumped mass weights."""
    nodes = blocks_diag.shape[0]
    size = nodes * nch
    u = nch
    band = np.zeros((u + 1, size), dtype=blocks_diag.dtype)
    inv_sqrt_w = 1.0 / np.sqrt(weights)
    for a in range(nch):
        for c in range(a, nch):
            # within-block entries A[(i,a), (i,c)]
            rows = np.arange(nodes) * nch + a
            cols = np.arange(nodes) * nch + c
            vals = blocks_diag[:, a, c] * inv_sqrt_w * inv_sqrt_w
            band[u + (rows - cols), cols] = vals
    # neighbor coupling, same channel only: A[(i,ch),(i+1,ch)] = off / sqrt(w_i w_{i+1})
    for ch in range(nch):
        rows = np.arange(nodes - 1) * nch + ch
        cols = rows + nch
        vals = block_off_scalar * inv_sqrt_w[:-1] * inv_sqrt_w[1:]
        band[0, cols] = vals
    return band, size


def assemble_1d(prob: Problem, h: float, L: float, bc0: str = "robin") -> DiscreteOperator:
    """Discretize the half-line operator on [0, L] (Dirichlet cut at L)."""
    if h <= 0:
        raise DomainError("grid step must be positive")
    m = int(round(L / h))
    if abs(m * h - L) > 1e-9 * max(1.0, L):
        raise DomainError(f"L={L} is not an integer multiple of h={h}")
    if m < 16:
        raise DomainError(f"grid too coarse: m={m} < 16")
    if L < prob.truncation_radius - 1e-12:
        raise DomainError("domain must cover the potential support")
    grid = np.arange(m + 1) * h
    # node 0 sits on the domain edge: sample the right-sided limit there (a
    # profile jump at x=0 must not be averaged with the outside value)
    ev_grid = grid.copy()
    ev_grid[0] = 1e-9
    v = prob.potential.matrices(ev_grid)
    return assemble_1d_samples(
        v, h, prob.boundary.a if bc0 == "robin" else None, num_channels=prob.dim, L=L
    )


def assemble_1d_samples(v_samples, h, robin_matrix, num_channels, L) -> DiscreteOperator:
    """Same discretization from explicit potential samples on 0..L.

    ``robin_matrix=None`` means a Dirichlet condition at 0 (the transformed
    problems of the commutation method); otherwise the Robin form term
    (S phi(0), phi(0)) is added at node 0.
    """
    nch = num_channels
    v = np.asarray(v_samples)
    m = v.shape[0] - 1
    dirichlet0 = robin_matrix is None
    start = 1 if dirichlet0 else 0
    nodes = m - start  # unknown nodes: start .. m-1
    if nodes * nch > MAX_SIZE_1D:
        raise GridCapError(f"1d oracle size {nodes * nch} exceeds cap {MAX_SIZE_1D}")
    idx = np.arange(start, m)
    weights = np.full(nodes, h)
    if not dirichlet0:
        weights[0] = 0.5 * h
    eye = np.eye(nch)
    blocks = np.zeros((nodes, nch, nch), dtype=complex)
    blocks += (2.0 / h) * eye
    if not dirichlet0:
        blocks[0] = (1.0 / h) * eye + np.asarray(robin_matrix)
    blocks -= weights[:, None, None] * v[idx]
    band, size = _fold_banded(blocks, -1.0 / h, weights, nch)
    if np.max(np.abs(band.imag)) == 0.0:
        band = band.real
    return DiscreteOperator(
        band=band, size=size, h=h, L=float(L), num_channels=nch,
        bc0="dirichlet" if dirichlet0 else "robin",
    )


def negative_eigs(op: DiscreteOperator, count_cap: int | None = None,
                  floor: float = 0.0, gap_tol: float | None = None):
    """Eigenvalues below -floor, clustered into (value, multiplicity) pairs,
    most negative first."""
    u = op.band.shape[0] - 1
    lo = op.gershgorin_min() - 1.0
    hi = -abs(floor)
    if lo >= hi:
        return []
    if u == 1 and not np.iscomplexobj(op.band):
        w = eigh_tridiagonal(
            op.band[1].real, op.band[0, 1:].real,
            select="v", select_range=(lo, hi), eigvals_only=True,
        )
    else:
        w = eigvals_banded(op.band, select="v", select_range=(lo, hi))
    w = np.sort(np.asarray(w))
    if w.size == 0:
        return []
    scale = max(1.0, float(np.max(np.abs(w))))
    tol = gap_tol if gap_tol is not None else 1e-7 * scale
    clusters = []
    run = [w[0]]
    for val in w[1:]:
        if val - run[-1] <= tol:
            run.append(val)
        else:
            clusters.append((float(np.mean(run)), len(run)))
            run = [val]
    clusters.append((float(np.mean(run)), len(run)))
    if count_cap is not None:
        clusters = clusters[:count_cap]
    return clusters


def default_domain(prob: Problem, lam_min: float, h: float):
    """Truncation length b + 12/sqrt(lam_min), rounded to a multiple of h."""
    L = prob.truncation_radius + 12.0 / math.sqrt(max(lam_min, 1e-12))
    m = int(math.ceil(L / h))
    return m * h


def oracle_spectrum(prob: Problem, h: float, L: float | None = None,
                    lam_min_hint: float | None = None, floor: float | None = None):
    """Convenience wrapper: assemble, solve, cluster.

    Without a hint, the truncation is sized from a coarse pre-scan so that
    the Dirichlet cut sits ~12 decay lengths past the support.
    """
    if L is None:
        if lam_min_hint is None:
            coarse_L = default_domain(prob, 1.0, 0.02)
            coarse = negative_eigs(
                assemble_1d(prob, 0.02, coarse_L), floor=10 * 0.02**2 * spectral_bound(prob)
            )
            lam_min_hint = -coarse[-1][0] if coarse else 1.0
        L = default_domain(prob, lam_min_hint, h)
    if floor is None:
        floor = 10.0 * h * h * spectral_bound(prob)
    op = assemble_1d(prob, h, L)
    return negative_eigs(op, floor=floor), {"h": h, "L": L, "floor": floor, "size": op.size}


# ----------------------------------------------------------------------
# half-plane (d = 2) variant
# ----------------------------------------------------------------------

def assemble_2d_halfplane(v2, h: float, L1: float, L2: float) -> DiscreteOperator:
    """Neumann at x1 = 0, Dirichlet on the other three sides of
    [0, L1] x [-L2, L2]; 5-point form discretization, lumped mass.

    ``v2`` is evaluated vectorized on the tensor grid: v2(x1[:, None], x2[None, :]).
    """
    m1 = int(round(L1 / h))
    m2 = int(round(2.0 * L2 / h))
    if abs(m1 * h - L1) > 1e-9 or abs(m2 * h - 2 * L2) > 1e-9:
        raise DomainError("L1 and 2*L2 must be integer multiples of h")
    n1 = m1          # unknowns i1 = 0 .. m1-1
    n2 = m2 - 1      # unknowns i2 = 1 .. m2-1
    if n1 < 8 or n2 < 8:
        raise DomainError("fewer than 8 nodes across the box; refine the grid")
    if n1 > MAX_N1_2D or n2 > MAX_N2_2D:
        raise GridCapError(
            f"2d grid {n1}x{n2} exceeds the desk-scale cap {MAX_N1_2D}x{MAX_N2_2D}; "
            "request a coarser grid"
        )
    x1 = np.arange(n1) * h
    x1_eval = x1.copy()
    x1_eval[0] = 1e-9  # right-sided limit at the Neumann edge
    x2 = -L2 + np.arange(1, m2) * h
    vgrid = np.asarray(v2(x1_eval[:, None], x2[None, :]), dtype=float)  # (n1, n2)

    w1 = np.full(n1, h)
    w1[0] = 0.5 * h
    w2 = np.full(n2, h)
    mass = w1[:, None] * w2[None, :]

    diag = np.zeros((n1, n2))
    # x1 edges: (i1, i1+1) for i1 = 0..m1-1; edge to the Dirichlet node only adds diagonal
    c1 = w2 / h
    diag += c1[None, :]          # each unknown's right edge
    diag[1:, :] += c1[None, :]   # left edge (node 0 has none: Neumann side)
    off1 = -c1                   # coupling (i1, i1+1), i1 = 0..n1-2
    # x2 edges: (i2, i2+1) for i2 = 0..m2-1; both boundary edges hit Dirichlet zeros
    c2 = w1 / h
    diag += 2.0 * c2[:, None]
    off2 = -c2                   # coupling (i2, i2+1), i2 = 1..m2-2
    diag -= mass * vgrid

    inv_sqrt = 1.0 / np.sqrt(mass)
    size = n1 * n2
    u = n1
    band = np.zeros((u + 1, size))

    def flat(i1, i2):
        return i2 * n1 + i1

    band[u, :] = (diag * inv_sqrt**2).T.reshape(size)
    # x1 neighbors: distance 1
    for i2 in range(n2):
        cols = flat(np.arange(1, n1), i2)
        band[u - 1, cols] = off1[i2] * inv_sqrt[:-1, i2] * inv_sqrt[1:, i2]
    # x2 neighbors: distance n1
    for i2 in range(n2 - 1):
        cols = flat(np.arange(n1), i2 + 1)
        band[0, cols] = off2 * inv_sqrt[:, i2] * inv_sqrt[:, i2 + 1]
    return DiscreteOperator(band=band, size=size, h=h, L=float(L1), num_channels=1, bc0="neumann2d")

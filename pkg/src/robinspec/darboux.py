"""Commutation transform: remove the ground level, verify isospectrality.

Factorizing the operator through its ground-state Riccati flow F1 trades
the Robin problem for a Dirichlet problem with potential W = V + 2 F1'.
All kappa_1 copies of the ground level disappear; everything else survives.

F1' is always taken from the Riccati identity F1' = lam1 I - F1^2 - V --
exact along the flow -- never from numerical differentiation, so W carries
no differencing noise.  Beyond the support, F1 follows the closed-form
eigenvalue continuation and W decays like exp(-2 sqrt(lam1) (x - b)).

W is generally sign-indefinite even for positive potentials; the
inequality evaluators are not applied to it.
"""

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import PoleError, RobinspecError, TransformRefusedError
from .hermitian import jacobi_eigh
from .model import Problem, spectral_bound
from .propagator import RiccatiTrace, continue_beyond_support, riccati_flow
from .quadrature import gauss_nodes
from .fdoracle import assemble_1d_samples, negative_eigs


@dataclass(frozen=True)
class DarbouxResult:
    lambda1: float
    kappa1: int
    xs: np.ndarray            # trace grid on [0, b]
    w_samples: np.ndarray     # (m, N, N) transformed potential V + 2 F1'
    f_end: np.ndarray         # F1(b), anchor for the closed-form continuation
    residual_max: float
    residual_scale: float


@dataclass(frozen=True)
class IsospectralityReport:
    removed_level: float
    removed_multiplicity: int
    transformed: tuple        # (value, multiplicity) pairs, most negative first
    reference: tuple          # original minus ground, as oracle-comparable pairs
    max_abs_diff: float
    counts_match: bool
    h: float
    L: float


@dataclass(frozen=True)
class IdentityReport:
    lhs: float
    rhs: float
    scale: float

    @property
    def defect(self) -> float:
        return abs(self.lhs - self.rhs)

    def ok(self, rel: float = 1e-6) -> bool:
        return self.defect <= rel * self.scale


def _w_from_flow(prob, trace):
    v = prob.potential.matrices(trace.xs)
    fsq = trace.values @ trace.values
    eye = np.eye(prob.dim)
    fprime = trace.lam * eye - fsq - v
    return v + 2.0 * fprime


def transform(prob: Problem, spec, trace: RiccatiTrace, tol: Tolerances = DEFAULT) -> DarbouxResult:
    """Assemble W = V + 2 F1' from a ground-state trace.

    Refuses when the trace's Riccati residual exceeds 1e-6 of its scale:
    the transform would silently propagate an untrustworthy flow.
    """
    if not spec.entries:
        raise RobinspecError("no ground state to remove: spectrum is empty")
    lam1 = spec.entries[0].lam
    if abs(trace.lam - lam1) > 1e-6 * max(lam1, 1.0):
        raise RobinspecError("trace was not computed at the ground state")
    residual_max = float(np.max(trace.residuals))
    if residual_max > 1e-6 * trace.residual_scale:
        raise TransformRefusedError(
            f"ground-state trace residual {residual_max:.3e} exceeds "
            f"{1e-6 * trace.residual_scale:.3e}"
        )
    return DarbouxResult(
        lambda1=lam1,
        kappa1=spec.entries[0].multiplicity,
        xs=trace.xs,
        w_samples=_w_from_flow(prob, trace),
        f_end=np.array(trace.values[-1]),
        residual_max=residual_max,
        residual_scale=trace.residual_scale,
    )


def _flow_at_ground(prob, lam1, grid, tol):
    from .spectrum import refine_root

    try:
        return riccati_flow(prob, lam1, grid, tol)
    except PoleError:
        return riccati_flow(prob, refine_root(prob, lam1, tol), grid, tol)


def transformed_potential(prob: Problem, res: DarbouxResult, xs):
    """W sampled at arbitrary abscissae: fresh flow inside [0, b], the
    eigenvalue continuation beyond."""
    xs = np.asarray(xs, dtype=float)
    b = prob.truncation_radius
    n = prob.dim
    out = np.empty((xs.size, n, n), dtype=complex)
    inside = xs <= b + 1e-12
    eye = np.eye(n)
    if np.any(inside):
        gin = xs[inside]
        if b > 0:
            grid = gin if (gin[0] == 0.0) else np.concatenate([[0.0], gin])
            trace = _flow_at_ground(prob, res.lambda1, grid, DEFAULT)
            vals = trace.values if gin[0] == 0.0 else trace.values[1:]
            v = prob.potential.matrices(gin)
            out[inside] = v + 2.0 * (res.lambda1 * eye - vals @ vals - v)
        else:
            out[inside] = 0.0
    for i in np.nonzero(~inside)[0]:
        fc = continue_beyond_support(res.f_end, res.lambda1, b, float(xs[i])).a
        v = prob.potential.matrix(xs[i])
        out[i] = v + 2.0 * (res.lambda1 * eye - fc @ fc)
    return out


def tail_length(res: DarbouxResult) -> float:
    """Distance past b after which ||W|| is negligible (~1e-10 of lam1)."""
    return 14.0 / math.sqrt(res.lambda1)


def verify_isospectrality(res: DarbouxResult, prob: Problem,
                          h: float = 0.005, L: float | None = None,
                          tol: Tolerances = DEFAULT,
                          match_tol: float | None = None) -> IsospectralityReport:
    """Dirichlet spectrum of W versus the original minus its ground level."""
    from .spectrum import find_spectrum  # circular at module load otherwise

    b = prob.truncation_radius
    if L is None:
        remaining = [e.lam for e in _original_minus_ground(res, prob)]
        lam_floor = min(remaining) if remaining else 0.25 * res.lambda1
        L = b + tail_length(res) + 12.0 / math.sqrt(max(lam_floor, 1e-6))
    m = int(math.ceil(L / h))
    L = m * h
    xs = np.arange(m + 1) * h
    w = transformed_potential(prob, res, xs)
    op = assemble_1d_samples(w, h, None, num_channels=prob.dim, L=L)
    floor = 10.0 * h * h * spectral_bound(prob)
    transformed = negative_eigs(op, floor=floor)

    reference = [(-e.lam, e.multiplicity) for e in _original_minus_ground(res, prob)]
    reference.sort()
    if match_tol is None:
        match_tol = max(1e-6, 2.0 * h * h * spectral_bound(prob) ** 2)

    max_diff = 0.0
    counts = sum(m for _, m in transformed) == sum(m for _, m in reference)
    t_expanded = [v for v, mm in transformed for _ in range(mm)]
    r_expanded = [v for v, mm in reference for _ in range(mm)]
    for tv, rv in zip(t_expanded, r_expanded):
        max_diff = max(max_diff, abs(tv - rv))
    if len(t_expanded) != len(r_expanded):
        max_diff = float("inf")
    return IsospectralityReport(
        removed_level=res.lambda1,
        removed_multiplicity=res.kappa1,
        transformed=tuple(transformed),
        reference=tuple(reference),
        max_abs_diff=max_diff,
        counts_match=counts,
        h=h,
        L=L,
    )


def _original_minus_ground(res: DarbouxResult, prob: Problem):
    from .spectrum import find_spectrum

    spec = find_spectrum(prob)
    return spec.entries[1:]


def telescoped_rhs_check(res: DarbouxResult, prob: Problem,
                         tol: Tolerances = DEFAULT) -> IdentityReport:
    """(3/16) int Tr W^2 against its telescoped closed form.

    The boundary terms of the telescoping use F1(0) = boundary matrix and
    the limit spectrum {-sqrt(lam1) (x kappa1), +sqrt(lam1) (x N - kappa1)}:

        (3/16) int Tr V^2 - (1/2)(2 kappa1 - N) lam1^(3/2)
                          - (3/4) lam1 Tr S + (1/4) Tr S^3.
    """
    from .hermitian import trace_power
    from .inequalities import potential_integrals

    n = prob.dim
    b = prob.truncation_radius
    lam1, kap1 = res.lambda1, res.kappa1

    lhs = 0.0
    if b > 0:
        xs_in, ws_in = gauss_nodes(0.0, b, prob.interior_breakpoints(),
                                   panels_per_unit=max(8.0, 40.0 / max(b, 1.0)))
        grid = np.concatenate([[0.0], xs_in]) if xs_in[0] > 0.0 else xs_in
        trace = _flow_at_ground(prob, lam1, grid, tol)
        w_in = _w_from_flow(prob, trace)[1:] if xs_in[0] > 0.0 else _w_from_flow(prob, trace)
        tr_w2 = np.einsum("kij,kij->k", w_in, w_in.conj()).real
        lhs += float(np.dot(ws_in, tr_w2))
    # exponential tail: continuation in the frozen eigenbasis of F1(b)
    mu, _ = jacobi_eigh(res.f_end)
    s1 = math.sqrt(lam1)
    xs_t, ws_t = gauss_nodes(b, b + tail_length(res) + 6.0 / s1, (), panels_per_unit=4.0 * s1)
    tr_w2_tail = np.zeros(xs_t.size)
    for k, x in enumerate(xs_t):
        t = math.tanh(s1 * (x - b))
        mapped = s1 * (s1 * t + mu) / (s1 + mu * t)
        tr_w2_tail[k] = float(np.sum((2.0 * (lam1 - mapped**2)) ** 2))
    lhs += float(np.dot(ws_t, tr_w2_tail))
    lhs *= 0.1875

    ints = potential_integrals(prob, tol=tol)
    tr_s = trace_power(prob.boundary, 1)
    tr_s3 = trace_power(prob.boundary, 3)
    rhs = (
        0.1875 * ints.tr_v2
        - 0.5 * (2 * kap1 - n) * lam1**1.5
        - 0.75 * lam1 * tr_s
        + 0.25 * tr_s3
    )
    scale = max(abs(lhs), abs(rhs), 0.1875 * ints.tr_v2, lam1**1.5, 1.0)
    return IdentityReport(lhs=float(lhs), rhs=float(rhs), scale=float(scale))


def limit_eigenvalues(res: DarbouxResult, x: float):
    """Eigenvalues of F1 at x >= b via the continuation (for limit checks)."""
    return jacobi_eigh(
        continue_beyond_support(res.f_end, res.lambda1, 0.0, x - 0.0).a
        if False
        else continue_beyond_support(res.f_end, res.lambda1, x=x, lam=res.lambda1, b=None).a
    )[0]

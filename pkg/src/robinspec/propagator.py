"""Propagation of the fundamental system and the Riccati flow.

Three routes to the boundary log-derivative F(x) = M'(x) M(x)^{-1}:

* ``propagate`` / ``propagate_many``: adaptive integration of the linear
  stacked system (M, M') for arbitrary trial energies -- no Riccati poles,
  exponential growth killed by QR renormalization (F is invariant under
  right multiplication of the frame).
* ``riccati_flow``: direct integration of F' = lam I - F^2 - V(x).  Safe at
  a computed ground state, where M stays invertible; optional elsewhere.
* ``propagate_piecewise_constant``: exact transfer matrices for potentials
  built purely from box profiles (used as a second oracle in tests).

Beyond the potential support, ``continue_beyond_support`` applies the
closed-form Mobius map to the eigenvalues of F(b), the eigenvectors being
frozen for x >= b.
"""

import math
from dataclasses import dataclass

import numpy as np

from .backend import active_backend
from .config import DEFAULT, Tolerances
from .errors import DomainError, PoleError, SingularEndpointError
from .hermitian import HermitianMatrix, jacobi_eigh
from .model import Problem
from ._riccati_py import eval_potential as _eval_potential_py


@dataclass(frozen=True)
class PropagationResult:
    """Boundary log-derivative plus integration diagnostics."""

    matrix: HermitianMatrix        # symmetrized F(b; lambda)
    lam: float
    wronskian_defect: float        # max ||M*M' - (M')*M|| / (1 + ||M|| ||M'||)
    hermiticity_defect: float      # pre-symmetrization ||F - F*|| / (1 + ||F||)
    renorm_log: float              # accumulated log growth removed by QR steps
    endpoint_cond: float
    steps: int


@dataclass(frozen=True)
class RiccatiTrace:
    """Sampled Riccati flow with centered-difference residual diagnostics."""

    xs: np.ndarray            # (m,)
    values: np.ndarray        # (m, N, N), Hermitian at every node
    residuals: np.ndarray     # (m,)  ||F' + F^2 + V - lam I||_F per node
    lam: float
    hermiticity_defect: float
    residual_scale: float     # lam + max ||V|| + max ||F||^2 (residual units)


def _logderiv(m, mp):
    """F = M' M^{-1} with its condition estimate."""
    cond = float(np.linalg.cond(m))
    f = np.linalg.solve(m.T, mp.T).T
    return f, cond


def _symmetrize(f):
    herm = 0.5 * (f + f.conj().T)
    defect = float(np.linalg.norm(f - f.conj().T) / (1.0 + np.linalg.norm(f)))
    return herm, defect


def endpoint_frames(prob: Problem, lams, tol: Tolerances = DEFAULT):
    """Raw (M, M') endpoint frames for a batch of trial energies."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams <= 0):
        raise DomainError("trial energies must be positive")
    kernel = active_backend()
    out = kernel.integrate(
        prob.packed(),
        prob.dim,
        lams,
        0.0,
        prob.truncation_radius,
        prob.interior_breakpoints(),
        np.empty(0),
        tol.rk_rtol,
        tol.rk_atol,
        renorm_norm=tol.renorm_norm,
        renorm_every=tol.renorm_every,
        m0=None,
        mp0=prob.boundary.a,
    )
    n = prob.dim
    return out["y_end"][:, :n, :], out["y_end"][:, n:, :], out


def propagate_full(prob: Problem, lam: float, tol: Tolerances = DEFAULT) -> PropagationResult:
    """F(b; lambda) with diagnostics; raises SingularEndpointError when M(b)
    is beyond recovery (caller perturbs lambda by one root-finder step)."""
    m, mp, out = endpoint_frames(prob, [lam], tol)
    f, cond = _logderiv(m[0], mp[0])
    if not np.isfinite(cond) or cond > tol.endpoint_cond:
        raise SingularEndpointError(lam, cond)
    herm, defect = _symmetrize(f)
    return PropagationResult(
        matrix=HermitianMatrix(herm, tol=np.inf),
        lam=float(lam),
        wronskian_defect=float(out["wronskian_defect"][0]),
        hermiticity_defect=defect,
        renorm_log=float(out["renorm_log"][0]),
        endpoint_cond=cond,
        steps=out["steps"],
    )


def propagate(prob: Problem, lam: float, tol: Tolerances = DEFAULT) -> HermitianMatrix:
    """Boundary log-derivative F(b; lambda), symmetrized."""
    return propagate_full(prob, lam, tol).matrix


def propagate_many(prob: Problem, lams, tol: Tolerances = DEFAULT):
    """Batched F(b; lambda): returns (F (L,N,N), cond (L,), wdefect (L,)).

    Ill-conditioned endpoints are left in the output with their condition
    estimate; the caller decides whether to perturb or discard.
    """
    m, mp, out = endpoint_frames(prob, lams, tol)
    nl = m.shape[0]
    fs = np.empty_like(m)
    conds = np.empty(nl)
    for i in range(nl):
        f, cond = _logderiv(m[i], mp[i])
        fs[i] = 0.5 * (f + f.conj().T)
        conds[i] = cond
    return fs, conds, out["wronskian_defect"]


def propagate_nodes(prob: Problem, lam: float, nodes, tol: Tolerances = DEFAULT):
    """F(x; lambda) at the requested abscissae in [0, b] (single pass)."""
    nodes = np.asarray(nodes, dtype=float)
    if np.any(nodes < 0) or np.any(nodes > prob.truncation_radius + 1e-12):
        raise DomainError("nodes must lie in [0, truncation_radius]")
    kernel = active_backend()
    out = kernel.integrate(
        prob.packed(),
        prob.dim,
        [lam],
        0.0,
        prob.truncation_radius,
        prob.interior_breakpoints(),
        nodes,
        tol.rk_rtol,
        tol.rk_atol,
        renorm_norm=tol.renorm_norm,
        renorm_every=tol.renorm_every,
        mp0=prob.boundary.a,
    )
    n = prob.dim
    frames = out["records"][:, 0, :, :]
    fs = np.empty((nodes.size, n, n), dtype=complex)
    for i in range(nodes.size):
        f, cond = _logderiv(frames[i, :n, :], frames[i, n:, :])
        if not np.isfinite(cond) or cond > tol.endpoint_cond:
            raise SingularEndpointError(lam, cond)
        fs[i] = 0.5 * (f + f.conj().T)
    return fs, float(out["wronskian_defect"][0])


def decay_mismatch_many(prob: Problem, lams, tol: Tolerances = DEFAULT):
    """Boundary mismatch D(lambda) between the Robin data and the decaying family.

    The family of solutions decaying at infinity is integrated from b back
    to the origin (its log-derivative there is F_dec(0)); -lambda is an
    eigenvalue iff D = boundary - F_dec(0) is singular, with multiplicity
    equal to the kernel dimension.  At the matching point b this is the
    same condition as -sqrt(lambda) in spec(F(b; lambda)) -- but scanned at
    x = 0 the root basins stay order-one wide, whereas at x = b they shrink
    like exp(-2 sqrt(lambda) (b - support core)).

    Implemented as a forward sweep of the reflected problem: with
    u = b - x, the decaying frame solves the same system with potential
    V(b - u) and initial data M = I, dM/du = +sqrt(lambda) I, and
    F_dec(0) = -(dM/du)(b) M(b)^{-1}.

    Returns (D (L, N, N) symmetrized, conds, wronskian defects).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams <= 0):
        raise DomainError("trial energies must be positive")
    n = prob.dim
    s_mat = prob.boundary.a
    b = prob.truncation_radius
    roots = np.sqrt(lams)
    if b <= 0:
        d = s_mat[None, :, :] + roots[:, None, None] * np.eye(n)[None, :, :]
        return d, np.ones(lams.size), np.zeros(lams.size)
    rpack, rbreaks = prob.reflected_packed()
    mp0 = roots[:, None, None] * np.eye(n, dtype=complex)[None, :, :]
    kernel = active_backend()
    out = kernel.integrate(
        rpack,
        n,
        lams,
        0.0,
        b,
        rbreaks,
        np.empty(0),
        tol.rk_rtol,
        tol.rk_atol,
        renorm_norm=tol.renorm_norm,
        renorm_every=tol.renorm_every,
        mp0=mp0,
    )
    m = out["y_end"][:, :n, :]
    mu = out["y_end"][:, n:, :]
    ds = np.empty_like(m)
    conds = np.empty(lams.size)
    for i in range(lams.size):
        f_dec_neg, cond = _logderiv(m[i], mu[i])  # = -F_dec(0)
        d = s_mat + f_dec_neg
        ds[i] = 0.5 * (d + d.conj().T)
        conds[i] = cond
    return ds, conds, out["wronskian_defect"]


# ----------------------------------------------------------------------
# closed-form continuation beyond the support
# ----------------------------------------------------------------------

def mobius_branch(mu: float, lam: float, dx: float) -> float:
    """Eigenvalue branch map sqrt(lam)(sqrt(lam) tanh(sqrt(lam) dx) + mu) /
    (sqrt(lam) + mu tanh(sqrt(lam) dx)); strictly monotone in mu."""
    s = math.sqrt(lam)
    t = math.tanh(s * dx)
    den = s + mu * t
    if abs(den) <= 1e-13 * (s + abs(mu)):
        raise PoleError(dx, float("inf"))
    return s * (s * t + mu) / den


def continue_beyond_support(f_b, lam: float, b: float, x: float) -> HermitianMatrix:
    """F(x) for x >= b from F(b): branch map on eigenvalues, frozen eigenvectors."""
    if x < b - 1e-12 * max(1.0, abs(b)):
        raise DomainError(f"continuation needs x >= b, got x={x}, b={b}")
    if lam <= 0:
        raise DomainError("continuation needs lambda > 0")
    fb = np.asarray(f_b, dtype=complex)
    w, u = jacobi_eigh(fb)
    mapped = np.array([mobius_branch(mu, lam, max(x - b, 0.0)) for mu in w])
    return HermitianMatrix(u @ np.diag(mapped) @ u.conj().T, tol=np.inf)


# ----------------------------------------------------------------------
# direct Riccati integration
# ----------------------------------------------------------------------

def riccati_flow(prob: Problem, lam: float, grid, tol: Tolerances = DEFAULT) -> RiccatiTrace:
    """Integrate F' = lam I - F^2 - V from F(0) = boundary along the grid.

    Pole-free when lam is a computed ground-state energy; other energies run
    at the caller's risk and raise PoleError when ||F|| explodes.  Potential
    discontinuities (box edges) split the integration so every step sees the
    one-sided limit; residuals are likewise computed per smooth segment.
    """
    xs = np.asarray(grid, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0) or xs[0] != 0.0:
        raise DomainError("riccati grid must be increasing and start at 0")
    n = prob.dim
    pack = prob.packed()
    pbreaks = [p for p in prob.interior_breakpoints() if p < xs[-1]]
    stops = sorted(set(pbreaks) | set(xs[1:].tolist()))
    break_set = set(pbreaks)
    values = np.empty((xs.size, n, n), dtype=complex)
    f = np.array(prob.boundary.a, dtype=complex)
    values[0] = f
    herm_defect = 0.0

    c = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
    a_rows = [
        [],
        [1 / 5],
        [3 / 40, 9 / 40],
        [44 / 45, -56 / 15, 32 / 9],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
    e_row = [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
    eye = np.eye(n)

    # current smooth segment of the potential, for one-sided stage evaluation
    seg_edges = [0.0] + pbreaks + [xs[-1]]
    seg_ptr = 0

    def rhs(x, fv, lo, hi):
        delta = 1e-10 * max(1.0, abs(hi))
        xe = min(max(x, lo + delta), hi - delta)
        return lam * eye - fv @ fv - _eval_potential_py(pack, xe)

    x = 0.0
    rec = 1
    h = min((xs[-1] - xs[0]) / 64.0, 0.1 / math.sqrt(lam + 1.0))
    k = [None] * 7
    k1_valid = False
    steps = 0
    for target in stops:
        while seg_ptr + 2 < len(seg_edges) and target > seg_edges[seg_ptr + 1]:
            seg_ptr += 1
        lo, hi = seg_edges[seg_ptr], seg_edges[seg_ptr + 1]
        while x < target:
            h = min(h, target - x)
            at_target = (target - x) <= h * (1 + 1e-12)
            if at_target:
                h = target - x
            steps += 1
            if steps > 2_000_000:
                raise RuntimeError("riccati flow exceeded the step budget")
            if not k1_valid:
                k[0] = rhs(x, f, lo, hi)
                k1_valid = True
            for i in range(1, 7):
                fi = f + h * sum(a_rows[i][j] * k[j] for j in range(i))
                k[i] = rhs(x + c[i] * h, fi, lo, hi)
            f5 = f + h * sum(a_rows[6][j] * k[j] for j in range(6))
            err_m = h * sum(e_row[j] * k[j] for j in range(7) if e_row[j] != 0.0)
            sc = tol.rk_atol + tol.rk_rtol * np.maximum(np.abs(f), np.abs(f5))
            err = float(np.sqrt(np.mean(np.abs(err_m / sc) ** 2)))
            if not np.isfinite(err):
                raise PoleError(x, float("inf"))
            if err <= 1.0:
                x = target if at_target else x + h
                herm_defect = max(
                    herm_defect,
                    float(np.linalg.norm(f5 - f5.conj().T) / (1.0 + np.linalg.norm(f5))),
                )
                f = 0.5 * (f5 + f5.conj().T)
                k1_valid = False  # symmetrization nudges the state
                nf = float(np.linalg.norm(f))
                if nf > tol.pole_norm:
                    raise PoleError(x, nf)
            h *= min(5.0, max(0.2, 0.9 * err ** (-0.2) if err > 0 else 5.0))
        if rec < xs.size and abs(xs[rec] - target) <= 1e-12 * max(1.0, abs(target)):
            values[rec] = f
            rec += 1
        if target in break_set:
            k1_valid = False
    if rec != xs.size:
        raise RuntimeError("riccati flow failed to visit every grid node")

    resid = _segment_residuals(prob, xs, values, lam)
    v_samples = prob.potential.matrices(xs)
    vnorm = float(np.max(np.linalg.norm(v_samples, axis=(1, 2)))) if xs.size else 0.0
    fnorm = float(np.max(np.linalg.norm(values, axis=(1, 2))))
    return RiccatiTrace(
        xs=xs,
        values=values,
        residuals=resid,
        lam=float(lam),
        hermiticity_defect=herm_defect,
        residual_scale=lam + vnorm + fnorm**2,
    )


def _segment_residuals(prob: Problem, xs, values, lam):
    """||F' + F^2 + V - lam I|| per node, differentiated within each smooth
    segment of the potential (one-sided limits at kinks of V)."""
    n = prob.dim
    edges = [xs[0]] + [p for p in prob.interior_breakpoints() if xs[0] < p < xs[-1]] + [xs[-1]]
    resid = np.zeros(xs.size)
    eye = np.eye(n)
    tol_x = 1e-12 * max(1.0, abs(xs[-1]))
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (xs >= lo - tol_x) & (xs <= hi + tol_x)
        idx = np.nonzero(mask)[0]
        if idx.size < 2:
            continue
        sub_x = xs[idx]
        delta = 1e-10 * max(1.0, abs(hi))
        v_sub = prob.potential.matrices(np.clip(sub_x, lo + delta, hi - delta))
        d = _derivative_samples(sub_x, values[idx])
        r = np.linalg.norm(d + values[idx] @ values[idx] + v_sub - lam * eye, axis=(1, 2))
        resid[idx] = np.maximum(resid[idx], r)
    return resid


def _derivative_samples(xs, values):
    """First derivative of matrix samples: fourth-order stencils on uniform
    grids, np.gradient otherwise."""
    m = xs.size
    dx = np.diff(xs)
    if m >= 5 and np.allclose(dx, dx[0], rtol=1e-10, atol=0.0):
        h = dx[0]
        d = np.empty_like(values)
        d[2:-2] = (-values[4:] + 8 * values[3:-1] - 8 * values[1:-3] + values[:-4]) / (12 * h)
        d[0] = (-25 * values[0] + 48 * values[1] - 36 * values[2] + 16 * values[3] - 3 * values[4]) / (12 * h)
        d[1] = (-3 * values[0] - 10 * values[1] + 18 * values[2] - 6 * values[3] + values[4]) / (12 * h)
        d[-2] = (3 * values[-1] + 10 * values[-2] - 18 * values[-3] + 6 * values[-4] - values[-5]) / (12 * h)
        d[-1] = (25 * values[-1] - 48 * values[-2] + 36 * values[-3] - 16 * values[-4] + 3 * values[-5]) / (12 * h)
        return d
    return np.gradient(values, xs, axis=0)


# ----------------------------------------------------------------------
# exact transfer matrices for piecewise-constant potentials
# ----------------------------------------------------------------------

def propagate_piecewise_constant(prob: Problem, lam: float, tol: Tolerances = DEFAULT):
    """F(b; lambda) via per-interval cos/cosh blocks (box profiles only)."""
    from .model import Box

    for p, _ in prob.potential.terms:
        if not isinstance(p, Box):
            raise DomainError("transfer-matrix path requires box profiles only")
    b = prob.truncation_radius
    edges = sorted({0.0, b} | {x for x in prob.potential.breakpoints() if 0.0 < x < b})
    n = prob.dim
    m = np.eye(n, dtype=complex)
    mp = np.array(prob.boundary.a, dtype=complex)
    for lo, hi in zip(edges[:-1], edges[1:]):
        vc = prob.potential.matrix(0.5 * (lo + hi))
        w, u = jacobi_eigh(lam * np.eye(n) - vc)
        length = hi - lo
        rate = math.sqrt(float(np.max(np.abs(w)))) if np.max(np.abs(w)) > 0 else 0.0
        chunks = max(1, int(math.ceil(rate * length / 10.0)))
        step = length / chunks
        cv = np.empty(n)
        sv = np.empty(n)
        dv = np.empty(n)
        for j, d in enumerate(w):
            if d > 1e-300:
                s = math.sqrt(d)
                cv[j] = math.cosh(s * step)
                sv[j] = math.sinh(s * step) / s
                dv[j] = s * math.sinh(s * step)
            elif d < -1e-300:
                s = math.sqrt(-d)
                cv[j] = math.cos(s * step)
                sv[j] = math.sin(s * step) / s
                dv[j] = -s * math.sin(s * step)
            else:
                cv[j], sv[j], dv[j] = 1.0, step, 0.0
        cmat = (u * cv) @ u.conj().T
        smat = (u * sv) @ u.conj().T
        dmat = (u * dv) @ u.conj().T
        for _ in range(chunks):
            m, mp = cmat @ m + smat @ mp, dmat @ m + cmat @ mp
            if max(np.linalg.norm(m), np.linalg.norm(mp)) > tol.renorm_norm:
                q, _ = np.linalg.qr(np.vstack([m, mp]))
                m, mp = q[:n, :], q[n:, :]
    f, cond = _logderiv(m, mp)
    if not np.isfinite(cond) or cond > tol.endpoint_cond:
        raise SingularEndpointError(lam, cond)
    herm, _ = _symmetrize(f)
    return HermitianMatrix(herm, tol=np.inf)

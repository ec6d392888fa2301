"""Pure-numpy propagation kernel (fallback when the compiled core is absent).

Integrates the linear system M'' = (lambda I - V(x)) M as a stacked
(2N x N) first-order system with an embedded Dormand-Prince 5(4) pair,
QR-renormalizing the stacked frame to kill exponential growth.  The
boundary log-derivative F = M' M^{-1} is invariant under the right
multiplications the renormalization applies.

The batch axis vectorizes over trial spectral parameters: all lambdas in a
call share the (adaptively chosen) step sequence, with the error controller
keyed to the worst entry of the batch.  That trades some extra steps for
numpy-level throughput; the compiled backend integrates each lambda
independently instead.
"""

import numpy as np

from .model import KIND_BOX, KIND_GAUSSIAN, KIND_POSCHL_TELLER, KIND_TABULATED

BACKEND_NAME = "python"

# Dormand-Prince 5(4) tableau
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
DP_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_EDGE = 1e-10


def eval_profiles(pack, x: float) -> np.ndarray:
    """Scalar profile values g_k(x) for a packed potential."""
    kinds, params, _, tab_x, tab_y, tab_off = pack
    g = np.zeros(len(kinds))
    for k, kind in enumerate(kinds):
        if kind == KIND_BOX:
            height, left, right = params[k]
            if left < x < right:
                g[k] = height
            elif x == left or x == right:
                g[k] = 0.5 * height
        elif kind == KIND_GAUSSIAN:
            amp, center, width = params[k]
            g[k] = amp * np.exp(-((x - center) ** 2) / (2.0 * width * width))
        elif kind == KIND_POSCHL_TELLER:
            depth, center, width = params[k]
            g[k] = depth / np.cosh((x - center) / width) ** 2
        elif kind == KIND_TABULATED:
            lo, hi = tab_off[k], tab_off[k + 1]
            xs, ys = tab_x[lo:hi], tab_y[lo:hi]
            if xs[0] <= x <= xs[-1]:
                g[k] = np.interp(x, xs, ys)
    return g


def eval_potential(pack, x: float) -> np.ndarray:
    """V(x) = sum_k g_k(x) A_k from the packed term list."""
    weights = pack[2]
    n = weights.shape[1]
    v = np.zeros((n, n), dtype=complex)
    if len(weights) == 0:
        return v
    g = eval_profiles(pack, x)
    for k in range(len(weights)):
        if g[k] != 0.0:
            v += g[k] * weights[k]
    return v


def _rhs(pack, lams, x, y):
    """Stacked derivative: top' = bottom, bottom' = (lam I - V(x)) top."""
    n = y.shape[2]
    v = eval_potential(pack, x)
    out = np.empty_like(y)
    top = y[:, :n, :]
    out[:, :n, :] = y[:, n:, :]
    out[:, n:, :] = lams[:, None, None] * top - v[None, :, :] @ top
    return out


def _renorm(y, renorm_log):
    """Right-multiply each stacked frame by R^{-1} from its QR factorization."""
    q, r = np.linalg.qr(y)
    d = np.abs(np.diagonal(r, axis1=1, axis2=2))
    renorm_log += np.sum(np.log(np.maximum(d, 1e-300)), axis=1)
    return np.ascontiguousarray(q), renorm_log


def _wronskian_defect(y):
    n = y.shape[2]
    m, mp = y[:, :n, :], y[:, n:, :]
    w = np.matmul(m.conj().transpose(0, 2, 1), mp) - np.matmul(mp.conj().transpose(0, 2, 1), m)
    num = np.linalg.norm(w, axis=(1, 2))
    den = 1.0 + np.linalg.norm(m, axis=(1, 2)) * np.linalg.norm(mp, axis=(1, 2))
    return num / den


def integrate(
    pack,
    dim,
    lams,
    x0,
    x_end,
    breakpoints,
    record_nodes,
    rtol,
    atol,
    renorm_norm=1e6,
    renorm_every=40,
    max_steps=2_000_000,
    m0=None,
    mp0=None,
):
    """Propagate the stacked system from x0 to x_end for a batch of lambdas.

    Returns a dict with endpoint frames, recorded frames at ``record_nodes``,
    per-lambda renormalization logs and maximal Wronskian defects (checked at
    every renormalization checkpoint, before renormalizing).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    nl = lams.size
    n = dim
    y = np.zeros((nl, 2 * n, n), dtype=complex)
    if m0 is None:
        y[:, :n, :] = np.eye(n)
    else:
        y[:, :n, :] = m0
    if mp0 is not None:
        y[:, n:, :] = mp0

    record_nodes = np.asarray(record_nodes, dtype=float)
    records = np.zeros((record_nodes.size, nl, 2 * n, n), dtype=complex)
    renorm_log = np.zeros(nl)
    wmax = np.zeros(nl)
    rec_i = 0
    while rec_i < record_nodes.size and record_nodes[rec_i] <= x0:
        records[rec_i] = y
        rec_i += 1

    if x_end <= x0:
        return {
            "y_end": y,
            "records": records,
            "renorm_log": renorm_log,
            "wronskian_defect": wmax,
            "steps": 0,
        }

    stop_set = {float(x_end)}
    stop_set.update(float(b) for b in breakpoints if x0 < b < x_end)
    stop_set.update(float(t) for t in record_nodes if x0 < t <= x_end)
    stops = sorted(stop_set)
    is_break = {float(b) for b in breakpoints}

    lam_top = float(np.max(lams))
    h = min((x_end - x0) / 8.0, 0.25 / np.sqrt(lam_top + 1.0))
    x = x0
    k = [None] * 7
    k1_valid = False
    steps = 0
    accepted_since_renorm = 0

    for target in stops:
        seg_lo, seg_hi = x, target
        edge = _EDGE * max(1.0, abs(seg_hi))
        k1_valid = False
        while x < target:
            h = min(h, target - x)
            at_target = (target - x) <= h * (1 + 1e-12)
            if at_target:
                h = target - x
            if steps >= max_steps:
                raise RuntimeError(f"propagation exceeded {max_steps} steps at x={x:.6g}")
            steps += 1
            if not k1_valid:
                k[0] = _rhs(pack, lams, min(max(x, seg_lo + edge), seg_hi - edge), y)
                k1_valid = True
            for i in range(1, 7):
                yi = y + h * sum(DP_A[i][j] * k[j] for j in range(i))
                xi = x + DP_C[i] * h
                k[i] = _rhs(pack, lams, min(max(xi, seg_lo + edge), seg_hi - edge), yi)
            y5 = y + h * sum(DP_B5[j] * k[j] for j in range(7) if DP_B5[j] != 0.0)
            err_vec = h * sum(DP_ERR[j] * k[j] for j in range(7) if DP_ERR[j] != 0.0)
            sc = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
            err = np.sqrt(np.mean(np.abs(err_vec / sc) ** 2, axis=(1, 2)))
            err_max = float(np.max(err))
            if not np.isfinite(err_max):
                raise RuntimeError(f"non-finite state during propagation at x={x:.6g}")
            if err_max <= 1.0:
                x = target if at_target else x + h
                y = y5
                k[0] = k[6]  # FSAL
                accepted_since_renorm += 1
                norms = np.linalg.norm(y, axis=(1, 2))
                if np.max(norms) > renorm_norm or accepted_since_renorm >= renorm_every:
                    np.maximum(wmax, _wronskian_defect(y), out=wmax)
                    y, renorm_log = _renorm(y, renorm_log)
                    accepted_since_renorm = 0
                    k1_valid = False
            # on rejection k[0] still holds f(x, y), so FSAL state stays usable
            factor = 0.9 * err_max ** (-0.2) if err_max > 0 else 5.0
            h = h * min(5.0, max(0.2, factor))
        # arrived at the stop
        while rec_i < record_nodes.size and abs(record_nodes[rec_i] - target) <= 1e-12 * max(
            1.0, abs(target)
        ):
            records[rec_i] = y
            rec_i += 1
        if target in is_break:
            k1_valid = False

    np.maximum(wmax, _wronskian_defect(y), out=wmax)
    return {
        "y_end": y,
        "records": records,
        "renorm_log": renorm_log,
        "wronskian_defect": wmax,
        "steps": steps,
    }

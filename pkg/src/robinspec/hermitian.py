"""Dense small-N complex Hermitian matrix algebra.

Everything downstream (boundary matrices, potential samples, Riccati
matrices) funnels through this module.  The eigensolver is a cyclic Jacobi
iteration on the complex Hermitian matrix: matrices here are tiny (N <= 8),
so robustness and simplicity beat asymptotics.
"""

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import DomainError, HermitianDefectError


def _as_complex_square(entries) -> np.ndarray:
    a = np.array(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise HermitianDefectError(f"expected a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class HermitianMatrix:
    """Immutable N x N complex Hermitian matrix.

    Construction symmetrizes A <- (A + A*)/2 when the defect max|A - A*| is
    below the construction tolerance and rejects the input otherwise, so
    non-Hermitian drift cannot propagate.
    """

    a: np.ndarray

    def __init__(self, entries, tol: float = DEFAULT.hermitian_defect):
        a = _as_complex_square(entries)
        defect = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
        if defect > tol:
            raise HermitianDefectError(
                f"Hermiticity defect {defect:.3e} exceeds tolerance {tol:.3e}"
            )
        a = 0.5 * (a + a.conj().T)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.a))

    def __array__(self, dtype=None, copy=None):
        arr = self.a
        if dtype is not None:
            arr = arr.astype(dtype)
        if copy:
            arr = arr.copy()
        return arr


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending real eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray   # (N,) real, ascending
    eigenvectors: np.ndarray  # (N, N) complex, column k pairs with eigenvalue k


def _entries(a) -> np.ndarray:
    if isinstance(a, HermitianMatrix):
        return a.a
    return _as_complex_square(a)


def jacobi_eigh(a: np.ndarray, tol: float = DEFAULT.jacobi_offdiag, max_sweeps: int = 60):
    """Cyclic Jacobi diagonalization of a complex Hermitian matrix.

    Each (p, q) rotation first absorbs the phase of a[p, q] and then applies
    the classical real rotation that annihilates the off-diagonal pair.
    Returns (eigenvalues ascending, eigenvector columns).
    """
    a = np.array(_entries(a), dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n == 1:
        return np.array([a[0, 0].real]), v
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * sum(abs(a[p, q]) ** 2 for p in range(n - 1) for q in range(p + 1, n)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300 or r <= 1e-18 * scale:
                    continue
                phase = apq / r
                tau = (a[q, q].real - a[p, p].real) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = a[p, p].real, a[q, q].real
                # column update A <- A J with J[p,p]=c*phase, J[q,p]=-s, J[p,q]=s*phase, J[q,q]=c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * phase * colp - s * colq
                a[:, q] = s * phase * colp + c * colq
                # row update A <- J* A
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * np.conj(phase) * rowp - s * rowq
                a[q, :] = s * np.conj(phase) * rowp + c * rowq
                a[p, p] = app - t * r
                a[q, q] = aqq + t * r
                a[p, q] = 0.0
                a[q, p] = 0.0
                colp = v[:, p].copy()
                colq = v[:, q].copy()
                v[:, p] = c * phase * colp - s * colq
                v[:, q] = s * phase * colp + c * colq
    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eig(a, tol: Tolerances = DEFAULT) -> EigenDecomposition:
    """Spectral decomposition of a Hermitian matrix (ascending eigenvalues)."""
    w, v = jacobi_eigh(_entries(a), tol=tol.jacobi_offdiag)
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def trace_power(a, p: int) -> float:
    """Tr A^p for p in {1, 2, 3}; exactly real for Hermitian input."""
    m = _entries(a)
    if p == 1:
        return float(np.trace(m).real)
    if p == 2:
        # Tr A^2 = sum |a_jk|^2 for Hermitian A
        return float(np.sum(np.abs(m) ** 2))
    if p == 3:
        return float(np.trace(m @ m @ m).real)
    raise DomainError(f"trace_power supports p in {{1, 2, 3}}, got {p}")


def kernel_dim(a, tol: float) -> int:
    """Number of eigenvalues with |mu| <= tol."""
    if tol <= 0:
        raise DomainError("kernel_dim tolerance must be positive")
    w, _ = jacobi_eigh(_entries(a))
    return int(np.count_nonzero(np.abs(w) <= tol))


def opnorm(a) -> float:
    """Spectral norm (largest |eigenvalue|) of a Hermitian matrix."""
    w, _ = jacobi_eigh(_entries(a))
    return float(np.max(np.abs(w))) if w.size else 0.0

"""Declarative half-line problem description.

A potential is a finite sum of scalar profile x constant Hermitian weight,
V(x) = sum_k g_k(x) A_k.  That keeps Hermiticity and positivity checks
mechanical while covering decoupled channels, coupled matrices and sampled
data.  Profiles evaluate anywhere on the real line; box and tabulated
profiles vanish outside their declared support.

Convention: at a jump of a box profile the value is the half-height
(average of the one-sided limits).  Point values of an L^2 potential are
immaterial, and the midpoint convention keeps trapezoid-sampled
discretizations second-order accurate at grid-aligned edges.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import DomainError, UnboundedSupportError
from .hermitian import HermitianMatrix, jacobi_eigh, opnorm

# profile kind codes shared with the compiled kernel
KIND_BOX = 0
KIND_GAUSSIAN = 1
KIND_POSCHL_TELLER = 2
KIND_TABULATED = 3


@dataclass(frozen=True)
class Box:
    """Flat profile of given height on (left, right), half-height at the edges."""

    height: float
    left: float
    right: float

    def __post_init__(self):
        if not self.left < self.right:
            raise DomainError(f"box needs left < right, got [{self.left}, {self.right}]")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        edge = 1e-12 * max(1.0, abs(self.left), abs(self.right))
        inside = (x > self.left + edge) & (x < self.right - edge)
        on_edge = (np.abs(x - self.left) <= edge) | (np.abs(x - self.right) <= edge)
        out = np.where(inside, self.height, np.where(on_edge, 0.5 * self.height, 0.0))
        return out if out.ndim else float(out)

    def support_radius(self, eps):
        return self.right if abs(self.height) > eps else 0.0

    def peak(self):
        return abs(self.height)

    def breakpoints(self):
        return (self.left, self.right)

    def scaled(self, s):
        return Box(self.height * s * s, self.left / s, self.right / s)

    def reflected(self, b):
        return Box(self.height, b - self.right, b - self.left)

    def pack(self):
        return KIND_BOX, (self.height, self.left, self.right)


@dataclass(frozen=True)
class Gaussian:
    """amplitude * exp(-(x - center)^2 / (2 width^2))."""

    amplitude: float
    center: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise DomainError("gaussian width must be positive")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = self.amplitude * np.exp(-((x - self.center) ** 2) / (2.0 * self.width**2))
        return out if out.ndim else float(out)

    def support_radius(self, eps):
        if abs(self.amplitude) <= eps:
            return 0.0
        return self.center + self.width * math.sqrt(2.0 * math.log(abs(self.amplitude) / eps))

    def peak(self):
        return abs(self.amplitude)

    def breakpoints(self):
        return ()

    def scaled(self, s):
        return Gaussian(self.amplitude * s * s, self.center / s, self.width / s)

    def reflected(self, b):
        return Gaussian(self.amplitude, b - self.center, self.width)

    def pack(self):
        return KIND_GAUSSIAN, (self.amplitude, self.center, self.width)


@dataclass(frozen=True)
class PoschlTeller:
    """depth / cosh^2((x - center) / width)."""

    depth: float
    center: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise DomainError("poschl_teller width must be positive")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = self.depth / np.cosh((x - self.center) / self.width) ** 2
        return out if out.ndim else float(out)

    def support_radius(self, eps):
        if abs(self.depth) <= eps:
            return 0.0
        return self.center + self.width * math.acosh(math.sqrt(abs(self.depth) / eps))

    def peak(self):
        return abs(self.depth)

    def breakpoints(self):
        return ()

    def scaled(self, s):
        return PoschlTeller(self.depth * s * s, self.center / s, self.width / s)

    def reflected(self, b):
        return PoschlTeller(self.depth, b - self.center, self.width)

    def pack(self):
        return KIND_POSCHL_TELLER, (self.depth, self.center, self.width)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear interpolation of samples; zero outside the abscissae."""

    abscissae: tuple
    values: tuple

    def __post_init__(self):
        xs = np.asarray(self.abscissae, dtype=float)
        ys = np.asarray(self.values, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise DomainError("tabulated profile needs matching 1-d abscissae/values, length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise DomainError("tabulated abscissae must be strictly increasing")
        object.__setattr__(self, "abscissae", tuple(float(v) for v in xs))
        object.__setattr__(self, "values", tuple(float(v) for v in ys))

    def value(self, x):
        xs = np.asarray(self.abscissae)
        ys = np.asarray(self.values)
        x = np.asarray(x, dtype=float)
        out = np.interp(x, xs, ys, left=0.0, right=0.0)
        # np.interp clamps at the ends; enforce zero strictly outside
        out = np.where((x < xs[0]) | (x > xs[-1]), 0.0, out)
        return out if out.ndim else float(out)

    def support_radius(self, eps):
        ys = np.asarray(self.values)
        if abs(ys[-1]) > eps:
            raise UnboundedSupportError(
                f"tabulated profile does not decay below eps={eps:.3e} (last value {ys[-1]:.3e})"
            )
        exceeding = np.nonzero(np.abs(ys) > eps)[0]
        if exceeding.size == 0:
            return 0.0
        return self.abscissae[int(exceeding[-1]) + 1]

    def peak(self):
        return float(np.max(np.abs(self.values)))

    def breakpoints(self):
        return self.abscissae

    def scaled(self, s):
        return Tabulated(
            tuple(x / s for x in self.abscissae), tuple(v * s * s for v in self.values)
        )

    def reflected(self, b):
        return Tabulated(
            tuple(b - x for x in reversed(self.abscissae)), tuple(reversed(self.values))
        )

    def pack(self):
        return KIND_TABULATED, (0.0, 0.0, 0.0)


PROFILE_KINDS = {
    "box": Box,
    "gaussian": Gaussian,
    "poschl_teller": PoschlTeller,
    "tabulated": Tabulated,
}


@dataclass(frozen=True)
class PotentialSpec:
    """V(x) = sum_k g_k(x) A_k with Hermitian constant weights A_k."""

    dim: int
    terms: tuple  # of (profile, HermitianMatrix)
    require_psd: bool = False

    def __init__(self, dim, terms, require_psd=False):
        terms = tuple((p, w if isinstance(w, HermitianMatrix) else HermitianMatrix(w)) for p, w in terms)
        for _, w in terms:
            if w.dim != dim:
                raise DomainError(f"weight dimension {w.dim} != potential dimension {dim}")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "require_psd", bool(require_psd))

    def matrix(self, x) -> np.ndarray:
        """V(x) as a plain complex array."""
        v = np.zeros((self.dim, self.dim), dtype=complex)
        for profile, weight in self.terms:
            g = profile.value(float(x))
            if g != 0.0:
                v += g * weight.a
        return v

    def matrices(self, xs) -> np.ndarray:
        """V sampled on a vector of abscissae, shape (len(xs), N, N)."""
        xs = np.asarray(xs, dtype=float)
        out = np.zeros((xs.size, self.dim, self.dim), dtype=complex)
        for profile, weight in self.terms:
            g = np.asarray(profile.value(xs), dtype=float)
            out += g[:, None, None] * weight.a[None, :, :]
        return out

    def breakpoints(self):
        pts = sorted({float(b) for p, _ in self.terms for b in p.breakpoints()})
        return tuple(pts)

    def reflected(self, b: float) -> "PotentialSpec":
        """The potential seen from b looking left: x -> V(b - x)."""
        return PotentialSpec(
            self.dim,
            tuple((p.reflected(b), w) for p, w in self.terms),
            require_psd=self.require_psd,
        )

    def is_diagonal(self, tol=1e-14) -> bool:
        for _, w in self.terms:
            off = w.a - np.diag(np.diag(w.a))
            if np.max(np.abs(off), initial=0.0) > tol * max(1.0, np.max(np.abs(w.a))):
                return False
        return True

    def pack(self):
        """Flatten the term list for the integration kernels."""
        k = len(self.terms)
        kinds = np.zeros(k, dtype=np.int64)
        params = np.zeros((k, 3), dtype=np.float64)
        weights = np.zeros((k, self.dim, self.dim), dtype=complex)
        tab_x, tab_y, tab_off = [], [], [0]
        for i, (profile, weight) in enumerate(self.terms):
            kind, par = profile.pack()
            kinds[i] = kind
            params[i] = par
            weights[i] = weight.a
            if kind == KIND_TABULATED:
                tab_x.extend(profile.abscissae)
                tab_y.extend(profile.values)
            tab_off.append(len(tab_x))
        return (
            kinds,
            params,
            weights,
            np.asarray(tab_x, dtype=np.float64),
            np.asarray(tab_y, dtype=np.float64),
            np.asarray(tab_off, dtype=np.int64),
        )


def evaluate_potential(potential: PotentialSpec, x: float) -> HermitianMatrix:
    """Pointwise V(x) as a checked Hermitian matrix."""
    return HermitianMatrix(potential.matrix(x))


def _audit_grid(potential: PotentialSpec, points: int = 2048):
    """Dense sample abscissae covering the numerically relevant support."""
    radius = 0.0
    for profile, weight in potential.terms:
        if opnorm(weight) == 0.0 or profile.peak() == 0.0:
            continue
        try:
            radius = max(radius, profile.support_radius(1e-12 * profile.peak()))
        except UnboundedSupportError:
            radius = max(radius, profile.breakpoints()[-1])
    radius = max(radius, 1.0)
    xs = np.linspace(0.0, radius, points)
    xs = np.union1d(xs, [b for b in potential.breakpoints() if 0.0 <= b <= radius])
    return xs


def potential_opnorms(potential: PotentialSpec, xs) -> np.ndarray:
    vs = potential.matrices(xs)
    if potential.dim == 1:
        return np.abs(vs[:, 0, 0].real)
    return np.array([np.max(np.abs(jacobi_eigh(v)[0])) for v in vs])


def max_opnorm(potential: PotentialSpec) -> float:
    if not potential.terms:
        return 0.0
    xs = _audit_grid(potential)
    return float(np.max(potential_opnorms(potential, xs)))


def min_eigenvalue(potential: PotentialSpec, points: int = 2048) -> float:
    """Smallest eigenvalue of V(x) over a dense audit grid."""
    if not potential.terms:
        return 0.0
    xs = _audit_grid(potential, points)
    vs = potential.matrices(xs)
    return float(min(jacobi_eigh(v)[0][0] for v in vs))


def effective_support(potential: PotentialSpec, eps: float, samples: int = 4096) -> float:
    """Smallest sampled b with ||V(x)||_op <= eps for all sampled x > b."""
    if eps <= 0:
        raise DomainError("effective_support needs eps > 0")
    if not potential.terms:
        return 0.0
    nterms = len(potential.terms)
    radius = 0.0
    for profile, weight in potential.terms:
        wnorm = opnorm(weight)
        if wnorm == 0.0:
            continue
        radius = max(radius, profile.support_radius(eps / (nterms * wnorm)))
    if radius == 0.0:
        return 0.0
    xs = np.linspace(0.0, radius, samples)
    xs = np.union1d(xs, [b for b in potential.breakpoints() if 0.0 <= b <= radius])
    xs = np.union1d(xs, [radius])
    norms = potential_opnorms(potential, xs)
    exceeding = np.nonzero(norms > eps)[0]
    if exceeding.size == 0:
        return 0.0
    return float(xs[int(exceeding[-1])])


@dataclass(frozen=True)
class Problem:
    """Channel count, potential, Robin boundary matrix and truncation radius."""

    dim: int
    potential: PotentialSpec
    boundary: HermitianMatrix
    truncation_radius: float
    tail_tolerance: float
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.boundary.dim != self.dim or self.potential.dim != self.dim:
            raise DomainError("boundary / potential dimension mismatch")
        if self.truncation_radius < 0:
            raise DomainError("truncation radius must be nonnegative")

    def packed(self):
        if "pack" not in self._cache:
            self._cache["pack"] = self.potential.pack()
        return self._cache["pack"]

    def interior_breakpoints(self):
        b = self.truncation_radius
        return tuple(p for p in self.potential.breakpoints() if 0.0 < p < b)

    def reflected_packed(self):
        """Packed V(b - x) plus its interior breakpoints (backward sweeps)."""
        if "rpack" not in self._cache:
            b = self.truncation_radius
            refl = self.potential.reflected(b)
            breaks = tuple(p for p in refl.breakpoints() if 0.0 < p < b)
            self._cache["rpack"] = (refl.pack(), breaks)
        return self._cache["rpack"]

    def potential_scale(self) -> float:
        if "vmax" not in self._cache:
            self._cache["vmax"] = max_opnorm(self.potential)
        return self._cache["vmax"]

    def psd_ok(self) -> bool:
        """Audit: min eigenvalue of V(x) >= -1e-10 * max ||V|| on a dense grid."""
        if "psd" not in self._cache:
            scale = self.potential_scale()
            self._cache["psd"] = min_eigenvalue(self.potential) >= -1e-10 * max(scale, 1.0)
        return self._cache["psd"]


def build_problem(
    potential: PotentialSpec,
    boundary,
    truncation_radius: float | None = None,
    tail_tolerance: float = DEFAULT.tail_tolerance,
) -> Problem:
    """Assemble a problem, computing the truncation radius when not given.

    ``tail_tolerance`` is relative to max_x ||V(x)||; potentials with
    infinite tails are cut where the operator norm falls below it.
    """
    boundary = boundary if isinstance(boundary, HermitianMatrix) else HermitianMatrix(boundary)
    scale = max_opnorm(potential)
    eps = tail_tolerance * max(scale, 1e-30)
    support = effective_support(potential, eps) if potential.terms and scale > 0 else 0.0
    b = support if truncation_radius is None else float(truncation_radius)
    if b + 1e-12 < support:
        raise DomainError(
            f"truncation radius {b} cuts the potential (effective support {support:.6g})"
        )
    prob = Problem(
        dim=boundary.dim,
        potential=potential,
        boundary=boundary,
        truncation_radius=b,
        tail_tolerance=tail_tolerance,
    )
    if potential.require_psd and not prob.psd_ok():
        raise DomainError("potential flagged require_psd but is not positive semidefinite")
    return prob


def spectral_bound(prob: Problem) -> float:
    """Heuristic lambda_max: every negative eigenvalue -lambda has lambda < lambda_max.

    sup_x lambda_max(V(x)) + max(0, -lambda_min(boundary))^2 + 1.  Crude by
    design; the finite-difference oracle audits it on every test corpus.
    """
    vtop = 0.0
    if prob.potential.terms:
        xs = _audit_grid(prob.potential)
        vs = prob.potential.matrices(xs)
        vtop = max(0.0, float(max(jacobi_eigh(v)[0][-1] for v in vs)))
    smin = float(jacobi_eigh(prob.boundary.a)[0][0])
    return vtop + max(0.0, -smin) ** 2 + 1.0


def scaled_problem(prob: Problem, s: float) -> Problem:
    """Covariance transform V(x) -> s^2 V(sx), boundary -> s * boundary.

    Eigenvalues scale by s^2; both sides of the main spectral bound by s^3.
    """
    terms = tuple((p.scaled(s), w) for p, w in prob.potential.terms)
    pot = PotentialSpec(prob.dim, terms, require_psd=prob.potential.require_psd)
    return build_problem(
        pot,
        HermitianMatrix(s * prob.boundary.a),
        truncation_radius=prob.truncation_radius / s,
        tail_tolerance=prob.tail_tolerance,
    )


@dataclass(frozen=True)
class QuadraticFormSample:
    """Potential and boundary data sampled on a grid, ready for discretization."""

    grid: np.ndarray        # (m+1,) abscissae, 0 = x0 < ... < xm = L
    v_samples: np.ndarray   # (m+1, N, N)
    boundary: HermitianMatrix

    @classmethod
    def from_problem(cls, prob: Problem, h: float, L: float) -> "QuadraticFormSample":
        m = int(round(L / h))
        grid = np.arange(m + 1) * h
        return cls(grid=grid, v_samples=prob.potential.matrices(grid), boundary=prob.boundary)

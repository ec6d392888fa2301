"""Special functions and semiclassical phase-space constants.

Gamma uses the Lanczos approximation (g = 7, 9 coefficients; the classic
double-precision set, accurate to ~1e-13 relative over the range used
here).  docs/lanczos.md carries the regeneration script.

The phase-space constant for Riesz means of order gamma in dimension d is

    l_classical(gamma, d) = (2 pi)^-d * volume integral of (1 - |xi|^2)_+^gamma
                          = pi^(-d/2) 2^-d Gamma(gamma + 1) / Gamma(gamma + 1 + d/2).

Two labeling conventions for the constant produced by the monotonicity
lift circulate in the literature (subscripts gamma vs gamma + 1/2); the
Beta-ratio value (3/16) B(gamma - 3/2, 3) / B(gamma - 3/2, 5/2) equals
Gamma(gamma+1) / (2 sqrt(pi) Gamma(gamma+3/2)), i.e. l_classical(gamma, 1),
which is what this module returns; ``audit_identities`` checks it.
"""

import math

from .errors import DomainError

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma(x) for x > 0, relative accuracy ~1e-13."""
    if not x > 0:
        raise DomainError(f"gamma_fn needs x > 0, got {x}")
    if x < 0.5:
        # reflection keeps the Lanczos series in its accurate range
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    x = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def beta_fn(p: float, q: float) -> float:
    """B(p, q) = Gamma(p) Gamma(q) / Gamma(p + q), p, q > 0."""
    if not (p > 0 and q > 0):
        raise DomainError(f"beta_fn needs positive arguments, got ({p}, {q})")
    return gamma_fn(p) * gamma_fn(q) / gamma_fn(p + q)


def l_classical(gamma: float, d: int) -> float:
    """Semiclassical constant for Riesz order gamma in dimension d."""
    if gamma < 0:
        raise DomainError(f"l_classical needs gamma >= 0, got {gamma}")
    if d < 1 or int(d) != d:
        raise DomainError(f"l_classical needs a positive integer dimension, got {d}")
    return math.pi ** (-d / 2.0) * 2.0**-d * gamma_fn(gamma + 1.0) / gamma_fn(gamma + 1.0 + d / 2.0)


def lifted_constant(gamma: float) -> float:
    """(3/16) B(gamma - 3/2, 3) / B(gamma - 3/2, 5/2) for gamma > 3/2.

    This is the constant the eigenvalue-sum lift produces; it coincides
    with l_classical(gamma, 1), as ``audit_identities`` verifies.
    """
    if gamma <= 1.5:
        raise DomainError("lifted_constant needs gamma > 3/2")
    return 0.1875 * beta_fn(gamma - 1.5, 3.0) / beta_fn(gamma - 1.5, 2.5)


def lift_ratio(gamma: float) -> float:
    """B(gamma - 3/2, 2) / B(gamma - 3/2, 5/2); tends to 1 as gamma -> 3/2+."""
    if gamma < 1.5:
        raise DomainError("lift_ratio needs gamma >= 3/2")
    if gamma == 1.5:
        return 1.0
    return beta_fn(gamma - 1.5, 2.0) / beta_fn(gamma - 1.5, 2.5)


def audit_identities(gammas=(1.5 + 1e-8, 1.6, 2.0, 2.5, 3.0, 4.5, 6.0)):
    """Identity checks backing the inequality constants.

    Returns a list of dict records with name, parameters, both sides and
    the relative defect; used by the CLI constants audit and the tests.
    """
    checks = []

    def record(name, params, lhs, rhs):
        defect = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        checks.append(
            {"name": name, "params": params, "lhs": lhs, "rhs": rhs, "rel_defect": defect}
        )

    record("l_classical_3/2_1", {"gamma": 1.5, "d": 1}, l_classical(1.5, 1), 3.0 / 16.0)
    record("l_classical_0_1", {"gamma": 0.0, "d": 1}, l_classical(0.0, 1), 1.0 / math.pi)
    for d in (2, 3):
        for g in (1.5, 2.0, 3.0):
            record(
                "product_identity",
                {"gamma": g, "d": d},
                l_classical(g, d - 1) * l_classical(g + (d - 1) / 2.0, 1),
                l_classical(g, d),
            )
    for g in gammas:
        record(
            "lifted_constant_identity",
            {"gamma": g},
            lifted_constant(g),
            l_classical(g, 1),
        )
    return checks

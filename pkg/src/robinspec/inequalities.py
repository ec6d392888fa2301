"""Spectral-inequality evaluation: LHS, RHS, slack and verdict.

Conventions:

* Spectra enter as distinct eigenvalues with multiplicities; the first
  entry is the ground level (largest lambda).
* An empty spectrum contributes LHS = 0 -- the ground-level terms are
  dropped, and the bound degenerates to 0 <= RHS.  (Hypothesis-satisfying
  problems with a negative boundary eigenvalue always bind a state, and a
  boundary matrix without negative spectrum cannot make the RHS negative,
  so this convention never manufactures a violation.)
* Verdicts are claimed only when every hypothesis flag holds; otherwise
  the report is downgraded to "outside_hypotheses".
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .constants import l_classical, lift_ratio
from .errors import DomainError
from .hermitian import jacobi_eigh, trace_power
from .model import Problem, max_opnorm
from .quadrature import integrate

HOLDS = "holds"
VIOLATED = "violated"
SATURATED = "saturated"
OUTSIDE = "outside_hypotheses"


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    verdict: str
    hypothesis_flags: dict
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "verdict": self.verdict,
            "hypothesis_flags": dict(self.hypothesis_flags),
            "details": dict(self.details),
        }


@dataclass(frozen=True)
class PotentialIntegrals:
    tr_v2: float                 # integral of Tr V^2
    gamma: float | None = None
    tr_v_power: float | None = None  # integral of Tr V^(gamma + 1/2)


def _report(name, lhs, rhs, flags, tol: Tolerances, params=None, details=None):
    scale = max(abs(lhs), abs(rhs), 1.0)
    slack = rhs - lhs
    if not all(flags.values()):
        verdict = OUTSIDE
    elif abs(slack) <= tol.saturation_factor * scale:
        verdict = SATURATED
    elif slack >= -tol.verdict_factor * scale:
        verdict = HOLDS
    else:
        verdict = VIOLATED
    return InequalityReport(
        name=name,
        lhs=float(lhs),
        rhs=float(rhs),
        verdict=verdict,
        hypothesis_flags=dict(flags),
        params=params or {},
        details=details or {},
    )


def potential_integrals(prob: Problem, gamma: float | None = None,
                        tol: Tolerances = DEFAULT) -> PotentialIntegrals:
    """Adaptive quadrature of Tr V^2 and (optionally) Tr V^(gamma + 1/2).

    Matrix powers act on eigenvalues pointwise; tiny negative eigenvalues
    (>= -1e-12 * scale) are clamped to zero, genuinely indefinite samples
    raise for non-integer powers.
    """
    pot = prob.potential
    b = prob.truncation_radius
    if not pot.terms or b == 0.0:
        return PotentialIntegrals(tr_v2=0.0, gamma=gamma, tr_v_power=0.0 if gamma else None)
    scale = max(max_opnorm(pot), 1e-30)
    abs_tol = tol.quad_abs * scale * scale * max(b, 1.0)
    breaks = pot.breakpoints()

    def tr_v2_fn(xs):
        vs = pot.matrices(xs)
        return np.einsum("kij,kij->k", vs, vs.conj()).real

    tr_v2 = integrate(tr_v2_fn, 0.0, b, breaks, abs_tol=abs_tol)
    if gamma is None:
        return PotentialIntegrals(tr_v2=tr_v2)

    power = gamma + 0.5
    clamp = 1e-12 * max(scale, 1.0)
    integer_power = abs(power - round(power)) < 1e-12

    def tr_pow_fn(xs):
        vs = pot.matrices(xs)
        out = np.empty(len(vs))
        for i, v in enumerate(vs):
            w, _ = jacobi_eigh(v)
            if w[0] < -clamp and not integer_power:
                raise DomainError(
                    f"indefinite potential sample (min eig {w[0]:.3e}) under fractional power"
                )
            w = np.clip(w, 0.0, None) if not integer_power else w
            out[i] = float(np.sum(np.abs(w) ** power if integer_power else w**power))
        return out

    abs_tol_p = tol.quad_abs * scale**power * max(b, 1.0)
    tr_pow = integrate(tr_pow_fn, 0.0, b, breaks, abs_tol=abs_tol_p)
    return PotentialIntegrals(tr_v2=tr_v2, gamma=gamma, tr_v_power=tr_pow)


def _riesz_sum(spec, power):
    """Sum over non-ground levels of multiplicity * lambda^power."""
    return sum(e.multiplicity * e.lam**power for e in spec.entries[1:])


def _trs3_nonpos(prob):
    t3 = trace_power(prob.boundary, 3)
    norm = np.linalg.norm(prob.boundary.a)
    return t3 <= 1e-12 * (1.0 + norm**3)


def lt_main(spec, prob: Problem, tol: Tolerances = DEFAULT) -> InequalityReport:
    """Main bound: (3/4) l1 Tr S + (1/2)(2 k1 - N) l1^(3/2) + sum_{n>=2} k_n l_n^(3/2)
    <= (3/16) int Tr V^2 + (1/4) Tr S^3."""
    n = prob.dim
    tr_s = trace_power(prob.boundary, 1)
    tr_s3 = trace_power(prob.boundary, 3)
    if spec.entries:
        lam1 = spec.entries[0].lam
        kap1 = spec.entries[0].multiplicity
        lhs = 0.75 * lam1 * tr_s + 0.5 * (2 * kap1 - n) * lam1**1.5 + _riesz_sum(spec, 1.5)
    else:
        lhs = 0.0
    ints = potential_integrals(prob, tol=tol)
    rhs = 0.1875 * ints.tr_v2 + 0.25 * tr_s3
    flags = {"psd_ok": prob.psd_ok()}
    details = {"tr_v2": ints.tr_v2, "tr_s": tr_s, "tr_s3": tr_s3,
               "empty_spectrum": not spec.entries}
    return _report("lt_main", lhs, rhs, flags, tol, details=details)


def lt_s_nonpos(spec, prob: Problem, tol: Tolerances = DEFAULT) -> InequalityReport:
    """Same LHS with the boundary cube dropped; needs Tr S^3 <= 0."""
    base = lt_main(spec, prob, tol)
    tr_s3 = base.details["tr_s3"]
    rhs = 0.1875 * base.details["tr_v2"]
    flags = {"psd_ok": prob.psd_ok(), "trS3_nonpos": _trs3_nonpos(prob)}
    return _report("lt_s_nonpos", base.lhs, rhs, flags, tol, details=base.details)


def aizenman_lieb(spec, prob: Problem, gamma: float, tol: Tolerances = DEFAULT) -> InequalityReport:
    """Riesz means of order gamma >= 3/2 via the monotonicity lift."""
    if gamma < 1.5:
        raise DomainError(f"aizenman_lieb needs gamma >= 3/2, got {gamma}")
    n = prob.dim
    tr_s = trace_power(prob.boundary, 1)
    ratio = lift_ratio(gamma)
    if spec.entries:
        lam1 = spec.entries[0].lam
        kap1 = spec.entries[0].multiplicity
        lhs = (
            ratio * 0.75 * lam1 ** (gamma - 0.5) * tr_s
            + 0.5 * (2 * kap1 - n) * lam1**gamma
            + _riesz_sum(spec, gamma)
        )
    else:
        lhs = 0.0
    ints = potential_integrals(prob, gamma=gamma, tol=tol)
    rhs = l_classical(gamma, 1) * ints.tr_v_power
    flags = {
        "psd_ok": prob.psd_ok(),
        "trS3_nonpos": _trs3_nonpos(prob),
        "gamma_ok": gamma >= 1.5,
    }
    details = {"lift_ratio": ratio, "tr_v_power": ints.tr_v_power}
    return _report("aizenman_lieb", lhs, rhs, flags, tol, params={"gamma": gamma}, details=details)


def neumann_scalar(spec, prob: Problem, gamma: float, tol: Tolerances = DEFAULT) -> InequalityReport:
    """Scalar Neumann bound: (1/2) l1^gamma + sum_{n>=2} l_n^gamma <= RHS.

    The boundary condition affects only the first eigenvalue here.
    """
    if gamma < 1.5:
        raise DomainError(f"neumann_scalar needs gamma >= 3/2, got {gamma}")
    lhs = 0.0
    if spec.entries:
        lhs = 0.5 * spec.entries[0].multiplicity * spec.entries[0].lam**gamma + _riesz_sum(
            spec, gamma
        )
    ints = potential_integrals(prob, gamma=gamma, tol=tol)
    rhs = l_classical(gamma, 1) * ints.tr_v_power
    flags = {
        "scalar_ok": prob.dim == 1,
        "robin_zero": float(np.max(np.abs(prob.boundary.a))) <= 1e-14,
        "psd_ok": prob.psd_ok(),
        "gamma_ok": gamma >= 1.5,
    }
    return _report("neumann_scalar", lhs, rhs, flags, tol, params={"gamma": gamma})


def _is_diagonal_problem(prob):
    s = prob.boundary.a
    off = float(np.max(np.abs(s - np.diag(np.diag(s))), initial=0.0))
    return off <= 1e-14 * max(1.0, float(np.max(np.abs(s)))) and prob.potential.is_diagonal()


def channels(per_channel_specs, prob: Problem, tol: Tolerances = DEFAULT) -> InequalityReport:
    """Decoupled bound: every channel's first eigenvalue feels its own
    Robin parameter.  Only valid for diagonal boundary and potential."""
    if len(per_channel_specs) != prob.dim:
        raise DomainError("need one channel spectrum per dimension")
    sigmas = np.real(np.diag(prob.boundary.a))
    lhs = 0.0
    for j, cspec in enumerate(per_channel_specs):
        if not cspec.entries:
            continue
        lam1 = cspec.entries[0].lam
        lhs += 0.75 * lam1 * sigmas[j] + 0.5 * lam1**1.5 + _riesz_sum(cspec, 1.5)
    ints = potential_integrals(prob, tol=tol)
    tr_s3 = trace_power(prob.boundary, 3)
    rhs = 0.1875 * ints.tr_v2 + 0.25 * tr_s3
    flags = {"diagonal_ok": _is_diagonal_problem(prob), "psd_ok": prob.psd_ok()}

    # side-by-side comparison with the coupled bound on the joint spectrum
    joint = _merge_channel_spectra(per_channel_specs, tol)
    joint_report = lt_main(joint, prob, tol)
    details = {
        "lt_main_lhs": joint_report.lhs,
        "lt_main_rhs": joint_report.rhs,
        "lt_main_slack": joint_report.slack,
        "lt_main_verdict": joint_report.verdict,
    }
    return _report("channels", lhs, rhs, flags, tol, details=details)


def _merge_channel_spectra(per_channel_specs, tol: Tolerances):
    """Union of channel spectra as one Spectrum (coincident levels merged)."""
    from .spectrum import SpectralLine, Spectrum

    pool = []
    for cspec in per_channel_specs:
        pool.extend((e.lam, e.multiplicity) for e in cspec.entries)
    pool.sort(reverse=True)
    scale = pool[0][0] if pool else 1.0
    merged = []
    for lam, mult in pool:
        if merged and merged[-1][0] - lam <= tol.cluster_factor * max(scale, 1.0):
            merged[-1][1] += mult
        else:
            merged.append([lam, mult])
    return Spectrum(
        entries=tuple(SpectralLine(lam=v, multiplicity=m) for v, m in merged),
        resolution_limited=0,
    )

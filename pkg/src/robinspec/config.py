"""Central tolerance configuration.

Every numeric threshold used by the solvers lives here so that a single
record can be overridden (CLI ``--tol-*`` flags map onto these fields).
Factors suffixed ``_factor`` are relative to a problem-derived scale; the
others are absolute.
"""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    # construction / linear algebra
    hermitian_defect: float = 1e-12     # max |A - A*| accepted at construction
    jacobi_offdiag: float = 1e-14       # Jacobi sweep stop, relative to ||A||
    # adaptive integration
    rk_rtol: float = 1e-10
    rk_atol: float = 1e-12
    renorm_norm: float = 1e6            # renormalize when ||[M; M']|| exceeds this
    renorm_every: int = 40              # and unconditionally every this many steps
    endpoint_cond: float = 1e12         # M(b) condition number beyond which we give up
    pole_norm: float = 1e8              # Riccati blow-up detector
    # root search
    grid_points: int = 400
    lambda_min_factor: float = 1e-9     # search floor, relative to spectral bound
    root_rel: float = 1e-10             # bisection relative tolerance on lambda
    cluster_factor: float = 1e-7        # coincident-root merge, relative to spectral bound
    mult_factor: float = 1e-6           # kernel dimension tolerance, x (1 + ||F(b)||)
    refine_depth: int = 4               # automatic grid refinement levels
    # verdicts
    verdict_factor: float = 1e-7        # x max(|lhs|, |rhs|, 1)
    saturation_factor: float = 1e-6
    # quadrature
    quad_abs: float = 1e-10             # absolute tolerance, x integrand scale
    # problem setup
    tail_tolerance: float = 1e-10       # potential tail cut, relative to max ||V||

    def override(self, **kwargs) -> "Tolerances":
        """Return a copy with the given fields replaced."""
        return replace(self, **kwargs)


DEFAULT = Tolerances()

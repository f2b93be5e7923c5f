"""Numerical certification of Hardy/Rellich-type inequalities on
constant-curvature space forms via Riccati and dual Riccati pairs."""

from .expr import (Bindings, Expr, differentiate, evaluate, fd_check,  # noqa: F401
                   parse)
from .geometry import (RadialTestFunction, SpaceForm, big_l, ct,  # noqa: F401
                       make_bump, make_powerlaw, radial_laplacian,
                       separated_laplacian, volume_weight)
from .pairs import (PairSpec, PositivityReport, ResidualReport,  # noqa: F401
                    bessel_pair_residual, bessel_potential_residual,
                    positivity_polynomial_roots, disconjugacy_check,
                    dual_riccati_residual, dual_to_primal, e1, e2,
                    from_bessel_pair, from_bessel_potential, primal_to_dual,
                    bessel_pairs_from_potential, riccati_residual, scan_positivity)
from .catalog import (build_entry, classical_euclidean, ell_potential,  # noqa: F401
                      final_combined, hyperbolic_interpolation,
                      hyperbolic_lower, iterated_log_potential,
                      chain_from_potential)
from .verify import (BatchSpec, InequalityCase, QuadratureResult,  # noqa: F401
                     VerificationReport, integrate, lhs_delta_sq,
                     rhs_weighted, verify_case, verify_chain)
from .sharpness import (SharpnessEstimate, estimate_constant,  # noqa: F401
                        rayleigh_quotient)

__version__ = "0.1.0"

"""coklab: fluctuations of cokernels of random triangular integer matrices.

Simulates random lower triangular matrices with i.i.d. integer entries,
extracts the p-power torsion statistics of their cokernels, and checks
them against the limiting fluctuation law (explicit pmf, exponential
moments, closed-form and estimated intensity parameters).
"""

from .entrydist import (EntryDist, make_symmetric_dist, parse_dist,
                        spectral_gap, uniform_dist, vanish_prob)
from .errors import (CoklabError, InstanceTooLargeError, NumericalError,
                     ResourceGuardError, ValidationError)
from .estimators import (EstimateResult, estimate_chi0, estimate_hom_moment,
                         exact_moment_symmetric)
from .pgroup import (brute_force_hom_count, brute_force_maximal_chains,
                     conjugate, group_order_exponent, hom_count_exponent,
                     maximal_chain_count)
from .plinalg import (CokernelType, TriMatrix, corank_mod_p,
                      exact_snf_valuations, invariant_valuations,
                      rank_profile)
from .simulate import (ExperimentConfig, FitReport, FluctuationHistogram,
                       compare_moments, compare_to_theory, run_experiment)
from .theory import (TheoryParams, centering, chi0_symmetric, chi_from_zeta,
                     fluctuation_moment, fluctuation_pmf, zeta_from_n)

__version__ = "0.1.0"

__all__ = [
    "CokernelType", "CoklabError", "EntryDist", "EstimateResult",
    "ExperimentConfig", "FitReport", "FluctuationHistogram",
    "InstanceTooLargeError", "NumericalError", "ResourceGuardError",
    "TheoryParams", "TriMatrix", "ValidationError",
    "brute_force_hom_count", "brute_force_maximal_chains", "centering",
    "chi0_symmetric", "chi_from_zeta", "compare_moments",
    "compare_to_theory", "conjugate", "corank_mod_p", "estimate_chi0",
    "estimate_hom_moment", "exact_moment_symmetric", "exact_snf_valuations",
    "fluctuation_moment", "fluctuation_pmf", "group_order_exponent",
    "hom_count_exponent", "invariant_valuations", "make_symmetric_dist",
    "maximal_chain_count", "parse_dist", "rank_profile", "run_experiment",
    "spectral_gap", "uniform_dist", "vanish_prob", "zeta_from_n",
]

"""Dense interior point solver for complex semidefinite programs."""
from .certificates import check_certificates
from .kernels import HAVE_EXTENSION, default_backend
from .problem import InconsistentConstraintsError, RankDeficientError, SdpProblem
from .solver import INFEASIBLE, MAX_ITER, NUMERICAL, OPTIMAL, SdpSolution, solve_sdp

__all__ = [
    "SdpProblem", "SdpSolution", "solve_sdp", "check_certificates",
    "InconsistentConstraintsError", "RankDeficientError",
    "OPTIMAL", "INFEASIBLE", "MAX_ITER", "NUMERICAL",
    "HAVE_EXTENSION", "default_backend",
]

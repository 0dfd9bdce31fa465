"""Alternating linearization methods for minimizing f(x) + g(x).

Basic (ALM, ALM-S), accelerated (FALM, FALM-S) and augmented Lagrangian
(ADAL, SADAL) splitting solvers, together with ISTA/FISTA baselines,
Nesterov smoothing of the l1 and nuclear norms, and the lasso, deblurring and
robust PCA problem families they are benchmarked on.
"""

from altlin.objective import FunctionHandle, SplitObjective
from altlin.solvers import (
    Continuation,
    DivergenceError,
    RunTrace,
    SolverConfig,
    SOLVERS,
    run_adal,
    run_alm,
    run_alm_s,
    run_alm_s_equiv,
    run_falm,
    run_falm_s,
    run_fista,
    run_ista,
    run_sadal,
)

__version__ = "0.1.0"

__all__ = [
    "Continuation",
    "DivergenceError",
    "FunctionHandle",
    "RunTrace",
    "SOLVERS",
    "SolverConfig",
    "SplitObjective",
    "run_adal",
    "run_alm",
    "run_alm_s",
    "run_alm_s_equiv",
    "run_falm",
    "run_falm_s",
    "run_fista",
    "run_ista",
    "run_sadal",
]

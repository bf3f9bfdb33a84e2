"""Cucker-Smale flocking laboratory.

Continuous and discrete alignment models, sufficient-condition checkers,
closed-form two-particle solutions, leadership graph tools and mean-field
convergence studies.  The pairwise kernels run in a compiled extension when it
is built; ``flockbench.BACKEND`` reports which implementation is active.
"""

from ._backend import BACKEND
from .analysis import (
    ConditionReport,
    Outcome,
    OutcomeLabel,
    check_bonding,
    check_discrete,
    check_hydro,
    check_motsch_tadmor,
    check_symmetric,
    classify_outcome,
    energy,
    energy_production,
    fit_decay_rate,
    lyapunov_pm,
)
from .core import (
    AgentState,
    DiagnosticsRecord,
    Ensemble,
    Kernel,
    diameters,
    eval_kernel,
    kernel_integral,
    kernel_tail_integral,
    sup_norms,
)
from .errors import (
    CollisionError,
    ConfigurationError,
    DomainError,
    FlockbenchError,
    ModelError,
    SingularWeightError,
    StabilityError,
)
from .models_ct import CtModel, integrate
from .models_dt import DtModel, flocking_matrix, simulate, step
from .topology import Digraph, SwitchingSignal

__version__ = "0.1.0"

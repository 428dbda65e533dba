"""Central numerical tolerances.

Every validation and verification threshold used by the library lives here so
that a tolerance is never duplicated with drifting values across modules.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-12        # max |A - A^dag| accepted for Hermitian inputs
    trace: float = 1e-12              # |tr rho - 1| for density matrices
    psd: float = 1e-10                # magnitude of negative eigenvalues tolerated
    unitarity: float = 1e-10          # max |U^dag U - 1|
    eig_residual: float = 1e-10       # max |A V - V diag(w)| for eigendecompositions
    phase_floor: float = 1e-12        # "first nonzero component" threshold for phase fixing
    completeness: float = 1e-10       # Kraus completeness defect
    prob_sum: float = 1e-12           # probability vector normalization
    prob_norm: float = 1e-10          # enumerated trajectory-probability normalization
    eig_floor: float = 1e-14          # eigenvalue floor inside matrix/classical logs
    support: float = 1e-12            # tolerated mass outside a reference support
    stationary_residual: float = 1e-10
    stationary_gap: float = 1e-8      # required isolation of the fixed-point eigenvalue
    zero_prob: float = 1e-300         # probabilities below this are excluded from log sums
    root_residual: float = 1e-13      # residual target for inverse_xtanhx
    bound_slack: float = 1e-9         # tolerated numerical slack on bound margins
    nonneg: float = 1e-8              # tolerated negativity of entropy-like trajectory sums
    detailed_balance: float = 1e-10   # jump-operator pairing defect
    degeneracy: float = 1e-10         # minimal level spacing for nondegenerate spectra
    resonance: float = 1e-10          # energy mismatch tolerated in resonant couplings
    step_budget: float = 1e-8         # (|H_eff| T)^2 / steps budget for no-jump stepping
    ode_budget: float = 1e-9          # global error budget for fixed-step RK4
    trace_drift: float = 1e-9         # trace drift tolerated over an ODE integration
    positivity_drift: float = 1e-8    # eigenvalue negativity tolerated after integration


TOL = Tolerances()

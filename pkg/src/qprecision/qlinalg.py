"""Dense complex linear algebra and quantum-information primitives.

Everything operates on plain complex numpy arrays.  Inputs that claim a
property (Hermitian, density matrix, probability vector) are validated
against the central tolerances; failures raise typed errors instead of
letting garbage propagate.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, DimError, DomainError, HermiticityError
from .tolerances import TOL

__all__ = [
    "as_cmatrix",
    "hermiticity_defect",
    "require_hermitian",
    "require_density_matrix",
    "require_prob_vector",
    "herm_eig",
    "expm_i_hermitian",
    "kron",
    "partial_trace_env",
    "gibbs_state",
    "vn_entropy",
    "quantum_rel_entropy",
]


def as_cmatrix(a) -> np.ndarray:
    """Coerce to a square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimError(f"expected a square matrix, got shape {m.shape}")
    return m


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.abs(a - a.conj().T).max())


def require_hermitian(a, *, what: str = "matrix") -> np.ndarray:
    """Validate Hermiticity and return the symmetrized matrix."""
    m = as_cmatrix(a)
    defect = hermiticity_defect(m)
    if defect > TOL.hermiticity:
        raise HermiticityError(f"{what} is not Hermitian: defect {defect:.3e}")
    return 0.5 * (m + m.conj().T)


def require_density_matrix(rho, *, what: str = "state") -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity of a density matrix."""
    m = require_hermitian(rho, what=what)
    tr = m.trace()
    if abs(tr - 1.0) > TOL.trace:
        raise DimError(f"{what} trace is {tr:.15g}, expected 1")
    wmin = float(np.linalg.eigvalsh(m).min())
    if wmin < -TOL.psd:
        raise DomainError(f"{what} has negative eigenvalue {wmin:.3e}")
    return m


def require_prob_vector(p, n: int | None = None, *, what: str = "probabilities") -> np.ndarray:
    v = np.asarray(p, dtype=float).ravel()
    if n is not None and v.size != n:
        raise DimError(f"{what}: expected length {n}, got {v.size}")
    if v.min() < -TOL.prob_sum:
        raise DomainError(f"{what}: negative entry {v.min():.3e}")
    s = v.sum()
    if abs(s - 1.0) > TOL.prob_sum:
        raise DomainError(f"{what}: sum is {s:.15g}, expected 1")
    return np.clip(v, 0.0, None)


def herm_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with a fixed convention.

    Eigenvalues ascend.  Each eigenvector is rescaled so that its first
    component of magnitude above the phase floor is real positive, pinning
    the output to a reproducible value (up to LAPACK's deterministic basis
    choice inside degenerate eigenspaces).
    """
    m = require_hermitian(a)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"Hermitian eigensolver failed: {exc}") from exc
    v = np.array(v, copy=True)
    for k in range(v.shape[1]):
        col = v[:, k]
        nz = np.flatnonzero(np.abs(col) > TOL.phase_floor)
        pivot = col[nz[0]] if nz.size else col[int(np.abs(col).argmax())]
        v[:, k] = col * (pivot.conjugate() / abs(pivot))
    return w, v


def expm_i_hermitian(h, t: float) -> np.ndarray:
    """Unitary exp(-i h t) for Hermitian h, via spectral decomposition."""
    w, v = herm_eig(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def kron(a, b) -> np.ndarray:
    """Kronecker product with the first factor on the slow index."""
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def partial_trace_env(rho, d_s: int, d_e: int) -> np.ndarray:
    """Trace out the fast (environment) factor of a d_s*d_e joint operator."""
    m = as_cmatrix(rho)
    if m.shape[0] != d_s * d_e:
        raise DimError(f"joint dimension {m.shape[0]} != {d_s}*{d_e}")
    return np.einsum("abcb->ac", m.reshape(d_s, d_e, d_s, d_e))


def gibbs_state(h, beta: float) -> np.ndarray:
    """Thermal state exp(-beta h)/Z, computed shift-stably in the eigenbasis."""
    if beta < 0:
        raise DomainError(f"inverse temperature must be >= 0, got {beta}")
    w, v = herm_eig(h)
    x = np.exp(-beta * (w - w.min()))
    x /= x.sum()
    return (v * x) @ v.conj().T


def vn_entropy(rho) -> float:
    """Von Neumann entropy -tr(rho ln rho) in nats, eigenvalues floored at 0."""
    m = require_density_matrix(rho)
    w = np.linalg.eigvalsh(m)
    w = w[w > TOL.eig_floor]
    return max(float(-(w * np.log(w)).sum()), 0.0)


def quantum_rel_entropy(rho, sigma) -> float:
    """Relative entropy tr rho (ln rho - ln sigma) in nats.

    Returns math.inf when rho carries more than the support tolerance of
    mass outside the numerical support of sigma.
    """
    r = require_density_matrix(rho, what="rho")
    s = require_density_matrix(sigma, what="sigma")
    if r.shape != s.shape:
        raise DimError(f"shape mismatch {r.shape} vs {s.shape}")
    rw = np.linalg.eigvalsh(r)
    sw, sv = herm_eig(s)

    null = sw <= TOL.eig_floor
    diag_in_s = np.real(np.einsum("ij,jk,ki->i", sv.conj().T, r, sv))
    if np.any(null):
        mass = float(diag_in_s[null].sum())
        if mass > TOL.support:
            return math.inf

    rw_pos = rw[rw > TOL.eig_floor]
    t_rho = float((rw_pos * np.log(rw_pos)).sum())
    sw_floored = np.clip(sw, TOL.eig_floor, None)
    t_cross = float((diag_in_s * np.log(sw_floored)).sum())
    return t_rho - t_cross

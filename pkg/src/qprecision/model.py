"""Repeated-interaction models and their interaction-round maps.

A model is a system coupled once per round to a fresh environment copy for a
time tau; measuring every environment before and after its round turns the
round unitary into a labeled Kraus family, which is all the trajectory layer
needs.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import qlinalg
from .errors import (
    ConfigError,
    ConvergenceError,
    DegeneracyError,
    DimError,
    DomainError,
    KrausError,
    NonUniqueStationaryError,
    ResonanceError,
    SupportError,
)
from .tolerances import TOL

__all__ = [
    "MODEL_SCHEMA",
    "ModelSpec",
    "KrausSet",
    "build_model",
    "total_hamiltonian",
    "total_unitary",
    "env_energies",
    "gibbs_env_probs",
    "forward_kraus",
    "backward_kraus",
    "channel_apply",
    "transfer_matrix",
    "stationary_state",
    "nearest_fixed_point",
    "thermal_operation_model",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

MODEL_SCHEMA = "qprecision-model/1"


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ModelSpec:
    """One repeated-interaction model.

    h_i is the full interaction term on the joint space (coupling strength
    included); lam records the scalar coupling for reporting.  The
    environment Hamiltonian must be diagonal: its basis is the measurement
    basis.  Use build_model() to assemble specs from factored interactions
    or non-diagonal environment input.
    """

    d_s: int
    d_e: int
    h_s: np.ndarray
    h_e: np.ndarray
    h_i: np.ndarray
    lam: float
    beta: float
    tau: float
    n_rounds: int

    def __post_init__(self):
        if self.d_s < 2 or self.d_e < 2:
            raise DimError(f"need d_s, d_e >= 2, got {self.d_s}, {self.d_e}")
        if self.tau <= 0:
            raise DomainError(f"interaction duration must be > 0, got {self.tau}")
        if self.beta < 0:
            raise DomainError(f"inverse temperature must be >= 0, got {self.beta}")
        if self.n_rounds < 1:
            raise DomainError(f"need at least one round, got {self.n_rounds}")
        h_s = qlinalg.require_hermitian(self.h_s, what="h_s")
        h_e = qlinalg.require_hermitian(self.h_e, what="h_e")
        h_i = qlinalg.require_hermitian(self.h_i, what="h_i")
        if h_s.shape[0] != self.d_s:
            raise DimError(f"h_s dimension {h_s.shape[0]} != d_s {self.d_s}")
        if h_e.shape[0] != self.d_e:
            raise DimError(f"h_e dimension {h_e.shape[0]} != d_e {self.d_e}")
        if h_i.shape[0] != self.d_s * self.d_e:
            raise DimError(f"h_i dimension {h_i.shape[0]} != d_s*d_e")
        offdiag = float(np.abs(h_e - np.diag(np.diag(h_e))).max())
        if offdiag > TOL.hermiticity:
            raise DimError(
                "h_e must be diagonal in the measurement basis "
                f"(off-diagonal magnitude {offdiag:.3e}); use build_model() to rotate"
            )
        object.__setattr__(self, "h_s", _freeze(h_s))
        object.__setattr__(self, "h_e", _freeze(h_e))
        object.__setattr__(self, "h_i", _freeze(h_i))


def build_model(
    h_s,
    h_e,
    v_s=None,
    v_e=None,
    *,
    lam: float = 0.0,
    h_i=None,
    beta: float = 1.0,
    tau: float = 1.0,
    n_rounds: int = 1,
) -> ModelSpec:
    """Assemble a ModelSpec from parts.

    Either pass the factored coupling (v_s, v_e, lam), giving the
    interaction lam * v_s (x) v_e, or a full interaction matrix h_i.
    A non-diagonal environment Hamiltonian is rotated to its eigenbasis
    (the interaction is rotated along) and a warning is recorded.
    """
    h_s = qlinalg.require_hermitian(h_s, what="h_s")
    h_e = qlinalg.require_hermitian(h_e, what="h_e")
    d_s, d_e = h_s.shape[0], h_e.shape[0]
    if h_i is not None:
        if v_s is not None or v_e is not None:
            raise ConfigError("pass either h_i or the factored (v_s, v_e), not both")
        h_i = qlinalg.require_hermitian(h_i, what="h_i")
    elif v_s is not None and v_e is not None:
        h_i = lam * qlinalg.kron(
            qlinalg.require_hermitian(v_s, what="v_s"),
            qlinalg.require_hermitian(v_e, what="v_e"),
        )
    else:
        if lam != 0.0:
            raise ConfigError("nonzero lam needs the factored coupling (v_s, v_e)")
        h_i = np.zeros((d_s * d_e, d_s * d_e), dtype=complex)

    offdiag = float(np.abs(h_e - np.diag(np.diag(h_e))).max())
    if offdiag > TOL.hermiticity:
        w, rot = qlinalg.herm_eig(h_e)
        joint_rot = qlinalg.kron(np.eye(d_s), rot)
        h_i = joint_rot.conj().T @ h_i @ joint_rot
        h_e = np.diag(w).astype(complex)
        warnings.warn(
            "environment Hamiltonian was rotated to its eigenbasis; "
            "measurement outcomes refer to that basis",
            stacklevel=2,
        )
    return ModelSpec(d_s, d_e, h_s, h_e, h_i, float(lam), float(beta), float(tau), int(n_rounds))


def total_hamiltonian(spec: ModelSpec) -> np.ndarray:
    eye_s = np.eye(spec.d_s)
    eye_e = np.eye(spec.d_e)
    return qlinalg.kron(spec.h_s, eye_e) + qlinalg.kron(eye_s, spec.h_e) + spec.h_i


def total_unitary(spec: ModelSpec) -> np.ndarray:
    """Round propagator exp(-i H tau) on the joint space."""
    return qlinalg.expm_i_hermitian(total_hamiltonian(spec), spec.tau)


def env_energies(spec: ModelSpec) -> np.ndarray:
    return np.real(np.diag(spec.h_e)).copy()


def gibbs_env_probs(spec: ModelSpec) -> np.ndarray:
    """Thermal preparation probabilities of the environment levels."""
    eps = env_energies(spec)
    p = np.exp(-spec.beta * (eps - eps.min()))
    return p / p.sum()


@dataclass(frozen=True)
class KrausSet:
    """Labeled Kraus family of one interaction round.

    ops[after, before] is the system operator selected by measuring the
    fresh environment in state `before` and finding it in `after` after the
    round; preparation weights env_probs are folded into the operators.
    """

    d_s: int
    d_e: int
    ops: np.ndarray          # shape (d_e, d_e, d_s, d_s)
    env_probs: np.ndarray    # shape (d_e,)

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=complex)
        if ops.shape != (self.d_e, self.d_e, self.d_s, self.d_s):
            raise DimError(f"ops shape {ops.shape} != {(self.d_e, self.d_e, self.d_s, self.d_s)}")
        p = qlinalg.require_prob_vector(self.env_probs, self.d_e, what="env_probs")
        comp = np.einsum("abji,abjk->ik", ops.conj(), ops)
        defect = float(np.abs(comp - np.eye(self.d_s)).max())
        if defect > TOL.completeness:
            raise KrausError(f"Kraus completeness defect {defect:.3e}")
        object.__setattr__(self, "ops", _freeze(ops))
        object.__setattr__(self, "env_probs", _freeze(p))

    def op(self, after: int, before: int) -> np.ndarray:
        return self.ops[after, before]


def forward_kraus(spec: ModelSpec, env_probs=None) -> KrausSet:
    """Kraus family of the forward round.

    env_probs defaults to the thermal weights of h_e at spec.beta
    (thermodynamically consistent mode); any preparation distribution over
    the environment measurement basis is accepted (general mode).
    """
    p = gibbs_env_probs(spec) if env_probs is None else qlinalg.require_prob_vector(
        env_probs, spec.d_e, what="env_probs"
    )
    u = total_unitary(spec)
    blocks = u.reshape(spec.d_s, spec.d_e, spec.d_s, spec.d_e)
    # ops[after, before, i, j] = sqrt(p_before) <i, after|U|j, before>
    ops = np.sqrt(p)[None, :, None, None] * np.einsum("iajb->abij", blocks)
    return KrausSet(spec.d_s, spec.d_e, ops, p)


def backward_kraus(fwd: KrausSet) -> KrausSet:
    """Kraus family of the reversed round.

    Labels follow the reversed record: the operator for (after, before) is
    sqrt(p_before / p_after) times the adjoint of the forward operator for
    (before, after).  Applying the construction twice returns the forward
    family.  Requires full support of the preparation probabilities.
    """
    p = fwd.env_probs
    if np.any(p <= 0):
        raise SupportError("backward family needs strictly positive env_probs")
    ratio = np.sqrt(p[None, :] / p[:, None])
    adj = np.conj(fwd.ops.transpose(1, 0, 3, 2))   # adj[a, b] = ops[b, a]^dag
    return KrausSet(fwd.d_s, fwd.d_e, ratio[:, :, None, None] * adj, p)


def channel_apply(k: KrausSet, rho) -> np.ndarray:
    """One application of the round channel sum_ab M_ab rho M_ab^dag."""
    m = qlinalg.as_cmatrix(rho)
    if m.shape[0] != k.d_s:
        raise DimError(f"state dimension {m.shape[0]} != d_s {k.d_s}")
    out = np.einsum("abij,jk,ablk->il", k.ops, m, k.ops.conj())
    drift = abs(out.trace() - m.trace())
    if drift > TOL.trace:
        raise KrausError(f"channel failed to preserve trace: drift {drift:.3e}")
    return 0.5 * (out + out.conj().T)


def transfer_matrix(k: KrausSet) -> np.ndarray:
    """Row-major matrix of the channel acting on vectorized operators."""
    d = k.d_s
    t = np.einsum("abij,ablk->iljk", k.ops, k.ops.conj())
    return t.reshape(d * d, d * d)


def nearest_fixed_point(mat: np.ndarray, target: complex, d: int) -> tuple[np.ndarray, float]:
    """Eigenvector of mat nearest `target`, returned as a unit-trace Hermitian d x d matrix.

    Raises NonUniqueStationaryError when the next-nearest eigenvalue is not
    separated by the stationary gap; returns (state, gap).
    """
    w, v = np.linalg.eig(mat)
    order = np.argsort(np.abs(w - target), kind="stable")
    dist = np.abs(w[order] - target)
    gap = float(dist[1] - dist[0]) if dist.size > 1 else math.inf
    if gap < TOL.stationary_gap:
        raise NonUniqueStationaryError(
            f"fixed point is not isolated: eigenvalue gap {gap:.3e} "
            f"below {TOL.stationary_gap:.1e}",
            gap=gap,
        )
    x = v[:, order[0]].reshape(d, d)
    ph = np.trace(x)
    if abs(ph) < 1e-12:
        raise ConvergenceError("fixed-point candidate has vanishing trace")
    x = x * (ph.conjugate() / abs(ph))
    x = 0.5 * (x + x.conj().T)
    return x / np.real(x.trace()), gap


def stationary_state(k: KrausSet) -> np.ndarray:
    """Unique fixed point of the round channel.

    Solved by full eigendecomposition of the transfer matrix; the
    eigenvalue nearest 1 must be isolated by the stationary gap, the
    Hermitized, trace-normalized eigenvector must satisfy the fixed-point
    residual, and the result must be a valid density matrix.
    """
    rho, _gap = nearest_fixed_point(transfer_matrix(k), 1.0, k.d_s)
    residual = float(np.abs(channel_apply(k, rho) - rho).max())
    if residual > TOL.stationary_residual:
        raise ConvergenceError(f"stationary-state residual {residual:.3e}")
    return qlinalg.require_density_matrix(rho, what="stationary state")


def thermal_operation_model(
    eps_s,
    eps_e,
    couplings,
    *,
    tau: float = 1.0,
    beta: float = 1.0,
    n_rounds: int = 1,
) -> ModelSpec:
    """Resonant exchange model commuting with the bare Hamiltonian.

    eps_s and eps_e are nondegenerate level lists; couplings is an iterable
    of ((m, mu), (n, nu), g) exchanging |m, mu> and |n, nu| with amplitude
    g, allowed only between resonant pairs (eps_s[m] + eps_e[mu] ==
    eps_s[n] + eps_e[nu]) and with at most one partner per level pair.
    """
    eps_s = np.asarray(eps_s, dtype=float).ravel()
    eps_e = np.asarray(eps_e, dtype=float).ravel()
    for name, eps in (("eps_s", eps_s), ("eps_e", eps_e)):
        diffs = np.abs(eps[:, None] - eps[None, :])
        np.fill_diagonal(diffs, np.inf)
        if diffs.min() < TOL.degeneracy:
            raise DegeneracyError(f"{name} has (near-)degenerate levels: spacing {diffs.min():.3e}")
    d_s, d_e = eps_s.size, eps_e.size
    h_i = np.zeros((d_s * d_e, d_s * d_e), dtype=complex)
    used: set[tuple[int, int]] = set()
    for (m, mu), (n, nu), g in couplings:
        if not (0 <= m < d_s and 0 <= n < d_s and 0 <= mu < d_e and 0 <= nu < d_e):
            raise DimError(f"coupling indices out of range: {(m, mu)} <-> {(n, nu)}")
        if (m, mu) == (n, nu):
            raise ResonanceError("coupling must connect two distinct joint levels")
        mismatch = abs(eps_s[m] + eps_e[mu] - eps_s[n] - eps_e[nu])
        if mismatch > TOL.resonance:
            raise ResonanceError(
                f"coupling {(m, mu)} <-> {(n, nu)} is off-resonant by {mismatch:.3e}"
            )
        for key in ((m, mu), (n, nu)):
            if key in used:
                raise ResonanceError(f"joint level {key} coupled more than once")
            used.add(key)
        a, b = m * d_e + mu, n * d_e + nu
        h_i[a, b] += g
        h_i[b, a] += np.conj(g)
    spec = ModelSpec(
        d_s, d_e, np.diag(eps_s).astype(complex), np.diag(eps_e).astype(complex),
        h_i, 1.0, float(beta), float(tau), int(n_rounds),
    )
    bare = qlinalg.kron(spec.h_s, np.eye(d_e)) + qlinalg.kron(np.eye(d_s), spec.h_e)
    h = total_hamiltonian(spec)
    comm = float(np.abs(h @ bare - bare @ h).max())
    if comm > TOL.resonance:
        raise ResonanceError(f"assembled interaction fails to commute with bare energy: {comm:.3e}")
    return spec


# -- JSON interface ----------------------------------------------------------

def _mat_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _mat_from_json(rows, what: str) -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: malformed matrix entries") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{what}: expected a square matrix of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def model_to_dict(spec: ModelSpec) -> dict:
    return {
        "schema": MODEL_SCHEMA,
        "dims": {"d_S": spec.d_s, "d_E": spec.d_e},
        "H_S": _mat_to_json(spec.h_s),
        "H_E": _mat_to_json(spec.h_e),
        "H_I": _mat_to_json(spec.h_i),
        "lambda": spec.lam,
        "beta": spec.beta,
        "tau": spec.tau,
        "N": spec.n_rounds,
    }


def model_from_dict(data: dict) -> ModelSpec:
    if not isinstance(data, dict) or data.get("schema") != MODEL_SCHEMA:
        raise ConfigError(f"expected schema {MODEL_SCHEMA!r}, got {data.get('schema')!r}")
    try:
        dims = data["dims"]
        d_s, d_e = int(dims["d_S"]), int(dims["d_E"])
        lam = float(data["lambda"])
        beta = float(data["beta"])
        tau = float(data["tau"])
        n_rounds = int(data["N"])
        h_s = _mat_from_json(data["H_S"], "H_S")
        h_e = _mat_from_json(data["H_E"], "H_E")
    except KeyError as exc:
        raise ConfigError(f"model file missing field {exc}") from exc
    if "H_I" in data:
        h_i = _mat_from_json(data["H_I"], "H_I")
        spec = build_model(h_s, h_e, h_i=h_i, lam=lam, beta=beta, tau=tau, n_rounds=n_rounds)
    elif "V_S" in data and "V_E" in data:
        spec = build_model(
            h_s, h_e, _mat_from_json(data["V_S"], "V_S"), _mat_from_json(data["V_E"], "V_E"),
            lam=lam, beta=beta, tau=tau, n_rounds=n_rounds,
        )
    else:
        raise ConfigError("model file needs either H_I or the pair V_S, V_E")
    if spec.d_s != d_s or spec.d_e != d_e:
        raise ConfigError(
            f"declared dims ({d_s}, {d_e}) disagree with matrices ({spec.d_s}, {spec.d_e})"
        )
    return spec


def save_model(spec: ModelSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(spec), fh, indent=1)
        fh.write("\n")


def load_model(path) -> ModelSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model file {path}: {exc}") from exc
    return model_from_dict(data)

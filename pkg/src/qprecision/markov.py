"""Continuous measurement records of Markovian open dynamics.

A jump unraveling of a GKSL generator splits each short time step into one
no-jump factor and one factor per jump channel.  Exactly completed forward
and backward step families turn the continuous record into a repeated
two-point measurement, so every trajectory quantity of the discrete theory
applies verbatim.  The backward family flips the Hamiltonian, keeps the
dissipators, and generates the reversed record statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import qlinalg
from .errors import (
    AccuracyError,
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    DimError,
    EnumerationCapError,
    ModeError,
)
from .model import nearest_fixed_point, _mat_to_json, _mat_from_json
from .tolerances import TOL

__all__ = [
    "LINDBLAD_SCHEMA",
    "JumpChannel",
    "LindbladSpec",
    "effective_hamiltonian",
    "jump_rate_operator",
    "liouvillian_apply",
    "no_jump_propagator",
    "inactivity",
    "loschmidt_echo",
    "dynamical_activity",
    "lindblad_evolve",
    "lindblad_stationary",
    "UnraveledSteps",
    "unraveled_kraus_sets",
    "UnraveledAsymmetry",
    "unraveled_sigma_star",
    "sigma_star_dp_lower_bound",
    "driven_qubit",
    "incoherent_qubit",
    "thermal_driven_qubit",
    "lindblad_to_dict",
    "lindblad_from_dict",
    "save_lindblad",
    "load_lindblad",
]

LINDBLAD_SCHEMA = "qprecision-lindblad/1"
DEFAULT_CAP = 10**7


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class JumpChannel:
    """One jump operator, optionally tagged with its environment entropy change.

    pair points at the channel undoing this one; paired channels must obey
    L_k = exp(ds_k / 2) * adjoint(L_pair) with opposite entropy changes.
    """

    op: np.ndarray
    entropy_change: float | None = None
    pair: int | None = None


@dataclass(frozen=True)
class LindbladSpec:
    """System Hamiltonian plus jump channels of a GKSL generator."""

    d_s: int
    h: np.ndarray
    jumps: tuple[JumpChannel, ...]

    def __post_init__(self):
        if self.d_s < 2:
            raise DimError(f"need d_s >= 2, got {self.d_s}")
        h = qlinalg.require_hermitian(self.h, what="h")
        if h.shape != (self.d_s, self.d_s):
            raise DimError(f"h has shape {h.shape}, expected {(self.d_s,)*2}")
        object.__setattr__(self, "h", _freeze(h))
        if not self.jumps:
            raise DimError("need at least one jump channel")
        jumps = []
        for k, j in enumerate(self.jumps):
            op = qlinalg.as_cmatrix(j.op)
            if op.shape != (self.d_s, self.d_s):
                raise DimError(f"jump {k} has shape {op.shape}, expected {(self.d_s,)*2}")
            jumps.append(JumpChannel(_freeze(op), j.entropy_change, j.pair))
        object.__setattr__(self, "jumps", tuple(jumps))
        for k, j in enumerate(self.jumps):
            if j.pair is None:
                continue
            if not (0 <= j.pair < len(self.jumps)):
                raise ConfigError(f"jump {k} pairs with missing channel {j.pair}")
            mate = self.jumps[j.pair]
            if mate.pair != k:
                raise ConsistencyError(f"jump pairing {k} <-> {j.pair} is not mutual")
            if j.entropy_change is None or mate.entropy_change is None:
                raise ConsistencyError(f"paired jumps {k} <-> {j.pair} need entropy changes")
            if abs(j.entropy_change + mate.entropy_change) > 1e-12:
                raise ConsistencyError(
                    f"paired entropy changes must be opposite, got "
                    f"{j.entropy_change} and {mate.entropy_change}"
                )
            defect = float(np.abs(
                j.op - math.exp(j.entropy_change / 2.0) * mate.op.conj().T
            ).max())
            if defect > TOL.detailed_balance:
                raise ConsistencyError(
                    f"jump pair {k} <-> {j.pair} breaks local detailed balance "
                    f"by {defect:.3e}"
                )

    @property
    def jump_ops(self) -> tuple[np.ndarray, ...]:
        return tuple(j.op for j in self.jumps)


def jump_rate_operator(spec: LindbladSpec) -> np.ndarray:
    """Total rate operator, the sum of adjoint(L) L over all channels."""
    out = np.zeros((spec.d_s, spec.d_s), dtype=complex)
    for op in spec.jump_ops:
        out += op.conj().T @ op
    return out


def effective_hamiltonian(spec: LindbladSpec) -> np.ndarray:
    """Non-Hermitian generator of the no-jump evolution."""
    return spec.h - 0.5j * jump_rate_operator(spec)


def liouvillian_apply(spec: LindbladSpec, rho: np.ndarray, *, flip_hamiltonian: bool = False) -> np.ndarray:
    """Generator action on a state; flip_hamiltonian reverses the coherent part."""
    sign = 1.0 if flip_hamiltonian else -1.0
    out = sign * 1j * (spec.h @ rho - rho @ spec.h)
    for op in spec.jump_ops:
        g = op.conj().T @ op
        out += op @ rho @ op.conj().T - 0.5 * (g @ rho + rho @ g)
    return out


def no_jump_propagator(spec: LindbladSpec, duration: float, steps: int | None = None) -> np.ndarray:
    """Propagator conditioned on observing no jump for the whole duration.

    Exact exponential of the effective Hamiltonian by default; a step count
    selects the bare Euler product of the discretized experiment instead,
    guarded by its quadratic error budget.
    """
    if duration <= 0:
        raise DimError(f"need duration > 0, got {duration}")
    heff = effective_hamiltonian(spec)
    if steps is None:
        return expm(-1j * duration * heff)
    if steps < 1:
        raise DimError(f"need steps >= 1, got {steps}")
    scale = float(np.linalg.norm(heff, 2)) * duration
    if scale**2 / steps > TOL.step_budget:
        raise AccuracyError(
            f"{steps} steps leave an Euler error budget of {scale**2 / steps:.3e}; "
            f"need at least {math.ceil(scale**2 / TOL.step_budget)}"
        )
    factor = np.eye(spec.d_s, dtype=complex) - 1j * (duration / steps) * heff
    return np.linalg.matrix_power(factor, steps)


def inactivity(spec: LindbladSpec, rho_s, duration: float) -> float:
    """Probability that the record stays empty for the whole duration."""
    rho = qlinalg.require_density_matrix(rho_s, what="rho_s")
    v = no_jump_propagator(spec, duration)
    return float(np.real(np.trace(v @ rho @ v.conj().T)))


def loschmidt_echo(spec: LindbladSpec, rho_s, duration: float) -> float:
    """Squared overlap amplitude of the no-jump branch with the initial state.

    Never exceeds the inactivity, so it feeds the same kinetic bound."""
    rho = qlinalg.require_density_matrix(rho_s, what="rho_s")
    v = no_jump_propagator(spec, duration)
    return float(abs(np.trace(rho @ v)) ** 2)


def dynamical_activity(spec: LindbladSpec, rho_s, duration: float) -> float:
    """Leading-order mean number of jumps emitted from a frozen state."""
    rho = qlinalg.require_density_matrix(rho_s, what="rho_s")
    rate = float(np.real(np.trace(jump_rate_operator(spec) @ rho)))
    return rate * duration


def _generator_norm(spec: LindbladSpec) -> float:
    lnorm = 2.0 * float(np.linalg.norm(spec.h, 2))
    for op in spec.jump_ops:
        lnorm += 2.0 * float(np.linalg.norm(op, 2)) ** 2
    return lnorm


def lindblad_evolve(
    spec: LindbladSpec,
    rho0,
    duration: float,
    steps: int | None = None,
    *,
    flip_hamiltonian: bool = False,
) -> np.ndarray:
    """Integrate the master equation with classic fourth-order Runge-Kutta.

    The step count defaults to the generator-norm budget keeping the global
    error near ode_budget; an explicit count below that budget raises.  The
    result is checked for Hermiticity, trace drift, and positivity drift.
    """
    if duration < 0:
        raise DimError(f"need duration >= 0, got {duration}")
    rho = qlinalg.require_density_matrix(rho0, what="rho0").astype(complex)
    if duration == 0:
        return rho
    lnorm = _generator_norm(spec)
    if lnorm > 0:
        dt_max = (120.0 * TOL.ode_budget / (lnorm**5 * duration)) ** 0.25
        needed = max(16, int(math.ceil(duration / dt_max)))
    else:
        needed = 16
    if steps is None:
        steps = needed
    elif steps < needed:
        raise AccuracyError(f"{steps} steps exceed the error budget; need {needed}")
    dt = duration / steps
    for _ in range(steps):
        k1 = liouvillian_apply(spec, rho, flip_hamiltonian=flip_hamiltonian)
        k2 = liouvillian_apply(spec, rho + 0.5 * dt * k1, flip_hamiltonian=flip_hamiltonian)
        k3 = liouvillian_apply(spec, rho + 0.5 * dt * k2, flip_hamiltonian=flip_hamiltonian)
        k4 = liouvillian_apply(spec, rho + dt * k3, flip_hamiltonian=flip_hamiltonian)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    rho = 0.5 * (rho + rho.conj().T)
    drift = abs(float(np.real(np.trace(rho))) - 1.0)
    if drift > TOL.trace_drift:
        raise AccuracyError(f"trace drifted by {drift:.3e} during integration")
    w = np.linalg.eigvalsh(rho)
    if float(w[0]) < -TOL.positivity_drift:
        raise AccuracyError(f"positivity drifted to {float(w[0]):.3e} during integration")
    return rho / float(np.real(np.trace(rho)))


def lindblad_stationary(spec: LindbladSpec) -> np.ndarray:
    """Unique stationary state of the generator.

    Raises NonUniqueStationaryError when the kernel is (numerically)
    degenerate."""
    d = spec.d_s
    eye = np.eye(d, dtype=complex)
    mat = -1j * (np.kron(spec.h, eye) - np.kron(eye, spec.h.T))
    for op in spec.jump_ops:
        g = op.conj().T @ op
        mat += np.kron(op, op.conj())
        mat -= 0.5 * (np.kron(g, eye) + np.kron(eye, g.T))
    rho, _gap = nearest_fixed_point(mat, 0.0, d)
    resid = float(np.abs(liouvillian_apply(spec, rho)).max())
    if resid > TOL.stationary_residual * (1.0 + _generator_norm(spec)):
        raise ConvergenceError(f"stationary state residual {resid:.3e} too large")
    return qlinalg.require_density_matrix(rho, what="stationary state")


@dataclass(frozen=True)
class UnraveledSteps:
    """Exactly completed forward and backward step families of one unraveling.

    Index 0 is the no-jump operator, the rest follow the generator's jump
    channel order.  Defects record the residual completeness error after
    the metric correction (machine precision in practice)."""

    dt: float
    forward: np.ndarray
    backward: np.ndarray
    forward_defect: float
    backward_defect: float


def _inv_sqrt(metric: np.ndarray) -> np.ndarray:
    w, v = qlinalg.herm_eig(metric)
    return (v / np.sqrt(w)) @ v.conj().T


def unraveled_kraus_sets(spec: LindbladSpec, duration: float, steps: int) -> UnraveledSteps:
    """Discretize the record into exactly complete forward and backward steps.

    The raw forward family {1 - i H_eff dt, L_k sqrt(dt)} resolves the
    identity only to O(dt^2); right-multiplying by the inverse square root
    of its metric makes it exact.  The backward family conjugates the
    coherent part, keeps the jumps, and gets the analogous correction.
    """
    if duration <= 0 or steps < 1:
        raise DimError(f"need duration > 0 and steps >= 1, got {duration}, {steps}")
    dt = duration / steps
    d = spec.d_s
    heff = effective_hamiltonian(spec)
    eye = np.eye(d, dtype=complex)
    root_dt = math.sqrt(dt)

    fwd = [eye - 1j * dt * heff] + [root_dt * op for op in spec.jump_ops]
    bwd = [eye + 1j * dt * heff.conj().T] + [root_dt * op for op in spec.jump_ops]

    s_f = eye + dt * dt * (heff.conj().T @ heff)
    s_b = eye + dt * dt * (heff @ heff.conj().T)
    corr_f = _inv_sqrt(s_f)
    corr_b = _inv_sqrt(s_b)
    fwd = np.array([op @ corr_f for op in fwd])
    bwd = np.array([op @ corr_b for op in bwd])

    def defect(ops: np.ndarray) -> float:
        total = np.einsum("kji,kjl->il", ops.conj(), ops)
        return float(np.abs(total - eye).max())

    d_f, d_b = defect(fwd), defect(bwd)
    if max(d_f, d_b) > TOL.completeness:
        raise ConsistencyError(f"corrected step family incomplete: {max(d_f, d_b):.3e}")
    return UnraveledSteps(dt=dt, forward=fwd, backward=bwd, forward_defect=d_f, backward_defect=d_b)


@dataclass(frozen=True)
class UnraveledAsymmetry:
    """Forward/backward divergence of an enumerated continuous record."""

    sigma_star: float
    n_records: int
    total_mass: float
    excluded_mass: float
    truncated_mass: float


def unraveled_sigma_star(
    spec: LindbladSpec,
    rho_s,
    duration: float,
    steps: int,
    *,
    cap: int = DEFAULT_CAP,
    max_jumps: int | None = None,
) -> UnraveledAsymmetry:
    """Exact record asymmetry of the discretized experiment.

    Enumerates every jump record (optionally truncated to at most max_jumps
    jumps, reporting the dropped mass), measures initial and final outcomes
    in the eigenbasis of rho_s, and sums P log(P / P~) over the record
    distribution.  rho_s should be the stationary state for the asymmetry
    to carry its usual meaning, but any state is accepted.
    """
    rho = qlinalg.require_density_matrix(rho_s, what="rho_s")
    w, v = qlinalg.herm_eig(rho)
    p = qlinalg.require_prob_vector(w, what="rho_s spectrum")
    un = unraveled_kraus_sets(spec, duration, steps)
    d = spec.d_s
    n_ops = un.forward.shape[0]
    if max_jumps is None and n_ops**steps * d * d > cap:
        raise EnumerationCapError(
            f"{n_ops**steps * d * d} record entries exceed the cap {cap}; "
            "truncate with max_jumps or reduce steps"
        )

    fwd = np.einsum("ji,kjl,lm->kim", v.conj(), un.forward, v)
    bwd = np.einsum("ji,kjl,lm->kim", v.conj(), un.backward, v)
    jump_count = np.array([0] + [1] * (n_ops - 1))

    chains_f = np.eye(d, dtype=complex)[None]
    chains_b = np.eye(d, dtype=complex)[None]
    counts = np.zeros(1, dtype=np.int64)
    for _ in range(steps):
        chains_f = np.einsum("kab,pbc->pkac", fwd, chains_f).reshape(-1, d, d)
        chains_b = np.einsum("kab,pbc->pkac", bwd, chains_b).reshape(-1, d, d)
        counts = (counts[:, None] + jump_count[None, :]).reshape(-1)
        if max_jumps is not None:
            keep = counts <= max_jumps
            chains_f, chains_b, counts = chains_f[keep], chains_b[keep], counts[keep]
        if chains_f.shape[0] * d * d > cap:
            raise EnumerationCapError(f"record enumeration exceeded the cap {cap}")

    prob_f = np.abs(chains_f) ** 2 * p[None, None, :]
    prob_b = np.abs(chains_b) ** 2 * p[None, None, :]
    total = float(prob_f.sum())
    if max_jumps is None and abs(total - 1.0) > TOL.prob_norm:
        raise ConsistencyError(f"record probabilities sum to {total:.15g}")

    mask = (prob_f >= TOL.zero_prob) & (prob_b >= TOL.zero_prob)
    pf, pb = prob_f[mask], prob_b[mask]
    sigma_star = float((pf * (np.log(pf) - np.log(pb))).sum())
    excluded = float(prob_f[(~mask) & (prob_f > 0)].sum())
    return UnraveledAsymmetry(
        sigma_star=sigma_star,
        n_records=int(prob_f.shape[0]),
        total_mass=total,
        excluded_mass=excluded,
        truncated_mass=max(1.0 - total, 0.0),
    )


def sigma_star_dp_lower_bound(
    spec: LindbladSpec,
    rho_ss,
    duration: float,
    steps: int | None = None,
) -> float:
    """Decohered lower bound on the record asymmetry of a stationary run.

    Coarse-graining the record to its final outcome bounds the asymmetry by
    the classical divergence between the stationary spectrum and the
    backward-evolved populations.  With a step count the backward channel
    matches the discretized experiment exactly; without one it integrates
    the flipped-Hamiltonian master equation.
    """
    rho = qlinalg.require_density_matrix(rho_ss, what="rho_ss")
    resid = float(np.abs(liouvillian_apply(spec, rho)).max())
    if resid > 1e-8:
        raise ModeError(f"rho_ss is not stationary (residual {resid:.3e})")
    w, v = qlinalg.herm_eig(rho)
    if steps is None:
        # continuum route: forward final marginal is the stationary spectrum
        p = np.asarray(qlinalg.require_prob_vector(w, what="rho_ss spectrum"))
        evolved = lindblad_evolve(spec, rho, duration, flip_hamiltonian=True)
    else:
        # discretized route: use the experiment's own forward marginal so the
        # coarse-graining inequality is exact, not up to discretization drift
        un = unraveled_kraus_sets(spec, duration, steps)
        fwd_state = rho.astype(complex)
        evolved = rho.astype(complex)
        for _ in range(steps):
            fwd_state = np.einsum("kij,jl,kml->im", un.forward, fwd_state, un.forward.conj())
            evolved = np.einsum("kij,jl,kml->im", un.backward, evolved, un.backward.conj())
        p = np.real(np.einsum("ji,jk,ki->i", v.conj(), fwd_state, v))
        p = np.clip(p, 0.0, None)
    q = np.real(np.einsum("ji,jk,ki->i", v.conj(), evolved, v))
    total = 0.0
    for pi, qi in zip(p, q):
        if pi <= TOL.zero_prob:
            continue
        if qi <= 0.0:
            return math.inf
        total += float(pi) * (math.log(float(pi)) - math.log(float(qi)))
    return max(total, 0.0)


def driven_qubit(omega: float = 1.0, gamma: float = 1.0) -> LindbladSpec:
    """Coherently driven qubit with bare decay; the minimal asymmetric record."""
    h = 0.5 * omega * np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    low = np.zeros((2, 2), dtype=complex)
    low[0, 1] = math.sqrt(gamma)
    return LindbladSpec(d_s=2, h=h, jumps=(JumpChannel(low),))


def incoherent_qubit(w_down: float, w_up: float) -> LindbladSpec:
    """Classical two-level hopping; its records are exactly reversible."""
    if w_down <= 0 or w_up <= 0:
        raise ConfigError("hopping rates must be positive")
    h = np.diag([0.0, 1.0]).astype(complex)
    down = np.zeros((2, 2), dtype=complex)
    down[0, 1] = math.sqrt(w_down)
    up = np.zeros((2, 2), dtype=complex)
    up[1, 0] = math.sqrt(w_up)
    ds = math.log(w_down / w_up)
    return LindbladSpec(
        d_s=2,
        h=h,
        jumps=(JumpChannel(down, ds, 1), JumpChannel(up, -ds, 0)),
    )


def thermal_driven_qubit(omega: float, gamma: float, s: float) -> LindbladSpec:
    """Driven qubit with a thermally paired emission/absorption pair."""
    h = 0.5 * omega * np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    down = np.zeros((2, 2), dtype=complex)
    down[0, 1] = math.sqrt(gamma)
    up = np.zeros((2, 2), dtype=complex)
    up[1, 0] = math.sqrt(gamma * math.exp(-s))
    return LindbladSpec(
        d_s=2,
        h=h,
        jumps=(JumpChannel(down, s, 1), JumpChannel(up, -s, 0)),
    )


def lindblad_to_dict(spec: LindbladSpec) -> dict:
    return {
        "schema": LINDBLAD_SCHEMA,
        "d_S": spec.d_s,
        "H": _mat_to_json(spec.h),
        "jumps": [
            {
                "L": _mat_to_json(j.op),
                "ds": j.entropy_change,
                "pair": j.pair,
            }
            for j in spec.jumps
        ],
    }


def lindblad_from_dict(data: dict) -> LindbladSpec:
    if not isinstance(data, dict) or data.get("schema") != LINDBLAD_SCHEMA:
        raise ConfigError(f"expected schema {LINDBLAD_SCHEMA!r}, got {data.get('schema')!r}")
    try:
        d_s = int(data["d_S"])
        h = _mat_from_json(data["H"], "H")
        jumps = tuple(
            JumpChannel(
                _mat_from_json(j["L"], f"jumps[{k}].L"),
                None if j.get("ds") is None else float(j["ds"]),
                None if j.get("pair") is None else int(j["pair"]),
            )
            for k, j in enumerate(data["jumps"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed generator description: {exc}") from exc
    return LindbladSpec(d_s=d_s, h=h, jumps=jumps)


def save_lindblad(spec: LindbladSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(lindblad_to_dict(spec), fh, indent=2)
        fh.write("\n")


def load_lindblad(path) -> LindbladSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read generator description: {exc}") from exc
    return lindblad_from_dict(data)

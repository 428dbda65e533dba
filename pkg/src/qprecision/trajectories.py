"""Measurement trajectories of repeated-interaction models.

A trajectory records the initial system outcome, one (before, after)
environment outcome pair per round, and the final system outcome.  The
reversed experiment replays the record backwards through the adjoint family;
comparing the two path measures yields entropy production, the
forward/backward asymmetry, the inactivity and the fluctuation statistics of
record observables.

Time reversal is fixed, by convention, to complex conjugation in the
measurement basis; the conjugations never appear explicitly because every
reversed amplitude reduces to a plain matrix element of the adjoint family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, NamedTuple

import numpy as np

from . import qlinalg
from .errors import (
    ConsistencyError,
    DimError,
    EnumerationCapError,
    ModeError,
    SupportError,
)
from .model import (
    KrausSet,
    ModelSpec,
    backward_kraus,
    channel_apply,
    gibbs_env_probs,
    total_unitary,
)
from .tolerances import TOL

__all__ = [
    "STATIONARY",
    "GENERAL",
    "DEFAULT_CAP",
    "Trajectory",
    "Observable",
    "TrajectoryEnsemble",
    "TrajectoryStats",
    "MCStats",
    "reverse",
    "current_observable",
    "generic_observable",
    "change_indicator",
    "no_change",
    "validate_observable",
    "enumerate_trajectories",
    "trajectory_prob",
    "backward_prob",
    "compute_stats",
    "sigma_from_states",
    "sigma_from_states_general",
    "entanglement_entropy_avg",
    "mc_sample",
    "dump_trajectories_csv",
]

STATIONARY = "stationary"
GENERAL = "general"
DEFAULT_CAP = 10**7


class Trajectory(NamedTuple):
    """One measurement record: initial outcome, per-round env pairs, final outcome.

    Each pair is (before, after) for one fresh environment copy.
    """

    n: int
    pairs: tuple[tuple[int, int], ...]
    m: int


def reverse(gamma: Trajectory) -> Trajectory:
    """Record of the same events read backwards (outcome roles swapped)."""
    return Trajectory(gamma.m, tuple((a, b) for (b, a) in reversed(gamma.pairs)), gamma.n)


def no_change(gamma: Trajectory) -> bool:
    """Default quiet-set membership: every environment copy left unchanged."""
    return all(b == a for (b, a) in gamma.pairs)


@dataclass(frozen=True)
class Observable:
    """Scalar function of a trajectory.

    kind "current" promises reversal-odd values (phi(reverse) = -phi);
    kind "generic" promises phi = 0 on the quiet set.  Promises are checked
    exhaustively against the enumerated ensemble before use.  coeffs, when
    set, gives the per-round coefficient matrix phi = sum_i c[after, before]
    and enables vectorized evaluation.
    """

    kind: str
    fn: Callable[[Trajectory], float]
    name: str = ""
    coeffs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("current", "generic"):
            raise ModeError(f"unknown observable kind {self.kind!r}")


def _coeff_fn(c: np.ndarray) -> Callable[[Trajectory], float]:
    def fn(gamma: Trajectory) -> float:
        return float(sum(c[a, b] for (b, a) in gamma.pairs))
    return fn


def current_observable(coeffs, name: str = "current") -> Observable:
    """Reversal-odd record observable phi = sum_i c[after_i, before_i].

    Requires an antisymmetric coefficient matrix (zero diagonal follows).
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimError(f"coefficient matrix must be square, got {c.shape}")
    if np.abs(c + c.T).max() > 1e-12:
        raise ModeError("current coefficients must be antisymmetric")
    return Observable("current", _coeff_fn(c), name, c)


def generic_observable(coeffs, name: str = "generic") -> Observable:
    """Record observable phi = sum_i c[after_i, before_i] vanishing on the quiet set."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimError(f"coefficient matrix must be square, got {c.shape}")
    if np.abs(np.diag(c)).max() > 1e-12:
        raise ModeError("generic record coefficients must have zero diagonal")
    return Observable("generic", _coeff_fn(c), name, c)


def change_indicator(name: str = "changed") -> Observable:
    """Indicator of any environment change; saturates the inactivity bound."""
    return Observable("generic", lambda t: 0.0 if no_change(t) else 1.0, name)


def validate_observable(
    obs: Observable,
    trajectories: tuple[Trajectory, ...],
    iset: Callable[[Trajectory], bool] = no_change,
) -> bool:
    """Check the observable's promise on every enumerated trajectory.

    Returns whether phi vanishes on the quiet set (needed by the inactivity
    bound); raises ModeError when the declared promise fails.
    """
    zero_on_iset = True
    for t in trajectories:
        v = obs.fn(t)
        if obs.kind == "current":
            vr = obs.fn(reverse(t))
            if abs(v + vr) > 1e-12 * max(1.0, abs(v)):
                raise ModeError(f"observable {obs.name!r} is not reversal-odd at {t}")
        if iset(t) and abs(v) > 1e-12:
            zero_on_iset = False
    if obs.kind == "generic" and not zero_on_iset:
        raise ModeError(f"observable {obs.name!r} does not vanish on the quiet set")
    return zero_on_iset


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Exhaustively enumerated trajectory distribution of one experiment."""

    kraus: KrausSet
    mode: str
    n_rounds: int
    init_probs: np.ndarray
    init_basis: np.ndarray
    final_probs: np.ndarray
    final_basis: np.ndarray
    trajectories: tuple[Trajectory, ...]
    probs: np.ndarray

    def items(self) -> list[tuple[Trajectory, float]]:
        return list(zip(self.trajectories, self.probs.tolist()))

    def table(self) -> dict[Trajectory, float]:
        cached = getattr(self, "_table", None)
        if cached is None:
            cached = dict(zip(self.trajectories, self.probs.tolist()))
            object.__setattr__(self, "_table", cached)
        return cached

    def prob_of(self, gamma: Trajectory) -> float:
        return self.table().get(gamma, 0.0)


def _chain(kraus: KrausSet, pairs) -> np.ndarray:
    out = np.eye(kraus.d_s, dtype=complex)
    for (b, a) in pairs:
        out = kraus.ops[a, b] @ out
    return out


def enumerate_trajectories(
    fwd: KrausSet,
    init_probs,
    n_rounds: int,
    *,
    init_basis=None,
    final_basis=None,
    mode: str = STATIONARY,
    cap: int = DEFAULT_CAP,
) -> TrajectoryEnsemble:
    """Enumerate every trajectory of an n_rounds experiment with its probability.

    In stationary mode the final measurement reuses the initial basis and
    init_probs must be the fixed point's spectrum in that basis.  In general
    mode the final basis defaults to the eigenbasis of the evolved state.
    """
    if mode not in (STATIONARY, GENERAL):
        raise ModeError(f"unknown mode {mode!r}")
    if n_rounds < 1:
        raise DimError(f"need n_rounds >= 1, got {n_rounds}")
    d_s, d_e = fwd.d_s, fwd.d_e
    count = d_s * d_s * d_e ** (2 * n_rounds)
    if count > cap:
        raise EnumerationCapError(
            f"{count} trajectories exceed the cap {cap}; raise the cap or use mc_sample"
        )
    p = qlinalg.require_prob_vector(init_probs, d_s, what="init_probs")
    vin = np.eye(d_s, dtype=complex) if init_basis is None else qlinalg.as_cmatrix(init_basis)
    if float(np.abs(vin.conj().T @ vin - np.eye(d_s)).max()) > TOL.unitarity:
        raise DimError("init_basis is not unitary")

    if final_basis is not None:
        if mode == STATIONARY:
            raise ModeError("stationary mode fixes the final basis to the initial one")
        vout = qlinalg.as_cmatrix(final_basis)
        if float(np.abs(vout.conj().T @ vout - np.eye(d_s)).max()) > TOL.unitarity:
            raise DimError("final_basis is not unitary")
        evolved_spectrum = None
    elif mode == GENERAL:
        rho = (vin * p) @ vin.conj().T
        for _ in range(n_rounds):
            rho = channel_apply(fwd, rho)
        evolved_spectrum, vout = qlinalg.herm_eig(rho)
    else:
        vout = vin
        evolved_spectrum = None

    labels = [(b, a) for b in range(d_e) for a in range(d_e)]
    trajs: list[Trajectory] = []
    probs: list[float] = []
    marginal = np.zeros(d_s)
    for seq in product(labels, repeat=n_rounds):
        amp = vout.conj().T @ _chain(fwd, seq) @ vin   # amp[m, n]
        w = np.abs(amp) ** 2 * p[None, :]
        for n in range(d_s):
            for m in range(d_s):
                trajs.append(Trajectory(n, seq, m))
                probs.append(float(w[m, n]))
        marginal += w.sum(axis=1)

    prob_arr = np.asarray(probs)
    total = float(prob_arr.sum())
    if abs(total - 1.0) > TOL.prob_norm:
        raise ConsistencyError(f"trajectory probabilities sum to {total:.15g}")

    if mode == STATIONARY:
        drift = float(np.abs(marginal - p).max())
        if drift > 1e-7:
            raise ModeError(
                f"final marginal drifts {drift:.3e} from init_probs; "
                "stationary mode needs the channel fixed point"
            )
        final_probs = p
    else:
        final_probs = marginal
        if evolved_spectrum is not None:
            drift = float(np.abs(np.sort(marginal) - np.sort(evolved_spectrum)).max())
            if drift > 1e-8:
                raise ConsistencyError(
                    f"final marginal disagrees with evolved spectrum by {drift:.3e}"
                )

    return TrajectoryEnsemble(
        kraus=fwd,
        mode=mode,
        n_rounds=n_rounds,
        init_probs=p,
        init_basis=vin,
        final_probs=np.asarray(final_probs, dtype=float),
        final_basis=vout,
        trajectories=tuple(trajs),
        probs=prob_arr,
    )


def trajectory_prob(
    gamma: Trajectory,
    fwd: KrausSet,
    init_probs,
    *,
    init_basis=None,
    final_basis=None,
) -> float:
    """Forward probability of a single trajectory, from the amplitude product."""
    p = qlinalg.require_prob_vector(init_probs, fwd.d_s, what="init_probs")
    vin = np.eye(fwd.d_s, dtype=complex) if init_basis is None else qlinalg.as_cmatrix(init_basis)
    vout = vin if final_basis is None else qlinalg.as_cmatrix(final_basis)
    amp = vout[:, gamma.m].conj() @ _chain(fwd, gamma.pairs) @ vin[:, gamma.n]
    return float(p[gamma.n] * abs(amp) ** 2)


def backward_prob(
    gamma: Trajectory,
    fwd: KrausSet,
    init_probs,
    final_probs=None,
    *,
    init_basis=None,
    final_basis=None,
    bwd: KrausSet | None = None,
) -> float:
    """Probability of observing the record gamma in the reversed experiment.

    Evaluated directly as an amplitude product of the adjoint family: the
    reversed experiment starts from the time-reversed final state (outcome
    probabilities final_probs, defaulting to init_probs for the stationary
    case) and is measured against the time-reversed initial basis.
    """
    d_s = fwd.d_s
    p = qlinalg.require_prob_vector(init_probs, d_s, what="init_probs")
    q = p if final_probs is None else qlinalg.require_prob_vector(final_probs, d_s, what="final_probs")
    if np.any(fwd.env_probs <= 0):
        raise SupportError("reversed experiment needs strictly positive env_probs")
    vin = np.eye(d_s, dtype=complex) if init_basis is None else qlinalg.as_cmatrix(init_basis)
    vout = vin if final_basis is None else qlinalg.as_cmatrix(final_basis)
    b = backward_kraus(fwd) if bwd is None else bwd
    # The record's rounds replay in original order through the adjoint family.
    chain = np.eye(d_s, dtype=complex)
    for (before, after) in gamma.pairs:
        chain = b.ops[after, before] @ chain
    amp = vin[:, gamma.m].conj() @ chain @ vout[:, gamma.n]
    return float(q[gamma.n] * abs(amp) ** 2)


@dataclass(frozen=True)
class TrajectoryStats:
    """Exact ensemble statistics of one experiment and one observable."""

    mode: str
    n_rounds: int
    mean_phi: float | None
    var_phi: float | None
    entropy_production: float      # <ln P/P~(reversed record)>
    asymmetry: float               # <ln P/P~(same record)>
    boundary_term: float           # <ln q_m q_n / (p_m p_n)>, zero when stationary
    inactivity: float              # forward mass of the quiet set
    lecam: float                   # triangular divergence between P and its reversal
    ift_average: float             # <exp(-asymmetry per trajectory)>
    excluded_mass: float           # forward mass excluded from log sums
    observable_kind: str | None
    phi_zero_on_iset: bool

    @property
    def total_irreversibility(self) -> float:
        return self.entropy_production + self.asymmetry + self.boundary_term

    @property
    def rel_fluct(self) -> float | None:
        if self.mean_phi is None or self.mean_phi == 0.0:
            return None
        return self.var_phi / self.mean_phi**2


def compute_stats(
    ensemble: TrajectoryEnsemble,
    observable: Observable | None = None,
    *,
    iset: Callable[[Trajectory], bool] = no_change,
) -> TrajectoryStats:
    """All trajectory statistics in two exact passes over the ensemble.

    Backward masses come from the support-safe probability-ratio identities;
    trajectories carrying less than the zero floor of forward mass are
    excluded from the log sums and their mass is reported.
    """
    p = ensemble.init_probs
    q = ensemble.final_probs if ensemble.mode == GENERAL else ensemble.init_probs
    p_env = ensemble.kraus.env_probs
    if np.any(p_env <= 0):
        raise SupportError("reversal statistics need strictly positive env_probs")
    log_env = np.log(p_env)
    table = ensemble.table()

    zero_on_iset = True
    if observable is not None:
        zero_on_iset = validate_observable(observable, ensemble.trajectories, iset)

    with np.errstate(divide="ignore"):
        log_p = np.where(p > 0, np.log(np.clip(p, TOL.zero_prob, None)), -math.inf).tolist()
        log_q = np.where(q > 0, np.log(np.clip(q, TOL.zero_prob, None)), -math.inf).tolist()
    log_env = log_env.tolist()
    p = p.tolist()
    q = q.tolist()

    mean_phi = 0.0
    sigma = 0.0
    sigma_star = 0.0
    boundary = 0.0
    inactivity = 0.0
    lecam = 0.0
    ift = 0.0
    excluded = 0.0
    phis: list[float] = []

    for t, pr in zip(ensemble.trajectories, ensemble.probs.tolist()):
        phi = float(observable.fn(t)) if observable is not None else 0.0
        phis.append(phi)
        prev = table.get(reverse(t), 0.0)
        if pr + prev > 0.0:
            d = pr - prev
            lecam += 0.5 * d * d / (pr + prev)
        if pr <= 0.0:
            continue
        mean_phi += pr * phi
        if iset(t):
            inactivity += pr
        env_log_ratio = 0.0
        for (b, a) in t.pairs:
            env_log_ratio += log_env[b] - log_env[a]
        # same-record backward mass: (q_n/p_m) * prod(p_b/p_a) * P(reversed);
        # prev > 0 guarantees p[t.m] > 0
        bwd_same = (q[t.n] / p[t.m]) * math.exp(env_log_ratio) * prev if prev > 0.0 else 0.0
        ift += bwd_same
        if ensemble.mode == GENERAL:
            boundary += pr * (log_q[t.m] + log_q[t.n] - log_p[t.m] - log_p[t.n])
        if pr < TOL.zero_prob:
            excluded += pr
            continue
        # reversed-record backward mass: (q_m/p_n) * prod(p_a/p_b) * P
        sigma += pr * (log_p[t.n] - log_q[t.m] + env_log_ratio)
        if bwd_same >= TOL.zero_prob:
            sigma_star += pr * (math.log(pr) - math.log(bwd_same))
        else:
            excluded += pr

    var_phi = 0.0
    if observable is not None:
        for pr, phi in zip(ensemble.probs.tolist(), phis):
            d = phi - mean_phi
            var_phi += pr * d * d

    if sigma < -TOL.nonneg:
        raise ConsistencyError(f"entropy production came out {sigma:.3e} < 0")
    if sigma_star < -TOL.nonneg:
        raise ConsistencyError(f"asymmetry came out {sigma_star:.3e} < 0")
    if not (0.0 <= inactivity <= 1.0 + 1e-12):
        raise ConsistencyError(f"inactivity {inactivity} outside [0, 1]")
    if not (0.0 <= lecam <= 1.0 + 1e-12):
        raise ConsistencyError(f"triangular divergence {lecam} outside [0, 1]")

    return TrajectoryStats(
        mode=ensemble.mode,
        n_rounds=ensemble.n_rounds,
        mean_phi=mean_phi if observable is not None else None,
        var_phi=var_phi if observable is not None else None,
        entropy_production=sigma,
        asymmetry=sigma_star,
        boundary_term=boundary,
        inactivity=inactivity,
        lecam=lecam,
        ift_average=ift,
        excluded_mass=excluded,
        observable_kind=observable.kind if observable is not None else None,
        phi_zero_on_iset=zero_on_iset,
    )


def sigma_from_states(spec: ModelSpec, rho_s, env_probs=None) -> float:
    """Entropy production of a stationary run from states alone.

    Equals n_rounds times the relative entropy of the joint post-round state
    with respect to the uncorrelated inputs; agrees with the trajectory sum
    for the fixed point of the round channel.
    """
    rho_s = qlinalg.require_density_matrix(rho_s, what="rho_s")
    p_env = gibbs_env_probs(spec) if env_probs is None else qlinalg.require_prob_vector(
        env_probs, spec.d_e, what="env_probs"
    )
    rho_e = np.diag(p_env).astype(complex)
    joint = qlinalg.kron(rho_s, rho_e)
    u = total_unitary(spec)
    evolved = u @ joint @ u.conj().T
    return spec.n_rounds * qlinalg.quantum_rel_entropy(evolved, joint)


def sigma_from_states_general(spec: ModelSpec, rho_path, env_probs=None) -> float:
    """Entropy production of a non-stationary run from the state path.

    rho_path is [rho(0), rho(tau), ..., rho(N tau)] with each step one round
    of the channel (verified); the result sums the per-round relative
    entropies of the joint state against the refreshed product.
    """
    p_env = gibbs_env_probs(spec) if env_probs is None else qlinalg.require_prob_vector(
        env_probs, spec.d_e, what="env_probs"
    )
    if len(rho_path) != spec.n_rounds + 1:
        raise DimError(f"need n_rounds+1 states, got {len(rho_path)}")
    rho_e = np.diag(p_env).astype(complex)
    u = total_unitary(spec)
    total = 0.0
    for i in range(1, len(rho_path)):
        prev = qlinalg.require_density_matrix(rho_path[i - 1], what=f"rho_path[{i-1}]")
        cur = qlinalg.require_density_matrix(rho_path[i], what=f"rho_path[{i}]")
        joint = u @ qlinalg.kron(prev, rho_e) @ u.conj().T
        reduced = qlinalg.partial_trace_env(joint, spec.d_s, spec.d_e)
        drift = float(np.abs(reduced - cur).max())
        if drift > 1e-8:
            raise ModeError(f"rho_path[{i}] is not one round after rho_path[{i-1}]: drift {drift:.3e}")
        total += qlinalg.quantum_rel_entropy(joint, qlinalg.kron(cur, rho_e))
    return total


def entanglement_entropy_avg(spec: ModelSpec, rho_s, env_probs=None) -> float:
    """Average post-round entanglement entropy over measured input pairs."""
    w, v = qlinalg.herm_eig(qlinalg.require_density_matrix(rho_s, what="rho_s"))
    p_env = gibbs_env_probs(spec) if env_probs is None else qlinalg.require_prob_vector(
        env_probs, spec.d_e, what="env_probs"
    )
    u = total_unitary(spec)
    total = 0.0
    for n in range(spec.d_s):
        if w[n] <= TOL.eig_floor:
            continue
        for nu in range(spec.d_e):
            if p_env[nu] <= TOL.eig_floor:
                continue
            joint_in = np.zeros(spec.d_s * spec.d_e, dtype=complex)
            joint_in.reshape(spec.d_s, spec.d_e)[:, nu] = v[:, n]
            psi = (u @ joint_in).reshape(spec.d_s, spec.d_e)
            reduced = psi @ psi.conj().T
            total += float(w[n]) * float(p_env[nu]) * qlinalg.vn_entropy(reduced)
    return total


@dataclass(frozen=True)
class MCStats:
    """Streaming Monte Carlo estimates for a stationary experiment."""

    n_samples: int
    mean_phi: float | None
    var_phi: float | None
    stderr_phi: float | None
    inactivity: float
    entropy_production: float
    asymmetry: float
    stderr_entropy: float
    stderr_asymmetry: float
    excluded_samples: int


def mc_sample(
    fwd: KrausSet,
    init_probs,
    n_samples: int,
    seed: int,
    *,
    observable: Observable | None = None,
    init_basis=None,
    n_rounds: int = 1,
    batch: int = 65536,
) -> MCStats:
    """Sample trajectories sequentially and estimate stationary statistics.

    Draws the initial outcome, propagates the conditional pure state round
    by round through the Kraus family, and measures the final outcome in the
    initial basis.  Observable and inactivity estimates are unbiased;
    entropy production and asymmetry average the exact per-trajectory log
    ratios of the sampled records.  Fixed seed gives bit-identical output.
    """
    if n_samples < 1:
        raise DimError(f"need n_samples >= 1, got {n_samples}")
    d_s, d_e = fwd.d_s, fwd.d_e
    p = qlinalg.require_prob_vector(init_probs, d_s, what="init_probs")
    if np.any(fwd.env_probs <= 0):
        raise SupportError("sampling reversal ratios needs strictly positive env_probs")
    basis = np.eye(d_s, dtype=complex) if init_basis is None else qlinalg.as_cmatrix(init_basis)
    k_flat = fwd.ops.reshape(d_e * d_e, d_s, d_s)     # flat label c = after*d_e + before
    log_env = np.log(fwd.env_probs)
    with np.errstate(divide="ignore"):
        log_p = np.where(p > 0, np.log(np.clip(p, TOL.zero_prob, None)), -math.inf)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))

    sum_phi = sum_phi2 = 0.0
    sum_quiet = 0.0
    sum_sigma = sum_star = 0.0
    sum_sigma2 = sum_star2 = 0.0
    excluded = 0
    star_count = 0

    done = 0
    while done < n_samples:
        nb = min(batch, n_samples - done)
        idx_n = rng.choice(d_s, size=nb, p=p)
        psi = basis[:, idx_n].T.copy()
        log_fwd = log_p[idx_n].copy()
        env_log_ratio = np.zeros(nb)
        changed = np.zeros(nb, dtype=bool)
        before_rec = np.empty((n_rounds, nb), dtype=np.int64)
        after_rec = np.empty((n_rounds, nb), dtype=np.int64)
        rows = np.arange(nb)
        for r in range(n_rounds):
            amps = np.einsum("cij,bj->bci", k_flat, psi)
            w = np.abs(amps) ** 2
            w = w.sum(axis=2)
            tot = w.sum(axis=1)
            u = rng.random(nb)
            c = (np.cumsum(w, axis=1) < (u * tot)[:, None]).sum(axis=1)
            c = np.minimum(c, d_e * d_e - 1)
            after, before = c // d_e, c % d_e
            w_sel = w[rows, c]
            log_fwd += np.log(w_sel)
            psi = amps[rows, c] / np.sqrt(w_sel)[:, None]
            env_log_ratio += log_env[before] - log_env[after]
            changed |= before != after
            before_rec[r], after_rec[r] = before, after

        fin = np.abs(basis.conj().T @ psi.T) ** 2     # (d_s, nb)
        fin = fin.T
        ftot = fin.sum(axis=1)
        u = rng.random(nb)
        idx_m = (np.cumsum(fin, axis=1) < (u * ftot)[:, None]).sum(axis=1)
        idx_m = np.minimum(idx_m, d_s - 1)
        log_fwd += np.log(fin[rows, idx_m])

        sigma = log_p[idx_n] - log_p[idx_m] + env_log_ratio

        # replay the same record through the forward family in reversed roles
        psi2 = basis[:, idx_m].T.copy()
        for r in range(n_rounds - 1, -1, -1):
            c_rev = before_rec[r] * d_e + after_rec[r]
            psi2 = np.einsum("bij,bj->bi", k_flat[c_rev], psi2)
        amp_rev = np.einsum("jb,bj->b", basis.conj()[:, idx_n], psi2)
        p_rev = p[idx_m] * np.abs(amp_rev) ** 2
        ok = p_rev > TOL.zero_prob
        log_bwd_same = np.where(
            ok,
            log_p[idx_n] - log_p[idx_m] + env_log_ratio + np.log(np.clip(p_rev, TOL.zero_prob, None)),
            -math.inf,
        )
        star = log_fwd - log_bwd_same

        if observable is not None:
            if observable.coeffs is not None:
                phi = observable.coeffs[after_rec, before_rec].sum(axis=0)
            else:
                phi = np.array([
                    observable.fn(Trajectory(
                        int(idx_n[i]),
                        tuple((int(before_rec[r, i]), int(after_rec[r, i])) for r in range(n_rounds)),
                        int(idx_m[i]),
                    ))
                    for i in range(nb)
                ])
            sum_phi += float(phi.sum())
            sum_phi2 += float((phi * phi).sum())
        sum_quiet += float((~changed).sum())
        sum_sigma += float(sigma.sum())
        sum_sigma2 += float((sigma * sigma).sum())
        sum_star += float(star[ok].sum())
        sum_star2 += float((star[ok] * star[ok]).sum())
        star_count += int(ok.sum())
        excluded += int((~ok).sum())
        done += nb

    n = float(n_samples)
    mean_phi = var_phi = stderr_phi = None
    if observable is not None:
        mean_phi = sum_phi / n
        var_phi = max(sum_phi2 / n - mean_phi**2, 0.0)
        stderr_phi = math.sqrt(var_phi / n)
    ns = max(star_count, 1)
    mean_sigma = sum_sigma / n
    mean_star = sum_star / ns
    return MCStats(
        n_samples=n_samples,
        mean_phi=mean_phi,
        var_phi=var_phi,
        stderr_phi=stderr_phi,
        inactivity=sum_quiet / n,
        entropy_production=mean_sigma,
        asymmetry=mean_star,
        stderr_entropy=math.sqrt(max(sum_sigma2 / n - mean_sigma**2, 0.0) / n),
        stderr_asymmetry=math.sqrt(max(sum_star2 / ns - mean_star**2, 0.0) / ns),
        excluded_samples=excluded,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_trajectories_csv(fh, ensemble: TrajectoryEnsemble, observable: Observable | None = None) -> None:
    """Write the enumerated ensemble as CSV.

    Columns: n, nu_1..nu_N, mu_1..mu_N, m, p_fwd, p_bwd_same,
    p_fwd_reversed, phi.  nu_i/mu_i are the before/after outcomes of round
    i; p_bwd_same is the reversed-experiment mass of the row's record and
    p_fwd_reversed the forward mass of the reversed record.
    """
    n_rounds = ensemble.n_rounds
    p = ensemble.init_probs
    q = ensemble.final_probs if ensemble.mode == GENERAL else ensemble.init_probs
    log_env = np.log(ensemble.kraus.env_probs)
    table = ensemble.table()
    header = (
        ["n"]
        + [f"nu_{i}" for i in range(1, n_rounds + 1)]
        + [f"mu_{i}" for i in range(1, n_rounds + 1)]
        + ["m", "p_fwd", "p_bwd_same", "p_fwd_reversed", "phi"]
    )
    fh.write(",".join(header) + "\n")
    for t, pr in zip(ensemble.trajectories, ensemble.probs):
        prev = table.get(reverse(t), 0.0)
        env_log_ratio = float(sum(log_env[b] - log_env[a] for (b, a) in t.pairs))
        if prev > 0.0 and p[t.m] > 0.0:
            bwd_same = (q[t.n] / p[t.m]) * math.exp(env_log_ratio) * prev
        else:
            bwd_same = 0.0
        phi = observable.fn(t) if observable is not None else 0.0
        row = (
            [str(t.n)]
            + [str(b) for (b, _a) in t.pairs]
            + [str(a) for (_b, a) in t.pairs]
            + [str(t.m), _fmt(pr), _fmt(bwd_same), _fmt(prev), _fmt(phi)]
        )
        fh.write(",".join(row) + "\n")

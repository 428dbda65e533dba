"""Record enumeration, reversal statistics, and their exact identities."""

import io
import itertools
import math

import numpy as np
import pytest

from qprecision import bounds, qlinalg
from qprecision import trajectories as traj
from qprecision.errors import (
    ConsistencyError,
    DimError,
    EnumerationCapError,
    ModeError,
    SupportError,
)
from qprecision.model import (
    build_model,
    channel_apply,
    forward_kraus,
    stationary_state,
    thermal_operation_model,
)

H_S = 0.5 * np.array([[1.0, 0.1], [0.1, -1.0]], dtype=complex)


def _random_hermitian(rng, d):
    m = rng.uniform(-1.0, 1.0, (d, d)) + 1j * rng.uniform(-1.0, 1.0, (d, d))
    return 0.5 * (m + m.conj().T)


def _coupled_model(rng, d_e=2, lam=1.0, tau=1.0, beta=1.0, n_rounds=1):
    h_e = np.diag(rng.uniform(0.0, 1.0, d_e)).astype(complex)
    return build_model(
        H_S, h_e, _random_hermitian(rng, 2), _random_hermitian(rng, d_e),
        lam=lam, beta=beta, tau=tau, n_rounds=n_rounds,
    )


def _stationary_setup(spec, cap=10**7):
    k = forward_kraus(spec)
    rho = stationary_state(k)
    w, v = qlinalg.herm_eig(rho)
    ens = traj.enumerate_trajectories(k, w, spec.n_rounds, init_basis=v, cap=cap)
    return k, w, v, ens


def test_enumeration_count_order_and_normalization():
    rng = np.random.default_rng(1)
    for d_e, n_rounds in ((2, 1), (2, 2), (3, 1)):
        spec = _coupled_model(rng, d_e=d_e, lam=1.1, n_rounds=n_rounds)
        _, _, _, ens = _stationary_setup(spec)
        assert len(ens.trajectories) == 4 * d_e ** (2 * n_rounds)
        assert abs(float(ens.probs.sum()) - 1.0) < 1e-12
        # row order: pair sequences in product order, then n, then m innermost
        labels = [(b, a) for b in range(d_e) for a in range(d_e)]
        expect = [
            traj.Trajectory(n, seq, m)
            for seq in itertools.product(labels, repeat=n_rounds)
            for n in range(2)
            for m in range(2)
        ]
        assert list(ens.trajectories) == expect


def test_reverse_is_an_involution_that_swaps_outcome_roles():
    g = traj.Trajectory(0, ((1, 2), (0, 1)), 1)
    r = traj.reverse(g)
    assert r == traj.Trajectory(1, ((1, 0), (2, 1)), 0)
    assert traj.reverse(r) == g
    assert traj.no_change(traj.Trajectory(0, ((1, 1), (0, 0)), 1))
    assert not traj.no_change(g)


def test_enumeration_cap_and_mode_guards():
    rng = np.random.default_rng(2)
    spec = _coupled_model(rng, d_e=3, lam=1.0)
    k = forward_kraus(spec)
    rho = stationary_state(k)
    w, v = qlinalg.herm_eig(rho)
    with pytest.raises(EnumerationCapError):
        traj.enumerate_trajectories(k, w, 1, init_basis=v, cap=10)
    with pytest.raises(ModeError):
        traj.enumerate_trajectories(k, w, 1, init_basis=v, mode="sideways")
    with pytest.raises(ModeError):
        traj.enumerate_trajectories(k, w, 1, init_basis=v, final_basis=np.eye(2))
    with pytest.raises(DimError):
        traj.enumerate_trajectories(k, w, 0, init_basis=v)
    with pytest.raises(DimError):
        traj.enumerate_trajectories(k, w, 1, init_basis=2.0 * np.eye(2))
    # stationary mode insists on the fixed point's spectrum
    with pytest.raises(ModeError, match="fixed point"):
        traj.enumerate_trajectories(k, np.array([1.0, 0.0]), 1)


def test_trajectory_prob_matches_enumerated_table():
    rng = np.random.default_rng(3)
    spec = _coupled_model(rng, d_e=3, lam=1.3)
    k, w, v, ens = _stationary_setup(spec)
    for g, pr in ens.items():
        direct = traj.trajectory_prob(g, k, w, init_basis=v)
        assert abs(direct - pr) < 1e-14


def test_backward_prob_agrees_with_the_ratio_identity():
    rng = np.random.default_rng(4)
    spec = _coupled_model(rng, d_e=2, lam=1.5, n_rounds=2)
    k, w, v, ens = _stationary_setup(spec)
    table = ens.table()
    log_env = np.log(k.env_probs)
    checked = 0
    for g, pr in ens.items():
        prev = table.get(traj.reverse(g), 0.0)
        if pr < 1e-12 or prev < 1e-12:
            continue
        ratio = math.exp(float(sum(log_env[b] - log_env[a] for (b, a) in g.pairs)))
        expect = (w[g.n] / w[g.m]) * ratio * prev
        direct = traj.backward_prob(g, k, w, init_basis=v)
        assert abs(direct - expect) <= 1e-10 * expect
        checked += 1
    assert checked > 20


def test_backward_prob_requires_full_environment_support():
    rng = np.random.default_rng(5)
    spec = _coupled_model(rng, d_e=2, lam=1.0)
    k = forward_kraus(spec, env_probs=[1.0, 0.0])
    with pytest.raises(SupportError):
        traj.backward_prob(traj.Trajectory(0, ((0, 0),), 0), k, [0.5, 0.5])


def test_product_identity_stationary():
    rng = np.random.default_rng(6)
    spec = _coupled_model(rng, d_e=3, lam=1.2)
    k, w, v, ens = _stationary_setup(spec)
    table = ens.table()
    for g, pr in ens.items():
        prev = table.get(traj.reverse(g), 0.0)
        if pr < 1e-12 or prev < 1e-12:
            continue
        pb = traj.backward_prob(g, k, w, init_basis=v)
        pbr = traj.backward_prob(traj.reverse(g), k, w, init_basis=v)
        assert abs(pb * pbr - pr * prev) <= 1e-10 * pr * prev


def test_product_identity_general_mode_carries_the_boundary_factor():
    rng = np.random.default_rng(7)
    spec = _coupled_model(rng, d_e=2, lam=1.1, tau=0.9)
    k = forward_kraus(spec)
    rho0 = np.array([[0.62, 0.10 + 0.05j], [0.10 - 0.05j, 0.38]], dtype=complex)
    w0, v0 = qlinalg.herm_eig(rho0)
    ens = traj.enumerate_trajectories(k, w0, 1, init_basis=v0, mode=traj.GENERAL)
    p, q = ens.init_probs, ens.final_probs
    table = ens.table()
    for g, pr in ens.items():
        prev = table.get(traj.reverse(g), 0.0)
        if pr < 1e-12 or prev < 1e-12:
            continue
        pb = traj.backward_prob(
            g, k, p, q, init_basis=ens.init_basis, final_basis=ens.final_basis
        )
        pbr = traj.backward_prob(
            traj.reverse(g), k, p, q, init_basis=ens.init_basis, final_basis=ens.final_basis
        )
        rhs = pr * prev * (q[g.m] * q[g.n]) / (p[g.m] * p[g.n])
        assert abs(pb * pbr - rhs) <= 1e-10 * rhs


def test_stats_decomposition_matches_direct_log_ratio_sum():
    rng = np.random.default_rng(8)
    spec = _coupled_model(rng, d_e=2, lam=1.0, tau=0.8, n_rounds=2)
    k = forward_kraus(spec)
    rho0 = np.array([[0.7, 0.12 - 0.08j], [0.12 + 0.08j, 0.3]], dtype=complex)
    w0, v0 = qlinalg.herm_eig(rho0)
    ens = traj.enumerate_trajectories(k, w0, 2, init_basis=v0, mode=traj.GENERAL)
    st = traj.compute_stats(ens)
    table = ens.table()
    direct = 0.0
    for g, pr in ens.items():
        prev = table.get(traj.reverse(g), 0.0)
        if pr <= 1e-300 or prev <= 0.0:
            continue
        direct += pr * math.log(pr / prev)
    assert abs(st.total_irreversibility - direct) < 1e-9
    assert st.excluded_mass < 1e-12


def test_sigma_matches_the_state_route_on_stationary_models():
    rng = np.random.default_rng(9)
    for _ in range(10):
        spec = _coupled_model(
            rng,
            d_e=int(rng.integers(2, 4)),
            lam=float(rng.uniform(0.5, 2.0)),
            tau=float(rng.uniform(0.5, 2.0)),
            n_rounds=int(rng.integers(1, 3)),
        )
        k, w, v, ens = _stationary_setup(spec)
        st = traj.compute_stats(ens)
        rho = (v * w) @ v.conj().T
        assert abs(st.entropy_production - traj.sigma_from_states(spec, rho)) < 1e-9


def test_sigma_matches_the_state_route_on_a_general_path():
    rng = np.random.default_rng(10)
    spec = _coupled_model(rng, d_e=2, lam=0.9, tau=0.8, n_rounds=2)
    k = forward_kraus(spec)
    rho0 = np.array([[0.7, 0.12 - 0.08j], [0.12 + 0.08j, 0.3]], dtype=complex)
    rho1 = channel_apply(k, rho0)
    rho2 = channel_apply(k, rho1)
    w0, v0 = qlinalg.herm_eig(rho0)
    ens = traj.enumerate_trajectories(k, w0, 2, init_basis=v0, mode=traj.GENERAL)
    st = traj.compute_stats(ens)
    route = traj.sigma_from_states_general(spec, [rho0, rho1, rho2])
    assert abs(st.entropy_production - route) < 1e-9
    with pytest.raises(DimError):
        traj.sigma_from_states_general(spec, [rho0, rho1])
    with pytest.raises(ModeError, match="one round after"):
        traj.sigma_from_states_general(spec, [rho0, rho0, rho2])


def test_ift_average_is_one_on_full_support():
    rng = np.random.default_rng(11)
    for _ in range(5):
        spec = _coupled_model(rng, d_e=int(rng.integers(2, 4)), lam=float(rng.uniform(0.8, 2.0)))
        _, _, _, ens = _stationary_setup(spec)
        st = traj.compute_stats(ens)
        assert abs(st.ift_average - 1.0) < 1e-9


def test_thermal_operation_asymmetry_is_the_classical_divergence():
    spec = thermal_operation_model(
        (0.0, 0.7), (0.0, 0.7, 1.4),
        [((0, 1), (1, 0), 0.8), ((0, 2), (1, 1), 0.6)],
        tau=1.3, beta=0.9,
    )
    k = forward_kraus(spec)
    p0 = np.array([0.58, 0.42])
    eye = np.eye(2)
    # both measurements in the energy basis; the sorted default eigenbasis
    # would relabel outcomes, so the final basis is pinned explicitly
    ens = traj.enumerate_trajectories(k, p0, 1, init_basis=eye, final_basis=eye, mode=traj.GENERAL)
    p, q = ens.init_probs, ens.final_probs
    for g, pr in ens.items():
        if pr < 1e-14:
            continue
        pb = traj.backward_prob(g, k, p, q, init_basis=eye, final_basis=eye)
        expect = (q[g.n] / p[g.n]) * pr
        assert abs(pb - expect) <= 1e-12 * expect
    st = traj.compute_stats(ens)
    dkl = float(sum(pi * math.log(pi / qi) for pi, qi in zip(p, q)))
    assert abs(st.asymmetry - dkl) < 1e-12
    # at the thermal fixed point the asymmetry vanishes entirely
    rho_g = qlinalg.gibbs_state(spec.h_s, spec.beta)
    wg, vg = qlinalg.herm_eig(rho_g)
    ens_g = traj.enumerate_trajectories(k, wg, 1, init_basis=vg)
    st_g = traj.compute_stats(ens_g)
    assert st_g.asymmetry < 1e-10
    assert st_g.entropy_production < 1e-10


def test_observable_constructors_and_validation_guards():
    with pytest.raises(DimError):
        traj.current_observable(np.zeros((2, 3)))
    with pytest.raises(ModeError, match="antisymmetric"):
        traj.current_observable(np.eye(2))
    with pytest.raises(ModeError, match="diagonal"):
        traj.generic_observable(np.eye(2))
    with pytest.raises(ModeError, match="kind"):
        traj.Observable("weird", lambda t: 0.0)

    rng = np.random.default_rng(12)
    spec = _coupled_model(rng, d_e=2, lam=1.0)
    _, _, _, ens = _stationary_setup(spec)
    # a constant pretending to be reversal-odd is caught exhaustively
    fake = traj.Observable("current", lambda t: 1.0, "fake")
    with pytest.raises(ModeError, match="reversal-odd"):
        traj.validate_observable(fake, ens.trajectories)
    leaky = traj.Observable("generic", lambda t: 1.0, "leaky")
    with pytest.raises(ModeError, match="quiet"):
        traj.validate_observable(leaky, ens.trajectories)
    assert traj.validate_observable(traj.change_indicator(), ens.trajectories)


def test_change_indicator_saturates_the_kinetic_bound():
    rng = np.random.default_rng(13)
    spec = _coupled_model(rng, d_e=3, lam=1.4)
    _, _, _, ens = _stationary_setup(spec)
    st = traj.compute_stats(ens, traj.change_indicator())
    quiet = st.inactivity
    assert 0.0 < quiet < 1.0
    assert abs(st.mean_phi - (1.0 - quiet)) < 1e-12
    assert abs(st.var_phi - quiet * (1.0 - quiet)) < 1e-12
    chk = bounds.check_kur(st)
    assert abs(chk.margin) < 1e-10


def test_precision_chain_through_the_triangular_divergence():
    # var/mean^2 >= 1/lecam - 1 >= floor(total irreversibility)
    rng = np.random.default_rng(14)
    checked = 0
    for _ in range(8):
        spec = _coupled_model(rng, d_e=3, lam=float(rng.uniform(0.8, 2.0)))
        _, _, _, ens = _stationary_setup(spec)
        c = rng.uniform(-1.0, 1.0, (3, 3))
        obs = traj.current_observable(0.5 * (c - c.T))
        st = traj.compute_stats(ens, obs)
        if st.rel_fluct is None or st.lecam <= 0.0:
            continue
        mid = 1.0 / st.lecam - 1.0
        assert st.rel_fluct >= mid - 1e-9 * max(1.0, st.rel_fluct)
        assert mid >= bounds.fluctuation_floor(st.total_irreversibility) - 1e-9
        checked += 1
    assert checked >= 5


def test_compute_stats_rejects_unsupported_environment():
    rng = np.random.default_rng(15)
    spec = _coupled_model(rng, d_e=2, lam=1.0)
    k = forward_kraus(spec, env_probs=[1.0, 0.0])
    rho = stationary_state(k)
    w, v = qlinalg.herm_eig(rho)
    ens = traj.enumerate_trajectories(k, w, 1, init_basis=v)
    with pytest.raises(SupportError):
        traj.compute_stats(ens)


def test_entanglement_entropy_tracks_the_coupling():
    rng = np.random.default_rng(16)
    spec0 = _coupled_model(rng, d_e=2, lam=0.0)
    rho = qlinalg.gibbs_state(spec0.h_s, spec0.beta)
    assert traj.entanglement_entropy_avg(spec0, rho) < 1e-12
    rng = np.random.default_rng(16)
    spec1 = _coupled_model(rng, d_e=2, lam=1.5)
    k = forward_kraus(spec1)
    rho1 = stationary_state(k)
    assert traj.entanglement_entropy_avg(spec1, rho1) > 1e-3


def test_mc_sampling_is_deterministic_and_matches_enumeration():
    rng = np.random.default_rng(17)
    spec = _coupled_model(rng, d_e=2, lam=1.1)
    k, w, v, ens = _stationary_setup(spec)
    obs = traj.current_observable([[0.0, 1.0], [-1.0, 0.0]])
    st = traj.compute_stats(ens, obs)
    mc = traj.mc_sample(k, w, 40000, 123, observable=obs, init_basis=v)
    again = traj.mc_sample(k, w, 40000, 123, observable=obs, init_basis=v)
    assert mc == again
    assert abs(mc.mean_phi - st.mean_phi) < 5.0 * mc.stderr_phi
    assert abs(mc.entropy_production - st.entropy_production) < 5.0 * mc.stderr_entropy
    assert abs(mc.asymmetry - st.asymmetry) < 5.0 * max(mc.stderr_asymmetry, 1e-12)
    se_quiet = math.sqrt(st.inactivity * (1.0 - st.inactivity) / 40000)
    assert abs(mc.inactivity - st.inactivity) < 5.0 * se_quiet
    with pytest.raises(DimError):
        traj.mc_sample(k, w, 0, 1)


def test_mc_coefficient_fast_path_matches_the_generic_function():
    rng = np.random.default_rng(18)
    spec = _coupled_model(rng, d_e=2, lam=1.2, n_rounds=2)
    k, w, v, _ = _stationary_setup(spec)
    c = np.array([[0.0, 0.7], [-0.7, 0.0]])
    fast = traj.current_observable(c)
    slow = traj.Observable("current", fast.fn, "slow", None)
    a = traj.mc_sample(k, w, 5000, 99, observable=fast, init_basis=v)
    b = traj.mc_sample(k, w, 5000, 99, observable=slow, init_basis=v)
    assert abs(a.mean_phi - b.mean_phi) < 1e-12
    assert abs(a.var_phi - b.var_phi) < 1e-12


def test_dump_trajectories_csv_layout():
    rng = np.random.default_rng(19)
    spec = _coupled_model(rng, d_e=2, lam=1.0, n_rounds=2)
    _, _, _, ens = _stationary_setup(spec)
    obs = traj.change_indicator()
    buf = io.StringIO()
    traj.dump_trajectories_csv(buf, ens, obs)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,nu_1,nu_2,mu_1,mu_2,m,p_fwd,p_bwd_same,p_fwd_reversed,phi"
    assert len(lines) == 1 + len(ens.trajectories)
    first = lines[1].split(",")
    g = ens.trajectories[0]
    assert first[0] == str(g.n) and first[5] == str(g.m)
    assert float(first[6]) == float(ens.probs[0])
    # repr floats round-trip exactly
    assert first[6] == repr(float(ens.probs[0]))

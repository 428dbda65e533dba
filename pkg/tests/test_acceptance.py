"""End-to-end verification battery for the shipped precision bounds.

Each check prints a single [PASS]/[FAIL] line with the measured numbers, so
`pytest tests/test_acceptance.py -s` doubles as a verification report. The
checks run full seeded campaigns at desk scale; nothing here is mocked.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from qprecision import bounds, markov, qlinalg
from qprecision import trajectories as traj
from qprecision.errors import ConvergenceError, NonUniqueStationaryError
from qprecision.experiments import (
    DEFAULT_SEED,
    ExperimentConfig,
    random_lindblad,
    rng_stream,
    run_kur_scatter,
    run_lambda_sweep,
    run_tur_scatter,
    sample_model,
)
from qprecision.model import (
    channel_apply,
    forward_kraus,
    stationary_state,
    thermal_operation_model,
)


def _verdict(name: str, ok: bool, detail: str) -> bool:
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}: {detail}")
    return ok


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def _stationary_ensemble(spec, cap=10**7):
    k = forward_kraus(spec)
    rho = stationary_state(k)
    w, v = qlinalg.herm_eig(rho)
    ens = traj.enumerate_trajectories(k, w, spec.n_rounds, init_basis=v, cap=cap)
    return k, rho, w, v, ens


def _floor_oracle(x: float) -> float:
    y = x / 2.0
    hi = max(math.sqrt(y), y) + 2.0
    r = brentq(lambda t: t * math.tanh(t) - y, 1e-12, hi, rtol=8.9e-16)
    return 1.0 / math.sinh(r) ** 2


def test_01_antisymmetric_fluctuations_respect_the_extended_bound(tmp_path):
    t0 = time.perf_counter()
    res = run_tur_scatter(ExperimentConfig(n_models=200, out_dir=str(tmp_path)))
    wall = time.perf_counter() - t0
    margins = [r["tur_margin"] for r in res.rows if r["tur_margin"] is not None]
    quals = [r["quality_factor"] for r in res.rows if r["quality_factor"] is not None]
    n_below = sum(1 for q in quals if q < 1.0)
    ok = (
        res.exit_code == 0
        and len(margins) >= 150
        and min(margins) >= -1e-9
        and n_below >= 1
        and wall < 60.0
    )
    assert _verdict(
        "current fluctuation bound over 200 models",
        ok,
        f"min margin {min(margins):+.3e}, {n_below}/{len(quals)} below the "
        f"entropy-only curve, {wall:.1f} s",
    )


def test_02_generic_observables_respect_the_kinetic_bound(tmp_path):
    res = run_kur_scatter(
        ExperimentConfig(mode="kur-scatter", n_models=200, out_dir=str(tmp_path))
    )
    generic = [r for r in res.rows if r["observable"] == "random-generic"]
    changed = [r for r in res.rows if r["observable"] == "changed"]
    gm = [r["kur_margin"] for r in generic if r["kur_margin"] is not None]
    cm = [abs(r["kur_margin"]) for r in changed]
    ok = (
        res.exit_code == 0
        and len(changed) == 200
        and min(gm) >= -1e-9
        and max(cm) <= 1e-10
    )
    assert _verdict(
        "kinetic bound and indicator saturation",
        ok,
        f"generic min margin {min(gm):+.3e}, indicator worst |margin| {max(cm):.2e}",
    )


def test_03_activity_and_echo_orderings(tmp_path):
    res = run_kur_scatter(
        ExperimentConfig(mode="kur-scatter", n_models=200, pure_env=True,
                         out_dir=str(tmp_path))
    )
    sm = [r["survival_margin"] for r in res.rows if r["survival_margin"] is not None]

    worst_gap = -math.inf
    checked = skipped = 0
    for i in range(500):
        spec = random_lindblad(
            rng_stream(DEFAULT_SEED, "lindblad", i), 2 + (i % 2), n_jumps=1 + (i % 2)
        )
        try:
            rho = markov.lindblad_stationary(spec)
        except (NonUniqueStationaryError, ConvergenceError):
            skipped += 1
            continue
        gap = markov.loschmidt_echo(spec, rho, 0.3) - markov.inactivity(spec, rho, 0.3)
        worst_gap = max(worst_gap, gap)
        checked += 1
    ok = (
        res.exit_code == 0
        and len(sm) == 200
        and min(sm) >= -1e-10
        and checked >= 450
        and worst_gap <= 1e-10
    )
    assert _verdict(
        "survival activity above 1/P and echo below P",
        ok,
        f"campaign min margin {min(sm):+.3e}; echo gap max {worst_gap:+.3e} "
        f"over {checked} generators ({skipped} skipped)",
    )


def test_04_entropy_production_routes_agree():
    cfg = ExperimentConfig()
    worst1 = 0.0
    for i in range(100):
        spec = sample_model(rng_stream(17, "model", i), cfg)
        _, rho, _, _, ens = _stationary_ensemble(spec)
        st = traj.compute_stats(ens)
        worst1 = max(worst1, abs(st.entropy_production - traj.sigma_from_states(spec, rho)))

    cfg2 = ExperimentConfig(n_rounds=2, d_e_max=3)
    worst2 = 0.0
    for i in range(8):
        spec = sample_model(rng_stream(18, "model", i), cfg2)
        _, rho, _, _, ens = _stationary_ensemble(spec)
        st = traj.compute_stats(ens)
        worst2 = max(worst2, abs(st.entropy_production - traj.sigma_from_states(spec, rho)))

    # driven two-round qubit away from the fixed point, plus the boundary
    # identity that ties the three contributions to the raw log-ratio sum
    spec = sample_model(rng_stream(19, "model", 0), ExperimentConfig(n_rounds=2, d_e_max=2))
    k = forward_kraus(spec)
    rho0 = np.array([[0.7, 0.12 - 0.08j], [0.12 + 0.08j, 0.3]], dtype=complex)
    rho1 = channel_apply(k, rho0)
    rho2 = channel_apply(k, rho1)
    w0, v0 = qlinalg.herm_eig(rho0)
    ens = traj.enumerate_trajectories(k, w0, 2, init_basis=v0, mode=traj.GENERAL)
    st = traj.compute_stats(ens)
    gen_gap = abs(st.entropy_production - traj.sigma_from_states_general(spec, [rho0, rho1, rho2]))
    table = ens.table()
    direct = sum(
        pr * math.log(pr / table[traj.reverse(g)])
        for g, pr in ens.items()
        if pr > 1e-300 and table.get(traj.reverse(g), 0.0) > 0.0
    )
    bnd_gap = abs(st.total_irreversibility - direct)

    ok = worst1 <= 1e-9 and worst2 <= 1e-9 and gen_gap <= 1e-9 and bnd_gap <= 1e-9
    assert _verdict(
        "trajectory vs state entropy production",
        ok,
        f"stationary worst {worst1:.2e} (100 models), two-round worst {worst2:.2e}, "
        f"driven path gap {gen_gap:.2e}, boundary identity gap {bnd_gap:.2e}",
    )


def test_05_integral_fluctuation_theorem():
    cfg = ExperimentConfig()
    worst = 0.0
    for i in range(50):
        spec = sample_model(rng_stream(21, "model", i), cfg)
        _, _, _, _, ens = _stationary_ensemble(spec)
        st = traj.compute_stats(ens)
        worst = max(worst, abs(st.ift_average - 1.0))
    for i in range(6):
        spec = sample_model(rng_stream(22, "model", i), ExperimentConfig(n_rounds=2, d_e_max=3))
        _, _, _, _, ens = _stationary_ensemble(spec)
        st = traj.compute_stats(ens)
        worst = max(worst, abs(st.ift_average - 1.0))
    ok = worst <= 1e-9
    assert _verdict(
        "exp(-asymmetry) averages to one",
        ok,
        f"worst |<e^-s*> - 1| = {worst:.2e} over 56 models",
    )


def test_06_forward_backward_product_identity():
    worst = 0.0
    pairs = 0
    for i in range(30):
        n_rounds = 1 + (i % 2)
        spec = sample_model(
            rng_stream(23, "model", i),
            ExperimentConfig(n_rounds=n_rounds, d_e_max=3 if n_rounds == 2 else 5),
        )
        k, _, w, v, ens = _stationary_ensemble(spec)
        table = ens.table()
        for g, pr in ens.items():
            prev = table.get(traj.reverse(g), 0.0)
            if pr < 1e-12 or prev < 1e-12:
                continue
            pb = traj.backward_prob(g, k, w, init_basis=v)
            pbr = traj.backward_prob(traj.reverse(g), k, w, init_basis=v)
            worst = max(worst, abs(pb * pbr - pr * prev) / (pr * prev))
            pairs += 1

    # nonstationary variant carries the boundary factor on the right side
    spec = sample_model(rng_stream(24, "model", 0), ExperimentConfig(d_e_max=2))
    k = forward_kraus(spec)
    rho0 = np.array([[0.62, 0.10 + 0.05j], [0.10 - 0.05j, 0.38]], dtype=complex)
    w0, v0 = qlinalg.herm_eig(rho0)
    ens = traj.enumerate_trajectories(k, w0, 1, init_basis=v0, mode=traj.GENERAL)
    p, q = ens.init_probs, ens.final_probs
    table = ens.table()
    worst_g = 0.0
    for g, pr in ens.items():
        prev = table.get(traj.reverse(g), 0.0)
        if pr < 1e-12 or prev < 1e-12:
            continue
        pb = traj.backward_prob(g, k, p, q, init_basis=v0, final_basis=ens.final_basis)
        pbr = traj.backward_prob(
            traj.reverse(g), k, p, q, init_basis=v0, final_basis=ens.final_basis
        )
        rhs = pr * prev * (q[g.m] * q[g.n]) / (p[g.n] * p[g.m])
        worst_g = max(worst_g, abs(pb * pbr - rhs) / rhs)

    ok = pairs > 500 and worst <= 1e-10 and worst_g <= 1e-10
    assert _verdict(
        "reversed-record product identity",
        ok,
        f"stationary worst rel {worst:.2e} over {pairs} record pairs, "
        f"weighted variant worst {worst_g:.2e}",
    )


def test_07_self_reversed_classes_have_zero_asymmetry():
    worst = 0.0
    for spec in (
        thermal_operation_model((0.0, 0.7), (0.0, 0.7, 1.4),
                                [((0, 1), (1, 0), 0.8), ((0, 2), (1, 1), 0.6)],
                                tau=1.3, beta=0.9),
        thermal_operation_model((0.0, 1.0), (0.0, 1.0),
                                [((0, 1), (1, 0), 1.1)], tau=0.7, beta=1.2),
    ):
        k = forward_kraus(spec)
        rho_g = qlinalg.gibbs_state(spec.h_s, spec.beta)
        wg, vg = qlinalg.herm_eig(rho_g)
        st = traj.compute_stats(traj.enumerate_trajectories(k, wg, 1, init_basis=vg))
        worst = max(worst, st.asymmetry)

    worst_m = 0.0
    for w_down, w_up in ((2.0, 0.5), (3.0, 1.0)):
        spec = markov.incoherent_qubit(w_down, w_up)
        rho = markov.lindblad_stationary(spec)
        res = markov.unraveled_sigma_star(spec, rho, duration=0.5, steps=8)
        worst_m = max(worst_m, res.sigma_star)

    ok = worst <= 1e-10 and worst_m <= 1e-10
    assert _verdict(
        "thermal operations and classical hopping are self-reversed",
        ok,
        f"thermal-op worst asymmetry {worst:.2e}, hopping worst {worst_m:.2e}",
    )


def test_08_short_time_asymmetry_floor_and_quadratic_growth():
    spec = markov.driven_qubit()
    rho = markov.lindblad_stationary(spec)
    t0 = 1e-2
    star0 = markov.unraveled_sigma_star(spec, rho, duration=t0, steps=8).sigma_star
    floor0 = bounds.short_time_asymmetry_floor(spec.h, spec.jump_ops, rho, t0)
    ratio = star0 / floor0

    ts = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    stars = [markov.unraveled_sigma_star(spec, rho, duration=t, steps=8).sigma_star
             for t in ts]
    slope = float(np.polyfit(np.log(ts), np.log(stars), 1)[0])

    ok = ratio >= 0.9 and abs(slope - 2.0) <= 0.1
    assert _verdict(
        "driven qubit beats the coherence floor",
        ok,
        f"floor ratio {ratio:.3f} at T={t0:g}, log-log slope {slope:.3f}",
    )


def test_09_asymmetry_dominates_the_dephased_divergence():
    worst = math.inf
    for spec in (
        markov.driven_qubit(),
        markov.thermal_driven_qubit(1.0, 0.8, 0.6),
        markov.incoherent_qubit(2.0, 0.5),
    ):
        rho = markov.lindblad_stationary(spec)
        star = markov.unraveled_sigma_star(spec, rho, duration=0.2, steps=12).sigma_star
        dp = markov.sigma_star_dp_lower_bound(spec, rho, duration=0.2, steps=12)
        worst = min(worst, star - dp)
    ok = worst >= -1e-6
    assert _verdict(
        "record coarse-graining only lowers the asymmetry",
        ok,
        f"min(sigma* - divergence) = {worst:+.3e} over 3 generators",
    )


def test_10_bound_function_against_an_independent_root_finder():
    grid = np.logspace(math.log10(1e-3), math.log10(20.0), 60)
    worst_rel = 0.0
    floor_ok = True
    for x in grid:
        f = bounds.fluctuation_floor(float(x))
        worst_rel = max(worst_rel, abs(f - _floor_oracle(float(x))) / f)
        if f < 2.0 / math.expm1(float(x)):
            floor_ok = False
    small = bounds.fluctuation_floor(1e-4)
    small_rel = abs(small - 2.0e4) / 2.0e4
    ok = worst_rel <= 1e-9 and floor_ok and small_rel <= 0.01
    assert _verdict(
        "fluctuation floor vs bisection oracle",
        ok,
        f"worst rel err {worst_rel:.2e} on 60-point grid, 2/(e^x-1) dominated, "
        f"f(1e-4) off by {small_rel:.2e}",
    )


def test_11_coupling_sweep_regression_and_determinism(tmp_path):
    res = run_lambda_sweep(ExperimentConfig(mode="lambda-sweep", out_dir=str(tmp_path / "a")))
    stars = [r["sigma_star"] for r in res.rows]
    ents = [r["entanglement_entropy"] for r in res.rows]
    quals = [r["quality_factor"] for r in res.rows if r["quality_factor"] is not None]
    monotone = all(b >= a - 1e-12 for a, b in zip(stars, stars[1:])) and all(
        b >= a - 1e-12 for a, b in zip(ents, ents[1:])
    )
    csv1 = _read(res.paths["csv"])
    res2 = run_lambda_sweep(ExperimentConfig(mode="lambda-sweep", out_dir=str(tmp_path / "b")))
    res3 = run_lambda_sweep(
        ExperimentConfig(mode="lambda-sweep", out_dir=str(tmp_path / "c"), threads=2)
    )
    identical = _read(res2.paths["csv"]) == csv1 and _read(res3.paths["csv"]) == csv1
    ok = (
        res.exit_code == 0
        and res.summary["golden_checked"] is True
        and monotone
        and min(quals) < 1.0
        and identical
    )
    assert _verdict(
        "default-seed coupling sweep",
        ok,
        f"exit {res.exit_code}, monotone={monotone}, min quality {min(quals):.3f}, "
        f"byte-identical across reruns and threads={identical}",
    )


def test_12_no_jump_deficit_tracks_the_activity_quadratically():
    spec = markov.driven_qubit()
    rho = markov.lindblad_stationary(spec)
    ts = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    diffs = [
        abs(1.0 / markov.inactivity(spec, rho, t) - 1.0 - markov.dynamical_activity(spec, rho, t))
        for t in ts
    ]
    slope = float(np.polyfit(np.log(ts), np.log(diffs), 1)[0])
    ok = 1.9 <= slope <= 2.1
    assert _verdict(
        "activity is the short-time jump count",
        ok,
        f"|1/P - 1 - activity| log-log slope {slope:.3f}",
    )

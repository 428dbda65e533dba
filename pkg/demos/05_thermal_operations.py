"""Thermal operations are self-reversed.

An energy-preserving exchange between resonant system and environment
levels keeps the record asymmetry equal to the classical divergence between
the input populations and the thermal ones, so it vanishes exactly at the
Gibbs state no matter how strong the exchange is.
"""

import math

import numpy as np

from qprecision import qlinalg, trajectories as traj
from qprecision.model import forward_kraus, gibbs_env_probs, thermal_operation_model

spec = thermal_operation_model(
    (0.0, 0.7), (0.0, 0.7, 1.4),
    [((0, 1), (1, 0), 0.8), ((0, 2), (1, 1), 0.6)],
    tau=1.3, beta=0.9,
)
k = forward_kraus(spec)
print(f"environment thermal weights: {np.round(gibbs_env_probs(spec), 6)}")

# sweep the initial excited population; measurements stay in the energy basis
eye = np.eye(2)
print(f"\n{'p_excited':>9} {'sigma*':>12} {'D(p||q)':>12}")
for p1 in (0.10, 0.25, 0.42, 0.60):
    p0 = np.array([1.0 - p1, p1])
    ens = traj.enumerate_trajectories(k, p0, 1, init_basis=eye, final_basis=eye,
                                      mode=traj.GENERAL)
    st = traj.compute_stats(ens)
    q = ens.final_probs
    dkl = sum(pi * math.log(pi / qi) for pi, qi in zip(p0, q))
    print(f"{p1:9.2f} {st.asymmetry:12.6f} {dkl:12.6f}")

rho_g = qlinalg.gibbs_state(spec.h_s, spec.beta)
wg, vg = qlinalg.herm_eig(rho_g)
st_g = traj.compute_stats(traj.enumerate_trajectories(k, wg, 1, init_basis=vg))
print(f"\nat the Gibbs state: sigma* = {st_g.asymmetry:.3e}, sigma = {st_g.entropy_production:.3e}")

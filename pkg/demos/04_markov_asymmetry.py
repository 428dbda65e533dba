# Continuous measurement records from a GKSL unraveling.
#
# A classical hopping qubit produces exactly reversible records (sigma* = 0
# to machine precision), while a coherently driven qubit has sigma* bounded
# below by (8/9) T^2 ||[H, jumps]||-type commutator terms at short times.

import numpy as np

from qprecision import bounds, markov

inco = markov.incoherent_qubit(2.0, 0.5)
rho = markov.lindblad_stationary(inco)
res = markov.unraveled_sigma_star(inco, rho, duration=0.5, steps=8)
print(f"incoherent hopping sigma* = {res.sigma_star:.3e}  (records {res.n_records})")

drv = markov.driven_qubit()
rho_d = markov.lindblad_stationary(drv)
print("\ndriven qubit, coherence floor at decreasing horizon:")
print(f"{'T':>8} {'sigma*':>12} {'floor':>12} {'ratio':>7}")
for t in (1e-1, 1e-2, 1e-3):
    star = markov.unraveled_sigma_star(drv, rho_d, duration=t, steps=8).sigma_star
    floor = bounds.short_time_asymmetry_floor(drv.h, drv.jump_ops, rho_d, t)
    print(f"{t:8.0e} {star:12.3e} {floor:12.3e} {star / floor:7.3f}")

ts = np.array([1e-3, 3e-3, 1e-2, 3e-2, 1e-1])
stars = [markov.unraveled_sigma_star(drv, rho_d, duration=t, steps=8).sigma_star for t in ts]
slope = np.polyfit(np.log(ts), np.log(stars), 1)[0]
print(f"\nlog-log slope of sigma*(T): {slope:.3f}  (quadratic growth)")

echo = markov.loschmidt_echo(drv, rho_d, 0.3)
quiet = markov.inactivity(drv, rho_d, 0.3)
print(f"echo {echo:.6f} <= inactivity {quiet:.6f}: {echo <= quiet + 1e-12}")

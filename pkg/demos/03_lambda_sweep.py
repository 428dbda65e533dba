"""Coupling sweep at the shipped default seed.

Runs the single-model sweep over lambda in {0, 0.25, ..., 5}, prints the
trend table, and points at the CSV written for plotting. Asymmetry and
average entanglement entropy rise together with the coupling while the
quality factor drops below one.
"""

import tempfile

from qprecision.experiments import ExperimentConfig, run_lambda_sweep

out = tempfile.mkdtemp(prefix="qprecision-sweep-")
res = run_lambda_sweep(ExperimentConfig(mode="lambda-sweep", out_dir=out))

print(f"{'lambda':>7} {'sigma*':>10} {'S_EE':>10} {'quality':>9} flags")
for row in res.rows:
    q = row["quality_factor"]
    print(
        f"{row['lambda']:7.2f} {row['sigma_star']:10.5f} "
        f"{row['entanglement_entropy']:10.5f} "
        f"{q if q is None else format(q, '9.4f')} {row['flags']}"
    )

print(f"\nexit code {res.exit_code}, golden checks ran: {res.summary['golden_checked']}")
print(f"csv: {res.paths['csv']}")

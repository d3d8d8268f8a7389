"""Unit square: the cluster {2 pi^2, 5 pi^2} and its convergence rates.

Run with ``python demos/square_cluster_demo.py``; takes a few seconds.
"""

# %% One solve with quadratic elements
import math

from spectral_feast.experiments import StudyConfig, run_solve, run_study

out = run_solve("square", 2, 4, (0, 60))
print(f"{out.status} in {out.result.iterations} iterations, {out.n_free} unknowns")
for lam, ref in zip(out.ritz_values, out.ref_values):
    print(f"  Ritz {lam:.10f}  exact {ref:.10f}  ({ref / math.pi ** 2:.0f} pi^2)")

# %% Ritz values approach from above, with errors like h^(2p)
for p in (1, 2, 3):
    study = run_study(StudyConfig("square", p, (3, 4, 5), (0, 60)))
    print("\n".join(study.summary_lines()))

"""Dumbbell: a tight interval around 128 pi^2 with a close neighbour.

Run with ``python demos/dumbbell_demo.py``; the k=6 solve takes about a minute.
"""

# %% Two eigenvalues inside (1262, 1264)
import math

from spectral_feast.experiments import run_solve

target = 128 * math.pi ** 2
errors = {}
for k in (5, 6):
    out = run_solve("dumbbell", 3, k, (1262, 1264))
    errors[k] = abs(out.ritz_values[1] - target)
    print(f"k={k} {out.status} iterations={out.result.iterations} "
          f"values={[f'{v:.6f}' for v in out.ritz_values]}")
    print(f"  |lambda_2 - 128 pi^2| = {errors[k]:.3e}")

# %% Cubic elements: the error drops by about 2^6 per halving
print(f"reduction factor {errors[5] / errors[6]:.1f}")

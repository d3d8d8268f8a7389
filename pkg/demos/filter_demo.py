"""Butterworth filter: how the rational filter separates the search interval.

Run with ``python demos/filter_demo.py``.
"""

# %% Build a filter for the interval (5, 65)
import numpy as np

from spectral_feast.filters import (SearchInterval, build_butterworth, butterworth_magnitude,
                                    eval_filter, filter_stats)

iv = SearchInterval.from_endpoints(5.0, 65.0)
filt = build_butterworth(iv, 8)
print(f"center {iv.y}, radius {iv.gamma}, {len(filt.nodes)} nodes")

# %% Values on the real line against the closed form 1/(1+t^N)
x = np.array([35.0, 50.0, 65.0, 80.0, 95.0, 125.0])
for xi, r, c in zip(x, eval_filter(filt, x).real, butterworth_magnitude(x, iv, 8)):
    print(f"x={xi:6.1f}  r(x)={r:.6e}  closed form={c:.6e}")

# %% The contraction factor shrinks like 2^(1-N) as the order grows
for n in (4, 8, 16):
    st = filter_stats(build_butterworth(iv, n))
    print(f"N={n:2d}  kappa_hat={st.kappa_hat:.3e}  W={st.w_sum}")

"""L-shaped domain: the re-entrant corner caps the first eigenvalue rate at 4/3.

Run with ``python demos/lshape_demo.py``; takes about a minute.
"""

# %% The first and third eigenvalues under refinement
from spectral_feast.experiments import StudyConfig, run_study

for p in (1, 2):
    study = run_study(StudyConfig("lshape", p, (5, 6, 7), (0, 20)))
    print("\n".join(study.summary_lines()))

# %% Higher degree does not help the singular eigenfunction
#   error[0] keeps rate 4/3 for every p, while error[2] (2 pi^2, a smooth
#   eigenfunction) improves like h^(2p).
#   On coarser grids (k=4) the p=1 rate is still above 1.5: the singular
#   part of the error has not yet taken over.

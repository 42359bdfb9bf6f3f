"""Scaling sanity: exact mixing times along path and cycle families, and the
expected squared flow length on stars as the maximum degree grows.

    python3 demos/03_scaling.py
"""

import math

from monodimer import MonomerDimerModel
from monodimer.flow import flow_statistics
from monodimer.harness.generators import star
from monodimer.harness.suite import mixing_sweep, sweep_csv

print("lazy chain, lambda = 1, eps = 1/(2e)")
print(sweep_csv(mixing_sweep("path", range(3, 10)) + mixing_sweep("cycle", range(4, 9))))

print("stars: max_e E[l^2] and its ratio to Delta * log^2(1 + lam_bar)")
print("k   " + "".join(f"lam={lam:<14}" for lam in ("1/2", "1", "2")))
for k in range(2, 13):
    cells = []
    for lam in ("1/2", "1", "2"):
        model = MonomerDimerModel(star(k), lam)
        el2 = flow_statistics(model).expected_sq_length
        ratio = float(el2) / (k * math.log(1 + float(model.lam_bar)) ** 2)
        cells.append(f"{float(el2):.3f} ({ratio:.3f})".ljust(18))
    print(f"{k:<4}" + "".join(cells))

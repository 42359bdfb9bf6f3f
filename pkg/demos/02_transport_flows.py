"""Couplings, canonical paths and congestion on a 6-cycle and a 3x3 grid.

For one edge e we draw pairs from the local flipping coupling, show the
disagreement component and the move sequence from X to Y, and then compute
the exact congestion of the whole flow family.

    python3 demos/02_transport_flows.py
"""

import numpy as np

from monodimer import MonomerDimerModel
from monodimer.flow import (canonical_path, coupling_law, flow_statistics,
                            sample_local_flipping_coupling, verify_flow_theorems)
from monodimer.graph import bits
from monodimer.harness.generators import cycle, grid


def fmt(x):
    return "{" + ",".join(map(str, bits(x))) + "}"


rng = np.random.default_rng(1)
for name, g in (("C6", cycle(6)), ("grid 3x3", grid(3, 3))):
    model = MonomerDimerModel(g, 1)
    e = 0
    print(f"\n{name}: edge {e} = {g.edges[e]}")
    law = coupling_law(model, None, e)
    print(f"  coupling support: {len(law)} pairs")
    for _ in range(4):
        s = sample_local_flipping_coupling(model, None, e, rng)
        p = canonical_path(model, s.x, s.y, e)
        print(f"  X={fmt(s.x):12} Y={fmt(s.y):12} B is a {s.b.kind:10} moves: {' '.join(p.moves)}")

    stats = flow_statistics(model)
    print(f"  kappa = {stats.congestion_kappa} ({float(stats.congestion_kappa):.4f}), "
          f"strong kappa = {float(stats.strong_kappa):.4f}, "
          f"max E[l^2] = {float(stats.expected_sq_length):.4f}")
    r = verify_flow_theorems(model, stats=stats)
    print(f"  local PI constant {r.alpha_pi:.4f} >= 1/(8 kappa L) = {r.pi_bound:.4f}: {r.pi_holds}")
    print(f"  local LSI estimate {r.alpha_lsi:.4f} >= {r.lsi_bound:.5f}: {r.lsi_holds}")

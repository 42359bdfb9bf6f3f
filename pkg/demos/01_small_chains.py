"""Exact look at the chains on tiny graphs.

Enumerates the monomer-dimer measure on a path and a 4-cycle, prints the
Jerrum-Sinclair kernel in exact arithmetic, then the spectral gap, the
log-Sobolev bracket and the exact mixing time of the lazy chain.

    python3 demos/01_small_chains.py
"""

import math

from monodimer import MonomerDimerModel, enumerate_matchings, transition_kernel
from monodimer.chains import LAZY_JS
from monodimer.graph import bits
from monodimer.harness.generators import cycle, path
from monodimer.model import format_fraction
from monodimer.spectral import (local_poincare_constant, log_sobolev_constant,
                                mixing_time_exact, poincare_constant)


def show_states(dist):
    for x, p in zip(dist.support, dist.probabilities):
        print(f"  {{{', '.join(map(str, bits(x)))}}}".ljust(14), format_fraction(p))


def show_kernel(k):
    labels = ["{" + ",".join(map(str, bits(x))) + "}" for x in k.states.support]
    print("  " + " ".join(s.rjust(7) for s in [""] + labels))
    for lab, row in zip(labels, k.rows):
        cells = [format_fraction(row[j]) if j in row else "0" for j in range(len(labels))]
        print("  " + " ".join(s.rjust(7) for s in [lab] + cells))


for g, name in ((path(3), "P3"), (cycle(4), "C4")):
    for lam in ("1/2", "2"):
        model = MonomerDimerModel(g, lam)
        dist = enumerate_matchings(model)
        print(f"\n{name}, lambda = {lam}: Z = {format_fraction(dist.Z)}")
        show_states(dist)
        k = transition_kernel(model)
        if name == "P3":
            print(" JS kernel:")
            show_kernel(k)
        gamma = poincare_constant(k)
        lo, hi = log_sobolev_constant(k)
        print(f"  gamma = {gamma:.6f}   rho in [{lo:.6f}, {hi:.6f}]   "
              f"local PI alpha = {local_poincare_constant(model, None, k):.6f}")
        lazy = transition_kernel(model, spec=LAZY_JS)
        print(f"  lazy T_mix(1/2e) = {mixing_time_exact(lazy, 1 / (2 * math.e))}")

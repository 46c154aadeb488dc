"""Where does a correlated pair sit relative to the achievable region?

For a few sources we print the three thresholds and check which (a, b)
part counts are strictly inside: log a > h(.|Y), log b > h(.|X),
log a + log b > h.
"""
from __future__ import annotations

import numpy as np

from swgen.sources import copy_source, dsbs, independent_bits, markov_bsc, rate_region

sources = {
    "copy (Y = X)": copy_source(),
    "dsbs p=0.11": dsbs(0.11),
    "markov flip=0.1, bsc 0.05": markov_bsc(0.1, 0.05),
    "independent bits": independent_bits(),
}
grid = [(a, b) for a in (1, 2, 3) for b in (1, 2, 3)]

for name, src in sources.items():
    r = rate_region(src)
    inside = [f"{a}x{b}" for a, b in grid if r.contains(a, b)]
    print(f"{name:28s} h={r.h:.4f}  h|X={r.h_given_x:.4f}  h|Y={r.h_given_y:.4f}  [{r.method}]")
    print(f"{'':28s} inside: {' '.join(inside) or '-'}")

# the DSBS sum-rate threshold at a = b = 2 is 2 bits; how much slack is left?
r = rate_region(dsbs(0.11))
print(f"\nslack at a=b=2 for dsbs(0.11): {2 - r.h:.4f} bits/symbol")
print("slack per crossover:", np.round([2 - rate_region(dsbs(p)).h for p in (0.05, 0.11, 0.2, 0.5)], 4))

"""Run-length constrained codebooks, painting a tower, and finding its bases again.

A painted block carries a codeword (starts with 1, no run of ell zeros)
followed by ell zeros, so a base is simply "a 1 after at least ell zeros".
"""
from __future__ import annotations

import numpy as np

from swgen.codebooks import codebook, growth_rate, make_painting_data
from swgen.painting import paint, recover_bases
from swgen.partitions import partition_distance
from swgen.sources import dsbs, sample_orbit
from swgen.towers import build_tower, names_along_tower

# codebook sizes: the growth rate approaches log2(a) as ell grows
for ell in (2, 4, 8, 12):
    print(f"ell={ell:2d}  growth a=2: {growth_rate(500, ell, 2):.4f}   a=3: {growth_rate(500, ell, 3):.4f}")

book = codebook(8, 2, 2)
print(f"\n|A(8, 2, 2)| = {book.count}; first three words:",
      [book.unrank(i).tolist() for i in range(3)])

# paint the x-names of a DSBS orbit along a tower of height 400
orbit = sample_orbit(dsbs(0.11), 100_000, seed=42)
M, ell = 400, 10
tower = build_tower(orbit, "x", M, 16, 0.95, seed=7)
pd = make_painting_data(2, M, codebook(M - ell, ell, 2), seed=8)
painted = paint(tower, names_along_tower(tower, orbit.x), pd, ell)

found = recover_bases(painted, ell)
print(f"\ntower: {len(tower.complete_bases)} complete blocks, coverage {tower.coverage:.3f}")
print("bases recovered exactly:", np.array_equal(found, tower.complete_bases))
print(f"painted track differs from X on {partition_distance(painted, orbit.x):.3f} of positions")

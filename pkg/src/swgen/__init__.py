"""Distributed (Slepian-Wolf style) coding of correlated stationary sources with
finite-window partitions, Rohlin towers and painted run-length codewords."""

from __future__ import annotations

from .codebooks import AdmissibleCodebook, codebook, count_admissible, growth_rate, make_painting_data
from .painting import make_admissible, paint, recover_bases, recover_bases_repaint, repaint
from .partitions import SlidingBlockPartition, SymbolTrack, evaluate, partition_distance
from .sources import JointSource, Orbit, RateRegion, dsbs, independent_bits, rate_region, sample_orbit
from .swcodec import PairParams, build_pair, decode, f_bound, improve_pair, rate_region_experiment
from .towers import Tower, build_tower, coverage

__version__ = "0.1.0"

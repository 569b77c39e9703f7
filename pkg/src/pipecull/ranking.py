"""Tie-averaged ranking, shared by the meta-knowledge base and analysis.

Rank 1 is best (smallest value); tied values all receive the mean of the
positions they span, so ranks over m items always sum to m(m+1)/2.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def tie_averaged_ranks(values: Sequence[float]) -> list[float]:
    v = np.asarray(values, dtype=np.float64)
    if np.isnan(v).any():
        raise ValueError("cannot rank missing values")
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        # positions i..j (0-based) share the mean 1-based rank
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks.tolist()

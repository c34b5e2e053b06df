"""Point estimate and the two sample views of a delta matrix.

The importance point estimate is the grand mean of the N x K deltas.  The
two confidence-interval formulations read the same grid differently:

  rv   every cell is one sample (n = N * K); uncertainty spans both the
       data draw and the ablation draw
  fd   every replicate's row-average is one sample (n = K); uncertainty
       spans only the ablation draw, the dataset being taken as fixed

All reductions use compensated summation, so the three means (grand, rv,
fd) agree to within one rounding of each other and are independent of
iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ablation import DeltaMatrix

FORMULATIONS = ("rv", "fd")


@dataclass(frozen=True, eq=False)
class SampleSequence:
    """Samples feeding one CI formulation; mean equals the point estimate."""

    values: np.ndarray
    formulation: str


def point_estimate(deltas: DeltaMatrix) -> float:
    """Grand mean of the delta grid: the empirical feature importance."""
    grid = deltas.deltas
    # ravel order fixes the documented summation order (replicate-major);
    # fsum makes the result independent of it anyway.
    return math.fsum(grid.ravel(order="F")) / grid.size


def rv_samples(deltas: DeltaMatrix) -> SampleSequence:
    """All N x K deltas flattened in replicate-major order (s = k*N + j)."""
    flat = deltas.deltas.ravel(order="F").copy()
    return SampleSequence(values=flat, formulation="rv")


def fd_samples(deltas: DeltaMatrix) -> SampleSequence:
    """Per-replicate row-averages: K samples, one per table replicate.

    A single replicate (K = 1) is representable but degenerate; interval
    construction downstream refuses sequences shorter than 2.
    """
    grid = deltas.deltas
    n = grid.shape[0]
    means = np.array(
        [math.fsum(grid[:, k]) / n for k in range(grid.shape[1])],
        dtype=np.float64,
    )
    return SampleSequence(values=means, formulation="fd")

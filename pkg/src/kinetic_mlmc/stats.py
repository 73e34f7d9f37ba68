"""Streaming moment accumulators that merge deterministically."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class RunningMoments:
    """Count, mean and centred second moment in the Welford/Chan form.

    ``update`` folds in a batch, ``merge`` folds in another accumulator.
    Both reduce with the same pairwise formula, so splitting a sample across
    batches or workers and merging in a fixed order reproduces the single
    pass result to rounding.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, values) -> None:
        v = np.asarray(values, dtype=np.float64).ravel()
        if v.size == 0:
            return
        batch_mean = float(v.mean())
        batch_m2 = float(((v - batch_mean) ** 2).sum())
        self._fold(v.size, batch_mean, batch_m2)

    def merge(self, other: "RunningMoments") -> None:
        self._fold(other.count, other.mean, other.m2)

    def _fold(self, n2: int, mean2: float, m2_2: float) -> None:
        if n2 == 0:
            return
        n1 = self.count
        if n1 == 0:
            self.count, self.mean, self.m2 = n2, mean2, m2_2
            return
        n = n1 + n2
        delta = mean2 - self.mean
        self.mean += delta * (n2 / n)
        self.m2 += m2_2 + delta * delta * (n1 * (n2 / n))
        self.count = n

    @property
    def variance(self) -> float:
        """Unbiased sample variance; 0 until two values have been seen."""
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        """Standard error of the mean."""
        if self.count == 0:
            return 0.0
        return math.sqrt(self.variance / self.count)

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo scalar: value, standard error and sample count."""

    value: float
    stderr: float
    n: int
    bias_note: str = ""

    @classmethod
    def from_samples(cls, x, note=""):
        x = np.asarray(x, dtype=float)
        n = len(x)
        if n == 0:
            raise ValueError("no samples")
        sd = float(np.std(x, ddof=1)) if n > 1 else math.inf
        return cls(float(np.mean(x)), sd / math.sqrt(n), n, note)

    @classmethod
    def from_moments(cls, total, total_sq, n, note=""):
        """From the running sums sum(x) and sum(x^2)."""
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
        return cls(float(mean), math.sqrt(var / n), int(n), note)

    def scaled(self, c):
        return Estimate(self.value * c, self.stderr * abs(c), self.n, self.bias_note)

    def __str__(self):
        return f"{self.value:.6g} +- {self.stderr:.2g} (n={self.n})"


def agree(a, b, k=3.0):
    """|a - b| within k combined standard errors."""
    return abs(a.value - b.value) <= k * math.hypot(a.stderr, b.stderr)


def ratio_estimate(num, den, note=""):
    """Ratio of sample means with the delta-method standard error.

    num and den are paired per-sample arrays.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = len(num)
    mn, md = num.mean(), den.mean()
    r = mn / md
    resid = num - r * den
    se = math.sqrt(np.var(resid, ddof=1) / n) / abs(md)
    return Estimate(float(r), float(se), n, note)

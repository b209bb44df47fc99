"""Paired comparison statistics for per-seed best costs."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from ..errors import ContractError

MIN_PAIRS = 5


@dataclass(frozen=True)
class PairedStats:
    n: int
    mean_diff: float
    n_positive: int
    n_negative: int
    sign_test_p: float
    wilcoxon_statistic: float
    wilcoxon_p: float

    def to_dict(self) -> dict:
        return asdict(self)


def sign_test_p(n_positive: int, n_negative: int) -> float:
    """Two-sided exact sign test; zero differences are dropped."""
    n = n_positive + n_negative
    if n == 0:
        return 1.0
    return float(stats.binomtest(n_positive, n, 0.5).pvalue)


def paired_stats(costs_a: Sequence[float], costs_b: Sequence[float]) -> PairedStats:
    """Compare ``a`` against ``b`` pair by pair; ``mean_diff = mean(a - b)``."""
    a = np.asarray(costs_a, dtype=np.float64)
    b = np.asarray(costs_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    if len(a) < MIN_PAIRS:
        raise ContractError(f"need at least {MIN_PAIRS} pairs, got {len(a)}")
    d = a - b
    pos = int(np.count_nonzero(d > 0))
    neg = int(np.count_nonzero(d < 0))
    if pos + neg == 0:
        w_stat, w_p = 0.0, 1.0
    else:
        res = stats.wilcoxon(a, b, zero_method="wilcox")
        w_stat, w_p = float(res.statistic), float(res.pvalue)
    return PairedStats(
        n=len(a),
        mean_diff=float(np.mean(d)),
        n_positive=pos,
        n_negative=neg,
        sign_test_p=sign_test_p(pos, neg),
        wilcoxon_statistic=w_stat,
        wilcoxon_p=w_p,
    )

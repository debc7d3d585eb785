"""Paired comparisons across seeds."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import stats


def t_critical_95(df: int) -> float:
    """One-sided 5% critical value of Student's t."""
    if df < 1:
        raise ValueError("need at least two paired samples")
    return float(stats.t.ppf(0.95, df))


class PairedDiff(NamedTuple):
    mean: float
    se: float
    t: float
    df: int

    def significantly_positive(self) -> bool:
        return self.t > t_critical_95(self.df)

    def significantly_negative(self) -> bool:
        return self.t < -t_critical_95(self.df)


def paired_diff(a, b) -> PairedDiff:
    """Mean, standard error and t statistic of a - b over matched seeds."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if d.ndim != 1 or d.size < 2:
        raise ValueError("need at least two paired samples")
    mean = float(d.mean())
    se = float(d.std(ddof=1) / np.sqrt(d.size))
    t = mean / se if se > 0 else (0.0 if mean == 0 else np.copysign(np.inf, mean))
    return PairedDiff(mean, se, float(t), d.size - 1)


def group_summary(rows, field: str = "mean_u",
                  keys=("scheme", "I", "chi", "varphi", "xi")) -> list[dict]:
    """Mean and standard error of ``field`` across seeds for each sweep point."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault(tuple(str(r[k]) for k in keys), []).append(float(r[field]))
    out = []
    for key, vals in groups.items():
        v = np.asarray(vals)
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
        out.append({**dict(zip(keys, key)), "n": v.size, "mean": float(v.mean()), "se": se})
    return out

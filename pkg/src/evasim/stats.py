"""Small-sample hypothesis tests and the normality-driven test selection.

Shapiro-Wilk follows Royston's AS R94 algorithm. The Wilcoxon signed-rank p-value
is exact for up to 25 non-zero differences: the null distribution of the
positive-rank sum is counted over all 2**n sign assignments (by dynamic
programming over doubled mid-ranks, which gives the same integer counts as
enumerating the assignments one by one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist

import numpy as np
from scipy import special

EXACT_WILCOXON_MAX_N = 25

_NORMAL = NormalDist()


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    values: tuple[float, ...]
    label: str = ""

    def __init__(self, values, label: str = ""):
        vals = tuple(float(v) for v in values)
        if not all(math.isfinite(v) for v in vals):
            raise StatsError(f"sample {label!r} contains non-finite values")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "label", label)

    def __len__(self):
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class StatTestResult:
    test_name: str
    statistic: float
    p_value: float
    exact: bool
    n: int
    df: float | tuple[float, float] | None = None
    degenerate: bool = False
    provenance: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise StatsError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class ComparisonPolicy:
    alpha: float = 0.05

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")


def _as_sample(x) -> Sample:
    return x if isinstance(x, Sample) else Sample(x)


def _clip_p(p: float) -> float:
    return min(max(float(p), 0.0), 1.0)


# ---------------------------------------------------------------- Shapiro-Wilk

_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs, x):
    # ascending powers
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


def _swilk_coefficients(n: int) -> np.ndarray:
    """Antisymmetric weights for the ordered sample (length n, ascending order)."""
    nn2 = n // 2
    if n == 3:
        half = np.array([math.sqrt(0.5)])
    else:
        m = np.array([_NORMAL.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, nn2 + 1)])
        summ2 = 2.0 * float(np.sum(m * m))
        ssumm2 = math.sqrt(summ2)
        rsn = 1.0 / math.sqrt(n)
        a1 = _poly(_C1, rsn) - m[0] / ssumm2
        if n > 5:
            a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
            fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2) / (1.0 - 2.0 * a1**2 - 2.0 * a2**2))
            half = -m / fac
            half[0], half[1] = a1, a2
        else:
            fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1**2))
            half = -m / fac
            half[0] = a1
    a = np.zeros(n)
    a[:nn2] = -half
    a[n - nn2 :] = half[::-1]
    return a


def shapiro_wilk(sample) -> StatTestResult:
    """Shapiro-Wilk W and its p-value for 3 <= n <= 50."""
    s = _as_sample(sample)
    n = len(s)
    if not 3 <= n <= 50:
        raise StatsError(f"Shapiro-Wilk supports 3 <= n <= 50, got n={n}")
    x = np.sort(s.array())
    rng = x[-1] - x[0]
    if rng < 1e-19:
        raise StatsError(f"sample {s.label!r} has zero variance")
    a = _swilk_coefficients(n)
    xs = x / rng
    ac = a - a.mean()
    xc = xs - xs.mean()
    ssa, ssx, sax = float(ac @ ac), float(xc @ xc), float(ac @ xc)
    root = math.sqrt(ssa * ssx)
    w1 = (root - sax) * (root + sax) / (ssa * ssx)
    w = 1.0 - w1
    if n == 3:
        p = 1.909859317102744 * (math.asin(math.sqrt(w)) - 1.047197551196598)
        return StatTestResult("shapiro_wilk", w, _clip_p(p), True, n)
    y = math.log(w1)
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return StatTestResult("shapiro_wilk", w, 1e-99, False, n)
        y = -math.log(gamma - y)
        m = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        m = _poly(_C5, ln)
        sd = math.exp(_poly(_C6, ln))
    p = 1.0 - NormalDist(m, sd).cdf(y)
    return StatTestResult("shapiro_wilk", w, _clip_p(p), False, n)


# ---------------------------------------------------------------- Wilcoxon

def midranks(values) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(len(v))
    sv = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def signed_rank_null_counts(doubled_ranks) -> list[int]:
    """counts[k] = number of sign assignments whose doubled positive-rank sum is k."""
    total = int(sum(doubled_ranks))
    counts = [0] * (total + 1)
    counts[0] = 1
    top = 0
    for r in doubled_ranks:
        r = int(r)
        for k in range(top, -1, -1):
            if counts[k]:
                counts[k + r] += counts[k]
        top += r
    return counts


def wilcoxon_signed_rank(x, y, paired: bool = True) -> StatTestResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped. The statistic is the positive-rank sum W+.
    """
    if not paired:
        raise StatsError("the signed-rank test needs paired samples")
    xs, ys = _as_sample(x), _as_sample(y)
    if len(xs) != len(ys):
        raise StatsError("paired samples must have equal length")
    d = xs.array() - ys.array()
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return StatTestResult("wilcoxon_signed_rank", 0.0, 1.0, True, 0, degenerate=True)
    ranks = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    if n <= EXACT_WILCOXON_MAX_N:
        counts = signed_rank_null_counts(doubled)
        obs = int(round(2 * w_plus))
        dev = abs(2 * obs - total)
        hits = sum(c for k, c in enumerate(counts) if abs(2 * k - total) >= dev)
        p = float(Fraction(hits, 2**n))
        return StatTestResult("wilcoxon_signed_rank", w_plus, _clip_p(p), True, n)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
    p = 2.0 * (1.0 - _NORMAL.cdf(max(z, 0.0)))
    return StatTestResult("wilcoxon_signed_rank", w_plus, _clip_p(p), False, n)


# ---------------------------------------------------------------- F and t

def _f_sf(f, d1, d2):
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def _t_two_sided(t, df):
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def f_test(x, y) -> StatTestResult:
    """Two-sided variance-ratio test with the larger variance on top."""
    xs, ys = _as_sample(x), _as_sample(y)
    if len(xs) < 2 or len(ys) < 2:
        raise StatsError("F-test needs n >= 2 in both samples")
    vx, vy = float(np.var(xs.array(), ddof=1)), float(np.var(ys.array(), ddof=1))
    if vx == 0 or vy == 0:
        raise StatsError("F-test undefined for a zero-variance sample")
    if vx >= vy:
        f, d1, d2 = vx / vy, len(xs) - 1, len(ys) - 1
    else:
        f, d1, d2 = vy / vx, len(ys) - 1, len(xs) - 1
    p = 2.0 * _f_sf(f, d1, d2)
    return StatTestResult("f_test", f, _clip_p(p), False, len(xs) + len(ys), df=(float(d1), float(d2)))


def t_test(x, y, variant: str = "equal_var", paired: bool = False) -> StatTestResult:
    """Two-sided t-test; ``variant`` is ``equal_var`` (pooled) or ``welch``."""
    xs, ys = _as_sample(x), _as_sample(y)
    a, b = xs.array(), ys.array()
    if len(a) < 2 or len(b) < 2:
        raise StatsError("t-test needs n >= 2 in both samples")
    if paired:
        if len(a) != len(b):
            raise StatsError("paired samples must have equal length")
        d = a - b
        sd = float(np.std(d, ddof=1))
        if sd == 0:
            if np.all(d == 0):
                return StatTestResult("t_paired", 0.0, 1.0, False, len(d), df=float(len(d) - 1), degenerate=True)
            raise StatsError("zero variance of paired differences")
        t = float(np.mean(d)) / (sd / math.sqrt(len(d)))
        df = float(len(d) - 1)
        return StatTestResult("t_paired", t, _clip_p(_t_two_sided(t, df)), False, len(d), df=df)
    n1, n2 = len(a), len(b)
    v1, v2 = float(np.var(a, ddof=1)), float(np.var(b, ddof=1))
    diff = float(np.mean(a) - np.mean(b))
    if variant == "equal_var":
        pooled = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
        if pooled == 0:
            raise StatsError("zero pooled variance")
        se = math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
        df = float(n1 + n2 - 2)
        name = "t_equal_var"
    elif variant == "welch":
        q1, q2 = v1 / n1, v2 / n2
        if q1 + q2 == 0:
            raise StatsError("zero variance in both samples")
        se = math.sqrt(q1 + q2)
        df = (q1 + q2) ** 2 / (q1 * q1 / (n1 - 1) + q2 * q2 / (n2 - 1))
        name = "t_welch"
    else:
        raise ValueError(f"unknown t-test variant {variant!r}")
    t = diff / se
    return StatTestResult(name, t, _clip_p(_t_two_sided(t, df)), False, n1 + n2, df=df)


# ---------------------------------------------------------------- selection

def compare_groups(x, y, policy: ComparisonPolicy | None = None) -> StatTestResult:
    """Pick and run the test the way the experiment's analysis does.

    Both groups normal (Shapiro-Wilk p >= alpha): F-test chooses the pooled or
    Welch two-sample t-test. Otherwise: paired Wilcoxon signed-rank test. The
    returned result lists every test that ran, in order, in ``provenance``.
    """
    policy = policy or ComparisonPolicy()
    xs, ys = _as_sample(x), _as_sample(y)
    trail = []
    normal = True
    for s, name in ((xs, xs.label or "x"), (ys, ys.label or "y")):
        if np.ptp(s.values) == 0:
            # a constant sample is not normal: go straight to the rank test
            trail.append(("shapiro_wilk:" + name + ":zero_variance", 0.0))
            normal = False
            continue
        sw = shapiro_wilk(s)
        trail.append(("shapiro_wilk:" + name, sw.p_value))
        normal = normal and sw.p_value >= policy.alpha
    if not normal:
        res = wilcoxon_signed_rank(xs, ys, paired=True)
    else:
        ft = f_test(xs, ys)
        trail.append(("f_test", ft.p_value))
        res = t_test(xs, ys, "welch" if ft.p_value < policy.alpha else "equal_var")
    trail.append((res.test_name, res.p_value))
    return StatTestResult(
        res.test_name, res.statistic, res.p_value, res.exact, res.n, res.df, res.degenerate, tuple(trail)
    )

"""Detection metrics, bit error rates, and the two significance statistics.

The Student-t CDF goes through the regularized incomplete beta function,
evaluated with a modified-Lentz continued fraction.
"""

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (BadDF, DegenerateVariance, EmptyInput, EmptyMask, LengthMismatch, TooFewPoints,
                     ZeroVariance)

CF_TOL = 1e-12
CF_MAX_ITER = 300
_TINY = 1e-300


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    degenerate: bool = False

    def rows(self):
        return [(k, v) for k, v in asdict(self).items()]


@dataclass
class RecoveryMetrics:
    ber: float
    recovery_rate: float
    bits_compared: int


@dataclass
class StatResult:
    statistic: float
    degrees_of_freedom: int
    p_value: float


def f1_score(precision, recall):
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def metrics_from_counts(tp, fp, tn, fn):
    total = tp + fp + tn + fn
    if total == 0:
        raise EmptyInput("no samples")
    degenerate = (tp + fp == 0) or (tp + fn == 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return MetricsReport((tp + tn) / total, precision, recall, f1_score(precision, recall),
                         tp, fp, tn, fn, degenerate)


def confusion_metrics(predictions, labels, threshold=0.5):
    """Scores at or above ``threshold`` count as stego (positive)."""
    pred = np.asarray(predictions, dtype=np.float64)
    lab = np.asarray(labels).astype(bool)
    if pred.shape != lab.shape:
        raise LengthMismatch(f"{pred.shape} predictions vs {lab.shape} labels")
    if pred.size == 0:
        raise EmptyInput("no predictions")
    pos = pred >= threshold
    tp = int(np.sum(pos & lab))
    fp = int(np.sum(pos & ~lab))
    tn = int(np.sum(~pos & ~lab))
    fn = int(np.sum(~pos & lab))
    return metrics_from_counts(tp, fp, tn, fn)


def recovery_from_counts(errors, bits):
    if bits <= 0:
        raise EmptyMask("no masked bits to compare")
    rate = errors / bits
    return RecoveryMetrics(rate, 1.0 - rate, int(bits))


def ber(pred_bits, true_bits, mask=None):
    pred = np.asarray(pred_bits).astype(bool)
    true = np.asarray(true_bits).astype(bool)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.shape} vs {true.shape}")
    m = np.ones(pred.shape, bool) if mask is None else np.asarray(mask).astype(bool)
    if m.shape != pred.shape:
        raise LengthMismatch(f"mask {m.shape} vs bits {pred.shape}")
    return recovery_from_counts(int(np.count_nonzero(pred[m] != true[m])), int(m.sum()))


# -- special functions ---------------------------------------------------------

def _beta_cf(a, b, x):
    """Continued fraction for I_x(a, b), modified Lentz; converges for x < (a+1)/(a+b+2)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            break
    return h


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x = {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def student_t_cdf(t, df):
    if df < 1:
        raise BadDF(f"degrees of freedom must be >= 1, got {df}")
    if t == 0:
        return 0.5
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


def _two_sided_p(t, df):
    if math.isinf(t):
        return 0.0
    return float(min(1.0, 2.0 * (1.0 - student_t_cdf(abs(t), df))))


# -- tests ---------------------------------------------------------------------

def paired_t_test(a, b):
    """Two-tailed paired t-test on ``a - b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"paired samples of length {a.size} and {b.size}")
    n = a.size
    if n < 2:
        raise TooFewPoints("a paired t-test needs at least 2 pairs")
    d = a - b
    if np.all(d == d[0]):
        if d[0] == 0:
            return StatResult(0.0, n - 1, 1.0)
        raise DegenerateVariance("all paired differences are equal")
    t = d.mean() * math.sqrt(n) / d.std(ddof=1)
    return StatResult(float(t), n - 1, _two_sided_p(t, n - 1))


def pearson_r(x, y):
    """Sample correlation; the p-value tests r = 0 with n - 2 degrees of freedom."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"{x.size} x values vs {y.size} y values")
    n = x.size
    if n < 3:
        raise TooFewPoints("pearson_r needs at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ZeroVariance("one of the samples is constant")
    r = max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy)))
    df = n - 2
    if abs(r) == 1.0:
        return StatResult(r, df, 0.0)
    t = r * math.sqrt(df / (1.0 - r * r))
    return StatResult(r, df, _two_sided_p(t, df))


# -- CSV output ----------------------------------------------------------------

def write_metric_csv(path, rows):
    """Flat ``metric,value`` CSV."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("metric", "value"))
        for k, v in rows:
            wr.writerow((k, _fmt(v)))


def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)

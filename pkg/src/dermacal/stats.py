"""Inter-device reliability statistics.

Implements the agreement toolbox used by the reporting pipeline:

* ``icc_3_1`` -- two-way mixed-effects, single-rater intraclass correlation
  from the classic mean-squares decomposition, with an exact F-based 95%
  confidence interval. The consistency form is the default (it is what the
  ICC(3,1) label denotes in the Shrout-Fleiss scheme); an absolute-agreement
  variant of the two-way mixed model is available via ``form="agreement"``.
* ``bland_altman`` -- bias and 1.96-SD limits of agreement.
* ``anova_eta2`` -- one-way ANOVA with the eta-squared effect size.
* ``bonferroni`` -- family-wise multiple-comparison adjustment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import f as f_dist

from .errors import (
    InsufficientDataError,
    UndefinedStatisticError,
    ValidationError,
)

# Interpretation bands for ICC (poor < 0.50 <= moderate < 0.75 <= good
# <= 0.90 < excellent) and for eta-squared effect sizes. Effect sizes
# below the conventional 0.01 floor still read "small".
ICC_LABELS = ((0.50, "poor"), (0.75, "moderate"), (0.90, "good"))
ETA2_MEDIUM = 0.06
ETA2_LARGE = 0.14


def icc_label(value):
    """Interpretation label for an ICC value."""
    for bound, label in ICC_LABELS:
        if value < bound:
            return label
    if value <= 0.90:
        return "good"
    return "excellent"


def eta_squared_label(value):
    """Effect-size label for eta-squared."""
    if value >= ETA2_LARGE:
        return "large"
    if value >= ETA2_MEDIUM:
        return "medium"
    return "small"


@dataclass(frozen=True)
class IccResult:
    icc: float
    ci_low: float
    ci_high: float
    interpretation: str
    form: str
    f_value: float
    df1: int
    df2: int
    n_targets: int
    k_raters: int

    def to_dict(self):
        return {
            "icc": self.icc,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "interpretation": self.interpretation,
            "form": self.form,
            "f_value": self.f_value,
            "df1": self.df1,
            "df2": self.df2,
            "n_targets": self.n_targets,
            "k_raters": self.k_raters,
        }


def _mean_squares(values):
    """Two-way decomposition of a complete targets-by-raters table.

    The error sum of squares is accumulated from the interaction residuals
    directly (not by subtraction), so tables with exact within-target
    agreement yield an exactly zero error term instead of cancellation
    noise.
    """
    n, k = values.shape
    grand = values.mean()
    row_means = values.mean(axis=1, keepdims=True)
    col_means = values.mean(axis=0, keepdims=True)
    ss_total = float(((values - grand) ** 2).sum())
    ss_rows = float(k * ((row_means.ravel() - grand) ** 2).sum())
    ss_cols = float(n * ((col_means.ravel() - grand) ** 2).sum())
    residual = values - row_means - col_means + grand
    ss_err = float((residual**2).sum())
    ms_rows = ss_rows / (n - 1)
    ms_cols = ss_cols / (k - 1)
    ms_err = ss_err / ((n - 1) * (k - 1))
    return ss_total, ms_rows, ms_cols, ms_err


def icc_3_1(ratings, form="consistency", confidence=0.95):
    """Single-rater ICC from a complete n_targets x k_raters table.

    ``form="consistency"`` (default) is ICC(3,1): rater mean offsets are
    treated as fixed and excluded from disagreement. ``form="agreement"``
    additionally charges rater mean differences to the error term
    (two-way mixed, absolute agreement).

    The confidence interval is the exact F interval for the consistency
    form and the Satterthwaite approximation for the agreement form.
    """
    values = np.asarray(ratings, dtype=np.float64)
    if values.ndim != 2:
        raise ValidationError(f"ratings table must be 2-D, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValidationError("ratings table must be complete (finite values only)")
    n, k = values.shape
    if k < 2 or n < 3:
        raise InsufficientDataError(
            f"ICC needs at least 3 targets and 2 raters, got {n} x {k}"
        )
    if form not in ("consistency", "agreement"):
        raise ValidationError(f"unknown ICC form {form!r}")

    ss_total, ms_rows, ms_cols, ms_err = _mean_squares(values)
    if ss_total == 0.0:
        raise UndefinedStatisticError("ICC undefined: zero total variance")

    alpha = 1.0 - confidence
    df1 = n - 1
    df2 = (n - 1) * (k - 1)

    if ms_err == 0.0 and (form == "consistency" or ms_cols == 0.0):
        # No within-target disagreement chargeable to this form: ICC = 1.
        return IccResult(1.0, 1.0, 1.0, icc_label(1.0), form, float("inf"),
                         df1, df2, n, k)

    f_value = ms_rows / ms_err if ms_err > 0.0 else float("inf")
    if form == "consistency":
        icc = (ms_rows - ms_err) / (ms_rows + (k - 1) * ms_err)
        fl = f_value / f_dist.ppf(1.0 - alpha / 2.0, df1, df2)
        fu = f_value * f_dist.ppf(1.0 - alpha / 2.0, df2, df1)
        ci_low = (fl - 1.0) / (fl + k - 1.0)
        ci_high = (fu - 1.0) / (fu + k - 1.0)
    else:
        icc = (ms_rows - ms_err) / (
            ms_rows + (k - 1) * ms_err + (k / n) * (ms_cols - ms_err)
        )
        # Satterthwaite degrees of freedom for the absolute-agreement CI.
        a = (k * icc) / (n * (1.0 - icc)) if icc < 1.0 else float("inf")
        b = 1.0 + (k * icc * (n - 1)) / (n * (1.0 - icc)) if icc < 1.0 else float("inf")
        num = (a * ms_cols + b * ms_err) ** 2
        den = (a * ms_cols) ** 2 / (k - 1) + (b * ms_err) ** 2 / ((n - 1) * (k - 1))
        v = num / den
        f_low = f_dist.ppf(1.0 - alpha / 2.0, n - 1, v)
        f_up = f_dist.ppf(1.0 - alpha / 2.0, v, n - 1)
        ci_low = (n * (ms_rows - f_low * ms_err)) / (
            f_low * (k * ms_cols + (k * n - k - n) * ms_err) + n * ms_rows
        )
        ci_high = (n * (f_up * ms_rows - ms_err)) / (
            k * ms_cols + (k * n - k - n) * ms_err + n * f_up * ms_rows
        )

    return IccResult(
        icc=float(icc),
        ci_low=float(min(ci_low, icc)),
        ci_high=float(max(ci_high, icc)),
        interpretation=icc_label(float(icc)),
        form=form,
        f_value=float(f_value),
        df1=df1,
        df2=df2,
        n_targets=n,
        k_raters=k,
    )


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    loa_low: float
    loa_high: float
    sd: float
    n: int
    differences: np.ndarray = field(repr=False)

    def to_dict(self, include_differences=True):
        out = {
            "bias": self.bias,
            "loa_low": self.loa_low,
            "loa_high": self.loa_high,
            "sd": self.sd,
            "n": self.n,
        }
        if include_differences:
            out["differences"] = [float(d) for d in self.differences]
        return out


def bland_altman(x, y):
    """Bias and 95% limits of agreement between paired measurements.

    bias = mean(x - y); LoA = bias +/- 1.96 * sd(x - y) with the sample
    (n - 1) standard deviation. The per-pair differences are retained for
    plotting export.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValidationError(f"paired inputs differ in length: {x.size} vs {y.size}")
    if x.size < 2:
        raise InsufficientDataError("Bland-Altman needs at least 2 pairs")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("paired inputs must be finite")
    diff = x - y
    bias = float(diff.mean())
    sd = float(diff.std(ddof=1))
    return BlandAltman(
        bias=bias,
        loa_low=bias - 1.96 * sd,
        loa_high=bias + 1.96 * sd,
        sd=sd,
        n=int(diff.size),
        differences=diff,
    )


@dataclass(frozen=True)
class AnovaRow:
    factor: str
    f_statistic: float
    p_value: float
    eta_squared: float
    effect_size: str
    df_between: int
    df_within: int

    def to_dict(self):
        return {
            "factor": self.factor,
            "f_statistic": self.f_statistic,
            "p_value": self.p_value,
            "eta_squared": self.eta_squared,
            "effect_size": self.effect_size,
            "df_between": self.df_between,
            "df_within": self.df_within,
        }


def anova_eta2(values, labels, factor=""):
    """One-way ANOVA of ``values`` grouped by ``labels``.

    Returns the F statistic, its p-value, and eta-squared
    (SS_between / SS_total) with its effect-size label. Each group must
    contribute at least 2 observations.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if values.shape != labels.shape:
        raise ValidationError("values and labels differ in length")
    if not np.all(np.isfinite(values)):
        raise ValidationError("values must be finite")

    groups = sorted(set(labels.tolist()))
    if len(groups) < 2:
        raise InsufficientDataError("ANOVA needs at least 2 groups")
    grand = values.mean()
    ss_between = 0.0
    ss_within = 0.0
    for g in groups:
        sel = values[labels == g]
        if sel.size < 2:
            raise InsufficientDataError(
                f"ANOVA group {g!r} has {sel.size} observation(s); need at least 2"
            )
        ss_between += sel.size * (sel.mean() - grand) ** 2
        ss_within += float(((sel - sel.mean()) ** 2).sum())

    ss_total = ss_between + ss_within
    if ss_total == 0.0:
        raise UndefinedStatisticError("ANOVA undefined: zero total variance")

    df_between = len(groups) - 1
    df_within = values.size - len(groups)
    if ss_within == 0.0:
        f_statistic = float("inf")
        p_value = 0.0
    else:
        f_statistic = (ss_between / df_between) / (ss_within / df_within)
        p_value = float(f_dist.sf(f_statistic, df_between, df_within))
    return AnovaRow(
        factor=factor,
        f_statistic=float(f_statistic),
        p_value=p_value,
        eta_squared=float(ss_between / ss_total),
        effect_size=eta_squared_label(ss_between / ss_total),
        df_between=df_between,
        df_within=df_within,
    )


@dataclass(frozen=True)
class BonferroniResult:
    m: int
    alpha: float
    adjusted_p: tuple
    significant: tuple

    def to_dict(self):
        return {
            "m": self.m,
            "alpha": self.alpha,
            "adjusted_p": list(self.adjusted_p),
            "significant": list(self.significant),
        }


def bonferroni(p_values, alpha=0.05):
    """Bonferroni adjustment over a family of m tests.

    Adjusted p = min(1, m * p); a test is significant iff its raw p is
    strictly below alpha / m (boundary values are not rejected).
    """
    p = [float(v) for v in p_values]
    for v in p:
        if not (0.0 <= v <= 1.0):
            raise ValidationError(f"p-value {v!r} outside [0, 1]")
    m = len(p)
    if m == 0:
        raise ValidationError("empty p-value list")
    threshold = alpha / m
    return BonferroniResult(
        m=m,
        alpha=alpha,
        adjusted_p=tuple(min(1.0, m * v) for v in p),
        significant=tuple(v < threshold for v in p),
    )

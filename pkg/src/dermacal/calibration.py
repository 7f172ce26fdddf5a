"""Affine color-correction matrix (CCM) estimation and evaluation.

The correction model is ``corrected = A @ rgb + b`` in linear RGB, fitted
by ordinary least squares against a reference device. ``ColorCorrection``
wraps the fit in a scikit-learn style estimator (``fit`` / ``transform`` /
``get_params``) so it composes with sklearn pipelines; the functional API
(``fit_ccm`` / ``ccm_apply`` / ``crossval_ccm``) is what the batch pipeline
uses.

Cross-validation groups records by subject: all measurements of one face
stay inside a single fold, so a matrix is never evaluated on angles or
regions of a subject it trained on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .colorspace import linear_to_lab, ciede2000, srgb_decode
from .errors import (
    InfeasibleSplitError,
    InsufficientDataError,
    SingularFitError,
    ValidationError,
)
from .validation import as_matrix, as_triplets

# Above this condition number of the augmented design the normal equations
# are abandoned for a rank-revealing least-squares solve.
COND_FALLBACK = 1e8

# |det A| below this triggers a near-singular warning on the fitted matrix.
DET_WARN = 1e-6


class NearSingularCcmWarning(UserWarning):
    """Fitted matrix is nearly non-invertible."""


@dataclass(frozen=True)
class Ccm:
    """Affine color correction: 3x3 matrix ``a`` plus bias ``b``.

    ``space`` tags the RGB space the correction operates in; everything in
    this package fits and applies in linear RGB.
    """

    a: np.ndarray
    b: np.ndarray
    space: str = "linear_rgb"

    def __post_init__(self):
        object.__setattr__(self, "a", as_matrix(self.a, (3, 3), "ccm.a"))
        object.__setattr__(self, "b", as_matrix(self.b, (3,), "ccm.b"))

    @property
    def is_near_singular(self):
        return abs(float(np.linalg.det(self.a))) < DET_WARN

    def to_dict(self):
        return {
            "a": [float(v) for v in self.a.ravel()],
            "b": [float(v) for v in self.b],
            "space": self.space,
        }

    @classmethod
    def from_dict(cls, data):
        a = np.asarray(data["a"], dtype=np.float64).reshape(3, 3)
        b = np.asarray(data["b"], dtype=np.float64)
        return cls(a=a, b=b, space=data.get("space", "linear_rgb"))


def identity_ccm():
    return Ccm(a=np.eye(3), b=np.zeros(3))


def fit_ccm(src, ref, cond_threshold=COND_FALLBACK):
    """Exact OLS minimizer of sum ||A @ src_i + b - ref_i||^2.

    ``src`` and ``ref`` are (n, 3) linear RGB arrays over the same sample
    pairing. Needs n >= 4 and a full-rank augmented design [src | 1].
    """
    src = np.atleast_2d(as_triplets(src, name="src"))
    ref = np.atleast_2d(as_triplets(ref, name="ref"))
    if src.shape != ref.shape:
        raise ValidationError(f"src/ref shape mismatch: {src.shape} vs {ref.shape}")
    n = src.shape[0]
    if n < 4:
        raise InsufficientDataError(f"CCM fit needs at least 4 samples, got {n}")

    design = np.hstack([src, np.ones((n, 1))])
    rank = int(np.linalg.matrix_rank(design))
    if rank < 4:
        raise SingularFitError(
            f"CCM design is rank deficient (rank {rank} < 4); "
            "source colors span too small a subspace",
            rank=rank,
        )

    if np.linalg.cond(design) > cond_threshold:
        coeffs = np.linalg.lstsq(design, ref, rcond=None)[0]
    else:
        gram = design.T @ design
        coeffs = np.linalg.solve(gram, design.T @ ref)

    ccm = Ccm(a=coeffs[:3].T, b=coeffs[3])
    if ccm.is_near_singular:
        warnings.warn(
            f"fitted CCM is nearly singular (|det A| = {abs(np.linalg.det(ccm.a)):.3g})",
            NearSingularCcmWarning,
            stacklevel=2,
        )
    return ccm


def ccm_apply(ccm, rgb):
    """Apply ``A @ rgb + b`` and clip the result to be non-negative."""
    rgb = as_triplets(rgb, name="linear RGB")
    return np.maximum(rgb @ ccm.a.T + ccm.b, 0.0)


class ColorCorrection(BaseEstimator, TransformerMixin):
    """scikit-learn style wrapper around the affine CCM fit.

    ``fit(X, y)`` takes source-device linear RGB as ``X`` and the
    reference-device linear RGB as ``y``; ``transform(X)`` maps colors into
    the reference space. The fitted correction is exposed as ``ccm_``.
    """

    def __init__(self, cond_threshold=COND_FALLBACK):
        self.cond_threshold = cond_threshold

    def fit(self, X, y):
        self.ccm_ = fit_ccm(X, y, cond_threshold=self.cond_threshold)
        self.matrix_ = self.ccm_.a
        self.bias_ = self.ccm_.b
        return self

    def transform(self, X):
        if not hasattr(self, "ccm_"):
            raise NotFittedError("ColorCorrection must be fitted before transform")
        return ccm_apply(self.ccm_, X)


@dataclass(frozen=True)
class PairedSample:
    """Source/reference linear-RGB pair sharing a (subject, region, angle) key."""

    src: tuple
    ref: tuple
    key: tuple  # (subject_id, region, angle)

    @property
    def subject_id(self):
        return self.key[0]


def pair_records(records, source_device, reference_device):
    """Match source-device records to the reference device.

    A source record pairs with the reference record of the same
    (subject, region) whose angle label is nearest (ties break toward the
    smaller label). Records without a counterpart are dropped; the count of
    dropped records is returned alongside the samples. RGB is converted to
    linear before pairing, since that is the space the CCM operates in.
    """
    by_cell = {}
    for rec in records:
        if rec.device == reference_device:
            by_cell.setdefault((rec.subject_id, rec.region), []).append(rec)

    samples = []
    dropped = 0
    for rec in records:
        if rec.device != source_device:
            continue
        candidates = by_cell.get((rec.subject_id, rec.region))
        if not candidates:
            dropped += 1
            continue
        match = min(candidates, key=lambda r: (abs(r.angle - rec.angle), r.angle))
        samples.append(
            PairedSample(
                src=tuple(float(v) for v in srgb_decode(rec.rgb)),
                ref=tuple(float(v) for v in srgb_decode(match.rgb)),
                key=(rec.subject_id, rec.region, rec.angle),
            )
        )
    return samples, dropped


def samples_as_arrays(samples):
    src = np.array([s.src for s in samples], dtype=np.float64)
    ref = np.array([s.ref for s in samples], dtype=np.float64)
    return src, ref


@dataclass(frozen=True)
class FoldResult:
    fold: int
    test_subjects: tuple
    n_train: int
    n_test: int
    train_mean: float
    train_std: float
    test_mean: float
    test_std: float
    test_before_mean: float

    def to_dict(self):
        return {
            "fold": self.fold,
            "test_subjects": list(self.test_subjects),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "train_delta_e_mean": self.train_mean,
            "train_delta_e_std": self.train_std,
            "test_delta_e_mean": self.test_mean,
            "test_delta_e_std": self.test_std,
            "test_before_delta_e_mean": self.test_before_mean,
        }


@dataclass(frozen=True)
class CvReport:
    """Cross-validated CCM evaluation in CIEDE2000 units."""

    fold_count: int
    folds: tuple
    before_mean: float
    before_std: float
    after_mean: float
    after_std: float
    improvement_pct: float
    after_median: float
    after_p95: float
    n_samples: int
    n_subjects: int
    seed: int
    pooled_after: np.ndarray = field(repr=False)
    pooled_before: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "fold_count": self.fold_count,
            "folds": [f.to_dict() for f in self.folds],
            "before_delta_e_mean": self.before_mean,
            "before_delta_e_std": self.before_std,
            "after_delta_e_mean": self.after_mean,
            "after_delta_e_std": self.after_std,
            "after_delta_e_median": self.after_median,
            "after_delta_e_p95": self.after_p95,
            "improvement_pct": self.improvement_pct,
            "n_samples": self.n_samples,
            "n_subjects": self.n_subjects,
            "seed": self.seed,
        }


def _delta_e_lab(src_linear, ref_linear):
    return ciede2000(linear_to_lab(src_linear), linear_to_lab(ref_linear))


def crossval_ccm(samples, k=5, seed=0):
    """Subject-grouped k-fold cross-validation of the CCM fit.

    Subjects are shuffled deterministically from ``seed`` and split into k
    contiguous folds; each fold's samples are corrected by a matrix fitted
    on the other folds only. Color error is CIEDE2000 in CIELAB after
    converting linear RGB through the XYZ/Lab chain. The pooled
    before/after statistics aggregate every held-out sample exactly once.
    """
    if k < 2:
        raise ValidationError(f"fold count must be >= 2, got {k}")
    if len(samples) < 2 * k:
        raise InsufficientDataError(
            f"need at least {2 * k} samples for {k}-fold CV, got {len(samples)}"
        )
    subjects = sorted({s.subject_id for s in samples})
    if k > len(subjects):
        raise InfeasibleSplitError(
            f"cannot split {len(subjects)} subject(s) into {k} folds"
        )

    rng = np.random.default_rng(seed)
    order = np.array(subjects, dtype=object)
    rng.shuffle(order)
    fold_subjects = [set(part.tolist()) for part in np.array_split(order, k)]

    src, ref = samples_as_arrays(samples)
    subject_of = np.array([s.subject_id for s in samples], dtype=object)

    folds = []
    pooled_before = []
    pooled_after = []
    for i, test_set in enumerate(fold_subjects):
        test_mask = np.isin(subject_of, sorted(test_set))
        train_mask = ~test_mask
        ccm = fit_ccm(src[train_mask], ref[train_mask])

        train_after = _delta_e_lab(ccm_apply(ccm, src[train_mask]), ref[train_mask])
        test_after = _delta_e_lab(ccm_apply(ccm, src[test_mask]), ref[test_mask])
        test_before = _delta_e_lab(src[test_mask], ref[test_mask])

        folds.append(
            FoldResult(
                fold=i,
                test_subjects=tuple(sorted(test_set)),
                n_train=int(train_mask.sum()),
                n_test=int(test_mask.sum()),
                train_mean=float(train_after.mean()),
                train_std=float(train_after.std(ddof=1)) if train_after.size > 1 else 0.0,
                test_mean=float(test_after.mean()),
                test_std=float(test_after.std(ddof=1)) if test_after.size > 1 else 0.0,
                test_before_mean=float(test_before.mean()),
            )
        )
        pooled_before.append(test_before)
        pooled_after.append(test_after)

    before = np.concatenate(pooled_before)
    after = np.concatenate(pooled_after)
    before_mean = float(before.mean())
    after_mean = float(after.mean())
    if before_mean == 0.0:
        improvement = 0.0
    else:
        improvement = 100.0 * (1.0 - after_mean / before_mean)

    return CvReport(
        fold_count=k,
        folds=tuple(folds),
        before_mean=before_mean,
        before_std=float(before.std(ddof=1)) if before.size > 1 else 0.0,
        after_mean=after_mean,
        after_std=float(after.std(ddof=1)) if after.size > 1 else 0.0,
        improvement_pct=float(improvement),
        after_median=float(np.median(after)),
        after_p95=float(np.percentile(after, 95)),
        n_samples=len(samples),
        n_subjects=len(subjects),
        seed=seed,
        pooled_after=after,
        pooled_before=before,
    )

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dermacal import calibration as cal
from dermacal.colorspace import srgb_encode
from dermacal.errors import (
    InfeasibleSplitError,
    InsufficientDataError,
    SingularFitError,
    ValidationError,
)
from dermacal.records import PatchRecord


def make_affine_data(rng, n=60):
    a_true = np.eye(3) + 0.15 * rng.standard_normal((3, 3))
    b_true = 0.05 * rng.standard_normal(3)
    src = rng.uniform(0.05, 0.95, size=(n, 3))
    ref = src @ a_true.T + b_true
    return src, ref, a_true, b_true


def sse(ccm, src, ref):
    residual = src @ ccm.a.T + ccm.b - ref
    return float((residual**2).sum())


class TestFit:
    def test_self_fit_is_identity(self, rng):
        src = rng.uniform(0.1, 0.9, size=(40, 3))
        ccm = cal.fit_ccm(src, src)
        assert np.max(np.abs(ccm.a - np.eye(3))) < 1e-9
        assert np.max(np.abs(ccm.b)) < 1e-9

    def test_exact_affine_recovery(self, rng):
        src, ref, a_true, b_true = make_affine_data(rng)
        ccm = cal.fit_ccm(src, ref)
        assert np.max(np.abs(ccm.a - a_true)) < 1e-9
        assert np.max(np.abs(ccm.b - b_true)) < 1e-9

    def test_heldout_application(self, rng):
        src, ref, a_true, b_true = make_affine_data(rng, n=80)
        ccm = cal.fit_ccm(src[:60], ref[:60])
        heldout = cal.ccm_apply(ccm, src[60:])
        expected = np.maximum(src[60:] @ a_true.T + b_true, 0.0)
        assert np.max(np.abs(heldout - expected)) < 1e-9

    def test_training_sse_beats_identity(self, rng):
        src = rng.uniform(0.05, 0.95, size=(50, 3))
        ref = np.clip(src * 0.8 + 0.05 + 0.02 * rng.standard_normal((50, 3)), 0, 1)
        fitted = cal.fit_ccm(src, ref)
        identity = cal.identity_ccm()
        assert sse(fitted, src, ref) <= sse(identity, src, ref)

    def test_ols_optimality_under_perturbation(self, rng):
        src = rng.uniform(0.05, 0.95, size=(60, 3))
        ref = src * 0.85 + 0.04 + 0.03 * rng.standard_normal((60, 3))
        fitted = cal.fit_ccm(src, ref)
        base = sse(fitted, src, ref)
        eps = 1e-3
        for _ in range(100):
            da = eps * rng.standard_normal((3, 3))
            db = eps * rng.standard_normal(3)
            perturbed = cal.Ccm(a=fitted.a + da, b=fitted.b + db)
            assert sse(perturbed, src, ref) >= base

    def test_refit_on_corrected_is_identity(self, rng):
        src, ref, _, _ = make_affine_data(rng)
        ref = ref + 0.01 * rng.standard_normal(ref.shape)
        first = cal.fit_ccm(src, ref)
        corrected = src @ first.a.T + first.b  # unclipped corrected colors
        second = cal.fit_ccm(corrected, ref)
        assert np.max(np.abs(second.a - np.eye(3))) < 1e-6
        assert np.max(np.abs(second.b)) < 1e-6

    def test_insufficient_samples(self, rng):
        src = rng.uniform(0, 1, size=(3, 3))
        with pytest.raises(InsufficientDataError):
            cal.fit_ccm(src, src)

    def test_rank_deficient_reports_rank(self):
        src = np.tile([0.5, 0.4, 0.3], (10, 1))
        ref = np.tile([0.4, 0.4, 0.3], (10, 1))
        with pytest.raises(SingularFitError) as excinfo:
            cal.fit_ccm(src, ref)
        assert excinfo.value.rank == 1
        assert "rank 1" in str(excinfo.value)

    def test_near_singular_warning(self, rng):
        src = rng.uniform(0.1, 0.9, size=(30, 3))
        ref = np.tile([0.5, 0.5, 0.5], (30, 1)) + 1e-9 * rng.standard_normal((30, 3))
        with pytest.warns(cal.NearSingularCcmWarning):
            cal.fit_ccm(src, ref)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValidationError):
            cal.fit_ccm(rng.uniform(0, 1, (10, 3)), rng.uniform(0, 1, (9, 3)))

    def test_ill_conditioned_falls_back_to_lstsq(self, rng):
        # Nearly collinear sources exceed the condition threshold but are
        # still technically full rank; the fit must not explode.
        base = rng.uniform(0.2, 0.8, 3)
        direction = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
        t = rng.uniform(-0.2, 0.2, size=(50, 1))
        src = base + t * direction + 1e-7 * rng.standard_normal((50, 3))
        ref = src * 0.9 + 0.02
        ccm = cal.fit_ccm(src, ref, cond_threshold=1e3)
        pred = src @ ccm.a.T + ccm.b
        assert np.max(np.abs(pred - ref)) < 1e-4


class TestApply:
    def test_identity(self, rng):
        c = rng.uniform(0, 1, size=(20, 3))
        assert np.allclose(cal.ccm_apply(cal.identity_ccm(), c), c)

    def test_constant_map(self, rng):
        ccm = cal.Ccm(a=np.zeros((3, 3)), b=np.array([0.5, 0.5, 0.5]))
        c = rng.uniform(0, 1, size=(20, 3))
        assert np.allclose(cal.ccm_apply(ccm, c), 0.5)

    def test_clips_negative(self):
        ccm = cal.Ccm(a=np.eye(3), b=np.array([-1.0, 0.0, 0.0]))
        out = cal.ccm_apply(ccm, [0.2, 0.2, 0.2])
        assert out[0] == 0.0

    def test_serialization_roundtrip(self, rng):
        src, ref, _, _ = make_affine_data(rng)
        ccm = cal.fit_ccm(src, ref)
        again = cal.Ccm.from_dict(ccm.to_dict())
        assert np.array_equal(again.a, ccm.a)
        assert np.array_equal(again.b, ccm.b)
        assert again.space == "linear_rgb"
        assert len(ccm.to_dict()["a"]) == 9


class TestEstimator:
    def test_fit_transform(self, rng):
        src, ref, _, _ = make_affine_data(rng)
        est = cal.ColorCorrection()
        out = est.fit_transform(src, ref)
        assert np.max(np.abs(out - np.maximum(ref, 0.0))) < 1e-9
        assert est.matrix_.shape == (3, 3)
        assert est.bias_.shape == (3,)

    def test_get_params_and_clone(self):
        est = cal.ColorCorrection(cond_threshold=1e6)
        assert est.get_params() == {"cond_threshold": 1e6}
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_not_fitted(self, rng):
        with pytest.raises(NotFittedError):
            cal.ColorCorrection().transform(rng.uniform(0, 1, (5, 3)))


def build_records(subjects, devices, regions=("forehead", "chin"), angles=(0, 1, 2), rng=None):
    rng = rng or np.random.default_rng(5)
    records = []
    for sid in subjects:
        for region in regions:
            base = rng.uniform(0.2, 0.8, 3)
            for device in devices:
                for angle in angles:
                    srgb = srgb_encode(np.clip(base + (0.01 if device != "ref" else 0.0), 0, 1))
                    records.append(
                        PatchRecord(sid, device, region, angle, tuple(float(v) for v in srgb))
                    )
    return records


class TestPairing:
    def test_nearest_angle_matching(self):
        records = [
            PatchRecord("s1", "ref", "forehead", 0, (0.5, 0.5, 0.5)),
            PatchRecord("s1", "ref", "forehead", 4, (0.6, 0.6, 0.6)),
            PatchRecord("s1", "cam", "forehead", 3, (0.4, 0.4, 0.4)),
            PatchRecord("s1", "cam", "forehead", 1, (0.3, 0.3, 0.3)),
        ]
        samples, dropped = cal.pair_records(records, "cam", "ref")
        assert dropped == 0
        by_angle = {s.key[2]: s for s in samples}
        # Angle 3 is closer to 4; angle 1 is closer to 0.
        assert by_angle[3].ref == tuple(map(float, np.asarray(cal.srgb_decode((0.6, 0.6, 0.6)))))
        assert by_angle[1].ref == tuple(map(float, np.asarray(cal.srgb_decode((0.5, 0.5, 0.5)))))

    def test_tie_breaks_toward_smaller_angle(self):
        records = [
            PatchRecord("s1", "ref", "chin", 0, (0.5, 0.5, 0.5)),
            PatchRecord("s1", "ref", "chin", 2, (0.6, 0.6, 0.6)),
            PatchRecord("s1", "cam", "chin", 1, (0.4, 0.4, 0.4)),
        ]
        samples, _ = cal.pair_records(records, "cam", "ref")
        assert samples[0].ref == tuple(map(float, np.asarray(cal.srgb_decode((0.5, 0.5, 0.5)))))

    def test_unmatched_dropped_with_count(self):
        records = [
            PatchRecord("s1", "cam", "forehead", 0, (0.4, 0.4, 0.4)),
            PatchRecord("s2", "cam", "forehead", 0, (0.4, 0.4, 0.4)),
            PatchRecord("s2", "ref", "forehead", 0, (0.5, 0.5, 0.5)),
        ]
        samples, dropped = cal.pair_records(records, "cam", "ref")
        assert len(samples) == 1 and dropped == 1


class TestCrossval:
    def test_fold_partition_of_subjects(self, rng):
        subjects = [f"s{i}" for i in range(10)]
        records = build_records(subjects, ("cam", "ref"), rng=rng)
        samples, _ = cal.pair_records(records, "cam", "ref")
        report = cal.crossval_ccm(samples, k=5, seed=1)
        sizes = [len(f.test_subjects) for f in report.folds]
        assert sizes == [2, 2, 2, 2, 2]
        seen = [s for f in report.folds for s in f.test_subjects]
        assert sorted(seen) == sorted(subjects)

    def test_identical_devices_give_zero_error(self, rng):
        subjects = [f"s{i}" for i in range(8)]
        records = []
        for sid in subjects:
            for region in ("forehead", "chin"):
                base = rng.uniform(0.2, 0.8, 3)
                srgb = tuple(float(v) for v in srgb_encode(base))
                records.append(PatchRecord(sid, "cam", region, 0, srgb))
                records.append(PatchRecord(sid, "ref", region, 0, srgb))
        samples, _ = cal.pair_records(records, "cam", "ref")
        report = cal.crossval_ccm(samples, k=4, seed=0)
        assert report.before_mean == pytest.approx(0.0, abs=1e-9)
        assert report.after_mean == pytest.approx(0.0, abs=1e-7)
        assert report.improvement_pct == 0.0

    def test_seed_determinism(self, rng):
        records = build_records([f"s{i}" for i in range(9)], ("cam", "ref"), rng=rng)
        samples, _ = cal.pair_records(records, "cam", "ref")
        one = cal.crossval_ccm(samples, k=3, seed=11)
        two = cal.crossval_ccm(samples, k=3, seed=11)
        assert one.to_dict() == two.to_dict()
        assert np.array_equal(one.pooled_after, two.pooled_after)
        assert np.array_equal(one.pooled_before, two.pooled_before)

    def test_improvement_identity(self, rng):
        records = build_records([f"s{i}" for i in range(10)], ("cam", "ref"), rng=rng)
        samples, _ = cal.pair_records(records, "cam", "ref")
        report = cal.crossval_ccm(samples, k=5, seed=3)
        expected = 100.0 * (1.0 - report.after_mean / report.before_mean)
        assert report.improvement_pct == expected

    def test_pooled_covers_every_sample_once(self, rng):
        records = build_records([f"s{i}" for i in range(10)], ("cam", "ref"), rng=rng)
        samples, _ = cal.pair_records(records, "cam", "ref")
        report = cal.crossval_ccm(samples, k=5, seed=3)
        assert report.pooled_after.size == len(samples)
        assert sum(f.n_test for f in report.folds) == len(samples)

    def test_more_folds_than_subjects(self, rng):
        records = build_records(["s1", "s2", "s3"], ("cam", "ref"), rng=rng)
        samples, _ = cal.pair_records(records, "cam", "ref")
        with pytest.raises(InfeasibleSplitError):
            cal.crossval_ccm(samples, k=4, seed=0)

    def test_bad_fold_count(self, rng):
        records = build_records(["s1", "s2"], ("cam", "ref"), rng=rng)
        samples, _ = cal.pair_records(records, "cam", "ref")
        with pytest.raises(ValidationError):
            cal.crossval_ccm(samples, k=1, seed=0)

    def test_too_few_samples(self):
        samples = [
            cal.PairedSample(src=(0.1 * i, 0.2, 0.3), ref=(0.1 * i, 0.2, 0.3), key=(f"s{i}", "r", 0))
            for i in range(3)
        ]
        with pytest.raises(InsufficientDataError):
            cal.crossval_ccm(samples, k=2, seed=0)

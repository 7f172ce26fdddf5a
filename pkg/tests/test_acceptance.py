"""Acceptance suite: one test per criterion, each printing a PASS line.

Criteria 5-8 run on the calibrated default simulator cohort (200 subjects,
seed 42) through the real reporting pipeline; the stated runtime budgets
include that shared computation.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from dermacal import calibration as cal
from dermacal import clinical
from dermacal import colorspace as cs
from dermacal import stats
from dermacal.pipeline import RunConfig, ingest_csv, run_analysis, write_outputs
from dermacal.records import write_patch_csv
from dermacal.report import to_json

from test_colorspace import CIEDE2000_PAIRS
from test_stats import eta2_oracle, icc_consistency_oracle


@contextmanager
def criterion(number, description, limit_s, offset_s=0.0):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"FAIL criterion {number}: {description}")
        raise
    elapsed = time.perf_counter() - start + offset_s
    assert elapsed < limit_s, (
        f"criterion {number} exceeded its runtime budget: {elapsed:.1f}s >= {limit_s}s"
    )
    print(f"PASS criterion {number}: {description} ({elapsed:.2f}s)")


@pytest.fixture(scope="module")
def timed_cohort():
    # Generate fresh here (rather than reusing the session fixture) so the
    # runtime budgets include cohort generation.
    from dermacal.simulate import default_cohort_config, default_device_models, generate_cohort

    start = time.perf_counter()
    cfg = default_cohort_config(subject_count=200, seed=42)
    cohort = generate_cohort(cfg, default_device_models())
    return cohort, time.perf_counter() - start


@pytest.fixture(scope="module")
def analysis(timed_cohort):
    cohort, gen_seconds = timed_cohort
    cfg = RunConfig(
        inputs=("<simulated>",),
        reference_device="dslr",
        folds=5,
        seed=42,
        threshold=2.0,
    )
    start = time.perf_counter()
    report = run_analysis(cfg, cohort.records)
    return report, gen_seconds + (time.perf_counter() - start)


def test_criterion_1_color_math_exactness(rng):
    with criterion(1, "color-math exactness (roundtrip, D65 white, CIEDE2000 table)", 1.0):
        xs = np.linspace(0.0, 1.0, 100001)
        gray = np.stack([xs, xs, xs], axis=-1)
        assert np.max(np.abs(cs.srgb_encode(cs.srgb_decode(gray)) - gray)) <= 1e-9
        random_rgb = rng.uniform(0, 1, (5000, 3))
        back = cs.srgb_encode(cs.srgb_decode(random_rgb))
        assert np.max(np.abs(back - random_rgb)) <= 1e-9

        white = cs.srgb_to_lab([1.0, 1.0, 1.0])
        assert np.max(np.abs(white - np.array([100.0, 0.0, 0.0]))) < 0.01

        table = np.array(CIEDE2000_PAIRS)
        got = cs.ciede2000(table[:, 0:3], table[:, 3:6])
        assert np.max(np.abs(got - table[:, 6])) < 1e-4


def test_criterion_2_ccm_correctness(rng):
    with criterion(2, "CCM correctness (affine recovery, self-fit, OLS optimality)", 5.0):
        a_true = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
        b_true = 0.05 * rng.standard_normal(3)
        src = rng.uniform(0.05, 0.95, (200, 3))
        ref = src @ a_true.T + b_true
        fitted = cal.fit_ccm(src, ref)
        assert np.max(np.abs(fitted.a - a_true)) <= 1e-9
        assert np.max(np.abs(fitted.b - b_true)) <= 1e-9

        self_fit = cal.fit_ccm(src, src)
        assert np.max(np.abs(self_fit.a - np.eye(3))) <= 1e-9
        assert np.max(np.abs(self_fit.b)) <= 1e-9

        noisy_ref = ref + 0.02 * rng.standard_normal(ref.shape)
        ols = cal.fit_ccm(src, noisy_ref)
        residual = src @ ols.a.T + ols.b - noisy_ref
        base_sse = float((residual**2).sum())
        for _ in range(100):
            da = 1e-3 * rng.standard_normal((3, 3))
            db = 1e-3 * rng.standard_normal(3)
            perturbed = src @ (ols.a + da).T + (ols.b + db) - noisy_ref
            assert float((perturbed**2).sum()) >= base_sse


def test_criterion_3_clinical_index_oracles(rng):
    with criterion(3, "clinical-index oracles (MI, ITA, dITA/db*, finite differences)", 5.0):
        assert float(clinical.melanin_index([50.0, 0.0, 0.0])) == pytest.approx(
            30.103, abs=1e-3
        )
        assert float(clinical.ita([75.0, 0.0, 15.0])) == pytest.approx(59.036, abs=1e-3)
        sens = clinical.ita_sensitivity([75.0, 0.0, 15.0])
        assert float(np.radians(sens.d_ita_d_b)) == pytest.approx(-0.0294, abs=1e-4)
        assert abs(float(np.radians(sens.d_ita_d_b))) == pytest.approx(
            25.0 / 850.0, abs=1e-12
        )

        l = rng.uniform(55.0, 95.0, 1000)
        a = rng.uniform(2.0, 20.0, 1000)
        b = rng.uniform(5.0, 35.0, 1000)
        lab = np.stack([l, a, b], axis=-1)
        sens = clinical.ita_sensitivity(lab)
        h = 1e-4
        dl = (clinical.ita(lab + [h, 0, 0]) - clinical.ita(lab - [h, 0, 0])) / (2 * h)
        db = (clinical.ita(lab + [0, 0, h]) - clinical.ita(lab - [0, 0, h])) / (2 * h)
        assert np.max(np.abs(dl - sens.d_ita_d_l)) <= 1e-6
        assert np.max(np.abs(db - sens.d_ita_d_b)) <= 1e-6


def test_criterion_4_statistics_oracles(rng):
    with criterion(4, "statistics oracles (ICC, eta^2 decompositions, Bland-Altman)", 5.0):
        for _ in range(25):
            n = int(rng.integers(4, 10))
            k = int(rng.integers(2, 5))
            table = rng.normal(0, 1, (n, k)) + rng.normal(0, 2, (n, 1))
            assert stats.icc_3_1(table).icc == pytest.approx(
                icc_consistency_oracle(table), abs=1e-10
            )
        for _ in range(25):
            sizes = rng.integers(3, 8, int(rng.integers(2, 5)))
            values, labels = [], []
            for g, size in enumerate(sizes):
                values.extend(rng.normal(0.4 * g, 1.0, size).tolist())
                labels.extend([f"g{g}"] * size)
            assert stats.anova_eta2(values, labels).eta_squared == pytest.approx(
                eta2_oracle(values, labels), abs=1e-10
            )
        x = rng.normal(0, 1, 100)
        y = rng.normal(0, 1, 100)
        fwd, rev = stats.bland_altman(x, y), stats.bland_altman(y, x)
        assert fwd.bias == -rev.bias
        assert fwd.loa_low == pytest.approx(-rev.loa_high, abs=1e-12)
        assert fwd.loa_high == pytest.approx(-rev.loa_low, abs=1e-12)


def test_criterion_5_raw_unusability(analysis):
    report, offset = analysis
    with criterion(
        5, "raw unusability (Delta E bands, acceptability below 5%)", 60.0, offset
    ):
        pairs = report["deltae"]["pairs"]
        tablet = pairs["tablet_vs_dslr"]["mean"]
        phone = pairs["smartphone_vs_dslr"]["mean"]
        assert 6.0 <= tablet <= 11.0, f"tablet mean {tablet}"
        assert 5.0 <= phone <= 9.5, f"smartphone mean {phone}"
        fraction = report["deltae"]["pooled_vs_reference"]["acceptable_fraction"]
        assert fraction < 0.05, f"acceptability {fraction}"


def test_criterion_6_calibration_efficacy(analysis):
    report, offset = analysis
    with criterion(
        6, "calibration efficacy (55-85% improvement, post-correction < 2.5)", 120.0, offset
    ):
        for pair in ("tablet_to_dslr", "smartphone_to_dslr"):
            cv = report["ccm"]["pairs"][pair]["cv"]
            assert 55.0 <= cv["improvement_pct"] <= 85.0, (pair, cv["improvement_pct"])
            assert cv["after_delta_e_mean"] < 2.5, (pair, cv["after_delta_e_mean"])


def test_criterion_7_color_clinical_decoupling(analysis):
    report, offset = analysis
    with criterion(
        7, "color-clinical decoupling (ICC pattern on corrected cohort)", 120.0, offset
    ):
        measures = report["icc"]["measures"]
        assert report["icc"]["based_on"] == "corrected"
        mi = measures["melanin_index"]["icc"]
        angle = measures["ita"]["icc"]
        assert mi > 0.7, f"ICC(MI) {mi}"
        assert angle < 0.55, f"ICC(ITA) {angle}"
        assert mi - angle >= 0.2, f"gap {mi - angle}"
        assert measures["b_star"]["icc"] < measures["l_star"]["icc"]


def test_criterion_8_variance_hierarchy(analysis):
    report, offset = analysis
    with criterion(
        8, "variance hierarchy (region eta^2 exceeds device eta^2)", 60.0, offset
    ):
        rows = {row["factor"]: row for row in report["anova"]["rows"]}
        region = rows["region"]["eta_squared"]
        device = rows["source_device"]["eta_squared"]
        assert 0.15 <= region <= 0.35, f"region eta^2 {region}"
        assert 0.03 <= device <= 0.12, f"device eta^2 {device}"
        assert region > device


def test_criterion_9_determinism(timed_cohort, tmp_path):
    cohort, _ = timed_cohort
    with criterion(9, "end-to-end determinism (byte-identical report.json)", 240.0):
        csv_path = tmp_path / "cohort.csv"
        write_patch_csv(cohort.records, csv_path)

        cfg = RunConfig(
            inputs=(str(csv_path),),
            reference_device="dslr",
            folds=5,
            seed=42,
            threshold=2.0,
            out_dir=str(tmp_path / "out"),
            output_format="json",
        )
        blobs = []
        texts = []
        for _ in range(2):
            records = ingest_csv(str(csv_path))
            report = run_analysis(cfg, records)
            write_outputs(report, cfg)
            blobs.append((tmp_path / "out" / "report.json").read_bytes())
            texts.append(to_json(report))
        assert blobs[0] == blobs[1]
        assert texts[0] == texts[1]
        assert blobs[0].decode("utf-8") == texts[0]

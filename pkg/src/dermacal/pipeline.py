"""Batch analysis orchestration: ingest, run stages, emit the report.

``run_analysis`` executes the enabled stages in dependency order (convert
-> pair -> Delta E -> CCM cross-validation -> corrected colors -> indices
-> ICC -> Bland-Altman -> ANOVA -> sensitivity) and assembles the
``report_version: 1`` dict that ``report.to_json`` / ``to_markdown``
serialize. Everything is deterministic given the input records and the
run configuration; aggregation orders are fixed by sorted keys.
"""

from __future__ import annotations

import contextlib
import json
import os
from dataclasses import dataclass

import numpy as np

from ._version import __version__ as _version
from .calibration import (
    crossval_ccm,
    ccm_apply,
    fit_ccm,
    pair_records,
    samples_as_arrays,
)
from .clinical import erythema_index, ita, ita_degenerate, ita_sensitivity, melanin_index
from .colorspace import ciede2000, linear_to_lab, srgb_decode, srgb_to_lab
from .errors import AnalysisInfeasibleError, DermacalError, ValidationError
from .records import read_patch_csv
from .report import REPORT_VERSION, to_json, to_markdown
from .stats import anova_eta2, bland_altman, bonferroni, icc_3_1

ALL_ANALYSES = ("deltae", "ccm", "indices", "icc", "bland_altman", "anova", "sensitivity")

_CHANNEL_KEYS = ("l_star", "a_star", "b_star")


@dataclass(frozen=True)
class RunConfig:
    """Resolved run settings; echoed verbatim into the report."""

    inputs: tuple
    reference_device: str
    folds: int = 5
    seed: int = 42
    analyses: tuple = ALL_ANALYSES
    threshold: float = 2.0
    out_dir: str = "."
    output_format: str = "both"  # json | markdown | both

    def __post_init__(self):
        if self.folds < 2:
            raise ValidationError(f"folds must be >= 2, got {self.folds}")
        if not self.threshold > 0:
            raise ValidationError(f"threshold must be > 0, got {self.threshold}")
        unknown = [a for a in self.analyses if a not in ALL_ANALYSES]
        if unknown:
            raise ValidationError(f"unknown analysis toggle {unknown[0]!r}")
        if self.output_format not in ("json", "markdown", "both"):
            raise ValidationError(f"unknown output format {self.output_format!r}")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "analyses", tuple(self.analyses))

    def to_dict(self):
        return {
            "inputs": list(self.inputs),
            "reference_device": self.reference_device,
            "folds": self.folds,
            "seed": self.seed,
            "analyses": list(self.analyses),
            "threshold": self.threshold,
            "out_dir": self.out_dir,
            "output_format": self.output_format,
        }


def ingest_csv(path):
    """Read one patch CSV with strict schema validation."""
    return read_patch_csv(path)


def ingest_inputs(paths):
    """Read and concatenate several patch CSVs, rejecting cross-file
    duplicate keys."""
    records = []
    seen = {}
    for path in paths:
        for rec in read_patch_csv(path):
            if rec.key in seen:
                raise ValidationError(
                    f"duplicate record key {rec.key}: present in both "
                    f"{seen[rec.key]} and {path}"
                )
            seen[rec.key] = path
            records.append(rec)
    return records


@contextlib.contextmanager
def _stage(name):
    # Propagate stage errors with the stage name attached.
    try:
        yield
    except DermacalError as exc:
        raise exc.__class__(f"stage '{name}': {exc}") from exc


def _finite_or_none(value):
    value = float(value)
    return value if np.isfinite(value) else None


def _device_pairs(devices, reference):
    """Unordered device pairs as (source, target) with the reference, when
    present, always on the target side; otherwise lexicographic order."""
    pairs = []
    for i, x in enumerate(devices):
        for y in devices[i + 1 :]:
            if x == reference:
                pairs.append((y, x))
            else:
                pairs.append((x, y))
    return pairs


def _summary_stats(values):
    return {
        "mean": float(values.mean()),
        "std": float(values.std(ddof=1)) if values.size > 1 else 0.0,
        "median": float(np.median(values)),
        "p95": float(np.percentile(values, 95)),
        "n": int(values.size),
    }


def run_analysis(cfg, records):
    """Execute the enabled analyses over patch records and build the report.

    Raises ``AnalysisInfeasibleError`` when the reference device is absent
    or an enabled pairwise analysis finds no pairs.
    """
    if not records:
        raise ValidationError("no records to analyze")
    devices = sorted({r.device for r in records})
    if cfg.reference_device not in devices:
        raise AnalysisInfeasibleError(
            f"reference device {cfg.reference_device!r} not present in input "
            f"(devices: {', '.join(devices)})"
        )

    by_device = {dev: [] for dev in devices}
    for rec in records:
        by_device[rec.device].append(rec)
    rgb = {dev: np.array([r.rgb for r in recs]) for dev, recs in by_device.items()}
    lab = {dev: srgb_to_lab(rgb[dev]) for dev in devices}

    enabled = set(cfg.analyses)
    report = {
        "report_version": REPORT_VERSION,
        "tool": {"name": "dermacal", "version": _version},
        "config": cfg.to_dict(),
    }

    # Dataset summary is always present.
    report["dataset"] = {
        "n_records": len(records),
        "n_subjects": len({r.subject_id for r in records}),
        "regions": sorted({r.region for r in records}),
        "devices": {
            dev: {
                "n_records": len(by_device[dev]),
                "n_subjects": len({r.subject_id for r in by_device[dev]}),
                "mean_rgb": [float(v) for v in rgb[dev].mean(axis=0)],
                "mean_lab": [float(v) for v in lab[dev].mean(axis=0)],
            }
            for dev in devices
        },
    }

    pairwise_enabled = enabled & {"deltae", "ccm", "icc", "bland_altman", "anova"}
    pairs = _device_pairs(devices, cfg.reference_device)
    consumer_devices = [d for d in devices if d != cfg.reference_device]

    paired = {}
    if pairwise_enabled:
        with _stage("pair"):
            for src_dev, ref_dev in pairs:
                samples, dropped = pair_records(records, src_dev, ref_dev)
                paired[(src_dev, ref_dev)] = (samples, dropped)
            if all(not samples for samples, _ in paired.values()):
                raise AnalysisInfeasibleError(
                    "pairing produced zero pairs; need at least two devices "
                    "sharing (subject, region) cells"
                )

    delta_e = {}
    if pairwise_enabled:
        with _stage("deltae"):
            for (src_dev, ref_dev), (samples, _) in paired.items():
                if not samples:
                    continue
                src, ref = samples_as_arrays(samples)
                delta_e[(src_dev, ref_dev)] = ciede2000(
                    linear_to_lab(src), linear_to_lab(ref)
                )

    if "deltae" in enabled:
        with _stage("deltae"):
            pair_sections = {}
            pooled = []
            for src_dev, ref_dev in pairs:
                samples, dropped = paired[(src_dev, ref_dev)]
                if not samples:
                    continue
                de = delta_e[(src_dev, ref_dev)]
                entry = _summary_stats(de)
                entry["acceptable_fraction"] = float((de < cfg.threshold).mean())
                entry["n_dropped"] = dropped
                pair_sections[f"{src_dev}_vs_{ref_dev}"] = entry
                if ref_dev == cfg.reference_device:
                    pooled.append(de)
            section = {"status": "ok", "threshold": cfg.threshold, "pairs": pair_sections}
            if pooled:
                allde = np.concatenate(pooled)
                section["pooled_vs_reference"] = {
                    "mean": float(allde.mean()),
                    "acceptable_fraction": float((allde < cfg.threshold).mean()),
                    "n": int(allde.size),
                }
            report["deltae"] = section
    else:
        report["deltae"] = {"status": "skipped"}

    fitted_ccm = {}
    if "ccm" in enabled:
        with _stage("ccm"):
            ccm_pairs = {}
            for src_dev in consumer_devices:
                samples, dropped = paired[(src_dev, cfg.reference_device)]
                if not samples:
                    continue
                cv = crossval_ccm(samples, k=cfg.folds, seed=cfg.seed)
                src, ref = samples_as_arrays(samples)
                full = fit_ccm(src, ref)
                fitted_ccm[src_dev] = full
                ccm_pairs[f"{src_dev}_to_{cfg.reference_device}"] = {
                    "ccm": full.to_dict(),
                    "near_singular": full.is_near_singular,
                    "n_dropped": dropped,
                    "cv": cv.to_dict(),
                }
            if not ccm_pairs:
                raise AnalysisInfeasibleError(
                    "no consumer device could be paired with the reference"
                )
            report["ccm"] = {"status": "ok", "pairs": ccm_pairs}
    else:
        report["ccm"] = {"status": "skipped"}

    # Colors used by indices and ICC: corrected when a CCM was fitted.
    analysis_lab = dict(lab)
    based_on = "raw"
    if fitted_ccm:
        based_on = "corrected"
        for dev, ccm in fitted_ccm.items():
            corrected = ccm_apply(ccm, srgb_decode(rgb[dev]))
            analysis_lab[dev] = linear_to_lab(corrected)

    if "indices" in enabled:
        with _stage("indices"):
            per_device = {}
            for dev in devices:
                values = analysis_lab[dev]
                mi = melanin_index(values)
                ei = erythema_index(values)
                angle = ita(values)
                per_device[dev] = {
                    "melanin_index_mean": float(mi.mean()),
                    "melanin_index_std": float(mi.std(ddof=1)) if mi.size > 1 else 0.0,
                    "erythema_index_mean": float(ei.mean()),
                    "erythema_index_std": float(ei.std(ddof=1)) if ei.size > 1 else 0.0,
                    "ita_mean": float(angle.mean()),
                    "ita_std": float(angle.std(ddof=1)) if angle.size > 1 else 0.0,
                    "n_ita_degenerate": int(ita_degenerate(values).sum()),
                }
            report["indices"] = {
                "status": "ok",
                "based_on": based_on,
                "per_device": per_device,
            }
    else:
        report["indices"] = {"status": "skipped"}

    if "icc" in enabled:
        with _stage("icc"):
            report["icc"] = _icc_section(
                devices, by_device, analysis_lab, based_on
            )
    else:
        report["icc"] = {"status": "skipped"}

    if "bland_altman" in enabled:
        with _stage("bland_altman"):
            ba_pairs = {}
            for src_dev, ref_dev in pairs:
                samples, _ = paired[(src_dev, ref_dev)]
                if not samples:
                    continue
                src, ref = samples_as_arrays(samples)
                src_lab = linear_to_lab(src)
                ref_lab = linear_to_lab(ref)
                channels = {}
                for i, key in enumerate(_CHANNEL_KEYS):
                    ba = bland_altman(ref_lab[:, i], src_lab[:, i])
                    channels[key] = ba.to_dict(include_differences=True)
                channels["x"] = ref_dev
                channels["y"] = src_dev
                ba_pairs[f"{ref_dev}_vs_{src_dev}"] = channels
            report["bland_altman"] = {"status": "ok", "pairs": ba_pairs}
    else:
        report["bland_altman"] = {"status": "skipped"}

    if "anova" in enabled:
        with _stage("anova"):
            report["anova"] = _anova_section(paired, delta_e, cfg)
    else:
        report["anova"] = {"status": "skipped"}

    if "sensitivity" in enabled:
        with _stage("sensitivity"):
            all_lab = np.concatenate([lab[dev] for dev in devices])
            mean_lab = all_lab.mean(axis=0)
            sens = ita_sensitivity(mean_lab)
            report["sensitivity"] = {
                "status": "ok",
                "at_lab": [float(v) for v in mean_lab],
                "d_ita_d_l_deg": float(sens.d_ita_d_l),
                "d_ita_d_b_deg": float(sens.d_ita_d_b),
                "d_ita_d_l_rad": float(np.radians(sens.d_ita_d_l)),
                "d_ita_d_b_rad": float(np.radians(sens.d_ita_d_b)),
                "ita_error_for_unit_b": float(sens.predicted_ita_error(0.0, 1.0)),
            }
    else:
        report["sensitivity"] = {"status": "skipped"}

    return report


def _icc_section(devices, by_device, analysis_lab, based_on):
    if len(devices) < 2:
        raise AnalysisInfeasibleError("ICC needs at least 2 devices")

    # One rating per (subject, region) cell and device: the device's mean
    # measurement over its angles. Incomplete cells are dropped.
    cell_values = {dev: {} for dev in devices}
    measures = {
        "melanin_index": melanin_index,
        "erythema_index": erythema_index,
        "ita": ita,
    }
    per_device_measures = {}
    for dev in devices:
        values = analysis_lab[dev]
        columns = {name: fn(values) for name, fn in measures.items()}
        for i, key in enumerate(_CHANNEL_KEYS):
            columns[key] = values[:, i]
        per_device_measures[dev] = columns
        for row, rec in enumerate(by_device[dev]):
            cell_values[dev].setdefault((rec.subject_id, rec.region), []).append(row)

    all_cells = sorted({cell for dev in devices for cell in cell_values[dev]})
    complete = [c for c in all_cells if all(c in cell_values[dev] for dev in devices)]
    dropped = len(all_cells) - len(complete)
    if len(complete) < 3:
        raise AnalysisInfeasibleError(
            f"ICC needs at least 3 complete (subject, region) cells, got {len(complete)}"
        )

    section_measures = {}
    for name in list(measures) + list(_CHANNEL_KEYS):
        table = np.empty((len(complete), len(devices)))
        for j, dev in enumerate(devices):
            column = per_device_measures[dev][name]
            table[:, j] = [
                float(np.mean(column[cell_values[dev][cell]])) for cell in complete
            ]
        result = icc_3_1(table)
        entry = result.to_dict()
        entry["f_value"] = _finite_or_none(entry["f_value"])
        section_measures[name] = entry

    return {
        "status": "ok",
        "form": "consistency",
        "based_on": based_on,
        "raters": list(devices),
        "k_raters": len(devices),
        "n_targets": len(complete),
        "n_incomplete_dropped": dropped,
        "measures": section_measures,
    }


def _anova_section(paired, delta_e, cfg):
    values = []
    region_labels = []
    device_labels = []
    angle_labels = []
    for (src_dev, ref_dev), (samples, _) in sorted(paired.items()):
        if ref_dev != cfg.reference_device or not samples:
            continue
        de = delta_e[(src_dev, ref_dev)]
        values.extend(de.tolist())
        region_labels.extend(s.key[1] for s in samples)
        angle_labels.extend(str(s.key[2]) for s in samples)
        device_labels.extend([src_dev] * len(samples))
    if not values:
        raise AnalysisInfeasibleError("no consumer-vs-reference pairs for ANOVA")

    factors = [
        ("region", region_labels),
        ("source_device", device_labels),
        ("angle", angle_labels),
    ]
    rows = []
    for name, labels in factors:
        if len(set(labels)) < 2:
            continue
        row = anova_eta2(values, labels, factor=name)
        entry = row.to_dict()
        entry["f_statistic"] = _finite_or_none(entry["f_statistic"])
        rows.append(entry)
    if not rows:
        raise AnalysisInfeasibleError("no factor with at least 2 groups for ANOVA")

    correction = bonferroni([row["p_value"] for row in rows], alpha=0.05)
    return {
        "status": "ok",
        "observations": "ciede2000 of consumer records vs matched reference records (pre-correction)",
        "n_observations": len(values),
        "rows": rows,
        "bonferroni": correction.to_dict(),
    }


def write_outputs(report, cfg):
    """Write report.json / report.md (per the configured format) and one
    ccm_<pair>.json per fitted correction; returns the written paths."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    written = []
    if cfg.output_format in ("json", "both"):
        path = os.path.join(cfg.out_dir, "report.json")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(to_json(report))
        written.append(path)
    if cfg.output_format in ("markdown", "both"):
        path = os.path.join(cfg.out_dir, "report.md")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(to_markdown(report))
        written.append(path)
    ccm_section = report.get("ccm", {})
    if ccm_section.get("status") == "ok":
        for pair in sorted(ccm_section["pairs"]):
            path = os.path.join(cfg.out_dir, f"ccm_{pair}.json")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(
                    json.dumps(ccm_section["pairs"][pair]["ccm"], indent=2, sort_keys=True)
                    + "\n"
                )
            written.append(path)
    return written

"""Flat key-value configuration files (``config_version = 1``).

Format: one ``key = value`` assignment per line, ``#`` starts a comment,
blank lines ignored. Keys may be dotted to form sections. Values are a
single scalar (int, float, ``true``/``false``, or bare string) or a
comma-separated list of scalars. Matrices are written row-major as a
9-number list.

Recognized keys (all optional except ``config_version``):

Run defaults (used by the CLI when flags are not given explicitly):
    reference_device, folds, seed, threshold, out_dir, format,
    analyses = deltae, ccm, indices, icc, bland_altman, anova, sensitivity

Simulator cohort:
    subject_count, regions, base_lab_mean (3), base_lab_cov (9, row-major),
    angle_jitter_sd (3), angles.<device> (list of integer labels),
    region_offset_mean.<region> (3), region_offset_sd.<region> (3)

Simulator devices (``device.<name>.*``):
    gain (9, row-major), bias (3), noise_sigma (3), quantize_bits,
    reference (true for exactly one device)
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .simulate import CohortConfig, DeviceModel, default_cohort_config, default_device_models

CONFIG_VERSION = 1


def _parse_scalar(token):
    text = token.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_flat_config(path):
    """Parse a flat config file into a {dotted_key: value} mapping."""
    mapping = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(
                    f"{path}:{line_no}: expected 'key = value', got {raw.strip()!r}"
                )
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise ValidationError(f"{path}:{line_no}: empty key")
            if key in mapping:
                raise ValidationError(f"{path}:{line_no}: duplicate key {key!r}")
            tokens = [t for t in value.split(",")]
            if len(tokens) == 1:
                mapping[key] = _parse_scalar(tokens[0])
            else:
                mapping[key] = [_parse_scalar(t) for t in tokens]
    version = mapping.get("config_version")
    if version != CONFIG_VERSION:
        raise ValidationError(
            f"{path}: config_version must be {CONFIG_VERSION}, got {version!r}"
        )
    return mapping


def _as_floats(value, n, key):
    values = value if isinstance(value, list) else [value]
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ValidationError(f"config key {key!r} must be numeric")
    if len(out) != n:
        raise ValidationError(f"config key {key!r} needs {n} numbers, got {len(out)}")
    return out


def _as_str_list(value):
    values = value if isinstance(value, list) else [value]
    return [str(v) for v in values]


def cohort_config_from(mapping, subject_count=None, seed=None):
    """Build a CohortConfig from a parsed mapping, starting from the
    calibrated defaults; explicit arguments override file values."""
    base = default_cohort_config()
    regions = tuple(_as_str_list(mapping.get("regions", list(base.regions))))

    angles = dict(base.angles)
    region_offset_mean = dict(base.region_offset_mean)
    region_offset_sd = dict(base.region_offset_sd)
    for key, value in mapping.items():
        if key.startswith("angles."):
            angles[key.split(".", 1)[1]] = tuple(
                int(v) for v in (value if isinstance(value, list) else [value])
            )
        elif key.startswith("region_offset_mean."):
            region = key.split(".", 1)[1]
            region_offset_mean[region] = tuple(_as_floats(value, 3, key))
        elif key.startswith("region_offset_sd."):
            region = key.split(".", 1)[1]
            region_offset_sd[region] = tuple(_as_floats(value, 3, key))

    cov = mapping.get("base_lab_cov")
    base_cov = (
        tuple(map(tuple, np.asarray(_as_floats(cov, 9, "base_lab_cov")).reshape(3, 3)))
        if cov is not None
        else base.base_lab_cov
    )
    return CohortConfig(
        seed=int(seed if seed is not None else mapping.get("seed", base.seed)),
        subject_count=int(
            subject_count
            if subject_count is not None
            else mapping.get("subject_count", base.subject_count)
        ),
        regions=regions,
        angles=angles,
        base_lab_mean=tuple(
            _as_floats(mapping.get("base_lab_mean", list(base.base_lab_mean)), 3, "base_lab_mean")
        ),
        base_lab_cov=base_cov,
        region_offset_mean=region_offset_mean,
        region_offset_sd=region_offset_sd,
        angle_jitter_sd=tuple(
            _as_floats(
                mapping.get("angle_jitter_sd", list(base.angle_jitter_sd)), 3, "angle_jitter_sd"
            )
        ),
    )


def device_models_from(mapping):
    """Device models from ``device.<name>.*`` keys; calibrated defaults when
    the file defines none."""
    names = sorted(
        {key.split(".")[1] for key in mapping if key.startswith("device.") and key.count(".") >= 2}
    )
    if not names:
        return default_device_models()
    models = []
    for name in names:
        prefix = f"device.{name}."
        gain = mapping.get(prefix + "gain")
        if gain is None:
            gain_matrix = np.eye(3)
        else:
            gain_matrix = np.asarray(_as_floats(gain, 9, prefix + "gain")).reshape(3, 3)
        bias = np.asarray(_as_floats(mapping.get(prefix + "bias", [0.0, 0.0, 0.0]), 3, prefix + "bias"))
        noise = np.asarray(
            _as_floats(mapping.get(prefix + "noise_sigma", [0.0, 0.0, 0.0]), 3, prefix + "noise_sigma")
        )
        models.append(
            DeviceModel(
                name=name,
                gain=gain_matrix,
                bias=bias,
                noise_sigma=noise,
                quantize_bits=int(mapping.get(prefix + "quantize_bits", 8)),
                reference=bool(mapping.get(prefix + "reference", False)),
            )
        )
    return models


RUN_KEYS = ("reference_device", "folds", "seed", "threshold", "out_dir", "format", "analyses")


def run_defaults_from(mapping):
    """Extract run-configuration defaults from a parsed mapping."""
    out = {}
    for key in RUN_KEYS:
        if key in mapping:
            out[key] = mapping[key]
    if "analyses" in out:
        out["analyses"] = tuple(_as_str_list(out["analyses"]))
    return out

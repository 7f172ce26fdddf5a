"""Seeded Monte-Carlo generator of synthetic multi-device skin cohorts.

Ground truth lives in CIELAB: each (subject, region) cell gets a true skin
color drawn around a configurable cohort mean, and every device renders
that truth through its own affine response in linear RGB (gain matrix plus
bias) followed by additive per-channel Gaussian noise, clipping,
quantization, and sRGB encoding. The blue channel is the noisiest by
default (1.8x the green sigma), mirroring its lower sensor quantum
efficiency; that noise surfaces in b* and is what degrades angle-based
indices after correction.

Subject-level variation is drawn along the ray through the cohort mean in
the (L*-50, a*, b*) space ("lighter/darker versions of the same skin"), a
direction that leaves the typology angle unchanged, plus small off-ray
jitter that gives the angle its realistic spread. Region offsets use the
same ray so that region-to-region differences move color error without
moving the angle.

The default device constants are frozen outputs of
``scripts/tune_device_defaults.py``, which solves each device's bias from
its target mean channel response; the dispersion defaults were calibrated
by sweeping them until a 200-subject cohort lands inside the documented
reporting bands (see README). Generation is deterministic: every subject
derives an independent counter-based stream from the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .colorspace import lab_to_xyz, srgb_encode, xyz_to_linear
from .errors import ValidationError
from .records import PatchRecord
from .validation import as_matrix, as_triplets

DEFAULT_REGIONS = ("forehead", "left_cheek", "right_cheek", "chin", "glabella")

# Cohort mean skin color (CIELAB, D65) of the reference device.
BASE_LAB_MEAN = (81.35, 7.95, 17.59)

# Per-device mean CIELAB targets used by the one-time gain/bias tuning.
DEVICE_LAB_TARGETS = {
    "dslr": (81.35, 7.95, 17.59),
    "tablet": (72.73, 6.08, 10.12),
    "smartphone": (77.56, 5.68, 8.96),
}

# Blue shot noise exceeds green by this factor (QE ~30% of green).
BLUE_NOISE_FACTOR = 1.8


@dataclass(frozen=True)
class DeviceModel:
    """Rendering model of one capture device in linear RGB."""

    name: str
    gain: np.ndarray
    bias: np.ndarray
    noise_sigma: np.ndarray
    quantize_bits: int = 8
    reference: bool = False

    def __post_init__(self):
        object.__setattr__(self, "gain", as_matrix(self.gain, (3, 3), f"{self.name} gain"))
        object.__setattr__(self, "bias", as_matrix(self.bias, (3,), f"{self.name} bias"))
        object.__setattr__(
            self, "noise_sigma", as_matrix(self.noise_sigma, (3,), f"{self.name} noise_sigma")
        )
        if np.any(self.noise_sigma < 0):
            raise ValidationError(f"{self.name}: noise_sigma must be non-negative")
        if self.quantize_bits not in (0, 8, 10, 12):
            raise ValidationError(
                f"{self.name}: quantize_bits must be one of 0 (off), 8, 10, 12"
            )


@dataclass(frozen=True)
class CohortConfig:
    """Cohort layout and the ground-truth color distribution."""

    seed: int
    subject_count: int = 200
    regions: tuple = DEFAULT_REGIONS
    angles: dict = field(
        default_factory=lambda: {
            "dslr": (0, 1, 2, 3, 4, 5, 6),
            "tablet": (0, 1, 2),
            "smartphone": (0, 1, 2),
        }
    )
    base_lab_mean: tuple = BASE_LAB_MEAN
    base_lab_cov: tuple = ()  # filled by default_cohort_config
    region_offset_mean: dict = field(default_factory=dict)
    region_offset_sd: dict = field(default_factory=dict)
    angle_jitter_sd: tuple = (0.5, 0.2, 0.4)

    def __post_init__(self):
        if self.subject_count < 1:
            raise ValidationError("subject_count must be >= 1")
        if not self.regions:
            raise ValidationError("at least one region is required")
        if self.seed is None:
            raise ValidationError("a seed is mandatory")


def _radial_direction(lab_mean):
    """Unit-L* direction along the (L*-50, a*, b*) ray through the mean."""
    l, a, b = lab_mean
    return np.array([1.0, a / (l - 50.0), b / (l - 50.0)])


def default_cohort_config(subject_count=200, seed=42):
    """The calibrated default cohort (see module docstring)."""
    direction = _radial_direction(BASE_LAB_MEAN)
    # Subject covariance: 3.0 L*-units of spread along the ray plus small
    # off-ray jitter in a* and b*; the off-ray b* term sets the true
    # typology-angle spread of the cohort.
    radial_sd = 3.0
    off_ray_sd = np.array([0.0, 0.55, 0.45])
    cov = radial_sd**2 * np.outer(direction, direction) + np.diag(off_ray_sd**2)
    # Region placement along the same ray (units of L*): positive = lighter.
    # Darker regions pick up larger rendering error, so the chin comes out
    # worst and the forehead best in the color-difference tables.
    region_scale = {
        "forehead": 5.0,
        "glabella": 2.0,
        "left_cheek": 1.0,
        "right_cheek": -1.5,
        "chin": -6.5,
    }
    region_offset_mean = {
        name: tuple(scale * direction) for name, scale in region_scale.items()
    }
    region_offset_sd = {name: (0.8, 0.3, 0.4) for name in region_scale}
    return CohortConfig(
        seed=seed,
        subject_count=subject_count,
        base_lab_cov=tuple(map(tuple, cov)),
        region_offset_mean=region_offset_mean,
        region_offset_sd=region_offset_sd,
        angle_jitter_sd=(0.8, 0.3, 0.6),
    )


def _lab_to_linear(lab):
    return xyz_to_linear(lab_to_xyz(lab))


def solve_device_response(target_lab, gain_scale, base_lab_mean=BASE_LAB_MEAN):
    """Gain/bias pair mapping the cohort mean onto a device's mean response.

    The gain is ``gain_scale`` times identity; the bias is solved exactly so
    that the cohort mean renders to ``target_lab``. This is the one-time
    tuning procedure behind the frozen defaults.
    """
    src = _lab_to_linear(np.asarray(base_lab_mean, dtype=np.float64))
    dst = _lab_to_linear(np.asarray(target_lab, dtype=np.float64))
    gain = gain_scale * np.eye(3)
    bias = dst - gain @ src
    return gain, bias


# Frozen device defaults (regenerate with scripts/tune_device_defaults.py).
# Blue sigma is 1.8x green throughout; the reference noise level puts the
# reference device's Lab-space SNR near 37.5 dB.
_DSLR_NOISE = (0.0052, 0.0052, 1.8 * 0.0052)
_TABLET_GAIN_SCALE = 0.97
_TABLET_NOISE = (0.011, 0.011, 1.8 * 0.011)
_SMARTPHONE_GAIN_SCALE = 0.97
_SMARTPHONE_NOISE = (0.014, 0.014, 1.8 * 0.014)


def default_device_models():
    """DSLR reference plus two consumer devices with calibrated responses."""
    tablet_gain, tablet_bias = solve_device_response(
        DEVICE_LAB_TARGETS["tablet"], _TABLET_GAIN_SCALE
    )
    phone_gain, phone_bias = solve_device_response(
        DEVICE_LAB_TARGETS["smartphone"], _SMARTPHONE_GAIN_SCALE
    )
    return [
        DeviceModel(
            name="dslr",
            gain=np.eye(3),
            bias=np.zeros(3),
            noise_sigma=np.array(_DSLR_NOISE),
            quantize_bits=12,
            reference=True,
        ),
        DeviceModel(
            name="tablet",
            gain=tablet_gain,
            bias=tablet_bias,
            noise_sigma=np.array(_TABLET_NOISE),
            quantize_bits=8,
        ),
        DeviceModel(
            name="smartphone",
            gain=phone_gain,
            bias=phone_bias,
            noise_sigma=np.array(_SMARTPHONE_NOISE),
            quantize_bits=8,
        ),
    ]


def _subject_rng(seed, index):
    # Counter-based stream split: subjects are independent and may be
    # generated in any order.
    return np.random.default_rng((seed, index))


def _subject_ids(count):
    width = max(4, len(str(count)))
    return [f"S{i:0{width}d}" for i in range(1, count + 1)]


def sample_true_skin(cfg, rng=None):
    """Ground-truth CIELAB per (subject_id, region).

    Subject base colors follow the configured multivariate normal around
    ``base_lab_mean``; each (subject, region) adds the region's offset mean
    plus per-subject jitter. Deterministic given ``cfg.seed``; a caller may
    pass its own generator to draw from an existing stream instead.
    """
    cov = as_matrix(np.asarray(cfg.base_lab_cov, dtype=np.float64), (3, 3), "base_lab_cov")
    mean = np.asarray(cfg.base_lab_mean, dtype=np.float64)
    truth = {}
    for index, sid in enumerate(_subject_ids(cfg.subject_count)):
        stream = rng if rng is not None else _subject_rng(cfg.seed, index)
        base = mean + stream.multivariate_normal(
            np.zeros(3), cov, check_valid="raise", method="svd"
        )
        for region in cfg.regions:
            offset_mean = np.asarray(cfg.region_offset_mean.get(region, (0.0, 0.0, 0.0)))
            offset_sd = np.asarray(cfg.region_offset_sd.get(region, (0.0, 0.0, 0.0)))
            truth[(sid, region)] = base + offset_mean + stream.standard_normal(3) * offset_sd
    return truth


def render_device(model, truth_lab, rng):
    """Render a ground-truth CIELAB color through one device.

    Chain: truth -> linear RGB -> gain @ rgb + bias -> additive Gaussian
    channel noise -> clip to [0, 1] -> quantize -> sRGB encode. Exactly
    three normal deviates are consumed per color, so streams stay aligned
    whether or not noise is enabled.
    """
    lab = as_triplets(truth_lab, name="truth lab")
    linear = _lab_to_linear(lab)
    rendered = linear @ model.gain.T + model.bias
    rendered = rendered + rng.standard_normal(rendered.shape) * model.noise_sigma
    rendered = np.clip(rendered, 0.0, 1.0)
    if model.quantize_bits:
        levels = float(2**model.quantize_bits - 1)
        rendered = np.round(rendered * levels) / levels
    return srgb_encode(rendered)


@dataclass(frozen=True)
class SyntheticCohort:
    """Generated records plus the embedded ground truth per (subject, region)."""

    records: list
    truth: dict
    config: CohortConfig
    models: tuple

    @property
    def reference_device(self):
        return next(m.name for m in self.models if m.reference)


def generate_cohort(cfg, models):
    """Full cross product of subjects x regions x devices x angles.

    Requires at least two device models with exactly one flagged as the
    reference. Reproducible bit for bit from (cfg, models): each subject
    draws from its own counter-derived stream in a fixed order (base color,
    then per region: offset, then per device/angle: jitter and noise).
    """
    if len(models) < 2:
        raise ValidationError("need at least 2 device models")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValidationError("device model names must be unique")
    refs = [m.name for m in models if m.reference]
    if len(refs) != 1:
        raise ValidationError(
            "exactly one device model must be flagged as the reference"
            f" (got {len(refs)})"
        )
    for m in models:
        if m.name not in cfg.angles:
            raise ValidationError(f"no angle list configured for device {m.name!r}")

    cov = as_matrix(np.asarray(cfg.base_lab_cov, dtype=np.float64), (3, 3), "base_lab_cov")
    mean = np.asarray(cfg.base_lab_mean, dtype=np.float64)
    jitter_sd = np.asarray(cfg.angle_jitter_sd, dtype=np.float64)

    records = []
    truth = {}
    for index, sid in enumerate(_subject_ids(cfg.subject_count)):
        stream = _subject_rng(cfg.seed, index)
        base = mean + stream.multivariate_normal(
            np.zeros(3), cov, check_valid="raise", method="svd"
        )
        # Truth draws come first, in the exact order sample_true_skin uses,
        # so the embedded truth equals a standalone truth sampling.
        for region in cfg.regions:
            offset_mean = np.asarray(cfg.region_offset_mean.get(region, (0.0, 0.0, 0.0)))
            offset_sd = np.asarray(cfg.region_offset_sd.get(region, (0.0, 0.0, 0.0)))
            truth[(sid, region)] = base + offset_mean + stream.standard_normal(3) * offset_sd
        for region in cfg.regions:
            cell_truth = truth[(sid, region)]
            for model in models:
                for angle in cfg.angles[model.name]:
                    seen = cell_truth + stream.standard_normal(3) * jitter_sd
                    srgb = render_device(model, seen, stream)
                    records.append(
                        PatchRecord(
                            subject_id=sid,
                            device=model.name,
                            region=region,
                            angle=int(angle),
                            rgb=tuple(float(v) for v in srgb),
                        )
                    )
    return SyntheticCohort(records=records, truth=truth, config=cfg, models=tuple(models))

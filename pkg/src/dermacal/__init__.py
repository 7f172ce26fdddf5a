"""dermacal: multi-device skin colorimetry toolkit.

Color-space conversion (sRGB/linear RGB/XYZ/CIELAB under D65) with
CIEDE2000, affine color-correction fitting with subject-grouped
cross-validation, clinical skin indices (Melanin Index, Erythema Index,
ITA) with closed-form error sensitivities, inter-device reliability
statistics (ICC, Bland-Altman, one-way ANOVA with eta-squared,
Bonferroni), a calibrated synthetic cohort simulator, and a batch
reporting pipeline with a CLI.
"""

from ._version import __version__
from .calibration import (
    Ccm,
    ColorCorrection,
    CvReport,
    NearSingularCcmWarning,
    PairedSample,
    ccm_apply,
    crossval_ccm,
    fit_ccm,
    pair_records,
)
from .clinical import (
    ClinicalIndices,
    ItaSensitivity,
    clinical_indices,
    erythema_index,
    ita,
    ita_degenerate,
    ita_sensitivity,
    melanin_index,
)
from .colorspace import (
    D65_WHITE,
    LINEAR_RGB_TO_XYZ,
    ciede2000,
    lab_to_srgb,
    lab_to_xyz,
    linear_to_lab,
    linear_to_xyz,
    srgb_decode,
    srgb_encode,
    srgb_to_lab,
    xyz_to_lab,
    xyz_to_linear,
)
from .errors import (
    AnalysisInfeasibleError,
    DermacalError,
    DomainError,
    InfeasibleSplitError,
    IngestError,
    InsufficientDataError,
    SingularFitError,
    UndefinedStatisticError,
    ValidationError,
)
from .pipeline import ALL_ANALYSES, RunConfig, ingest_csv, ingest_inputs, run_analysis, write_outputs
from .records import PatchRecord, read_patch_csv, write_patch_csv
from .report import from_json, to_json, to_markdown
from .simulate import (
    CohortConfig,
    DeviceModel,
    SyntheticCohort,
    default_cohort_config,
    default_device_models,
    generate_cohort,
    render_device,
    sample_true_skin,
)
from .stats import (
    AnovaRow,
    BlandAltman,
    BonferroniResult,
    IccResult,
    anova_eta2,
    bland_altman,
    bonferroni,
    eta_squared_label,
    icc_3_1,
    icc_label,
)

__all__ = [
    "__version__",
    "ALL_ANALYSES",
    "AnalysisInfeasibleError",
    "AnovaRow",
    "BlandAltman",
    "BonferroniResult",
    "Ccm",
    "ClinicalIndices",
    "CohortConfig",
    "ColorCorrection",
    "CvReport",
    "D65_WHITE",
    "DermacalError",
    "DeviceModel",
    "DomainError",
    "IccResult",
    "InfeasibleSplitError",
    "IngestError",
    "InsufficientDataError",
    "ItaSensitivity",
    "LINEAR_RGB_TO_XYZ",
    "NearSingularCcmWarning",
    "PairedSample",
    "PatchRecord",
    "RunConfig",
    "SingularFitError",
    "SyntheticCohort",
    "UndefinedStatisticError",
    "ValidationError",
    "anova_eta2",
    "bland_altman",
    "bonferroni",
    "ccm_apply",
    "ciede2000",
    "clinical_indices",
    "crossval_ccm",
    "default_cohort_config",
    "default_device_models",
    "erythema_index",
    "eta_squared_label",
    "fit_ccm",
    "from_json",
    "generate_cohort",
    "icc_3_1",
    "icc_label",
    "ingest_csv",
    "ingest_inputs",
    "ita",
    "ita_degenerate",
    "ita_sensitivity",
    "lab_to_srgb",
    "lab_to_xyz",
    "linear_to_lab",
    "linear_to_xyz",
    "melanin_index",
    "pair_records",
    "read_patch_csv",
    "render_device",
    "run_analysis",
    "sample_true_skin",
    "srgb_decode",
    "srgb_encode",
    "srgb_to_lab",
    "to_json",
    "to_markdown",
    "write_outputs",
    "write_patch_csv",
    "xyz_to_lab",
    "xyz_to_linear",
]

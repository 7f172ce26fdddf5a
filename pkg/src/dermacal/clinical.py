"""Clinical skin-color indices and the ITA error-propagation sensitivities.

Three indices derived from CIELAB:

* Melanin Index   ``MI = 100 * log10(100 / L*)``
* Erythema Index  ``EI = a* - 0.5 * L*``
* Individual Typology Angle ``ITA = arctan((L* - 50) / b*)`` in degrees

ITA is an angle in the (L*-50, b*) plane. Its closed-form partial
derivatives quantify how strongly small channel errors move the angle: the
b* partial dominates for light skin, which is what makes ITA fragile on
devices with noisy blue channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .validation import as_lab

# |b*| below this is treated as numerically degenerate for ITA purposes:
# the angle saturates at +/-90 degrees and tiny b* errors flip its sign.
ITA_DEGENERATE_B = 0.5


def melanin_index(lab):
    """Melanin Index from L*; requires L* > 0 (log singularity at zero)."""
    lab = as_lab(lab)
    lightness = lab[..., 0]
    if np.any(lightness <= 0.0):
        idx = tuple(np.argwhere(np.atleast_1d(lightness) <= 0.0)[0])
        raise DomainError(f"melanin index requires L* > 0, got {np.atleast_1d(lightness)[idx]!r}")
    return 100.0 * np.log10(100.0 / lightness)


def erythema_index(lab):
    """Erythema Index, the linear combination a* - 0.5 * L*."""
    lab = as_lab(lab)
    return lab[..., 1] - 0.5 * lab[..., 0]


def ita(lab):
    """Individual Typology Angle in degrees, bounded to [-90, 90].

    Computed as ``atan2(L* - 50, |b*|)``: identical to the arctan ratio for
    b* > 0, continuous through b* = 0 (where it saturates at +/-90 for
    L* != 50), and 0 by convention at the singular point (50, 0). Use
    ``ita_degenerate`` to flag angles computed from near-zero b*.
    """
    lab = as_lab(lab)
    return np.degrees(np.arctan2(lab[..., 0] - 50.0, np.abs(lab[..., 2])))


def ita_degenerate(lab):
    """Boolean mask of colors whose |b*| is too small for a stable ITA."""
    lab = as_lab(lab)
    return np.abs(lab[..., 2]) < ITA_DEGENERATE_B


@dataclass(frozen=True)
class ItaSensitivity:
    """First-order ITA error propagation at a CIELAB operating point.

    ``d_ita_d_l`` and ``d_ita_d_b`` are in degrees per L*/b* unit and carry
    the analytic signs: the L* partial has the sign of b*, the b* partial
    the sign of -(L* - 50).
    """

    d_ita_d_l: np.ndarray
    d_ita_d_b: np.ndarray

    def predicted_ita_error(self, delta_l, delta_b):
        """Signed first-order ITA shift (degrees) for channel errors
        ``delta_l`` and ``delta_b``."""
        return self.d_ita_d_l * np.asarray(delta_l) + self.d_ita_d_b * np.asarray(delta_b)


def ita_sensitivity(lab):
    """Closed-form partial derivatives of ITA at the given Lab point(s).

    d(ITA)/dL* =  b* / ((L* - 50)^2 + b*^2)
    d(ITA)/db* = -(L* - 50) / ((L* - 50)^2 + b*^2)

    both converted from radians to degrees per unit. Raises at the
    singular point (L*, b*) = (50, 0) where the angle is undefined.
    """
    lab = as_lab(lab)
    dl = lab[..., 0] - 50.0
    b = lab[..., 2]
    denom = dl**2 + b**2
    if np.any(denom == 0.0):
        raise DomainError("ITA sensitivity is singular at (L*, b*) = (50, 0)")
    scale = 180.0 / np.pi
    return ItaSensitivity(
        d_ita_d_l=scale * b / denom,
        d_ita_d_b=scale * (-dl) / denom,
    )


@dataclass(frozen=True)
class ClinicalIndices:
    """The three indices evaluated together, with the ITA degeneracy mask."""

    melanin_index: np.ndarray
    erythema_index: np.ndarray
    ita_degrees: np.ndarray
    ita_degenerate: np.ndarray


def clinical_indices(lab):
    """Evaluate MI, EI and ITA on the same Lab array."""
    lab = as_lab(lab)
    return ClinicalIndices(
        melanin_index=melanin_index(lab),
        erythema_index=erythema_index(lab),
        ita_degrees=ita(lab),
        ita_degenerate=ita_degenerate(lab),
    )

"""sRGB <-> linear RGB <-> XYZ <-> CIELAB conversions (D65) and CIEDE2000.

All functions are vectorized: they accept arrays whose last axis holds the
three color components and preserve the leading shape. A single color can
be passed as a length-3 sequence.

The chain is display-referred sRGB -> (piecewise transfer function) ->
linear RGB -> (frozen primaries matrix) -> XYZ -> (D65-normalized cube
root) -> L*a*b*. Constants are frozen below so every result in the test
suite is reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np

from .validation import as_lab, as_triplets, check_channel_range, check_non_negative

# Linear RGB -> XYZ for the sRGB primaries under D65, at the printed
# 7-digit precision of IEC 61966-2-1. The reverse matrix is the numerical
# inverse of the frozen forward matrix (not the separately rounded printed
# inverse) so the two directions invert each other to machine precision.
LINEAR_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
XYZ_TO_LINEAR_RGB = np.linalg.inv(LINEAR_RGB_TO_XYZ)

# D65 reference white (2-degree observer) used for the L*a*b* normalization.
D65_WHITE = np.array([0.95047, 1.00000, 1.08883])

# sRGB transfer function constants. The encode knee is the exact image of
# the decode knee under the linear segment, so encode is the exact inverse
# of decode over [0, 1]; the commonly printed 0.0031308 differs in the 9th
# decimal and would open a ~3e-8 roundtrip gap in a narrow band of inputs.
SRGB_DECODE_KNEE = 0.04045
SRGB_ENCODE_KNEE = SRGB_DECODE_KNEE / 12.92
_SRGB_SLOPE = 12.92
_SRGB_OFFSET = 0.055
_SRGB_GAMMA = 2.4

# Cube-root threshold of the L*a*b* forward function, delta = 6/29.
_LAB_DELTA = 6.0 / 29.0
_LAB_EPSILON = _LAB_DELTA**3
_LAB_LINEAR_SLOPE = 1.0 / (3.0 * _LAB_DELTA**2)
_LAB_LINEAR_OFFSET = 4.0 / 29.0


def srgb_decode(srgb):
    """Display-referred sRGB in [0, 1] to linear-light RGB.

    Applies the piecewise sRGB transfer function per component:
    ``v <= 0.04045 -> v / 12.92``, else ``((v + 0.055) / 1.055) ** 2.4``.
    Components outside [0, 1] raise a domain error naming the channel.
    """
    srgb = as_triplets(srgb, name="sRGB")
    check_channel_range(srgb, 0.0, 1.0, "sRGB")
    return np.where(
        srgb <= SRGB_DECODE_KNEE,
        srgb / _SRGB_SLOPE,
        ((srgb + _SRGB_OFFSET) / (1.0 + _SRGB_OFFSET)) ** _SRGB_GAMMA,
    )


def srgb_encode(linear):
    """Linear-light RGB to display-referred sRGB; exact inverse of decode.

    Negative components raise a domain error; components above 1 are
    clipped to 1 before encoding (out-of-gamut policy: clip, no mapping).
    """
    linear = as_triplets(linear, name="linear RGB")
    check_non_negative(linear, "linear RGB")
    clipped = np.minimum(linear, 1.0)
    return np.where(
        clipped <= SRGB_ENCODE_KNEE,
        clipped * _SRGB_SLOPE,
        (1.0 + _SRGB_OFFSET) * clipped ** (1.0 / _SRGB_GAMMA) - _SRGB_OFFSET,
    )


def linear_to_xyz(linear):
    """Linear RGB to CIE XYZ through the frozen primaries matrix."""
    linear = as_triplets(linear, name="linear RGB")
    return linear @ LINEAR_RGB_TO_XYZ.T


def xyz_to_linear(xyz):
    """CIE XYZ back to linear RGB; clips small negative results to zero."""
    xyz = as_triplets(xyz, name="XYZ")
    return np.maximum(xyz @ XYZ_TO_LINEAR_RGB.T, 0.0)


def _lab_f(t):
    return np.where(
        t > _LAB_EPSILON,
        np.cbrt(t),
        _LAB_LINEAR_SLOPE * t + _LAB_LINEAR_OFFSET,
    )


def _lab_f_inv(f):
    return np.where(
        f > _LAB_DELTA,
        f**3,
        (f - _LAB_LINEAR_OFFSET) / _LAB_LINEAR_SLOPE,
    )


def xyz_to_lab(xyz):
    """CIE XYZ (D65-relative) to CIELAB, including the linear toe below
    ``(6/29)**3``."""
    xyz = as_triplets(xyz, name="XYZ")
    check_non_negative(xyz, "XYZ", channels=("x", "y", "z"))
    f = _lab_f(xyz / D65_WHITE)
    lightness = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([lightness, a, b], axis=-1)


def lab_to_xyz(lab):
    """CIELAB back to CIE XYZ under D65."""
    lab = as_lab(lab)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    return _lab_f_inv(f) * D65_WHITE


def srgb_to_lab(srgb):
    """Full display-referred sRGB to CIELAB chain (D65)."""
    return xyz_to_lab(linear_to_xyz(srgb_decode(srgb)))


def lab_to_srgb(lab):
    """CIELAB back to display-referred sRGB (values clipped into gamut)."""
    return srgb_encode(xyz_to_linear(lab_to_xyz(lab)))


def linear_to_lab(linear):
    """Linear RGB straight to CIELAB (skips the transfer function)."""
    return xyz_to_lab(linear_to_xyz(linear))


_POW25_7 = 25.0**7


def ciede2000(lab1, lab2, k_l=1.0, k_c=1.0, k_h=1.0):
    """CIEDE2000 color difference between CIELAB arrays.

    Implements the complete formula: the G chroma correction, the hue
    rotation term R_T, and the S_L / S_C / S_H weighting functions, with
    the parametric factors defaulting to 1. Broadcasts over leading axes
    and returns an array of non-negative differences.
    """
    lab1 = as_lab(lab1, name="lab1")
    lab2 = as_lab(lab2, name="lab2")
    l1, a1, b1 = lab1[..., 0], lab1[..., 1], lab1[..., 2]
    l2, a2, b2 = lab2[..., 0], lab2[..., 1], lab2[..., 2]

    c1 = np.hypot(a1, b1)
    c2 = np.hypot(a2, b2)
    c_bar7 = ((c1 + c2) / 2.0) ** 7
    g = 0.5 * (1.0 - np.sqrt(c_bar7 / (c_bar7 + _POW25_7)))
    a1p = (1.0 + g) * a1
    a2p = (1.0 + g) * a2
    c1p = np.hypot(a1p, b1)
    c2p = np.hypot(a2p, b2)

    h1p = np.degrees(np.arctan2(b1, a1p)) % 360.0
    h2p = np.degrees(np.arctan2(b2, a2p)) % 360.0

    dl = l2 - l1
    dc = c2p - c1p

    zero_chroma = c1p * c2p == 0.0
    dh = h2p - h1p
    dh = np.where(dh > 180.0, dh - 360.0, dh)
    dh = np.where(dh < -180.0, dh + 360.0, dh)
    dh = np.where(zero_chroma, 0.0, dh)
    dhh = 2.0 * np.sqrt(c1p * c2p) * np.sin(np.radians(dh) / 2.0)

    l_bar = (l1 + l2) / 2.0
    c_barp = (c1p + c2p) / 2.0
    h_sum = h1p + h2p
    h_bar = np.where(
        zero_chroma,
        h_sum,
        np.where(
            np.abs(h1p - h2p) <= 180.0,
            h_sum / 2.0,
            np.where(h_sum < 360.0, (h_sum + 360.0) / 2.0, (h_sum - 360.0) / 2.0),
        ),
    )

    t = (
        1.0
        - 0.17 * np.cos(np.radians(h_bar - 30.0))
        + 0.24 * np.cos(np.radians(2.0 * h_bar))
        + 0.32 * np.cos(np.radians(3.0 * h_bar + 6.0))
        - 0.20 * np.cos(np.radians(4.0 * h_bar - 63.0))
    )
    l_term = (l_bar - 50.0) ** 2
    s_l = 1.0 + 0.015 * l_term / np.sqrt(20.0 + l_term)
    s_c = 1.0 + 0.045 * c_barp
    s_h = 1.0 + 0.015 * c_barp * t

    d_theta = 30.0 * np.exp(-(((h_bar - 275.0) / 25.0) ** 2))
    c_barp7 = c_barp**7
    r_c = 2.0 * np.sqrt(c_barp7 / (c_barp7 + _POW25_7))
    r_t = -np.sin(np.radians(2.0 * d_theta)) * r_c

    fl = dl / (k_l * s_l)
    fc = dc / (k_c * s_c)
    fh = dhh / (k_h * s_h)
    return np.sqrt(fl**2 + fc**2 + fh**2 + r_t * fc * fh)

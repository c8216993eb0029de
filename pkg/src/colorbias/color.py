"""Color space math: luma grayscale, sRGB <-> CIELAB, sRGB <-> HSV, CIE76 distance.

Scalar functions are the reference path and work in double precision on
plain floats. The ``*_array`` functions are vectorized numpy equivalents used
by the batch metrics; they evaluate the same formulas and agree with the
scalar path to well below 1e-6.

Conventions: sRGB piecewise transfer curve, D65 reference white
(0.95047, 1.0, 1.08883), CIE 1976 L*a*b* including the linear segment below
(6/29)^3. HSV saturation and value are scaled to [0, 100], hue to degrees.
"""

from __future__ import annotations

import colorsys
import math
from typing import NamedTuple

import numpy as np

WHITE_D65 = (0.95047, 1.0, 1.08883)

# sRGB primaries (x, y chromaticities).
_PRIMARIES = ((0.64, 0.33), (0.30, 0.60), (0.15, 0.06))

_DELTA = 6.0 / 29.0
_DELTA3 = _DELTA**3


class Rgb8(NamedTuple):
    r: int
    g: int
    b: int


class Lab(NamedTuple):
    l_star: float
    a_star: float
    b_star: float


class Hsv(NamedTuple):
    h: float
    s: float
    v: float


def _rgb_to_xyz_matrix(white=WHITE_D65):
    # Column-scale the primaries so that linear (1, 1, 1) lands exactly on
    # the reference white; gray inputs then give a* = b* = 0.
    prim = np.array([[x / y, 1.0, (1.0 - x - y) / y] for x, y in _PRIMARIES]).T
    scale = np.linalg.solve(prim, np.asarray(white, dtype=np.float64))
    return prim * scale


RGB_TO_XYZ = _rgb_to_xyz_matrix()
XYZ_TO_RGB = np.linalg.inv(RGB_TO_XYZ)
_M = tuple(tuple(float(v) for v in row) for row in RGB_TO_XYZ)
_MINV = tuple(tuple(float(v) for v in row) for row in XYZ_TO_RGB)


def luma_grayscale(c) -> int:
    """ITU-R 601-2 luma with truncating integer division."""
    r, g, b = (int(v) for v in c)
    return (299 * r + 587 * g + 114 * b) // 1000


def srgb_to_linear(v: float) -> float:
    """Decode one sRGB channel in [0, 255] to linear light in [0, 1]."""
    c = v / 255.0
    if c <= 0.04045:
        return c / 12.92
    return ((c + 0.055) / 1.055) ** 2.4


def linear_to_srgb(v: float) -> float:
    if v <= 0.0031308:
        c = v * 12.92
    else:
        c = 1.055 * v ** (1.0 / 2.4) - 0.055
    return c * 255.0


def _lab_f(t: float) -> float:
    if t > _DELTA3:
        return t ** (1.0 / 3.0)
    return t / (3.0 * _DELTA * _DELTA) + 4.0 / 29.0


def _lab_finv(f: float) -> float:
    if f > _DELTA:
        return f**3
    return 3.0 * _DELTA * _DELTA * (f - 4.0 / 29.0)


def rgb_to_lab(c) -> Lab:
    """Convert an sRGB triple (0..255, integer or real) to CIELAB."""
    lin = [srgb_to_linear(float(v)) for v in c]
    fx, fy, fz = (
        _lab_f(sum(m * x for m, x in zip(row, lin)) / w) for row, w in zip(_M, WHITE_D65)
    )
    return Lab(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))


def lab_to_rgb(p) -> tuple[float, float, float]:
    """Inverse of :func:`rgb_to_lab`; returns real-valued sRGB, not clamped."""
    l_star, a_star, b_star = p
    fy = (l_star + 16.0) / 116.0
    fx = fy + a_star / 500.0
    fz = fy - b_star / 200.0
    xyz = [_lab_finv(f) * w for f, w in zip((fx, fy, fz), WHITE_D65)]
    lin = [sum(m * x for m, x in zip(row, xyz)) for row in _MINV]
    return tuple(linear_to_srgb(v) for v in lin)


def rgb_to_hsv(c) -> Hsv:
    r, g, b = (float(v) / 255.0 for v in c)
    h, s, v = colorsys.rgb_to_hsv(r, g, b)
    return Hsv((h * 360.0) % 360.0, s * 100.0, v * 100.0)


def hsv_to_rgb(c) -> tuple[float, float, float]:
    """Inverse of :func:`rgb_to_hsv`; returns real-valued channels in [0, 255]."""
    h, s, v = c
    r, g, b = colorsys.hsv_to_rgb(h / 360.0, s / 100.0, v / 100.0)
    return (r * 255.0, g * 255.0, b * 255.0)


def lab_distance(p, q) -> float:
    """CIE76 color difference (Euclidean distance in L*a*b*)."""
    return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2)


# --- vectorized path ------------------------------------------------------

_LINEAR_LUT = np.array([srgb_to_linear(i) for i in range(256)], dtype=np.float64)


def luma_array(rgb: np.ndarray) -> np.ndarray:
    """Luma of an (..., 3) uint8 array, returned as uint8."""
    rgb = rgb.astype(np.int32)
    y = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2]) // 1000
    return y.astype(np.uint8)


def srgb_to_linear_array(rgb: np.ndarray) -> np.ndarray:
    if rgb.dtype == np.uint8:
        return _LINEAR_LUT[rgb]
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((np.maximum(c, 0.04045) + 0.055) / 1.055) ** 2.4)


def rgb_to_lab_array(rgb: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) sRGB array (uint8 or real 0..255) to float64 Lab."""
    lin = srgb_to_linear_array(np.asarray(rgb))
    xyz = lin @ (RGB_TO_XYZ / np.asarray(WHITE_D65)[:, None]).T
    f = np.where(xyz > _DELTA3, np.cbrt(xyz), xyz / (3.0 * _DELTA * _DELTA) + 4.0 / 29.0)
    out = np.empty(f.shape, dtype=np.float64)
    out[..., 0] = 116.0 * f[..., 1] - 16.0
    out[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    out[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return out


def saturation_array(rgb: np.ndarray) -> np.ndarray:
    """HSV saturation in [0, 100] of an (..., 3) array."""
    rgb = np.asarray(rgb, dtype=np.float64)
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    out = np.zeros(mx.shape, dtype=np.float64)
    np.divide(mx - mn, mx, out=out, where=mx > 0)
    return out * 100.0


def lab_distance_array(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64)
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2 + d[..., 2] ** 2)

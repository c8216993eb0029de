"""Independent reference computations used as test oracles.

Nothing here imports from ``colorbias``. The Lab oracle uses the published
7-digit sRGB -> XYZ matrix instead of deriving one from the primaries, and the
HSV oracle is a direct transcription of the hexcone formulas.
"""

import math

SRGB_TO_XYZ = (
    (0.4124564, 0.3575761, 0.1804375),
    (0.2126729, 0.7151522, 0.0721750),
    (0.0193339, 0.1191920, 0.9503041),
)
WHITE_D65 = (0.95047, 1.0, 1.08883)


def _linear(c8):
    c = c8 / 255.0
    if c <= 0.04045:
        return c / 12.92
    return ((c + 0.055) / 1.055) ** 2.4


def _f(t):
    eps = 216.0 / 24389.0
    kappa = 24389.0 / 27.0
    if t > eps:
        return t ** (1.0 / 3.0)
    return (kappa * t + 16.0) / 116.0


def lab(r, g, b):
    lin = [_linear(r), _linear(g), _linear(b)]
    xyz = [sum(m * v for m, v in zip(row, lin)) for row in SRGB_TO_XYZ]
    fx, fy, fz = (_f(v / w) for v, w in zip(xyz, WHITE_D65))
    return (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))


def hsv(r, g, b):
    """Hexcone HSV with h in degrees, s and v in [0, 100]."""
    mx, mn = max(r, g, b), min(r, g, b)
    v = mx / 255.0 * 100.0
    s = 0.0 if mx == 0 else (mx - mn) / mx * 100.0
    if mx == mn:
        h = 0.0
    elif mx == r:
        h = (60.0 * (g - b) / (mx - mn)) % 360.0
    elif mx == g:
        h = 60.0 * (b - r) / (mx - mn) + 120.0
    else:
        h = 60.0 * (r - g) / (mx - mn) + 240.0
    return (h, s, v)


def distance(p, q):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))


if __name__ == "__main__":
    print("lab(255,0,0) =", lab(255, 0, 0))
    print("hsv(64,128,192) =", hsv(64, 128, 192))
    print("lab(100,100,150) - lab(100,100,100) b* =", lab(100, 100, 150)[2] - lab(100, 100, 100)[2])
    print("luma(0,255,0) =", (587 * 255) // 1000, " luma(200,100,50) =", (299 * 200 + 587 * 100 + 114 * 50) // 1000)

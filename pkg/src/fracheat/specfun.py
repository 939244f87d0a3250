"""Gamma function via the Lanczos approximation (g=7, 9 terms)."""

import math

import numpy as np

_G = 7.0
_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def lanczos_gamma(x):
    """Gamma(x) for real ``x`` not a non-positive integer.

    Relative accuracy is about 1e-15 on (0, 140); the reflection formula
    covers x < 1/2.
    """
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise ValueError(f"gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * lanczos_gamma(1.0 - x))
    x -= 1.0
    a = _COEF[0]
    t = x + _G + 0.5
    for i in range(1, len(_COEF)):
        a += _COEF[i] / (x + i)
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * a


gamma = np.vectorize(lanczos_gamma, otypes=[float])

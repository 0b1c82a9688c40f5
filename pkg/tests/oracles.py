"""Independent reference computations shared by the test modules."""

import mpmath as mp


def coefficients_mp(a, b, theta, dps=40):
    """Extended-precision transcription of the small-l coefficient formulas."""
    with mp.workdps(dps):
        a, b, t = mp.mpf(a), mp.mpf(b), mp.mpf(theta)
        c2, s2 = mp.cos(2 * t), mp.sin(2 * t)
        p = b + a * c2
        a0 = (mp.mpf(1) / 2 + (3 * a ** 2 * c2 ** 2 + 2 * a * b * c2 - 4 * a ** 2 * s2 ** 2 - b ** 2) / 2
              - 2 * a ** 2 * s2 ** 2 * p ** 2 / (1 - p ** 2))
        a1 = 2 * a * s2 * p / (1 - p ** 2)
        return float(a0), float(a1)

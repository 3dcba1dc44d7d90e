"""Tapered-aperture antenna beam pattern used for every satellite beam."""

import numpy as np
from scipy.special import j1, jv

# Argument scaling constant: rho = 2.07123 sin(theta)/sin(theta_3dB) puts the
# half-power point exactly at theta = theta_3dB.
RHO_3DB = 2.07123

# First zero of the pattern envelope J1(rho)/(2 rho) + 36 J3(rho)/rho^3,
# located numerically (Brent) to full double precision.
FIRST_NULL_RHO = 5.907241663449365

# Below this argument the Bessel ratio is evaluated by its ascending series.
_SERIES_CUTOFF = 1e-3


def _envelope_series(rho):
    """Ascending series of J1(x)/(2x) + 36 J3(x)/x^3; error O(x^6)."""
    rho2 = np.square(rho)
    return 1.0 - (5.0 / 64.0) * rho2 + (19.0 / 7680.0) * rho2 * rho2


def _envelope_bessel(rho):
    return j1(rho) / (2.0 * rho) + 36.0 * jv(3, rho) / rho**3


def pattern_envelope(rho):
    """Normalized field envelope; equals 1 at rho = 0 and 1/sqrt(2) at RHO_3DB."""
    rho = np.asarray(rho, dtype=float)
    rho = np.abs(rho)
    small = rho < _SERIES_CUTOFF
    out = np.empty_like(rho)
    if np.any(small):
        out[small] = _envelope_series(rho[small])
    if np.any(~small):
        out[~small] = _envelope_bessel(rho[~small])
    return out if out.ndim else float(out)


def beam_gain(theta, theta_3db, g_max):
    """Transmit gain toward off-boresight angle ``theta`` (radians, linear gain).

    The gain is g_max * envelope(rho)^2 with rho = 2.07123 sin(theta)/sin(theta_3db).
    Valid inside the main lobe (theta below the first pattern null).
    """
    if theta_3db <= 0.0:
        raise ValueError(f"theta_3db must be positive, got {theta_3db}")
    rho = RHO_3DB * np.sin(theta) / np.sin(theta_3db)
    env = pattern_envelope(rho)
    return g_max * np.square(env)


def first_null_angle(theta_3db):
    """Boresight angle of the first pattern null for a given 3 dB beamwidth."""
    if theta_3db <= 0.0:
        raise ValueError(f"theta_3db must be positive, got {theta_3db}")
    s = np.sin(theta_3db) * FIRST_NULL_RHO / RHO_3DB
    if s >= 1.0:
        return np.pi / 2
    return float(np.arcsin(s))

"""Central and noncentral chi-square tail probabilities."""

from __future__ import annotations

import math

from scipy import special

from collab_score.errors import InvalidArg

NONCENTRAL_TERM_TOL = 1e-12
_MAX_POISSON_TERMS = 100_000


def _check_dof(r: int) -> None:
    if int(r) != r or r < 1:
        raise InvalidArg(f"degrees of freedom must be a positive integer, got {r}")


def chi2_sf(x: float, r: int) -> float:
    if x < 0 or math.isnan(x):
        raise InvalidArg(f"x must be >= 0, got {x}")
    _check_dof(r)
    if x == 0:
        return 1.0
    return float(special.gammaincc(r / 2.0, x / 2.0))


def chi2_quantile(alpha: float, r: int) -> float:
    """Upper-alpha critical value: the x with chi2_sf(x, r) == alpha."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArg(f"alpha must lie in (0, 1), got {alpha}")
    _check_dof(r)
    return float(2.0 * special.gammainccinv(r / 2.0, alpha))


def _poisson_weight(j: int, half_e: float) -> float:
    return math.exp(j * math.log(half_e) - half_e - math.lgamma(j + 1))


def noncentral_chi2_sf(x: float, r: int, e: float) -> float:
    """P(chi2(r, e) > x) as a Poisson(e/2) mixture of central tails.

    Terms are summed outward from the Poisson mode and truncated once the
    mixture weight drops below NONCENTRAL_TERM_TOL on both sides.
    """
    if x < 0 or math.isnan(x):
        raise InvalidArg(f"x must be >= 0, got {x}")
    if e < 0 or math.isnan(e):
        raise InvalidArg(f"noncentrality must be >= 0, got {e}")
    _check_dof(r)
    if x == 0:
        return 1.0
    if e == 0:
        return chi2_sf(x, r)

    half_e = e / 2.0
    mode = int(math.floor(half_e))
    total = 0.0
    for j in range(mode, mode + _MAX_POISSON_TERMS):
        weight = _poisson_weight(j, half_e)
        total += weight * chi2_sf(x, r + 2 * j)
        if weight < NONCENTRAL_TERM_TOL and j > half_e:
            break
    for j in range(mode - 1, -1, -1):
        weight = _poisson_weight(j, half_e)
        total += weight * chi2_sf(x, r + 2 * j)
        if weight < NONCENTRAL_TERM_TOL:
            break
    return min(max(total, 0.0), 1.0)

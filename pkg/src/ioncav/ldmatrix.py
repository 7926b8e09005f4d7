"""Phonon-sideband matrix elements for laser- and cavity-driven transitions.

Driving a trapped ion outside the Lamb-Dicke regime attaches a
phonon-number-dependent factor to every Rabi rate.  The factor comes from
the diagonal-in-m operator produced by normal ordering
exp[i eta (a^dag + a)]:

    <m| O_k |m> = exp(-eta^2/2) sum_{p=0}^{m} (-1)^p eta^(2p) m!
                  / (p! (p+k)! (m-p)!)

This module evaluates that sum with the term ratio folded into the summand
(no bare factorials, safe for m up to ~170) and also provides an
independent associated-Laguerre route, kept as a cross-check oracle:

    <m| O_k |m> = exp(-eta^2/2) (m! / (m+k)!) L_m^k(eta^2)

The F-factors multiply the bare Rabi rate for a |g,m> <-> |e,m-k|
transition; their i^k / i^(k-1) prefactors are reported as metadata
(``phase_power``) and the returned magnitudes feed pulse timing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidArgument


def _check_eta(eta: float):
    # the node-position expansion is only controlled for eta < 1
    if not 0.0 <= eta < 1.0:
        raise InvalidArgument(f"Lamb-Dicke parameter must be in [0, 1), got {eta}")


def o_k_diag(eta: float, k: int, m: int) -> float:
    """Diagonal element <m| O_k |m> of the phonon-dressing operator.

    The sum alternates; it is accumulated in increasing p with Kahan
    compensation, which loses only a few digits for eta <= 0.5.  The
    result is real and can turn negative once eta^2 m passes the first
    zero of the Laguerre polynomial.
    """
    _check_eta(eta)
    if k < 0 or m < 0:
        raise InvalidArgument(f"k and m must be >= 0, got k={k}, m={m}")
    if k > 170:
        return 0.0  # 1/k! underflows double precision long before this
    x = eta * eta
    term = 1.0 / math.factorial(k)  # p = 0
    total = term
    comp = 0.0
    for p in range(m):
        term *= -x * (m - p) / ((p + 1.0) * (p + 1.0 + k))
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return math.exp(-0.5 * x) * total


def o_k_diag_laguerre(eta: float, k: int, m: int) -> float:
    """Same element via the associated-Laguerre identity.

    L_m^k(x) is evaluated from its explicit coefficients,
    L_m^k(x) = sum_p (-1)^p C(m+k, m-p) x^p / p!, with exact integer
    binomials.  Deliberately a different code path from :func:`o_k_diag`
    so the two can certify each other.
    """
    _check_eta(eta)
    if k < 0 or m < 0:
        raise InvalidArgument(f"k and m must be >= 0, got k={k}, m={m}")
    x = eta * eta
    lag = 0.0
    xp = 1.0  # x^p / p!
    sign = 1.0
    for p in range(m + 1):
        lag += sign * math.comb(m + k, m - p) * xp
        xp *= x / (p + 1)
        sign = -sign
    ratio = 1.0  # m! / (m+k)!
    for j in range(m + 1, m + k + 1):
        ratio /= j
    return math.exp(-0.5 * x) * ratio * lag


def falling_sqrt_product(m: int, k: int) -> float:
    """sqrt(m (m-1) ... (m-k+1)), the ladder-operator normalization for
    a k-phonon step down from |m>."""
    if k < 0 or m < k:
        raise InvalidArgument(f"need m >= k >= 0, got m={m}, k={k}")
    prod = 1.0
    for i in range(k):
        prod *= m - i
    return math.sqrt(prod)


@dataclass(frozen=True)
class MatrixElementReport:
    """Magnitude of a sideband coupling factor plus the power of i that
    was stripped from it."""

    m: int
    k: int
    eta: float
    F: float
    phase_power: int


def f_carrier(eta_l: float, m: int) -> float:
    """Carrier Rabi-rate factor F_{m,m} = <m| O_0 |m> for the laser.

    Approaches 1 for every m as eta_l -> 0; decreases with m outside the
    Lamb-Dicke regime.
    """
    return o_k_diag(eta_l, 0, m)


def f_sideband_laser(eta_l: float, k: int, m: int) -> MatrixElementReport:
    """Laser k-th sideband factor |F_{m-k,m}| for |g,m> <-> |e,m-k>.

    Magnitude of eta_l^k sqrt(m (m-1) ... (m-k+1)) <m-k| O_k |m-k>; the
    stripped i^k lives in ``phase_power``.  The transition does not exist
    for m < k.
    """
    if k < 1:
        raise InvalidArgument(f"sideband order k must be >= 1, got {k}")
    if m < k:
        raise InvalidArgument(f"transition needs m >= k, got m={m}, k={k}")
    mag = (eta_l ** k) * falling_sqrt_product(m, k) * o_k_diag(eta_l, k, m - k)
    return MatrixElementReport(m=m, k=k, eta=eta_l, F=abs(mag), phase_power=k)


def f_sideband_cavity(eta_c: float, k: int, m: int) -> MatrixElementReport:
    """Cavity k-th sideband factor |F_{m-k,m}| for |e,m> <-> |g,m-k> with
    one photon exchanged.

    With the trap at a node of the cavity standing wave only odd k couple,
    so even k is rejected.  ``phase_power`` records the stripped i^(k-1).
    """
    if k < 1:
        raise InvalidArgument(f"sideband order k must be >= 1, got {k}")
    if k % 2 == 0:
        raise InvalidArgument(
            f"node-position cavity coupling only has odd sideband orders, got k={k}"
        )
    if m < k:
        raise InvalidArgument(f"transition needs m >= k, got m={m}, k={k}")
    mag = (eta_c ** k) * falling_sqrt_product(m, k) * o_k_diag(eta_c, k, m - k)
    return MatrixElementReport(m=m, k=k, eta=eta_c, F=abs(mag), phase_power=k - 1)

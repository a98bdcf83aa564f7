r"""Modified Bessel functions of complex argument in overflow-safe form.

Values are carried as a complex mantissa and a real natural-log exponent,

.. math::
    I_\nu(z) = \tilde I_\nu(z)\, e^{|\mathrm{Re}\, z|}, \qquad
    K_\nu(z) = \tilde K_\nu(z)\, e^{-z},

which is the convention of the AMOS routines behind
:func:`scipy.special.ive` and :func:`scipy.special.kve`.  Ratios of Bessel
values at two radii of the same layer are then formed from the mantissas
and an explicit exponential correction, so nothing overflows even when the
unscaled functions would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, SingularityError

__all__ = [
    "ScaledBessel",
    "RatioBundle",
    "scaled_bessel_i",
    "scaled_bessel_k",
    "ratio_bundle",
    "psi",
]


@dataclass(frozen=True)
class ScaledBessel:
    """Bessel value stored as ``mantissa * exp(log_scale)``."""

    mantissa: complex
    log_scale: float

    @property
    def value(self) -> complex:
        """Reconstructed value; may overflow to ``inf`` for large ``log_scale``."""
        with np.errstate(over="ignore"):
            return complex(self.mantissa * np.exp(self.log_scale))


def _check_order(order):
    if order not in (0, 1):
        raise DomainError(f"only orders 0 and 1 are supported, got {order!r}")


def _check_finite(z):
    if not np.all(np.isfinite(z)):
        raise DomainError(f"non-finite Bessel argument {z!r}")


def scaled_bessel_i(order: int, z: complex) -> ScaledBessel:
    """Exponentially scaled ``I_order(z)``.

    The mantissa is ``I_order(z) * exp(-|Re z|)``.
    """
    _check_order(order)
    z = complex(z)
    _check_finite(z)
    return ScaledBessel(complex(special.ive(order, z)), abs(z.real))


def scaled_bessel_k(order: int, z: complex) -> ScaledBessel:
    """Exponentially scaled ``K_order(z)`` on the principal branch.

    ``kve`` returns ``K(z) * exp(z)``; the oscillating part ``exp(i Im z)``
    is folded back into the mantissa so that ``log_scale`` stays real.
    """
    _check_order(order)
    z = complex(z)
    _check_finite(z)
    if z == 0:
        raise SingularityError(f"K_{order} is singular at z = 0")
    if z.imag == 0 and z.real < 0:
        raise DomainError("argument on the branch cut of K (negative real axis)")
    mant = complex(special.kve(order, z)) * np.exp(-1j * z.imag)
    return ScaledBessel(complex(mant), -z.real)


@dataclass(frozen=True)
class RatioBundle:
    """Bessel ratios needed at one interface ``b_n``.

    Region ``n`` lies outside the interface (``b_n < r < b_{n-1}``) with
    wavenumber ``a_n``; region ``n+1`` lies inside (``b_{n+1} < r < b_n``)
    with wavenumber ``a_{n+1}``.  "inner"/"outer" in the field names refer
    to which face of its region the interface is: ``b_n`` is the inner face
    of region ``n`` and the outer face of region ``n+1``.

    Attributes
    ----------
    i_ratio
        ``I1(a_n b_n) / I1(a_n b_{n-1})``.
    k_ratio
        ``K1(a_{n+1} b_n) / K1(a_{n+1} b_{n+1})``.  Underflows to 0 for
        very thick, very lossy layers; use ``k_phase`` for its phase.
    k_phase
        ``k_ratio / |k_ratio|``, computed without underflow.
    i_logderiv_inner, k_logderiv_inner
        ``I0/I1`` and ``K0/K1`` at ``a_n b_n``.
    i_logderiv_outer, k_logderiv_outer
        ``I0/I1`` and ``K0/K1`` at ``a_{n+1} b_n``.
    """

    i_ratio: complex
    k_ratio: complex
    k_phase: complex
    i_logderiv_inner: complex
    k_logderiv_inner: complex
    i_logderiv_outer: complex
    k_logderiv_outer: complex


# scipy's Bessel routines return NaN beyond |z| ~ 1e9; switch to the
# Hankel expansion well before that.  Four terms reach double precision.
_ASYMPTOTIC_ABS = 1e8


def _hankel_terms(order, z, sign):
    mu = 4.0 * order * order
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 5):
        term = term * sign * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        total = total + term
    return total


def _ive_large(order, z):
    # both exponentials matter on the imaginary axis; scaling removes e^{Re z}
    x, y = np.real(z), np.imag(z)
    phase = np.where(y > 0, 1.0, -1.0) * np.pi * (order + 0.5)
    first = np.exp(1j * y) * _hankel_terms(order, z, -1.0)
    second = np.exp(-2.0 * x + 1j * (phase - y)) * _hankel_terms(order, z, 1.0)
    return (first + second) / np.sqrt(2.0 * np.pi * z)


def _kve_large(order, z):
    return np.sqrt(np.pi / (2.0 * z)) * _hankel_terms(order, z, 1.0)


def _dispatch(small, large, order, z):
    z = np.asarray(z, dtype=complex)
    big = np.abs(z) > _ASYMPTOTIC_ABS
    if not np.any(big):
        return small(order, z)
    out = np.empty_like(z)
    out[~big] = small(order, z[~big])
    with np.errstate(under="ignore"):
        out[big] = large(order, z[big])
    return out[()] if out.ndim == 0 else out


def _ive(order, z):
    return _dispatch(special.ive, _ive_large, order, z)


def _kve(order, z):
    return _dispatch(special.kve, _kve_large, order, z)


def ratio_bundle(a_inner, a_outer, b_prev, b_n, b_next) -> RatioBundle:
    """Normalized Bessel ratios for the interface at radius ``b_n``.

    Parameters
    ----------
    a_inner : complex or ndarray
        Wavenumber ``a_{n+1}`` of the region inside the interface.
    a_outer : complex or ndarray
        Wavenumber ``a_n`` of the region outside the interface.
    b_prev, b_n, b_next : float
        Radii ``b_{n-1} >= b_n >= b_{n+1} > 0`` in meters.  For the
        outermost region pass ``b_prev = b_n``; for the coil region pass
        ``b_next = b_n``.

    Returns
    -------
    RatioBundle
        Fields broadcast against the wavenumber arrays.
    """
    for name, b in (("b_prev", b_prev), ("b_n", b_n), ("b_next", b_next)):
        if not np.isfinite(b) or b <= 0:
            raise DomainError(f"{name} must be a positive finite radius, got {b!r}")
    a_in = np.asarray(a_inner)
    a_out = np.asarray(a_outer)
    _check_finite(a_in)
    _check_finite(a_out)

    zo = a_out * b_n
    zi = a_in * b_n
    i1_o = _ive(1, zo)
    k1_o = _kve(1, zo)
    i1_i = _ive(1, zi)
    k1_i = _kve(1, zi)

    # I1(a b_n)/I1(a b_prev): ive strips exp(|Re|), principal root keeps Re a >= 0
    i_ratio = i1_o / _ive(1, a_out * b_prev) * np.exp(np.real(a_out) * (b_n - b_prev))

    # K1(a b_n)/K1(a b_next): kve strips exp(-z); split exp(-a d) into modulus and phase
    d = b_n - b_next
    k_mant = k1_i / _kve(1, a_in * b_next)
    rot = k_mant * np.exp(-1j * np.imag(a_in) * d)
    k_ratio = rot * np.exp(-np.real(a_in) * d)
    k_phase = rot / np.abs(rot)

    return RatioBundle(
        i_ratio=i_ratio,
        k_ratio=k_ratio,
        k_phase=k_phase,
        i_logderiv_inner=_ive(0, zo) / i1_o,
        k_logderiv_inner=_kve(0, zo) / k1_o,
        i_logderiv_outer=_ive(0, zi) / i1_i,
        k_logderiv_outer=_kve(0, zi) / k1_i,
    )


# -- coil radial integral ----------------------------------------------------

# Gauss-Legendre rule for short intervals, where the difference of two
# cumulative integrals would cancel.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)
_SHORT = 4.0


def _psi_from_zero(x):
    """int_0^x t I1(t) dt by its all-positive power series."""
    x = np.asarray(x, dtype=float)
    x2q = 0.25 * x * x
    c = 0.5 * x * x  # t*I1(t) series term k=0, integrated term = c*x/3
    total = c * x / 3.0
    k = 0
    while True:
        c = c * x2q / ((k + 1) * (k + 2))
        term = c * x / (2 * k + 5)
        total = total + term
        k += 1
        if np.all(term <= 1e-17 * total) or k > 2000:
            return total


def _psi_short(x1, x2):
    half = 0.5 * (x2 - x1)
    mid = 0.5 * (x2 + x1)
    t = mid[..., None] + half[..., None] * _GL_X
    # t*I1(t) = t*ive(1,t)*exp(t); pull exp(mid) out of the sum
    f = t * special.ive(1, t) * np.exp(t - mid[..., None])
    return half * np.exp(mid) * (f @ _GL_W)


def psi(x1, x2):
    """``int_{x1}^{x2} x I1(x) dx`` for ``0 <= x1 <= x2``.

    Accepts scalars or broadcastable arrays.  Short intervals use a 32-point
    Gauss-Legendre rule; longer ones the difference of two power series,
    which is then free of significant cancellation.
    """
    x1a, x2a = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
    if not (np.all(np.isfinite(x1a)) and np.all(np.isfinite(x2a))):
        raise DomainError("psi bounds must be finite")
    if np.any(x1a < 0) or np.any(x2a < x1a):
        raise DomainError("psi needs 0 <= x1 <= x2")
    short = (x2a - x1a) <= _SHORT
    out = np.empty(x1a.shape)
    if np.any(short):
        out[short] = _psi_short(x1a[short], x2a[short])
    if np.any(~short):
        out[~short] = _psi_from_zero(x2a[~short]) - _psi_from_zero(x1a[~short])
    if out.ndim == 0:
        return float(out)
    return out

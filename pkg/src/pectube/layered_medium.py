"""Concentric conductor stacks and their reflection coefficient.

Regions are numbered from the outside in.  Region 1 extends to infinity,
regions ``2..N`` are annuli, and region ``N+1`` is the air core that holds
the coils.  Interface ``n`` sits at radius ``b_n`` and separates region
``n`` (outside) from region ``n+1`` (inside).

In region ``n`` the vector potential is ``C_n I1(a_n r) + D_n K1(a_n r)``
with ``a_n = sqrt(q^2 + s mu0 mu_r sigma)``.  Continuity of ``A`` and of
``(1/mu) (1/r) d(rA)/dr`` across each interface gives a 2x2 transfer
matrix.  Two formulations are provided:

``legacy``
    Plain Bessel products.  Overflows once ``|Re(a b)|`` reaches a few
    hundred and is kept as a cross-check.
``scaled``
    Each Bessel function is divided by its value at a face of its own
    region (``I`` at the outer face, ``K`` at the inner face), so every
    ratio has modulus below one.  This is the production path.

All functions broadcast over array-valued ``q`` and ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import BesselOverflowError, DomainError, InvariantError, PoleHitError
from .special_functions import ratio_bundle

MU0 = 4e-7 * np.pi

__all__ = [
    "MU0",
    "Layer",
    "AIR",
    "LayerStack",
    "ReflectionValue",
    "layer_wavenumber",
    "transfer_matrix_legacy",
    "transfer_matrix_scaled",
    "reflection",
    "reflection_limit",
]


@dataclass(frozen=True)
class Layer:
    """Homogeneous isotropic region: conductivity [S/m], relative permeability."""

    sigma: float
    mu_r: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise InvariantError(f"sigma must be >= 0, got {self.sigma!r}", key="sigma")
        if not np.isfinite(self.mu_r) or self.mu_r <= 0:
            raise InvariantError(f"mu_r must be > 0, got {self.mu_r!r}", key="mu_r")

    @property
    def is_air(self) -> bool:
        return self.sigma == 0 and self.mu_r == 1


AIR = Layer(0.0, 1.0)


@dataclass(frozen=True)
class LayerStack:
    """Layers and interface radii, both listed outermost first.

    ``layers[0]`` is region 1 (unbounded), ``layers[n-1]`` lies between
    ``radii[n-1]`` and ``radii[n-2]``.  The coil region inside
    ``radii[-1]`` is air and is not listed.
    """

    layers: tuple[Layer, ...]
    radii: tuple[float, ...]

    def __init__(self, layers: Sequence[Layer], radii: Sequence[float]):
        object.__setattr__(self, "layers", tuple(layers))
        object.__setattr__(self, "radii", tuple(float(b) for b in radii))
        self._validate()

    def _validate(self):
        if len(self.layers) == 0:
            raise InvariantError("stack needs at least one layer", key="layers")
        if len(self.layers) != len(self.radii):
            raise InvariantError(
                f"{len(self.layers)} layers but {len(self.radii)} radii", key="radii"
            )
        b = np.asarray(self.radii)
        if not np.all(np.isfinite(b)) or np.any(b <= 0):
            raise InvariantError("radii must be positive and finite", key="radii")
        if np.any(np.diff(b) >= 0):
            raise InvariantError("radii must be strictly decreasing", key="radii")
        for layer in self.layers:
            if not isinstance(layer, Layer):
                raise InvariantError(f"not a Layer: {layer!r}", key="layers")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def regions(self) -> tuple[Layer, ...]:
        """All ``N+1`` regions including the air core."""
        return self.layers + (AIR,)

    @property
    def inner_radius(self) -> float:
        return self.radii[-1]

    def thickness(self, index: int) -> float:
        """Radial thickness of ``layers[index]``; ``inf`` for the outer region."""
        if index == 0:
            return np.inf
        return self.radii[index - 1] - self.radii[index]

    @property
    def all_air(self) -> bool:
        return all(layer.sigma == 0 and layer.mu_r == 1 for layer in self.layers)

    def conductive_indices(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if layer.sigma > 0]


@dataclass(frozen=True)
class ReflectionValue:
    """Reflection coefficient and the numerator/denominator it came from.

    ``r == numerator / denominator``.  On the real ``s`` axis both parts are
    real (up to rounding) when the outer region is non-conductive, and the
    poles of ``r`` are the zeros of ``denominator``.
    """

    r: complex
    numerator: complex
    denominator: complex


def layer_wavenumber(q, s, layer: Layer):
    """Principal root of ``q^2 + s mu0 mu_r sigma``."""
    q = np.asarray(q, dtype=float)
    s = np.asarray(s)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(s))):
        raise DomainError("non-finite q or s")
    return np.sqrt(q * q + s * (MU0 * layer.mu_r * layer.sigma) + 0j)


def _wavenumbers(q, s, stack: LayerStack):
    """Per-region wavenumbers; air regions get the real array ``q``."""
    q = np.asarray(q, dtype=float)
    out = []
    for layer in stack.regions:
        if layer.sigma == 0:
            out.append(q + 0j)
        else:
            out.append(layer_wavenumber(q, s, layer))
    return out


def _beta(a, layer: Layer):
    return a / layer.mu_r


def _check_interface(stack: LayerStack, n: int):
    if not 1 <= n <= stack.n_layers:
        raise DomainError(f"interface index must be in 1..{stack.n_layers}, got {n}")


# -- legacy formulation ------------------------------------------------------

_EXP_LIMIT = 700.0


def _legacy_entries(a_out, a_in, mu_out, mu_in, b):
    """Entries of the unscaled interface matrix at radius ``b``."""
    z_out = a_out * b
    z_in = a_in * b
    if np.any(np.abs(np.real(z_out)) > _EXP_LIMIT) or np.any(np.abs(np.real(z_in)) > _EXP_LIMIT):
        raise BesselOverflowError(
            "unscaled Bessel values overflow double precision "
            f"(|Re(a b)| up to {max(np.max(np.abs(np.real(z_out))), np.max(np.abs(np.real(z_in)))):.4g})"
        )
    beta_out = a_out / mu_out
    beta_in = a_in / mu_in
    with np.errstate(over="ignore", invalid="ignore"):
        i0o, i1o = special.iv(0, z_out), special.iv(1, z_out)
        k0o, k1o = special.kv(0, z_out), special.kv(1, z_out)
        i0i, i1i = special.iv(0, z_in), special.iv(1, z_in)
        k0i, k1i = special.kv(0, z_in), special.kv(1, z_in)
        pref = mu_in * b  # a_{n+1} b_n / beta_{n+1}
        t11 = pref * (beta_in * k0i * i1o + beta_out * i0o * k1i)
        t12 = pref * (beta_in * k0i * k1o - beta_out * k0o * k1i)
        t21 = pref * (beta_in * i0i * i1o - beta_out * i0o * i1i)
        t22 = pref * (beta_in * i0i * k1o + beta_out * k0o * i1i)
    entries = (t11, t12, t21, t22)
    if not all(np.all(np.isfinite(t)) for t in entries):
        raise BesselOverflowError("legacy transfer matrix is not representable in double precision")
    return entries


def transfer_matrix_legacy(q, s, stack: LayerStack, n: int):
    """Unscaled transfer matrix across interface ``n`` (1-based).

    Maps ``(C_n, D_n)`` to ``(C_{n+1}, D_{n+1})``.  Returns an array of shape
    ``(2, 2) + broadcast(q, s).shape``.

    Raises
    ------
    BesselOverflowError
        When any Bessel value or product leaves the double range.
    """
    _check_interface(stack, n)
    a = _wavenumbers(q, s, stack)
    reg = stack.regions
    t11, t12, t21, t22 = _legacy_entries(
        a[n - 1], a[n], reg[n - 1].mu_r, reg[n].mu_r, stack.radii[n - 1]
    )
    return np.array([[t11, t12], [t21, t22]])


# -- scaled formulation ------------------------------------------------------

def _scaled_entries(a_out, a_in, mu_out, mu_in, b_prev, b, b_next):
    """Entries of the normalized interface matrix, rescaled by ``|K_n|``.

    The normalized matrix carries an overall ``1/K_n`` that grows without
    bound through thick lossy layers.  Multiplying by the real positive
    ``|K_n|`` leaves every coefficient ratio, the reflection coefficient
    and the realness of the chain on the real ``s`` axis unchanged, and
    keeps all entries of order one.
    """
    rb = ratio_bundle(a_in, a_out, b_prev, b, b_next)
    ip_n = (a_out / mu_out) * rb.i_logderiv_inner
    kp_n = (a_out / mu_out) * rb.k_logderiv_inner
    ip_n1 = (a_in / mu_in) * rb.i_logderiv_outer
    kp_n1 = (a_in / mu_in) * rb.k_logderiv_outer
    den = ip_n1 + kp_n1
    k_abs = np.abs(rb.k_ratio)
    t11 = (ip_n + kp_n1) * rb.i_ratio * k_abs / den
    t12 = (kp_n1 - kp_n) * k_abs / den
    t21 = (ip_n1 - ip_n) * rb.i_ratio / (den * rb.k_phase)
    t22 = (ip_n1 + kp_n) / (den * rb.k_phase)
    return t11, t12, t21, t22


def _face_radii(stack: LayerStack, n: int):
    """``(b_{n-1}, b_n, b_{n+1})`` with ``b_0 = b_1`` and ``b_{N+1} = b_N``."""
    b = stack.radii
    b_prev = b[n - 2] if n >= 2 else b[0]
    b_next = b[n] if n < len(b) else b[-1]
    return b_prev, b[n - 1], b_next


def transfer_matrix_scaled(q, s, stack: LayerStack, n: int):
    """Normalized transfer matrix across interface ``n`` (1-based).

    Coefficients are those of the normalized potential, in which ``I1`` is
    divided by its value at the region's outer radius and ``K1`` by its
    value at the inner radius.  The matrix is returned up to the positive
    factor ``|K_n|`` (see :func:`_scaled_entries`), so it stays finite for
    any physically valid input.
    """
    _check_interface(stack, n)
    a = _wavenumbers(q, s, stack)
    reg = stack.regions
    t = _scaled_entries(a[n - 1], a[n], reg[n - 1].mu_r, reg[n].mu_r, *_face_radii(stack, n))
    return np.array([[t[0], t[1]], [t[2], t[3]]])


def _chain(q, s, stack: LayerStack, scaled: bool):
    """Second column ``(U12, U22)`` of the product over all interfaces.

    The outer region has ``C_1 = 0`` (no growing solution at infinity), so
    only the image of ``(0, 1)`` is needed.  Multiplication runs outermost
    to innermost in a fixed order.
    """
    a = _wavenumbers(q, s, stack)
    reg = stack.regions
    u1 = np.zeros(np.broadcast(np.asarray(q), np.asarray(s)).shape, dtype=complex)
    u2 = np.ones_like(u1)
    for n in range(1, stack.n_layers + 1):
        if scaled:
            t11, t12, t21, t22 = _scaled_entries(
                a[n - 1], a[n], reg[n - 1].mu_r, reg[n].mu_r, *_face_radii(stack, n)
            )
        else:
            t11, t12, t21, t22 = _legacy_entries(
                a[n - 1], a[n], reg[n - 1].mu_r, reg[n].mu_r, stack.radii[n - 1]
            )
        with np.errstate(over="ignore", invalid="ignore"):
            u1, u2 = t11 * u1 + t12 * u2, t21 * u1 + t22 * u2
    if not scaled and not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
        raise BesselOverflowError("legacy transfer-matrix chain overflowed")
    return u1, u2


def _core_k_over_i(q, b):
    """``K1(q b) / I1(q b)`` for real ``q b`` without overflow."""
    x = np.asarray(q, dtype=float) * b
    return special.kve(1, x) / special.ive(1, x) * np.exp(-2.0 * x)


def reflection(q, s, stack: LayerStack, method: str = "scaled") -> ReflectionValue:
    """Reflection coefficient ``C_{N+1}/D_{N+1}`` seen from the coil region.

    Parameters
    ----------
    q : float or ndarray
        Axial wavenumber(s) [1/m], positive.
    s : complex or ndarray
        Laplace variable [1/s]; ``s = j*omega`` for time-harmonic drive.
    stack : LayerStack
    method : {"scaled", "legacy"}

    Returns
    -------
    ReflectionValue
        For ``method="scaled"`` the numerator includes the
        ``K1(q b_N)/I1(q b_N)`` de-normalization of the coil region.

    Raises
    ------
    PoleHitError
        If the denominator is exactly zero.
    BesselOverflowError
        Legacy method only.
    """
    q_arr = np.asarray(q, dtype=float)
    if np.any(q_arr <= 0):
        raise DomainError("q must be positive")
    if method == "scaled":
        u1, u2 = _chain(q_arr, s, stack, scaled=True)
        num = u1 * _core_k_over_i(q_arr, stack.inner_radius)
    elif method == "legacy":
        u1, u2 = _chain(q_arr, s, stack, scaled=False)
        num = u1
    else:
        raise DomainError(f"unknown method {method!r}")
    if np.any(u2 == 0):
        raise PoleHitError("reflection denominator vanished; perturb s")
    r = num / u2
    if r.ndim == 0:
        return ReflectionValue(complex(r), complex(num), complex(u2))
    return ReflectionValue(r, num, u2)


def reflection_limit(q, stack: LayerStack):
    """High-frequency limit of the reflection coefficient.

    As ``s -> inf`` the inner surface of the innermost conductor becomes a
    perfect screen (``A = 0`` there); the non-conductive regions inside it
    are then chained as usual.  With only air inside, this reduces to
    ``-K1(q b)/I1(q b)``.  Zero when nothing conducts.
    """
    q_arr = np.asarray(q, dtype=float)
    idx = stack.conductive_indices()
    if not idx:
        return np.zeros_like(q_arr)
    n = max(idx) + 1  # interface on the screen surface
    a = _wavenumbers(q_arr, 0.0, stack)  # s-independent inside the screen
    reg = stack.regions
    # A = 0 at b_n in normalized coefficients of region n+1: C + K_n D = 0
    rb = ratio_bundle(a[n], a[n], stack.radii[n - 1], stack.radii[n - 1], _face_radii(stack, n)[2])
    u1 = -rb.k_ratio * np.ones_like(q_arr)
    u2 = np.ones_like(u1)
    for m in range(n + 1, stack.n_layers + 1):
        t11, t12, t21, t22 = _scaled_entries(
            a[m - 1], a[m], reg[m - 1].mu_r, reg[m].mu_r, *_face_radii(stack, m)
        )
        u1, u2 = t11 * u1 + t12 * u2, t21 * u1 + t22 * u2
    return np.real(u1 / u2 * _core_k_over_i(q_arr, stack.inner_radius))

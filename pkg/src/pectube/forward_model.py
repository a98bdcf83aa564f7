"""Coil geometry and receiver voltage in the frequency/Laplace domain.

The axial direction is truncated to ``0 < z < h`` with ``A = 0`` on both
ends, which turns the spectral integral over ``q`` into a sum over the
eigenvalues ``q_i = i pi / h``.  The untruncated integral is kept as an
independent check of the sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import AccuracyError, DomainError, InvariantError, NonFiniteError
from .layered_medium import MU0, LayerStack, reflection
from .special_functions import psi

__all__ = [
    "CoilSpec",
    "TruncatedDomain",
    "ProbeAssembly",
    "ModalSum",
    "eigenvalues",
    "place_coils",
    "coupling",
    "default_h",
    "voltage_sum",
    "voltage_integral",
    "air_inductance",
    "mutual_inductance_filaments",
]

DEFAULT_MODES = 50


@dataclass(frozen=True)
class CoilSpec:
    """Coaxial coil of rectangular cross-section with ``turns`` windings.

    Radii and heights in meters.  ``turns`` may be zero (an inert coil).
    """

    r1: float
    r2: float
    z1: float
    z2: float
    turns: float

    def __post_init__(self):
        vals = (self.r1, self.r2, self.z1, self.z2, self.turns)
        if not all(np.isfinite(v) for v in vals):
            raise InvariantError("coil dimensions must be finite", key="coil")
        if not 0 < self.r1 < self.r2:
            raise InvariantError(f"need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}", key="r1")
        if not self.z1 < self.z2:
            raise InvariantError(f"need z1 < z2, got z1={self.z1}, z2={self.z2}", key="z1")
        if self.turns < 0:
            raise InvariantError(f"turns must be >= 0, got {self.turns}", key="turns")

    @property
    def length(self) -> float:
        return self.z2 - self.z1

    @property
    def area(self) -> float:
        return (self.r2 - self.r1) * (self.z2 - self.z1)


@dataclass(frozen=True)
class TruncatedDomain:
    h: float
    n_modes: int = DEFAULT_MODES

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise InvariantError(f"h must be positive, got {self.h}", key="h")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise InvariantError(f"n_modes must be a positive integer, got {self.n_modes}", key="modes")


@dataclass(frozen=True)
class ProbeAssembly:
    """Transmitter/receiver pair.  ``drive_amplitude`` is the current amplitude [A]."""

    transmitter: CoilSpec
    receiver: CoilSpec
    drive_amplitude: float = 1.0

    def swapped(self) -> "ProbeAssembly":
        return ProbeAssembly(self.receiver, self.transmitter, self.drive_amplitude)

    def check_inside(self, stack: LayerStack):
        rmax = max(self.transmitter.r2, self.receiver.r2)
        if rmax >= stack.inner_radius:
            raise InvariantError(
                f"coil outer radius {rmax} must be below the innermost interface "
                f"{stack.inner_radius}",
                key="radii",
            )

    def check_domain(self, domain: TruncatedDomain):
        for coil in (self.transmitter, self.receiver):
            if coil.z1 <= 0 or coil.z2 >= domain.h:
                raise InvariantError(
                    f"coil [{coil.z1}, {coil.z2}] does not fit inside (0, {domain.h})", key="h"
                )


def eigenvalues(domain: TruncatedDomain) -> np.ndarray:
    """``q_i = i pi / h`` for ``i = 1..M``."""
    return np.arange(1, domain.n_modes + 1) * (np.pi / domain.h)


def place_coils(h, l_T, l_R, g):
    """Axial coordinates ``(z1T, z2T, z1R, z2R)`` for a centred probe.

    The transmitter starts at mid-height and extends upwards; the receiver
    sits below it with axial gap ``g``.
    """
    if min(l_T, l_R, g) < 0 or h <= 0:
        raise DomainError("lengths must be non-negative and h positive")
    z1T = h / 2
    z2T = z1T + l_T
    z2R = h / 2 - g
    z1R = z2R - l_R
    if z1R <= 0 or z2T >= h:
        raise DomainError(f"coils span [{z1R}, {z2T}], outside the domain (0, {h})")
    return z1T, z2T, z1R, z2R


def coupling(q, coil: CoilSpec):
    """Coil coupling factor ``Y(q)`` for each axial eigenvalue."""
    q = np.asarray(q, dtype=float)
    radial = psi(q * coil.r1, q * coil.r2)
    axial = np.cos(q * coil.z1) - np.cos(q * coil.z2)
    return coil.turns / coil.area * radial * axial


def default_h(stack: LayerStack, transmitter: CoilSpec) -> float:
    """Truncation length: ``100 r2T`` for magnetic stacks, ``20 r2T`` otherwise."""
    magnetic = any(layer.mu_r > 1 for layer in stack.layers)
    return (100.0 if magnetic else 20.0) * transmitter.r2


def _neumaier_sum(terms):
    """Compensated sum over the first axis, in index order."""
    total = np.zeros_like(terms[0])
    comp = np.zeros_like(terms[0])
    for x in terms:
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp = comp + np.where(big, (total - t) + x, (x - t) + total)
        total = t
    return total + comp


class ModalSum:
    """Laplace-domain step response ``G(s) = sum_i c_i R(q_i, s)``.

    ``c_i = (4 mu0 pi / h) I0 Y_T(q_i) Y_R(q_i) / q_i^6``, so ``G`` is the
    transform of the receiver voltage for a step of amplitude ``I0`` and
    ``s G(s) / I0`` is the transfer impedance.
    """

    def __init__(self, assembly: ProbeAssembly, stack: LayerStack, domain: TruncatedDomain,
                 method: str = "scaled"):
        assembly.check_inside(stack)
        self.assembly = assembly
        self.stack = stack
        self.domain = domain
        self.method = method
        self.q = eigenvalues(domain)
        yt = coupling(self.q, assembly.transmitter)
        yr = coupling(self.q, assembly.receiver)
        self.weights = (4 * MU0 * np.pi / domain.h) * assembly.drive_amplitude * yt * yr / self.q**6

    def terms(self, s):
        """Per-mode contributions, shape ``(M,) + shape(s)``."""
        s = np.asarray(s)
        qq = self.q.reshape((-1,) + (1,) * s.ndim)
        r = reflection(qq, s, self.stack, method=self.method).r
        w = self.weights.reshape(qq.shape)
        return w * r

    def __call__(self, s):
        total = _neumaier_sum(self.terms(s))
        if total.ndim == 0:
            return complex(total)
        return total


def voltage_sum(s, assembly: ProbeAssembly, stack: LayerStack, domain: TruncatedDomain,
                method: str = "scaled"):
    """Receiver voltage from the truncated-domain mode sum.

    Returns ``s * G(s)``; with ``s = j omega`` this is the phasor EMF for a
    transmitter current of amplitude ``assembly.drive_amplitude``.
    """
    if stack.all_air:
        s_arr = np.asarray(s)
        return complex(0) if s_arr.ndim == 0 else np.zeros(s_arr.shape, dtype=complex)
    g = ModalSum(assembly, stack, domain, method)(s)
    return s * g


# -- untruncated integral --------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _bracket(q, tx: CoilSpec, rx: CoilSpec):
    return (np.cos(q * (rx.z1 - tx.z1)) - np.cos(q * (rx.z2 - tx.z1))
            - np.cos(q * (rx.z1 - tx.z2)) + np.cos(q * (rx.z2 - tx.z2)))


def _panel_rule(edges):
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (hi + lo) + 0.5 * (hi - lo) * _GL_NODES
    w = 0.5 * (hi - lo) * _GL_WEIGHTS
    return x.ravel(), w.ravel()


def voltage_integral(omega, assembly: ProbeAssembly, stack: LayerStack, rtol: float = 1e-8,
                     max_refine: int = 6):
    """Receiver voltage from the semi-infinite ``q`` integral.

    The integrand is cut where its envelope drops below ``1e-14`` of the
    peak.  Composite 24-point Gauss-Legendre panels are halved until two
    successive estimates agree to ``rtol``.

    Raises
    ------
    AccuracyError
        If the estimates have not settled after ``max_refine`` halvings.
    """
    assembly.check_inside(stack)
    if stack.all_air:
        return complex(0)
    tx, rx = assembly.transmitter, assembly.receiver
    s = 1j * omega
    pref = 2j * omega * MU0 * assembly.drive_amplitude * (tx.turns / tx.area) * (rx.turns / rx.area)

    def integrand(q):
        r = reflection(q, s, stack).r
        val = psi(q * tx.r1, q * tx.r2) * psi(q * rx.r1, q * rx.r2) / q**6 * r
        return val * _bracket(q, tx, rx)

    # envelope scan for the cut-off; |bracket| <= min(4, q^2 l_T l_R)
    b = stack.inner_radius
    qs = np.geomspace(1e-6 / b, 2e4 / b, 4000)
    with np.errstate(over="ignore", invalid="ignore"):
        env = np.abs(psi(qs * tx.r1, qs * tx.r2) * psi(qs * rx.r1, qs * rx.r2) / qs**6
                     * reflection(qs, s, stack).r)
        env = env * np.minimum(4.0, qs**2 * tx.length * rx.length)
    env = np.where(np.isfinite(env), env, 0.0)
    ipk = int(np.argmax(env))
    tail = np.nonzero(env[ipk:] < 1e-14 * env[ipk])[0]
    if tail.size == 0:
        raise AccuracyError("integrand does not decay within the scanned range")
    q_cut = qs[ipk + tail[0]]

    dz = max(abs(rx.z2 - tx.z1), abs(rx.z1 - tx.z2), abs(rx.z1 - tx.z1), abs(rx.z2 - tx.z2))
    width = min(np.pi / max(dz, 1e-12), q_cut / 32)
    q_geo = q_cut / 32
    edges = np.concatenate([[0.0], np.geomspace(q_geo * 1e-8, q_geo, 17),
                            np.arange(q_geo + width, q_cut, width), [q_cut]])
    edges = np.unique(edges)

    history = []
    for _ in range(max_refine + 1):
        x, w = _panel_rule(edges)
        vals = integrand(x)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("non-finite integrand in voltage_integral")
        prods = vals * w
        est = complex(math.fsum(prods.real), math.fsum(prods.imag))
        history.append(est)
        if len(history) >= 2 and abs(history[-1] - history[-2]) <= rtol * abs(history[-1]):
            return pref * history[-1]
        edges = np.sort(np.concatenate([edges, 0.5 * (edges[1:] + edges[:-1])]))
    raise AccuracyError(
        f"voltage_integral did not converge: last estimates {history[-2]!r}, {history[-1]!r}, "
        f"q_cut={q_cut:.4g}"
    )


# -- air-core inductance --------------------------------------------------

def mutual_inductance_filaments(ra, rb, dz):
    """Mutual inductance of two coaxial circular filaments [H]."""
    ra, rb, dz = np.broadcast_arrays(np.asarray(ra, float), np.asarray(rb, float),
                                     np.asarray(dz, float))
    m = 4 * ra * rb / ((ra + rb) ** 2 + dz**2)
    k = np.sqrt(m)
    return MU0 * np.sqrt(ra * rb) * ((2 / k - k) * special.ellipk(m) - 2 / k * special.ellipe(m))


def air_inductance(coil: CoilSpec, n_filaments: int = 2000) -> float:
    """Self-inductance of the coil in free space, uniform current density.

    The winding cross-section is cut into roughly square cells, each
    replaced by a filament at its centre.  Distinct pairs use the
    elliptic-integral mutual inductance; a cell paired with itself uses
    the thin-loop formula with the cell's geometric mean distance.
    """
    dr_tot, dz_tot = coil.r2 - coil.r1, coil.length
    n_r = max(2, int(round(math.sqrt(n_filaments * dr_tot / dz_tot))))
    n_z = max(2, int(round(n_filaments / n_r)))
    dr, dz = dr_tot / n_r, dz_tot / n_z
    r = coil.r1 + dr * (np.arange(n_r) + 0.5)
    z = dz * (np.arange(n_z) + 0.5)

    # sum over z-offsets using the Toeplitz structure: offset k occurs (n_z - k) times
    offsets = dz * np.arange(n_z)
    mult = np.where(np.arange(n_z) == 0, n_z, 2 * (n_z - np.arange(n_z)))
    ra = r[:, None, None]
    rb = r[None, :, None]
    off = offsets[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        m = mutual_inductance_filaments(ra, rb, off)
    gmd = 0.2235 * (dr + dz)
    self_loop = MU0 * r * (np.log(8 * r / gmd) - 2.0)
    idx = np.arange(n_r)
    m[idx, idx, 0] = self_loop
    total = float(np.sum(m * mult[None, None, :]))
    n_cells = n_r * len(z)
    return (coil.turns / n_cells) ** 2 * total

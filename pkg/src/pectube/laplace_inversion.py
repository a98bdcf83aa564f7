"""Numerical inverse Laplace transforms.

Three independent back ends, each taking a transform evaluator ``F(s)``:

* Stehfest's weighted sum on the real axis (short times, smooth decays);
* Fourier-series inversion on a vertical contour, synthesized with an FFT
  and accelerated with Wynn's epsilon algorithm (general purpose);
* pole extraction on the negative real axis with Heaviside residues
  (long times, where one or a few poles suffice).

Evaluators are called with numpy arrays of ``s`` and must broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DegeneratePoleError, DomainError, NonFiniteError

__all__ = [
    "StehfestWeights",
    "PoleSet",
    "NiltPlan",
    "stehfest_weights",
    "stehfest_invert",
    "nilt_fft",
    "wynn_epsilon",
    "find_poles",
    "residues",
]

LN2 = math.log(2.0)
DEFAULT_STEHFEST_N = 14


# -- Stehfest ----------------------------------------------------------------

@dataclass(frozen=True)
class StehfestWeights:
    """Weights ``V_i`` as nearest doubles plus their rounding residuals.

    ``weights[i] + residuals[i]`` carries about 32 digits, enough for the
    zero-sum and ``1/s`` invariants to hold at every ``n``.  Plain doubles
    miss the latter by 1.4e-9 at ``n = 14``.
    """

    n: int
    weights: tuple[float, ...]
    residuals: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.weights) != self.n:
            raise DomainError("weight count does not match n")
        if self.residuals is None:
            object.__setattr__(self, "residuals", (0.0,) * self.n)
        elif len(self.residuals) != self.n:
            raise DomainError("residual count does not match n")


@lru_cache(maxsize=None)
def _stehfest_exact(n: int) -> tuple[Fraction, ...]:
    half = n // 2
    out = []
    for i in range(1, n + 1):
        acc = Fraction(0)
        for k in range((i + 1) // 2, min(i, half) + 1):
            num = k**half * math.factorial(2 * k)
            den = (math.factorial(half - k) * math.factorial(k) * math.factorial(k - 1)
                   * math.factorial(i - k) * math.factorial(2 * k - i))
            acc += Fraction(num, den)
        out.append((-1) ** (half + i) * acc)
    return tuple(out)


def stehfest_weights(n: int = DEFAULT_STEHFEST_N) -> StehfestWeights:
    """Stehfest coefficients ``V_1..V_n``, exact rationals rounded once.

    The sign factor is ``(-1)**(n/2 + i)``; with it the weights sum to zero
    and invert ``1/s`` exactly.
    """
    if int(n) != n or n % 2 or not 2 <= n <= 20:
        raise DomainError(f"Stehfest n must be even and in [2, 20], got {n!r}")
    n = int(n)
    exact = _stehfest_exact(n)
    hi = tuple(float(v) for v in exact)
    lo = tuple(float(v - Fraction(h)) for v, h in zip(exact, hi))
    return StehfestWeights(n, hi, lo)


def stehfest_invert(F: Callable, t, weights: StehfestWeights | None = None):
    """Approximate ``f(t)`` from ``F`` sampled at ``s = i ln2 / t``.

    ``t`` may be a scalar or an array; ``F`` receives an array of shape
    ``shape(t) + (n,)``.  Returns the real part.
    """
    if weights is None:
        weights = stehfest_weights()
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr <= 0):
        raise DomainError("Stehfest inversion needs t > 0")
    k = np.arange(1, weights.n + 1)
    scale = LN2 / t_arr
    vals = np.asarray(F(scale[..., None] * k))
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("transform returned a non-finite value on the Stehfest abscissae")
    # ordered compensated sum: the terms cancel by up to ~1e9, and a BLAS
    # dot would round differently depending on the batch shape
    total = np.zeros(t_arr.shape)
    comp = np.zeros(t_arr.shape)
    for i, (w, r) in enumerate(zip(weights.weights, weights.residuals)):
        f = np.real(vals[..., i])
        x = w * f
        u = total + x
        comp += np.where(np.abs(total) >= np.abs(x), (total - u) + x, (x - u) + total)
        comp += r * f
        total = u
    out = scale * (total + comp)
    return float(out) if out.ndim == 0 else out


# -- Fourier-series inversion ----------------------------------------------

def wynn_epsilon(sequence) -> complex:
    """Limit estimate of a sequence of partial sums by Wynn's epsilon table.

    ``sequence`` has the partial-sum index on axis 0; trailing axes are
    accelerated independently.  Returns the deepest even-column entry.  If a
    difference in the table vanishes (to rounding), the last even-column
    value reached is kept; a breakdown in the very first column returns the
    last partial sum.
    """
    s = np.asarray(sequence, dtype=complex)
    n = s.shape[0]
    if n < 3:
        raise DomainError("epsilon algorithm needs at least 3 partial sums")
    rest = s.shape[1:]
    prev = np.zeros((n + 1,) + rest, dtype=complex)
    cur = s.copy()
    best = s[-1].copy()
    alive = np.ones(rest, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for k in range(1, n):
            diff = cur[1:] - cur[:-1]
            scale = np.maximum(np.abs(cur[1:]), np.abs(cur[:-1]))
            alive &= ~np.any(np.abs(diff) <= 1e-14 * scale, axis=0)
            if not np.any(alive):
                break
            prev, cur = cur, prev[1:-1] + 1.0 / diff
            if k % 2 == 0:
                best = np.where(alive & np.isfinite(cur[-1]), cur[-1], best)
    if best.ndim == 0:
        return complex(best)
    return best


@dataclass(frozen=True)
class NiltPlan:
    """Sampling plan for :func:`nilt_fft`.

    ``shift`` is the abscissa of the Bromwich contour.  ``None`` selects
    ``alpha - ln(1e-8) / t_max`` with ``alpha`` the abscissa of convergence
    (0 for stable transforms).
    """

    t_max: float
    n_samples: int = 1024
    shift: float | None = None
    accel_depth: int = 6
    alpha: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.t_max) and self.t_max > 0):
            raise DomainError("t_max must be positive")
        if self.n_samples < 64 or self.n_samples & (self.n_samples - 1):
            raise DomainError("n_samples must be a power of two >= 64")
        if self.shift is not None and not self.shift > 0:
            raise DomainError("shift must be positive")
        if self.accel_depth < 1:
            raise DomainError("accel_depth must be >= 1")

    @property
    def abscissa(self) -> float:
        if self.shift is not None:
            return self.shift
        return self.alpha - math.log(1e-8) / self.t_max


def nilt_fft(F: Callable, plan: NiltPlan):
    """Invert ``F`` on ``n_samples`` uniform times in ``(0, t_max]``.

    The time function, damped by ``exp(-c t)``, is expanded in a Fourier
    series of period ``2 t_max``.  The first ``2 n_samples`` terms for all
    sample times come from one FFT; ``2 accel_depth`` further terms form a
    sequence of partial sums that the epsilon algorithm extrapolates.

    Returns
    -------
    t, f : ndarray
        Sample times and real values.
    """
    n = plan.n_samples
    n_fft = 2 * n
    period = 2.0 * plan.t_max
    omega = 2 * np.pi / period
    c = plan.abscissa
    n_tail = 2 * plan.accel_depth
    k = np.arange(n_fft + n_tail)
    fk = np.asarray(F(c + 1j * omega * k), dtype=complex)
    if not np.all(np.isfinite(fk)):
        raise NonFiniteError("transform is not finite on the inversion contour")

    j = np.arange(n + 1)
    # sum_{k<n_fft} F_k exp(i 2 pi j k / n_fft) for j = 0..n
    head = (n_fft * np.fft.ifft(fk[:n_fft]))[: n + 1]
    phase = np.exp(2j * np.pi * np.outer(np.arange(n_tail), j) / n_fft)
    partial = head + np.cumsum(fk[n_fft:, None] * phase, axis=0)
    seq = np.concatenate([head[None, :], partial], axis=0)
    acc = wynn_epsilon(seq)

    t = j * (plan.t_max / n)
    f = np.exp(c * t) / period * (2.0 * np.real(acc) - np.real(fk[0]))
    return t[1:], f[1:]


# -- pole extraction -------------------------------------------------------

@dataclass(frozen=True)
class PoleSet:
    """Real negative poles (closest to the origin first) and their residues."""

    poles: tuple[float, ...] = ()
    residues: tuple[complex, ...] = ()

    def __post_init__(self):
        if len(self.poles) != len(self.residues):
            raise DomainError("poles and residues differ in length")

    def __len__(self):
        return len(self.poles)

    def evaluate(self, t, n_poles: int | None = None):
        """``sum_k A_k exp(s_k t)`` over the first ``n_poles`` poles (real part)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for p, a in list(zip(self.poles, self.residues))[:n_poles]:
            out = out + np.real(a) * np.exp(p * t)
        return out


def _bisect(f, lo, hi, f_lo, rtol):
    """Bisection on ``[lo, hi]`` where ``f`` changes sign; deterministic."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * abs(mid) or mid in (lo, hi):
            return mid
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_poles(R2: Callable[[float], float], s_start: float, s_min: float,
               max_poles: int, step: float | None = None, rtol: float = 1e-12) -> list[float]:
    """Zeros of ``R2`` on ``[s_min, s_start]``, scanning from ``s_start`` down.

    Each zero is bracketed by a sign change over one ``step`` and refined
    by bisection.  Returns at most ``max_poles`` values in descending order;
    an empty list when there is no sign change in range.
    """
    if not s_min < s_start <= 0:
        raise DomainError("need s_min < s_start <= 0")
    if max_poles < 1:
        return []
    if step is None:
        step = (s_start - s_min) / 512
    if not step > 0:
        raise DomainError("scan step must be positive")

    def g(s):
        v = float(np.real(R2(s)))
        if not np.isfinite(v):
            raise NonFiniteError(f"R2 is not finite at s={s!r}")
        return v

    roots: list[float] = []
    hi, f_hi = s_start, g(s_start)
    if f_hi == 0 and s_start < 0:
        roots.append(s_start)
    n_steps = int(math.ceil((s_start - s_min) / step))
    for i in range(1, n_steps + 1):
        if len(roots) >= max_poles:
            break
        lo = max(s_start - i * step, s_min)
        f_lo = g(lo)
        if f_lo == 0:
            roots.append(lo)
        elif f_hi != 0 and (f_lo > 0) != (f_hi > 0):
            # interval [lo, hi], sign reference taken at lo
            roots.append(_bisect(g, lo, hi, f_lo, rtol))
        hi, f_hi = lo, f_lo
    return sorted(roots[:max_poles], reverse=True)


def _derivative(f, s):
    delta = max(1e-7 * abs(s), 1e-9)

    def central(h):
        # divide by the step actually taken; s +- h are rounded
        sp, sm = s + h, s - h
        return (f(sp) - f(sm)) / (sp - sm)

    d1, d2 = central(delta), central(delta / 2)
    # slope resolvable at this s: |f| over a step, times |s|/delta rounding gain.
    # A simple root gives |f'| ~ 1e-7 scale; a double root leaves only noise.
    size = max(abs(f(s + delta)), abs(f(s - delta)))
    scale = size * max(abs(s), delta) / delta**2
    return (4 * d2 - d1) / 3, scale


def residues(R1: Callable, R2: Callable, poles) -> PoleSet:
    """Heaviside residues ``R1(s_k) / R2'(s_k)`` at simple zeros of ``R2``.

    ``R2'`` is a central difference with one Richardson step.

    Raises
    ------
    DegeneratePoleError
        When ``|R2'|`` is at rounding level, i.e. the zero is not simple.
    """
    eps = np.finfo(float).eps
    out = []
    for p in poles:
        d, scale = _derivative(lambda s: complex(R2(s)), float(p))
        if abs(d) < 1e3 * eps * scale or d == 0:
            raise DegeneratePoleError(f"R2' vanishes at s={p!r}; pole is not simple")
        out.append(complex(R1(p)) / d)
    return PoleSet(tuple(float(p) for p in poles), tuple(out))

"""Step-response receiver voltage in the time domain.

For a transmitter current ``I0 u(t)`` the Laplace-domain voltage is
``G(s) = sum_i c_i R(q_i, s)`` (see :class:`~pectube.forward_model.ModalSum`).
``G`` tends to a constant ``G_inf`` as ``s -> inf``; that constant is an
impulse at ``t = 0`` and is removed before inversion, so all methods return
the voltage for ``t > 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DegeneratePoleError,
    DomainError,
    NoModeError,
    NonFiniteError,
    UnsupportedTopologyError,
)
from .forward_model import ModalSum, ProbeAssembly, TruncatedDomain
from .laplace_inversion import (
    DEFAULT_STEHFEST_N,
    NiltPlan,
    PoleSet,
    nilt_fft,
    stehfest_invert,
    stehfest_weights,
)
from .layered_medium import AIR, MU0, LayerStack, reflection, reflection_limit

__all__ = [
    "METHODS",
    "InversionOptions",
    "TransientResult",
    "DominantMode",
    "transition_time",
    "pole_scan_step",
    "mode_poles",
    "transient_voltage",
    "dominant_mode",
    "thinning_scenarios",
    "log_times",
    "leading_pole",
    "scan_floor",
]

METHODS = ("stehfest", "nilt", "poles", "hybrid")


@dataclass(frozen=True)
class InversionOptions:
    """Tuning knobs for :func:`transient_voltage`.

    ``t_split`` overrides the hybrid switch time (default: :func:`transition_time`).
    """

    stehfest_n: int = DEFAULT_STEHFEST_N
    poles_per_mode: int = 1
    nilt_samples: int = 1024
    nilt_depth: int = 6
    t_split: float | None = None

    def __post_init__(self):
        stehfest_weights(self.stehfest_n)  # validates n
        if self.poles_per_mode < 1:
            raise DomainError("poles_per_mode must be >= 1")
        NiltPlan(1.0, self.nilt_samples, None, self.nilt_depth)
        if self.t_split is not None and not self.t_split > 0:
            raise DomainError("t_split must be positive")


@dataclass
class TransientResult:
    times: np.ndarray
    voltage: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.voltage = np.asarray(self.voltage, dtype=float)
        if self.times.shape != self.voltage.shape or self.times.ndim != 1:
            raise DomainError("times and voltage must be 1-D and of equal length")
        if not np.all(np.isfinite(self.voltage)):
            raise NonFiniteError("transient voltage is not finite")


@dataclass(frozen=True)
class DominantMode:
    """Single-term long-time model ``V(t) = amplitude * exp(rate * t)``."""

    amplitude: float
    rate: float

    def __post_init__(self):
        if not self.rate < 0:
            raise DomainError("dominant rate must be negative")

    @property
    def log10_intercept(self) -> float:
        return math.log10(abs(self.amplitude))

    @property
    def log10_slope(self) -> float:
        return self.rate / math.log(10.0)

    def __call__(self, t):
        return self.amplitude * np.exp(self.rate * np.asarray(t, dtype=float))


def transition_time(stack: LayerStack) -> float:
    """``mu0 mu_r sigma b^2`` with ``b`` the total conductive wall thickness.

    With layers of different materials the largest ``mu_r sigma`` is used,
    which gives the latest (conservative) switch time.  Zero for all-air.
    """
    idx = stack.conductive_indices()
    if not idx:
        return 0.0
    b = sum(stack.thickness(i) for i in idx)
    return max(MU0 * stack.layers[i].mu_r * stack.layers[i].sigma for i in idx) * b * b


def pole_scan_step(stack: LayerStack) -> float:
    """Scan step: diffusion-mode spacing of the thinnest wall over 8."""
    idx = stack.conductive_indices()
    if not idx:
        raise NoModeError("stack has no conductive layer")
    return min(
        math.pi**2 / (MU0 * stack.layers[i].mu_r * stack.layers[i].sigma * stack.thickness(i) ** 2)
        for i in idx
    ) / 8.0


def log_times(t_start: float, t_stop: float, n: int = 200) -> np.ndarray:
    if not 0 < t_start < t_stop or n < 2:
        raise DomainError("need 0 < t_start < t_stop and n >= 2")
    return np.geomspace(t_start, t_stop, n)


# -- poles ---------------------------------------------------------------------

def _den(stack, q, s):
    return np.real(reflection(q, s, stack).denominator)


def mode_poles(stack: LayerStack, q, s_min: float, max_per_mode: int = 1,
               step: float | None = None, rtol: float = 1e-12) -> list[PoleSet]:
    """Poles and residues of ``R(q_i, s)`` on ``[s_min, 0)`` for every ``q_i``.

    Vectorized over modes: one scan of the reflection denominator on a
    common grid, then simultaneous bisection of all brackets.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if not s_min < 0:
        raise DomainError("s_min must be negative")
    if step is None:
        step = pole_scan_step(stack)
    n_grid = int(math.ceil(-s_min / step))
    grid = -step * np.arange(n_grid + 1)
    grid[-1] = s_min
    f = _den(stack, q[:, None], grid[None, :])
    if not np.all(np.isfinite(f)):
        raise NonFiniteError("reflection denominator not finite on the scan grid")

    pos = f > 0
    change = pos[:, 1:] != pos[:, :-1]
    mode_idx, cell = [], []
    for i in range(len(q)):
        cells = np.flatnonzero(change[i])[:max_per_mode]
        mode_idx.extend([i] * len(cells))
        cell.extend(cells)
    if not mode_idx:
        return [PoleSet() for _ in q]
    mode_idx = np.array(mode_idx)
    cell = np.array(cell)
    qb = q[mode_idx]
    hi = grid[cell]
    lo = grid[cell + 1]
    pos_lo = pos[mode_idx, cell + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        done = (hi - lo) <= rtol * np.abs(mid)
        if np.all(done):
            break
        f_mid = _den(stack, qb, mid)
        same = (f_mid > 0) == pos_lo
        lo = np.where(done | ~same, lo, mid)
        hi = np.where(done | same, hi, mid)
    roots = 0.5 * (lo + hi)

    # residues R1 / R2' with a Richardson-refined central difference
    delta = np.maximum(1e-7 * np.abs(roots), 1e-9)
    qq = np.concatenate([qb] * 4)
    ss = np.concatenate([roots + delta, roots - delta, roots + delta / 2, roots - delta / 2])
    vals = _den(stack, qq, ss).reshape(4, -1)
    steps = ss.reshape(4, -1)
    d1 = (vals[0] - vals[1]) / (steps[0] - steps[1])
    d2 = (vals[2] - vals[3]) / (steps[2] - steps[3])
    deriv = (4 * d2 - d1) / 3
    # same degeneracy scale as laplace_inversion.residues
    size = np.maximum(np.abs(vals[0]), np.abs(vals[1]))
    scale = size * np.maximum(np.abs(roots), delta) / delta**2
    bad = np.abs(deriv) < 1e3 * np.finfo(float).eps * scale
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise DegeneratePoleError(f"non-simple pole at s={roots[k]!r} (q={qb[k]!r})")
    num = reflection(qb, roots, stack).numerator
    res = num / deriv

    out = []
    for i in range(len(q)):
        sel = mode_idx == i
        order = np.argsort(-roots[sel], kind="stable")
        out.append(PoleSet(tuple(float(x) for x in roots[sel][order]),
                           tuple(complex(x) for x in res[sel][order])))
    return out


# -- inversion drivers -----------------------------------------------------------

def _nilt_on(F, times, opts: InversionOptions):
    """NILT on arbitrary times: one FFT window per ~1.3 decades, spline-read.

    The series period is ``2 t_max``, so a contour shift of
    ``-ln(1e-8) / (2 t_max)`` already bounds aliasing at 1e-8 of the
    (decaying) signal; the smaller shift amplifies truncation error far
    less at the end of the window, where the signal is smallest.
    """
    times = np.asarray(times, dtype=float)
    out = np.empty_like(times)
    todo = np.ones(times.shape, dtype=bool)
    while np.any(todo):
        t_top = times[todo].max()
        t_max = t_top / 0.95
        shift = -math.log(1e-8) / (2.0 * t_max)
        plan = NiltPlan(t_max, opts.nilt_samples, shift, opts.nilt_depth)
        t, f = nilt_fft(F, plan)
        sel = todo & (times >= 0.05 * plan.t_max)
        out[sel] = CubicSpline(t, f)(times[sel])
        todo &= ~sel
    return out


def _leading(stack: LayerStack, q: float) -> PoleSet:
    step = pole_scan_step(stack)
    s_min = -64 * step
    for _ in range(12):
        ps = mode_poles(stack, [q], s_min, 1, step)[0]
        if len(ps):
            return ps
        s_min *= 4
    raise NoModeError(f"no pole found for q={q!r}")


def leading_pole(stack: LayerStack, q: float) -> float:
    """Least-negative pole of ``R(q, s)``, by an expanding scan."""
    return _leading(stack, q).poles[0]


def scan_floor(stack: LayerStack, q, t_min: float) -> float:
    """Lower end of the pole scan for samples at ``t >= t_min``.

    Poles below the returned value have decayed by more than 1e-6
    relative to the slowest pole (that of the lowest mode) at ``t_min``.
    """
    if not t_min > 0:
        raise DomainError("t_min must be positive")
    return leading_pole(stack, float(np.min(q))) - math.log(1e6) / t_min


def _pole_sum(model: ModalSum, stack, times, opts: InversionOptions, meta: dict):
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.zeros(0)
    s_min = scan_floor(stack, model.q, times.min())
    meta["scan_floor"] = s_min
    sets = mode_poles(stack, model.q, s_min, opts.poles_per_mode)
    v = np.zeros(times.shape)
    for c, ps in zip(model.weights, sets):
        v += c * ps.evaluate(times)
    counts = [len(ps) for ps in sets]
    meta["pole_counts"] = counts
    empty = [i + 1 for i, n in enumerate(counts) if n == 0]
    if empty:
        meta.setdefault("warnings", []).append(
            f"no pole in [{s_min:.6g}, 0) for modes {empty}; they contribute 0"
        )
    return v


def transient_voltage(assembly: ProbeAssembly, stack: LayerStack, domain: TruncatedDomain,
                      times, method: str = "hybrid",
                      options: InversionOptions | None = None) -> TransientResult:
    """Receiver voltage for a step of ``assembly.drive_amplitude`` amperes.

    Parameters
    ----------
    times : array_like
        Strictly increasing positive sample times [s].
    method : {"stehfest", "nilt", "poles", "hybrid"}
        ``hybrid`` uses Stehfest before the transition time and poles after.
    """
    opts = options or InversionOptions()
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; choose from {METHODS}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a non-empty 1-D array")
    if np.any(~np.isfinite(times)) or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise DomainError("times must be positive and strictly increasing")
    assembly.check_inside(stack)
    assembly.check_domain(domain)

    t_m = transition_time(stack)
    meta = {"h": domain.h, "n_modes": domain.n_modes, "t_m": t_m, "pole_counts": None}
    if stack.all_air:
        return TransientResult(times, np.zeros_like(times), method, meta)

    model = ModalSum(assembly, stack, domain)
    g_inf = float(np.sum(model.weights * reflection_limit(model.q, stack)))

    def F(s):
        return model(s) - g_inf

    if method == "stehfest":
        v = stehfest_invert(F, times, stehfest_weights(opts.stehfest_n))
    elif method == "nilt":
        v = _nilt_on(F, times, opts)
    elif method == "poles":
        v = _pole_sum(model, stack, times, opts, meta)
    else:
        split = opts.t_split if opts.t_split is not None else t_m
        meta["t_split"] = split
        early = times < split
        v = np.empty_like(times)
        if np.any(early):
            v[early] = stehfest_invert(F, times[early], stehfest_weights(opts.stehfest_n))
        if np.any(~early):
            v[~early] = _pole_sum(model, stack, times[~early], opts, meta)
    for w in meta.get("warnings", []):
        warnings.warn(w, RuntimeWarning, stacklevel=2)
    return TransientResult(times, v, method, meta)


def dominant_mode(assembly: ProbeAssembly, stack: LayerStack,
                  domain: TruncatedDomain) -> DominantMode:
    """Least-negative pole of the first mode and its term of the voltage sum."""
    assembly.check_inside(stack)
    assembly.check_domain(domain)
    if stack.all_air:
        raise NoModeError("stack has no conductive layer")
    model = ModalSum(assembly, stack, domain)
    ps = _leading(stack, model.q[0])
    return DominantMode(float(model.weights[0] * np.real(ps.residues[0])), ps.poles[0])


# -- wall thinning ---------------------------------------------------------------

def _merge(layers, radii):
    """Drop interfaces between identical neighbours, including the coil region."""
    layers = list(layers) + [AIR]
    radii = list(radii)
    keep_l, keep_r = [layers[0]], []
    for k in range(1, len(layers)):
        if layers[k] == keep_l[-1]:
            continue
        keep_r.append(radii[k - 1])
        keep_l.append(layers[k])
    return LayerStack(keep_l[:-1], keep_r)


def thinning_scenarios(base_stack: LayerStack, fraction: float) -> list[tuple[str, LayerStack]]:
    """Wall-loss variants of a two-tube stack.

    Each of the four tube faces in turn is moved into its wall by
    ``fraction`` of the wall thickness; then each tube is removed outright.
    """
    if not 0 < fraction < 1:
        raise DomainError("fraction must lie in (0, 1)")
    idx = base_stack.conductive_indices()
    if len(idx) != 2 or 0 in idx:
        raise UnsupportedTopologyError("thinning variants need exactly two bounded conductive tubes")
    outer, inner = idx
    layers, radii = list(base_stack.layers), list(base_stack.radii)

    def moved(face, sign, k):
        r = list(radii)
        r[face] += sign * fraction * base_stack.thickness(k)
        return LayerStack(layers, r)

    def absent(k):
        ls = list(layers)
        ls[k] = AIR
        return _merge(ls, radii)

    return [
        ("outer_od", moved(outer - 1, -1, outer)),
        ("outer_id", moved(outer, +1, outer)),
        ("inner_od", moved(inner - 1, -1, inner)),
        ("inner_id", moved(inner, +1, inner)),
        ("outer_absent", absent(outer)),
        ("inner_absent", absent(inner)),
    ]

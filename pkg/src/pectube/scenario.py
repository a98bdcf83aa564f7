"""Scenario files: probe, tube stack, truncation and inversion settings.

Scenarios are TOML.  Lengths are in ``units`` ("m" or "mm"); everything
else is SI.  Layers are listed outermost first, starting with the
unbounded outer region, and ``radii`` gives the interface radii in the
same order.  Example::

    units = "mm"

    [transmitter]
    r1 = 20.0
    r2 = 30.0
    length = 40.0
    turns = 1600

    [receiver]
    r1 = 20.0
    r2 = 30.0
    length = 10.0
    turns = 10000

    [placement]
    gap = 10.0

    [stack]
    radii = [70.0, 60.0, 50.0, 40.0]
    sigma = [0.0, 3.0e6, 0.0, 3.0e6]
    mu_r = [1.0, 100.0, 1.0, 100.0]

    [domain]
    h = "auto"
    modes = 50
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import (
    InvariantError,
    PectubeError,
    ScenarioNotFoundError,
    ScenarioSyntaxError,
    UnknownKeyError,
)
from .forward_model import CoilSpec, ProbeAssembly, TruncatedDomain, default_h, place_coils
from .layered_medium import Layer, LayerStack
from .transient import METHODS, InversionOptions, log_times, transition_time

__all__ = [
    "CoilGeometry",
    "OutputSettings",
    "Scenario",
    "parse_scenario",
    "loads_scenario",
    "dumps_scenario",
    "shipped_scenarios",
    "shipped_path",
]

_SCALE = {"m": 1.0, "mm": 1000.0}


@dataclass(frozen=True)
class CoilGeometry:
    """Coil before axial placement (meters)."""

    r1: float
    r2: float
    length: float
    turns: float

    def at(self, z1: float) -> CoilSpec:
        return CoilSpec(self.r1, self.r2, z1, z1 + self.length, self.turns)


@dataclass(frozen=True)
class OutputSettings:
    """Sample grids.  ``None`` bounds are derived from the transition time."""

    t_start: float | None = None
    t_stop: float | None = None
    n_times: int = 200
    f_start: float = 1.0
    f_stop: float = 1.0e4
    n_freqs: int = 41
    validate_freqs: tuple[float, ...] = (10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class Scenario:
    transmitter: CoilGeometry
    receiver: CoilGeometry
    gap: float
    stack: LayerStack
    h: float | None  # None means automatic
    n_modes: int = 50
    drive_amplitude: float = 1.0
    method: str = "hybrid"
    inversion: InversionOptions = field(default_factory=InversionOptions)
    output: OutputSettings = field(default_factory=OutputSettings)

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvariantError(f"method must be one of {METHODS}", key="inversion.method")
        if not (math.isfinite(self.gap) and self.gap >= 0):
            raise InvariantError("gap must be >= 0", key="placement.gap")
        if not (math.isfinite(self.drive_amplitude) and self.drive_amplitude > 0):
            raise InvariantError("amplitude must be positive", key="drive.amplitude")
        # resolve eagerly so invalid geometry fails at parse time
        self.assembly.check_inside(self.stack)
        self.assembly.check_domain(self.domain)

    @property
    def resolved_h(self) -> float:
        if self.h is not None:
            return self.h
        return default_h(self.stack, self.transmitter.at(1.0))

    @property
    def domain(self) -> TruncatedDomain:
        return TruncatedDomain(self.resolved_h, self.n_modes)

    @property
    def assembly(self) -> ProbeAssembly:
        h = self.resolved_h
        try:
            z1t, _, z1r, _ = place_coils(h, self.transmitter.length, self.receiver.length, self.gap)
        except PectubeError as exc:
            raise InvariantError(str(exc), key="domain.h") from None
        return ProbeAssembly(self.transmitter.at(z1t), self.receiver.at(z1r), self.drive_amplitude)

    def times(self):
        t_m = transition_time(self.stack)
        o = self.output
        t0 = o.t_start if o.t_start is not None else t_m / 1000
        t1 = o.t_stop if o.t_stop is not None else 3 * t_m
        if not 0 < t0 < t1:
            raise InvariantError("time window undefined; set output.t_start and output.t_stop",
                                 key="output.t_start")
        return log_times(t0, t1, o.n_times)

    def with_overrides(self, *, h="keep", n_modes=None, method=None,
                       poles_per_mode=None, stehfest_n=None) -> "Scenario":
        inv = self.inversion
        try:
            if poles_per_mode is not None:
                inv = replace(inv, poles_per_mode=poles_per_mode)
            if stehfest_n is not None:
                inv = replace(inv, stehfest_n=stehfest_n)
        except InvariantError:
            raise
        except PectubeError as exc:
            raise InvariantError(str(exc), key="inversion") from None
        return replace(
            self,
            h=self.h if h == "keep" else h,
            n_modes=self.n_modes if n_modes is None else n_modes,
            method=self.method if method is None else method,
            inversion=inv,
        )


# -- parsing ------------------------------------------------------------------

_SCHEMA = {
    "units": None,
    "transmitter": {"r1", "r2", "length", "turns"},
    "receiver": {"r1", "r2", "length", "turns"},
    "placement": {"gap"},
    "stack": {"radii", "sigma", "mu_r"},
    "domain": {"h", "modes"},
    "drive": {"type", "amplitude"},
    "inversion": {"method", "stehfest_n", "poles_per_mode", "nilt_samples", "nilt_depth",
                  "t_split"},
    "output": {"t_start", "t_stop", "n_times", "f_start", "f_stop", "n_freqs",
               "validate_freqs"},
}
_REQUIRED = ("transmitter", "receiver", "placement", "stack")


def _check_keys(doc: dict):
    for key, val in doc.items():
        if key not in _SCHEMA:
            raise UnknownKeyError(f"unknown key {key!r}")
        allowed = _SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(val, dict):
            raise InvariantError(f"{key!r} must be a table", key=key)
        for sub in val:
            if sub not in allowed:
                raise UnknownKeyError(f"unknown key '{key}.{sub}'")


def _get(table: dict, section: str, key: str, kind=float, default=...):
    if key not in table:
        if default is ...:
            raise InvariantError(f"missing key '{section}.{key}'", key=f"{section}.{key}")
        return default
    val = table[key]
    try:
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise ValueError
            return int(val)
        if kind is float:
            if isinstance(val, (bool, str)):
                raise ValueError
            out = float(val)
            if not math.isfinite(out):
                raise ValueError
            return out
        if kind is str:
            if not isinstance(val, str):
                raise ValueError
            return val
    except (TypeError, ValueError):
        raise InvariantError(f"'{section}.{key}' has invalid value {val!r}",
                             key=f"{section}.{key}") from None
    raise AssertionError(kind)


def _float_list(table, section, key, scale=1.0):
    val = table.get(key)
    if not isinstance(val, list) or not val:
        raise InvariantError(f"'{section}.{key}' must be a non-empty list", key=key)
    out = []
    for v in val:
        if isinstance(v, (bool, str)) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise InvariantError(f"'{section}.{key}' has invalid entry {v!r}", key=key)
        out.append(float(v) / scale)
    return out


def _build(doc: dict) -> Scenario:
    if not doc:
        raise ScenarioSyntaxError("empty scenario")
    _check_keys(doc)
    for sec in _REQUIRED:
        if sec not in doc:
            raise InvariantError(f"missing section [{sec}]", key=sec)
    units = doc.get("units", "m")
    if units not in _SCALE:
        raise InvariantError(f"units must be 'm' or 'mm', got {units!r}", key="units")
    k = _SCALE[units]

    def coil(sec):
        t = doc[sec]
        r1 = _get(t, sec, "r1") / k
        r2 = _get(t, sec, "r2") / k
        length = _get(t, sec, "length") / k
        turns = _get(t, sec, "turns")
        try:
            CoilSpec(r1, r2, 1.0, 1.0 + length, turns)
        except InvariantError as exc:
            raise InvariantError(str(exc), key=f"{sec}.{exc.key}") from None
        return CoilGeometry(r1, r2, length, turns)

    st = doc["stack"]
    radii = _float_list(st, "stack", "radii", k)
    sigma = _float_list(st, "stack", "sigma")
    mu_r = _float_list(st, "stack", "mu_r") if "mu_r" in st else [1.0] * len(sigma)
    if not len(radii) == len(sigma) == len(mu_r):
        raise InvariantError("stack.radii, stack.sigma and stack.mu_r differ in length",
                             key="layers")
    try:
        layers = [Layer(s, m) for s, m in zip(sigma, mu_r)]
    except InvariantError as exc:
        raise InvariantError(str(exc), key="layers") from None
    stack = LayerStack(layers, radii)

    dom = doc.get("domain", {})
    h_raw = dom.get("h", "auto")
    if h_raw == "auto":
        h = None
    else:
        h = _get(dom, "domain", "h") / k
        if not h > 0:
            raise InvariantError("domain.h must be positive", key="domain.h")

    drive = doc.get("drive", {})
    if _get(drive, "drive", "type", str, "step") != "step":
        raise InvariantError("only step drive is supported", key="drive.type")

    inv_t = doc.get("inversion", {})
    defaults = InversionOptions()
    t_split = inv_t.get("t_split")
    try:
        inversion = InversionOptions(
            stehfest_n=_get(inv_t, "inversion", "stehfest_n", int, defaults.stehfest_n),
            poles_per_mode=_get(inv_t, "inversion", "poles_per_mode", int,
                                defaults.poles_per_mode),
            nilt_samples=_get(inv_t, "inversion", "nilt_samples", int, defaults.nilt_samples),
            nilt_depth=_get(inv_t, "inversion", "nilt_depth", int, defaults.nilt_depth),
            t_split=None if t_split is None else _get(inv_t, "inversion", "t_split"),
        )
    except InvariantError:
        raise
    except PectubeError as exc:
        raise InvariantError(str(exc), key="inversion") from None

    out_t = doc.get("output", {})
    od = OutputSettings()
    vf = out_t.get("validate_freqs")
    output = OutputSettings(
        t_start=_get(out_t, "output", "t_start", float, None),
        t_stop=_get(out_t, "output", "t_stop", float, None),
        n_times=_get(out_t, "output", "n_times", int, od.n_times),
        f_start=_get(out_t, "output", "f_start", float, od.f_start),
        f_stop=_get(out_t, "output", "f_stop", float, od.f_stop),
        n_freqs=_get(out_t, "output", "n_freqs", int, od.n_freqs),
        validate_freqs=od.validate_freqs if vf is None
        else tuple(_float_list(out_t, "output", "validate_freqs")),
    )
    if output.n_times < 2 or output.n_freqs < 2:
        raise InvariantError("n_times and n_freqs must be >= 2", key="output")
    if not 0 < output.f_start < output.f_stop:
        raise InvariantError("need 0 < f_start < f_stop", key="output.f_start")

    return Scenario(
        transmitter=coil("transmitter"),
        receiver=coil("receiver"),
        gap=_get(doc["placement"], "placement", "gap") / k,
        stack=stack,
        h=h,
        n_modes=_get(dom, "domain", "modes", int, 50),
        drive_amplitude=_get(drive, "drive", "amplitude", float, 1.0),
        method=_get(inv_t, "inversion", "method", str, "hybrid"),
        inversion=inversion,
        output=output,
    )


def loads_scenario(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioSyntaxError(f"malformed scenario: {exc}") from None
    try:
        return _build(doc)
    except PectubeError:
        raise
    except (TypeError, ValueError) as exc:
        raise InvariantError(str(exc)) from None


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    ``path`` may also be the name of a shipped scenario (see
    :func:`shipped_scenarios`).
    """
    p = Path(path)
    if not p.exists() and str(path) in shipped_scenarios():
        p = shipped_path(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ScenarioNotFoundError(f"no such scenario file: {path}") from None
    except (IsADirectoryError, PermissionError, UnicodeDecodeError) as exc:
        raise ScenarioNotFoundError(f"cannot read scenario {path}: {exc}") from None
    return loads_scenario(text)


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def dumps_scenario(sc: Scenario) -> str:
    """Serialize in SI units; :func:`loads_scenario` inverts this exactly."""
    coil = lambda c: {"r1": c.r1, "r2": c.r2, "length": c.length, "turns": c.turns}  # noqa: E731
    o, inv = sc.output, sc.inversion
    doc = {
        "units": "m",
        "transmitter": coil(sc.transmitter),
        "receiver": coil(sc.receiver),
        "placement": {"gap": sc.gap},
        "stack": {
            "radii": list(sc.stack.radii),
            "sigma": [layer.sigma for layer in sc.stack.layers],
            "mu_r": [layer.mu_r for layer in sc.stack.layers],
        },
        "domain": {"h": "auto" if sc.h is None else sc.h, "modes": sc.n_modes},
        "drive": {"type": "step", "amplitude": sc.drive_amplitude},
        "inversion": _drop_none({
            "method": sc.method,
            "stehfest_n": inv.stehfest_n,
            "poles_per_mode": inv.poles_per_mode,
            "nilt_samples": inv.nilt_samples,
            "nilt_depth": inv.nilt_depth,
            "t_split": inv.t_split,
        }),
        "output": _drop_none({
            "t_start": o.t_start,
            "t_stop": o.t_stop,
            "n_times": o.n_times,
            "f_start": o.f_start,
            "f_stop": o.f_stop,
            "n_freqs": o.n_freqs,
            "validate_freqs": list(o.validate_freqs),
        }),
    }
    return tomli_w.dumps(doc)


def shipped_scenarios() -> list[str]:
    root = resources.files("pectube") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def shipped_path(name: str) -> Path:
    p = resources.files("pectube") / "scenarios" / f"{name}.toml"
    if not p.is_file():
        raise ScenarioNotFoundError(f"no shipped scenario named {name!r}")
    return Path(str(p))

"""Command-line front end.

Usage::

    pectube transient  --config table1_carbon --method hybrid --out v.csv
    pectube poles      --config table1_stainless --poles-per-mode 3
    pectube freq-sweep --config my.toml --modes 100
    pectube compare    --config table1_carbon --h 4.0
    pectube validate   --config table1_carbon --modes 200

Exit status is 0 on success, 10-19 for scenario errors, 20-29 for numerical
failures and 30-39 for output errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .errors import AccuracyError, NoModeError, NonFiniteError, OutputError, PectubeError
from .forward_model import eigenvalues, voltage_integral, voltage_sum
from .scenario import Scenario, parse_scenario
from .transient import METHODS, mode_poles, scan_floor, transient_voltage, transition_time

__all__ = ["main", "build_parser", "write_csv", "format_csv"]

COMMANDS = ("transient", "poles", "freq-sweep", "compare", "validate")


# -- CSV ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.16e}"


def format_csv(header, columns) -> str:
    """Header plus rows, 17 significant digits, LF endings.

    Raises
    ------
    NonFiniteError
        If any value is NaN or infinite.
    """
    cols = [np.asarray(c) for c in columns]
    n = {len(c) for c in cols}
    if len(n) > 1 or len(cols) != len(header):
        raise ValueError("ragged CSV columns")
    for name, c in zip(header, cols):
        if c.dtype.kind == "f" and not np.all(np.isfinite(c)):
            raise NonFiniteError(f"refusing to write non-finite values in column {name!r}")
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(header, columns, path) -> None:
    """Write atomically: nothing is left at ``path`` if anything fails.

    ``path`` of ``None`` or ``"-"`` writes to standard output.
    """
    text = format_csv(header, columns)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        Path(tmp).unlink(missing_ok=True)
        raise OutputError(f"cannot write {path}: {exc}") from None


# -- commands ------------------------------------------------------------------------

def _rel_dev(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    den = np.maximum(np.abs(a), np.abs(b))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, np.abs(a - b) / den, 0.0)


def cmd_transient(sc: Scenario, args):
    res = transient_voltage(sc.assembly, sc.stack, sc.domain, sc.times(), sc.method, sc.inversion)
    write_csv(("t_s", "V_volts"), (res.times, res.voltage), args.out)


def cmd_poles(sc: Scenario, args):
    t_m = transition_time(sc.stack)
    t_min = sc.output.t_start if sc.output.t_start is not None else t_m
    if not t_min or t_min <= 0:
        raise NoModeError("no conductive layer: nothing to extract")
    q = eigenvalues(sc.domain)
    sets = mode_poles(sc.stack, q, scan_floor(sc.stack, q, t_min), sc.inversion.poles_per_mode)
    mode_i, qs, poles, res = [], [], [], []
    for i, (qi, ps) in enumerate(zip(q, sets), start=1):
        for p, a in zip(ps.poles, ps.residues):
            mode_i.append(i)
            qs.append(qi)
            poles.append(p)
            res.append(a.real)
    write_csv(("mode_i", "q_i_per_m", "pole_per_s", "residue"),
              (np.array(mode_i, dtype=int), qs, poles, res), args.out)


def cmd_freq_sweep(sc: Scenario, args):
    o = sc.output
    f = np.geomspace(o.f_start, o.f_stop, o.n_freqs)
    v = voltage_sum(2j * np.pi * f, sc.assembly, sc.stack, sc.domain)
    write_csv(("f_hz", "reV_volts", "imV_volts"), (f, np.real(v), np.imag(v)), args.out)


def cmd_compare(sc: Scenario, args):
    t = sc.times()
    out = {}
    for m in ("stehfest", "nilt", "poles"):
        out[m] = transient_voltage(sc.assembly, sc.stack, sc.domain, t, m, sc.inversion).voltage
    write_csv(
        ("t_s", "V_stehfest", "V_nilt", "V_poles", "dev_sp", "dev_np"),
        (t, out["stehfest"], out["nilt"], out["poles"],
         _rel_dev(out["stehfest"], out["poles"]), _rel_dev(out["nilt"], out["poles"])),
        args.out,
    )


def cmd_validate(sc: Scenario, args):
    worst = 0.0
    lines = ["f_hz,rel_error"]
    for f in sc.output.validate_freqs:
        w = 2 * np.pi * f
        vs = voltage_sum(1j * w, sc.assembly, sc.stack, sc.domain)
        vi = voltage_integral(w, sc.assembly, sc.stack)
        err = 0.0 if vi == 0 and vs == 0 else abs(vs - vi) / abs(vi)
        worst = max(worst, err)
        lines.append(f"{_fmt(f)},{_fmt(err)}")
    print("\n".join(lines))
    if args.tol is not None and worst > args.tol:
        raise AccuracyError(f"sum/integral mismatch {worst:.3e} exceeds {args.tol:g}")


_HANDLERS = {
    "transient": cmd_transient,
    "poles": cmd_poles,
    "freq-sweep": cmd_freq_sweep,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


# -- argument parsing ------------------------------------------------------------------

def _h_arg(text: str):
    if text == "auto":
        return text
    try:
        h = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected meters or 'auto'") from None
    if not (math.isfinite(h) and h > 0):
        raise argparse.ArgumentTypeError("h must be positive")
    return h


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pectube",
        description="Transient eddy-current response of coaxial probes in layered tubes.",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True,
                    help="scenario TOML file or name of a shipped scenario")
    ap.add_argument("--method", choices=METHODS, help="inversion method (transient)")
    ap.add_argument("--out", help="output CSV path (default: stdout)")
    ap.add_argument("--modes", type=int, help="number of axial modes M")
    ap.add_argument("--h", type=_h_arg, help="truncation length in meters, or auto")
    ap.add_argument("--poles-per-mode", type=int)
    ap.add_argument("--stehfest-n", type=int)
    ap.add_argument("--tol", type=float, help="validate: fail if the relative error exceeds this")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.config).with_overrides(
            h={None: "keep", "auto": None}.get(args.h, args.h), n_modes=args.modes, method=args.method,
            poles_per_mode=args.poles_per_mode, stehfest_n=args.stehfest_n,
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            _HANDLERS[args.command](sc, args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except PectubeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Curves and drivers travel as CSV, fields, configs and reports as JSON.  Exit
status is 0 on success, 2 when an input fails validation and 3 when a
numerical step does not converge (anything already computed is still
written).
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import __version__, catalog
from .beltrami import BeltramiField, deform_points
from .energy import dirichlet_energy, liouville_action, loop_energy
from .errors import NotConvergedWarning, NotSimple, NumericalError, ValidationError
from .loewner_chain import ChordSample, DrivingFunction, points_from_csv, points_to_csv, trace_forward
from .variation import THEOREMS, run_verification
from .zipper import JordanCurveSample, extract_driving, jordan_maps

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json_arg(value: str | None) -> dict:
    if not value:
        return {}
    p = Path(value)
    return json.loads(p.read_text() if p.exists() else value)


def _driver(spec: str, params: dict, dt: float | None = None) -> DrivingFunction:
    p = Path(spec)
    if p.suffix == ".csv" or p.exists():
        return DrivingFunction.from_csv(p.read_text())
    params = dict(params)
    if dt is not None:
        params.setdefault("N", int(round(float(params.get("T", 1.0)) / dt)))
    return catalog.make_driver(spec, params)


def _field(spec: str, params: dict) -> BeltramiField:
    p = Path(spec)
    if p.exists():
        return BeltramiField.from_json(p.read_text())
    return catalog.make_field(spec, params)


def _report(command: str, args, payload) -> str:
    snapshot = {k: v for k, v in vars(args).items() if k != "func"}
    return json.dumps({"command": command, "config": snapshot, "version": __version__, "result": payload},
                      sort_keys=True, indent=2)


def cmd_trace(a) -> None:
    drv = _driver(a.driver, _json_arg(a.params), a.dt)
    bundle = trace_forward(drv, a.dt)
    _emit(bundle.chord.to_csv(), a.out)


def cmd_extract(a) -> None:
    chord = ChordSample(points_from_csv(Path(a.curve).read_text()))
    bundle = extract_driving(chord)
    _emit(bundle.driver.to_csv(), a.out)


def cmd_deform(a) -> None:
    pts = points_from_csv(Path(a.curve).read_text())
    curve = JordanCurveSample(pts) if a.closed else ChordSample(pts)
    if a.field in catalog.FIELDS:
        nu = catalog.make_field(a.field, _json_arg(a.params), curve=curve)
    else:
        nu = _field(a.field, {})
    _emit(points_to_csv(deform_points(curve.points, nu, a.eps)), a.out)


def cmd_energy(a) -> None:
    if a.driver:
        value = dirichlet_energy(_driver(a.driver, _json_arg(a.params)))
        breakdown = {}
    else:
        rep = loop_energy(JordanCurveSample(points_from_csv(Path(a.curve).read_text())))
        value, breakdown = rep.value, rep.breakdown
    print(repr(float(value)))
    if a.out:
        _emit(_report("energy", a, {"value": value, "breakdown": breakdown}), a.out)


def cmd_liouville(a) -> None:
    rep = liouville_action(jordan_maps(JordanCurveSample(points_from_csv(Path(a.curve).read_text()))))
    _emit(_report("liouville", a, rep.to_json()), a.out)


def cmd_verify(a) -> None:
    cfg = _json_arg(a.config)
    reports = run_verification(a.theorem, cfg)
    _emit(json.dumps({"theorem": a.theorem, "config": cfg, "version": __version__,
                      "reports": [r.to_json() for r in reports]}, sort_keys=True, indent=2), a.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loewnerqc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="trace the chord of a driver")
    p.add_argument("--driver", required=True, help="registered driver name or driver CSV")
    p.add_argument("--params", help="driver parameters (JSON text or file)")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("extract", help="driving function of a chord CSV")
    p.add_argument("--curve", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("deform", help="move curve points by the first-order velocity of a field")
    p.add_argument("--curve", required=True)
    p.add_argument("--field", required=True, help="registered field name or field JSON")
    p.add_argument("--params", help="field parameters (JSON text or file)")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--closed", action="store_true", help="treat the curve as a Jordan curve")
    p.add_argument("--out")
    p.set_defaults(func=cmd_deform)

    p = sub.add_parser("energy", help="Dirichlet energy of a driver or loop energy of a closed curve")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--driver")
    g.add_argument("--curve")
    p.add_argument("--params", help="driver parameters (JSON text or file)")
    p.add_argument("--out", help="also write a JSON report")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("liouville", help="universal Liouville action of a closed curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_liouville)

    p = sub.add_parser("verify", help="compare a variational formula with its numerical oracle")
    p.add_argument("--theorem", required=True, choices=sorted(THEOREMS))
    p.add_argument("--config", help="JSON config (text or file)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NotConvergedWarning)
            args.func(args)
    except NotSimple as exc:
        print(f"error: {type(exc).__name__}: {exc}; vertices {list(exc.indices)}", file=sys.stderr)
        return EXIT_INVALID
    except (ValidationError, json.JSONDecodeError, FileNotFoundError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    flagged = [w for w in caught if issubclass(w.category, NotConvergedWarning)]
    for w in flagged:
        print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_NUMERICAL if flagged else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

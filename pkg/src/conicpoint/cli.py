"""Command-line front end.

Exit codes: 0 success, 2 schema error, 3 degenerate geometry, 4 estimation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .calibration import (
    CalibratingConic,
    CalibrationMatrix,
    angle_algebraic,
    angle_cross_ratio,
    calibrating_conic_from_k,
    conic_from_three_orthogonal_vps,
    k_from_calibrating_conic,
)
from .conformal import (
    PlaneAngleQuery,
    camera_tilt,
    conformal_point_from_k,
    conformal_point_from_known_angle,
    field_of_view,
    focal_conformal_method,
    focal_reflected_polar_method,
    plane_angle,
)
from .errors import EstimationError, GeometryError, SchemaError
from .matches import dump_match_file, load_match_file
from .odometry import OdometryConfig, run_sequence, sequence_horizon
from .overlay import heading_plot, report_overlay
from .projective import HomLine, HomPoint, join
from .synth import (
    PlanarMotionSpec,
    SyntheticCamera,
    generate_sequence,
    true_conformal_point,
    true_horizon,
)

EXIT_OK, EXIT_SCHEMA, EXIT_GEOMETRY, EXIT_ESTIMATION = 0, 2, 3, 4
METHODS = ("three-vp", "polar", "conformal", "angle")


# ---------------------------------------------------------------- io helpers

def load_schema(name: str) -> dict:
    text = resources.files("conicpoint").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, name: str) -> None:
    schema = load_schema(name)
    validator = jsonschema.validators.validator_for(schema)(schema)
    if validator.is_valid(doc):
        return
    exc = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
    raise SchemaError(f"{name}: {where}: {exc.message}")


def read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SchemaError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None


def _num(x: float, digits: int = 12) -> float:
    x = float(x)
    if not math.isfinite(x):
        return x
    r = float(f"{x:.{digits}g}")
    return 0.0 if r == 0 else r


def clean(obj, digits: int = 12):
    """Plain-JSON copy with numpy types removed and floats rounded to fixed precision."""
    if isinstance(obj, dict):
        return {str(k): clean(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [clean(v, digits) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj, digits)
    return obj


def dumps(doc) -> str:
    return json.dumps(clean(doc), sort_keys=True, indent=2) + "\n"


def emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def svg_path_for(args) -> str | None:
    if getattr(args, "svg", None):
        return args.svg
    if args.out:
        return str(Path(args.out).with_suffix(".svg"))
    return None


# ---------------------------------------------------------------- annotations

def _point(doc: dict, ref, what: str) -> HomPoint:
    if isinstance(ref, str):
        pts = doc.get("points") or {}
        if ref not in pts:
            raise SchemaError(f"annotation is missing points.{ref} (needed for {what})")
        ref = pts[ref]
    return HomPoint.from_xy(float(ref[0]), float(ref[1]))


def principal_point(doc: dict) -> HomPoint:
    pts = doc.get("points") or {}
    if "principal_point" in pts:
        return _point(doc, "principal_point", "principal point")
    return HomPoint.from_xy(doc["image"]["width"] / 2.0, doc["image"]["height"] / 2.0)


def annotation_horizon(doc: dict) -> HomLine | None:
    lines = doc.get("lines") or {}
    return HomLine(lines["horizon"]) if "horizon" in lines else None


def _xy(p: HomPoint) -> list[float]:
    return [float(v) for v in p.xy]


def calibrate(doc: dict, method: str, branch: str = "below") -> dict:
    """Calibration report for an annotation using the chosen construction."""
    if method not in METHODS:
        raise SchemaError(f"unknown method {method!r}")
    p = principal_point(doc)
    horizon = annotation_horizon(doc)
    cons = {"points": {"P": _xy(p)}, "segments": [], "circles": []}
    inter: dict = {}
    cp = None
    solutions = 1
    if method == "three-vp":
        vs = [_point(doc, n, "three-vp calibration") for n in ("v1", "v2", "v3")]
        cc = conic_from_three_orthogonal_vps(*vs)
        k = k_from_calibrating_conic(cc)
        k = CalibrationMatrix.square(k.focal, *cc.centre.xy)
        for name, v in zip(("V1", "V2", "V3"), vs):
            cons["points"][name] = _xy(v)
        cons["points"]["P"] = _xy(cc.centre)
        cons["segments"] += [["V1", "V2"], ["V2", "V3"], ["V3", "V1"]]
    elif method in ("polar", "conformal"):
        a = _point(doc, "v1", f"{method} calibration")
        b = _point(doc, "v2", f"{method} calibration")
        rp = focal_reflected_polar_method(a, b, p)
        cf = focal_conformal_method(a, b, p, branch)
        f = rp.f if method == "polar" else cf.f
        k = CalibrationMatrix.square(f, *p.xy)
        inter = {"x": rp.x, "h": rp.h, "a": cf.a, "b": cf.b, "d": cf.d}
        cons["points"].update(A=_xy(a), B=_xy(b), D=_xy(rp.foot), O=_xy(cf.foot),
                              C=_xy(cf.conformal_point.point))
        cons["segments"] += [["P", "A"], ["P", "D"], ["B", "D"], ["A", "B"], ["O", "C"], ["P", "O"]]
        if horizon is None:
            horizon, cp = cf.conformal_point.horizon, cf.conformal_point
    else:
        angles = doc.get("angles") or []
        if not angles:
            raise SchemaError("annotation is missing angles (needed for angle calibration)")
        spec = angles[0]
        a = _point(doc, spec["vp_a"], "angle calibration")
        b = _point(doc, spec["vp_b"], "angle calibration")
        sols = conformal_point_from_known_angle(a, b, p, math.radians(spec["theta_deg"]), branch)
        solutions = len(sols)
        best = sols[0]
        k = CalibrationMatrix.square(best.f, *p.xy)
        inter = {"a": best.a, "b": best.b, "d": best.d, "s": best.s}
        cons["points"].update(A=_xy(a), B=_xy(b), C=_xy(best.conformal_point.point))
        cons["points"]["O"] = [float(v) for v in _foot(p, best.conformal_point.horizon)]
        cons["segments"] += [["A", "B"], ["O", "C"], ["P", "O"]]
        cons["circles"].append({"centre": [float(v) for v in best.circle_centre], "radius": best.circle_radius})
        if horizon is None:
            horizon, cp = best.conformal_point.horizon, best.conformal_point
    if horizon is not None and cp is None:
        cp = conformal_point_from_k(horizon, k, branch)
    cc = calibrating_conic_from_k(k)
    coeffs = cc.conic.coefficients
    report = {
        "method": method,
        "image": dict(doc["image"]),
        "k": k.as_dict(),
        "f": k.focal,
        "principal_point": [k.px, k.py],
        "calibrating_conic": coeffs / np.linalg.norm(coeffs),
        "construction": cons,
    }
    if inter:
        report["intermediates"] = inter
    if method == "angle":
        report["solutions"] = solutions
    if horizon is not None:
        report["horizon"] = horizon.vec
        report["conformal_point"] = cp.xy
    report = clean(report)
    validate(report, "report")
    return report


def _foot(p: HomPoint, line: HomLine) -> np.ndarray:
    n = line.normal
    return p.xy - line.signed_distance(p) * n


def k_for_measure(doc: dict, method: str | None) -> CalibrationMatrix:
    if "focal" in doc:
        return CalibrationMatrix.square(float(doc["focal"]), *principal_point(doc).xy)
    if method is None:
        raise SchemaError("annotation is missing focal (or pass --method to calibrate first)")
    rep = calibrate(doc, method)
    k = rep["k"]
    return CalibrationMatrix(k["fx"], k["fy"], k["skew"], k["px"], k["py"])


def measure(doc: dict, method: str | None = None, branch: str = "below") -> dict:
    k = k_for_measure(doc, method)
    cc = calibrating_conic_from_k(k)
    horizon = annotation_horizon(doc)
    queries = doc.get("queries")
    if queries is None:
        queries = [{"type": "fov"}] + ([{"type": "tilt"}] if horizon is not None else [])
    out = []
    for idx, q in enumerate(queries):
        kind = q["type"]
        name = q.get("name", f"{kind}-{idx}")
        if kind == "fov":
            fov = field_of_view(cc, doc["image"]["width"], doc["image"]["height"])
            res = {f"{key}_deg": round(v, 3) for key, v in fov.degrees().items()}
        elif kind == "tilt":
            if horizon is None:
                raise SchemaError("annotation is missing lines.horizon (needed for tilt)")
            res = {"tilt_deg": round(math.degrees(camera_tilt(horizon, cc)), 3)}
        elif kind in ("plane_angle", "ray_angle"):
            for key in ("a", "b"):
                if key not in q:
                    raise SchemaError(f"query {name} is missing field {key}")
            a, b = _point(doc, q["a"], name), _point(doc, q["b"], name)
            if kind == "plane_angle":
                line = horizon if horizon is not None else join(a, b)
                cp = conformal_point_from_k(line, k, branch)
                m = plane_angle(PlaneAngleQuery(a, b), cp, tol=1e-3)
                res = {"angle_deg": round(m.degrees, 3), "conformal_point": cp.xy}
            else:
                cr = angle_cross_ratio(a, b, k)
                alg = angle_algebraic(a, b, k)
                res = {"angle_deg": round(cr.degrees, 3), "algebraic_deg": round(alg.degrees, 3)}
        else:
            raise SchemaError(f"unknown query type {kind!r}")
        out.append({"name": name, "type": kind, **res})
    return clean({"k": k.as_dict(), "measurements": out})


# ---------------------------------------------------------------- odometry

def _k_from(doc: dict, where: str) -> CalibrationMatrix:
    if "k" not in doc:
        raise SchemaError(f"{where} is missing k")
    k = doc["k"]
    return CalibrationMatrix(k["fx"], k["fy"], k["skew"], k["px"], k["py"])


def odometry(doc: dict, config: OdometryConfig, branch: str = "below"):
    validate(doc, "matches")
    k = _k_from(doc, "match file")
    n, pairs = load_match_file(doc)
    for m in pairs:
        if not (0 <= m.i < n and 0 <= m.j < n):
            raise SchemaError(f"pair {m.i}-{m.j} references a frame outside 0..{n - 1}")
    horizon = HomLine(doc["horizon"]) if "horizon" in doc else sequence_horizon(pairs)
    cp = conformal_point_from_k(horizon, k, branch)
    traj = run_sequence(pairs, n, k, horizon, cp, config)
    out = traj.to_json()
    out.update(
        horizon=horizon.vec,
        conformal_point=cp.xy,
        config={"estimator": config.estimator, "tol_deg": math.degrees(config.tol),
                "iterations": config.iterations, "seed": config.seed},
    )
    out = clean(out)
    validate(out, "trajectory")
    return out, traj


# ---------------------------------------------------------------- synth

def sinusoid_spec(frames: int = 150, step: float = 0.3, amplitude_deg: float = 40.0,
                  period: float = 75.0, f: float = 500.0, size=(640.0, 480.0),
                  height: float = 1.5, pitch_deg: float = 20.0) -> PlanarMotionSpec:
    """Platform weaving with heading amplitude * sin(2 pi k / period), fixed step length."""
    k = CalibrationMatrix.square(f, size[0] / 2.0, size[1] / 2.0)
    kk = np.arange(frames)
    headings = np.radians(amplitude_deg) * np.sin(2 * np.pi * kk / period)
    pos = np.zeros((frames, 2))
    for i in range(1, frames):
        pos[i] = pos[i - 1] + step * np.array([math.cos(headings[i - 1]), math.sin(headings[i - 1])])
    return PlanarMotionSpec(k, headings, pos, height, math.radians(pitch_deg), tuple(size))


def skip_pairs(frames: int, max_skip: int) -> list[tuple[int, int]]:
    return [(i, i + s) for s in range(1, max_skip + 1) for i in range(frames - s)]


def synth_sequence(frames: int, noise: float, outliers: float, seed: int, points: int = 100,
                   max_skip: int = 1, static_scene: bool = False):
    spec = sinusoid_spec(frames)
    scene = np.zeros((0, 3)) if static_scene else None
    seq = generate_sequence(spec, scene, noise, outliers, seed, points, skip_pairs(frames, max_skip))
    doc = dump_match_file(frames, seq.pairs)
    cam = spec.camera(0)
    doc["k"] = spec.k.as_dict()
    doc["image"] = {"width": spec.image_size[0], "height": spec.image_size[1]}
    truth = seq.truth()
    truth["horizon"] = true_horizon(cam).vec
    truth["conformal_point"] = true_conformal_point(cam)
    return clean(doc), clean(truth)


def synth_annotation(f: float = 800.0, size=(1024.0, 768.0), heading_deg: float = 30.0,
                     pitch_deg: float = 20.0, roll_deg: float = 5.0):
    """Kitchen-style annotation: vanishing points of the world axes seen by a tilted camera."""
    k = CalibrationMatrix.square(f, size[0] / 2.0, size[1] / 2.0)
    cam = SyntheticCamera.on_platform(k, 0.0, 0.0, math.radians(heading_deg), 1.5,
                                      math.radians(pitch_deg), math.radians(roll_deg))
    names = {"v1": (1, 0, 0), "v2": (0, 1, 0), "v3": (0, 0, 1), "v45": (1, 1, 0)}
    pts = {}
    for name, d in names.items():
        v = cam.direction_image(d)
        pts[name] = v.xy
    horizon = true_horizon(cam)
    doc = {
        "image": {"width": size[0], "height": size[1]},
        "points": pts,
        "lines": {"horizon": horizon.vec},
        "angles": [{"vp_a": "v1", "vp_b": "v45", "theta_deg": 45.0}],
        "queries": [
            {"type": "plane_angle", "a": "v1", "b": "v2", "name": "tile-corner"},
            {"type": "plane_angle", "a": "v1", "b": "v45", "name": "tile-diagonal"},
            {"type": "ray_angle", "a": "v1", "b": "v3", "name": "wall-floor"},
            {"type": "fov"},
            {"type": "tilt"},
        ],
    }
    truth = {"f": f, "principal_point": [k.px, k.py], "pitch_deg": pitch_deg,
             "conformal_point": true_conformal_point(cam), "horizon": horizon.vec}
    return clean(doc), clean(truth)


# ---------------------------------------------------------------- commands

def cmd_calibrate(args) -> int:
    doc = read_json(args.annotation)
    validate(doc, "annotation")
    report = calibrate(doc, args.method, args.branch)
    emit(dumps(report), args.out)
    svg = svg_path_for(args)
    if svg:
        Path(svg).write_text(report_overlay(report).to_svg())
    return EXIT_OK


def cmd_measure(args) -> int:
    doc = read_json(args.annotation)
    validate(doc, "annotation")
    emit(dumps(measure(doc, args.method, args.branch)), args.out)
    return EXIT_OK


def cmd_odometry(args) -> int:
    doc = read_json(args.matches)
    cfg = OdometryConfig(estimator=args.estimator, tol=math.radians(args.tol_deg),
                         iterations=args.iterations, seed=args.seed)
    out, traj = odometry(doc, cfg, args.branch)
    emit(dumps(out), args.out)
    svg = svg_path_for(args)
    if svg:
        truth = read_json(args.truth).get("headings_deg") if args.truth else None
        Path(svg).write_text(heading_plot(np.degrees(traj.headings), truth).to_svg())
    return EXIT_OK


def cmd_overlay(args) -> int:
    doc = read_json(args.input)
    if "method" in doc:
        validate(doc, "report")
        scene = report_overlay(doc)
    else:
        validate(doc, "annotation")
        scene = report_overlay(annotation_report(doc))
    emit(scene.to_svg(), args.out)
    return EXIT_OK


def annotation_report(doc: dict) -> dict:
    """Drawable view of a raw annotation: its points, and the horizon if given."""
    rep = {"image": doc["image"], "construction": {"points": dict(doc.get("points") or {})}}
    h = annotation_horizon(doc)
    if h is not None:
        rep["horizon"] = h.vec
    return rep


def cmd_synth(args) -> int:
    if args.kind == "sequence":
        doc, truth = synth_sequence(args.frames, args.noise, args.outliers, args.seed,
                                    args.points, args.max_skip, args.empty)
    else:
        doc, truth = synth_annotation()
    emit(dumps(doc), args.out)
    if args.truth:
        Path(args.truth).write_text(dumps(truth))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conicpoint", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--branch", choices=("below", "above"), default="below",
                       help="which of the two mirror conformal points to use")

    p = sub.add_parser("calibrate", help="calibrate from an annotation")
    p.add_argument("annotation")
    p.add_argument("--method", choices=METHODS, default="three-vp")
    p.add_argument("--svg", help="overlay path (default: --out with .svg suffix)")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("measure", help="angles, tilt and field of view from an annotation")
    p.add_argument("annotation")
    p.add_argument("--method", choices=METHODS, default=None,
                   help="calibrate with this method when the annotation has no focal")
    common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("odometry", help="planar trajectory from a match file")
    p.add_argument("matches")
    p.add_argument("--estimator", choices=("ransac", "median"), default="ransac")
    p.add_argument("--tol-deg", type=float, default=0.5)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--svg", help="heading plot path (default: --out with .svg suffix)")
    p.add_argument("--truth", help="ground-truth sidecar to draw alongside the estimate")
    common(p)
    p.set_defaults(func=cmd_odometry)

    p = sub.add_parser("overlay", help="SVG overlay of a report or annotation")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("synth", help="synthetic match file or annotation with ground truth")
    p.add_argument("--kind", choices=("sequence", "annotation"), default="sequence")
    p.add_argument("--frames", type=int, default=150)
    p.add_argument("--noise", type=float, default=0.0, help="pixel sigma")
    p.add_argument("--outliers", type=float, default=0.0, help="fraction of outlier matches")
    p.add_argument("--points", type=int, default=100, help="ground points per pair")
    p.add_argument("--max-skip", type=int, default=1, help="also pair frames up to this many apart")
    p.add_argument("--empty", action="store_true", help="empty scene (no matches)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", help="ground-truth sidecar path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except KeyError as exc:
        print(f"schema error: missing field {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except GeometryError as exc:
        print(f"degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY


if __name__ == "__main__":
    sys.exit(main())

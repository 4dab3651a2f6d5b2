"""Artifact file formats: CSV tables with JSON sidecars.

Reals are serialized as decimal strings with enough digits to round-trip
the working precision exactly, so chained subcommands reproduce in-process
pipelines value for value. Sidecar files carry grids, provenance and the
precision the artifact was written at; readers refuse to reinterpret data
at a different working precision unless asked.
"""

import csv
import json
import os

from gmpy2 import mpfr

from .density import MomentTriangle
from .errors import PrecisionError, ValidationError
from .momentsys import MomentSet
from .precision import current_precision, from_decimal, to_decimal
from .radon import Sinogram
from .reconstruct import ReconstructionGrid, StudyResult

SCHEMA_SINOGRAM = "radmom.sinogram/1"
SCHEMA_MOMENTS = "radmom.moments/1"
SCHEMA_TRIANGLE = "radmom.triangle/1"
SCHEMA_GRID = "radmom.grid/1"
SCHEMA_STUDY = "radmom.study/1"
SCHEMA_MANIFEST = "radmom.manifest/1"

ALL_SCHEMAS = (
    SCHEMA_SINOGRAM,
    SCHEMA_MOMENTS,
    SCHEMA_TRIANGLE,
    SCHEMA_GRID,
    SCHEMA_STUDY,
    SCHEMA_MANIFEST,
)


def sidecar_path(path):
    base, _ = os.path.splitext(str(path))
    return base + ".meta.json"


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _check_schema(payload, schema):
    if payload.get("schema") != schema:
        raise ValidationError(
            "expected schema %s, found %s" % (schema, payload.get("schema"))
        )


def _check_precision(payload, allow_reprecision):
    bits = payload.get("precision")
    if bits is None:
        return
    if bits != current_precision() and not allow_reprecision:
        raise PrecisionError(
            "artifact written at precision %d, working precision is %d"
            % (bits, current_precision())
        )


def _meta_value(v):
    if isinstance(v, mpfr):
        return to_decimal(v)
    if isinstance(v, dict):
        return {k: _meta_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_meta_value(x) for x in v]
    return v


def write_sinogram(s, path):
    """CSV theta,p,value (angle-major) plus a .meta.json sidecar."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "p", "value"])
        for i, th in enumerate(s.angles):
            tstr = to_decimal(th)
            row = s.values[i]
            for j, p in enumerate(s.offsets):
                w.writerow([tstr, to_decimal(p), to_decimal(row[j])])
    _write_json(
        sidecar_path(path),
        {
            "schema": SCHEMA_SINOGRAM,
            "precision": current_precision(),
            "angles": [to_decimal(t) for t in s.angles],
            "offsets": [to_decimal(p) for p in s.offsets],
            "meta": _meta_value(s.meta),
        },
    )
    return path


def read_sinogram(path, allow_reprecision=False):
    side = _read_json(sidecar_path(path))
    _check_schema(side, SCHEMA_SINOGRAM)
    _check_precision(side, allow_reprecision)
    angles = tuple(from_decimal(t) for t in side["angles"])
    offsets = tuple(from_decimal(p) for p in side["offsets"])
    m = len(offsets)
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["theta", "p", "value"]:
            raise ValidationError("sinogram CSV must start with header theta,p,value")
        row = []
        for rec in reader:
            if not rec:
                continue
            row.append(from_decimal(rec[2]))
            if len(row) == m:
                values.append(tuple(row))
                row = []
        if row:
            raise ValidationError("sinogram CSV truncated mid-row")
    if len(values) != len(angles):
        raise ValidationError(
            "sinogram CSV has %d rows of %d offsets, expected %d angles"
            % (len(values), m, len(angles))
        )
    meta = side.get("meta", {})
    if "pad" in meta and isinstance(meta["pad"], str):
        meta["pad"] = from_decimal(meta["pad"])
    return Sinogram(angles, offsets, tuple(values), meta)


def write_momentset(ms, path):
    _write_json(
        path,
        {
            "schema": SCHEMA_MOMENTS,
            "precision": current_precision(),
            "kind": ms.kind,
            "K": ms.max_order,
            "angles": [to_decimal(t) for t in ms.angles],
            "values": [[to_decimal(v) for v in row] for row in ms.values],
            "meta": _meta_value(ms.meta),
        },
    )
    return path


def read_momentset(path, allow_reprecision=False):
    payload = _read_json(path)
    _check_schema(payload, SCHEMA_MOMENTS)
    _check_precision(payload, allow_reprecision)
    angles = tuple(from_decimal(t) for t in payload["angles"])
    values = tuple(tuple(from_decimal(v) for v in row) for row in payload["values"])
    return MomentSet(payload["kind"], payload["K"], angles, values, payload.get("meta", {}))


def write_triangle(t, path):
    gamma = {
        "%d,%d" % (a, b): to_decimal(v) for (a, b), v in sorted(t.values.items())
    }
    _write_json(
        path,
        {
            "schema": SCHEMA_TRIANGLE,
            "precision": current_precision(),
            "K": t.max_order,
            "gamma": gamma,
            "source": t.source,
        },
    )
    return path


def read_triangle(path, allow_reprecision=False):
    payload = _read_json(path)
    _check_schema(payload, SCHEMA_TRIANGLE)
    _check_precision(payload, allow_reprecision)
    values = {}
    for key, v in payload["gamma"].items():
        a, b = key.split(",")
        values[(int(a), int(b))] = from_decimal(v)
    return MomentTriangle(payload["K"], values, payload.get("source", ""))


def write_grid(g, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "value"])
        for i, x1 in enumerate(g.xs):
            xs = to_decimal(x1)
            for j, x2 in enumerate(g.ys):
                w.writerow([xs, to_decimal(x2), to_decimal(g.values[i][j])])
    _write_json(
        sidecar_path(path),
        {
            "schema": SCHEMA_GRID,
            "precision": current_precision(),
            "xs": [to_decimal(v) for v in g.xs],
            "ys": [to_decimal(v) for v in g.ys],
            "meta": _meta_value(g.meta),
        },
    )
    return path


def read_grid(path, allow_reprecision=False):
    side = _read_json(sidecar_path(path))
    _check_schema(side, SCHEMA_GRID)
    _check_precision(side, allow_reprecision)
    xs = tuple(from_decimal(v) for v in side["xs"])
    ys = tuple(from_decimal(v) for v in side["ys"])
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x1", "x2", "value"]:
            raise ValidationError("grid CSV must start with header x1,x2,value")
        row = []
        for rec in reader:
            if not rec:
                continue
            row.append(from_decimal(rec[2]))
            if len(row) == len(ys):
                values.append(tuple(row))
                row = []
    if row or len(values) != len(xs):
        raise ValidationError("grid CSV shape mismatch")
    return ReconstructionGrid(xs, ys, tuple(values), side.get("meta", {}))


def write_study(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "sup_error", "slope_estimate", "runtime_ms"])
        for r in result.rows:
            slope = "" if r.slope_vs_prev != r.slope_vs_prev else repr(r.slope_vs_prev)
            w.writerow([r.order, to_decimal(r.sup_error), slope, "%.3f" % r.runtime_ms])
    meta = dict(result.meta)
    meta["fitted_slope"] = result.fitted_slope
    _write_json(
        sidecar_path(path),
        {"schema": SCHEMA_STUDY, "precision": current_precision(), "meta": _meta_value(meta)},
    )
    return path


def write_manifest(payload, path):
    payload = dict(payload)
    payload["schema"] = SCHEMA_MANIFEST
    _write_json(path, payload)
    return path

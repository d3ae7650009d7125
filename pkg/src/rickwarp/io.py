"""Metric CSV files with JSON sidecars, and JSON reports."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .curvature import FIELDS, WarpedMetric
from .errors import InputError

COLUMNS = ("t",) + FIELDS


class MetricFileError(InputError):
    """A metric file or its sidecar is missing, unreadable or inconsistent."""


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path, obj):
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise MetricFileError(f"cannot read JSON from {path}: {exc}") from None


def write_metric(path, metric: WarpedMetric, seed=None):
    """Write the samples to ``path`` (CSV, 17 significant digits) and the sidecar next to it."""
    from . import __version__

    path = Path(path)
    data = np.column_stack([metric.t, *metric.columns()])
    np.savetxt(path, data, delimiter=",", header=",".join(COLUMNS), comments="", fmt="%.17g")
    prov = dict(metric.provenance)
    prov.setdefault("version", __version__)
    prov.setdefault("seed", seed)
    side = {"p": metric.p, "q": metric.q, "junctions": dict(metric.junctions),
            "cap_radius": metric.cap_radius, "provenance": prov}
    write_json(sidecar_path(path), side)
    return path, sidecar_path(path)


def read_metric(path) -> WarpedMetric:
    """Inverse of :func:`write_metric`; raises :class:`MetricFileError` on any defect."""
    path = Path(path)
    try:
        with path.open() as fh:
            header = fh.readline().strip()
        if tuple(h.strip() for h in header.split(",")) != COLUMNS:
            raise MetricFileError(f"{path}: header must be {','.join(COLUMNS)}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except MetricFileError:
        raise
    except (OSError, ValueError) as exc:
        raise MetricFileError(f"cannot read metric samples from {path}: {exc}") from None
    if data.shape[1] != len(COLUMNS) or data.shape[0] < 2:
        raise MetricFileError(f"{path}: expected at least two rows of {len(COLUMNS)} columns")
    if not np.all(np.isfinite(data)):
        raise MetricFileError(f"{path}: non-finite samples")
    side = read_json(sidecar_path(path))
    try:
        p, q = int(side["p"]), int(side["q"])
        junctions = {str(k): float(v) for k, v in side.get("junctions", {}).items()}
        cap = side.get("cap_radius")
        cap = None if cap is None else float(cap)
        prov = dict(side.get("provenance", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise MetricFileError(f"{sidecar_path(path)}: malformed sidecar ({exc})") from None
    try:
        metric = WarpedMetric(p, q, *data.T, junctions=junctions, cap_radius=cap, provenance=prov)
    except InputError as exc:
        raise MetricFileError(f"{path}: {exc}") from None
    missing = [k for k, v in junctions.items() if not np.any(metric.t == v)]
    if missing:
        raise MetricFileError(f"{path}: junctions {missing} are not sample times")
    return metric

"""Self-describing JSON files for initial data, checkpoints and reports.

Floats are written with ``repr`` precision (Python's ``json`` does this), so a
write/read cycle reproduces every grid value bit for bit.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .grid import RadialGrid
from .initial_data import InitialData, ProfileSpec
from .model import Parameters
from .radial import PRIMS, RadialState

FORMAT = "ucm-radial"
VERSION = 1


class FormatError(ValueError):
    pass


class SchemaError(ValueError):
    pass


def _header(kind, grid, params):
    return {"format": FORMAT, "version": VERSION, "kind": kind,
            "grid": grid.as_dict(), "params": params.as_dict()}


def _check_header(doc, kind):
    if doc.get("format") != FORMAT:
        raise FormatError(f"not a {FORMAT} file (format tag {doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported version {doc.get('version')!r}")
    if doc.get("kind") != kind:
        raise FormatError(f"expected a {kind} file, got {doc.get('kind')!r}")


def _arrays(doc, names, n):
    out = {}
    for k in names:
        a = np.asarray(doc["fields"][k], dtype=float)
        if a.shape != (n,):
            raise FormatError(f"field {k} has shape {a.shape}, expected ({n},)")
        out[k] = a
    return out


def data_to_dict(data: InitialData) -> dict:
    doc = _header("initial_data", data.grid, data.params)
    doc["R"] = data.R
    doc["profile"] = data.spec.as_dict() if data.spec is not None else None
    doc["functionals"] = data.summary()
    doc["fields"] = {k: getattr(data, k).tolist() for k in InitialData.FIELDS}
    return doc


def data_from_dict(doc: dict) -> InitialData:
    _check_header(doc, "initial_data")
    grid = RadialGrid.from_dict(doc["grid"])
    params = Parameters.from_dict(doc["params"])
    spec = ProfileSpec(**doc["profile"]) if doc.get("profile") else None
    f = _arrays(doc, InitialData.FIELDS, grid.n_cells)
    return InitialData.from_arrays(grid, doc["R"], params, f["rho0"], f["u0"], f["A0_r"],
                                   f["A0_t"], f["F0_r"], f["F0_t"], spec=spec)


def state_to_dict(state: RadialState, params: Parameters) -> dict:
    doc = _header("checkpoint", state.grid, params)
    doc["t"] = state.t
    names = PRIMS + (("T_rr", "T_t") if state.tracks_T else ())
    doc["fields"] = {k: getattr(state, k).tolist() for k in names}
    return doc


def state_from_dict(doc: dict):
    """Returns ``(state, params)``."""
    _check_header(doc, "checkpoint")
    grid = RadialGrid.from_dict(doc["grid"])
    names = PRIMS + (("T_rr", "T_t") if "T_rr" in doc["fields"] else ())
    f = _arrays(doc, names, grid.n_cells)
    st = RadialState(grid, *(f[k] for k in PRIMS), t=float(doc["t"]))
    if "T_rr" in f:
        st.T_rr, st.T_t = f["T_rr"], f["T_t"]
    return st, Parameters.from_dict(doc["params"])


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def save_data(path, data: InitialData):
    write_json(path, data_to_dict(data))


def load_data(path) -> InitialData:
    return data_from_dict(read_json(path))


def save_checkpoint(path, state: RadialState, params: Parameters):
    write_json(path, state_to_dict(state, params))


def load_checkpoint(path):
    return state_from_dict(read_json(path))


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- diagnostics CSV ------------------------------------------------------

def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])


def read_csv(path, expected=None) -> dict:
    """Columns as float arrays.  ``expected`` enforces the exact column list."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("empty CSV file")
    head = rows[0]
    if expected is not None and tuple(head) != tuple(expected):
        missing = [c for c in expected if c not in head]
        extra = [c for c in head if c not in expected]
        msg = f"column mismatch: missing {missing}, unexpected {extra}"
        if not missing and not extra:
            msg = f"column order differs: got {head}"
        raise SchemaError(msg)
    body = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(
        len(rows) - 1, len(head))
    return {c: body[:, i] for i, c in enumerate(head)}

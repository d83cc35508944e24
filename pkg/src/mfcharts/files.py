"""CSV formats for discrete functional data.

* wide: one file per variable, header ``id,<t_1>,...,<t_g>``, one row per
  observation.
* scalar: header ``id,<name>``.
* long: header ``id,arg,<var_1>,...``; empty cells are missing values.
"""

import os

import numpy as np
import pandas as pd

from .errors import InvalidConfig, IoError

FLOAT_FORMAT = "%.17g"


def _fmt(v):
    return FLOAT_FORMAT % v


def _ensure_dir(path):
    d = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(d, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create directory {d}: {exc}") from exc


def _write(path, frame):
    _ensure_dir(path)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read(path, **kwargs):
    try:
        return pd.read_csv(path, float_precision="round_trip", **kwargs)
    except FileNotFoundError as exc:
        raise IoError(f"file not found: {path}") from exc
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def write_wide(path, ids, grid, values):
    values = np.asarray(values, dtype=float)
    frame = pd.DataFrame(values, columns=[_fmt(t) for t in grid])
    frame.insert(0, "id", [str(i) for i in ids])
    _write(path, frame)


def read_wide(path):
    """Return ``(ids, grid, values)`` with values of shape ``(n, g)``."""
    frame = _read(path, dtype={"id": str})
    if frame.columns[0] != "id":
        raise InvalidConfig(f"{path}: first column must be 'id'")
    try:
        grid = np.array([float(c) for c in frame.columns[1:]])
    except ValueError as exc:
        raise InvalidConfig(f"{path}: grid headers must be numbers ({exc})") from exc
    return list(frame["id"]), grid, frame.iloc[:, 1:].to_numpy(dtype=float)


def write_scalar(path, ids, values, name="y_scalar"):
    _write(path, pd.DataFrame({"id": [str(i) for i in ids], name: np.asarray(values, dtype=float)}))


def read_scalar(path):
    frame = _read(path, dtype={"id": str})
    if list(frame.columns[:1]) != ["id"] or frame.shape[1] != 2:
        raise InvalidConfig(f"{path}: expected columns 'id,<name>'")
    return list(frame["id"]), frame.iloc[:, 1].to_numpy(dtype=float)


def write_long(path, ids, grid, data):
    ids = [str(i) for i in ids]
    names = list(data)
    frame = pd.DataFrame(
        {"id": np.repeat(ids, len(grid)), "arg": np.tile(np.asarray(grid, dtype=float), len(ids))}
    )
    for name in names:
        frame[name] = np.asarray(data[name], dtype=float).ravel()
    _write(path, frame)


def read_long(path, variables=None):
    frame = _read(path, dtype={"id": str})
    for col in ("id", "arg"):
        if col not in frame.columns:
            raise InvalidConfig(f"{path}: missing column {col!r}")
    if variables is not None:
        missing = [v for v in variables if v not in frame.columns]
        if missing:
            raise InvalidConfig(f"{path}: missing variable columns {missing}")
    return frame


def dataset_paths(prefix, names):
    return {name: f"{prefix}_{name}.csv" for name in names}


def write_dataset(prefix, dataset, ids=None):
    """Write ``X1, X2, X3, Y`` as wide CSVs and ``y_scalar`` as a scalar CSV."""
    ids = [str(i + 1) for i in range(dataset.nobs)] if ids is None else ids
    paths = dataset_paths(prefix, ["X1", "X2", "X3", "Y", "y_scalar"])
    for name, mat in dataset.functional().items():
        write_wide(paths[name], ids, dataset.grid, mat)
    write_scalar(paths["y_scalar"], ids, dataset.y_scalar)
    return paths


def read_wide_set(prefix, names):
    """Read several wide files sharing ids and grid; returns ``(ids, grid, {name: values})``."""
    out = {}
    ids = grid = None
    for name, path in dataset_paths(prefix, names).items():
        if not os.path.exists(path):
            raise InvalidConfig(f"variable {name!r}: file {path} not found")
        i, g, v = read_wide(path)
        if ids is None:
            ids, grid = i, g
        elif i != ids or not np.array_equal(g, grid):
            raise InvalidConfig(f"{path}: ids or grid differ from the other variables")
        out[name] = v
    return ids, grid, out

"""Versioned JSON persistence of fitted models.

Arrays are stored as ``{"shape": [...], "data": [...]}`` in row-major
order. Floats go through ``repr`` so a save/load cycle is bit exact.
"""

import json

import numpy as np

from .basis import BSplineBasis
from .errors import IoError, KindMismatch, SchemaVersionMismatch
from .fof import FofModel
from .mfd import MFD, FunctionalSummary
from .mfpca import PCAModel
from .sof import SofModel

SCHEMA = "mfcharts-model"
SCHEMA_VERSION = "1.0"
KINDS = ("pca", "sof", "fof")


def _arr(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unarr(d):
    return np.asarray(d["data"], dtype=float).reshape(d["shape"])


def _mfd(x):
    return {
        "basis": x.basis.to_dict(),
        "obs_ids": list(x.obs_ids),
        "var_names": list(x.var_names),
        "coefs": _arr(x.coefs),
    }


def _unmfd(d):
    return MFD(_unarr(d["coefs"]), BSplineBasis.from_dict(d["basis"]), d["obs_ids"], d["var_names"])


def _summary(s):
    return {
        "mean_fn": _mfd(s.mean_fn),
        "sd_fn": _mfd(s.sd_fn),
        "grid": _arr(s.grid),
        "mean_values": _arr(s.mean_values),
        "sd_values": _arr(s.sd_values),
        "scale": bool(s.scale),
    }


def _unsummary(d):
    return FunctionalSummary(
        _unmfd(d["mean_fn"]),
        _unmfd(d["sd_fn"]),
        _unarr(d["grid"]),
        _unarr(d["mean_values"]),
        _unarr(d["sd_values"]),
        bool(d["scale"]),
    )


def _pca(m):
    return {
        "eigenfunctions": _mfd(m.eigenfunctions),
        "eigenvalues": _arr(m.eigenvalues),
        "scores": _arr(m.scores),
        "var_prop": _arr(m.var_prop),
        "summary": _summary(m.summary),
        "train": _mfd(m.train),
    }


def _unpca(d):
    return PCAModel(
        eigenfunctions=_unmfd(d["eigenfunctions"]),
        eigenvalues=_unarr(d["eigenvalues"]),
        scores=_unarr(d["scores"]),
        var_prop=_unarr(d["var_prop"]),
        summary=_unsummary(d["summary"]),
        train=_unmfd(d["train"]),
    )


def _sof(m):
    return {
        "pca": _pca(m.pca),
        "selected": list(map(int, m.selected)),
        "beta0": m.beta0,
        "b": _arr(m.b),
        "sigma2_hat": m.sigma2_hat,
        "beta_fn": _mfd(m.beta_fn),
        "y_train": _arr(m.y_train),
        "fitted": _arr(m.fitted),
        "selection_rule": m.selection_rule,
        "tot_variance_explained": m.tot_variance_explained,
        "x_train": _mfd(m.x_train),
    }


def _unsof(d):
    return SofModel(
        pca=_unpca(d["pca"]),
        selected=list(d["selected"]),
        beta0=float(d["beta0"]),
        b=_unarr(d["b"]),
        sigma2_hat=float(d["sigma2_hat"]),
        beta_fn=_unmfd(d["beta_fn"]),
        y_train=_unarr(d["y_train"]),
        fitted=_unarr(d["fitted"]),
        selection_rule=d["selection_rule"],
        tot_variance_explained=float(d["tot_variance_explained"]),
        x_train=_unmfd(d["x_train"]),
    )


def _fof(m):
    return {
        "pca_x": _pca(m.pca_x),
        "pca_y": _pca(m.pca_y),
        "comps_x": list(map(int, m.comps_x)),
        "comps_y": list(map(int, m.comps_y)),
        "B": _arr(m.B),
        "pca_res": _pca(m.pca_res),
        "comps_res": list(map(int, m.comps_res)),
        "residual_type": m.residual_type,
        "sigma_eps": _arr(m.sigma_eps),
        "v_eps_grid": _arr(m.v_eps_grid),
        "v_eps_values": _arr(m.v_eps_values),
        "thresholds": list(m.thresholds),
    }


def _unfof(d):
    return FofModel(
        pca_x=_unpca(d["pca_x"]),
        pca_y=_unpca(d["pca_y"]),
        comps_x=list(d["comps_x"]),
        comps_y=list(d["comps_y"]),
        B=_unarr(d["B"]),
        pca_res=_unpca(d["pca_res"]),
        comps_res=list(d["comps_res"]),
        residual_type=d["residual_type"],
        sigma_eps=_unarr(d["sigma_eps"]),
        v_eps_grid=_unarr(d["v_eps_grid"]),
        v_eps_values=_unarr(d["v_eps_values"]),
        thresholds=tuple(d["thresholds"]),
    )


def model_kind(model):
    if isinstance(model, SofModel):
        return "sof"
    if isinstance(model, FofModel):
        return "fof"
    if isinstance(model, tuple) and isinstance(model[0], PCAModel):
        return "pca"
    raise KindMismatch(f"cannot archive object of type {type(model).__name__}")


def to_document(model, meta=None):
    """JSON-ready dict. A ``pca`` model is passed as ``(PCAModel, components)``."""
    kind = model_kind(model)
    if kind == "pca":
        body = {"pca": _pca(model[0]), "components": list(map(int, model[1]))}
    elif kind == "sof":
        body = _sof(model)
    else:
        body = _fof(model)
    return {"schema": SCHEMA, "schema_version": SCHEMA_VERSION, "kind": kind, "meta": meta or {}, "model": body}


def from_document(doc):
    if doc.get("schema") != SCHEMA:
        raise KindMismatch(f"not a model archive (schema {doc.get('schema')!r})")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"archive schema version {doc.get('schema_version')!r}, this build reads {SCHEMA_VERSION!r}"
        )
    kind, body = doc["kind"], doc["model"]
    if kind == "pca":
        return kind, (_unpca(body["pca"]), list(body["components"]))
    if kind == "sof":
        return kind, _unsof(body)
    if kind == "fof":
        return kind, _unfof(body)
    raise KindMismatch(f"unknown model kind {kind!r}")


def save_model(model, path, meta=None):
    try:
        with open(path, "w") as fh:
            json.dump(to_document(model, meta), fh)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write model archive {path}: {exc}") from exc


def load_model(path):
    """Return ``(kind, model, meta)``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read model archive {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise KindMismatch(f"{path} is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise KindMismatch(f"{path} is not a model archive")
    kind, model = from_document(doc)
    return kind, model, doc.get("meta", {})

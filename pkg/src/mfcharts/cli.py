"""Command line interface: ``mfcharts simulate|fit|monitor|realtime|render``.

Exit status: 0 success, 1 usage or configuration error, 2 out-of-control
observations with ``--fail-on-oc``, 3 numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np
import pandas as pd

from . import render as svg
from .archive import load_model, save_model
from .charts import ChartFrame, control_charts_pca
from .errors import ConfigError, InvalidConfig, IoError, KindMismatch, MfchartsError, UnknownId
from .files import read_long, read_scalar, read_wide, read_wide_set, write_dataset
from .fof import beta_surface_frame, fit_fof_pc, regr_cc_fof
from .mfd import mfd_from_grid, mfd_from_long
from .mfpca import fit_mfpca, standardize_new
from .realtime import fit_real_time, monitor_real_time, real_time_path, truncate_grid, truncate_long
from .simgen import KAPPA_X, KAPPA_Y, simulate_scenario
from .sof import control_charts_sof_pc, fit_sof_pc

EXIT_OC = 2

PARAM_KEYS = {
    "n_basis",
    "lambda_grid",
    "domain",
    "vars",
    "response",
    "components",
    "tot_variance_explained",
    "tot_variance_explained_x",
    "tot_variance_explained_y",
    "tot_variance_explained_res",
    "selection",
    "residual_type",
    "alpha",
    "k_seq",
    "seed",
    "nobs_I",
    "nobs_tun",
    "nobs_II",
    "kappa_x",
    "kappa_y",
}
DEFAULT_VARS = ["X1", "X2", "X3"]
DEFAULT_RESPONSE = {"pca": None, "sof": "y_scalar", "fof": "Y"}
RENDER_KINDS = ("curves", "eigenfunctions", "charts", "contributions", "monitor-overlay", "beta-surface", "realtime-path")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def load_params(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            params = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read parameter file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"parameter file {path} is not valid JSON: {exc}") from exc
    if not isinstance(params, dict):
        raise InvalidConfig("parameter file must hold a JSON object")
    unknown = sorted(set(params) - PARAM_KEYS)
    if unknown:
        raise InvalidConfig(f"unknown parameter keys {unknown}; allowed: {sorted(PARAM_KEYS)}")
    return params


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _print_json(obj):
    print(json.dumps(obj, indent=1, sort_keys=True))


# ---------------------------------------------------------------- data loading


class RawData:
    """Discrete observations as read from disk, before smoothing."""

    def __init__(self, ids, grid=None, values=None, frame=None, scalar=None):
        self.ids = ids
        self.grid = grid
        self.values = values
        self.frame = frame
        self.scalar = scalar

    @property
    def is_long(self):
        return self.frame is not None

    def names(self):
        if self.is_long:
            return [c for c in self.frame.columns if c not in ("id", "arg")]
        return list(self.values)


def _align_scalar(ids, scalar_ids, values, path):
    lookup = dict(zip(scalar_ids, values))
    missing = [i for i in ids if i not in lookup]
    if missing:
        raise InvalidConfig(f"{path}: no response for ids {missing[:5]}")
    return np.array([lookup[i] for i in ids])


def load_raw(prefix=None, long=None, scalar=None, names=(), mode="pca", response=None):
    """Read covariates (and the response) from a wide prefix or a long file."""
    if (prefix is None) == (long is None):
        raise InvalidConfig("give exactly one of a wide-data prefix or a long-format file")
    wanted = list(names) + ([response] if mode == "fof" else [])
    if prefix is not None:
        ids, grid, values = read_wide_set(prefix, wanted)
        raw = RawData(ids, grid=grid, values=values)
        if mode == "sof":
            path = scalar or f"{prefix}_{response}.csv"
            if not os.path.exists(path):
                raise InvalidConfig(f"response {response!r}: file {path} not found")
            sid, sval = read_scalar(path)
            raw.scalar = _align_scalar(ids, sid, sval, path)
        return raw
    frame = read_long(long, wanted)
    ids = list(pd.unique(frame["id"]))
    raw = RawData(ids, frame=frame[["id", "arg", *wanted]])
    if mode == "sof":
        if scalar is None:
            raise InvalidConfig(f"response {response!r}: long data needs a scalar response file")
        sid, sval = read_scalar(scalar)
        raw.scalar = _align_scalar(ids, sid, sval, scalar)
    return raw


def to_mfd(raw, names, n_basis, lambda_grid=None, domain=None):
    if raw.is_long:
        if domain is None:
            domain = (float(raw.frame["arg"].min()), float(raw.frame["arg"].max()))
        return mfd_from_long(raw.frame[["id", "arg", *names]], tuple(domain), n_basis, lambda_grid, list(names))
    return mfd_from_grid(
        raw.grid, {k: raw.values[k] for k in names}, n_basis, lambda_grid, domain=domain, obs_ids=raw.ids
    )


def to_family(raw, names, k_seq, n_basis, lambda_grid=None, domain=None):
    if raw.is_long:
        if domain is None:
            domain = (float(raw.frame["arg"].min()), float(raw.frame["arg"].max()))
        return truncate_long(raw.frame[["id", "arg", *names]], tuple(domain), k_seq, n_basis, lambda_grid, list(names))
    data = {k: raw.values[k] for k in names}
    return truncate_grid(raw.grid, data, k_seq, n_basis, lambda_grid, domain, obs_ids=raw.ids)


def _settings(params, mode):
    return {
        "vars": list(params.get("vars", DEFAULT_VARS)),
        "response": params.get("response", DEFAULT_RESPONSE[mode]),
        "n_basis": int(params.get("n_basis", 30)),
        "lambda_grid": params.get("lambda_grid"),
        "domain": params.get("domain"),
    }


def _fit_kwargs(params, mode):
    if mode == "pca":
        return {}
    if mode == "sof":
        kw = {k: params[k] for k in ("tot_variance_explained", "selection", "components") if k in params}
        return kw
    return {
        k: params[k]
        for k in ("residual_type", "tot_variance_explained_x", "tot_variance_explained_y", "tot_variance_explained_res")
        if k in params
    }


def _pca_components(params, pca):
    if "components" in params:
        return [int(c) for c in params["components"]]
    return pca.components_for(float(params.get("tot_variance_explained", 0.95)))


# ---------------------------------------------------------------- subcommands


def cmd_simulate(args, params):
    seed = args.seed if args.seed is not None else int(params.get("seed", 0))
    kappa_x = float(params.get("kappa_x", KAPPA_X))
    kappa_y = float(params.get("kappa_y", KAPPA_Y))
    sizes = {k: int(params.get(k, d)) for k, d in (("nobs_I", 1000), ("nobs_tun", 1000), ("nobs_II", 60))}
    data = simulate_scenario(seed, sizes["nobs_I"], sizes["nobs_tun"], sizes["nobs_II"], kappa_x, kappa_y)
    files = {}
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {args.out}: {exc}") from exc
    for name, ds in data.items():
        paths = write_dataset(os.path.join(args.out, name), ds)
        files[name] = {k: os.path.basename(v) for k, v in paths.items()}
    third = sizes["nobs_II"] // 3
    manifest = {
        "seed": seed,
        "sizes": sizes,
        "kappa_x": kappa_x,
        "kappa_y": kappa_y,
        "phase_II_groups": [
            {"rows": [1, third], "shift_type_x3": "A", "d_x3": 0.0, "d_y_scalar": 0.0, "shift_type_y": "D", "d_y": 0.0},
            {"rows": [third + 1, 2 * third], "shift_type_x3": "A", "d_x3": 20.0, "d_y_scalar": 1.0, "shift_type_y": "D", "d_y": 0.5},
            {"rows": [2 * third + 1, sizes["nobs_II"]], "shift_type_x3": "A", "d_x3": 40.0, "d_y_scalar": 2.0, "shift_type_y": "D", "d_y": 1.5},
        ],
        "files": files,
    }
    with open(_out(args, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _print_json({"written": sorted(f for v in files.values() for f in v.values()) + ["manifest.json"]})
    return 0


def fit_model(mode, raw, settings, params):
    x = to_mfd(raw, settings["vars"], settings["n_basis"], settings["lambda_grid"], settings["domain"])
    if mode == "pca":
        pca = fit_mfpca(x)
        return (pca, _pca_components(params, pca))
    if mode == "sof":
        return fit_sof_pc(raw.scalar, x, **_fit_kwargs(params, mode))
    y = to_mfd(raw, [settings["response"]], settings["n_basis"], settings["lambda_grid"], settings.get("domain_y"))
    return fit_fof_pc(y, x, **_fit_kwargs(params, mode))


def fit_summary(mode, model):
    if mode == "pca":
        pca, comps = model
        return {
            "mode": mode,
            "n_train": pca.n_train,
            "components": comps,
            "var_prop": pca.var_prop[: len(comps)].tolist(),
            "cum_var": float(pca.var_prop[comps].sum()),
        }
    if mode == "sof":
        return {
            "mode": mode,
            "n_train": model.n_train,
            "selection": model.selection_rule,
            "selected": model.selected,
            "var_prop": model.pca.var_prop[model.selected].tolist(),
            "beta0": model.beta0,
            "b": model.b.tolist(),
            "sigma2_hat": model.sigma2_hat,
        }
    return {
        "mode": mode,
        "n_train": model.n_train,
        "L": len(model.comps_x),
        "M": len(model.comps_y),
        "K": len(model.comps_res),
        "residual_type": model.residual_type,
        "thresholds": list(model.thresholds),
        "var_prop_res": model.pca_res.var_prop[model.comps_res].tolist(),
    }


def cmd_fit(args, params):
    mode = args.mode
    settings = _settings(params, mode)
    raw = load_raw(args.data, args.long, args.scalar, settings["vars"], mode, settings["response"])
    model = fit_model(mode, raw, settings, params)
    meta = {"mode": mode, **settings}
    path = _out(args, args.name + ".json")
    save_model(model, path, meta)
    _print_json({**fit_summary(mode, model), "archive": os.path.basename(path)})
    return 0


def _monitor_settings(meta, model, kind, params):
    settings = dict(meta)
    settings.update({k: params[k] for k in ("n_basis", "lambda_grid", "domain") if k in params})
    return settings


def monitor_model(kind, model, settings, new, tuning, alpha):
    names = settings["vars"]
    x_new = to_mfd(new, names, settings["n_basis"], settings["lambda_grid"], settings["domain"])
    x_tun = None if tuning is None else to_mfd(tuning, names, settings["n_basis"], settings["lambda_grid"], settings["domain"])
    if kind == "pca":
        pca, comps = model
        return control_charts_pca(pca, x_new, comps, tuning=x_tun, alpha=alpha)
    if kind == "sof":
        return control_charts_sof_pc(model, x_new, new.scalar, tuning_x=x_tun, alpha=alpha)
    resp = [settings["response"]]
    y_new = to_mfd(new, resp, settings["n_basis"], settings["lambda_grid"], settings.get("domain_y"))
    tun = None
    if tuning is not None:
        tun = (to_mfd(tuning, resp, settings["n_basis"], settings["lambda_grid"], settings.get("domain_y")), x_tun)
    return regr_cc_fof(model, y_new, x_new, tuning=tun, alpha=alpha)


def _oc_status(args, frame):
    return EXIT_OC if args.fail_on_oc and bool(np.any(frame.any_oc)) else 0


def cmd_monitor(args, params):
    kind, model, meta = load_model(args.model)
    settings = _monitor_settings(meta, model, kind, params)
    new = load_raw(args.data, args.long, args.scalar, settings["vars"], kind, settings["response"])
    tuning = None
    if args.tuning is not None or args.tuning_long is not None:
        tuning = load_raw(args.tuning, args.tuning_long, args.tuning_scalar, settings["vars"], kind, settings["response"])
    frame = monitor_model(kind, model, settings, new, tuning, params.get("alpha"))
    frame.to_csv(_out(args, args.name + ".csv"))
    frame.to_json(_out(args, args.name + ".json"))
    _print_json(
        {
            "n": len(frame),
            "oc_t2": int(frame.oc_t2.sum()),
            "oc_spe": int(frame.oc_spe.sum()),
            "oc_y": int(frame.oc_y.sum()),
            "any_oc": int(frame.any_oc.sum()),
        }
    )
    return _oc_status(args, frame)


def cmd_realtime(args, params):
    mode = args.mode
    settings = _settings(params, mode)
    names = settings["vars"]
    k_seq = params.get("k_seq")
    nb, lg, dom = settings["n_basis"], settings["lambda_grid"], settings["domain"]
    ref = load_raw(args.data, args.long, args.scalar, names, mode, settings["response"])
    new = load_raw(args.new, args.new_long, args.new_scalar, names, mode, settings["response"])
    if args.id is not None and str(args.id) not in new.ids:
        raise UnknownId(f"observation id {args.id!r} not found in the new data")
    tun = None
    if args.tuning is not None or args.tuning_long is not None:
        tun = load_raw(args.tuning, args.tuning_long, args.tuning_scalar, names, mode, settings["response"])
    x_ref = to_family(ref, names, k_seq, nb, lg, dom)
    x_new = to_family(new, names, k_seq, nb, lg, dom)
    x_tun = None if tun is None else to_family(tun, names, k_seq, nb, lg, dom)
    y_ref = y_new = y_tun = None
    if mode == "sof":
        y_ref, y_new = ref.scalar, new.scalar
    elif mode == "fof":
        resp = [settings["response"]]
        y_ref, y_new = to_family(ref, resp, k_seq, nb, lg), to_family(new, resp, k_seq, nb, lg)
        y_tun = None if tun is None else to_family(tun, resp, k_seq, nb, lg)
    params_fit = _fit_kwargs(params, mode)
    if mode == "pca":
        params_fit = {k: params[k] for k in ("components", "tot_variance_explained") if k in params}
    family = fit_real_time(mode, x_ref, y_ref, **params_fit)
    frames = monitor_real_time(family, x_new, y_new, x_tun, y_tun, params.get("alpha"))
    written = []
    for k, fr in frames.items():
        name = f"realtime_k{k:g}.csv"
        fr.to_csv(_out(args, name))
        written.append(name)
    paths = []
    for obs in new.ids:
        p = real_time_path(frames, obs)
        p.insert(0, "id", obs)
        paths.append(p)
    pd.concat(paths, ignore_index=True).to_csv(
        _out(args, "realtime_paths.csv"), index=False, float_format="%.17g", lineterminator="\n"
    )
    written.append("realtime_paths.csv")
    if args.id is not None:
        name = f"realtime_path_{args.id}.csv"
        real_time_path(frames, args.id).to_csv(_out(args, name), index=False, float_format="%.17g", lineterminator="\n")
        written.append(name)
    _print_json({"k_seq": family.k_seq, "written": written})
    any_oc = any(bool(np.any(fr.any_oc)) for fr in frames.values())
    return EXIT_OC if args.fail_on_oc and any_oc else 0


def _load_frame(path):
    if path.endswith(".json"):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from exc
        if not isinstance(doc, dict) or "rows" not in doc:
            raise KindMismatch(f"{path} is not a chart frame")
        return ChartFrame.read_json(path)
    try:
        head = pd.read_csv(path, nrows=0)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise KindMismatch(f"{path} is not a chart frame CSV: {exc}") from exc
    if not {"id", "t2", "spe", "t2_lim", "spe_lim"} <= set(head.columns):
        raise KindMismatch(f"{path} is not a chart frame CSV")
    return ChartFrame.read_csv(path)


def _load_archive(path):
    if not path.endswith(".json"):
        raise KindMismatch(f"{path} is not a model archive")
    return load_model(path)


def _pca_of(kind, model):
    return model[0] if kind == "pca" else (model.pca if kind == "sof" else model.pca_x)


def cmd_render(args, params):
    kind = args.kind
    if not args.input:
        raise InvalidConfig("render needs at least one --input")
    first = args.input[0]
    target = _out(args, (args.name or kind) + ".svg")
    if kind == "curves":
        panels = []
        for path in args.input:
            try:
                ids, grid, vals = read_wide(path)
            except (InvalidConfig, ValueError) as exc:
                raise KindMismatch(f"{path} is not a wide curve file: {exc}") from exc
            name = os.path.splitext(os.path.basename(path))[0]
            panels.append((name, grid, vals, ids))
        text = svg.render_curves(panels, args.max_curves)
    elif kind == "eigenfunctions":
        mk, model, _ = _load_archive(first)
        harm = [int(h) - 1 for h in args.harm.split(",")]
        text = svg.render_eigenfunctions(_pca_of(mk, model), harm)
    elif kind == "charts":
        text = svg.render_charts(_load_frame(first))
    elif kind == "contributions":
        frame = _load_frame(first)
        if args.id is None:
            raise InvalidConfig("contributions need --id")
        text = svg.render_contributions(frame, args.id)
    elif kind == "monitor-overlay":
        mk, model, meta = _load_archive(first)
        if args.new is None or args.id is None:
            raise InvalidConfig("monitor-overlay needs --new and --id")
        pca = _pca_of(mk, model)
        settings = _monitor_settings(meta, model, mk, params)
        names = pca.var_names
        ids, grid, vals = read_wide_set(args.new, names)
        x_new = mfd_from_grid(grid, vals, settings["n_basis"], settings["lambda_grid"], settings["domain"], ids)
        if str(args.id) not in x_new.obs_ids:
            raise UnknownId(f"observation id {args.id!r} not found")
        oc = False
        if args.frame is not None:
            fr = _load_frame(args.frame)
            oc = bool(fr.any_oc[fr.index_of(args.id)])
        text = svg.render_monitor_overlay(
            pca.train, standardize_new(pca, x_new), str(args.id), oc, max_reference=args.max_curves or 100
        )
    elif kind == "beta-surface":
        mk, model, _ = _load_archive(first)
        if mk != "fof":
            raise KindMismatch(f"beta-surface needs a fof model archive, got {mk!r}")
        table = beta_surface_frame(model)
        table.to_csv(os.path.splitext(target)[0] + ".csv", index=False, float_format="%.17g", lineterminator="\n")
        s = np.unique(table["s"].to_numpy())
        t = np.unique(table["t"].to_numpy())
        surf = np.stack([table.loc[table["var"] == v, "value"].to_numpy().reshape(len(s), len(t)) for v in model.pca_x.var_names])
        text = svg.render_beta_surface(s, t, surf, model.pca_x.var_names)
    else:
        try:
            path = pd.read_csv(first, dtype={"id": str}, float_precision="round_trip")
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise KindMismatch(f"{first} is not a real-time path CSV: {exc}") from exc
        if not {"k", "statistic", "value", "limit", "oc"} <= set(path.columns):
            raise KindMismatch(f"{first} is not a real-time path CSV")
        if "id" in path.columns:
            if args.id is None:
                raise InvalidConfig("realtime-path on a multi-id file needs --id")
            if str(args.id) not in set(path["id"]):
                raise UnknownId(f"observation id {args.id!r} not found in {first}")
            path = path[path["id"] == str(args.id)]
        text = svg.render_realtime_path(path, args.id if args.id is not None else "")
    with open(target, "w") as fh:
        fh.write(text)
    _print_json({"written": [os.path.basename(target)]})
    return 0


# ---------------------------------------------------------------- parser


def _global_options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--params", default=default, help="JSON parameter file")
    parser.add_argument("--out", default=default if suppress else ".", help="output directory")
    parser.add_argument("--seed", type=int, default=default, help="random seed")
    parser.add_argument(
        "--fail-on-oc", action="store_true", default=argparse.SUPPRESS if suppress else False, help="exit 2 on any OC flag"
    )


def _data_options(p, prefix="", required=False, what="data"):
    flag = prefix.replace("_", "-")
    p.add_argument(f"--{flag or 'data'}", dest=prefix or "data", help=f"wide-CSV prefix of the {what} (<prefix>_<var>.csv)")
    p.add_argument(f"--{flag + '-' if flag else ''}long", dest=(prefix + "_" if prefix else "") + "long", help=f"long-format CSV of the {what}")
    p.add_argument(
        f"--{flag + '-' if flag else ''}scalar",
        dest=(prefix + "_" if prefix else "") + "scalar",
        help=f"scalar response CSV of the {what} (id,<name>)",
    )


def build_parser():
    parser = _Parser(prog="mfcharts", description="Monitoring of multivariate functional data")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write the simulated reference, tuning and Phase-II sets")
    _global_options(p, suppress=True)

    p = sub.add_parser("fit", help="fit a model and write its archive")
    _global_options(p, suppress=True)
    p.add_argument("--mode", choices=("pca", "sof", "fof"), required=True)
    _data_options(p)
    p.add_argument("--name", default="model", help="archive file stem")

    p = sub.add_parser("monitor", help="chart new data against an archived model")
    _global_options(p, suppress=True)
    p.add_argument("--model", required=True, help="model archive (JSON)")
    _data_options(p)
    _data_options(p, "tuning", what="tuning data")
    p.add_argument("--name", default="chart", help="output file stem")

    p = sub.add_parser("realtime", help="per-k fits and charts on truncated domains")
    _global_options(p, suppress=True)
    p.add_argument("--mode", choices=("pca", "sof", "fof"), required=True)
    _data_options(p, what="reference data")
    _data_options(p, "new", what="new data")
    _data_options(p, "tuning", what="tuning data")
    p.add_argument("--id", help="observation whose path is written separately")

    p = sub.add_parser("render", help="render SVG figures")
    _global_options(p, suppress=True)
    p.add_argument("--kind", choices=RENDER_KINDS, required=True)
    p.add_argument("--input", action="append", default=[], help="input file (repeatable)")
    p.add_argument("--id", help="observation id")
    p.add_argument("--harm", default="1,2", help="1-based eigenfunction numbers")
    p.add_argument("--new", help="wide-CSV prefix of new data (monitor-overlay)")
    p.add_argument("--frame", help="chart frame marking OC (monitor-overlay)")
    p.add_argument("--max-curves", type=int, default=None)
    p.add_argument("--name", default=None, help="output file stem")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "monitor": cmd_monitor,
    "realtime": cmd_realtime,
    "render": cmd_render,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = load_params(args.params)
        return COMMANDS[args.command](args, params)
    except MfchartsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return IoError.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

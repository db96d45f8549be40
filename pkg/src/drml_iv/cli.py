"""Command-line entry point: ``drml-iv {estimate,clate,profile,sensitivity,simulate}``.

Settings come from an optional YAML run config (``--config``) and are
overridden by explicit flags. Outputs are written to ``--out``; on failure
an ``error.json`` record is written there and echoed to stderr.

Exit codes: 0 success, 1 estimation error, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from drml_iv import __version__
from drml_iv.clate import estimate_clate, is_discrete
from drml_iv.data_model import SchemaConfig, load_dataset
from drml_iv.errors import DrmlError, EstimationError, InputError
from drml_iv.late import estimate_late_drml, estimate_late_tsls, estimate_late_unadjusted
from drml_iv.nuisance import make_folds
from drml_iv.output import meta_block, write_csv, write_json
from drml_iv.profiling import STRATA, DensitySpec, profile_density, profile_discrete, strata_shares
from drml_iv.sensitivity import sensitivity_surface
from drml_iv.simulation import ScenarioSpec, run_experiment

DEFAULTS = {
    "dataset": None,
    "seed": 0,
    "alpha": 0.05,
    "folds": 5,
    "epsilon": 0.01,
    "threads": None,
    "out": "drml_out",
    "learners": {"pi": "superlearner", "mu": "superlearner", "lambda": "superlearner"},
    "clate": {"v_columns": [], "second_stage": None, "grid": None, "B": 500},
    "profile": {"v_column": None, "v0": None, "strata": list(STRATA), "bandwidth": "silverman",
                "kind": "auto"},
    "sensitivity": {"n_delta1": 101, "n_delta2": 161, "chi_hat": None, "Delta_hat": None},
    "simulate": {"scenario": 2, "n_list": [1000], "reps": 20,
                 "estimators": ["tsls", "drml_parametric", "drml_nonparametric"]},
}
# Settings that change how work is scheduled, not what is computed.
_NOT_HASHED = ("threads", "out", "config_path")


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _read_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise InputError("run config must be a mapping")
    unknown = set(doc) - set(DEFAULTS) - {"subcommand"}
    if unknown:
        raise InputError(f"unknown run-config keys: {sorted(unknown)}")
    if isinstance(doc.get("dataset"), str):
        ds = Path(doc["dataset"])
        doc["dataset"] = str(ds if ds.is_absolute() else path.parent / ds)
    return doc


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="parallel workers (default: all CPUs)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--alpha", type=float)
    common.add_argument("--data", dest="dataset", help="dataset schema YAML")
    common.add_argument("--folds", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--learner", help="learner preset for all three nuisances")

    p = argparse.ArgumentParser(prog="drml-iv", description="Doubly robust IV estimation.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("estimate", parents=[common], help="marginal LATE by three methods")
    c = sub.add_parser("clate", parents=[common], help="conditional LATE on a modifier grid")
    c.add_argument("--v-columns", nargs="*")
    c.add_argument("--second-stage")
    c.add_argument("--B", type=int)
    pr = sub.add_parser("profile", parents=[common], help="principal-strata profiles")
    pr.add_argument("--v-column")
    pr.add_argument("--v0", type=float)
    pr.add_argument("--strata", nargs="+", choices=STRATA)
    pr.add_argument("--bandwidth")
    pr.add_argument("--kind", choices=("auto", "discrete", "density"))
    s = sub.add_parser("sensitivity", parents=[common], help="defier sensitivity surface")
    s.add_argument("--n-delta1", type=int)
    s.add_argument("--n-delta2", type=int)
    s.add_argument("--chi-hat", type=float)
    s.add_argument("--delta-hat", dest="Delta_hat", type=float)
    m = sub.add_parser("simulate", parents=[common], help="Monte Carlo comparison study")
    m.add_argument("--scenario", type=int, choices=(1, 2, 3))
    m.add_argument("--n", dest="n_list", type=int, nargs="+")
    m.add_argument("--reps", type=int)
    m.add_argument("--estimators", nargs="+")
    return p


_SECTION_FLAGS = {
    "clate": {"v_columns": "v_columns", "second_stage": "second_stage", "B": "B"},
    "profile": {"v_column": "v_column", "v0": "v0", "strata": "strata", "bandwidth": "bandwidth",
                "kind": "kind"},
    "sensitivity": {"n_delta1": "n_delta1", "n_delta2": "n_delta2", "chi_hat": "chi_hat",
                    "Delta_hat": "Delta_hat"},
    "simulate": {"scenario": "scenario", "n_list": "n_list", "reps": "reps",
                 "estimators": "estimators"},
}


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the YAML file, then flags that were given."""
    cfg = _merge(DEFAULTS, _read_config(args.config) if args.config else {})
    for key in ("seed", "threads", "out", "alpha", "dataset", "folds", "epsilon"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    if args.learner:
        cfg["learners"] = {"pi": args.learner, "mu": args.learner, "lambda": args.learner}
    for attr, key in _SECTION_FLAGS.get(args.subcommand, {}).items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[args.subcommand] = dict(cfg[args.subcommand], **{key: val})
    if cfg["threads"] is None:
        cfg["threads"] = os.cpu_count() or 1
    cfg["subcommand"] = args.subcommand
    return cfg


def _hashable(cfg: dict) -> dict:
    keep = {k: v for k, v in cfg.items() if k not in _NOT_HASHED}
    sub = cfg["subcommand"]
    return {k: v for k, v in keep.items() if k not in _SECTION_FLAGS or k == sub}


def _dataset(cfg):
    if not cfg["dataset"]:
        raise InputError("no dataset given: use --data or the 'dataset' config key")
    return load_dataset(SchemaConfig.from_file(cfg["dataset"]))


def _drml(cfg, data, return_pseudo=False):
    folds = make_folds(data.n, cfg["folds"], data.z, cfg["seed"])
    L = cfg["learners"]
    return estimate_late_drml(data, folds, L["pi"], L["mu"], L["lambda"], cfg["epsilon"],
                              cfg["alpha"], return_pseudo=return_pseudo)


def cmd_estimate(cfg, out: Path, meta: dict) -> list[Path]:
    data = _dataset(cfg)
    results = [estimate_late_unadjusted(data, cfg["alpha"]), estimate_late_tsls(data, cfg["alpha"]),
               _drml(cfg, data)]
    records = [r.to_record() for r in results]
    columns = ["method", "chi_hat", "se", "ci_lo", "ci_hi", "alpha", "n", "Gamma_hat", "Delta_hat"]
    return [write_json(out / "late.json", records, meta),
            write_csv(out / "late.csv", records, meta, columns)]


def cmd_clate(cfg, out: Path, meta: dict) -> list[Path]:
    data = _dataset(cfg)
    c = cfg["clate"]
    folds = make_folds(data.n, cfg["folds"], data.z, cfg["seed"])
    L = cfg["learners"]
    res = estimate_clate(data, folds, L["pi"], L["mu"], L["lambda"], v_columns=c["v_columns"],
                         second_stage=c["second_stage"], v_grid=c["grid"], B=int(c["B"]),
                         alpha=cfg["alpha"], seed=cfg["seed"], threads=cfg["threads"],
                         epsilon=cfg["epsilon"])
    return [write_csv(out / "clate.csv", res.rows(), meta),
            write_json(out / "clate.json", res.to_dict(), meta)]


def cmd_profile(cfg, out: Path, meta: dict) -> list[Path]:
    data = _dataset(cfg)
    p = cfg["profile"]
    if not p["v_column"]:
        raise InputError("profile needs a covariate: use --v-column")
    v = data.columns([p["v_column"]])[:, 0]
    _, pseudo = _drml(cfg, data, return_pseudo=True)
    kind = p["kind"]
    if kind == "auto":
        kind = "discrete" if is_discrete(v) else "density"
    shares = strata_shares(pseudo)
    files = []
    summary = {"v_column": p["v_column"], "kind": kind,
               "shares": {s: {"estimate": sh.estimate, "se": sh.se} for s, sh in shares.items()},
               "profiles": {}}
    for stratum in p["strata"]:
        if kind == "discrete":
            res = profile_discrete(pseudo, v, p["v0"], stratum, cfg["alpha"])
        else:
            bw = p["bandwidth"]
            h = float(bw) if bw not in (None, "silverman") else "silverman"
            res = profile_density(pseudo, v, DensitySpec(h=h), stratum)
        files.append(write_csv(out / f"profile_{stratum}.csv", res.rows(), meta))
        summary["profiles"][stratum] = {"bandwidth": res.bandwidth, "rows": res.rows()}
    files.append(write_json(out / "profile.json", summary, meta))
    return files


def cmd_sensitivity(cfg, out: Path, meta: dict) -> list[Path]:
    s = cfg["sensitivity"]
    y_binary = True
    if s["chi_hat"] is None or s["Delta_hat"] is None:
        data = _dataset(cfg)
        fit = _drml(cfg, data)
        chi, Delta = fit.chi_hat, fit.Delta_hat
        y_binary = data.y_is_binary
    else:
        chi, Delta = float(s["chi_hat"]), float(s["Delta_hat"])
    surf = sensitivity_surface(chi, Delta, int(s["n_delta1"]), int(s["n_delta2"]), y_binary)
    summary = {"chi_hat": chi, "Delta_hat": Delta, "n_delta1": len(surf.delta1_grid),
               "n_delta2": len(surf.delta2_grid), "frontier_points": len(surf.frontier),
               "share_sign_preserved": float(np.mean(surf.sign_preserved()))}
    return [write_csv(out / "sensitivity_surface.csv", surf.long_rows(), meta,
                      ["delta1", "delta2", "xi"]),
            write_csv(out / "sensitivity_frontier.csv", surf.frontier_rows(), meta,
                      ["delta1", "delta2"]),
            write_json(out / "sensitivity.json", summary, meta)]


def cmd_simulate(cfg, out: Path, meta: dict) -> list[Path]:
    s = cfg["simulate"]
    spec = ScenarioSpec.scenario(int(s["scenario"]))
    rep = run_experiment(spec, [int(n) for n in s["n_list"]], int(s["reps"]), tuple(s["estimators"]),
                         seed=cfg["seed"], alpha=cfg["alpha"], threads=cfg["threads"])
    return [write_csv(out / "simulation.csv", rep.rows(), meta),
            write_json(out / "simulation.json", rep.to_dict(), meta)]


COMMANDS = {"estimate": cmd_estimate, "clate": cmd_clate, "profile": cmd_profile,
            "sensitivity": cmd_sensitivity, "simulate": cmd_simulate}


def _exit_code(exc: BaseException) -> int:
    return 2 if isinstance(exc, InputError) else 1


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    out = Path(args.out or "drml_out")
    try:
        cfg = resolve_config(args)
        out = Path(cfg["out"])
        meta = meta_block(cfg["seed"], _hashable(cfg), subcommand=args.subcommand)
        out.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.subcommand](cfg, out, meta)
    except (DrmlError, EstimationError, InputError) as exc:
        code = _exit_code(exc)
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
                  "subcommand": args.subcommand}
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(record, sort_keys=True) + "\n")
        except OSError:
            pass
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return code
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())

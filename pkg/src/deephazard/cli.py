"""Command-line runner: ``deephazard {simulate,train,predict,evaluate}``.

Settings come from (lowest to highest precedence) a named preset, a JSON
config file and command-line flags.  Every run writes its effective config
and a manifest next to its outputs.  Exit codes: 0 success, 2 invalid
input or configuration, 3 runtime or numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, io, metrics, predict, presets, simulate, train
from .survival_data import TimeGrid, default_tau

log = logging.getLogger("deephazard")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class ConfigError(ValueError):
    pass


# key -> (parser, default); a default of REQUIRED must be supplied
REQUIRED = object()


def _floats(v):
    if isinstance(v, str):
        v = [s for s in v.replace(",", " ").split() if s]
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"expected a list of numbers, got {v!r}")
    return [float(s) for s in v]


def _ints(v):
    return [int(s) for s in _floats(v)]


def _strs(v):
    if isinstance(v, str):
        v = [s for s in v.split(",") if s]
    return [str(s) for s in v]


def _opt(parse):
    return lambda v: None if v is None else parse(v)


TRAIN_KEYS = {
    "widths": (_ints, [10, 10]),
    "activations": (_strs, ["relu"]),
    "dropouts": (_floats, [0.2]),
    "optimizer": (str, "adam"),
    "lr": (float, 0.01),
    "penalty_lambda": (float, 0.0),
    "penalty_p": (int, 2),
    "max_epochs": (int, presets.MAX_EPOCHS),
    "early_stopping": (float, presets.EARLY_STOPPING),
}

SCHEMAS = {
    "simulate": {
        "model": (str, REQUIRED),
        "n": (int, REQUIRED),
        "grid": (_opt(_floats), None),
        "censoring": (float, 0.0),
        "n_pilot": (int, 4000),
        "seed": (int, 0),
        "out": (str, REQUIRED),
        "preset": (_opt(str), None),
    },
    "train": {
        "outcomes": (str, REQUIRED),
        "covariates": (str, REQUIRED),
        "grid": (_opt(_floats), None),
        "tau": (_opt(float), None),
        "baseline_variant": (str, "integral"),
        "seed": (int, 0),
        "out": (str, REQUIRED),
        "preset": (_opt(str), None),
        **TRAIN_KEYS,
    },
    "predict": {
        "model": (str, REQUIRED),
        "covariates": (str, REQUIRED),
        "outcomes": (_opt(str), None),
        "times": (_opt(_floats), None),
        "seed": (int, 0),
        "out": (str, REQUIRED),
        "preset": (_opt(str), None),
    },
    "evaluate": {
        "predictions": (str, REQUIRED),
        "outcomes": (str, REQUIRED),
        "truth": (_opt(str), None),
        "risks": (_opt(str), None),
        "imspe": (_opt(bool), None),
        "grid_size": (int, 200),
        "covariates": (_opt(str), None),
        "ph_covariate": (_opt(int), None),
        "seed": (int, 0),
        "out": (str, REQUIRED),
        "preset": (_opt(str), None),
    },
}


def _preset_values(command, name):
    try:
        p = presets.get_preset(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if command == "simulate":
        return dict(p["simulate"])
    if command == "train":
        return {"grid": p["simulate"]["grid"], **p["train"]}
    return {}


def resolve_config(command: str, file_cfg: dict | None, flags: dict) -> dict:
    """Merge preset < config file < flags, reject unknown keys, coerce types, fill defaults."""
    schema = SCHEMAS[command]
    file_cfg = dict(file_cfg or {})
    unknown = sorted(set(file_cfg) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    flags = {k: v for k, v in flags.items() if v is not None}
    preset = flags.get("preset", file_cfg.get("preset"))
    merged = _preset_values(command, preset) if preset else {}
    merged.update(file_cfg)
    merged.update(flags)
    cfg = {}
    for key, (parse, default) in schema.items():
        if key in merged:
            try:
                cfg[key] = parse(merged[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value for {key!r}: {merged[key]!r} ({exc})") from None
        elif default is REQUIRED:
            raise ConfigError(f"missing required setting {key!r} for {command}")
        else:
            cfg[key] = default
    return cfg


def _manifest(command, cfg, outputs, **extra):
    return {
        "tool": "deephazard",
        "version": __version__,
        "command": command,
        "seed": cfg.get("seed"),
        "config": cfg,
        "outputs": sorted(outputs),
        **extra,
    }


def _finish(out: Path, command, cfg, outputs, **extra):
    io.write_json(out / "config.json", cfg)
    io.write_json(out / "manifest.json", _manifest(command, cfg, list(outputs) + ["config.json", "manifest.json"], **extra))


# -- simulate ----------------------------------------------------------------

def cmd_simulate(cfg: dict) -> Path:
    try:
        spec = simulate.get_model(cfg["model"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["n"] < 1:
        raise ConfigError(f"n must be >= 1, got {cfg['n']}")
    if not 0 <= cfg["censoring"] < 1:
        raise ConfigError(f"censoring must lie in [0, 1), got {cfg['censoring']}")
    if cfg["grid"] is None:
        model_num = int(cfg["model"]) if str(cfg["model"]).isdigit() else None
        cfg["grid"] = list(presets.MODEL_GRIDS.get(model_num, presets.GRID_STANDARD))
    grid = cfg["grid"]
    if any(b <= a for a, b in zip(grid, grid[1:])) or not grid or grid[0] < 0:
        raise ConfigError(f"grid must be nonnegative and strictly increasing: {grid}")
    spec.check_nonnegative(np.random.default_rng(cfg["seed"]))

    sim = simulate.generate_dataset(spec, cfg["n"], grid, cfg["censoring"], seed=cfg["seed"], n_pilot=cfg["n_pilot"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    ids = [str(i + 1) for i in range(cfg["n"])]
    x = np.array([r.x for r in sim.records])
    d = np.array([r.delta for r in sim.records])
    Z = np.stack([r.covariates for r in sim.records])
    io.write_outcomes(out / "outcomes.csv", ids, x, d)
    io.write_covariates(out / "covariates.csv", ids, grid, Z)
    io.write_truth(out / "truth.json", cfg["model"], cfg["seed"], ids, sim.z0)
    _finish(
        out, "simulate", cfg, ["outcomes.csv", "covariates.csv", "truth.json"],
        grid=grid,
        achieved_censoring=sim.achieved_censoring,
        censoring_bound=None if math.isinf(sim.censor_bound) else sim.censor_bound,
        beyond_support=sim.beyond_support,
    )
    return out


# -- train -------------------------------------------------------------------

def _load_training(cfg):
    ids, x, d = io.read_outcomes(cfg["outcomes"])
    cov = io.read_covariates(cfg["covariates"])
    pts = cfg["grid"] if cfg["grid"] is not None else list(io.measurement_times(cov))
    Z, aligned = io.covariates_on_grid(cov, ids, pts)
    return ids, x, d, Z, pts, aligned


def cmd_train(cfg: dict) -> Path:
    tcfg_keys = {k: cfg[k] for k in TRAIN_KEYS}
    try:
        tcfg = train.TrainConfig(**tcfg_keys, seed=cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["baseline_variant"] not in ("integral", "interval"):
        raise ConfigError(f"baseline_variant must be 'integral' or 'interval', got {cfg['baseline_variant']!r}")
    ids, x, d, Z, pts, aligned = _load_training(cfg)
    tau = cfg["tau"] if cfg["tau"] is not None else default_tau(x)
    if cfg["tau"] is None and tau <= pts[-1]:
        raise ConfigError(
            f"all observed times end by {float(np.max(x))!r}, before the last measurement time {pts[-1]!r}; "
            "shorten the grid"
        )
    cfg["grid"], cfg["tau"] = [float(p) for p in pts], float(tau)
    try:
        grid = TimeGrid(tuple(pts), tau)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    model = train.fit((x, d, Z), grid, tcfg, baseline_variant=cfg["baseline_variant"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    io.save_model(out / "model.json", model)
    io.write_rows(
        out / "loss_curves.csv",
        ["interval", "epoch", "loss"],
        [(r.j, e, float(v)) for r in model.reports for e, v in enumerate(r.losses)],
    )
    report = {
        "intervals": [
            {"interval": r.j, "n_at_risk": r.n_j, "n_events": r.n_events, "epochs": r.epochs,
             "initial_loss": r.initial_loss, "final_loss": r.final_loss}
            for r in model.reports
        ],
        "n_subjects": len(ids),
        "aligned_subjects": aligned,
    }
    io.write_json(out / "report.json", report)
    _finish(out, "train", cfg, ["model.json", "loss_curves.csv", "report.json"], aligned_subjects=len(aligned))
    return out


# -- predict -----------------------------------------------------------------

def cmd_predict(cfg: dict) -> Path:
    model = io.load_model(cfg["model"])
    cov = io.read_covariates(cfg["covariates"])
    ids = list(cov)
    if cfg["times"] is not None:
        times = np.unique(np.asarray(cfg["times"], float))
    elif cfg["outcomes"] is not None:
        oid, ox, od = io.read_outcomes(cfg["outcomes"])
        times = np.unique(ox[od == 1])
        if times.size == 0:
            raise ConfigError("outcomes file has no events; pass explicit times")
    else:
        raise ConfigError("predict needs either times or an outcomes file (its event times are used)")
    if np.any(times < 0):
        raise ConfigError("prediction times must be >= 0")
    Z, aligned = io.covariates_on_grid(cov, ids, model.grid.points)
    if Z.shape[2] != model.n_covariates:
        raise ConfigError(f"covariates have dimension {Z.shape[2]}, model expects {model.n_covariates}")
    H = predict.risk_path(model, Z)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        S = predict.predict_survival(model, None, times, H=H)
    for w in caught:
        log.warning("%s", w.message)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    io.write_predictions(out / "predictions.csv", ids, times, S)
    io.write_rows(
        out / "risks.csv",
        ["id"] + [f"h{j}" for j in range(H.shape[1])] + ["mean_risk"],
        [[sid] + [float(v) for v in H[i]] + [float(H[i].mean())] for i, sid in enumerate(ids)],
    )
    cfg["times"] = [float(t) for t in times] if cfg["times"] is not None else None
    _finish(out, "predict", cfg, ["predictions.csv", "risks.csv"], aligned_subjects=aligned, n_times=int(times.size))
    return out


# -- evaluate ----------------------------------------------------------------

def _step_lookup(times, S):
    def evaluate(t):
        k = np.searchsorted(times, np.asarray(t, float), side="right") - 1
        return np.where(k[None, :] >= 0, S[:, np.clip(k, 0, None)], 1.0)

    return evaluate


def cmd_evaluate(cfg: dict) -> Path:
    if cfg["imspe"] and cfg["truth"] is None:
        raise ConfigError("IMSPE requested but no truth sidecar given")
    if cfg["ph_covariate"] is not None and cfg["covariates"] is None:
        raise ConfigError("ph_covariate needs the covariates file")
    oid, x, d = io.read_outcomes(cfg["outcomes"])
    pid, ptimes, S = io.read_predictions(cfg["predictions"])
    pos = {sid: k for k, sid in enumerate(pid)}
    missing = [i for i in oid if i not in pos]
    if missing:
        raise ConfigError(f"{len(missing)} subject(s) in outcomes have no predictions, e.g. {missing[:3]}")
    S = S[[pos[i] for i in oid]]
    surv = _step_lookup(ptimes, S)

    result = {"n": len(oid), "n_events": int(d.sum()), "c_index_td": metrics.c_index_td(x, d, surv)}
    if cfg["risks"] is not None:
        rid, cols = _read_risks(cfg["risks"])
        risk = np.array([cols[i] for i in oid])
        result["risk_score"] = "mean interval risk"
    else:
        t_med = float(np.median(x))
        risk = -surv(np.array([t_med]))[:, 0]
        result["risk_score"] = f"negative predicted survival at median time {t_med!r}"
    result["c_index_traditional"] = metrics.c_index_traditional(x, d, risk)

    outputs = ["metrics.json"]
    out = Path(cfg["out"])
    if cfg["truth"] is not None:
        model_id, seed, z0 = io.read_truth(cfg["truth"])
        gone = [i for i in oid if i not in z0]
        if gone:
            raise ConfigError(f"truth sidecar lacks {len(gone)} subject(s), e.g. {gone[:3]}")
        truth = simulate.TrueSurvival(model_id, np.stack([z0[i] for i in oid]))
        result["oracle_c_index_td"] = metrics.c_index_td(x, d, truth)
        if cfg["imspe"] is not False:
            tau = float(ptimes.max())
            result["imspe"] = metrics.imspe(surv, truth, tau, cfg["grid_size"])
            result["imspe_tau"] = tau
    ph_rows = None
    if cfg["ph_covariate"] is not None:
        cov = io.read_covariates(cfg["covariates"])
        k = cfg["ph_covariate"]
        first = np.array([cov[i][1][0, k - 1] if i in cov else np.nan for i in oid])
        if np.any(np.isnan(first)):
            raise ConfigError("covariates missing for some evaluated subjects")
        vals = np.unique(first)
        if vals.size != 2:
            raise ConfigError(f"covariate z{k} is not binary (found {vals.size} distinct values)")
        t, ratio = metrics.ph_diagnostic(x, d, first == vals[1])
        ph_rows = [(float(a), float(b)) for a, b in zip(t, ratio)]
        outputs.append("ph_diagnostic.csv")
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "metrics.json", result)
    if ph_rows is not None:
        io.write_rows(out / "ph_diagnostic.csv", ["time", "ratio"], ph_rows)
    _finish(out, "evaluate", cfg, outputs)
    return out


def _read_risks(path):
    fh, reader, header = io._open_csv(path)
    with fh:
        io._require(header, ["id", "mean_risk"], path)
        ci, cr = header.index("id"), header.index("mean_risk")
        cols = {row[ci].strip(): float(row[cr]) for row in reader if row}
    return list(cols), cols


# -- entry point -------------------------------------------------------------

COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deephazard", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"deephazard {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of settings")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--preset", help="named preset, e.g. ti1-model1-n1000")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress and per-subject alignment")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--model", help="hazard model 1-6 (or pure-baseline / constant)")
    p.add_argument("--n", type=int)
    p.add_argument("--grid", help="measurement times, comma separated")
    p.add_argument("--censoring", type=float, help="target censored fraction")
    p.add_argument("--n-pilot", dest="n_pilot", type=int)

    p = sub.add_parser("train", help="fit a model")
    common(p)
    p.add_argument("--outcomes")
    p.add_argument("--covariates")
    p.add_argument("--grid")
    p.add_argument("--tau", type=float)
    p.add_argument("--baseline-variant", dest="baseline_variant", choices=["integral", "interval"])
    p.add_argument("--widths", help="nodes per layer, comma separated")
    p.add_argument("--activations")
    p.add_argument("--dropouts")
    p.add_argument("--optimizer")
    p.add_argument("--lr", type=float)
    p.add_argument("--penalty-lambda", dest="penalty_lambda", type=float)
    p.add_argument("--penalty-p", dest="penalty_p", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--early-stopping", dest="early_stopping", type=float)

    p = sub.add_parser("predict", help="survival curves for new subjects")
    common(p)
    p.add_argument("--model", help="model.json written by train")
    p.add_argument("--covariates")
    p.add_argument("--outcomes", help="use this file's event times as prediction times")
    p.add_argument("--times", help="prediction times, comma separated")

    p = sub.add_parser("evaluate", help="concordance, IMSPE and proportional-hazards diagnostic")
    common(p)
    p.add_argument("--predictions")
    p.add_argument("--outcomes")
    p.add_argument("--truth", help="truth sidecar written by simulate")
    p.add_argument("--risks", help="risks.csv written by predict")
    p.add_argument("--imspe", action="store_true", default=None, help="require IMSPE (needs --truth)")
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--covariates")
    p.add_argument("--ph-covariate", dest="ph_covariate", type=int, help="1-based index of a binary covariate")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        file_cfg = io.read_json(args.config) if args.config else None
        if file_cfg is not None and not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = resolve_config(args.command, file_cfg, flags)
        COMMANDS[args.command](cfg)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"deephazard {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, OSError, RuntimeError) as exc:
        print(f"deephazard {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

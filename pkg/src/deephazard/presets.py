"""Named experiment presets: simulation settings plus network hyperparameters.

Presets are grouped by experiment: ``ti1`` models 1-4, ``ti2`` twenty
covariates, ``ti3`` censoring levels, ``ti4`` measurement grids.  Each
preset holds a ``simulate`` block (model, n, grid, censoring) and a
``train`` block accepted by :class:`~deephazard.train.TrainConfig`.
"""

from __future__ import annotations

import copy

GRID_STANDARD = (0.001, 0.2, 0.4, 0.6)
GRID_EARLY = (0.001, 0.1, 0.2, 0.3)
GRID_A = (0.001, 0.1, 0.15, 0.2)
GRID_B = (0.001, 0.05, 0.08, 0.12)
GRID_C = (0.001, 0.15, 0.2, 0.25)
GRID_D = (0.001, 0.05, 0.08, 0.12, 0.15, 0.2)

# default measurement grid per simulation model when no preset is given
MODEL_GRIDS = {1: GRID_STANDARD, 2: GRID_STANDARD, 3: GRID_STANDARD, 4: GRID_STANDARD, 5: GRID_STANDARD, 6: GRID_A}

MAX_EPOCHS = 1000
EARLY_STOPPING = 1e-5


def _train(widths, activations, optimizer, lr, lam, penalty="ridge", dropouts=0.2):
    n = len(widths)
    if isinstance(activations, str):
        activations = [activations] * n
    if isinstance(dropouts, (int, float)):
        dropouts = [float(dropouts)] * n
    return {
        "widths": list(widths),
        "activations": list(activations),
        "dropouts": list(dropouts),
        "optimizer": optimizer,
        "lr": lr,
        "penalty_lambda": lam,
        "penalty_p": 2 if penalty == "ridge" else 1,
        "max_epochs": MAX_EPOCHS,
        "early_stopping": EARLY_STOPPING,
    }


def _sim(model, grid, censoring=0.0, n=1000):
    return {"model": model, "n": n, "grid": list(grid), "censoring": censoring}


PRESETS: dict[str, dict] = {
    # proportional and non-proportional hazards, large and small samples
    "ti1-model1-n1000": {"simulate": _sim(1, GRID_STANDARD), "train": _train([10, 15, 20, 15, 10], "elu(0.1)", "adam", 0.01, 1e-5)},
    "ti1-model2-n1000": {"simulate": _sim(2, GRID_STANDARD), "train": _train([10, 10], "relu", "adam", 2e-2, 1e-3)},
    "ti1-model3-n1000": {"simulate": _sim(3, GRID_STANDARD), "train": _train([20, 20], ["elu(0.1)", "selu"], "adam", 2e-1, 1e-5)},
    "ti1-model4-n1000": {"simulate": _sim(4, GRID_STANDARD), "train": _train([10, 10], "selu", "adam", 2e-1, 1e-5)},
    "ti1-model1-n200": {"simulate": _sim(1, GRID_STANDARD, n=200), "train": _train([10, 10], "selu", "adam", 2e-1, 1e-2)},
    "ti1-model2-n200": {"simulate": _sim(2, GRID_STANDARD, n=200), "train": _train([10, 10], "relu", "adam", 2e-2, 0.41)},
    "ti1-model3-n200": {"simulate": _sim(3, GRID_STANDARD, n=200), "train": _train([10, 15, 10], "selu", "adam", 1e-3, 0.61, dropouts=0.1)},
    "ti1-model4-n200": {"simulate": _sim(4, GRID_STANDARD, n=200), "train": _train([10, 10], "relu", "adam", 2e-1, 1e-4)},
    # twenty covariates
    "ti2-model5": {"simulate": _sim(5, GRID_STANDARD), "train": _train([20], "elu(0.1)", "sgd", 2e-1, 0.56)},
    "ti2-model6": {"simulate": _sim(6, GRID_EARLY), "train": _train([20], "selu", "adam", 2e-1, 0.1)},
    # censoring levels
    "ti3-model4-c10": {"simulate": _sim(4, GRID_STANDARD, 0.10), "train": _train([10, 10], "selu", "adam", 2e-1, 1e-5)},
    "ti3-model4-c20": {"simulate": _sim(4, GRID_STANDARD, 0.20), "train": _train([20], "selu", "adam", 3e-3, 1e-4)},
    "ti3-model5-c0": {"simulate": _sim(5, GRID_EARLY, 0.0), "train": _train([20, 20], "elu(0.7)", "sgd", 1e-2, 0.061, "lasso", [0.1, 0.15])},
    "ti3-model5-c15": {"simulate": _sim(5, GRID_EARLY, 0.15), "train": _train([20, 20], "elu(0.7)", "sgd", 1e-2, 0.061, "lasso", [0.1, 0.15])},
    "ti3-model5-c30": {"simulate": _sim(5, GRID_EARLY, 0.30), "train": _train([20, 20, 20], "elu(0.7)", "sgd", 1e-1, 0.05, "lasso", [0.1, 0.15, 0.15])},
    "ti3-model6-c0": {"simulate": _sim(6, GRID_A, 0.0), "train": _train([20, 20], "elu(0.5)", "sgd", 1e-2, 0.061, "lasso", [0.1, 0.15])},
    "ti3-model6-c15": {"simulate": _sim(6, GRID_A, 0.15), "train": _train([20, 20], "elu(0.5)", "sgd", 1e-2, 0.061, "lasso", [0.1, 0.15])},
    "ti3-model6-c30": {"simulate": _sim(6, GRID_A, 0.30), "train": _train([20, 20], "elu(0.5)", "sgd", 1e-2, 0.061, "lasso", [0.1, 0.15])},
    # shifted measurement grids for model 6
    "ti4-A": {"simulate": _sim(6, GRID_A), "train": _train([20, 20], "elu(0.5)", "adam", 1e-2, 0.061, "lasso", [0.1, 0.15])},
    "ti4-B": {"simulate": _sim(6, GRID_B), "train": _train([20, 20], "elu(0.5)", "adam", 1e-2, 0.0007, "lasso", [0.1, 0.15])},
    "ti4-C": {"simulate": _sim(6, GRID_C), "train": _train([20, 20], "elu(0.5)", "adam", 1e-2, 0.08, "lasso", [0.1, 0.15])},
    "ti4-D": {"simulate": _sim(6, GRID_D), "train": _train([20, 20], "elu(1.5)", "adam", 1e-2, 0.0001, "lasso", [0.1, 0.15])},
}

# short aliases
PRESETS["ti1-model1"] = PRESETS["ti1-model1-n1000"]
PRESETS["ti1-model4"] = PRESETS["ti1-model4-n1000"]


def get_preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None

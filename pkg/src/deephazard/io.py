"""CSV and JSON formats: outcomes, long-format covariates, truth sidecars, models, predictions."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .survival_data import align_to_grid
from .train import DeepHazardModel

log = logging.getLogger(__name__)

TRUTH_FORMAT = "deephazard-truth"


def _num(v) -> str:
    """Shortest round-trip text for a float; integers stay integral."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _open_csv(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} does not exist")
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        fh.close()
        raise ValueError(f"{path}: empty file") from None
    return fh, reader, header


def _require(header, columns, path):
    missing = [c for c in columns if c not in header]
    if missing:
        raise ValueError(f"{path}: missing column(s) {missing}; header is {header}")


def write_outcomes(path, ids, x, delta) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "time", "event"])
        for i, t, d in zip(ids, x, delta):
            w.writerow([i, _num(t), int(d)])


def read_outcomes(path):
    """Returns ``(ids, time, event)``; ids are kept as strings."""
    fh, reader, header = _open_csv(path)
    with fh:
        _require(header, ["id", "time", "event"], path)
        ci, ct, ce = header.index("id"), header.index("time"), header.index("event")
        ids, x, d = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = float(row[ct])
                e = int(float(row[ce]))
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: cannot parse {row}") from None
            if e not in (0, 1):
                raise ValueError(f"{path}:{lineno}: event must be 0 or 1, got {row[ce]}")
            if not np.isfinite(t) or t < 0:
                raise ValueError(f"{path}:{lineno}: time must be finite and >= 0, got {row[ct]}")
            ids.append(row[ci].strip())
            x.append(t)
            d.append(e)
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate subject ids")
    if not ids:
        raise ValueError(f"{path}: no rows")
    return ids, np.array(x), np.array(d, dtype=np.int64)


def write_covariates(path, ids, times, Z) -> None:
    """Long format: one row per (subject, measurement time)."""
    Z = np.asarray(Z, float)
    p = Z.shape[2]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "measurement_time"] + [f"z{k + 1}" for k in range(p)])
        for i, sid in enumerate(ids):
            for j, t in enumerate(times):
                w.writerow([sid, _num(t)] + [_num(v) for v in Z[i, j]])


def read_covariates(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Map subject id to ``(measurement_times, values)`` sorted by time."""
    fh, reader, header = _open_csv(path)
    with fh:
        _require(header, ["id", "measurement_time"], path)
        zcols = [k for k, h in enumerate(header) if h not in ("id", "measurement_time")]
        if not zcols:
            raise ValueError(f"{path}: no covariate columns")
        ci, ct = header.index("id"), header.index("measurement_time")
        rows: dict[str, list] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                t = float(row[ct])
                vals = [float(row[k]) for k in zcols]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {row}") from None
            rows.setdefault(row[ci].strip(), []).append((t, vals))
    out = {}
    for sid, items in rows.items():
        items.sort(key=lambda r: r[0])
        out[sid] = (np.array([t for t, _ in items]), np.array([v for _, v in items]))
    return out


def measurement_times(cov: dict) -> tuple[float, ...]:
    """The common measurement schedule, if every subject shares one."""
    schedules = {tuple(t) for t, _ in cov.values()}
    if len(schedules) != 1:
        raise ValueError("subjects have different measurement times; give the grid explicitly")
    return schedules.pop()


def covariates_on_grid(cov: dict, ids, grid_points, tol: float = 1e-12):
    """Stack covariates for ``ids`` into ``(n, M+1, p)`` on the grid.

    Subjects measured off the grid are aligned to the nearest measurement and
    logged; returns ``(Z, aligned_ids)``.
    """
    pts = np.asarray(grid_points, float)
    missing = [i for i in ids if i not in cov]
    if missing:
        raise ValueError(f"{len(missing)} subject(s) have no covariates, e.g. {missing[:3]}")
    Z, aligned = [], []
    for sid in ids:
        t, v = cov[sid]
        if len(t) == len(pts) and np.all(np.abs(t - pts) <= tol * np.maximum(1.0, np.abs(pts))):
            Z.append(v)
        else:
            Z.append(align_to_grid(t, v, pts))
            aligned.append(sid)
            log.info("subject %s: measurement times %s aligned to grid %s", sid, t.tolist(), pts.tolist())
    shapes = {z.shape[1] for z in Z}
    if len(shapes) != 1:
        raise ValueError(f"subjects disagree on covariate dimension: {sorted(shapes)}")
    return np.stack(Z), aligned


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} does not exist")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None


def save_model(path, model: DeepHazardModel) -> None:
    write_json(path, model.to_dict())


def load_model(path) -> DeepHazardModel:
    return DeepHazardModel.from_dict(read_json(path))


def write_truth(path, model_id, seed, ids, z0) -> None:
    write_json(path, {
        "format": TRUTH_FORMAT,
        "model": model_id,
        "seed": seed,
        "subjects": {str(i): [float(v) for v in row] for i, row in zip(ids, np.asarray(z0))},
    })


def read_truth(path):
    d = read_json(path)
    if d.get("format") != TRUTH_FORMAT:
        raise ValueError(f"{path}: not a truth sidecar")
    return d["model"], d["seed"], {k: np.array(v, float) for k, v in d["subjects"].items()}


def write_predictions(path, ids, times, S) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "time", "survival"])
        for i, sid in enumerate(ids):
            for t, s in zip(times, S[i]):
                w.writerow([sid, _num(t), _num(s)])


def read_predictions(path):
    """Returns ``(ids, times, S)`` with ``S[i, k]`` for the sorted union of times.

    Every subject must be predicted at the same times.
    """
    fh, reader, header = _open_csv(path)
    with fh:
        _require(header, ["id", "time", "survival"], path)
        ci, ct, cs = (header.index(c) for c in ("id", "time", "survival"))
        rows: dict[str, dict[float, float]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.setdefault(row[ci].strip(), {})[float(row[ct])] = float(row[cs])
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: cannot parse {row}") from None
    if not rows:
        raise ValueError(f"{path}: no rows")
    times = sorted(next(iter(rows.values())))
    ids = list(rows)
    for sid in ids:
        if sorted(rows[sid]) != times:
            raise ValueError(f"{path}: subject {sid} is predicted at different times than the others")
    S = np.array([[rows[sid][t] for t in times] for sid in ids])
    return ids, np.array(times), S


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])


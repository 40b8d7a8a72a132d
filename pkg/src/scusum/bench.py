"""Monte Carlo benchmark: simulate, detect, score, aggregate.

A benchmark config is a JSON object::

    {
      "name": "iid_k5",
      "root_seed": 20190101,
      "replicates": 30,
      "defaults": {"detector": "scusum", "k": 5, "m": 10, "alpha": 0.05},
      "grid": {"mu": [0.8, 1.0, 1.5, 2.0]},
      "settings": [{"detector": "fdr_l", "mu": 1.0}]
    }

Each setting is ``defaults`` updated by one entry of ``settings`` or one
point of the Cartesian product in ``grid`` (``settings`` first, then the
grid in key order).  Recognised setting keys are listed in
``SETTING_DEFAULTS``.

Replicate ``i`` uses the same simulated noise for every setting (common
random numbers), so differences between settings are not swamped by
sampling noise.  Detector randomness is seeded per (setting, replicate).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .baselines import bh_fdr, fdr_l, to_pvalues
from .core import resolve_workers
from .errors import InvalidArgumentError
from .simulate import SimConfig, generate, lh_mask
from .threshold import DetectionResult, detect

__all__ = [
    "Metrics",
    "score",
    "load_config",
    "expand_settings",
    "run_benchmark",
    "write_report",
    "DETECTORS",
    "SETTING_DEFAULTS",
    "CSV_COLUMNS",
]

DETECTORS = {
    "scusum": "SCUSUM",
    "bh": "BH-FDR",
    "fdr_l": "FDR_L-style (indicative)",
}

SETTING_DEFAULTS = {
    "detector": "scusum",
    "k": 5,
    "m": 10,
    "alpha": 0.05,
    "mu": 1.0,
    "mu0": 0.0,
    "noise": "iid",
    "scale": None,
    "rows": 100,
    "cols": 100,
    "stroke": None,
    "neighborhood": 1,
    "rule": "tail",
}

CSV_COLUMNS = [
    "detector", "k", "mu", "noise", "scale", "alpha", "m", "rows", "cols",
    "replicates", "signal_count",
    "false_negative", "false_positive", "fdr",
    "false_negative_se", "false_positive_se", "fdr_se",
]

_METRICS = ("false_negative", "false_positive", "fdr")


@dataclass(frozen=True)
class Metrics:
    false_negative: float
    false_positive: float
    fdr: float

    def as_tuple(self):
        return (self.false_negative, self.false_positive, self.fdr)


def score(detection, truth) -> Metrics:
    """FN, FP and FDR of a detection mask against the ground truth.

    ``detection`` may be a :class:`DetectionResult` or a boolean array;
    ``truth`` a ground-truth mask object or a boolean array.  FDR is 0 when
    nothing is rejected.
    """
    mask = np.asarray(getattr(detection, "mask", detection), dtype=bool)
    sig = np.asarray(getattr(truth, "signal", truth), dtype=bool)
    if mask.shape != sig.shape:
        raise InvalidArgumentError(f"mask shape {mask.shape} != truth shape {sig.shape}")
    n_sig = int(sig.sum())
    n_null = sig.size - n_sig
    missed = int((sig & ~mask).sum())
    false_rej = int((~sig & mask).sum())
    return Metrics(
        false_negative=missed / n_sig if n_sig else 0.0,
        false_positive=false_rej / n_null if n_null else 0.0,
        fdr=false_rej / max(1, int(mask.sum())),
    )


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"config {path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise InvalidArgumentError(f"config {path}: top level must be a JSON object")
    return cfg


def expand_settings(cfg: dict) -> List[dict]:
    """Resolve ``defaults``/``settings``/``grid`` into a list of full settings."""
    unknown = set(cfg) - {"name", "root_seed", "replicates", "defaults", "settings", "grid"}
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
    base = dict(SETTING_DEFAULTS)
    base.update(cfg.get("defaults", {}))
    entries = list(cfg.get("settings", []))
    grid = cfg.get("grid") or {}
    if grid:
        keys = list(grid)
        for combo in itertools.product(*(grid[k] for k in keys)):
            entries.append(dict(zip(keys, combo)))

    out = []
    for entry in entries:
        s = dict(base)
        s.update(entry)
        bad = set(s) - set(SETTING_DEFAULTS)
        if bad:
            raise InvalidArgumentError(f"unknown setting keys: {sorted(bad)}")
        if s["detector"] not in DETECTORS:
            raise InvalidArgumentError(
                f"unsupported detector {s['detector']!r}; choose from {sorted(DETECTORS)}")
        out.append(s)
    return out


def _derive_seed(root: int, *key: int) -> int:
    ss = np.random.SeedSequence(root, spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _run_detector(setting: dict, field, seed: int) -> DetectionResult:
    name = setting["detector"]
    if name == "scusum":
        return detect(field, setting["k"], setting["m"], setting["alpha"], seed=seed,
                      workers=1, rule=setting["rule"])
    p = to_pvalues(field)
    if name == "bh":
        return bh_fdr(p, setting["alpha"])
    return fdr_l(p, setting["alpha"], setting["neighborhood"])


def _one(setting: dict, index: int, rep: int, root_seed: int):
    t0 = time.perf_counter()
    config = SimConfig(rows=setting["rows"], cols=setting["cols"], mu0=setting["mu0"],
                       mu1=setting["mu0"] + setting["mu"], noise=setting["noise"],
                       scale=setting["scale"], stroke=setting["stroke"],
                       seed=_derive_seed(root_seed, 0, rep))
    field, truth = generate(config)
    result = _run_detector(setting, field, _derive_seed(root_seed, 1, index, rep))
    met = score(result, truth)
    return met, result.n_detected, result.threshold, time.perf_counter() - t0


def _mean_se(values: List[float]):
    n = len(values)
    if n == 0:
        return None, None
    total = math.fsum(values)
    mean = total / n
    if n < 2:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def run_benchmark(cfg, workers: Optional[int] = None, progress=None) -> dict:
    """Run every (setting, replicate) cell and aggregate.

    Returns a dict with keys ``report`` (deterministic given the config) and
    ``timing`` (wall-clock seconds per replicate, which naturally varies).
    """
    if not isinstance(cfg, dict):
        cfg = load_config(cfg)
    settings = expand_settings(cfg)
    replicates = int(cfg.get("replicates", 30))
    if replicates < 0:
        raise InvalidArgumentError(f"replicates must be >= 0, got {replicates}")
    root_seed = int(cfg.get("root_seed", 0))

    tasks = [(i, rep) for i in range(len(settings)) for rep in range(replicates)]
    results: Dict[tuple, tuple] = {}

    def work(task):
        i, rep = task
        out = _one(settings[i], i, rep, root_seed)
        if progress is not None:
            progress(i, rep)
        return task, out

    n_workers = min(resolve_workers(workers), max(1, len(tasks)))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for task, out in pool.map(work, tasks):
                results[task] = out
    else:
        for task in tasks:
            results[task] = work(task)[1]

    rows = []
    timing = []
    for i, s in enumerate(settings):
        if replicates == 0:
            continue
        cells = [results[(i, rep)] for rep in range(replicates)]
        row = {
            "detector": s["detector"],
            "label": DETECTORS[s["detector"]],
            "setting": s,
            "replicates": replicates,
            "signal_count": lh_mask(s["rows"], s["cols"], s["stroke"]).count,
            "per_replicate": [
                {"replicate": rep, "false_negative": c[0].false_negative,
                 "false_positive": c[0].false_positive, "fdr": c[0].fdr,
                 "n_detected": c[1], "threshold": c[2]}
                for rep, c in enumerate(cells)
            ],
        }
        for j, name in enumerate(_METRICS):
            mean, se = _mean_se([c[0].as_tuple()[j] for c in cells])
            row[name] = mean
            row[name + "_se"] = se
        rows.append(row)
        timing.append({"setting_index": i, "seconds": [c[3] for c in cells]})

    report = {
        "name": cfg.get("name", ""),
        "root_seed": root_seed,
        "replicates": replicates,
        "detectors": sorted({s["detector"] for s in settings}),
        "rows": rows,
    }
    return {"report": report, "timing": timing}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in report["rows"]:
        s = row["setting"]
        flat = {**s, **{k: row[k] for k in ("replicates", "signal_count", *_METRICS,
                                              *(m + "_se" for m in _METRICS))}}
        flat["detector"] = row["label"]
        w.writerow([_fmt(flat.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_report(outcome: dict, out_dir) -> List[Path]:
    """Write ``report.json``, ``table.csv`` and ``timing.json`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json", out / "table.csv", out / "timing.json"]
    paths[0].write_text(json.dumps(outcome["report"], indent=2, sort_keys=True) + "\n")
    paths[1].write_text(report_csv(outcome["report"]))
    paths[2].write_text(json.dumps(outcome["timing"], indent=2) + "\n")
    return paths

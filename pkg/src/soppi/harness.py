"""Experiment harness: config loading, paired-seed trial batteries, CSV I/O.

Trial i of every algorithm uses seed ``base_seed + i``, so the Gaussian
perturbations are identical across algorithms before any refinement and
differences are attributable to the algorithm alone.  Per-trial records are
written as CSV with 17 significant digits; a run manifest captures
everything needed to reproduce the records bit for bit.
"""

from __future__ import annotations

import csv
import datetime
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .controller import ControllerConfig, run_episode
from .cost import CostSpec
from .dynamics import System, make_system
from .metrics import (SettlingCriterion, SummaryRow, TrialRecord, mse,
                      settling_time, summarize, welch_t_test_one_tailed)
from .svgd import SvgdConfig

log = logging.getLogger(__name__)

_FMT = "%.17g"

DEFAULT_CARTPOLE_CONFIG = {
    "system": {"id": "cartpole", "params": {}},
    "cost": {
        "Q": [1.25, 1.0, 12.0, 0.25],
        "R": [1e-3],
        "Q_T": [12.5, 10.0, 120.0, 2.5],
        "x_target": [0.0, 0.0, 0.0, 0.0],
        "angle_dims": [2],
    },
    "controller": {"K": 500, "horizon": 80, "lambda": 1.0, "sigma": 5.0},
    "svgd": {"step_size": 0.2, "iterations": 5, "bandwidth": 5.0,
             "alpha": 10.0},
    "experiment": {"algos": ["mppi", "soppi"], "n_trials": 5, "base_seed": 0,
                   "t_total": 20.0, "x0": [0.0, 0.0, math.pi, 0.0]},
}


def _reject_unknown(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ValueError(f"unknown keys in {where}: {sorted(unknown)}")


def _as_matrix(spec, name):
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1:
        return np.diag(arr)
    if arr.ndim == 2:
        return arr
    raise ValueError(f"{name} must be a vector (diagonal) or a matrix")


@dataclass
class ExperimentConfig:
    """Validated experiment description built from the JSON config."""

    raw: dict
    system: System
    cost_spec: CostSpec
    controller: ControllerConfig
    algos: list[str]
    n_trials: int
    base_seed: int
    t_total: float
    x0: np.ndarray

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_total / self.system.dt)))


def parse_config(raw: dict) -> ExperimentConfig:
    """Build all experiment objects from a config dict; strict about keys."""
    _reject_unknown(raw, {"system", "cost", "controller", "svgd",
                          "experiment"}, "config")
    for section in ("system", "cost", "controller", "experiment"):
        if section not in raw:
            raise ValueError(f"config is missing the {section!r} section")

    sys_sec = raw["system"]
    _reject_unknown(sys_sec, {"id", "params"}, "system")
    system = make_system(sys_sec["id"], sys_sec.get("params"))

    cost_sec = raw["cost"]
    _reject_unknown(cost_sec, {"Q", "R", "Q_T", "x_target", "u_ref",
                               "angle_dims"}, "cost")
    u_ref = cost_sec.get("u_ref")
    cost_spec = CostSpec(
        Q=_as_matrix(cost_sec["Q"], "Q"),
        R=_as_matrix(cost_sec["R"], "R"),
        Q_T=_as_matrix(cost_sec["Q_T"], "Q_T"),
        x_target=np.asarray(cost_sec["x_target"], dtype=float),
        u_ref=None if u_ref is None else np.asarray(u_ref, dtype=float),
        angle_dims=frozenset(cost_sec.get("angle_dims", ())),
    )

    svgd_sec = dict(raw.get("svgd", {}))
    _reject_unknown(svgd_sec, {"step_size", "iterations", "bandwidth",
                               "alpha", "use_squared_norm", "grad_clip"},
                    "svgd")
    svgd_cfg = SvgdConfig(**svgd_sec)

    ctrl_sec = dict(raw["controller"])
    _reject_unknown(ctrl_sec, {"K", "horizon", "lambda", "sigma", "seed",
                               "terminal_init"}, "controller")
    if "lambda" in ctrl_sec:
        ctrl_sec["lambda_"] = ctrl_sec.pop("lambda")
    controller = ControllerConfig(svgd=svgd_cfg, **ctrl_sec)

    exp_sec = raw["experiment"]
    _reject_unknown(exp_sec, {"algos", "n_trials", "base_seed", "t_total",
                              "x0", "out_dir"}, "experiment")
    algos = list(exp_sec["algos"])
    if not algos:
        raise ValueError("experiment.algos must be non-empty")
    n_trials = int(exp_sec.get("n_trials", 5))
    if n_trials < 1:
        raise ValueError("experiment.n_trials must be >= 1")
    x0 = np.asarray(exp_sec["x0"], dtype=float)
    if x0.shape != (system.state_dim,):
        raise ValueError("experiment.x0 dimension does not match the system")
    return ExperimentConfig(
        raw=raw, system=system, cost_spec=cost_spec, controller=controller,
        algos=algos, n_trials=n_trials,
        base_seed=int(exp_sec.get("base_seed", 0)),
        t_total=float(exp_sec.get("t_total", 1.0)), x0=x0)


def load_config(path) -> ExperimentConfig:
    """Load a JSON config file; a run manifest is accepted as well."""
    with open(path) as fh:
        raw = json.load(fh)
    if "config" in raw:   # manifest: reuse its embedded config snapshot
        raw = raw["config"]
    return parse_config(raw)


@dataclass
class RunManifest:
    """Everything needed to reproduce the run bit for bit."""

    config: dict
    version: str
    trial_seeds: list[int]
    started: str
    finished: str | None = None
    complete: bool = False
    record_files: dict = field(default_factory=dict)

    def to_dict(self):
        return {"config": self.config, "version": self.version,
                "trial_seeds": self.trial_seeds, "started": self.started,
                "finished": self.finished, "complete": self.complete,
                "record_files": self.record_files}


def default_metrics(config: ExperimentConfig):
    """Metric set of the benchmark tables, keyed by metric name."""
    if config.raw["system"]["id"] == "cartpole":
        def ts(criterion):
            return lambda r: settling_time(r, criterion)

        return {
            "mse_x": lambda r: mse(r, 0, 0.0),
            "mse_theta": lambda r: mse(r, 2, 0.0, wrap=True),
            "ts_x_0.25m": ts(SettlingCriterion(0, 0.0, 0.25)),
            "ts_x_0.5m": ts(SettlingCriterion(0, 0.0, 0.5)),
            "ts_theta_2pct": ts(SettlingCriterion(
                2, 0.0, 0.02, mode="fraction_of_range", wrap_angle=True)),
            "ts_theta_5pct": ts(SettlingCriterion(
                2, 0.0, 0.05, mode="fraction_of_range", wrap_angle=True)),
            "ts_theta_10pct": ts(SettlingCriterion(
                2, 0.0, 0.10, mode="fraction_of_range", wrap_angle=True)),
            "mean_step_wall_ms":
                lambda r: 1e3 * float(np.mean(r.step_wall_times)),
        }
    n = config.system.state_dim
    tgt = config.cost_spec.x_target
    return {f"mse_state_{i}": (lambda r, i=i: mse(r, i, float(tgt[i])))
            for i in range(n)}


def write_record_csv(path, record: TrialRecord):
    """CSV with columns t, state_*, u_*, wall_ms; last row has no control."""
    n = record.states.shape[1]
    m = record.controls.shape[1] if record.controls.size else 1
    header = (["t"] + [f"state_{i}" for i in range(n)]
              + [f"u_{j}" for j in range(m)] + ["wall_ms"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        n_ctrl = len(record.controls)
        for i, t in enumerate(record.times):
            row = [_FMT % t] + [_FMT % v for v in record.states[i]]
            if i < n_ctrl:
                row += [_FMT % v for v in record.controls[i]]
                row += [_FMT % (1e3 * record.step_wall_times[i])]
            else:
                row += [""] * (m + 1)
            w.writerow(row)


def read_record_csv(path) -> TrialRecord:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = sum(1 for h in header if h.startswith("state_"))
        m = sum(1 for h in header if h.startswith("u_"))
        times, states, controls, wall = [], [], [], []
        for row in reader:
            times.append(float(row[0]))
            states.append([float(v) for v in row[1:1 + n]])
            if row[1 + n] != "":
                controls.append([float(v) for v in row[1 + n:1 + n + m]])
                wall.append(float(row[-1]) / 1e3)
    return TrialRecord(times=np.asarray(times), states=np.asarray(states),
                       controls=np.asarray(controls),
                       step_wall_times=np.asarray(wall))


def _run_one_trial(config: ExperimentConfig, algo: str, trial: int):
    import dataclasses
    seed = config.base_seed + trial
    cfg = dataclasses.replace(config.controller, seed=seed)
    return run_episode(config.system, config.cost_spec, cfg, config.x0,
                       algo, config.n_steps)


def run_experiment(config: ExperimentConfig, out_dir,
                   workers: int = 1) -> RunManifest:
    """Run the full trial battery and persist records, summary, manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config=config.raw, version=__version__,
        trial_seeds=[config.base_seed + i for i in range(config.n_trials)],
        started=datetime.datetime.now(datetime.timezone.utc).isoformat())
    jobs = [(algo, i) for algo in config.algos for i in range(config.n_trials)]
    records: dict[str, dict[int, TrialRecord]] = {a: {} for a in config.algos}
    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(
                    lambda job: _run_one_trial(config, *job), jobs))
        else:
            results = [_run_one_trial(config, *job) for job in jobs]
        for (algo, i), rec in zip(jobs, results):
            fname = f"{algo}_trial_{i}.csv"
            write_record_csv(out / fname, rec)
            records[algo][i] = rec
            manifest.record_files[fname] = algo
        write_summary(config, records, out)
        manifest.complete = True
    finally:
        manifest.finished = datetime.datetime.now(
            datetime.timezone.utc).isoformat()
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest.to_dict(), fh, indent=2)
    return manifest


def write_summary(config: ExperimentConfig,
                  records: dict[str, dict[int, TrialRecord]], out_dir):
    """summary.csv (per-algo statistics) and pvalues.csv (pairwise tests)."""
    out = Path(out_dir)
    metric_fns = default_metrics(config)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algo", "metric", "mean", "std", "median", "n",
                    "n_nonconverged"])
        for algo in config.algos:
            recs = [records[algo][i] for i in sorted(records[algo])]
            for row in summarize(recs, metric_fns):
                w.writerow([algo, row.metric, _FMT % row.mean,
                            _FMT % row.std, _FMT % row.median, row.n,
                            row.n_nonconverged])
    with open(out / "pvalues.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algo_a", "algo_b", "metric", "t", "dof", "p_value"])
        for algo_a in config.algos:
            for algo_b in config.algos:
                if algo_a == algo_b:
                    continue
                for name, fn in metric_fns.items():
                    va = [fn(r) for r in records[algo_a].values()]
                    vb = [fn(r) for r in records[algo_b].values()]
                    va = [v for v in va if v is not None]
                    vb = [v for v in vb if v is not None]
                    try:
                        t, dof, p = welch_t_test_one_tailed(va, vb)
                        w.writerow([algo_a, algo_b, name, _FMT % t,
                                    _FMT % dof, _FMT % p])
                    except ValueError:
                        w.writerow([algo_a, algo_b, name, "", "", ""])


def emit_plot_data(records: dict[str, list[TrialRecord]], out_dir):
    """Per-signal time series CSVs (one column per trial), for any plotter."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for algo, recs in records.items():
        if not recs:
            continue
        n = recs[0].states.shape[1]
        m = recs[0].controls.shape[1]
        signals = [("state", i) for i in range(n)] + [("u", j) for j in range(m)]
        for kind, idx in signals:
            path = out / f"plot_{algo}_{kind}_{idx}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t"] + [f"trial_{i}" for i in range(len(recs))])
                base = recs[0].times if kind == "state" else recs[0].times[:-1]
                for r_i, t in enumerate(base):
                    row = [_FMT % t]
                    for rec in recs:
                        series = (rec.states[:, idx] if kind == "state"
                                  else rec.controls[:, idx])
                        row.append(_FMT % series[r_i])
                    w.writerow(row)
            written.append(path)
    return written

"""Multi-seed sweeps over one experiment variable.

A sweep fixes a base configuration and varies exactly one knob (noise
level, learning rate, width, ...) over a list of values, running several
seeds per value.  Outputs: ``runs.csv`` with one row per run,
``summary.csv`` with per-value aggregates, and ``plotdata.csv`` shaped
for the accuracy-vs-noise figure.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..distributions import analytic_profile
from ..rng import child_seed
from ..trainer import TrainingDivergedError, train
from .config import ARCHITECTURES, SWEEP_VARIABLES, ConfigError, build_run


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    seeds: int = 10

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.seeds < 1:
            raise ConfigError("sweep needs at least one seed")

    @staticmethod
    def from_config(section: dict) -> "SweepSpec":
        return SweepSpec(section["variable"], tuple(section["values"]),
                         int(section.get("seeds", 10)))


def apply_variable(data: dict, variable: str, value) -> dict:
    """Base config dict with one sweep variable substituted."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    out.pop("sweep", None)
    out.setdefault("network", {})
    out.setdefault("train", {})
    if variable == "opt_lin":
        out["distribution"] = dict(out["distribution"])
        out["distribution"].pop("b", None)
        out["distribution"]["opt_lin"] = float(value)
    elif variable == "learning_rate":
        out["train"]["step_size"] = float(value)
    elif variable == "init_variance":
        out["train"]["init_variance"] = float(value)
    elif variable == "width":
        out["network"]["m"] = int(value)
    elif variable == "activation":
        out["network"]["activation"] = str(value)
    elif variable == "batch_mode":
        out["train"]["batch"] = {"kind": str(value)}
    elif variable == "architecture":
        if value not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}")
        if value == "bias_trainable_outer":
            out["network"]["use_biases"] = True
            out["network"]["outer_trainable"] = True
        elif value == "deep3":
            out["network"]["depth"] = 3
            out["network"]["m"] = min(int(out["network"].get("m", 100)), 100)
            out["network"]["shuffle_outer_signs"] = True
    else:
        raise ConfigError(f"unknown sweep variable {variable!r}")
    return out


@dataclass
class SweepResult:
    variable: str
    rows: list
    cells: list
    failures: list

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.variable, "seed", "status", "test_error",
                    "test_accuracy", "best_iterate", "opt_lin", "bayes_risk"])
        for r in self.rows:
            w.writerow([r["value"], r["seed"], r["status"],
                        *(repr(r[k]) for k in ("test_error", "test_accuracy")),
                        r["best_iterate"],
                        *(repr(r[k]) for k in ("opt_lin", "bayes_risk"))])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.variable, "n_runs", "accuracy_mean", "accuracy_sd",
                    "error_mean", "opt_lin", "bayes_risk"])
        for c in self.cells:
            w.writerow([c["value"], c["n_runs"],
                        *(repr(c[k]) for k in ("accuracy_mean", "accuracy_sd",
                                               "error_mean", "opt_lin",
                                               "bayes_risk"))])
        return buf.getvalue()

    def plotdata_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["opt_lin", "nn_mean", "nn_sd", "linear_best", "bayes"])
        for c in self.cells:
            w.writerow([repr(c["opt_lin"]), repr(c["accuracy_mean"]),
                        repr(c["accuracy_sd"]), repr(1.0 - c["opt_lin"]),
                        repr(1.0 - c["bayes_risk"])])
        return buf.getvalue()


def run_sweep(data: dict, sweep: SweepSpec, paper_scale: bool = False,
              progress=None) -> SweepResult:
    """Run every (value, seed) cell; divergent runs are recorded, not fatal."""
    base_seed = int(data.get("train", {}).get("seed", 0))
    rows, cells, failures = [], [], []
    for vi, value in enumerate(sweep.values):
        cfg_dict = apply_variable(data, sweep.variable, value)
        accs, errs = [], []
        opt_lin = bayes = math.nan
        for si in range(sweep.seeds):
            seed = child_seed(base_seed, vi * sweep.seeds + si)
            spec, net, tc = build_run(cfg_dict, seed_override=seed,
                                      paper_scale=paper_scale)
            if math.isnan(opt_lin):
                try:
                    profile = analytic_profile(spec)
                    opt_lin, bayes = profile.opt_lin, profile.bayes_risk
                except Exception:
                    pass
            try:
                result, _ = train(spec, net, tc)
            except TrainingDivergedError as exc:
                failures.append({"value": value, "seed": seed, "step": exc.step,
                                 "message": str(exc)})
                rows.append({"value": value, "seed": seed, "status": "diverged",
                             "test_error": math.nan, "test_accuracy": math.nan,
                             "best_iterate": -1, "opt_lin": opt_lin,
                             "bayes_risk": bayes})
                continue
            rows.append({"value": value, "seed": seed, "status": "ok",
                         "test_error": result.test_error,
                         "test_accuracy": 1.0 - result.test_error,
                         "best_iterate": result.best_iterate,
                         "opt_lin": result.opt_lin,
                         "bayes_risk": result.bayes_risk})
            accs.append(1.0 - result.test_error)
            errs.append(result.test_error)
            if progress is not None:
                progress(sweep.variable, value, seed, rows[-1])
        acc = np.asarray(accs)
        cells.append({
            "value": value,
            "n_runs": len(accs),
            "accuracy_mean": float(np.mean(acc)) if len(accs) else math.nan,
            "accuracy_sd": float(np.std(acc, ddof=1)) if len(accs) > 1 else 0.0,
            "error_mean": float(np.mean(errs)) if errs else math.nan,
            "opt_lin": opt_lin,
            "bayes_risk": bayes,
        })
    return SweepResult(sweep.variable, rows, cells, failures)


def write_sweep(outdir: str | Path, result: SweepResult) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"runs": outdir / "runs.csv", "summary": outdir / "summary.csv",
             "plotdata": outdir / "plotdata.csv"}
    paths["runs"].write_text(result.runs_csv())
    paths["summary"].write_text(result.summary_csv())
    paths["plotdata"].write_text(result.plotdata_csv())
    return paths

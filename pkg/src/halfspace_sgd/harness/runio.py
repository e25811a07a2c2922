"""Result files for a single training run.

A run directory contains:

* ``result.json`` -- summary with sorted keys; deterministic for a fixed
  seed and code version except for the ``timing`` subtree,
* ``validation.csv`` -- the validation error curve,
* ``trace.csv`` -- per-cadence theory trace (when tracked),
* ``network.json`` -- the selected snapshot.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..network import params_from_json, params_to_json
from ..trainer import ExperimentResult, TheoryTrace, validation_curve_csv
from .version import __version__, artifact_hash


def result_payload(result: ExperimentResult, trace: TheoryTrace | None = None) -> dict:
    out = result.to_dict()
    out["artifact"] = {"version": __version__, "code_hash": artifact_hash()}
    if trace is not None and len(trace.t):
        out["theory"] = {
            "gamma_grid": list(trace.gamma_grid),
            "min_lemma41_slack": trace.min_lemma41_slack,
            "min_lemma42_slack": trace.min_lemma42_slack,
            "min_lemma43_slack": trace.min_lemma43_slack,
            "min_cauchy_schwarz_slack": trace.min_cauchy_schwarz_slack,
        }
    return out


def result_json(result: ExperimentResult, trace: TheoryTrace | None = None) -> str:
    return json.dumps(result_payload(result, trace), sort_keys=True, indent=2) + "\n"


def comparable_result(payload: dict | str) -> dict:
    """Payload with the timing subtree removed, for determinism checks."""
    if isinstance(payload, str):
        payload = json.loads(payload)
    out = dict(payload)
    out.pop("timing", None)
    return out


def write_run(outdir: str | Path, result: ExperimentResult,
              trace: TheoryTrace | None = None) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"result": outdir / "result.json",
             "validation": outdir / "validation.csv",
             "network": outdir / "network.json"}
    paths["result"].write_text(result_json(result, trace))
    paths["validation"].write_text(validation_curve_csv(result))
    paths["network"].write_text(params_to_json(result.params) + "\n")
    if trace is not None and len(trace.t):
        paths["trace"] = outdir / "trace.csv"
        paths["trace"].write_text(trace.to_csv())
    return paths


def load_result(outdir: str | Path) -> dict:
    return json.loads((Path(outdir) / "result.json").read_text())


def load_network(outdir: str | Path):
    return params_from_json((Path(outdir) / "network.json").read_text())

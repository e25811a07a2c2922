"""Figures: accuracy-vs-noise curves and decision-boundary rasters.

All figures are written as SVG via the non-interactive Agg backend; the
raster behind the decision-boundary heatmap is also exported as CSV so
it can be replotted without the model.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..network import NetworkParams, forward_batch  # noqa: E402

RASTER_EXTENT = 6.0
RASTER_SIZE = 300


def accuracy_figure(cells: list[dict], path: str | Path,
                    title: str = "Test accuracy vs. linear noise level"):
    """Accuracy curve against the analytic linear and Bayes baselines.

    ``cells`` rows need keys opt_lin, accuracy_mean, accuracy_sd,
    bayes_risk (the summary rows of a noise-level sweep).
    """
    cells = sorted(cells, key=lambda c: c["opt_lin"])
    opt = np.array([c["opt_lin"] for c in cells])
    mean = np.array([c["accuracy_mean"] for c in cells])
    sd = np.array([c["accuracy_sd"] for c in cells])
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.errorbar(opt, mean, yerr=sd, marker="o", capsize=3, label="network (SGD)")
    ax.plot(opt, 1.0 - opt, "--", color="gray", label="best linear")
    ax.plot(opt, [1.0 - c["bayes_risk"] for c in cells], ":", color="black",
            label="Bayes")
    ax.set_xlabel("best linear error (OPT)")
    ax.set_ylabel("test accuracy")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), format="svg")
    plt.close(fig)


def decision_raster(params: NetworkParams, extent: float = RASTER_EXTENT,
                    size: int = RASTER_SIZE) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(grid, outputs, confidence) of the network over [-extent, extent]^2.

    ``outputs`` is the raw network value per cell (row-major, row index
    increasing in x2); ``confidence`` is the logistic link 1/(1+e^{-f}).
    """
    if params.d != 2:
        raise ValueError("decision raster is a 2D visualization")
    axis = np.linspace(-extent, extent, size)
    xx, yy = np.meshgrid(axis, axis)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    out = forward_batch(params, pts).reshape(size, size)
    conf = 1.0 / (1.0 + np.exp(-np.clip(out, -60.0, 60.0)))
    return axis, out, conf


def raster_to_csv(axis: np.ndarray, values: np.ndarray) -> str:
    """CSV with x1,x2,value rows for a square raster."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x1", "x2", "value"])
    for i, x2 in enumerate(axis):
        for j, x1 in enumerate(axis):
            w.writerow([repr(float(x1)), repr(float(x2)),
                        repr(float(values[i, j]))])
    return buf.getvalue()


def boundary_figure(params: NetworkParams, path: str | Path,
                    samples: tuple[np.ndarray, np.ndarray] | None = None,
                    extent: float = RASTER_EXTENT, size: int = RASTER_SIZE):
    """Heatmap of the network's confidence with the zero level set."""
    axis, out, conf = decision_raster(params, extent, size)
    fig, ax = plt.subplots(figsize=(4.4, 4.0))
    im = ax.imshow(conf, origin="lower", extent=[-extent, extent, -extent, extent],
                   cmap="RdBu_r", vmin=0.0, vmax=1.0, interpolation="nearest")
    ax.contour(axis, axis, out, levels=[0.0], colors="black", linewidths=1.0)
    if samples is not None:
        X, y = samples
        keep = min(len(y), 2000)
        ax.scatter(X[:keep, 0], X[:keep, 1], c=np.where(y[:keep] > 0, "tab:red",
                                                        "tab:blue"), s=2, alpha=0.4)
    fig.colorbar(im, ax=ax, label="P(y = +1)")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    fig.tight_layout()
    fig.savefig(Path(path), format="svg")
    plt.close(fig)


def write_boundary_artifacts(params: NetworkParams, outdir: str | Path,
                             samples=None) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    axis, out, _ = decision_raster(params)
    paths = {"raster": outdir / "boundary_raster.csv",
             "figure": outdir / "boundary.svg"}
    paths["raster"].write_text(raster_to_csv(axis, out))
    boundary_figure(params, paths["figure"], samples)
    return paths

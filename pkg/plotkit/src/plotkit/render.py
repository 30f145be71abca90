"""Render verification report CSVs as region-map figures.

The input contract is the CSV artifacts of the verifier: a vertex report
with columns ``x1,x2,c1_pass,c4_pass`` and a simplex table ``v0,v1,v2``
indexing into it.  Marker layers: collocation points (black dots),
definiteness failures (blue stars), negativity failures (red dots) and
equilibria (green crosses).  Rendering is a pure function of the input
files so identical inputs produce byte-identical images.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

log = logging.getLogger("plotkit")


class PlotkitError(Exception):
    """Invalid input file or figure specification."""


@dataclass
class FigureSpec:
    vertices_csv: Path
    simplices_csv: Path
    out: Path
    points_csv: Path = None          # optional collocation points
    equilibria: list = field(default_factory=list)   # list of (x, y)
    box: tuple = None                # (x0, x1, y0, y1) axes limits
    dpi: int = 150

    def __post_init__(self):
        if self.box is not None:
            x0, x1, y0, y1 = self.box
            if not (x0 < x1 and y0 < y1):
                raise PlotkitError("axes box must satisfy x0 < x1 and y0 < y1")


def _load_table(path, required):
    path = Path(path)
    if not path.is_file():
        raise PlotkitError(f"input file {path} not found")
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None:
        raise PlotkitError(f"{path} has no CSV header")
    for col in required:
        if col not in data.dtype.names:
            raise PlotkitError(f"{path} is missing the column {col!r}")
    return np.atleast_1d(data)


def render(spec: FigureSpec) -> Path:
    verts = _load_table(spec.vertices_csv,
                        ["x1", "x2", "c1_pass", "c4_pass"])
    simps = _load_table(spec.simplices_csv, ["v0", "v1", "v2"])
    x, y = verts["x1"], verts["x2"]

    fig, ax = plt.subplots(figsize=(6.0, 6.0), dpi=spec.dpi)

    c1_fail = verts["c1_pass"] == 0
    c4_fail = verts["c4_pass"] == 0

    if spec.points_csv is not None:
        pts = _load_table(spec.points_csv, ["x1", "x2"])
        ax.plot(pts["x1"], pts["x2"], linestyle="none", marker=".",
                color="black", markersize=2, label="collocation points")
    if c1_fail.any():
        ax.plot(x[c1_fail], y[c1_fail], linestyle="none", marker="*",
                color="tab:blue", markersize=3,
                label="definiteness failures")
    else:
        log.warning("no definiteness failures; layer rendered empty")
    if c4_fail.any():
        ax.plot(x[c4_fail], y[c4_fail], linestyle="none", marker=".",
                color="tab:red", markersize=2, label="negativity failures")
    else:
        log.warning("no negativity failures; layer rendered empty")
    for ex, ey in spec.equilibria:
        ax.plot([ex], [ey], linestyle="none", marker="+", color="tab:green",
                markersize=10, markeredgewidth=2)

    if spec.box is not None:
        x0, x1, y0, y1 = spec.box
    else:
        # default extent: the triangulated domain
        vids = np.unique(np.concatenate(
            [simps["v0"], simps["v1"], simps["v2"]]).astype(int))
        x0, x1 = x[vids].min(), x[vids].max()
        y0, y1 = y[vids].min(), y[vids].max()
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal", adjustable="box")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="upper right", fontsize=8)

    out = Path(spec.out)
    fig.savefig(out, metadata={"Software": "plotkit"})
    plt.close(fig)
    return out

"""CSV serialization for paths and covariate panels.

Formats: `t,x` for a path and `t,z1,...,zp` for a panel, time first,
floats written with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path as FsPath

import numpy as np

from .covariates import CovariatePanel
from .errors import InvalidArgumentError
from .grids import Path, TimeGrid, make_grid


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def path_to_csv(path: Path) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "x"])
    for t, x in zip(path.grid.points(), path.values):
        writer.writerow([_fmt(t), _fmt(x)])
    return buf.getvalue()


def panel_to_csv(panel: CovariatePanel) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"z{l + 1}" for l in range(panel.p)])
    for k, t in enumerate(panel.grid.points()):
        writer.writerow([_fmt(t)] + [_fmt(v) for v in panel.columns[:, k]])
    return buf.getvalue()


def _grid_from_times(times: np.ndarray) -> TimeGrid:
    if len(times) < 2:
        raise InvalidArgumentError("need at least two grid points")
    return make_grid(times[0], times[-1] - times[0], len(times) - 1)


def path_from_csv(text: str) -> Path:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["t", "x"]:
        raise InvalidArgumentError("expected header 't,x'")
    data = np.array([[float(c) for c in row] for row in rows[1:]])
    grid = _grid_from_times(data[:, 0])
    return Path(grid=grid, values=data[:, 1], x0=float(data[0, 1]))


def panel_from_csv(text: str, standardized: bool = False) -> CovariatePanel:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "t":
        raise InvalidArgumentError("expected header 't,z1,...'")
    data = np.array([[float(c) for c in row] for row in rows[1:]])
    grid = _grid_from_times(data[:, 0])
    return CovariatePanel(grid, data[:, 1:].T, standardized=standardized)


def write_path_csv(path: Path, file: FsPath | str) -> None:
    FsPath(file).write_text(path_to_csv(path))


def write_panel_csv(panel: CovariatePanel, file: FsPath | str) -> None:
    FsPath(file).write_text(panel_to_csv(panel))


def read_path_csv(file: FsPath | str) -> Path:
    return path_from_csv(FsPath(file).read_text())


def read_panel_csv(file: FsPath | str, standardized: bool = False) -> CovariatePanel:
    return panel_from_csv(FsPath(file).read_text(), standardized=standardized)

"""Mode coverage, classifier surfaces, and the on-disk report.

Report files written by :func:`emit`:

``coverage.csv``
    ``metric,value`` rows: ``modes_hit``, ``total_modes``,
    ``high_quality_fraction``, ``dispersion`` then ``count_<k>`` per mode.
``series.csv``
    One row per PNM iteration: ``iteration,u_brs,security_gen,security_clf,
    subgame_value,accepted,n_gen,n_clf``.
``surface.csv``
    Header ``# xmin=.. xmax=.. ymin=.. ymax=.. nx=.. ny=..`` followed by
    ``ny`` rows of ``nx`` mixture-classifier outputs (row 0 is ``ymin``).
``samples.csv``
    ``x,y,kind`` with kind ``real`` or ``fake``.
``convergence.svg``, ``scatter.svg``
    Figures, see :mod:`gangs.plotting`.

Floats are written with ``repr`` so every file parses back bit-exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gang_model import GangSpec, MixedNetStrategy, mixture_classifier_output, sample_fakes
from .rbbr import BoundingBox, bounding_box
from .synth_data import GaussianMixture, assign_modes, sample

SERIES_COLUMNS = ("iteration", "u_brs", "security_gen", "security_clf", "subgame_value",
                  "accepted", "n_gen", "n_clf")


@dataclass
class CoverageReport:
    modes_hit: int
    total_modes: int
    high_quality_fraction: float
    per_mode_counts: list[int]
    # mean distance of assigned samples to their mode's sample centroid
    dispersion: float = 0.0


def coverage(samples, mix: GaussianMixture, k_sigma: float = 3.0) -> CoverageReport:
    pts = np.asarray(samples, dtype=float).reshape(-1, mix.dim)
    labels = assign_modes(pts, mix, k_sigma)
    counts = np.bincount(labels[labels >= 0], minlength=mix.k) if len(pts) else np.zeros(mix.k, dtype=int)
    hq = float((labels >= 0).mean()) if len(pts) else 0.0
    return CoverageReport(
        modes_hit=int(np.count_nonzero(counts)),
        total_modes=mix.k,
        high_quality_fraction=hq,
        per_mode_counts=[int(c) for c in counts],
        dispersion=mode_dispersion(pts, labels),
    )


def mode_dispersion(points: np.ndarray, labels: np.ndarray) -> float:
    """Average over modes (with >= 2 samples) of the mean distance to the mode's centroid."""
    per_mode = []
    for k in np.unique(labels[labels >= 0]):
        pts = points[labels == k]
        if len(pts) < 2:
            continue
        per_mode.append(np.linalg.norm(pts - pts.mean(axis=0), axis=1).mean())
    return float(np.mean(per_mode)) if per_mode else 0.0


def lattice(box: BoundingBox, resolution: int | tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 per axis")
    return np.linspace(box.lo[0], box.hi[0], nx), np.linspace(box.lo[1], box.hi[1], ny)


def classifier_surface(clf_mix: MixedNetStrategy, box: BoundingBox,
                       resolution: int | tuple[int, int] = 60) -> np.ndarray:
    """Mixture output on a regular lattice; ``grid[iy, ix]``."""
    xs, ys = lattice(box, resolution)
    gx, gy = np.meshgrid(xs, ys)
    out = mixture_classifier_output(clf_mix, np.column_stack([gx.ravel(), gy.ravel()]))
    return out.reshape(len(ys), len(xs))


@dataclass
class Report:
    coverage: CoverageReport
    series: list[dict] = field(default_factory=list)
    surface: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    surface_box: BoundingBox = field(default_factory=lambda: BoundingBox(np.zeros(2), np.ones(2)))
    real_samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    fake_samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def u_brs_series(self) -> list[float]:
        return [r["u_brs"] for r in self.series]

    @property
    def security_series(self) -> list[tuple[float, float]]:
        return [(r["security_gen"], r["security_clf"]) for r in self.series]

    @property
    def subgame_value_series(self) -> list[float]:
        return [r["subgame_value"] for r in self.series]


def series_from_history(history) -> list[dict]:
    return [{c: getattr(rec, c) for c in SERIES_COLUMNS} for rec in history]


def build_report(spec: GangSpec, gen_mix: MixedNetStrategy, clf_mix: MixedNetStrategy,
                 rng: np.random.Generator, history=(), n_samples: int = 2500,
                 k_sigma: float = 3.0, resolution: int = 60, margin: float = 0.25) -> Report:
    """Score ``gen_mix`` on fresh samples and tabulate the surface of ``clf_mix``.

    The surface box is the span of the real samples widened by ``margin`` of
    that span on each side, so stray generated points cannot stretch the plot.
    """
    reals = sample(spec.data, n_samples, rng)
    fakes = sample_fakes(gen_mix, spec.noise, n_samples, rng)
    box = bounding_box(reals, np.zeros((0, reals.shape[1]))).padded(margin)
    return Report(
        coverage=coverage(fakes, spec.data, k_sigma),
        series=series_from_history(history),
        surface=classifier_surface(clf_mix, box, resolution),
        surface_box=box,
        real_samples=reals,
        fake_samples=fakes,
    )


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_rows(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def emit(report: Report, directory, figures: bool = True) -> list[Path]:
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {d}: {exc}") from exc
    cov = report.coverage
    cov_rows = [("modes_hit", cov.modes_hit), ("total_modes", cov.total_modes),
                ("high_quality_fraction", _fmt(cov.high_quality_fraction)),
                ("dispersion", _fmt(cov.dispersion))]
    cov_rows += [(f"count_{k}", c) for k, c in enumerate(cov.per_mode_counts)]
    paths = [d / "coverage.csv", d / "series.csv", d / "surface.csv", d / "samples.csv"]
    _write_rows(paths[0], ("metric", "value"), cov_rows)
    _write_rows(paths[1], SERIES_COLUMNS, [[_fmt(r[c]) for c in SERIES_COLUMNS] for r in report.series])

    grid = np.asarray(report.surface, dtype=float)
    box = report.surface_box
    header = (f"# xmin={_fmt(box.lo[0])} xmax={_fmt(box.hi[0])} ymin={_fmt(box.lo[1])} ymax={_fmt(box.hi[1])} "
              f"nx={grid.shape[1]} ny={grid.shape[0]}\n")
    paths[2].write_text(header + "".join(",".join(_fmt(v) for v in row) + "\n" for row in grid))

    sample_rows = [(_fmt(x), _fmt(y), "real") for x, y in report.real_samples]
    sample_rows += [(_fmt(x), _fmt(y), "fake") for x, y in report.fake_samples]
    _write_rows(paths[3], ("x", "y", "kind"), sample_rows)

    if figures:
        from . import plotting
        paths.append(plotting.convergence_figure(report, d / "convergence.svg"))
        paths.append(plotting.scatter_figure(report, d / "scatter.svg"))
    return paths


def read_report(directory) -> Report:
    """Parse the CSV files written by :func:`emit`."""
    d = Path(directory)
    with open(d / "coverage.csv") as fh:
        cov = {row["metric"]: row["value"] for row in csv.DictReader(fh)}
    counts = [int(cov[k]) for k in sorted((k for k in cov if k.startswith("count_")),
                                          key=lambda k: int(k.split("_")[1]))]
    coverage_report = CoverageReport(int(cov["modes_hit"]), int(cov["total_modes"]),
                                     float(cov["high_quality_fraction"]), counts, float(cov["dispersion"]))
    series = []
    with open(d / "series.csv") as fh:
        for row in csv.DictReader(fh):
            rec = {c: float(row[c]) for c in SERIES_COLUMNS}
            for c in ("iteration", "n_gen", "n_clf"):
                rec[c] = int(row[c])
            rec["accepted"] = bool(int(row["accepted"]))
            series.append(rec)
    lines = (d / "surface.csv").read_text().splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    surface = np.array([[float(v) for v in line.split(",")] for line in lines[1:] if line])
    surface = surface.reshape(int(meta["ny"]), int(meta["nx"]))
    box = BoundingBox(np.array([float(meta["xmin"]), float(meta["ymin"])]),
                      np.array([float(meta["xmax"]), float(meta["ymax"])]))
    real, fake = [], []
    with open(d / "samples.csv") as fh:
        for row in csv.DictReader(fh):
            (real if row["kind"] == "real" else fake).append((float(row["x"]), float(row["y"])))
    return Report(coverage_report, series, surface, box,
                  np.array(real).reshape(-1, 2), np.array(fake).reshape(-1, 2))

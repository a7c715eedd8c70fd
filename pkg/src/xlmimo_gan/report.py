"""Persisted sweep rows and everything rendered from them.

A sweep directory contains ``sweep.json``, one ``rows_r<distance>.tsv`` per
distance group, and the rendered ``summary.tsv`` and ``nmse.png``. Rendering
reads only the rows files, so it can be repeated and gives identical bytes.
"""
from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, IntegrityError
from .sweep import ResultRow, SweepSpec

HEADER = ("axis_value", "method", "nmse_linear", "nmse_db", "n_test", "seed")
AXIS_LABELS = {"distance_r": "distance r (m)", "snr_db": "SNR (dB)",
               "pilot_length": "pilot length P", "eta": "L1 weight eta"}


def rows_path(out_dir, distance: float) -> Path:
    return Path(out_dir) / f"rows_r{distance!r}.tsv"


def write_sweep_manifest(out_dir, spec: SweepSpec) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.json"
    path.write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def format_rows(rows) -> str:
    lines = ["\t".join(HEADER)]
    for r in rows:
        lines.append("\t".join((repr(r.axis_value), r.method, repr(r.nmse_linear),
                                repr(r.nmse_db), str(r.n_test), str(r.seed))))
    return "\n".join(lines) + "\n"


def write_rows(out_dir, distance: float, rows) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = rows_path(out, distance)
    path.write_text(format_rows(rows), encoding="utf-8")
    return path


def read_rows(path) -> list[ResultRow]:
    path = Path(path)
    name = path.stem
    if not name.startswith("rows_r"):
        raise IntegrityError(f"{path} is not a rows file")
    distance = float(name[len("rows_r"):])
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != HEADER:
        raise IntegrityError(f"{path} has an unexpected header")
    rows = []
    for n, line in enumerate(lines[1:], 2):
        parts = line.split("\t")
        if len(parts) != len(HEADER):
            raise IntegrityError(f"{path}:{n}: expected {len(HEADER)} columns")
        rows.append(ResultRow(float(parts[0]), parts[1], float(parts[2]), float(parts[3]),
                              int(parts[4]), int(parts[5]), distance))
    return rows


def load_sweep(out_dir) -> tuple[dict, dict[float, list[ResultRow]]]:
    out = Path(out_dir)
    manifest_path = out / "sweep.json"
    if not manifest_path.is_file():
        raise ConfigError(f"no sweep results in {out}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    groups = {}
    for path in sorted(out.glob("rows_r*.tsv")):
        rows = read_rows(path)
        if rows:
            groups[rows[0].distance] = rows
    return manifest, dict(sorted(groups.items()))


def summarize(groups: dict[float, list[ResultRow]]):
    """Seed-averaged NMSE (dB of the mean linear value) per distance, axis value and method."""
    methods = []
    table = {}
    for distance, rows in groups.items():
        acc = defaultdict(list)
        for r in rows:
            acc[(r.axis_value, r.method)].append(r.nmse_linear)
            if r.method not in methods:
                methods.append(r.method)
        for (value, method), vals in acc.items():
            table[(distance, value, method)] = 10 * np.log10(np.mean(vals))
    return methods, table


def format_summary(groups: dict[float, list[ResultRow]]) -> str:
    methods, table = summarize(groups)
    lines = ["\t".join(("distance", "axis_value", *(f"{m}_db" for m in methods)))]
    for distance, rows in groups.items():
        values = sorted({r.axis_value for r in rows})
        for v in values:
            cells = [f"{table[(distance, v, m)]:.4f}" if (distance, v, m) in table else "nan"
                     for m in methods]
            lines.append("\t".join((f"{distance:g}", f"{v:g}", *cells)))
    return "\n".join(lines) + "\n"


def plot_summary(groups, axis: str, path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    methods, table = summarize(groups)
    fig, ax = plt.subplots(figsize=(6, 4))
    for distance, rows in groups.items():
        values = sorted({r.axis_value for r in rows})
        for m in methods:
            ys = [table.get((distance, v, m), np.nan) for v in values]
            label = m if len(groups) == 1 else f"{m}, r={distance:g} m"
            ax.plot(values, ys, marker="o", label=label)
    if axis == "eta":
        ax.set_xscale("log")
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("NMSE (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="png", dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def render_report(out_dir) -> dict[str, Path]:
    """(Re)write ``summary.tsv`` and ``nmse.png`` from the persisted rows."""
    out = Path(out_dir)
    manifest, groups = load_sweep(out)
    summary = out / "summary.tsv"
    summary.write_text(format_summary(groups), encoding="utf-8")
    plot = plot_summary(groups, manifest.get("axis", ""), out / "nmse.png")
    return {"summary": summary, "plot": plot}

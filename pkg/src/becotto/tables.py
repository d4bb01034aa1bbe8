"""Plain CSV tables with full double precision.

Schemas (header row first):

* energy series: t, omega, E_total, E_kin_inc, E_kin_comp, E_quantum, E_int, E_trap, mass
* thermal trace: step, t, E_total, rho_bar, mu
* cycle records: cycle_id, E_e_i, E_e_f, E_c_i, E_c_f, W_e, W_c, W, Q_h, eta
* spectrum: k, E_c
* density pdf: rho_lo, rho_hi, pdf, count
* efficiency histogram: eta_lo, eta_hi, density
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["FLOAT_FMT", "write_table", "read_table", "write_energy_series", "write_trace",
           "write_records", "write_spectrum", "write_pdf", "write_histogram"]

FLOAT_FMT = "%.17g"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % float(v)
    return str(v)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and float array of a table written by :func:`write_table`."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(x) for x in row] for row in r]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_energy_series(path, series) -> Path:
    return write_table(path, series.COLUMNS, series.as_array().tolist())


def write_trace(path, trace) -> Path:
    return write_table(path, trace.COLUMNS, trace.as_array().tolist())


def write_records(path, records) -> Path:
    from .engine import CycleRecord
    return write_table(path, CycleRecord.CSV_COLUMNS, [r.csv_row() for r in records])


def write_spectrum(path, k, E) -> Path:
    return write_table(path, ("k", "E_c"), zip(k, E))


def write_pdf(path, pdf) -> Path:
    e = pdf.bin_edges
    return write_table(path, ("rho_lo", "rho_hi", "pdf", "count"), zip(e[:-1], e[1:], pdf.pdf, pdf.counts))


def write_histogram(path, density, edges) -> Path:
    return write_table(path, ("eta_lo", "eta_hi", "density"), zip(edges[:-1], edges[1:], density))

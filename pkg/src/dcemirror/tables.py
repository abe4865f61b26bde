"""Dataset writers: CSV primary, JSON mirror, identical field names.

Trajectory schema:  t, n_a, n_b, Re_b, Im_b, Re_q, Im_q,
                    Re_cum_nab, Im_cum_nab, Re_cum_qdb, Im_cum_qdb
(reduced-model trajectories prepend a `model` column; their mechanical
occupation column holds |b|^2 and the cumulant columns are empty, since the
factorized tiers do not track correlators).

Sweep schema:       omega, tier, branch_index, x, n_a, abs_b2,
                    Re_b, Im_b, Re_q, Im_q, stability
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = (
    "t",
    "n_a",
    "n_b",
    "Re_b",
    "Im_b",
    "Re_q",
    "Im_q",
    "Re_cum_nab",
    "Im_cum_nab",
    "Re_cum_qdb",
    "Im_cum_qdb",
)

SWEEP_COLUMNS = (
    "omega",
    "tier",
    "branch_index",
    "x",
    "n_a",
    "abs_b2",
    "Re_b",
    "Im_b",
    "Re_q",
    "Im_q",
    "stability",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def quantum_trajectory_rows(traj) -> list[dict]:
    rows = []
    for t, rec in zip(traj.times, traj.records):
        cn = rec.cumulant_nab()
        cq = rec.cumulant_qdagb()
        rows.append(
            {
                "t": float(t),
                "n_a": rec.n_a,
                "n_b": rec.n_b,
                "Re_b": rec.b_amp.real,
                "Im_b": rec.b_amp.imag,
                "Re_q": rec.q_amp.real,
                "Im_q": rec.q_amp.imag,
                "Re_cum_nab": None if cn is None else cn.real,
                "Im_cum_nab": None if cn is None else cn.imag,
                "Re_cum_qdb": None if cq is None else cq.real,
                "Im_cum_qdb": None if cq is None else cq.imag,
            }
        )
    return rows


def semiclassical_trajectory_rows(traj, n_a_override=None) -> list[dict]:
    """Rows for a reduced-model trajectory; mean-field states report |a|^2 as
    n_a.  The mechanical occupation column carries the coherent part |b|^2."""
    rows = []
    for k, (t, s) in enumerate(zip(traj.times, traj.states)):
        if hasattr(s, "q"):
            b, q, n_a = s.b, s.q, s.n_a
        else:  # mean-field state
            b, q, n_a = s.b, s.a**2, abs(s.a) ** 2
        if n_a_override is not None:
            n_a = float(n_a_override[k])
        rows.append(
            {
                "model": traj.model.value,
                "t": float(t),
                "n_a": float(n_a),
                "n_b": float(abs(b) ** 2),
                "Re_b": b.real,
                "Im_b": b.imag,
                "Re_q": q.real,
                "Im_q": q.imag,
                "Re_cum_nab": None,
                "Im_cum_nab": None,
                "Re_cum_qdb": None,
                "Im_cum_qdb": None,
            }
        )
    return rows


def write_csv(path: str | Path, rows: list[dict], columns) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in columns])


def write_json(path: str | Path, rows: list[dict], columns, meta: dict | None = None) -> None:
    path = Path(path)
    payload = {col: [row.get(col) for row in rows] for col in columns}
    for col, values in payload.items():
        payload[col] = [None if (isinstance(v, float) and math.isnan(v)) else v for v in values]
    if meta:
        payload["meta"] = meta
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def read_table(path: str | Path) -> dict[str, np.ndarray]:
    """Read a CSV or JSON dataset back as named columns (numeric where possible)."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        data.pop("meta", None)
        out = {}
        for name, values in data.items():
            try:
                out[name] = np.array(
                    [math.nan if v in (None, "") else float(v) for v in values], dtype=float
                )
            except (TypeError, ValueError):
                out[name] = np.array(values, dtype=object)
        return out
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        raw_rows = list(reader)
    out = {}
    for j, name in enumerate(header):
        column = [row[j] if j < len(row) else "" for row in raw_rows]
        try:
            out[name] = np.array([math.nan if v == "" else float(v) for v in column], dtype=float)
        except ValueError:
            out[name] = np.array(column, dtype=object)
    return out

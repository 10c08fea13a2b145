"""File formats: alpha history CSV, turnover CSV, config and factor JSON.

Alpha history CSV: header ``t,<label>,...``; one row per observation with the
time index in column one, row ``t=0`` being the most recent. Turnover CSV:
header ``label,tau``. Config: flat JSON with strict keys (unknown keys are
rejected before any computation). All formats are documented in
``docs/file_formats.md``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InputError, MissingValues
from .model import AlphaSet, CostSpec, validate_alpha_set
from .optimizer import SolveOptions

_MISSING_TOKENS = {"", "na", "n/a", "nan", "none", "null"}

COST_KEYS = {
    "linear_coeff",
    "impact_coeff",
    "impact_exponent",
    "investment",
    "rho_star_override",
}
SOLVER_KEYS = {
    "lambda_scale",
    "max_iterations",
    "v_tolerance",
    "condition_tolerance",
    "outer_loop",
    "outer_max_rounds",
}
MISC_KEYS = {"seed", "factors"}


def _parse_cell(text: str, where: str) -> float:
    cell = text.strip()
    if cell.lower() in _MISSING_TOKENS:
        raise MissingValues(f"missing value at {where}")
    try:
        value = float(cell)
    except ValueError as exc:
        raise InputError(f"cannot parse number {cell!r} at {where}") from exc
    if math.isnan(value):
        raise MissingValues(f"missing value (NaN) at {where}")
    return value


def _open_rows(path) -> list:
    p = Path(path)
    if not p.exists():
        raise InputError(f"input file not found: {p}")
    with p.open(newline="") as handle:
        rows = [row for row in csv.reader(handle) if row and any(c.strip() for c in row)]
    if not rows:
        raise InputError(f"empty input file: {p}")
    return rows


def read_alpha_csv(path):
    """Parse an alpha history CSV into ``(history, labels)``."""
    rows = _open_rows(path)
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0].lower() != "t":
        raise InputError(
            f"{path}: first header column must be 't' followed by stream labels"
        )
    labels = tuple(header[1:])
    data = []
    for r, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise InputError(f"{path}: row {r + 1} has {len(row)} cells, expected {len(header)}")
        t_idx = _parse_cell(row[0], f"{path} row {r + 1} column t")
        if t_idx != r:
            raise InputError(
                f"{path}: time index must run 0..M from the most recent row; "
                f"row {r + 1} has t={row[0].strip()}"
            )
        data.append([_parse_cell(c, f"{path} row {r + 1} stream '{labels[j]}'")
                     for j, c in enumerate(row[1:])])
    return np.asarray(data, dtype=float), labels


def write_alpha_csv(path, history, labels) -> None:
    hist = np.asarray(history, dtype=float)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", *labels])
        for t, row in enumerate(hist):
            writer.writerow([t, *(repr(float(x)) for x in row)])


def read_turnover_csv(path) -> dict:
    """Parse a turnover CSV into an ordered ``{label: tau}`` mapping."""
    rows = _open_rows(path)
    header = [c.strip().lower() for c in rows[0]]
    if header != ["label", "tau"]:
        raise InputError(f"{path}: header must be 'label,tau'")
    out: dict = {}
    for r, row in enumerate(rows[1:]):
        if len(row) != 2:
            raise InputError(f"{path}: row {r + 1} must have exactly two cells")
        label = row[0].strip()
        if label in out:
            raise InputError(f"{path}: duplicate label {label!r}")
        out[label] = _parse_cell(row[1], f"{path} row {r + 1} tau")
    return out


def write_turnover_csv(path, labels, turnovers) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["label", "tau"])
        for label, tau in zip(labels, np.asarray(turnovers, dtype=float)):
            writer.writerow([label, repr(float(tau))])


def load_alpha_set(alpha_path, turnover_path=None) -> AlphaSet:
    """Read and validate the stream universe from CSV files.

    Turnovers are matched to streams by label (order-independent); streams
    without a turnover entry, or entries without a stream, are errors. With
    no turnover file every tau defaults to zero (enough for no-cost work).
    """
    history, labels = read_alpha_csv(alpha_path)
    if turnover_path is None:
        turnovers = np.zeros(len(labels))
    else:
        mapping = read_turnover_csv(turnover_path)
        missing = [l for l in labels if l not in mapping]
        if missing:
            raise DimensionMismatch(
                f"{turnover_path}: no turnover for streams {missing}"
            )
        extra = [l for l in mapping if l not in labels]
        if extra:
            raise DimensionMismatch(
                f"{turnover_path}: turnovers for unknown streams {extra}"
            )
        turnovers = np.array([mapping[l] for l in labels])
    return validate_alpha_set(history, turnovers, labels)


def load_config(path=None, overrides: dict | None = None):
    """Build ``(CostSpec, SolveOptions, misc)`` from a JSON config file.

    Unknown keys are rejected outright so typos cannot silently change a run.
    ``overrides`` (e.g. from CLI flags) take precedence over file values.
    """
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise InputError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{p}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise InputError(f"{p}: config must be a JSON object")
    if overrides:
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}

    allowed = COST_KEYS | SOLVER_KEYS | MISC_KEYS
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")

    cost_kwargs = {k: raw[k] for k in COST_KEYS if k in raw}
    solver_kwargs = {k: raw[k] for k in SOLVER_KEYS if k in raw}
    misc = {k: raw[k] for k in MISC_KEYS if k in raw}
    try:
        cost_spec = CostSpec(**cost_kwargs)
        options = SolveOptions(**solver_kwargs)
    except TypeError as exc:
        raise InputError(f"bad config value types: {exc}") from exc
    return cost_spec, options, misc


def load_factor_model_json(path):
    """Read a user factor model file: {"omega": [[..]], "phi": [[..]], "xi2": [..]}."""
    p = Path(path)
    if not p.exists():
        raise InputError(f"factor model file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: invalid JSON ({exc})") from exc
    for key in ("omega", "phi", "xi2"):
        if key not in raw:
            raise InputError(f"{p}: factor model file needs key {key!r}")
    return (
        np.asarray(raw["omega"], dtype=float),
        np.asarray(raw["phi"], dtype=float),
        np.asarray(raw["xi2"], dtype=float),
    )


def round_sig(value, digits: int = 12):
    """Round floats (recursively through dicts/lists) to significant digits.

    Reports round through this before serialization so the JSON numbers and
    the printed text agree exactly at the printed precision.
    """
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return value
        return float(f"{value:.{digits}g}")
    if isinstance(value, np.floating):
        return round_sig(float(value), digits)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [round_sig(v, digits) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: round_sig(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_sig(v, digits) for v in value]
    return value

"""File formats: datasets as CSV, reports as JSON, chains as JSON lines.

Missing responses are written as the bare token ``NA``.  Floats are written
with 17 significant digits so a write/read round trip is exact.  Every
output file is written to a temporary sibling and renamed into place.
"""

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from .exceptions import FileError, ValidationError
from .gibbs import GibbsState
from .model import MissingDataset

NA = "NA"
CHAIN_SCHEMA = "cwm-impute-chain"
CHAIN_SCHEMA_VERSION = 1


def fmt_float(x):
    return format(float(x), ".17g")


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise FileError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _read_text(path):
    try:
        with open(path, newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _clean(obj):
    """Make ``obj`` JSON-safe: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps_json(obj))


def read_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


def format_rows(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def _cell(v):
    if isinstance(v, str):
        return v
    return NA if v is None or (isinstance(v, float) and math.isnan(v)) else fmt_float(v)


def dataset_to_csv(data, extra=None):
    """CSV text for ``data``; ``extra`` is an ordered mapping of added columns."""
    extra = extra or {}
    header = list(data.column_names) + list(extra)
    cols = [data.X[:, j] for j in range(data.d)] + [np.where(data.mask, np.nan, data.y)]
    cols += [list(v) for v in extra.values()]
    rows = ([_cell(c[i]) for c in cols] for i in range(data.n))
    return format_rows(header, rows)


def write_dataset(path, data, extra=None):
    atomic_write(path, dataset_to_csv(data, extra))


def _parse_float(tok, path, row, col):
    try:
        v = float(tok)
    except ValueError:
        raise ValidationError(f"{path}: row {row}, column {col!r}: cannot parse {tok!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"{path}: row {row}, column {col!r}: non-finite value {tok!r}")
    return v


def read_table(path):
    """``(header, rows)`` of a CSV file with a header line."""
    rows = list(csv.reader(io.StringIO(_read_text(path))))
    rows = [r for r in rows if r]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValidationError(f"{path}: row {i} has {len(r)} fields, header has {len(header)}")
    return header, body


def read_dataset(path, response=None, covariates=None):
    """Load a CSV with a header; ``NA`` marks a missing response.

    By default the response is the last numeric column and every other column
    before it is a covariate.  Covariates must be fully observed.
    """
    header, body = read_table(path)
    if not body:
        raise ValidationError(f"{path}: no data rows")
    response = response or header[-1]
    if response not in header:
        raise ValidationError(f"{path}: response column {response!r} not found")
    if covariates is None:
        covariates = [h for h in header[:header.index(response)]]
    for c in covariates:
        if c not in header:
            raise ValidationError(f"{path}: covariate column {c!r} not found")
    X = np.empty((len(body), len(covariates)))
    y = np.empty(len(body))
    mask = np.zeros(len(body), dtype=bool)
    ci = [header.index(c) for c in covariates]
    ri = header.index(response)
    for i, r in enumerate(body):
        row = i + 2
        for k, j in enumerate(ci):
            tok = r[j].strip()
            if tok == NA:
                raise ValidationError(f"{path}: row {row}, column {header[j]!r}: "
                                      "covariates must be fully observed")
            X[i, k] = _parse_float(tok, path, row, header[j])
        tok = r[ri].strip()
        if tok == NA:
            mask[i] = True
            y[i] = np.nan
        else:
            y[i] = _parse_float(tok, path, row, response)
    return MissingDataset(X, y, mask, list(covariates) + [response])


def read_column(path, name):
    header, body = read_table(path)
    if name not in header:
        raise ValidationError(f"{path}: column {name!r} not found")
    j = header.index(name)
    return np.array([np.nan if r[j].strip() == NA else _parse_float(r[j].strip(), path, i + 2, name)
                     for i, r in enumerate(body)])


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------

_STATE_FIELDS = ("iteration", "log_posterior", "eta", "alpha", "nu", "delta", "mu", "sigma",
                 "z", "z_mis", "y_fill")


def chain_header(chain, column_names):
    first = chain.states[0]
    return {"schema": CHAIN_SCHEMA, "version": CHAIN_SCHEMA_VERSION,
            "fields": list(_STATE_FIELDS), "G": int(first.G), "p": int(first.mu.shape[1]),
            "columns": list(column_names), "burn_in": int(chain.burn_in),
            "iterations": int(chain.iterations), "map_index": int(chain.map_index)}


def state_record(state):
    return {k: _clean(getattr(state, k)) for k in _STATE_FIELDS}


def chain_to_jsonl(chain, column_names):
    lines = [json.dumps(chain_header(chain, column_names), sort_keys=True)]
    lines += [json.dumps(state_record(s), sort_keys=True) for s in chain.states]
    return "\n".join(lines) + "\n"


def write_chain(path, chain, column_names):
    atomic_write(path, chain_to_jsonl(chain, column_names))


def read_chain(path):
    """Return ``(header, states)`` from a chain file."""
    lines = [ln for ln in _read_text(path).splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty chain file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed header line: {exc.msg}") from exc
    if header.get("schema") != CHAIN_SCHEMA:
        raise ValidationError(f"{path}: not a chain file (schema {header.get('schema')!r})")
    if header.get("version") != CHAIN_SCHEMA_VERSION:
        raise ValidationError(f"{path}: chain schema version {header.get('version')!r} "
                              f"is not supported (expected {CHAIN_SCHEMA_VERSION})")
    states = []
    for i, ln in enumerate(lines[1:], start=2):
        try:
            r = json.loads(ln)
            states.append(GibbsState(
                z=np.asarray(r["z"], dtype=int), z_mis=np.asarray(r["z_mis"], dtype=int),
                y_fill=np.asarray(r["y_fill"], dtype=float), nu=np.asarray(r["nu"], dtype=float),
                alpha=np.asarray(r["alpha"], dtype=float), eta=float(r["eta"]),
                delta=np.asarray(r["delta"], dtype=float), mu=np.asarray(r["mu"], dtype=float),
                sigma=np.asarray(r["sigma"], dtype=float),
                log_posterior=float(r["log_posterior"]), iteration=int(r["iteration"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: line {i}: malformed state record ({exc})") from exc
    if not states:
        raise ValidationError(f"{path}: chain has no states")
    return header, states

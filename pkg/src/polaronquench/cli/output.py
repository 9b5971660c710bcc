"""Data files written by the CLI.

Every file starts with the resolved configuration, so a run can be repeated
from its own output. CSV files carry it in a single ``# {json}`` line.
Wall-clock information goes to a separate ``.run.json`` sidecar to keep the
data files byte-identical between repeated runs.
"""

import csv
import io
import json
import math
import os
import platform
import time

from .. import __version__
from ..observables import ObservableRecord
from .config import RunConfig

FLOAT_FORMAT = "{:.16e}"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else FLOAT_FORMAT.format(v)
    return str(v)


def _clean(obj):
    """JSON-safe copy: NaN/inf become strings, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def header(cfg: RunConfig, verb: str, extra=None) -> dict:
    meta = {"verb": verb, "code_version": __version__, "config": cfg.to_dict()}
    if extra:
        meta["results"] = extra
    return _clean(meta)


def csv_text(meta: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def timeseries_text(cfg: RunConfig, records, extra=None) -> str:
    return csv_text(header(cfg, "quench", extra), ObservableRecord.COLUMNS, (r.row() for r in records))


def read_csv(path):
    """(metadata, columns, rows of floats/strings) from a CLI CSV file."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing metadata line")
        meta = json.loads(first[2:])
        reader = csv.reader(fh)
        columns = next(reader)
        rows = []
        for raw in reader:
            row = []
            for v in raw:
                try:
                    row.append(float(v))
                except ValueError:
                    row.append(v)
            rows.append(row)
    return meta, columns, rows


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def write_json(path, cfg: RunConfig, verb: str, payload) -> str:
    doc = header(cfg, verb)
    doc["results"] = _clean(payload)
    return write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_sidecar(path, started: float):
    info = {
        "started_unix": started,
        "wall_clock_s": time.time() - started,
        "python": platform.python_version(),
        "host": platform.node(),
    }
    return write_text(path + ".run.json", json.dumps(info, indent=2, sort_keys=True) + "\n")

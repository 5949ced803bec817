"""Reading counting-process style heart transplant records.

Each patient has one row (never transplanted) or two rows (pre- and
post-transplant) with columns ``id,start,stop,event,transplant,age,year,surgery``.
The two rows of a transplanted patient are merged into one PatientRecord.
"""
import csv
from collections import Counter
from importlib import resources
from pathlib import Path

from .errors import InconsistentPair, MalformedRow, NonmonotoneInterval
from .heart import SCENARIOS, Covariates, PatientRecord

COLUMNS = ("id", "start", "stop", "event", "transplant", "age", "year", "surgery")
BUNDLED = "stanford_heart.csv"


def _parse_row(lineno, row):
    if len(row) != len(COLUMNS):
        raise MalformedRow(lineno, f"expected {len(COLUMNS)} fields, got {len(row)}")
    try:
        start, stop, age, year = (float(row[i]) for i in (1, 2, 5, 6))
        event, transplant, surgery = (int(float(row[i])) for i in (3, 4, 7))
    except ValueError as e:
        raise MalformedRow(lineno, str(e)) from None
    for name, v in (("event", event), ("transplant", transplant), ("surgery", surgery)):
        if v not in (0, 1):
            raise MalformedRow(lineno, f"{name} must be 0 or 1, got {v}")
    pid = row[0].strip()
    if not pid:
        raise MalformedRow(lineno, "empty id")
    if start >= stop:
        raise NonmonotoneInterval(pid, f"start {start} >= stop {stop} on line {lineno}")
    return {"id": pid, "start": start, "stop": stop, "event": event,
            "transplant": transplant, "cov": (age, year, surgery)}


def _merge(pid, rows):
    if len(rows) > 2:
        raise InconsistentPair(pid, f"{len(rows)} rows")
    if len({r["cov"] for r in rows}) > 1:
        raise InconsistentPair(pid, "covariates differ between rows")
    first = rows[0]
    age, year, surgery = first["cov"]
    cov = Covariates(age, year, surgery)
    if len(rows) == 1:
        if first["start"] != 0 and not first["transplant"]:
            raise NonmonotoneInterval(pid, "follow-up does not start at 0")
        tt = first["start"] if first["transplant"] else None
        return PatientRecord(pid, tt, first["stop"], bool(first["event"]), cov)
    second = rows[1]
    if first["transplant"] or not second["transplant"]:
        raise InconsistentPair(pid, "expected a pre-transplant row followed by a transplant row")
    if first["event"]:
        raise InconsistentPair(pid, "death recorded before transplant")
    if first["start"] != 0:
        raise NonmonotoneInterval(pid, "follow-up does not start at 0")
    if second["start"] != first["stop"]:
        raise NonmonotoneInterval(pid, f"gap between {first['stop']} and {second['start']}")
    return PatientRecord(pid, second["start"], second["stop"], bool(second["event"]), cov)


def parse_heart_rows(lines):
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise MalformedRow(0, "empty file")
    if tuple(h.strip() for h in header) != COLUMNS:
        raise MalformedRow(1, f"header must be {','.join(COLUMNS)}")
    grouped = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        r = _parse_row(lineno, row)
        grouped.setdefault(r["id"], []).append(r)
    return [_merge(pid, sorted(rows, key=lambda r: r["start"])) for pid, rows in grouped.items()]


def read_heart_csv(path):
    with open(Path(path), newline="") as fh:
        return parse_heart_rows(fh)


def load_stanford():
    """The bundled 103-patient Stanford heart transplant data."""
    text = resources.files("phrec").joinpath("data").joinpath(BUNDLED).read_text()
    return parse_heart_rows(text.splitlines())


def scenario_counts(patients):
    c = Counter(p.scenario for p in patients)
    return {s: c.get(s, 0) for s in SCENARIOS}

"""Report tables for the heart model and CSV helpers shared by the CLI."""
import csv
from dataclasses import dataclass
from itertools import product

import numpy as np

from .counts import count_distribution
from .heart import DISEASE, TRANSPLANT, Covariates, build_generator
from .units import parse_duration

HORIZON_LABELS = ("1m", "3m", "6m", "1y", "3y")
HORIZONS_DAYS = tuple(parse_duration(h) for h in HORIZON_LABELS)
COUNT_PROFILES = tuple(product((30, 50), (3, 5), (0, 1)))
SOJOURN_AGES = (30, 40, 50, 60)
SOJOURN_PROFILE = (3, 0)           # year, surgery used for the sojourn and transition tables
TRANSITION_AGE = 30
AGE_SCALES = ("file", "raw")


def covariates(age, year, surgery, scale="file"):
    """Covariates for an age in years; ``file`` scale subtracts the data file's centering."""
    if scale == "file":
        return Covariates.from_age_years(age, year, surgery)
    if scale == "raw":
        return Covariates(float(age), year, surgery)
    raise ValueError(f"age scale must be one of {AGE_SCALES}")


@dataclass(frozen=True, eq=False)
class HeartTables:
    horizons: tuple
    counts: dict        # (age, year, surgery) -> array (3, H): P[N(t)=0,1,2]
    sojourn: dict       # age -> array (H,) in days
    transitions: np.ndarray   # (3, H): disease->transplant, disease->death, transplant->death
    scale: str

    def count_rows(self):
        for prof, arr in self.counts.items():
            for l in range(arr.shape[0]):
                yield (*prof, l, *arr[l])

    def sojourn_rows(self):
        for age, arr in self.sojourn.items():
            yield (age, *arr)

    def transition_rows(self):
        names = (("disease", "transplant"), ("disease", "death"), ("transplant", "death"))
        for (a, b), row in zip(names, self.transitions):
            yield (a, b, *row)


def heart_tables(theta, scale="file", horizons=HORIZONS_DAYS):
    h = np.asarray(horizons, dtype=float)
    counts = {}
    for age, year, surgery in COUNT_PROFILES:
        model = build_generator(theta, covariates(age, year, surgery, scale))
        counts[(age, year, surgery)] = count_distribution(model, DISEASE, h, 2).probs.T
    sojourn = {}
    for age in SOJOURN_AGES:
        model = build_generator(theta, covariates(age, *SOJOURN_PROFILE, scale))
        sojourn[age] = np.array([model.expected_sojourn(DISEASE, 0.0, t) for t in h])
    model = build_generator(theta, covariates(TRANSITION_AGE, *SOJOURN_PROFILE, scale))
    trans = np.zeros((3, h.size))
    for c, t in enumerate(h):
        trans[0, c] = model.stage_transition_prob(DISEASE, TRANSPLANT, 0.0, t)
        trans[1:, c] = model.death_by_stage(DISEASE, 0.0, t)
    return HeartTables(tuple(h), counts, sojourn, trans, scale)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, (float, np.floating)) else v for v in row])


def format_table(header, rows, width=11):
    lines = ["".join(f"{h:>{width}}" for h in header)]
    for row in rows:
        cells = [f"{v:>{width}.4g}" if isinstance(v, (float, np.floating)) else f"{v!s:>{width}}"
                 for v in row]
        lines.append("".join(cells))
    return "\n".join(lines)


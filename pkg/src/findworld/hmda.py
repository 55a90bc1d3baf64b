"""HMDA loan-application recoding and a synthetic HMDA-like fixture.

Recode rules are JSON. Every output column names a ``source`` (one raw
column, or several joined by ``|``), a ``map`` from raw value to 0/1 and a
``drop`` list of values that filter the row out. Keys may use ``*`` as a
per-part wildcard. Numeric columns set ``kind: numeric`` and an optional
``transform`` (``log``). A raw value matched by neither list raises
:class:`UnmappedCategory`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset import BINARY, NUMERIC, Dataset
from .errors import ConfigError, UnmappedCategory

RAW_COLUMNS = ("action_taken", "derived_race", "derived_ethnicity", "loan_amount", "loan_purpose",
               "debt_to_income_ratio", "applicant_age_above_62", "derived_sex")
EXTRACT_TARGETS = {"rows": 83_808, "base_rate": 0.668, "base_rate_a_prime": 0.679, "base_rate_a": 0.486}


@dataclass
class ColumnRule:
    name: str
    source: tuple
    kind: str = BINARY
    mapping: dict = field(default_factory=dict)
    drop: tuple = ()
    transform: str | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def _match(self, table, key):
        if key in table:
            return True, table[key] if isinstance(table, dict) else None
        parts = key.split("|")
        for pattern in table:
            pp = pattern.split("|")
            if len(pp) == len(parts) and all(p == "*" or p == v for p, v in zip(pp, parts)):
                return True, table[pattern] if isinstance(table, dict) else None
        return False, None

    def encode(self, raw: dict):
        """Encoded value, or ``None`` when the row is dropped; raises on unknown values."""
        key = "|".join(str(raw.get(s, "")).strip() for s in self.source)
        try:
            return self._cache[key]
        except KeyError:
            value = self._encode_key(key)
        self._cache[key] = value
        return value

    def _encode_key(self, key):
        if self._match(self.drop, key)[0]:
            return None
        if self.kind == NUMERIC:
            try:
                x = float(key)
            except ValueError:
                raise UnmappedCategory(self.name, [key]) from None
            if self.transform == "log":
                return math.log(x) if x > 0 else None
            return x if math.isfinite(x) else None
        hit, value = self._match(self.mapping, key)
        if not hit:
            raise UnmappedCategory(self.name, [key])
        return float(value)


@dataclass
class HmdaEncodingRules:
    protected: str
    target: str
    columns: list

    @classmethod
    def from_dict(cls, d: dict) -> "HmdaEncodingRules":
        try:
            cols = []
            for name, c in d["columns"].items():
                src = c["source"]
                cols.append(ColumnRule(name, tuple([src] if isinstance(src, str) else src),
                                       c.get("kind", BINARY), dict(c.get("map", {})),
                                       tuple(c.get("drop", ())), c.get("transform")))
            rules = cls(d["protected"], d["target"], cols)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed HMDA rules: {exc}", field="rules") from None
        names = [c.name for c in cols]
        for role in ("protected", "target"):
            if getattr(rules, role) not in names:
                raise ConfigError(f"{role} column is not defined", field=f"rules.{role}")
        return rules

    @classmethod
    def load(cls, path=None) -> "HmdaEncodingRules":
        if path is None:
            text = resources.files("findworld").joinpath("data/hmda_rules.json").read_text()
        else:
            text = Path(path).read_text()
        return cls.from_dict(json.loads(text))


@dataclass
class EncodeReport:
    rows_in: int
    rows_out: int
    dropped: dict  # output column -> rows dropped by that column's rule (first match wins)

    def to_dict(self):
        return {"rows_in": self.rows_in, "rows_out": self.rows_out, "dropped": dict(self.dropped)}


def hmda_encode(rows, rules: HmdaEncodingRules | None = None):
    """Recode raw HMDA rows into a :class:`Dataset`; returns ``(dataset, report)``.

    Rules are applied column by column in declaration order and a row is
    dropped at the first rule that filters it.
    """
    rules = rules or HmdaEncodingRules.load()
    values = {c.name: [] for c in rules.columns}
    dropped = {c.name: 0 for c in rules.columns}
    n_in = 0
    for raw in rows:
        n_in += 1
        encoded = {}
        for c in rules.columns:
            v = c.encode(raw)
            if v is None:
                dropped[c.name] += 1
                break
            encoded[c.name] = v
        else:
            for k, v in encoded.items():
                values[k].append(v)
    kinds = {c.name: c.kind for c in rules.columns}
    cols = {k: np.asarray(v, dtype=float) for k, v in values.items()}
    ds = Dataset(cols, kinds, rules.protected, rules.target)
    return ds, EncodeReport(n_in, ds.n_rows, dropped)


def read_raw(path):
    with open(path, newline="") as fh:
        yield from csv.DictReader(fh)


def default_dag() -> dict:
    return json.loads(resources.files("findworld").joinpath("data/hmda_dag.json").read_text())


_LOW_DTI = ["<20%", "20%-<30%", "30%-<36%"] + [str(k) for k in range(36, 44)]
_HIGH_DTI = [str(k) for k in range(44, 50)] + ["50%-60%", ">60%"]
_OTHER_RACES = ["Asian", "American Indian or Alaska Native", "2 or more minority races", "Joint",
                "Race Not Available"]


def synthetic_fixture(path, seed=0, n_white=79_450, n_black=4_358, base_white=0.679,
                      base_black=0.486, n_extra=12_000) -> Path:
    """Write a raw HMDA-like CSV whose retained rows hit the given group sizes and base rates.

    Approval is a threshold on a latent logistic score, with the per-group
    threshold set so the group's approval count is exactly
    ``round(base * n)``. ``n_extra`` further rows fall to the filters
    (other races, withdrawn or purchased loans, missing codes).
    """
    rng = np.random.default_rng(seed)
    n = n_white + n_black
    black = np.r_[np.zeros(n_white), np.ones(n_black)]
    female = rng.random(n) < np.where(black == 1, 0.48, 0.30)
    age62 = rng.random(n) < np.where(black == 1, 0.17, 0.26)
    purpose = rng.random(n) < 1 / (1 + np.exp(-(0.1 - 0.35 * black + 0.2 * female - 0.6 * age62)))
    high_dti = rng.random(n) < 1 / (1 + np.exp(-(-1.1 + 0.8 * black + 0.15 * female + 0.2 * age62)))
    log_amount = (12.2 - 0.4 * black + 0.35 * purpose - 0.25 * age62 - 0.1 * female
                  + rng.normal(0, 0.65, n))
    score = (-1.6 * high_dti + 0.5 * purpose + 0.45 * (log_amount - 12.2) + 0.2 * age62
             + rng.logistic(0, 1.0, n))
    approved = np.zeros(n, bool)
    for g, base in ((0, base_white), (1, base_black)):
        idx = np.flatnonzero(black == g)
        k = int(round(base * idx.size))
        approved[idx[np.argsort(-score[idx], kind="stable")[:k]]] = True

    def pick(options, size, p=None):
        return np.asarray(options, dtype=object)[rng.choice(len(options), size=size, p=p)]

    amount = (np.round(np.exp(log_amount) / 10_000) * 10_000 + 5_000).astype(int)
    rows = {
        "action_taken": np.where(approved, pick(["1", "2", "8"], n, [0.9, 0.07, 0.03]),
                                 pick(["3", "7"], n, [0.95, 0.05])),
        "derived_race": np.where(black == 1, "Black or African American", "White"),
        "derived_ethnicity": np.where(black == 1, pick(["Not Hispanic or Latino", "Hispanic or Latino",
                                                        "Ethnicity Not Available"], n, [0.9, 0.04, 0.06]),
                                      "Not Hispanic or Latino"),
        "loan_amount": amount.astype(str),
        "loan_purpose": np.where(purpose, "1", pick(["2", "31", "32", "4", "5"], n)),
        "debt_to_income_ratio": np.where(high_dti, pick(_HIGH_DTI, n), pick(_LOW_DTI, n)),
        "applicant_age_above_62": np.where(age62, "Yes", "No"),
        "derived_sex": np.where(female, "Female", pick(["Male", "Joint", "Sex Not Available"], n,
                                                       [0.7, 0.25, 0.05])),
    }
    extra = {
        "action_taken": pick(["1", "3", "4", "5", "6"], n_extra),
        "derived_race": pick(_OTHER_RACES + ["White", "Black or African American"], n_extra),
        "derived_ethnicity": pick(["Not Hispanic or Latino", "Hispanic or Latino"], n_extra),
        "loan_amount": pick(["105000", "255000", "405000"], n_extra),
        "loan_purpose": pick(["1", "2", "31"], n_extra),
        "debt_to_income_ratio": pick(_LOW_DTI[:3] + ["Exempt", "NA"], n_extra),
        "applicant_age_above_62": pick(["Yes", "No", "NA"], n_extra),
        "derived_sex": pick(["Male", "Female"], n_extra),
    }
    # every extra row must fail at least one filter
    keep = ((np.isin(extra["action_taken"], ["1", "3"]))
            & ((extra["derived_race"] == "Black or African American")
               | ((extra["derived_race"] == "White")
                  & (extra["derived_ethnicity"] == "Not Hispanic or Latino")))
            & ~np.isin(extra["debt_to_income_ratio"], ["Exempt", "NA"])
            & (extra["applicant_age_above_62"] != "NA"))
    extra["action_taken"] = np.where(keep, "4", extra["action_taken"])
    order = rng.permutation(n + n_extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_COLUMNS)
        merged = [np.r_[rows[c], extra[c]][order] for c in RAW_COLUMNS]
        writer.writerows(zip(*merged))
    return path

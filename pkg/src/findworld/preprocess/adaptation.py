"""Quantile adaptation ("fair twins").

Conditional distributions of each descendant are estimated by empirical
quantiles within parent strata: binary parents stratify on their value,
numeric parents on train-set deciles. A non-baseline row keeps its
conditional quantile while moving to the baseline group's distribution at
its adapted parents. Strata with fewer than ``min_stratum`` rows fall back
to the nearest populated stratum (L1 distance over stratum indices).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import BINARY, Dataset
from ..errors import DegenerateGroup, SchemaMismatch
from ._ranks import binary_rank, binary_value, quantile_grid, rank_of, value_at
from .graph import AdjacencyInfo

log = logging.getLogger(__name__)


@dataclass
class StratifiedQuantiles:
    """Per-stratum empirical distribution of one node within one group."""

    binary: bool
    tables: dict  # stratum key (tuple of ints) -> sorted grid, or (count, p_one)
    min_stratum: int = 5

    def _count(self, key):
        t = self.tables[key]
        return t[0] if self.binary else len(t)

    def lookup(self, key):
        """Return (table, key_used), falling back to the nearest adequately sized stratum."""
        if key in self.tables and self._count(key) >= self.min_stratum:
            return self.tables[key], key
        candidates = [k for k in self.tables if self._count(k) >= self.min_stratum]
        if not candidates:
            candidates = list(self.tables)
        best = min(candidates, key=lambda k: (sum(abs(a - b) for a, b in zip(k, key)),
                                              -self._count(k), k))
        return self.tables[best], best

    def to_dict(self):
        return {"binary": self.binary, "min_stratum": self.min_stratum,
                "tables": [[list(k), [float(t) for t in v]] for k, v in sorted(self.tables.items())]}

    @classmethod
    def from_dict(cls, d):
        tables = {tuple(k): (tuple(v) if d["binary"] else np.asarray(v)) for k, v in d["tables"]}
        return cls(d["binary"], tables, d["min_stratum"])


@dataclass
class AdaptModel:
    adjacency: AdjacencyInfo
    baseline: float
    edges: dict  # numeric parent -> decile edges
    nodes: dict  # node -> {"parents": [...], "baseline": SQ, "other": SQ}
    seed: int = 0
    columns: list = field(default_factory=list)
    fallbacks: dict = field(default_factory=dict)

    def strata(self, cols: dict, parents, rows) -> list:
        if not parents:
            return [()] * int(rows.sum())
        codes = []
        for p in parents:
            x = cols[p][rows]
            codes.append(np.searchsorted(self.edges[p], x, side="right") if p in self.edges
                         else x.astype(int))
        return [tuple(int(c) for c in row) for row in np.column_stack(codes)]

    def to_dict(self) -> dict:
        return {
            "method": "adapt",
            "adjacency": self.adjacency.to_dict(),
            "baseline": self.baseline,
            "edges": {k: list(v) for k, v in self.edges.items()},
            "seed": self.seed,
            "columns": self.columns,
            "nodes": {v: {"parents": m["parents"], "baseline": m["baseline"].to_dict(),
                          "other": m["other"].to_dict()} for v, m in self.nodes.items()},
        }

    @classmethod
    def from_dict(cls, d) -> "AdaptModel":
        nodes = {v: {"parents": m["parents"],
                     "baseline": StratifiedQuantiles.from_dict(m["baseline"]),
                     "other": StratifiedQuantiles.from_dict(m["other"])}
                 for v, m in d["nodes"].items()}
        return cls(AdjacencyInfo.from_dict(d["adjacency"]), d["baseline"],
                   {k: np.asarray(v) for k, v in d["edges"].items()}, nodes, d["seed"], d["columns"])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _decile_edges(x) -> np.ndarray:
    return np.unique(np.quantile(x, np.linspace(0.1, 0.9, 9)))


def _tabulate(values, keys, binary, min_stratum) -> StratifiedQuantiles:
    groups = {}
    for k, x in zip(keys, values):
        groups.setdefault(k, []).append(x)
    if binary:
        tables = {k: (len(v), float(np.mean(v))) for k, v in groups.items()}
    else:
        tables = {k: quantile_grid(v) for k, v in groups.items()}
    return StratifiedQuantiles(binary, tables, min_stratum)


def adapt_fit(train: Dataset, adj: AdjacencyInfo, baseline=0.0, seed=0, min_stratum=5) -> AdaptModel:
    adj.check(train)
    pa = train.pa
    rows_base = pa == baseline
    rows_other = ~rows_base
    if not rows_base.any() or not rows_other.any():
        raise DegenerateGroup("both protected-attribute groups must be non-empty")
    edges = {}
    for v in adj.transformed:
        for p in adj.model_parents(v):
            if train.kinds[p] != BINARY and p not in edges:
                edges[p] = _decile_edges(train[p])
    model = AdaptModel(adj, float(baseline), edges, {}, seed, list(train.names))
    for v in adj.transformed:
        parents = adj.model_parents(v)
        binary = train.kinds[v] == BINARY
        entry = {"parents": parents}
        for role, rows in (("baseline", rows_base), ("other", rows_other)):
            keys = model.strata(train.columns, parents, rows)
            entry[role] = _tabulate(train[v][rows], keys, binary, min_stratum)
        model.nodes[v] = entry
    return model


def adapt_apply(model: AdaptModel, ds: Dataset) -> Dataset:
    """Project every non-baseline row onto the baseline group; the PA column is kept as is."""
    if list(ds.names) != model.columns:
        raise SchemaMismatch(f"columns {list(ds.names)} differ from fit-time {model.columns}")
    rows = ds.pa != model.baseline
    idx = np.flatnonzero(rows)
    rng = np.random.default_rng(model.seed)
    out = {k: np.array(v) for k, v in ds.columns.items()}
    model.fallbacks = {}
    for v, spec in model.nodes.items():
        parents = spec["parents"]
        draws = rng.random(ds.n_rows)[rows]
        if idx.size == 0:
            continue
        src_keys = model.strata(ds.columns, parents, rows)
        tgt_keys = model.strata(out, parents, rows)
        x = ds[v][rows]
        pairs = {}
        for i, key in enumerate(zip(src_keys, tgt_keys)):
            pairs.setdefault(key, []).append(i)
        new = np.empty(idx.size)
        n_fallback = 0
        for (ks, kt), members in pairs.items():
            members = np.asarray(members)
            src, used_s = spec["other"].lookup(ks)
            tgt, used_t = spec["baseline"].lookup(kt)
            n_fallback += members.size * ((used_s != ks) + (used_t != kt))
            if spec["other"].binary:
                u = binary_rank(x[members], src[1], draws[members])
                new[members] = binary_value(u, tgt[1])
            else:
                new[members] = value_at(rank_of(x[members], src), tgt)
        if n_fallback:
            log.info("adapt %s: %d stratum lookups fell back to a neighbouring stratum", v, n_fallback)
        model.fallbacks[v] = n_fallback
        out[v][rows] = new
    return ds.replace(out)

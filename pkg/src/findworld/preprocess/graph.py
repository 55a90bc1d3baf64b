"""Graph bookkeeping shared by the pre-processing methods."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError, SchemaMismatch
from ..scm import ScmSpec, topological_order


@dataclass(frozen=True)
class AdjacencyInfo:
    parents: dict
    protected: str
    target: str
    order: tuple
    descendants: frozenset

    @classmethod
    def from_parents(cls, parents: dict, protected: str, target: str) -> "AdjacencyInfo":
        parents = {k: list(v) for k, v in parents.items()}
        for role, name in (("protected", protected), ("target", target)):
            if name not in parents:
                raise ConfigError(f"{name!r} is not a node of the graph", field=role)
        if parents[protected]:
            raise ConfigError("protected attribute must be a root node", field="protected")
        order = tuple(topological_order(parents))
        children = {k: [] for k in parents}
        for child, ps in parents.items():
            for p in ps:
                children[p].append(child)
        seen, stack = set(), [protected]
        while stack:
            for c in children[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return cls(parents, protected, target, order, frozenset(seen))

    @classmethod
    def from_scm(cls, spec: ScmSpec) -> "AdjacencyInfo":
        return cls.from_parents(spec.parents, spec.protected_node, spec.target_node)

    @classmethod
    def from_dict(cls, d: dict) -> "AdjacencyInfo":
        if "nodes" in d:
            return cls.from_scm(ScmSpec.from_dict(d))
        try:
            return cls.from_parents(d["parents"], d["protected"], d["target"])
        except KeyError as exc:
            raise ConfigError(f"missing key {exc}", field="dag") from None

    @classmethod
    def load(cls, path) -> "AdjacencyInfo":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"protected": self.protected, "target": self.target, "parents": self.parents}

    @property
    def transformed(self) -> list:
        """Descendants of the protected attribute in topological order."""
        return [v for v in self.order if v in self.descendants]

    def model_parents(self, node) -> list:
        return [p for p in self.parents[node] if p != self.protected]

    def check(self, ds) -> None:
        missing = [v for v in self.order if v not in ds.columns]
        if missing:
            raise SchemaMismatch(f"dataset lacks graph nodes {missing}")
        if ds.pa_column != self.protected or ds.target_column != self.target:
            raise SchemaMismatch(
                f"dataset roles ({ds.pa_column}, {ds.target_column}) differ from graph "
                f"({self.protected}, {self.target})")

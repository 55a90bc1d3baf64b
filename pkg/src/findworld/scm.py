"""Declarative structural causal models and paired real / FiND-world sampling.

Every node consumes exactly one uniform draw per row and is sampled by
inverse-CDF, so two worlds simulated from the same seed are coupled row by
row: they differ only where the protected attribute feeds a structural
equation.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import special

from .dataset import BINARY, NUMERIC, Dataset
from .errors import ConfigError, CycleError, InvalidParamError, UnknownParentError

FAMILIES = {"bernoulli": "logit", "gamma": "log"}
LINKS = ("logit", "log", "identity")
INTERCEPT = "intercept"


class WorldKind(str, enum.Enum):
    REAL = "real"
    FIND = "find"


@dataclass(frozen=True)
class NodeSpec:
    """One structural equation.

    Bernoulli nodes carry a single coefficient map for the success
    probability. Gamma nodes carry two maps, ``shape`` and ``scale``.
    Maps are keyed by parent name plus ``"intercept"``.
    """

    name: str
    parents: tuple = ()
    family: str = "bernoulli"
    link: str = "logit"
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}", field=f"{self.name}.family")
        if self.link not in LINKS:
            raise ConfigError(f"unknown link {self.link!r}", field=f"{self.name}.link")
        if FAMILIES[self.family] != self.link:
            raise ConfigError(f"{self.family} nodes use the {FAMILIES[self.family]} link",
                              field=f"{self.name}.link")
        for key, coefs in self.coefficient_maps().items():
            extra = set(coefs) - set(self.parents) - {INTERCEPT}
            if extra:
                raise ConfigError(
                    f"coefficients reference non-parents {sorted(extra)}",
                    field=f"{self.name}.coefficients{'.' + key if key else ''}",
                )

    def coefficient_maps(self) -> dict:
        if self.family == "gamma":
            try:
                return {"shape": dict(self.coefficients["shape"]),
                        "scale": dict(self.coefficients["scale"])}
            except KeyError as exc:
                raise ConfigError(
                    f"gamma node needs 'shape' and 'scale' maps, missing {exc}",
                    field=f"{self.name}.coefficients",
                ) from None
        return {"": dict(self.coefficients)}

    @property
    def kind(self) -> str:
        return BINARY if self.family == "bernoulli" else NUMERIC

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parents": list(self.parents),
            "family": self.family,
            "link": self.link,
            "coefficients": self.coefficients,
        }


@dataclass(frozen=True)
class ScmSpec:
    nodes: tuple
    protected_node: str
    target_node: str
    reference_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def node(self, name) -> NodeSpec:
        for nd in self.nodes:
            if nd.name == name:
                return nd
        raise KeyError(name)

    @property
    def names(self) -> list:
        return [nd.name for nd in self.nodes]

    @property
    def parents(self) -> dict:
        return {nd.name: list(nd.parents) for nd in self.nodes}

    def with_zero_pa_effects(self) -> "ScmSpec":
        """Copy whose structural equations ignore the protected attribute."""
        nodes = []
        for nd in self.nodes:
            maps = nd.coefficient_maps()
            for m in maps.values():
                if self.protected_node in m:
                    m[self.protected_node] = 0.0
            coefs = maps[""] if "" in maps else maps
            nodes.append(NodeSpec(nd.name, nd.parents, nd.family, nd.link, coefs))
        return ScmSpec(tuple(nodes), self.protected_node, self.target_node, self.reference_value)

    def to_dict(self) -> dict:
        return {
            "protected_node": self.protected_node,
            "target_node": self.target_node,
            "reference_value": self.reference_value,
            "nodes": [nd.to_dict() for nd in self.nodes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScmSpec":
        try:
            nodes = tuple(
                NodeSpec(
                    name=n["name"],
                    parents=tuple(n.get("parents", ())),
                    family=n.get("family", "bernoulli"),
                    link=n.get("link", FAMILIES.get(n.get("family", "bernoulli"), "logit")),
                    coefficients=n.get("coefficients", {}),
                )
                for n in d["nodes"]
            )
            return cls(nodes, d["protected_node"], d["target_node"],
                       float(d.get("reference_value", 0.0)))
        except KeyError as exc:
            raise ConfigError(f"missing key {exc}", field="scm") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ScmSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_spec() -> ScmSpec:
    """The credit-application DGP shipped with the package (see data/default_scm.json)."""
    text = resources.files("findworld").joinpath("data/default_scm.json").read_text()
    return ScmSpec.from_dict(json.loads(text))


def topological_order(parents: dict) -> list:
    """Depth-first ordering over parent links; ties follow declaration order."""
    names = list(parents)
    known = set(names)
    for child, ps in parents.items():
        for p in ps:
            if p not in known:
                raise UnknownParentError(child, p)
    state = {}
    order = []

    def visit(node):
        state[node] = 1
        for p in parents[node]:
            if state.get(p) == 1:
                raise CycleError((p, node))
            if p not in state:
                visit(p)
        state[node] = 2
        order.append(node)

    for nd in names:
        if nd not in state:
            visit(nd)
    return order


def validate_dag(spec: ScmSpec) -> list:
    """Return a topological order of the nodes, checking the structural assumptions."""
    if not spec.nodes:
        raise ConfigError("spec has no nodes", field="nodes")
    names = spec.names
    if len(set(names)) != len(names):
        raise ConfigError("duplicate node names", field="nodes")
    for role, name in (("protected_node", spec.protected_node), ("target_node", spec.target_node)):
        if name not in names:
            raise ConfigError(f"{name!r} is not a declared node", field=role)
    order = topological_order(spec.parents)
    pa = spec.node(spec.protected_node)
    if pa.parents:
        raise ConfigError("protected attribute must be a root node", field="protected_node")
    for role in ("protected_node", "target_node"):
        if spec.node(getattr(spec, role)).family != "bernoulli":
            raise ConfigError("must be a Bernoulli node", field=role)
    for nd in spec.nodes:
        nd.coefficient_maps()
    return order


def _linear(coefs: dict, values: dict, n: int) -> np.ndarray:
    eta = np.full(n, float(coefs.get(INTERCEPT, 0.0)))
    for parent, beta in coefs.items():
        if parent != INTERCEPT and beta:
            eta = eta + float(beta) * values[parent]
    return eta


def _inverse_link(eta: np.ndarray, link: str) -> np.ndarray:
    if link == "logit":
        return special.expit(eta)
    if link == "log":
        with np.errstate(over="ignore"):
            return np.exp(eta)
    return eta


def _sample_node(nd: NodeSpec, values: dict, u: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    if nd.family == "bernoulli":
        p = _inverse_link(_linear(nd.coefficients, values, n), nd.link)
        if nd.link == "identity" and ((p < 0) | (p > 1)).any():
            raise InvalidParamError(f"{nd.name}: success probability outside [0, 1]")
        return (u < p).astype(float)
    maps = nd.coefficient_maps()
    shape = _inverse_link(_linear(maps["shape"], values, n), nd.link)
    scale = _inverse_link(_linear(maps["scale"], values, n), nd.link)
    for label, arr in (("shape", shape), ("scale", scale)):
        if not np.isfinite(arr).all() or (arr <= 0).any():
            raise InvalidParamError(f"{nd.name}: non-positive or non-finite gamma {label}")
    return special.gammaincinv(shape, u) * scale


def exogenous_draws(spec: ScmSpec, n: int, seed: int) -> dict:
    """One U(0,1) vector per node, drawn in declaration order."""
    rng = np.random.default_rng(seed)
    return {nd.name: rng.random(n) for nd in spec.nodes}


def simulate(spec: ScmSpec, world: WorldKind | str, n: int, seed: int, draws=None) -> Dataset:
    """Sample ``n`` rows from the real or FiND world of ``spec``.

    In the FiND world every structural equation except the protected node's own
    is evaluated at the reference value of the protected attribute.
    """
    world = WorldKind(world)
    if n <= 0:
        raise ConfigError("n must be positive", field="n")
    order = validate_dag(spec)
    if draws is None:
        draws = exogenous_draws(spec, n, seed)
    pa = spec.protected_node
    values = {}
    for name in order:
        nd = spec.node(name)
        if world is WorldKind.FIND and name != pa and pa in nd.parents:
            inputs = dict(values)
            inputs[pa] = np.full(n, spec.reference_value)
        else:
            inputs = values
        values[name] = _sample_node(nd, inputs, draws[name])
    cols = {nd.name: values[nd.name] for nd in spec.nodes}
    kinds = {nd.name: nd.kind for nd in spec.nodes}
    return Dataset(cols, kinds, pa, spec.target_node)


def paired_worlds(spec: ScmSpec, n: int, seed: int):
    """Real and FiND datasets sharing every exogenous draw."""
    validate_dag(spec)
    draws = exogenous_draws(spec, n, seed)
    real = simulate(spec, WorldKind.REAL, n, seed, draws=draws)
    find = simulate(spec, WorldKind.FIND, n, seed, draws=draws)
    return real, find

"""Tree-structured pipeline configuration space.

The space is a forest of component nodes.  A path from a root to a
predictor leaf is a pipeline structure; interior nodes are preprocessors.
Nodes carry an ``active`` flag so whole predictor families can be culled
from the space without rebuilding it, and re-activated later.

Trees are built from a linear template: an ordered list of optional
preprocessors followed by one predictor chosen from the pool.  Every
ordered subset of the template (up to ``max_preprocessors`` entries)
forms a prefix, and every predictor hangs below every prefix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .seeding import as_rng

PREPROCESSOR = "preprocessor"
PREDICTOR = "predictor"

# Continuous domains spanning at least this ratio are sampled log-uniformly.
LOG_SPAN_RATIO = 1e3

PATH_SEP = "/"


class ConfigSpaceError(ValueError):
    """Malformed space definition or an operation on unknown components."""


class EmptyActiveSubspaceError(ConfigSpaceError):
    """Sampling was requested but no active pipeline path exists."""


@dataclass(frozen=True)
class ComponentRef:
    """Identity of an algorithm in the pool."""

    id: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (PREPROCESSOR, PREDICTOR):
            raise ConfigSpaceError(f"unknown component kind: {self.kind!r}")
        if not self.id or PATH_SEP in self.id:
            raise ConfigSpaceError(f"bad component id: {self.id!r}")


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ConfigSpaceError("continuous bounds must be finite")
        if self.lo > self.hi:
            raise ConfigSpaceError(f"continuous domain empty: [{self.lo}, {self.hi}]")

    @property
    def log_scale(self) -> bool:
        return self.lo > 0 and self.hi / self.lo >= LOG_SPAN_RATIO

    def contains(self, value: object) -> bool:
        return isinstance(value, (int, float)) and not isinstance(value, bool) \
            and self.lo <= float(value) <= self.hi

    def sample(self, rng: np.random.Generator) -> float:
        if self.lo == self.hi:
            return float(self.lo)
        if self.log_scale:
            return float(np.exp(rng.uniform(np.log(self.lo), np.log(self.hi))))
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class Integer:
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ConfigSpaceError(f"integer domain empty: [{self.lo}, {self.hi}]")

    def contains(self, value: object) -> bool:
        return isinstance(value, int) and not isinstance(value, bool) \
            and self.lo <= value <= self.hi

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))


@dataclass(frozen=True)
class Categorical:
    values: tuple[object, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ConfigSpaceError("categorical domain empty")
        if len(set(self.values)) != len(self.values):
            raise ConfigSpaceError("categorical domain has duplicates")

    def contains(self, value: object) -> bool:
        return value in self.values

    def sample(self, rng: np.random.Generator) -> object:
        return self.values[int(rng.integers(len(self.values)))]


Domain = Continuous | Integer | Categorical


@dataclass(frozen=True)
class Hyperparam:
    """One hyperparameter; ``condition`` gates it on a parent's value."""

    name: str
    domain: Domain
    condition: tuple[str, object] | None = None


class HyperparamSchema:
    """An ordered set of hyperparameters with conditional dependencies.

    Entries are stored in topological order of the condition graph, so a
    single forward pass resolves which entries are active for a given
    assignment.  Construction rejects unknown condition parents and cycles.
    """

    def __init__(self, entries: Sequence[Hyperparam] = ()) -> None:
        by_name = {}
        for e in entries:
            if e.name in by_name:
                raise ConfigSpaceError(f"duplicate hyperparameter: {e.name}")
            by_name[e.name] = e
        for e in entries:
            if e.condition is not None:
                parent, _ = e.condition
                if parent not in by_name:
                    raise ConfigSpaceError(
                        f"condition of {e.name!r} references unknown parent {parent!r}")
                if parent == e.name:
                    raise ConfigSpaceError(f"{e.name!r} conditioned on itself")
        self.entries: tuple[Hyperparam, ...] = tuple(self._topo_sort(list(entries)))
        self._by_name = {e.name: e for e in self.entries}

    @staticmethod
    def _topo_sort(entries: list[Hyperparam]) -> list[Hyperparam]:
        placed: list[Hyperparam] = []
        done: set[str] = set()
        pending = list(entries)
        while pending:
            progressed = False
            remaining = []
            for e in pending:
                if e.condition is None or e.condition[0] in done:
                    placed.append(e)
                    done.add(e.name)
                    progressed = True
                else:
                    remaining.append(e)
            if not progressed:
                names = sorted(e.name for e in remaining)
                raise ConfigSpaceError(f"conditional cycle among: {names}")
            pending = remaining
        return placed

    def __eq__(self, other: object) -> bool:
        return isinstance(other, HyperparamSchema) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def __repr__(self) -> str:
        return f"HyperparamSchema({list(self.entries)!r})"

    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def entry(self, name: str) -> Hyperparam:
        return self._by_name[name]

    def active_names(self, assignment: Mapping[str, object]) -> set[str]:
        """Entries whose conditions are satisfied by ``assignment``."""
        active: set[str] = set()
        for e in self.entries:
            if e.condition is None:
                active.add(e.name)
            else:
                parent, value = e.condition
                if parent in active and assignment.get(parent) == value:
                    active.add(e.name)
        return active

    def sample(self, rng: np.random.Generator) -> dict[str, object]:
        out: dict[str, object] = {}
        for e in self.entries:
            if e.condition is None:
                out[e.name] = e.domain.sample(rng)
            else:
                parent, value = e.condition
                if parent in out and out[parent] == value:
                    out[e.name] = e.domain.sample(rng)
        return out

    def validate_assignment(self, assignment: Mapping[str, object]) -> None:
        """Raise unless ``assignment`` covers exactly the active entries."""
        active = self.active_names(assignment)
        given = set(assignment)
        if given != active:
            extra = sorted(given - active)
            missing = sorted(active - given)
            raise ConfigSpaceError(
                f"assignment mismatch (extra={extra}, missing={missing})")
        for name in sorted(active):
            if not self._by_name[name].domain.contains(assignment[name]):
                raise ConfigSpaceError(
                    f"value {assignment[name]!r} outside domain of {name!r}")

    def reconcile(self, assignment: Mapping[str, object],
                  rng: np.random.Generator) -> dict[str, object]:
        """Drop entries whose condition fails; sample newly active ones."""
        out = dict(assignment)
        active = self.active_names(out)
        for name in list(out):
            if name not in active:
                del out[name]
        for e in self.entries:
            if e.name in self.active_names(out) and e.name not in out:
                out[e.name] = e.domain.sample(rng)
        return out


@dataclass
class SpaceNode:
    """A component instantiated at one position in the tree.

    ``parent`` holds the node's own id for roots, so the parent function
    is total over the node set.
    """

    id: str
    component: ComponentRef
    schema: HyperparamSchema
    parent: str
    active: bool = True

    @property
    def is_root(self) -> bool:
        return self.parent == self.id


@dataclass(frozen=True)
class Pipeline:
    """A concrete root-to-leaf instantiation of the space.

    ``schemas`` mirrors ``components`` and exists so local perturbation
    can look up domains without a tree handle; it is not serialized.
    """

    structure: tuple[str, ...]
    components: tuple[ComponentRef, ...]
    hyperparams: tuple[dict[str, object], ...]
    schemas: tuple[HyperparamSchema | None, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not self.components or self.components[-1].kind != PREDICTOR:
            raise ConfigSpaceError("pipeline must end in a predictor")
        if len(self.structure) != len(self.components) \
                or len(self.components) != len(self.hyperparams):
            raise ConfigSpaceError("pipeline field lengths disagree")
        if not self.schemas:
            object.__setattr__(self, "schemas", (None,) * len(self.components))

    @property
    def predictor(self) -> ComponentRef:
        return self.components[-1]

    @property
    def preprocessors(self) -> tuple[ComponentRef, ...]:
        return self.components[:-1]

    def to_dict(self) -> dict:
        return {
            "structure": list(self.structure),
            "components": [{"id": c.id, "kind": c.kind} for c in self.components],
            "hyperparams": [dict(h) for h in self.hyperparams],
        }

    @classmethod
    def from_dict(cls, d: Mapping, schema_lookup=None) -> "Pipeline":
        comps = tuple(ComponentRef(c["id"], c["kind"]) for c in d["components"])
        schemas = tuple(
            schema_lookup(c.id) if schema_lookup is not None else None
            for c in comps)
        return cls(
            structure=tuple(d["structure"]),
            components=comps,
            hyperparams=tuple(dict(h) for h in d["hyperparams"]),
            schemas=schemas,
        )


class ConfigTree:
    """The node forest with parent/child indexes and the active-flag API."""

    def __init__(self, nodes: Sequence[SpaceNode]) -> None:
        self.nodes: dict[str, SpaceNode] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise ConfigSpaceError(f"duplicate node id: {n.id}")
            self.nodes[n.id] = n
        self._children: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for n in self.nodes.values():
            if n.parent not in self.nodes:
                raise ConfigSpaceError(f"node {n.id} has unknown parent {n.parent}")
            if not n.is_root:
                self._children[n.parent].append(n.id)

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> SpaceNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise ConfigSpaceError(f"unknown node: {node_id}") from None

    def roots(self) -> list[str]:
        return [nid for nid, n in self.nodes.items() if n.is_root]

    def children(self, node_id: str) -> list[str]:
        self.node(node_id)
        return list(self._children[node_id])

    def path_to(self, node_id: str) -> list[str]:
        """Node ids from the root down to ``node_id``."""
        path = [node_id]
        cur = self.node(node_id)
        while not cur.is_root:
            cur = self.node(cur.parent)
            path.append(cur.id)
        path.reverse()
        return path

    def predictor_component_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for n in self.nodes.values():
            if n.component.kind == PREDICTOR:
                seen.setdefault(n.component.id, None)
        return list(seen)

    def active_predictor_leaves(self) -> list[str]:
        """Predictor nodes whose whole root path is active."""
        out = []
        for nid, n in self.nodes.items():
            if n.component.kind != PREDICTOR or not n.active:
                continue
            if all(self.nodes[p].active for p in self.path_to(nid)):
                out.append(nid)
        return out

    def deactivate_subtree(self, node_id: str) -> int:
        """Clear ``active`` on the node and all descendants; count flips."""
        count = 0
        stack = [self.node(node_id).id]
        while stack:
            cur = self.nodes[stack.pop()]
            if cur.active:
                cur.active = False
                count += 1
            stack.extend(self._children[cur.id])
        return count

    def reactivate_all(self) -> None:
        for n in self.nodes.values():
            n.active = True

    def copy(self) -> "ConfigTree":
        return ConfigTree([replace(n) for n in self.nodes.values()])


def build_tree(components: Sequence[tuple[ComponentRef, HyperparamSchema]],
               template: Sequence[str],
               max_preprocessors: int | None = None) -> ConfigTree:
    """Construct the trie of ordered template subsets over the pool.

    ``template`` lists preprocessor ids in their fixed pipeline order; a
    repeated id would make the ordering cyclic and is rejected.  Each
    predictor in the pool appears as a leaf under every prefix.
    """
    by_id: dict[str, tuple[ComponentRef, HyperparamSchema]] = {}
    for ref, schema in components:
        if ref.id in by_id:
            raise ConfigSpaceError(f"duplicate component in pool: {ref.id}")
        by_id[ref.id] = (ref, schema)

    predictors = [cid for cid, (ref, _) in by_id.items() if ref.kind == PREDICTOR]
    if not predictors:
        raise ConfigSpaceError("component pool contains no predictor")

    if len(set(template)) != len(template):
        raise ConfigSpaceError("template repeats a preprocessor (ordering cycle)")
    for cid in template:
        if cid not in by_id:
            raise ConfigSpaceError(f"template references unknown component: {cid}")
        if by_id[cid][0].kind != PREPROCESSOR:
            raise ConfigSpaceError(f"template entry {cid} is not a preprocessor")

    cap = len(template) if max_preprocessors is None else max_preprocessors
    nodes: list[SpaceNode] = []

    def extend(parent_id: str | None, prefix: str, start: int, depth: int) -> None:
        for pid in predictors:
            ref, schema = by_id[pid]
            nid = prefix + pid if prefix else pid
            nodes.append(SpaceNode(nid, ref, schema, parent=parent_id or nid))
        if depth >= cap:
            return
        for j in range(start, len(template)):
            cid = template[j]
            ref, schema = by_id[cid]
            nid = prefix + cid if prefix else cid
            nodes.append(SpaceNode(nid, ref, schema, parent=parent_id or nid))
            extend(nid, nid + PATH_SEP, j + 1, depth + 1)

    extend(None, "", 0, 0)
    return ConfigTree(nodes)


def deactivate_predictors(tree: ConfigTree, keep: Iterable[str | ComponentRef]) -> int:
    """Deactivate every predictor node whose component is not in ``keep``.

    Descendant nodes are deactivated along with them.  Returns the number
    of nodes newly deactivated.  Every entry of ``keep`` must name a known
    predictor component.
    """
    keep_ids: set[str] = set()
    known = set(tree.predictor_component_ids())
    for item in keep:
        cid = item.id if isinstance(item, ComponentRef) else item
        if isinstance(item, ComponentRef) and item.kind != PREDICTOR:
            raise ConfigSpaceError(f"keep-set entry {cid} is not a predictor")
        if cid not in known:
            kinds = {n.component.id: n.component.kind for n in tree.nodes.values()}
            if cid in kinds:
                raise ConfigSpaceError(f"keep-set entry {cid} is not a predictor")
            raise ConfigSpaceError(f"keep-set entry {cid} is not in the tree")
        keep_ids.add(cid)

    count = 0
    for nid, n in tree.nodes.items():
        if n.component.kind == PREDICTOR and n.component.id not in keep_ids and n.active:
            count += tree.deactivate_subtree(nid)
    return count


def sample_pipeline(tree: ConfigTree,
                    rng: int | np.random.Generator) -> Pipeline:
    """Draw a uniform active leaf, then sample each node's hyperparameters."""
    rng = as_rng(rng)
    leaves = tree.active_predictor_leaves()
    if not leaves:
        raise EmptyActiveSubspaceError("no active pipeline path to sample from")
    leaf = leaves[int(rng.integers(len(leaves)))]
    path = tree.path_to(leaf)
    comps = tuple(tree.nodes[nid].component for nid in path)
    schemas = tuple(tree.nodes[nid].schema for nid in path)
    params = tuple(tree.nodes[nid].schema.sample(rng) for nid in path)
    return Pipeline(tuple(path), comps, params, schemas)


def enumerate_structures(tree: ConfigTree) -> list[tuple[str, ...]]:
    """All active root-to-predictor paths, in node insertion order."""
    return [tuple(tree.path_to(leaf)) for leaf in tree.active_predictor_leaves()]


def validate_pipeline(tree: ConfigTree, pipeline: Pipeline) -> None:
    """Check the pipeline is a live path of the tree with legal assignments."""
    if not pipeline.structure:
        raise ConfigSpaceError("pipeline has no structure")
    leaf = pipeline.structure[-1]
    if list(pipeline.structure) != tree.path_to(leaf):
        raise ConfigSpaceError("structure is not a root path of the tree")
    for nid, ref, params in zip(pipeline.structure, pipeline.components,
                                pipeline.hyperparams):
        n = tree.node(nid)
        if not n.active:
            raise ConfigSpaceError(f"node {nid} is deactivated")
        if n.component != ref:
            raise ConfigSpaceError(f"component mismatch at node {nid}")
        n.schema.validate_assignment(params)


def _domain_from_config(entry: Mapping) -> Domain:
    kind = entry.get("type")
    if kind == "continuous":
        return Continuous(float(entry["lo"]), float(entry["hi"]))
    if kind == "integer":
        return Integer(int(entry["lo"]), int(entry["hi"]))
    if kind == "categorical":
        return Categorical(tuple(entry["values"]))
    raise ConfigSpaceError(f"unknown hyperparameter type: {kind!r}")


def tree_from_config(source: str | Mapping, registry=None,
                     max_preprocessors: int | None = None) -> ConfigTree:
    """Build a tree from a declarative definition (path or parsed mapping).

    The definition holds a ``components`` list and a ``template`` list.
    A component entry without explicit ``hyperparams`` takes its schema
    from ``registry`` (a mapping id -> (ComponentRef, HyperparamSchema)).
    """
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            source = json.load(fh)
    pool: list[tuple[ComponentRef, HyperparamSchema]] = []
    for entry in source["components"]:
        ref = ComponentRef(entry["id"], entry["kind"])
        if "hyperparams" in entry:
            schema = HyperparamSchema([
                Hyperparam(
                    h["name"], _domain_from_config(h),
                    tuple(h["when"]) if "when" in h else None)
                for h in entry["hyperparams"]
            ])
        elif registry is not None and ref.id in registry:
            reg_ref, schema = registry[ref.id]
            if reg_ref.kind != ref.kind:
                raise ConfigSpaceError(f"kind mismatch for {ref.id}")
        else:
            raise ConfigSpaceError(f"no schema for component {ref.id}")
        pool.append((ref, schema))
    cap = source.get("max_preprocessors", max_preprocessors)
    return build_tree(pool, list(source["template"]), max_preprocessors=cap)

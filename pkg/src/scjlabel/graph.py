"""The global adjacency graph and its decomposition into subproblems.

Vertices are marker extremities; an edge is a candidate adjacency
annotated with the internal nodes where it may be placed.  Connected
components are independent: the optimum of the whole instance is the
union of per-component optima, and the set of co-optimal labelings is
the Cartesian product of the per-component sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .core import MICRO, Adjacency, Extremity, Phylogeny, WeightTable, exact_fraction
from .errors import InputError


def threshold_cutoff(threshold_x: object) -> int:
    """Smallest micro weight that passes the threshold ``w >= x``."""
    x = exact_fraction(threshold_x)
    if not 0 <= x <= 1:
        raise InputError(f"threshold must lie in [0, 1], got {x}")
    return -((-x.numerator * MICRO) // x.denominator)


def candidate_adjacencies(tree: Phylogeny) -> dict[int, frozenset[Adjacency]]:
    """Candidate set per internal node: adjacencies seen in any leaf.

    Every internal node shares the same candidate set; ancestral labels
    never invent adjacencies absent from all extant genomes.
    """
    if not tree.leaf_genomes:
        raise InputError("cannot derive candidates: tree has no genomes attached")
    union: set[Adjacency] = set()
    for leaf in tree.leaves():
        union |= tree.leaf_genomes[leaf].adjacencies
    candidates = frozenset(union)
    return {v: candidates for v in tree.internal_ids()}


@dataclass(frozen=True, eq=False)
class GlobalAdjacencyGraph:
    """Candidate adjacencies that survived weight thresholding.

    ``edges`` maps each surviving adjacency to the non-empty set of
    internal node ids where it may be chosen.
    """

    edges: Mapping[Adjacency, frozenset[int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", dict(self.edges))
        for adjacency, nodes in self.edges.items():
            if not nodes:
                raise InputError(f"edge {adjacency} has an empty annotation set")

    @property
    def vertices(self) -> frozenset[Extremity]:
        return frozenset(x for a in self.edges for x in a.extremities)


def build_global_graph(
    tree: Phylogeny,
    candidates: Mapping[int, frozenset[Adjacency]],
    weights: WeightTable,
    threshold_x: object = 0,
) -> GlobalAdjacencyGraph:
    """Annotate candidates with the nodes where their weight passes ``x``.

    The comparison is non-strict (``w >= x``), so the default ``x = 0``
    keeps every candidate at every node, including zero-weight ones.
    Candidates below the threshold everywhere are dropped entirely.
    """
    cutoff = threshold_cutoff(threshold_x)
    edges: dict[Adjacency, frozenset[int]] = {}
    all_candidates = set()
    for per_node in candidates.values():
        all_candidates |= per_node
    for adjacency in sorted(all_candidates):
        annotated = frozenset(
            v
            for v in candidates
            if adjacency in candidates[v] and weights.get_micro(v, adjacency) >= cutoff
        )
        if annotated:
            edges[adjacency] = annotated
    return GlobalAdjacencyGraph(edges)


@dataclass(frozen=True, eq=False)
class Component:
    """One connected component of the global adjacency graph."""

    edges: Mapping[Adjacency, frozenset[int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", dict(self.edges))
        if not self.edges:
            raise InputError("a component needs at least one edge")

    @property
    def sorted_edges(self) -> tuple[Adjacency, ...]:
        return tuple(sorted(self.edges))

    @property
    def vertices(self) -> frozenset[Extremity]:
        return frozenset(x for a in self.edges for x in a.extremities)

    def degrees(self) -> dict[Extremity, int]:
        deg: dict[Extremity, int] = {}
        for adjacency in self.edges:
            for x in adjacency.extremities:
                deg[x] = deg.get(x, 0) + 1
        return deg

    @property
    def n_extremities(self) -> int:
        return len(self.vertices)

    @property
    def max_degree(self) -> int:
        return max(self.degrees().values())

    @property
    def label_space_bound(self) -> int:
        """Product of (1 + degree) over extremities.

        Upper bound on the number of joint labels at any node: each
        extremity picks one incident edge or nothing.
        """
        bound = 1
        for d in self.degrees().values():
            bound *= 1 + d
        return bound


def connected_components(graph: GlobalAdjacencyGraph) -> list[Component]:
    """Split the graph into components, ordered by smallest extremity."""
    incident: dict[Extremity, list[Adjacency]] = {}
    for adjacency in graph.edges:
        for x in adjacency.extremities:
            incident.setdefault(x, []).append(adjacency)
    seen: set[Extremity] = set()
    components: list[Component] = []
    for start in sorted(incident):
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        member_edges: dict[Adjacency, frozenset[int]] = {}
        while queue:
            x = queue.pop()
            for adjacency in incident[x]:
                member_edges[adjacency] = graph.edges[adjacency]
                for y in adjacency.extremities:
                    if y not in seen:
                        seen.add(y)
                        queue.append(y)
        components.append(Component(member_edges))
    components.sort(key=lambda c: min(c.vertices))
    return components


def is_conflict_free(component: Component) -> bool:
    """True when the component is a single edge on two extremities."""
    return len(component.edges) == 1 and component.n_extremities == 2

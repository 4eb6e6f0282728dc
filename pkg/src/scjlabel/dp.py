"""Exact component solver: joint-label dynamic programming over the tree.

A joint label at a node assigns to every extremity of the component one
incident annotated adjacency or nothing, with both ends of a chosen
adjacency agreeing; valid labels are exactly the matchings of the
component edges annotated at that node.  Costs combine per edge as
``(1 - alpha) * |symmetric difference|`` plus each node's discarded
weight, all on an exact integer grid scaled by ``alpha.denominator *
1e6``.  The same table supports counting co-optimal labelings exactly
and sampling them uniformly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .core import (
    MICRO,
    Adjacency,
    Extremity,
    Phylogeny,
    WeightTable,
    as_alpha,
)
from .errors import CapacityExceeded, InputError, InternalInvariantError
from .graph import Component

#: Components are routed away from the DP when the square of their label
#: space bound exceeds this (pairwise label comparisons dominate).
DEFAULT_EXPLOSION_CAP = 10**7


@dataclass(frozen=True)
class JointLabel:
    """Per-extremity adjacency choice at one node of the phylogeny.

    ``choices`` lists (extremity, chosen adjacency or None) for every
    extremity of the component, sorted by extremity.  Invalid labels
    (ends disagreeing about a chosen adjacency) are representable and
    reported by :attr:`is_valid`; enumeration only ever produces valid
    ones.
    """

    choices: tuple[tuple[Extremity, Adjacency | None], ...]

    @classmethod
    def from_choices(cls, mapping: Mapping[Extremity, Adjacency | None]) -> "JointLabel":
        return cls(tuple(sorted(mapping.items())))

    @classmethod
    def from_matching(
        cls, vertices: Iterable[Extremity], matching: Iterable[Adjacency]
    ) -> "JointLabel":
        choice: dict[Extremity, Adjacency | None] = {x: None for x in vertices}
        for adjacency in matching:
            for x in adjacency.extremities:
                choice[x] = adjacency
        return cls.from_choices(choice)

    def choice(self, extremity: Extremity) -> Adjacency | None:
        for x, adjacency in self.choices:
            if x == extremity:
                return adjacency
        raise InputError(f"{extremity} is not covered by this label")

    @property
    def is_valid(self) -> bool:
        lookup = dict(self.choices)
        for x, adjacency in self.choices:
            if adjacency is None:
                continue
            if x not in adjacency.extremities:
                return False
            other = adjacency.other(x)
            if lookup.get(other) != adjacency:
                return False
        return True

    @property
    def adjacencies(self) -> frozenset[Adjacency]:
        """Adjacencies chosen consistently at both of their ends."""
        lookup = dict(self.choices)
        chosen = set()
        for x, adjacency in self.choices:
            if adjacency is None or x not in adjacency.extremities:
                continue
            if lookup.get(adjacency.other(x)) == adjacency:
                chosen.add(adjacency)
        return frozenset(chosen)


@dataclass(frozen=True)
class ComponentSolution:
    """One optimal (or sampled co-optimal) labeling of a component."""

    node_labels: dict[int, frozenset[Adjacency]]
    objective: Fraction
    objective_scaled: int
    scale: int
    scj_changes: int
    discarded_micro: int
    cooptimal_count: int
    solver: str = "dp"
    sample_index: int | None = None
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class DpTable:
    """Per-node label lists with subtree costs and co-optimum counts.

    Labels are bitmasks over ``edge_order``; ``cost[v][i]`` already
    includes node ``v``'s own discarded-weight term, so the root row
    minimum is the component optimum.
    """

    component: Component
    tree: Phylogeny
    weights: WeightTable
    alpha: Fraction
    scale: int
    edge_order: tuple[Adjacency, ...]
    labels: dict[int, list[int]]
    cost: dict[int, list[int]]
    count: dict[int, list[int]]

    @property
    def optimum_scaled(self) -> int:
        return min(self.cost[self.tree.root])


def _conflict_masks(edges: Sequence[Adjacency]) -> list[int]:
    conflicts = [0] * len(edges)
    for i, e in enumerate(edges):
        for j in range(i + 1, len(edges)):
            f = edges[j]
            if set(e.extremities) & set(f.extremities):
                conflicts[i] |= 1 << j
                conflicts[j] |= 1 << i
    return conflicts


def _matching_masks(edge_indices: Sequence[int], conflicts: Sequence[int]) -> list[int]:
    """All matchings (as bitmasks) over the given edge indices, ascending."""
    masks = [0]
    for i in edge_indices:
        bit = 1 << i
        conflict = conflicts[i]
        masks.extend([m | bit for m in masks if not m & conflict])
    masks.sort()
    return masks


def enumerate_labels(
    component: Component,
    tree: Phylogeny,
    node_id: int,
    *,
    max_labels: int | None = None,
) -> list[JointLabel]:
    """Valid joint labels at an internal node, in deterministic order.

    Only adjacencies annotated with ``node_id`` may be chosen; the rest
    of the component is forced to the empty choice there.  The order
    follows the ascending edge-subset encoding, so the all-empty label
    always comes first.
    """
    if tree.is_leaf(node_id):
        raise InputError(f"{tree.name_of(node_id)} is a leaf; its label is fixed")
    edges = component.sorted_edges
    conflicts = _conflict_masks(edges)
    annotated = [i for i, e in enumerate(edges) if node_id in component.edges[e]]
    if max_labels is not None and component.label_space_bound > max_labels:
        raise CapacityExceeded(
            f"label space bound {component.label_space_bound} exceeds limit {max_labels}"
        )
    vertices = component.vertices
    labels = []
    for mask in _matching_masks(annotated, conflicts):
        chosen = [edges[i] for i in range(len(edges)) if mask >> i & 1]
        labels.append(JointLabel.from_matching(vertices, chosen))
    return labels


def branch_cost(
    label_parent: JointLabel,
    label_child: JointLabel,
    weights: WeightTable,
    alpha: object,
    node_id: int,
    candidates: Iterable[Adjacency],
) -> Fraction | float:
    """Cost contributed by one tree edge under two joint labels.

    ``(1 - alpha)`` per adjacency changed between the labels, plus
    ``alpha`` times the weight at ``node_id`` of every candidate the
    child label discards.  Invalid labels cost infinity.
    """
    if not (label_parent.is_valid and label_child.is_valid):
        return float("inf")
    alpha = as_alpha(alpha)
    child_set = label_child.adjacencies
    changes = len(label_parent.adjacencies ^ child_set)
    discarded = sum(
        weights.get_micro(node_id, a) for a in candidates if a not in child_set
    )
    return (1 - alpha) * changes + alpha * Fraction(discarded, MICRO)


def _leaf_mask(component: Component, tree: Phylogeny, leaf_id: int,
               edges: Sequence[Adjacency]) -> int:
    genome = tree.leaf_genomes[leaf_id]
    mask = 0
    for i, e in enumerate(edges):
        if e in genome.adjacencies:
            mask |= 1 << i
    return mask


def solve_component(
    component: Component,
    tree: Phylogeny,
    weights: WeightTable,
    alpha: object,
    *,
    explosion_cap: int = DEFAULT_EXPLOSION_CAP,
) -> tuple[ComponentSolution, DpTable]:
    """Optimal labeling of one component by bottom-up DP.

    Raises :class:`CapacityExceeded` when the squared label space bound
    exceeds ``explosion_cap``; such components belong to the
    branch-and-bound solver instead.
    """
    alpha = as_alpha(alpha)
    bound = component.label_space_bound
    if bound * bound > explosion_cap:
        raise CapacityExceeded(
            f"label space bound {bound} squared exceeds cap {explosion_cap}"
        )
    if not tree.leaf_genomes:
        raise InputError("solve_component needs genomes attached to the tree")
    num, den = alpha.numerator, alpha.denominator
    unit = (den - num) * MICRO  # scaled cost of one adjacency change
    scale = den * MICRO

    edges = component.sorted_edges
    conflicts = _conflict_masks(edges)
    edge_micro: dict[int, list[int]] = {}
    annotated: dict[int, list[int]] = {}
    for v in tree.internal_ids():
        idx = [i for i, e in enumerate(edges) if v in component.edges[e]]
        annotated[v] = idx
        edge_micro[v] = [weights.get_micro(v, edges[i]) for i in range(len(edges))]

    labels: dict[int, list[int]] = {}
    cost: dict[int, list[int]] = {}
    count: dict[int, list[int]] = {}
    for v in tree.postorder():
        node = tree.nodes[v]
        if node.is_leaf:
            labels[v] = [_leaf_mask(component, tree, v, edges)]
            cost[v] = [0]
            count[v] = [1]
            continue
        node_labels = _matching_masks(annotated[v], conflicts)
        micro = edge_micro[v]
        total_micro = sum(micro[i] for i in annotated[v])
        node_cost = []
        node_count = []
        for mask in node_labels:
            kept = sum(micro[i] for i in annotated[v] if mask >> i & 1)
            c = num * (total_micro - kept)
            ways = 1
            for child in node.children:
                child_labels = labels[child]
                child_cost = cost[child]
                best = None
                best_ways = 0
                for j, child_mask in enumerate(child_labels):
                    t = child_cost[j] + unit * (mask ^ child_mask).bit_count()
                    if best is None or t < best:
                        best = t
                        best_ways = count[child][j]
                    elif t == best:
                        best_ways += count[child][j]
                c += best
                ways *= best_ways
            node_cost.append(c)
            node_count.append(ways)
        labels[v] = node_labels
        cost[v] = node_cost
        count[v] = node_count

    table = DpTable(
        component=component,
        tree=tree,
        weights=weights,
        alpha=alpha,
        scale=scale,
        edge_order=edges,
        labels=labels,
        cost=cost,
        count=count,
    )
    solution = _backtrack_first(table)
    return solution, table


def _mask_to_set(mask: int, edges: Sequence[Adjacency]) -> frozenset[Adjacency]:
    return frozenset(edges[i] for i in range(len(edges)) if mask >> i & 1)


def _child_argmin(table: DpTable, child: int, parent_mask: int) -> tuple[list[int], int]:
    alpha = table.alpha
    unit = (alpha.denominator - alpha.numerator) * MICRO
    best = None
    arg: list[int] = []
    for j, child_mask in enumerate(table.labels[child]):
        t = table.cost[child][j] + unit * (parent_mask ^ child_mask).bit_count()
        if best is None or t < best:
            best = t
            arg = [j]
        elif t == best:
            arg.append(j)
    return arg, best if best is not None else 0


def _finish_solution(
    table: DpTable,
    chosen_mask: dict[int, int],
    *,
    solver: str = "dp",
    sample_index: int | None = None,
    seed: int | None = None,
) -> ComponentSolution:
    tree = table.tree
    edges = table.edge_order
    node_labels = {
        v: _mask_to_set(chosen_mask[v], edges) for v in tree.internal_ids()
    }
    scj, discarded = evaluate_component_labeling(
        table.component, tree, table.weights, node_labels
    )
    alpha = table.alpha
    num, den = alpha.numerator, alpha.denominator
    scaled = (den - num) * MICRO * scj + num * discarded
    if scaled != table.optimum_scaled:
        raise InternalInvariantError(
            f"labeling re-evaluates to {scaled}, table optimum is {table.optimum_scaled}"
        )
    return ComponentSolution(
        node_labels=node_labels,
        objective=Fraction(scaled, table.scale),
        objective_scaled=scaled,
        scale=table.scale,
        scj_changes=scj,
        discarded_micro=discarded,
        cooptimal_count=count_cooptimal(table),
        solver=solver,
        sample_index=sample_index,
        seed=seed,
    )


def _backtrack_first(table: DpTable) -> ComponentSolution:
    tree = table.tree
    chosen: dict[int, int] = {}
    root_costs = table.cost[tree.root]
    best = min(root_costs)
    chosen[tree.root] = table.labels[tree.root][root_costs.index(best)]
    for u, v in tree.edges():
        if tree.is_leaf(v):
            continue
        arg, _ = _child_argmin(table, v, chosen[u])
        chosen[v] = table.labels[v][arg[0]]
    return _finish_solution(table, chosen)


def count_cooptimal(table: DpTable) -> int:
    """Exact number of co-optimal labelings of the component."""
    root_costs = table.cost[table.tree.root]
    best = min(root_costs)
    return sum(
        table.count[table.tree.root][i]
        for i, c in enumerate(root_costs)
        if c == best
    )


def sample_component(
    component: Component,
    tree: Phylogeny,
    weights: WeightTable,
    alpha: object,
    n_samples: int,
    seed: int,
    *,
    table: DpTable | None = None,
    explosion_cap: int = DEFAULT_EXPLOSION_CAP,
) -> list[ComponentSolution]:
    """Draw labelings uniformly from the component's co-optimal set.

    Sampling is top-down: the root label is drawn with probability
    proportional to its subtree co-optimum count, then each child's
    argmin label likewise.  Given the same seed the byte sequence of
    samples is identical across runs and platforms.
    """
    if n_samples < 0:
        raise InputError(f"n_samples must be non-negative, got {n_samples}")
    if table is None:
        _, table = solve_component(
            component, tree, weights, alpha, explosion_cap=explosion_cap
        )
    rng = random.Random(seed)
    root = tree.root
    root_costs = table.cost[root]
    best = min(root_costs)
    root_arg = [i for i, c in enumerate(root_costs) if c == best]
    root_weights = [table.count[root][i] for i in root_arg]
    samples: list[ComponentSolution] = []
    for s in range(n_samples):
        chosen: dict[int, int] = {}
        pick = root_arg[_weighted_index(rng, root_weights)]
        chosen[root] = table.labels[root][pick]
        for u, v in tree.edges():
            if tree.is_leaf(v):
                continue
            arg, _ = _child_argmin(table, v, chosen[u])
            arg_weights = [table.count[v][j] for j in arg]
            pick = arg[_weighted_index(rng, arg_weights)]
            chosen[v] = table.labels[v][pick]
        samples.append(
            _finish_solution(table, chosen, sample_index=s, seed=seed)
        )
    return samples


def _weighted_index(rng: random.Random, weights: Sequence[int]) -> int:
    """Index drawn proportionally to exact integer weights."""
    if len(weights) == 1:
        return 0
    total = sum(weights)
    r = rng.randrange(total)
    acc = 0
    for i, w in enumerate(weights):
        acc += w
        if r < acc:
            return i
    raise InternalInvariantError("weighted draw fell off the end")


def evaluate_component_labeling(
    component: Component,
    tree: Phylogeny,
    weights: WeightTable,
    node_labels: Mapping[int, frozenset[Adjacency]],
) -> tuple[int, int]:
    """Re-evaluate a component labeling from scratch.

    Returns (scj change count, discarded micro weight), both restricted
    to the component: leaves count with their genomes intersected with
    the component's edges, and the weight term sums over annotated
    (node, adjacency) pairs only.
    """
    edge_set = set(component.edges)
    labels: dict[int, frozenset[Adjacency]] = {}
    for v in tree.preorder():
        if tree.is_leaf(v):
            labels[v] = frozenset(tree.leaf_genomes[v].adjacencies & edge_set)
        else:
            if v not in node_labels:
                raise InputError(f"no label supplied for {tree.name_of(v)}")
            label = frozenset(node_labels[v])
            if not label <= edge_set:
                raise InputError("label uses adjacencies outside the component")
            labels[v] = label
    scj = sum(len(labels[u] ^ labels[v]) for u, v in tree.edges())
    discarded = 0
    for adjacency, nodes in component.edges.items():
        for v in nodes:
            if adjacency not in labels[v]:
                discarded += weights.get_micro(v, adjacency)
    return scj, discarded

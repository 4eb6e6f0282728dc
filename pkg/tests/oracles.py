"""Brute-force reference implementations the tests pin values against.

Nothing in this module shares logic with the package: label spaces are
listed outright, the DCJ distance comes from breadth-first search over
whole adjacency sets, and Boltzmann marginals from summing every
scenario.  Guards assert that inputs stay small enough for that to be
instant, so an oversized test input fails loudly instead of hanging.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from scjlabel.core import (
    MICRO,
    Adjacency,
    Extremity,
    Genome,
    Node,
    Phylogeny,
    WeightTable,
    as_alpha,
    chromosome_adjacencies,
    exact_fraction,
)
from scjlabel.graph import Component

# ---------------------------------------------------------------------------
# Label spaces


def consistent_subsets(adjacencies) -> list[frozenset[Adjacency]]:
    """Every subset of the given adjacencies in which no extremity repeats."""
    adjs = sorted(adjacencies)
    assert len(adjs) <= 16, f"oracle guard: {len(adjs)} candidate adjacencies"
    out = []
    for r in range(len(adjs) + 1):
        for combo in itertools.combinations(adjs, r):
            ends = [x for a in combo for x in a.extremities]
            if len(set(ends)) == len(ends):
                out.append(frozenset(combo))
    return out


# ---------------------------------------------------------------------------
# Component objective by full enumeration


def joint_assignment_count(component: Component, tree: Phylogeny) -> int:
    """How many joint assignments full enumeration would visit."""
    total = 1
    for v in tree.internal_ids():
        candidates = [a for a in component.sorted_edges if v in component.edges[a]]
        total *= len(consistent_subsets(candidates))
    return total


def component_profile(
    component: Component, tree: Phylogeny, weights: WeightTable
) -> list[tuple[int, int]]:
    """(scj changes, discarded micro weight) of every joint assignment.

    One entry per way of giving each internal node a consistent subset of
    the component edges annotated there.  Leaves compare with their
    genomes restricted to the component, mirroring how the per-component
    share of the full objective is defined.
    """
    internal = tree.internal_ids()
    per_node: list[list[frozenset[Adjacency]]] = []
    total = 1
    for v in internal:
        candidates = [a for a in component.sorted_edges if v in component.edges[a]]
        labels = consistent_subsets(candidates)
        per_node.append(labels)
        total *= len(labels)
    assert total <= 500_000, f"oracle guard: {total} joint assignments"

    edge_set = set(component.edges)
    fixed = {
        v: tree.leaf_genomes[v].adjacencies & edge_set for v in tree.leaves()
    }
    tree_edges = list(tree.edges())
    annotated = {
        v: [a for a in component.sorted_edges if v in component.edges[a]]
        for v in internal
    }
    profile = []
    for combo in itertools.product(*per_node):
        labels = dict(zip(internal, combo))
        labels.update(fixed)
        scj = sum(len(labels[u] ^ labels[v]) for u, v in tree_edges)
        discarded = sum(
            weights.get_micro(v, a)
            for v in internal
            for a in annotated[v]
            if a not in labels[v]
        )
        profile.append((scj, discarded))
    return profile


def profile_optimum(
    profile: list[tuple[int, int]], alpha
) -> tuple[Fraction, int]:
    """(minimum objective, co-optimum count) for one mixing factor."""
    alpha = as_alpha(alpha)
    best = None
    count = 0
    for scj, discarded in profile:
        value = (1 - alpha) * scj + alpha * Fraction(discarded, MICRO)
        if best is None or value < best:
            best, count = value, 1
        elif value == best:
            count += 1
    assert best is not None
    return best, count


def brute_component_optimum(
    component: Component, tree: Phylogeny, weights: WeightTable, alpha
) -> tuple[Fraction, int]:
    """Minimum component objective and its co-optimum count."""
    return profile_optimum(component_profile(component, tree, weights), alpha)


# ---------------------------------------------------------------------------
# Whole-instance objective by full enumeration


def brute_instance_optimum(
    tree: Phylogeny, weights: WeightTable, alpha, threshold_x=0
) -> tuple[Fraction, int]:
    """Minimize the full objective over all thresholded labelings.

    Labels are restricted, per node, to candidate adjacencies (those seen
    in some leaf) whose weight at that node passes the threshold; the
    objective still charges every discarded table entry at internal nodes
    and compares leaves by their complete genomes.  Returns the minimum
    and the number of labelings attaining it.
    """
    alpha = as_alpha(alpha)
    x = exact_fraction(threshold_x)
    union: set[Adjacency] = set()
    for leaf in tree.leaves():
        union |= tree.leaf_genomes[leaf].adjacencies
    internal = tree.internal_ids()
    per_node: list[list[frozenset[Adjacency]]] = []
    total = 1
    for v in internal:
        allowed = [
            a for a in sorted(union)
            if Fraction(weights.get_micro(v, a), MICRO) >= x
        ]
        labels = consistent_subsets(allowed)
        per_node.append(labels)
        total *= len(labels)
    assert total <= 500_000, f"oracle guard: {total} joint labelings"

    fixed = {v: tree.leaf_genomes[v].adjacencies for v in tree.leaves()}
    tree_edges = list(tree.edges())
    table = [
        (v, a, micro)
        for v, a, micro in weights.micro_items()
        if not tree.is_leaf(v)
    ]
    best = None
    count = 0
    for combo in itertools.product(*per_node):
        labels: dict[int, frozenset[Adjacency]] = dict(zip(internal, combo))
        labels.update(fixed)
        scj = sum(len(labels[u] ^ labels[v]) for u, v in tree_edges)
        discarded = sum(micro for v, a, micro in table if a not in labels[v])
        value = (1 - alpha) * scj + alpha * Fraction(discarded, MICRO)
        if best is None or value < best:
            best, count = value, 1
        elif value == best:
            count += 1
    assert best is not None
    return best, count


# ---------------------------------------------------------------------------
# Presence histories of a single adjacency


def brute_min_changes(tree: Phylogeny, adjacency: Adjacency) -> int:
    """Fewest presence flips along edges with leaves clamped to genomes."""
    internal = tree.internal_ids()
    assert len(internal) <= 16, f"oracle guard: {len(internal)} internal nodes"
    state = {
        v: adjacency in tree.leaf_genomes[v].adjacencies for v in tree.leaves()
    }
    tree_edges = list(tree.edges())
    best = None
    for bits in itertools.product((False, True), repeat=len(internal)):
        state.update(zip(internal, bits))
        changes = sum(1 for u, v in tree_edges if state[u] != state[v])
        if best is None or changes < best:
            best = changes
    assert best is not None
    return best


def brute_boltzmann(
    tree: Phylogeny, adjacency: Adjacency, kt: float
) -> dict[int, float]:
    """Presence marginals from summing exp(-changes/kt) over all scenarios."""
    internal = tree.internal_ids()
    assert len(internal) <= 14, f"oracle guard: {len(internal)} internal nodes"
    state = {
        v: adjacency in tree.leaf_genomes[v].adjacencies for v in tree.leaves()
    }
    tree_edges = list(tree.edges())
    mass = {v: 0.0 for v in internal}
    total = 0.0
    for bits in itertools.product((False, True), repeat=len(internal)):
        state.update(zip(internal, bits))
        changes = sum(1 for u, v in tree_edges if state[u] != state[v])
        w = math.exp(-changes / kt)
        total += w
        for v in internal:
            if state[v]:
                mass[v] += w
    return {v: mass[v] / total for v in internal}


# ---------------------------------------------------------------------------
# Distances


def _dcj_neighbors(state: frozenset[Adjacency], markers) -> list[frozenset[Adjacency]]:
    used = {x for a in state for x in a.extremities}
    free = [
        Extremity(m, end)
        for m in sorted(markers)
        for end in (0, 1)
        if Extremity(m, end) not in used
    ]
    out = []

    def join(x: Extremity, y: Extremity) -> Adjacency | None:
        # the genome model has no single-marker circles, so pairing the
        # two ends of one marker is not a reachable state
        if x.marker == y.marker:
            return None
        return Adjacency(x, y)

    adjacencies = sorted(state)
    # cut one adjacency into two telomeres
    for a in adjacencies:
        out.append(state - {a})
    # join two telomeres
    for x, y in itertools.combinations(free, 2):
        a = join(x, y)
        if a is not None:
            out.append(state | {a})
    # excise from one adjacency and rejoin with a telomere
    for a in adjacencies:
        for keep in a.extremities:
            for x in free:
                b = join(keep, x)
                if b is not None:
                    out.append((state - {a}) | {b})
    # reassort the four extremities of two adjacencies
    for a, b in itertools.combinations(adjacencies, 2):
        p, q = a.extremities
        r, s = b.extremities
        for pairing in (((p, r), (q, s)), ((p, s), (q, r))):
            new = [join(x, y) for x, y in pairing]
            if all(n is not None for n in new):
                out.append((state - {a, b}) | set(new))
    return out


def bfs_dcj_distance(a: Genome, b: Genome) -> int:
    """Fewest double-cut-and-join steps from one genome to the other,
    found by breadth-first search over adjacency sets."""
    assert len(a.markers) <= 6, f"oracle guard: {len(a.markers)} markers"
    assert a.markers == b.markers
    start = frozenset(a.adjacencies)
    goal = frozenset(b.adjacencies)
    if start == goal:
        return 0
    frontier = {start}
    seen = {start}
    distance = 0
    while frontier:
        distance += 1
        reached = set()
        for state in frontier:
            for nxt in _dcj_neighbors(state, a.markers):
                if nxt == goal:
                    return distance
                if nxt not in seen:
                    seen.add(nxt)
                    reached.add(nxt)
        frontier = reached
    raise AssertionError("DCJ search exhausted without reaching the target")


def brute_max_weight_micro(candidates, weight_of) -> int:
    """Largest total micro weight over all consistent subsets."""
    best = 0
    for subset in consistent_subsets(candidates):
        best = max(best, sum(weight_of(a) for a in subset))
    return best


# ---------------------------------------------------------------------------
# Random instances


def random_topology(rng, n_leaves: int) -> Phylogeny:
    """Random rooted binary tree; leaves s1.., internal nodes anc1.."""
    assert n_leaves >= 2
    next_id = 0
    children: dict[int, list[int]] = {}
    parents: dict[int, int] = {}
    roots: list[int] = []
    for _ in range(n_leaves):
        children[next_id] = []
        roots.append(next_id)
        next_id += 1
    while len(roots) > 1:
        a = roots.pop(rng.randrange(len(roots)))
        b = roots.pop(rng.randrange(len(roots)))
        children[next_id] = [a, b]
        parents[a] = next_id
        parents[b] = next_id
        roots.append(next_id)
        next_id += 1
    root = roots[0]
    order = [root]
    for v in order:
        order.extend(children[v])
    new_id = {old: i for i, old in enumerate(order)}
    names: dict[int, str] = {}
    n_leaf = n_int = 0
    for old in order:
        if children[old]:
            n_int += 1
            names[old] = f"anc{n_int}"
        else:
            n_leaf += 1
            names[old] = f"s{n_leaf}"
    nodes = tuple(
        Node(
            id=new_id[old],
            name=names[old],
            parent=None if old == root else new_id[parents[old]],
            children=tuple(new_id[c] for c in children[old]),
        )
        for old in order
    )
    return Phylogeny(nodes, 0)


def random_genome(rng, markers, *, max_chromosomes: int = 2,
                  circular_rate: float = 0.2) -> Genome:
    """Random signed arrangement of the markers into a few chromosomes."""
    ids = sorted(markers)
    rng.shuffle(ids)
    signed = [m if rng.random() < 0.5 else -m for m in ids]
    n_chromosomes = rng.randint(1, min(max_chromosomes, len(ids)))
    cuts = (
        sorted(rng.sample(range(1, len(ids)), n_chromosomes - 1))
        if n_chromosomes > 1
        else []
    )
    adjacencies: set[Adjacency] = set()
    previous = 0
    for cut in cuts + [len(ids)]:
        piece = signed[previous:cut]
        previous = cut
        circular = len(piece) >= 2 and rng.random() < circular_rate
        adjacencies |= chromosome_adjacencies(piece, circular=circular)
    return Genome(frozenset(adjacencies), frozenset(markers))


def random_instance(rng, *, n_leaves: int, n_markers: int) -> Phylogeny:
    """Random topology with a random genome at every leaf."""
    topology = random_topology(rng, n_leaves)
    markers = frozenset(range(1, n_markers + 1))
    genomes = {
        topology.name_of(v): random_genome(rng, markers)
        for v in topology.leaves()
    }
    return topology.with_genomes(genomes)


def random_weights(rng, tree: Phylogeny, *, zero_rate: float = 0.2) -> WeightTable:
    """Random micro-grid weights for every (internal node, candidate) pair."""
    union: set[Adjacency] = set()
    for leaf in tree.leaves():
        union |= tree.leaf_genomes[leaf].adjacencies
    table = WeightTable()
    for v in tree.internal_ids():
        for adjacency in sorted(union):
            if rng.random() < zero_rate:
                continue
            table.set_micro(v, adjacency, rng.randint(0, MICRO))
    return table

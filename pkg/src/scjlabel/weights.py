"""Adjacency weights: parsimony baselines, Boltzmann posteriors, file I/O.

Weights express per-node confidence that a candidate adjacency is
ancestral.  They can be loaded from a TSV file or computed here from the
leaf presence pattern of each adjacency under a Boltzmann ensemble over
gain/loss histories.
"""

from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple

import networkx as nx

from .core import (
    MICRO,
    Adjacency,
    Extremity,
    Genome,
    Phylogeny,
    WeightTable,
    check_consistency,
)
from .errors import InputError, InternalInvariantError
from .graph import candidate_adjacencies, threshold_cutoff

_INF = float("inf")


class FitchHistory(NamedTuple):
    """One parsimonious gain/loss history of a single adjacency."""

    presence: dict[int, bool]
    changes: int


def fitch_scj(tree: Phylogeny, adjacency: Adjacency) -> FitchHistory:
    """Most parsimonious presence history for one adjacency.

    Bottom-up state costs followed by a top-down sweep.  Ties at the
    root resolve to absence; below the root, ties keep the parent state.
    This tie-breaking makes the per-adjacency histories jointly
    consistent (no two chosen adjacencies share an extremity at a node).
    """
    if not tree.leaf_genomes:
        raise InputError("fitch_scj needs genomes attached to the tree")
    cost: dict[int, list[float]] = {}
    for v in tree.postorder():
        node = tree.nodes[v]
        if node.is_leaf:
            present = adjacency in tree.leaf_genomes[v].adjacencies
            cost[v] = [_INF if present else 0.0, 0.0 if present else _INF]
        else:
            c0 = c1 = 0.0
            for c in node.children:
                c0 += min(cost[c][0], cost[c][1] + 1)
                c1 += min(cost[c][1], cost[c][0] + 1)
            cost[v] = [c0, c1]
    presence: dict[int, bool] = {}
    root_cost = cost[tree.root]
    presence[tree.root] = root_cost[1] < root_cost[0]
    for u, v in tree.edges():
        parent_state = 1 if presence[u] else 0
        c_keep = cost[v][parent_state]
        c_flip = cost[v][1 - parent_state] + 1
        presence[v] = bool(parent_state if c_keep <= c_flip else 1 - parent_state)
    changes = sum(1 for u, v in tree.edges() if presence[u] != presence[v])
    best = min(root_cost)
    if changes != best:
        raise InternalInvariantError(
            f"fitch history for {adjacency} has {changes} changes, expected {best}"
        )
    return FitchHistory(presence, changes)


def fitch_scj_labeling(tree: Phylogeny) -> tuple[dict[int, frozenset[Adjacency]], int]:
    """Per-adjacency Fitch over all candidates, assembled per node.

    Returns the internal labeling and the total change count, which is
    the unweighted SCJ optimum.  A conflict between per-adjacency
    histories would be a bug in the tie-breaking and raises.
    """
    labeling: dict[int, set[Adjacency]] = {v: set() for v in tree.internal_ids()}
    total = 0
    candidates = sorted(next(iter(candidate_adjacencies(tree).values()), frozenset()))
    for adjacency in candidates:
        history = fitch_scj(tree, adjacency)
        total += history.changes
        for v in labeling:
            if history.presence[v]:
                labeling[v].add(adjacency)
    for v, label in labeling.items():
        ok, offenders = check_consistency(label)
        if not ok:
            listed = ", ".join(str(x) for x in offenders)
            raise InternalInvariantError(
                f"fitch labeling conflicts at {tree.name_of(v)}: {listed}"
            )
    return {v: frozenset(label) for v, label in labeling.items()}, total


def _log_add(a: float, b: float) -> float:
    if a == -_INF:
        return b
    if b == -_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def boltzmann_weights(tree: Phylogeny, adjacency: Adjacency, kt: float) -> dict[int, float]:
    """Posterior presence probability of one adjacency at each internal node.

    A scenario assigns presence to every internal node (leaves are
    clamped to their genomes); its energy is the number of state changes
    along tree edges, every edge counting one unit regardless of branch
    length.  Scenarios are weighted by ``exp(-changes / kt)`` and the
    returned weight is the probability mass of scenarios with presence.
    Computed in log space by an inside-outside sweep, so tiny ``kt``
    does not underflow.
    """
    if not (isinstance(kt, (int, float)) and kt > 0):
        raise InputError(f"kt must be a positive number, got {kt!r}")
    if not tree.leaf_genomes:
        raise InputError("boltzmann_weights needs genomes attached to the tree")
    penalty = 1.0 / float(kt)

    up: dict[int, tuple[float, float]] = {}
    for v in tree.postorder():
        node = tree.nodes[v]
        if node.is_leaf:
            present = adjacency in tree.leaf_genomes[v].adjacencies
            up[v] = (-_INF, 0.0) if present else (0.0, -_INF)
        else:
            totals = [0.0, 0.0]
            for c in node.children:
                for s in (0, 1):
                    totals[s] += _log_add(up[c][s], up[c][1 - s] - penalty)
            up[v] = (totals[0], totals[1])

    down: dict[int, tuple[float, float]] = {tree.root: (0.0, 0.0)}
    for u, v in tree.edges():
        node = tree.nodes[u]
        sibling_sum = [0.0, 0.0]
        for w in node.children:
            if w == v:
                continue
            for t in (0, 1):
                sibling_sum[t] += _log_add(up[w][t], up[w][1 - t] - penalty)
        vals = []
        for s in (0, 1):
            terms = [
                down[u][t] + sibling_sum[t] + (0.0 if t == s else -penalty) for t in (0, 1)
            ]
            vals.append(_log_add(terms[0], terms[1]))
        down[v] = (vals[0], vals[1])

    result: dict[int, float] = {}
    for v in tree.internal_ids():
        l0 = up[v][0] + down[v][0]
        l1 = up[v][1] + down[v][1]
        if l1 == -_INF:
            result[v] = 0.0
        elif l0 == -_INF:
            result[v] = 1.0
        else:
            result[v] = 1.0 / (1.0 + math.exp(l0 - l1))
    return result


def boltzmann_weight_table(tree: Phylogeny, kt: float) -> WeightTable:
    """Boltzmann weights for every candidate adjacency at every internal node."""
    table = WeightTable()
    candidates = sorted(next(iter(candidate_adjacencies(tree).values()), frozenset()))
    for adjacency in candidates:
        for v, w in sorted(boltzmann_weights(tree, adjacency, kt).items()):
            table.set(v, adjacency, w)
    return table


def max_weight_matching_labeling(
    tree: Phylogeny,
    weights: WeightTable,
    threshold_x: object = 0,
) -> dict[int, frozenset[Adjacency]]:
    """Independently at each internal node, keep a maximum-weight
    consistent subset of the candidates passing the threshold.

    This is the exact optimum for alpha = 1, where rearrangement cost is
    ignored and only discarded weight matters.  Matching is delegated to
    networkx with doubled integer weights, which keeps its dual values
    integral and the result exact on the micro grid.
    """
    cutoff = threshold_cutoff(threshold_x)
    candidates = candidate_adjacencies(tree)
    labeling: dict[int, frozenset[Adjacency]] = {}
    for v in tree.internal_ids():
        graph = nx.Graph()
        for adjacency in sorted(candidates[v]):
            micro = weights.get_micro(v, adjacency)
            if micro >= cutoff:
                graph.add_edge(adjacency.first, adjacency.second, weight=2 * micro)
        matching = nx.max_weight_matching(graph, maxcardinality=False)
        labeling[v] = frozenset(Adjacency(a, b) for a, b in matching)
    return labeling


def matching_kept_micro(tree: Phylogeny, labeling: dict[int, frozenset[Adjacency]],
                        weights: WeightTable) -> int:
    """Total micro weight kept by a per-node labeling."""
    return sum(
        weights.get_micro(v, adjacency)
        for v, label in labeling.items()
        for adjacency in label
    )


def load_weight_table(path: str | Path, tree: Phylogeny) -> WeightTable:
    """Read a weight TSV: node name, extremity, extremity, weight in [0, 1].

    Node names must exist in the tree and markers in its universe.
    Duplicate (node, adjacency) rows are rejected.  Every error message
    carries the offending line number.
    """
    if not tree.leaf_genomes:
        raise InputError("load_weight_table needs genomes attached to the tree")
    universe = tree.markers
    table = WeightTable()
    seen: set[tuple[int, Adjacency]] = set()
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise InputError(
                    f"{path}:{lineno}: expected 4 tab-separated columns, got {len(parts)}"
                )
            name, ext_a, ext_b, weight_text = (p.strip() for p in parts)
            try:
                node = tree.id_of(name)
                a = Extremity.parse(ext_a)
                b = Extremity.parse(ext_b)
                for x in (a, b):
                    if x.marker not in universe:
                        raise InputError(f"unknown marker {x.marker}")
                adjacency = Adjacency(a, b)
                weight = Fraction(weight_text)
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            except (ValueError, ZeroDivisionError):
                raise InputError(f"{path}:{lineno}: bad weight {weight_text!r}") from None
            if (node, adjacency) in seen:
                raise InputError(f"{path}:{lineno}: duplicate weight for {name} {adjacency}")
            seen.add((node, adjacency))
            try:
                table.set(node, adjacency, weight)
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    return table


def write_weight_table(path: str | Path, tree: Phylogeny, table: WeightTable) -> None:
    """Write a weight TSV with one row per stored entry, sorted."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        for node, adjacency, micro in table.micro_items():
            handle.write(
                "\t".join(
                    (
                        tree.name_of(node),
                        str(adjacency.first),
                        str(adjacency.second),
                        f"{micro / MICRO:.6f}",
                    )
                )
                + "\n"
            )

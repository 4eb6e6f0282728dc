"""Markers, adjacencies, genomes, phylogenies and distances between gene orders.

A genome is modeled as a set of adjacencies between oriented marker
extremities.  A set is consistent when every extremity occurs in at most
one adjacency; a consistent set decomposes uniquely into linear and
circular runs of markers (CARs).  All objective arithmetic is exact:
adjacency weights live on a fixed 1e-6 grid and the mixing factor alpha
is a rational with a bounded denominator, so optima and co-optimality
counts never depend on floating point rounding.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import AbstractSet, Iterable, Iterator, Mapping, NamedTuple

from .errors import InputError

#: Resolution of the weight grid: weights are stored as integer multiples
#: of 1/MICRO in [0, MICRO].
MICRO = 10**6

#: Largest accepted denominator for the mixing factor alpha.
MAX_ALPHA_DENOMINATOR = 10**4

TAIL = 0
HEAD = 1


def exact_fraction(value: object) -> Fraction:
    """Coerce a number to an exact :class:`Fraction`.

    Floats are read through their shortest decimal representation
    (``str(value)``), so ``0.25`` means exactly 1/4 and ``0.1`` exactly
    1/10.  Strings accept both decimal ("0.5") and ratio ("1/3") forms.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InputError(f"expected a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a number: {value!r}") from exc
    raise InputError(f"expected a number, got {type(value).__name__}")


def as_alpha(value: object) -> Fraction:
    """Validate and coerce the mixing factor alpha to an exact rational.

    Alpha weighs discarded adjacency weight against rearrangement cost
    and must lie in [0, 1] with denominator at most 1e4 so that scaled
    objective values stay on an exact integer grid.
    """
    alpha = exact_fraction(value)
    if not 0 <= alpha <= 1:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha.denominator > MAX_ALPHA_DENOMINATOR:
        raise InputError(
            f"alpha denominator {alpha.denominator} exceeds {MAX_ALPHA_DENOMINATOR}; "
            f"use a coarser rational"
        )
    return alpha


def quantize_weight(value: object) -> int:
    """Map a weight in [0, 1] to the integer grid 0..MICRO (round half up)."""
    w = exact_fraction(value)
    if not 0 <= w <= 1:
        raise InputError(f"weight must lie in [0, 1], got {w}")
    return (2 * w.numerator * MICRO + w.denominator) // (2 * w.denominator)


@dataclass(frozen=True, order=True)
class Extremity:
    """One end of an oriented marker: its tail (t) or its head (h).

    Ordering is (marker, end) with tail before head, which fixes the
    canonical orientation used everywhere else.
    """

    marker: int
    end: int

    def __post_init__(self) -> None:
        if not isinstance(self.marker, int) or self.marker < 1:
            raise InputError(f"marker ids are positive integers, got {self.marker!r}")
        if self.end not in (TAIL, HEAD):
            raise InputError(f"extremity end must be TAIL(0) or HEAD(1), got {self.end!r}")

    @classmethod
    def tail(cls, marker: int) -> "Extremity":
        return cls(marker, TAIL)

    @classmethod
    def head(cls, marker: int) -> "Extremity":
        return cls(marker, HEAD)

    @classmethod
    def parse(cls, text: str) -> "Extremity":
        """Parse the compact form ``"12h"`` / ``"3t"``."""
        text = text.strip()
        if len(text) < 2 or text[-1] not in "ht" or not text[:-1].isdigit():
            raise InputError(f"bad extremity {text!r}, expected e.g. '12h' or '3t'")
        return cls(int(text[:-1]), HEAD if text[-1] == "h" else TAIL)

    def __str__(self) -> str:
        return f"{self.marker}{'h' if self.end == HEAD else 't'}"


@dataclass(frozen=True, order=True)
class Adjacency:
    """An unordered pair of extremities of two distinct markers.

    The constructor normalizes the pair so that ``first < second``; two
    adjacencies over the same extremities always compare equal.  Pairing
    the two ends of one marker (a single-marker circle) is rejected.
    """

    first: Extremity
    second: Extremity

    def __post_init__(self) -> None:
        a, b = self.first, self.second
        if a.marker == b.marker:
            raise InputError(f"adjacency may not join two extremities of marker {a.marker}")
        if b < a:
            object.__setattr__(self, "first", b)
            object.__setattr__(self, "second", a)

    @classmethod
    def of(cls, a: "Extremity | str", b: "Extremity | str") -> "Adjacency":
        """Build from extremities or their compact string forms."""
        if isinstance(a, str):
            a = Extremity.parse(a)
        if isinstance(b, str):
            b = Extremity.parse(b)
        return cls(a, b)

    @property
    def extremities(self) -> tuple[Extremity, Extremity]:
        return (self.first, self.second)

    def other(self, x: Extremity) -> Extremity:
        if x == self.first:
            return self.second
        if x == self.second:
            return self.first
        raise ValueError(f"{x} is not an end of {self}")

    def __contains__(self, x: object) -> bool:
        return x == self.first or x == self.second

    def __str__(self) -> str:
        return f"{self.first}-{self.second}"


def check_consistency(adjacencies: Iterable[Adjacency]) -> tuple[bool, list[Extremity]]:
    """Check that no extremity is used by more than one adjacency.

    Returns ``(True, [])`` for a consistent set, otherwise ``(False,
    offenders)`` with the reused extremities in canonical order.
    """
    seen: Counter[Extremity] = Counter()
    for adj in adjacencies:
        seen[adj.first] += 1
        seen[adj.second] += 1
    offenders = sorted(x for x, n in seen.items() if n > 1)
    return (not offenders, offenders)


@dataclass(frozen=True)
class Genome:
    """A consistent adjacency set over a fixed marker universe."""

    adjacencies: frozenset[Adjacency]
    markers: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "adjacencies", frozenset(self.adjacencies))
        object.__setattr__(self, "markers", frozenset(self.markers))
        for adj in self.adjacencies:
            for x in adj.extremities:
                if x.marker not in self.markers:
                    raise InputError(f"adjacency {adj} uses marker {x.marker} outside the universe")
        ok, offenders = check_consistency(self.adjacencies)
        if not ok:
            listed = ", ".join(str(x) for x in offenders)
            raise InputError(f"inconsistent adjacency set, reused extremities: {listed}")

    @classmethod
    def empty(cls, markers: Iterable[int]) -> "Genome":
        return cls(frozenset(), frozenset(markers))

    def cars(self) -> "list[Car]":
        return extract_cars(self.adjacencies, self.markers)


def _orient_key(seq: Iterable[int]) -> tuple[tuple[int, int], ...]:
    # positive orientation of a marker sorts before negative
    return tuple((abs(m), 0 if m > 0 else 1) for m in seq)


def _reverse_complement(seq: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(-m for m in reversed(seq))


@dataclass(frozen=True)
class Car:
    """A contiguous ancestral region: a signed marker run, linear or circular.

    Construction canonicalizes the representation.  Linear runs keep the
    orientation whose signed sequence is smaller under (marker id,
    positive-before-negative) comparison; circular runs additionally pick
    the rotation minimizing the same key, so structural equality is plain
    field equality.
    """

    kind: str
    markers: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "circular"):
            raise InputError(f"CAR kind must be 'linear' or 'circular', got {self.kind!r}")
        seq = tuple(self.markers)
        if not seq:
            raise InputError("CAR must contain at least one marker")
        if any(m == 0 for m in seq):
            raise InputError("signed marker 0 is not allowed")
        if len({abs(m) for m in seq}) != len(seq):
            raise InputError(f"CAR repeats a marker: {seq}")
        if self.kind == "circular" and len(seq) == 1:
            raise InputError("single-marker circular chromosomes are not representable")
        object.__setattr__(self, "markers", self._canonical(self.kind, seq))

    @staticmethod
    def _canonical(kind: str, seq: tuple[int, ...]) -> tuple[int, ...]:
        if kind == "linear":
            return min(seq, _reverse_complement(seq), key=_orient_key)
        candidates = []
        for orient in (seq, _reverse_complement(seq)):
            for shift in range(len(orient)):
                candidates.append(orient[shift:] + orient[:shift])
        return min(candidates, key=_orient_key)

    def __len__(self) -> int:
        return len(self.markers)

    def __str__(self) -> str:
        body = " ".join(str(m) for m in self.markers)
        return f"[{self.kind} {body}]"


def _left_extremity(signed: int) -> Extremity:
    return Extremity.tail(signed) if signed > 0 else Extremity.head(-signed)


def _right_extremity(signed: int) -> Extremity:
    return Extremity.head(signed) if signed > 0 else Extremity.tail(-signed)


def car_adjacencies(car: Car) -> frozenset[Adjacency]:
    """Adjacencies realized by a CAR (consecutive pairs, plus the closing
    pair for circular runs)."""
    seq = car.markers
    pairs = [
        Adjacency(_right_extremity(seq[i]), _left_extremity(seq[i + 1]))
        for i in range(len(seq) - 1)
    ]
    if car.kind == "circular":
        pairs.append(Adjacency(_right_extremity(seq[-1]), _left_extremity(seq[0])))
    return frozenset(pairs)


def chromosome_adjacencies(markers: Iterable[int], circular: bool = False) -> frozenset[Adjacency]:
    """Adjacencies of an explicitly ordered signed chromosome."""
    seq = tuple(markers)
    if not seq:
        return frozenset()
    pairs = [
        Adjacency(_right_extremity(seq[i]), _left_extremity(seq[i + 1]))
        for i in range(len(seq) - 1)
    ]
    if circular and len(seq) >= 1:
        pairs.append(Adjacency(_right_extremity(seq[-1]), _left_extremity(seq[0])))
    return frozenset(pairs)


def extract_cars(adjacencies: Iterable[Adjacency], markers: Iterable[int]) -> list[Car]:
    """Decompose a consistent adjacency set over ``markers`` into CARs.

    Every marker appears in exactly one returned CAR; markers untouched
    by any adjacency come back as singleton linear CARs.  The list is
    sorted canonically so equal inputs produce identical output.
    """
    adjs = list(adjacencies)
    ok, offenders = check_consistency(adjs)
    if not ok:
        listed = ", ".join(str(x) for x in offenders)
        raise InputError(f"cannot extract CARs, reused extremities: {listed}")
    universe = set(markers)
    link: dict[Extremity, Extremity] = {}
    for adj in adjs:
        for x in adj.extremities:
            if x.marker not in universe:
                raise InputError(f"adjacency {adj} uses marker {x.marker} outside the universe")
        link[adj.first] = adj.second
        link[adj.second] = adj.first

    def walk(start: Extremity) -> tuple[list[int], bool]:
        # Enter the start marker at ``start``; follow internal marker
        # connections and adjacency links until a free end or the start.
        seq: list[int] = []
        entry = start
        while True:
            signed = entry.marker if entry.end == TAIL else -entry.marker
            seq.append(signed)
            exit_ = Extremity(entry.marker, TAIL if entry.end == HEAD else HEAD)
            nxt = link.get(exit_)
            if nxt is None:
                return seq, False
            if nxt == start:
                return seq, True
            entry = nxt
        # unreachable

    used: set[int] = set()
    cars: list[Car] = []
    # Linear runs first: start only at free extremities, so a marker in
    # the middle of a run is never mistaken for the start of one.
    for m in sorted(universe):
        if m in used:
            continue
        tail, head = Extremity.tail(m), Extremity.head(m)
        if tail not in link and head not in link:
            seq: list[int] = [m]
        elif tail not in link:
            seq, _ = walk(tail)
        elif head not in link:
            seq, _ = walk(head)
        else:
            continue  # interior of a linear run, or on a cycle
        used.update(abs(s) for s in seq)
        cars.append(Car("linear", tuple(seq)))
    for m in sorted(universe):
        if m in used:
            continue
        seq, closed = walk(Extremity.tail(m))
        if not closed:
            raise AssertionError(f"open walk from marker {m} left after the linear pass")
        used.update(abs(s) for s in seq)
        cars.append(Car("circular", tuple(seq)))
    cars.sort(key=lambda c: (c.kind, _orient_key(c.markers)))
    return cars


def scj_distance(a: Genome, b: Genome) -> int:
    """Single-cut-or-join distance: size of the symmetric difference."""
    if a.markers != b.markers:
        raise InputError("scj distance needs genomes over the same marker universe")
    return len(a.adjacencies ^ b.adjacencies)


def dcj_distance(a: Genome, b: Genome) -> int:
    """Double-cut-and-join distance between two genomes.

    Computed as N - C - I/2 over the adjacency graph of ``a`` and ``b``,
    where N is the marker count, C the number of cycles and I the number
    of odd paths (odd edge count).  Telomeres participate as degree-one
    vertices.
    """
    if a.markers != b.markers:
        raise InputError("dcj distance needs genomes over the same marker universe")

    def containers(genome: Genome, side: str) -> dict[Extremity, tuple]:
        where: dict[Extremity, tuple] = {}
        for adj in genome.adjacencies:
            where[adj.first] = (side, adj)
            where[adj.second] = (side, adj)
        return where

    where_a = containers(a, "A")
    where_b = containers(b, "B")
    extremities = [Extremity(m, e) for m in a.markers for e in (TAIL, HEAD)]
    incident: dict[tuple, list[Extremity]] = {}
    endpoint: dict[Extremity, tuple[tuple, tuple]] = {}
    for x in extremities:
        na = where_a.get(x, ("A", x))
        nb = where_b.get(x, ("B", x))
        incident.setdefault(na, []).append(x)
        incident.setdefault(nb, []).append(x)
        endpoint[x] = (na, nb)

    visited: set[Extremity] = set()

    def walk_from(node: tuple, via: Extremity) -> int:
        # Follow the unique unvisited trail starting at ``node``; returns
        # its edge count.  Stops at a degree-one node or back at a cycle.
        edges = 0
        current, x = node, via
        while x not in visited:
            visited.add(x)
            edges += 1
            na, nb = endpoint[x]
            nxt = nb if current == na else na
            following = [y for y in incident[nxt] if y not in visited]
            if not following:
                break
            x = following[0]
            current = nxt
        return edges

    odd_paths = 0
    cycles = 0
    # paths start at telomere (degree one) vertices
    for node, inc in sorted(incident.items(), key=lambda kv: str(kv[0])):
        if len(inc) == 1 and inc[0] not in visited:
            if walk_from(node, inc[0]) % 2 == 1:
                odd_paths += 1
    # whatever is left lies on cycles
    for x in sorted(extremities):
        if x not in visited:
            walk_from(endpoint[x][0], x)
            cycles += 1
    if odd_paths % 2 != 0:
        raise AssertionError("odd path count must be even")
    return len(a.markers) - cycles - odd_paths // 2


@dataclass(frozen=True)
class Node:
    """One phylogeny node; ``parent`` is None exactly at the root."""

    id: int
    name: str
    parent: int | None
    children: tuple[int, ...]
    length: float | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class Phylogeny:
    """A rooted tree with named nodes and genomes attached to the leaves.

    Node ids index the ``nodes`` tuple.  ``leaf_genomes`` maps leaf id to
    :class:`Genome`; it may be empty while a tree is being assembled, but
    solving requires every leaf to carry a genome over one shared marker
    universe.
    """

    nodes: tuple[Node, ...]
    root: int
    leaf_genomes: Mapping[int, Genome] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "leaf_genomes", dict(self.leaf_genomes))
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise InputError(f"node ids must match positions, got {node.id} at {i}")
        roots = [n.id for n in self.nodes if n.parent is None]
        if roots != [self.root]:
            raise InputError(f"expected a single root {self.root}, found {roots}")
        for node in self.nodes:
            for c in node.children:
                if not 0 <= c < len(self.nodes) or self.nodes[c].parent != node.id:
                    raise InputError(f"child link {node.id} -> {c} is not mirrored")
            if node.parent is not None and node.id not in self.nodes[node.parent].children:
                raise InputError(f"parent link {node.id} -> {node.parent} is not mirrored")
        if len(list(self.preorder())) != len(self.nodes):
            raise InputError("tree has unreachable nodes")
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise InputError(f"duplicate node names: {', '.join(dupes)}")
        if any(not n.name for n in self.nodes):
            raise InputError("every node needs a non-empty name")
        object.__setattr__(self, "_by_name", {n.name: n.id for n in self.nodes})
        if self.leaf_genomes:
            leaf_ids = {n.id for n in self.nodes if n.is_leaf}
            if set(self.leaf_genomes) != leaf_ids:
                raise InputError("leaf_genomes must cover exactly the leaves")
            universes = {g.markers for g in self.leaf_genomes.values()}
            if len(universes) > 1:
                raise InputError("leaf genomes must share one marker universe")

    # -- traversal helpers ------------------------------------------------

    def preorder(self) -> Iterator[int]:
        stack = [self.root]
        while stack:
            v = stack.pop()
            yield v
            stack.extend(reversed(self.nodes[v].children))

    def postorder(self) -> Iterator[int]:
        order = list(self.preorder())
        return iter(reversed(order))

    def edges(self) -> Iterator[tuple[int, int]]:
        """(parent, child) pairs in preorder of the parent."""
        for u in self.preorder():
            for v in self.nodes[u].children:
                yield (u, v)

    def leaves(self) -> list[int]:
        return [v for v in self.preorder() if self.nodes[v].is_leaf]

    def internal_ids(self) -> list[int]:
        """Internal node ids in postorder."""
        return [v for v in self.postorder() if not self.nodes[v].is_leaf]

    def depths(self) -> dict[int, int]:
        depth = {self.root: 0}
        for u, v in self.edges():
            depth[v] = depth[u] + 1
        return depth

    # -- lookups ----------------------------------------------------------

    def is_leaf(self, node_id: int) -> bool:
        return self.nodes[node_id].is_leaf

    def name_of(self, node_id: int) -> str:
        return self.nodes[node_id].name

    def id_of(self, name: str) -> int:
        try:
            return self._by_name[name]  # type: ignore[attr-defined]
        except KeyError:
            raise InputError(f"unknown node name {name!r}") from None

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_leaf)

    @property
    def markers(self) -> frozenset[int]:
        if not self.leaf_genomes:
            raise InputError("tree has no genomes attached")
        return next(iter(self.leaf_genomes.values())).markers

    def with_genomes(self, by_name: Mapping[str, Genome]) -> "Phylogeny":
        """Return a copy with genomes attached to the leaves by name."""
        leaf_names = {self.name_of(v) for v in self.leaves()}
        missing = sorted(leaf_names - set(by_name))
        extra = sorted(set(by_name) - leaf_names)
        if missing:
            raise InputError(f"genomes missing for leaves: {', '.join(missing)}")
        if extra:
            raise InputError(f"genomes given for unknown leaves: {', '.join(extra)}")
        genomes = {self.id_of(name): g for name, g in by_name.items()}
        return Phylogeny(self.nodes, self.root, genomes)


class WeightTable:
    """Adjacency confidences per internal node, on the 1e-6 grid.

    Entries absent from the table read as weight zero.  Values may be
    set with any exact number; floats go through their shortest decimal
    representation before quantization.
    """

    __slots__ = ("_micro",)

    def __init__(self) -> None:
        self._micro: dict[tuple[int, Adjacency], int] = {}

    def set(self, node_id: int, adjacency: Adjacency, weight: object) -> None:
        self.set_micro(node_id, adjacency, quantize_weight(weight))

    def set_micro(self, node_id: int, adjacency: Adjacency, micro: int) -> None:
        if not isinstance(micro, int) or not 0 <= micro <= MICRO:
            raise InputError(f"micro weight must be an integer in [0, {MICRO}], got {micro!r}")
        self._micro[(node_id, adjacency)] = micro

    def get_micro(self, node_id: int, adjacency: Adjacency) -> int:
        return self._micro.get((node_id, adjacency), 0)

    def get(self, node_id: int, adjacency: Adjacency) -> float:
        return self.get_micro(node_id, adjacency) / MICRO

    def micro_items(self) -> list[tuple[int, Adjacency, int]]:
        """All stored entries as (node id, adjacency, micro), sorted."""
        return [(v, a, w) for (v, a), w in sorted(self._micro.items())]

    def node_micro(self, node_id: int) -> dict[Adjacency, int]:
        return {a: w for (v, a), w in self._micro.items() if v == node_id}

    def __len__(self) -> int:
        return len(self._micro)

    def __contains__(self, key: tuple[int, Adjacency]) -> bool:
        return key in self._micro


class ObjectiveValue(NamedTuple):
    """Exact objective of a labeling plus its two components."""

    total: Fraction
    scj_changes: int
    discarded_weight: Fraction


def labeling_objective(
    tree: Phylogeny,
    labeling: Mapping[int, AbstractSet[Adjacency]],
    weights: WeightTable,
    alpha: object,
) -> ObjectiveValue:
    """Evaluate a full labeling of the internal nodes.

    The objective is ``alpha * discarded_weight + (1 - alpha) *
    scj_changes`` where discarded weight sums, over internal nodes, the
    weight of table entries missing from that node's label, and the SCJ
    term sums symmetric differences along every tree edge (leaves count
    with their fixed genomes).  Weight entries at leaf nodes never
    contribute: leaves are not free to discard anything.
    """
    alpha = as_alpha(alpha)
    labels: dict[int, AbstractSet[Adjacency]] = {}
    for v in tree.preorder():
        if tree.is_leaf(v):
            try:
                labels[v] = tree.leaf_genomes[v].adjacencies
            except KeyError:
                raise InputError(f"leaf {tree.name_of(v)} has no genome") from None
        else:
            try:
                label = labeling[v]
            except KeyError:
                raise InputError(f"labeling misses internal node {tree.name_of(v)}") from None
            ok, offenders = check_consistency(label)
            if not ok:
                listed = ", ".join(str(x) for x in offenders)
                raise InputError(
                    f"label at {tree.name_of(v)} is inconsistent, reused extremities: {listed}"
                )
            labels[v] = label
    scj = 0
    for u, v in tree.edges():
        scj += len(set(labels[u]) ^ set(labels[v]))
    discarded_micro = 0
    for v, adjacency, micro in weights.micro_items():
        if tree.is_leaf(v):
            continue
        if adjacency not in labels[v]:
            discarded_micro += micro
    discarded = Fraction(discarded_micro, MICRO)
    total = (1 - alpha) * scj + alpha * discarded
    return ObjectiveValue(total, scj, discarded)

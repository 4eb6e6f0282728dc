"""Tree, genome, and labeling file formats.

Trees are Newick; genomes and labelings are tab-separated files with
one row per chromosome: name, kind (L linear / C circular), and the
signed marker order separated by spaces.  Blank lines and lines
starting with '#' are skipped everywhere, and parse errors carry the
file name and line number.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from .core import (
    Adjacency,
    Genome,
    Node,
    Phylogeny,
    check_consistency,
    chromosome_adjacencies,
    extract_cars,
)
from .errors import InputError


# ---------------------------------------------------------------------------
# Newick trees

_NAME_STOP = set("(),:;")


class _NewickScanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def fail(self, message: str) -> None:
        raise InputError(f"newick error at offset {self.pos}: {message}")

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    def name(self) -> str:
        start = self.pos
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in _NAME_STOP or ch.isspace():
                break
            self.pos += 1
        return self.text[start : self.pos]

    def number(self) -> float:
        start = self.pos
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in _NAME_STOP or ch.isspace():
                break
            self.pos += 1
        token = self.text[start : self.pos]
        try:
            return float(token)
        except ValueError:
            self.pos = start
            self.fail(f"bad branch length {token!r}")
            raise AssertionError  # unreachable


def parse_newick(text: str) -> Phylogeny:
    """Parse one Newick tree; unnamed internal nodes get anc1, anc2, ...

    Auto-names are assigned in postorder so they are stable across
    runs, and branch lengths are kept but never used by the solvers.
    """
    scanner = _NewickScanner(text)
    scanner.skip_ws()
    if not scanner.peek():
        scanner.fail("empty input")
    root = _clade(scanner)
    scanner.skip_ws()
    if scanner.peek() == ";":
        scanner.take()
        scanner.skip_ws()
    if scanner.pos != len(scanner.text):
        scanner.fail("trailing characters after the tree")

    counter = [0]

    def assign_names(clade: dict) -> None:
        for child in clade["children"]:
            assign_names(child)
        if clade["children"] and not clade["name"]:
            counter[0] += 1
            clade["name"] = f"anc{counter[0]}"

    assign_names(root)

    nodes: list[Node] = []

    def build(clade: dict, parent: int | None) -> int:
        my_id = len(nodes)
        nodes.append(None)  # type: ignore[arg-type] # reserved, replaced below
        if not clade["children"] and not clade["name"]:
            raise InputError("newick error: a leaf has no name")
        child_ids = [build(child, my_id) for child in clade["children"]]
        nodes[my_id] = Node(
            id=my_id,
            name=clade["name"],
            parent=parent,
            children=tuple(child_ids),
            length=clade["length"],
        )
        return my_id

    build(root, None)
    return Phylogeny(nodes=tuple(nodes), root=0)


def _clade(scanner: _NewickScanner) -> dict:
    scanner.skip_ws()
    children: list[dict] = []
    if scanner.peek() == "(":
        scanner.take()
        children.append(_clade(scanner))
        scanner.skip_ws()
        while scanner.peek() == ",":
            scanner.take()
            children.append(_clade(scanner))
            scanner.skip_ws()
        if scanner.peek() != ")":
            scanner.fail("expected ',' or ')'")
        scanner.take()
    scanner.skip_ws()
    name = scanner.name()
    length = None
    scanner.skip_ws()
    if scanner.peek() == ":":
        scanner.take()
        scanner.skip_ws()
        length = scanner.number()
    return {"name": name, "children": children, "length": length}


def parse_tree(path: str | Path) -> Phylogeny:
    """Read a Newick file; see :func:`parse_newick`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read tree file {path}: {exc}") from exc
    return parse_newick(text)


def write_newick(tree: Phylogeny) -> str:
    """Render the tree with names and any stored branch lengths."""

    def render(v: int) -> str:
        node = tree.nodes[v]
        text = ""
        if node.children:
            text = "(" + ",".join(render(c) for c in node.children) + ")"
        text += node.name
        if node.length is not None:
            text += f":{node.length:.6f}"
        return text

    return render(tree.root) + ";"


# ---------------------------------------------------------------------------
# Genome / labeling tables

_KINDS = {"L": False, "C": True}


def _iter_rows(path: str | Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, raw.rstrip("\n")


def _parse_marker_row(path, lineno: int, row: str) -> tuple[str, bool, tuple[int, ...]]:
    parts = row.split("\t")
    if len(parts) != 3:
        raise InputError(f"{path}:{lineno}: expected 3 tab-separated columns")
    name, kind, order = parts[0].strip(), parts[1].strip(), parts[2].strip()
    if not name:
        raise InputError(f"{path}:{lineno}: empty name column")
    if kind not in _KINDS:
        raise InputError(f"{path}:{lineno}: chromosome kind must be L or C, got {kind!r}")
    if not order:
        raise InputError(f"{path}:{lineno}: empty marker order")
    markers = []
    for token in order.split():
        try:
            value = int(token)
        except ValueError:
            raise InputError(f"{path}:{lineno}: bad marker id {token!r}") from None
        if value == 0:
            raise InputError(f"{path}:{lineno}: marker ids must be non-zero")
        markers.append(value)
    return name, _KINDS[kind], tuple(markers)


def parse_genomes(path: str | Path) -> dict[str, Genome]:
    """Read genomes from chromosome rows and validate shared content.

    Signs choose the joined extremities, so "1 -2 3" yields the
    adjacencies (1h,2h) and (2t,3t).
    """
    chromosomes: dict[str, list[tuple[bool, tuple[int, ...]]]] = {}
    seen_markers: dict[str, set[int]] = {}
    order: list[str] = []
    for lineno, row in _iter_rows(path):
        name, circular, markers = _parse_marker_row(path, lineno, row)
        if name not in chromosomes:
            chromosomes[name] = []
            seen_markers[name] = set()
            order.append(name)
        for m in markers:
            if abs(m) in seen_markers[name]:
                raise InputError(
                    f"{path}:{lineno}: marker {abs(m)} repeats in genome {name}"
                )
            seen_markers[name].add(abs(m))
        chromosomes[name].append((circular, markers))
    if not chromosomes:
        raise InputError(f"{path}: no genome rows found")
    universe = seen_markers[order[0]]
    for name in order[1:]:
        if seen_markers[name] != universe:
            raise InputError(
                f"{path}: genome {name} has different marker content than {order[0]}"
            )
    genomes: dict[str, Genome] = {}
    for name in order:
        adjacencies: set[Adjacency] = set()
        for circular, markers in chromosomes[name]:
            try:
                adjacencies.update(chromosome_adjacencies(markers, circular=circular))
            except InputError as exc:
                raise InputError(f"{path}: genome {name}: {exc}") from exc
        genomes[name] = Genome(
            adjacencies=frozenset(adjacencies), markers=frozenset(universe)
        )
    return genomes


def parse_labeling(path: str | Path, tree: Phylogeny) -> dict[int, frozenset[Adjacency]]:
    """Read per-node marker orders keyed by internal node name.

    The file uses the genome row format with the node name in column 1.
    Nodes without rows get the empty label; unknown names are rejected.
    """
    per_node: dict[int, set[Adjacency]] = {v: set() for v in tree.internal_ids()}
    for lineno, row in _iter_rows(path):
        name, circular, markers = _parse_marker_row(path, lineno, row)
        node_id = tree.id_of(name)
        if tree.is_leaf(node_id):
            raise InputError(f"{path}:{lineno}: {name} is a leaf, not an internal node")
        universe = tree.markers
        for m in markers:
            if abs(m) not in universe:
                raise InputError(f"{path}:{lineno}: unknown marker {abs(m)}")
        try:
            per_node[node_id].update(
                chromosome_adjacencies(markers, circular=circular)
            )
        except InputError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
    for v, adjacencies in per_node.items():
        ok, offenders = check_consistency(adjacencies)
        if not ok:
            raise InputError(
                f"{path}: rows for {tree.name_of(v)} reuse extremities: "
                + ", ".join(str(x) for x in offenders)
            )
    return {v: frozenset(s) for v, s in per_node.items()}


def _car_rows(name: str, adjacencies: frozenset[Adjacency], markers) -> list[str]:
    rows = []
    for car in extract_cars(adjacencies, markers):
        kind = "C" if car.kind == "circular" else "L"
        body = " ".join(str(m) for m in car.markers)
        rows.append(f"{name}\t{kind}\t{body}")
    return rows


def write_genomes(path: str | Path, genomes: Mapping[str, Genome]) -> None:
    """Write genomes as chromosome rows, normalized through their CARs."""
    lines = []
    for name in sorted(genomes):
        genome = genomes[name]
        lines.extend(_car_rows(name, genome.adjacencies, genome.markers))
    _write_lines(path, lines)


def write_labeling(
    path: str | Path, tree: Phylogeny, labeling: Mapping[int, frozenset[Adjacency]]
) -> None:
    """Write internal-node labels as CAR rows (genome format, node name
    first); nodes appear in postorder."""
    lines = []
    for v in tree.internal_ids():
        lines.extend(_car_rows(tree.name_of(v), labeling[v], tree.markers))
    _write_lines(path, lines)


def _write_lines(path: str | Path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(line + "\n")

"""Integer-program view of a component plus a branch-and-bound solver.

The model has one binary presence variable per (internal node,
adjacency annotated there) and one binary change variable per tree edge
and adjacency with at least one undetermined endpoint; determined
endpoints (leaves, or nodes where the adjacency is not annotated) enter
the change rows as constants.  Four inequalities pin each change
variable to the absolute difference of its endpoints for every feasible
point, and per-extremity packing rows keep every node's choice a
matching, so the feasible points are exactly the consistent labelings.

Branch and bound works on the presence variables only (change values
follow from them), absence branch first, with conflicting variables
fixed eagerly; its bound drops the matching constraints and solves one
exact presence problem per adjacency on the tree.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .core import MICRO, Adjacency, Extremity, Phylogeny, WeightTable, as_alpha
from .errors import InputError, InternalInvariantError
from .graph import Component
from .dp import evaluate_component_labeling


@dataclass(frozen=True)
class PresenceVar:
    """Binary variable: adjacency kept at an internal node."""

    name: str
    node_id: int
    adjacency: Adjacency
    weight_micro: int


@dataclass(frozen=True)
class EdgeTerm:
    """Change cost of one adjacency along one tree edge.

    Either endpoint is a presence variable (index into the model's
    variable tuple) or a constant 0/1; both-constant terms survive only
    when the constants differ.
    """

    child_id: int
    adjacency: Adjacency
    parent_var: int | None
    parent_const: int
    child_var: int | None
    child_const: int

    @property
    def is_variable_pair(self) -> bool:
        return self.parent_var is not None and self.child_var is not None

    def cvar_name(self) -> str:
        a, b = self.adjacency.extremities
        return f"c_e{self.child_id}_{a}_{b}"


@dataclass(frozen=True, eq=False)
class IlpModel:
    """Scaled-integer model of one component at a fixed alpha."""

    component: Component
    tree: Phylogeny
    weights: WeightTable
    alpha: Fraction
    scale: int
    variables: tuple[PresenceVar, ...]
    edge_terms: tuple[EdgeTerm, ...]
    packing_groups: tuple[tuple[int, ...], ...]

    @property
    def change_unit(self) -> int:
        return (self.alpha.denominator - self.alpha.numerator) * MICRO

    @property
    def weight_unit(self) -> int:
        return self.alpha.numerator

    def index_of(self, name: str) -> int:
        for i, var in enumerate(self.variables):
            if var.name == name:
                return i
        raise InputError(f"unknown variable {name}")

    def evaluate(self, assignment: Mapping[str, int]) -> int:
        """Scaled objective of a full presence assignment.

        Rejects assignments that are not binary, miss a variable, or
        pick two adjacencies sharing an extremity at the same node.
        """
        vector = []
        for var in self.variables:
            if var.name not in assignment:
                raise InputError(f"assignment misses {var.name}")
            value = assignment[var.name]
            if value not in (0, 1):
                raise InputError(f"{var.name} must be 0 or 1, got {value!r}")
            vector.append(value)
        return self.evaluate_vector(vector)

    def evaluate_vector(self, vector: Sequence[int]) -> int:
        if len(vector) != len(self.variables):
            raise InputError(
                f"expected {len(self.variables)} values, got {len(vector)}"
            )
        used: dict[tuple[int, Extremity], Adjacency] = {}
        for var, value in zip(self.variables, vector):
            if value == 0:
                continue
            for x in var.adjacency.extremities:
                key = (var.node_id, x)
                if key in used:
                    raise InputError(
                        f"{var.adjacency} and {used[key]} share {x} at node "
                        f"{self.tree.name_of(var.node_id)}"
                    )
                used[key] = var.adjacency
        total = 0
        for var, value in zip(self.variables, vector):
            if value == 0:
                total += self.weight_unit * var.weight_micro
        unit = self.change_unit
        for term in self.edge_terms:
            pu = term.parent_const if term.parent_var is None else vector[term.parent_var]
            pv = term.child_const if term.child_var is None else vector[term.child_var]
            total += unit * abs(pu - pv)
        return total

    def node_labels(self, vector: Sequence[int]) -> dict[int, frozenset[Adjacency]]:
        labels: dict[int, set[Adjacency]] = {
            v: set() for v in self.tree.internal_ids()
        }
        for var, value in zip(self.variables, vector):
            if value:
                labels[var.node_id].add(var.adjacency)
        return {v: frozenset(s) for v, s in labels.items()}


@dataclass(frozen=True)
class BbSolution:
    """Outcome of the branch-and-bound search on one model."""

    assignment: dict[str, int]
    node_labels: dict[int, frozenset[Adjacency]]
    objective: Fraction
    objective_scaled: int
    scale: int
    scj_changes: int
    discarded_micro: int
    nodes_explored: int


def _var_name(node_id: int, adjacency: Adjacency) -> str:
    a, b = adjacency.extremities
    return f"p_n{node_id}_{a}_{b}"


def build_model(
    component: Component,
    tree: Phylogeny,
    weights: WeightTable,
    alpha: object,
) -> IlpModel:
    """Assemble the scaled-integer model for one component."""
    alpha = as_alpha(alpha)
    if not tree.leaf_genomes:
        raise InputError("build_model needs genomes attached to the tree")
    depths = tree.depths()
    annotated: dict[int, list[Adjacency]] = {v: [] for v in tree.internal_ids()}
    for adjacency in component.sorted_edges:
        for v in component.edges[adjacency]:
            annotated[v].append(adjacency)

    variables: list[PresenceVar] = []
    index: dict[tuple[int, Adjacency], int] = {}
    for v in sorted(annotated, key=lambda v: (depths[v], v)):
        for adjacency in annotated[v]:
            index[(v, adjacency)] = len(variables)
            variables.append(
                PresenceVar(
                    name=_var_name(v, adjacency),
                    node_id=v,
                    adjacency=adjacency,
                    weight_micro=weights.get_micro(v, adjacency),
                )
            )

    edge_set = set(component.edges)
    terms: list[EdgeTerm] = []
    for u, v in tree.edges():
        if tree.is_leaf(v):
            child_present = tree.leaf_genomes[v].adjacencies & edge_set
            relevant = sorted(set(annotated[u]) | child_present)
        else:
            relevant = sorted(set(annotated[u]) | set(annotated[v]))
        for adjacency in relevant:
            parent_var = index.get((u, adjacency))
            child_var = None if tree.is_leaf(v) else index.get((v, adjacency))
            parent_const = 0
            child_const = (
                int(adjacency in tree.leaf_genomes[v].adjacencies)
                if tree.is_leaf(v)
                else 0
            )
            if parent_var is None and child_var is None:
                if parent_const == child_const:
                    continue
            terms.append(
                EdgeTerm(
                    child_id=v,
                    adjacency=adjacency,
                    parent_var=parent_var,
                    parent_const=parent_const,
                    child_var=child_var,
                    child_const=child_const,
                )
            )

    groups: list[tuple[int, ...]] = []
    for v in sorted(annotated, key=lambda v: (depths[v], v)):
        incident: dict[Extremity, list[int]] = {}
        for adjacency in annotated[v]:
            for x in adjacency.extremities:
                incident.setdefault(x, []).append(index[(v, adjacency)])
        for x in sorted(incident):
            if len(incident[x]) >= 2:
                groups.append(tuple(incident[x]))

    return IlpModel(
        component=component,
        tree=tree,
        weights=weights,
        alpha=alpha,
        scale=alpha.denominator * MICRO,
        variables=tuple(variables),
        edge_terms=tuple(terms),
        packing_groups=tuple(groups),
    )


# ---------------------------------------------------------------------------
# LP text export


def _linear_terms(pairs: Sequence[tuple[int, str]], constant: int = 0) -> str:
    parts: list[str] = []
    for coeff, name in pairs:
        if coeff == 0:
            continue
        sign = "-" if coeff < 0 else "+"
        magnitude = abs(coeff)
        chunk = name if magnitude == 1 else f"{magnitude} {name}"
        if not parts:
            parts.append(chunk if coeff > 0 else f"- {chunk}")
        else:
            parts.append(f"{sign} {chunk}")
    if constant:
        sign = "-" if constant < 0 else "+"
        if not parts:
            parts.append(str(constant))
        else:
            parts.append(f"{sign} {abs(constant)}")
    return " ".join(parts) if parts else "0"


def export_lp(model: IlpModel, path) -> None:
    """Write the model as LP text (objective constant included).

    Coefficients are the scaled integers; the true objective is the
    written one divided by the scale recorded in the header comment.
    Change rows come in four families: for each change variable c on a
    tree edge with child presence cv and parent presence cu,

        c3: cv + cu + c <= 2      c5: cv - cu + c >= 0
        c4: cv + cu - c >= 0      c6: -cv + cu + c >= 0

    with determined endpoints moved to the right-hand side, and c7 rows
    cap each extremity at one chosen adjacency per node.
    """
    unit = model.change_unit
    coeff: dict[str, int] = {var.name: 0 for var in model.variables}
    constant = 0
    for var in model.variables:
        constant += model.weight_unit * var.weight_micro
        coeff[var.name] -= model.weight_unit * var.weight_micro
    cvars: list[str] = []
    rows: list[str] = []
    for term in model.edge_terms:
        if term.parent_var is None and term.child_var is None:
            constant += unit  # surviving constant pairs always differ
            continue
        c = term.cvar_name()
        cvars.append(c)
        coeff[c] = unit
        # child first, parent second, mirroring c3 as "pv + pu + c <= 2"
        child: list[tuple[int, str]] = []
        child_const = term.child_const
        if term.child_var is not None:
            child = [(1, model.variables[term.child_var].name)]
            child_const = 0
        parent: list[tuple[int, str]] = []
        parent_const = term.parent_const
        if term.parent_var is not None:
            parent = [(1, model.variables[term.parent_var].name)]
            parent_const = 0
        flip = [(-k, n) for k, n in child]
        flop = [(-k, n) for k, n in parent]
        rows.append(_row(f"c3_{c}", child + parent + [(1, c)], "<=",
                         2 - child_const - parent_const))
        rows.append(_row(f"c4_{c}", child + parent + [(-1, c)], ">=",
                         -child_const - parent_const))
        rows.append(_row(f"c5_{c}", child + flop + [(1, c)], ">=",
                         parent_const - child_const))
        rows.append(_row(f"c6_{c}", flip + parent + [(1, c)], ">=",
                         child_const - parent_const))
    for group in model.packing_groups:
        var = model.variables[group[0]]
        shared = _shared_extremity(model, group)
        name = f"c7_n{var.node_id}_{shared}"
        terms = [(1, model.variables[i].name) for i in group]
        rows.append(_row(name, terms, "<=", 1))

    lines: list[str] = []
    lines.append("\\ weighted adjacency labeling, one connected component")
    lines.append(
        f"\\ alpha = {model.alpha.numerator}/{model.alpha.denominator};"
        f" objective is scaled by {model.scale}"
    )
    lines.append("Minimize")
    order = [var.name for var in model.variables] + cvars
    objective = _linear_terms([(coeff[n], n) for n in order], constant)
    lines.append(f" obj: {objective}")
    lines.append("Subject To")
    lines.extend(rows)
    lines.append("Binary")
    for name in order:
        lines.append(f" {name}")
    lines.append("End")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _row(name: str, terms: Sequence[tuple[int, str]], sense: str, rhs: int) -> str:
    return f" {name}: {_linear_terms(terms)} {sense} {rhs}"


def _shared_extremity(model: IlpModel, group: tuple[int, ...]) -> Extremity:
    first = set(model.variables[group[0]].adjacency.extremities)
    second = set(model.variables[group[1]].adjacency.extremities)
    common = first & second
    if len(common) != 1:
        raise InternalInvariantError("packing group without a common extremity")
    return common.pop()


# ---------------------------------------------------------------------------
# Branch and bound


def _repair_conflicts(
    model: IlpModel, conflicts: list[list[int]], vector: list[int]
) -> list[int]:
    """Keep a candidate's presences in descending weight order, zeroing
    any that clash with a presence already kept."""
    chosen = [0] * len(model.variables)
    order = sorted(
        range(len(model.variables)),
        key=lambda j: (-model.variables[j].weight_micro, j),
    )
    for j in order:
        if vector[j] and not any(chosen[k] for k in conflicts[j]):
            chosen[j] = 1
    return chosen


def solve_bb(model: IlpModel) -> BbSolution:
    """Exact minimization by depth-first branch and bound.

    Variables are branched in model order (shallow nodes first), the
    absence branch before the presence branch; fixing a presence
    eagerly zeroes everything it conflicts with.

    The admissible bound relaxes the one-adjacency-per-extremity
    constraints, under which the component splits into one independent
    presence/absence problem per adjacency; each is solved exactly on
    the tree by a two-state scan that honors the variables fixed so
    far.  Fixing a variable therefore re-solves only its own adjacency,
    and once every variable is fixed the bound equals the objective
    itself.  The incumbent starts from the better of the all-absent
    assignment and a conflict-repaired copy of the relaxed optimum.
    """
    n = len(model.variables)
    conflicts: list[list[int]] = [[] for _ in range(n)]
    for i, a in enumerate(model.variables):
        ends_a = set(a.adjacency.extremities)
        for j in range(i + 1, n):
            b = model.variables[j]
            if a.node_id == b.node_id and ends_a & set(b.adjacency.extremities):
                conflicts[i].append(j)
                conflicts[j].append(i)

    unit = model.change_unit
    wunit = model.weight_unit
    weight_cost = [wunit * var.weight_micro for var in model.variables]
    assignment = [-1] * n

    tree = model.tree
    postorder = list(tree.postorder())
    node_children = [tree.nodes[v].children for v in range(len(tree.nodes))]
    adjacencies = model.component.sorted_edges
    adjacency_index = {a: i for i, a in enumerate(adjacencies)}
    var_at: list[dict[int, int]] = [{} for _ in adjacencies]
    adjacency_of_var = []
    for j, var in enumerate(model.variables):
        ai = adjacency_index[var.adjacency]
        var_at[ai][var.node_id] = j
        adjacency_of_var.append(ai)
    leaf_state = [
        {
            v: int(a in tree.leaf_genomes[v].adjacencies)
            for v in tree.leaves()
        }
        for a in adjacencies
    ]

    BIG = 1 << 62
    down0 = [0] * len(tree.nodes)
    down1 = [0] * len(tree.nodes)

    def adjacency_bound(ai: int) -> int:
        """Cheapest presence history of one adjacency given the fixed
        variables; absent everywhere scores 0 plus leaf mismatches."""
        vars_here = var_at[ai]
        states = leaf_state[ai]
        for v in postorder:
            children = node_children[v]
            if not children:
                present = states[v]
                down0[v] = BIG if present else 0
                down1[v] = 0 if present else BIG
                continue
            j = vars_here.get(v)
            if j is None:
                c0, c1 = 0, BIG
            elif assignment[j] == -1:
                c0, c1 = weight_cost[j], 0
            elif assignment[j] == 0:
                c0, c1 = weight_cost[j], BIG
            else:
                c0, c1 = BIG, 0
            for c in children:
                b0, b1 = down0[c], down1[c]
                c0 += b0 if b0 <= b1 + unit else b1 + unit
                c1 += b1 if b1 <= b0 + unit else b0 + unit
            down0[v] = min(c0, BIG)
            down1[v] = min(c1, BIG)
        return min(down0[tree.root], down1[tree.root])

    def relaxed_states(ai: int) -> dict[int, int]:
        """Arg-min states of one adjacency's relaxation, absence on ties."""
        adjacency_bound(ai)
        top0 = [down0[v] for v in range(len(tree.nodes))]
        top1 = [down1[v] for v in range(len(tree.nodes))]
        chosen: dict[int, int] = {}
        state = {tree.root: 0 if top0[tree.root] <= top1[tree.root] else 1}
        for v in tree.preorder():
            if v != tree.root:
                s = state[tree.nodes[v].parent]
                zero = top0[v] + unit * s
                one = top1[v] + unit * (1 - s)
                state[v] = 0 if zero <= one else 1
            if v in var_at[ai]:
                chosen[var_at[ai][v]] = state[v]
        return chosen

    bounds = [adjacency_bound(ai) for ai in range(len(adjacencies))]
    future = sum(bounds)

    def settle(i: int, value: int):
        """Fix one variable plus consequences; None signals a conflict.

        Returns an undo trail of ('fix', j) / ('bound', ai, previous)
        entries; the shared bound total is updated in place.
        """
        nonlocal future
        trail: list[tuple] = []
        touched: set[int] = set()
        queue = [(i, value)]
        while queue:
            j, b = queue.pop()
            if assignment[j] != -1:
                if assignment[j] != b:
                    _undo(trail)
                    return None
                continue
            assignment[j] = b
            trail.append(("fix", j))
            touched.add(adjacency_of_var[j])
            if b == 1:
                for k in conflicts[j]:
                    queue.append((k, 0))
        for ai in sorted(touched):
            updated = adjacency_bound(ai)
            if updated != bounds[ai]:
                trail.append(("bound", ai, bounds[ai]))
                future += updated - bounds[ai]
                bounds[ai] = updated
        return trail

    def _undo(trail) -> None:
        nonlocal future
        for entry in reversed(trail):
            if entry[0] == "fix":
                assignment[entry[1]] = -1
            else:
                _, ai, previous = entry
                future += previous - bounds[ai]
                bounds[ai] = previous

    relaxed = [0] * n
    for ai in range(len(adjacencies)):
        for j, s in relaxed_states(ai).items():
            relaxed[j] = s
    repaired = _repair_conflicts(model, conflicts, relaxed)
    best_vector = [0] * n
    best = model.evaluate_vector(best_vector)
    repaired_value = model.evaluate_vector(repaired)
    if repaired_value < best:
        best, best_vector = repaired_value, repaired
    explored = 0

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * n + 1000))
    try:

        def search(cursor: int) -> None:
            nonlocal best, best_vector, explored
            explored += 1
            if future >= best:
                return
            while cursor < n and assignment[cursor] != -1:
                cursor += 1
            if cursor == n:
                best = future
                best_vector = list(assignment)
                return
            for value in (0, 1):
                trail = settle(cursor, value)
                if trail is None:
                    continue
                search(cursor + 1)
                _undo(trail)

        search(0)
    finally:
        sys.setrecursionlimit(old_limit)

    scaled = model.evaluate_vector(best_vector)
    if scaled != best:
        raise InternalInvariantError(
            f"bound bookkeeping drifted: search found {best}, re-evaluation {scaled}"
        )
    labels = model.node_labels(best_vector)
    scj, discarded = evaluate_component_labeling(
        model.component, model.tree, model.weights, labels
    )
    check = (model.alpha.denominator - model.alpha.numerator) * MICRO * scj
    check += model.alpha.numerator * discarded
    if check != scaled:
        raise InternalInvariantError(
            f"labeling re-evaluates to {check}, search found {scaled}"
        )
    return BbSolution(
        assignment={var.name: best_vector[i] for i, var in enumerate(model.variables)},
        node_labels=labels,
        objective=Fraction(scaled, model.scale),
        objective_scaled=scaled,
        scale=model.scale,
        scj_changes=scj,
        discarded_micro=discarded,
        nodes_explored=explored,
    )

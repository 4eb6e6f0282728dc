"""End-to-end solving: decompose, route, solve, assemble, report.

The candidate adjacencies are thresholded into a global graph whose
connected components are independent subproblems.  Each component goes
to the dynamic program when its label space is affordable and to branch
and bound otherwise; the per-component optima are then assembled into
one labeling whose objective is re-checked against the direct
definition before anything is written.

Everything here is deterministic for a fixed (inputs, config, seed):
iteration orders are sorted, sampling uses seeds derived per component,
and worker threads only change wall-clock time, never bytes.
"""

from __future__ import annotations

import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .core import (
    MICRO,
    Adjacency,
    Phylogeny,
    WeightTable,
    as_alpha,
    exact_fraction,
    extract_cars,
    labeling_objective,
)
from .dp import DEFAULT_EXPLOSION_CAP, sample_component, solve_component
from .errors import CapacityExceeded, InputError, InternalInvariantError
from .formats import parse_genomes, parse_tree, write_labeling
from .graph import Component, build_global_graph, candidate_adjacencies, connected_components
from .ilp import build_model, solve_bb
from .rng import derive_seed
from .weights import boltzmann_weight_table, load_weight_table

Labeling = dict[int, frozenset[Adjacency]]


@dataclass(frozen=True)
class RunConfig:
    """Everything one run depends on, file locations included."""

    alpha: object = Fraction(1, 2)
    threshold_x: object = 0
    kt: float = 0.1
    n_samples: int = 0
    seed: int = 0
    explosion_cap: int = DEFAULT_EXPLOSION_CAP
    threads: int = 1
    solver: str = "auto"
    tree_path: str | None = None
    genomes_path: str | None = None
    weights_path: str | None = None
    boltzmann: bool = False
    out_dir: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", as_alpha(self.alpha))
        x = exact_fraction(self.threshold_x)
        if not 0 <= x <= 1:
            raise InputError(f"threshold must lie in [0, 1], got {self.threshold_x}")
        object.__setattr__(self, "threshold_x", x)
        if self.kt <= 0:
            raise InputError(f"kT must be positive, got {self.kt}")
        if self.n_samples < 0:
            raise InputError(f"sample count must be non-negative, got {self.n_samples}")
        if self.explosion_cap < 1:
            raise InputError(f"capacity must be at least 1, got {self.explosion_cap}")
        if self.threads < 1:
            raise InputError(f"thread count must be at least 1, got {self.threads}")
        if self.solver not in ("auto", "dp", "ilp"):
            raise InputError(f"solver must be auto, dp, or ilp, got {self.solver!r}")
        if self.weights_path is not None and self.boltzmann:
            raise InputError("pick one weight source: a weights file or --boltzmann")
        if self.solver == "ilp" and self.n_samples > 0:
            raise InputError("sampling needs the dp route; do not force the ilp solver")


@dataclass(frozen=True)
class ComponentReport:
    """What the solver did with one component."""

    index: int
    n_edges: int
    n_extremities: int
    max_degree: int
    label_space_bound: int
    solver: str
    objective_scaled: int
    scj_changes: int
    discarded_micro: int
    cooptimal_count: int | None
    seconds: float  # wall clock; kept out of all written outputs


@dataclass(frozen=True)
class SolveReport:
    """Assembled outcome of one solve run."""

    alpha: Fraction
    threshold_x: Fraction
    n_markers: int
    n_nodes: int
    max_component_extremities: int
    max_degree: int
    objective: Fraction
    scj_total: int
    discarded_micro: int
    cooptimal_count: int | None
    unsupported_leaf_scj: int
    filtered_weight_micro: int
    components: tuple[ComponentReport, ...]
    labeling: Labeling
    samples: tuple[Labeling, ...] = ()
    sample_frequencies: dict[tuple[int, Adjacency], Fraction] = field(
        default_factory=dict
    )

    @property
    def discarded_weight(self) -> Fraction:
        return Fraction(self.discarded_micro, MICRO)


@dataclass(frozen=True)
class _ComponentOutcome:
    labels: Labeling
    objective_scaled: int
    scj_changes: int
    discarded_micro: int
    cooptimal_count: int | None
    solver: str
    seconds: float
    sample_labels: tuple[Labeling, ...] = ()


def _solve_one(
    component: Component,
    tree: Phylogeny,
    weights: WeightTable,
    config: RunConfig,
    index: int,
) -> _ComponentOutcome:
    bound = component.label_space_bound
    use_dp = config.solver == "dp" or (
        config.solver == "auto" and bound * bound <= config.explosion_cap
    )
    started = time.perf_counter()
    if use_dp:
        solution, table = solve_component(
            component, tree, weights, config.alpha, explosion_cap=config.explosion_cap
        )
        samples = ()
        if config.n_samples > 0:
            drawn = sample_component(
                component,
                tree,
                weights,
                config.alpha,
                config.n_samples,
                derive_seed(config.seed, "component", index),
                table=table,
            )
            samples = tuple(s.node_labels for s in drawn)
        return _ComponentOutcome(
            labels=solution.node_labels,
            objective_scaled=solution.objective_scaled,
            scj_changes=solution.scj_changes,
            discarded_micro=solution.discarded_micro,
            cooptimal_count=solution.cooptimal_count,
            solver="dp",
            seconds=time.perf_counter() - started,
            sample_labels=samples,
        )
    if config.n_samples > 0:
        raise CapacityExceeded(
            f"component {index} needs the ilp route (label bound {bound}),"
            " which cannot sample; raise --cap or drop --samples"
        )
    model = build_model(component, tree, weights, config.alpha)
    solution = solve_bb(model)
    return _ComponentOutcome(
        labels=solution.node_labels,
        objective_scaled=solution.objective_scaled,
        scj_changes=solution.scj_changes,
        discarded_micro=solution.discarded_micro,
        cooptimal_count=None,
        solver="ilp",
        seconds=time.perf_counter() - started,
        sample_labels=(),
    )


def solve_instance(
    tree: Phylogeny, weights: WeightTable, config: RunConfig
) -> SolveReport:
    """Solve one labeled instance end to end (no file output)."""
    if not tree.leaf_genomes:
        raise InputError("the tree has no genomes attached")
    candidates = candidate_adjacencies(tree)
    graph = build_global_graph(tree, candidates, weights, config.threshold_x)
    components = connected_components(graph)

    if config.threads == 1 or len(components) <= 1:
        outcomes = [
            _solve_one(component, tree, weights, config, i)
            for i, component in enumerate(components)
        ]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = [
                pool.submit(_solve_one, component, tree, weights, config, i)
                for i, component in enumerate(components)
            ]
            outcomes = [f.result() for f in futures]

    internal = tree.internal_ids()
    labeling: Labeling = {v: frozenset() for v in internal}
    for outcome in outcomes:
        for v, label in outcome.labels.items():
            labeling[v] = labeling[v] | label

    alpha = config.alpha
    num, den = alpha.numerator, alpha.denominator
    edge_set = set(graph.edges)
    unsupported = sum(
        len(tree.leaf_genomes[v].adjacencies - edge_set) for v in tree.leaves()
    )
    annotated = {(v, a) for a, nodes in graph.edges.items() for v in nodes}
    filtered_micro = sum(
        micro
        for v, a, micro in weights.micro_items()
        if not tree.is_leaf(v) and (v, a) not in annotated
    )

    scaled_sum = sum(o.objective_scaled for o in outcomes)
    scale = den * MICRO
    total = (
        Fraction(scaled_sum, scale)
        + Fraction(den - num, den) * unsupported
        + Fraction(num, den) * Fraction(filtered_micro, MICRO)
    )
    direct = labeling_objective(tree, labeling, weights, alpha)
    if direct.total != total:
        raise InternalInvariantError(
            f"assembled objective {total} disagrees with direct evaluation "
            f"{direct.total}"
        )

    counts = [o.cooptimal_count for o in outcomes]
    cooptimal: int | None = 1
    for c in counts:
        if c is None:
            cooptimal = None
            break
        cooptimal *= c

    samples: tuple[Labeling, ...] = ()
    frequencies: dict[tuple[int, Adjacency], Fraction] = {}
    if config.n_samples > 0:
        assembled = []
        for s in range(config.n_samples):
            merged: Labeling = {v: frozenset() for v in internal}
            for outcome in outcomes:
                for v, label in outcome.sample_labels[s].items():
                    merged[v] = merged[v] | label
            assembled.append(merged)
        samples = tuple(assembled)
        tally: dict[tuple[int, Adjacency], int] = {}
        for merged in samples:
            for v in internal:
                for a in merged[v]:
                    tally[(v, a)] = tally.get((v, a), 0) + 1
        frequencies = {
            key: Fraction(count, config.n_samples)
            for key, count in tally.items()
        }

    return SolveReport(
        alpha=alpha,
        threshold_x=config.threshold_x,
        n_markers=len(tree.markers),
        n_nodes=len(tree.nodes),
        max_component_extremities=max(
            (c.n_extremities for c in components), default=0
        ),
        max_degree=max((c.max_degree for c in components), default=0),
        objective=direct.total,
        scj_total=direct.scj_changes,
        discarded_micro=sum(o.discarded_micro for o in outcomes) + filtered_micro,
        cooptimal_count=cooptimal,
        unsupported_leaf_scj=unsupported,
        filtered_weight_micro=filtered_micro,
        components=tuple(
            ComponentReport(
                index=i,
                n_edges=len(component.edges),
                n_extremities=component.n_extremities,
                max_degree=component.max_degree,
                label_space_bound=component.label_space_bound,
                solver=outcome.solver,
                objective_scaled=outcome.objective_scaled,
                scj_changes=outcome.scj_changes,
                discarded_micro=outcome.discarded_micro,
                cooptimal_count=outcome.cooptimal_count,
                seconds=outcome.seconds,
            )
            for i, (component, outcome) in enumerate(zip(components, outcomes))
        ),
        labeling=labeling,
        samples=samples,
        sample_frequencies=frequencies,
    )


def build_weights(tree: Phylogeny, config: RunConfig) -> WeightTable:
    """Weight source resolution: file, Boltzmann, or all zeros."""
    if config.weights_path is not None:
        return load_weight_table(config.weights_path, tree)
    if config.boltzmann:
        return boltzmann_weight_table(tree, config.kt)
    return WeightTable()


def run_solve(config: RunConfig) -> SolveReport:
    """File-level entry: parse, solve, and (if configured) write outputs."""
    if config.tree_path is None or config.genomes_path is None:
        raise InputError("a tree file and a genomes file are required")
    tree = parse_tree(config.tree_path)
    genomes = parse_genomes(config.genomes_path)
    tree = tree.with_genomes(genomes)
    weights = build_weights(tree, config)
    report = solve_instance(tree, weights, config)
    if config.out_dir is not None:
        write_outputs(report, tree, config)
    return report


# ---------------------------------------------------------------------------
# Output files


def _fmt(value) -> str:
    return f"{float(value):.6f}"


def write_outputs(report: SolveReport, tree: Phylogeny, config: RunConfig) -> None:
    """Write cars.tsv, stats.tsv, frequency.tsv, samples/, manifest.json.

    Content depends only on (inputs, config, seed): no timestamps, no
    wall-clock times, no thread count, and no output directory paths
    appear in any file.
    """
    out = Path(config.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_labeling(out / "cars.tsv", tree, report.labeling)
    _write_stats(out / "stats.tsv", report, tree)
    if report.samples:
        _write_frequency(out / "frequency.tsv", report, tree)
        samples_dir = out / "samples"
        samples_dir.mkdir(exist_ok=True)
        for i, sample in enumerate(report.samples):
            write_labeling(samples_dir / f"sample_{i:04d}.tsv", tree, sample)
    _write_manifest(out / "manifest.json", config)


def _write_stats(path: Path, report: SolveReport, tree: Phylogeny) -> None:
    lines = [
        f"# objective\t{_fmt(report.objective)}",
        f"# objective_exact\t{report.objective.numerator}/{report.objective.denominator}",
        f"# scj_total\t{report.scj_total}",
        f"# discarded_weight\t{_fmt(report.discarded_weight)}",
        f"# alpha\t{report.alpha.numerator}/{report.alpha.denominator}",
        f"# threshold\t{_fmt(report.threshold_x)}",
        f"# cooptimal_count\t{report.cooptimal_count if report.cooptimal_count is not None else 'NA'}",
        f"# components\t{len(report.components)}",
        f"# component_solvers\t{','.join(c.solver for c in report.components) or '-'}",
        f"# max_component_extremities\t{report.max_component_extremities}",
        f"# max_degree\t{report.max_degree}",
        f"# unsupported_leaf_scj\t{report.unsupported_leaf_scj}",
        f"# filtered_weight\t{_fmt(Fraction(report.filtered_weight_micro, MICRO))}",
        "node\tn_cars\tn_adjacencies\tscj_to_parent\tscj_leaf_edges",
    ]
    labels = report.labeling
    for v in tree.internal_ids():
        label = labels[v]
        cars = extract_cars(label, tree.markers)
        node = tree.nodes[v]
        if node.parent is None:
            up = ""
        else:
            up = str(len(label ^ labels[node.parent]))
        leaf_scj = sum(
            len(label ^ tree.leaf_genomes[c].adjacencies)
            for c in node.children
            if tree.is_leaf(c)
        )
        lines.append(
            f"{tree.name_of(v)}\t{len(cars)}\t{len(label)}\t{up}\t{leaf_scj}"
        )
    _write_text(path, lines)


def _write_frequency(path: Path, report: SolveReport, tree: Phylogeny) -> None:
    lines = ["node\textremity_a\textremity_b\tfrequency"]
    for v in tree.internal_ids():
        rows = sorted(
            (a, fraction)
            for (node_id, a), fraction in report.sample_frequencies.items()
            if node_id == v
        )
        for a, fraction in rows:
            x, y = a.extremities
            lines.append(f"{tree.name_of(v)}\t{x}\t{y}\t{_fmt(fraction)}")
    _write_text(path, lines)


def _write_manifest(path: Path, config: RunConfig) -> None:
    import networkx

    alpha = config.alpha
    payload = {
        "tool": "scjlabel",
        "version": __version__,
        "python": ".".join(str(p) for p in sys.version_info[:3]),
        "networkx": networkx.__version__,
        "config": {
            "alpha": f"{alpha.numerator}/{alpha.denominator}",
            "threshold": f"{config.threshold_x.numerator}/{config.threshold_x.denominator}",
            "kt": config.kt,
            "n_samples": config.n_samples,
            "seed": config.seed,
            "explosion_cap": config.explosion_cap,
            "solver": config.solver,
            "weights": (
                "file" if config.weights_path is not None
                else "boltzmann" if config.boltzmann
                else "none"
            ),
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_text(path: Path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(line + "\n")
